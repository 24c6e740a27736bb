import numpy as np
import pytest

from symforge.bandit import (
    BanditPosterior,
    DiscoveryConfig,
    LinearInstance,
    evaluate_top_arms,
    filter_arms,
    lints_play_counts,
    posterior_sample,
    posterior_update,
    run_discovery,
    screen_coordinates,
    simulate_linear,
)
from symforge.errors import NumericError
from symforge.groups import CYCLIC, SYMMETRIC, GroupDescriptor
from symforge.net import Dataset, TrainConfig
from symforge.selection import encode_arm, enumerate_arms

FAST = TrainConfig(epochs=20, batch_size=16, seed=0)


def test_posterior_single_unit_observation():
    post = BanditPosterior.fresh(3, nu=1.0)
    e1 = np.array([1.0, 0.0, 0.0])
    post = posterior_update(post, e1, gamma=1.0)
    assert np.allclose(post.mu_hat, [0.5, 0.0, 0.0])
    assert np.allclose(post.B, np.diag([2.0, 1.0, 1.0]))


def test_posterior_mean_is_exact_solution():
    rng = np.random.default_rng(0)
    post = BanditPosterior.fresh(5, nu=0.3)
    for _ in range(20):
        a = rng.integers(0, 2, size=5).astype(float)
        post = posterior_update(post, a, float(rng.normal()))
    resid = np.linalg.norm(post.B @ post.mu_hat - post.f)
    assert resid <= 1e-10 * max(np.linalg.norm(post.f), 1.0)


def test_posterior_sample_with_zero_nu_is_the_mean():
    post = BanditPosterior.fresh(4, nu=0.0)
    post = posterior_update(post, np.array([1.0, 1.0, 0.0, 0.0]), 0.7)
    rng = np.random.default_rng(1)
    for _ in range(5):
        assert np.array_equal(posterior_sample(post, rng), post.mu_hat)


def test_posterior_sample_moments():
    # Fresh posterior: samples are N(0, nu^2 I); check first two moments
    # to three standard errors over many draws.
    nu = 0.7
    post = BanditPosterior.fresh(2, nu=nu)
    rng = np.random.default_rng(2)
    draws = np.array([posterior_sample(post, rng) for _ in range(20000)])
    se_mean = nu / np.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0)) <= 3 * se_mean)
    cov = np.cov(draws.T)
    se_var = nu**2 * np.sqrt(2 / len(draws))
    assert np.all(np.abs(np.diag(cov) - nu**2) <= 3 * se_var)
    assert abs(cov[0, 1]) <= 3 * nu**2 / np.sqrt(len(draws))


def test_posterior_update_shrinks_variance_along_arm():
    post = BanditPosterior.fresh(3, nu=1.0)
    a = np.array([1.0, 1.0, 0.0]) / np.sqrt(2.0)
    before = a @ np.linalg.inv(post.B) @ a
    post = posterior_update(post, a, 0.1)
    after = a @ np.linalg.inv(post.B) @ a
    # Sherman-Morrison: the quadratic form drops by before^2 / (1 + before).
    assert np.isclose(before - after, before**2 / (1 + before))


def test_posterior_rejects_nonfinite_reward():
    post = BanditPosterior.fresh(2, nu=0.5)
    with pytest.raises(NumericError):
        posterior_update(post, np.array([1.0, 0.0]), float("nan"))


def test_reward_rescaling_preserves_ranking():
    rng = np.random.default_rng(3)
    arms = enumerate_arms(4)
    pulls = [(arms[i % len(arms)].bits, float(rng.normal())) for i in range(30)]
    base = BanditPosterior.fresh(7, nu=0.5)
    scaled = BanditPosterior.fresh(7, nu=0.5)
    for bits, gamma in pulls:
        base = posterior_update(base, bits, gamma)
        scaled = posterior_update(scaled, bits, 2.5 * gamma)
    assert np.allclose(scaled.mu_hat, 2.5 * base.mu_hat)
    order = lambda post: sorted(
        arms, key=lambda a: (-float(np.dot(post.mu_hat, a.bits)), a.bits)
    )
    assert [a.bits for a in order(base)] == [a.bits for a in order(scaled)]


def _toy_dataset(n=4, m=40, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(m, n))
    y = X[:, 0] + X[:, 1] + 0.0 * X[:, 2:].sum(axis=1)
    return Dataset(X, (y - y.min()) / (y.max() - y.min()))


def test_discovery_config_validation():
    with pytest.raises(ValueError):
        DiscoveryConfig(T=10, reward_holdout=1.0)
    cfg = DiscoveryConfig(T=0, train_cfg=FAST)
    with pytest.raises(ValueError):
        run_discovery(enumerate_arms(3), _toy_dataset(3), cfg)
    with pytest.raises(ValueError):
        run_discovery([], _toy_dataset(3), DiscoveryConfig(T=2, train_cfg=FAST))


def test_discovery_single_arm_runs_all_pulls():
    arm = encode_arm(GroupDescriptor(SYMMETRIC, (0, 1), 4))
    cfg = DiscoveryConfig(T=4, train_cfg=FAST, seed=1)
    result = run_discovery([arm], _toy_dataset(), cfg)
    assert len(result.records) == 4
    assert all(rec.arm.bits == arm.bits for rec in result.records)
    assert result.ranking == [arm]
    # Every pull updates the precision by the same rank-1 term.
    expected_B = np.eye(7) + 4 * np.outer(arm.bits, arm.bits)
    assert np.allclose(result.posterior.B, expected_B)


def test_discovery_is_deterministic():
    arms = enumerate_arms(4)
    cfg = DiscoveryConfig(T=6, train_cfg=FAST, seed=5)
    r1 = run_discovery(arms, _toy_dataset(), cfg)
    r2 = run_discovery(arms, _toy_dataset(), cfg)
    assert [rec.arm.bits for rec in r1.records] == [rec.arm.bits for rec in r2.records]
    assert [rec.reward for rec in r1.records] == [rec.reward for rec in r2.records]
    assert [a.bits for a in r1.ranking] == [a.bits for a in r2.ranking]


def test_discovery_literal_reward_mode():
    # reward_holdout = 0 switches to the capped negative-training-loss rule.
    arms = enumerate_arms(3)
    cfg = DiscoveryConfig(
        T=5, train_cfg=FAST, reward_holdout=0.0, size_bonus=0.0, seed=2
    )
    result = run_discovery(arms, _toy_dataset(3), cfg)
    for rec in result.records:
        assert -1.0 <= rec.reward <= 0.0


def test_discovery_survives_divergence():
    arms = enumerate_arms(3)
    bad = TrainConfig(epochs=30, batch_size=16, lr_initial=1e6, lr_decay=1.0)
    cfg = DiscoveryConfig(T=3, train_cfg=bad, seed=0)
    with np.errstate(over="ignore", invalid="ignore"):
        result = run_discovery(arms, _toy_dataset(3), cfg)
    assert all(rec.reward == -1.0 for rec in result.records)
    assert all(np.isinf(rec.train_loss) for rec in result.records)


def test_screen_coordinates_finds_support():
    ds = _toy_dataset(n=4, m=64, seed=7)
    cfg = TrainConfig(epochs=150, batch_size=16, seed=0)
    kept = screen_coordinates(ds, cfg, threshold=0.08, repeats=20, seed=0)
    assert set(kept) >= {0, 1}
    assert set(kept) <= {0, 1, 2, 3}
    arms = filter_arms(enumerate_arms(4), kept)
    assert all(set(a.descriptor.index_set) <= set(kept) for a in arms)


def test_screen_coordinates_falls_back_to_all():
    rng = np.random.default_rng(9)
    ds = Dataset(rng.uniform(size=(40, 4)), rng.uniform(size=40))  # pure noise
    kept = screen_coordinates(ds, FAST, threshold=10.0, repeats=5, seed=0)
    assert kept == (0, 1, 2, 3)


def test_evaluate_top_arms_trains_missing():
    arms = enumerate_arms(3)
    ds = _toy_dataset(3)
    cfg = DiscoveryConfig(T=1, train_cfg=FAST, seed=0)
    result = run_discovery(arms, ds, cfg)
    lazy = evaluate_top_arms(result, ds, top=3)
    assert sum(mae is None for _, mae in lazy) >= 1
    eager = evaluate_top_arms(result, ds, top=3, train_data=ds, train_cfg=FAST)
    assert all(mae is not None for _, mae in eager)


def test_linear_instance_requires_unique_best():
    with pytest.raises(ValueError):
        LinearInstance(np.array([1.0, 1.0]), np.eye(2), 0.1)
    inst = LinearInstance(np.array([1.0, 0.4]), np.eye(2), 0.1)
    assert inst.best_index == 0
    assert np.isclose(inst.delta_min, 0.6)


def test_simulator_validation():
    inst = LinearInstance(np.array([1.0, 0.4]), np.eye(2), 0.1)
    with pytest.raises(ValueError):
        simulate_linear(inst, [10], nu=0.5, trials=0)


def test_regret_rate_improves_with_horizon():
    # Pseudo-regret per step at T = 1000 should be at most half of the
    # per-step regret at T = 100, averaged over independent runs.
    inst = LinearInstance(np.array([1.0, 0.2, 0.2, 0.2]), np.eye(4), 0.1)
    gaps = inst.arms @ inst.mu_star
    gaps = gaps.max() - gaps
    horizons = (100, 1000)
    per_step = {T: 0.0 for T in horizons}
    root = np.random.SeedSequence(42)
    trials = 60
    for child in root.spawn(trials):
        rng = np.random.default_rng(child)
        snaps = lints_play_counts(inst, horizons, nu=0.5, rng=rng)
        for T in horizons:
            per_step[T] += float(snaps[T] @ gaps) / T / trials
    assert per_step[1000] <= 0.5 * per_step[100]


def test_misidentification_follows_log_over_t():
    inst = LinearInstance(np.array([1.0, 0.2, 0.2, 0.2, 0.2]), np.eye(5), 0.1)
    horizons = [100, 200, 400, 800]
    rates = simulate_linear(inst, horizons, nu=0.5, trials=100, seed=0)
    env = np.array([np.log(T) / T for T in horizons])
    obs = np.array([rates[T] for T in horizons])
    c = float(env @ obs / (env @ env))  # least squares through the origin
    assert c > 0
    assert rates[800] <= rates[100] + 0.05
