"""Linear Thompson sampling over arms, and a synthetic linear-bandit simulator.

The posterior is the standard Gaussian linear-model one: precision
B = I + sum a a^T over played arms, reward-weighted sum f, mean B^-1 f.
Sampling uses the Cholesky factor of B so the sample covariance is exactly
nu^2 B^-1.  The simulator checks the log(T)/T misidentification trend for
the empirical-play recommendation rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular

from .errors import NumericError, TrainingDivergedError
from .net import (
    SQUARED,
    Dataset,
    TrainConfig,
    evaluate,
    mean_loss,
    train_reference_mlp,
    train_sgd,
)
from .selection import ArmFeature, SelectionPair


@dataclass(frozen=True)
class BanditPosterior:
    B: np.ndarray  # (d, d) precision, I + sum a a^T
    f: np.ndarray  # (d,) reward-weighted arm sum
    mu_hat: np.ndarray  # exact solution of B mu = f
    nu: float

    @staticmethod
    def fresh(d: int, nu: float) -> "BanditPosterior":
        return BanditPosterior(np.eye(d), np.zeros(d), np.zeros(d), nu)

    @property
    def d(self) -> int:
        return self.B.shape[0]


def posterior_sample(post: BanditPosterior, rng: np.random.Generator) -> np.ndarray:
    """Draw mu ~ N(mu_hat, nu^2 B^-1) via the upper Cholesky factor."""
    try:
        upper = cholesky(post.B, lower=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - B is SPD by design
        raise NumericError(f"posterior precision not SPD: {exc}")
    z = rng.standard_normal(post.d)
    return post.mu_hat + post.nu * solve_triangular(upper, z, lower=False)


def posterior_update(post: BanditPosterior, a, gamma: float) -> BanditPosterior:
    """Rank-1 precision update; the mean is re-solved, never drifted."""
    a = np.asarray(a, dtype=float)
    if not np.isfinite(gamma):
        raise NumericError("reward must be finite")
    B = post.B + np.outer(a, a)
    f = post.f + gamma * a
    c = cholesky(B, lower=True)
    mu_hat = cho_solve((c, True), f)
    return BanditPosterior(B, f, mu_hat, post.nu)


def screen_coordinates(
    dataset: Dataset,
    train_cfg: TrainConfig,
    holdout: float = 0.25,
    threshold: float = 0.08,
    repeats: int = 30,
    seed: int = 0,
) -> tuple:
    """Coordinates the target measurably depends on, by permutation importance.

    A symmetry-free reference MLP is fit on the head of the dataset; a
    coordinate is kept when shuffling its column raises the held-out MSE by
    more than `threshold` times the base MSE.  Restricting arms to the kept
    coordinates removes the vacuous arms over coordinates the target
    ignores (any subgroup acting only on those is trivially respected and
    would crowd the ranking).  Falls back to all coordinates if fewer than
    two pass.
    """
    n_held = int(round(holdout * len(dataset)))
    if not 0 < n_held < len(dataset):
        raise ValueError("holdout must leave both a fit and a held part")
    fit = Dataset(dataset.inputs[:-n_held], dataset.targets[:-n_held])
    held = Dataset(dataset.inputs[-n_held:], dataset.targets[-n_held:])
    _, predict = train_reference_mlp(fit, train_cfg)
    base = max(float(np.mean((predict(held.inputs) - held.targets) ** 2)), 1e-12)
    rng = np.random.default_rng(seed)
    n = dataset.inputs.shape[1]
    importance = np.zeros(n)
    for j in range(n):
        for _ in range(repeats):
            shuffled = held.inputs.copy()
            shuffled[:, j] = shuffled[rng.permutation(n_held), j]
            importance[j] += (
                float(np.mean((predict(shuffled) - held.targets) ** 2)) - base
            )
    importance /= repeats
    kept = tuple(int(j) for j in np.flatnonzero(importance > threshold * base))
    if len(kept) < 2:
        return tuple(range(n))
    return kept


def filter_arms(arms, coordinates) -> list:
    """Arms whose index set lies inside the given coordinate set."""
    allowed = set(coordinates)
    return [a for a in arms if set(a.descriptor.index_set) <= allowed]


@dataclass(frozen=True)
class PullRecord:
    t: int
    arm: ArmFeature
    reward: float
    train_loss: float


@dataclass
class DiscoveryConfig:
    T: int
    nu: float = 0.5
    train_cfg: TrainConfig = field(default_factory=TrainConfig)
    loss_cap: float = 1.0
    reward_holdout: float = 0.25
    size_bonus: float = 1.2
    cold_start: bool = True
    revisit_epochs: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.reward_holdout < 1.0:
            raise ValueError("reward_holdout must be in [0, 1)")


@dataclass
class DiscoveryResult:
    ranking: list[ArmFeature]  # all arms, by a^T mu_hat descending
    records: list[PullRecord]
    posterior: BanditPosterior
    arm_losses: dict  # bits -> best training loss seen
    arm_params: dict  # bits -> trained PhiParams


def _rank(arms, mu_hat):
    scored = [(-float(np.dot(mu_hat, a.bits)), a.bits, a) for a in arms]
    scored.sort(key=lambda t: (t[0], t[1]))
    return [a for _, _, a in scored]


def run_discovery(arms, dataset: Dataset, cfg: DiscoveryConfig) -> DiscoveryResult:
    """Algorithm loop: sample mu, play the argmax arm, train phi for it,
    reward with the capped negative loss, update the posterior.

    The reward loss is measured on a held-out tail of the dataset (fraction
    reward_holdout, trained on the rest): with enough epochs every arm can
    memorize a small training set, but only arms whose symmetry the target
    respects generalize, so the held-out loss is what separates them.  The
    reward is centered on the held-out loss of a symmetry-free reference
    MLP trained once with the same budget: arms whose inductive bias helps
    get positive rewards, harmful constraints get negative ones, so the
    fitted mu_hat turns positive exactly on the useful coordinates and the
    final argmax recovers the maximal consistent arm.  With
    reward_holdout = 0 the literal rule is used instead: reward
    -min(L_train, loss_cap)/loss_cap.

    Training failures never abort the loop; a diverged arm gets the floor
    reward -1.  Revisited arms warm start from their cached weights unless
    cold_start is set.
    """
    if cfg.T < 1:
        raise ValueError("need T >= 1")
    if not arms:
        raise ValueError("empty arm set")
    rng = np.random.default_rng(cfg.seed)
    d = len(arms[0].bits)
    post = BanditPosterior.fresh(d, cfg.nu)
    records = []
    arm_losses: dict = {}
    arm_params: dict = {}
    n_coords = dataset.inputs.shape[1]
    n_held = int(round(cfg.reward_holdout * len(dataset)))
    if 0 < n_held < len(dataset):
        fit_data = Dataset(dataset.inputs[:-n_held], dataset.targets[:-n_held])
        held_data = Dataset(dataset.inputs[-n_held:], dataset.targets[-n_held:])
        _, ref_predict = train_reference_mlp(fit_data, cfg.train_cfg)
        ref_resid = ref_predict(held_data.inputs) - held_data.targets
        ref_loss = float(
            np.mean(ref_resid**2)
            if cfg.train_cfg.loss_kind == SQUARED
            else np.mean(np.abs(ref_resid))
        )
        ref_loss = max(ref_loss, 1e-12)
    else:
        fit_data, held_data, ref_loss = dataset, None, None
    for t in range(1, cfg.T + 1):
        mu = posterior_sample(post, rng)
        arm = _argmax(arms, mu)
        sp = SelectionPair.for_descriptor(arm.descriptor)
        train_cfg = cfg.train_cfg
        init = None
        if not cfg.cold_start and arm.bits in arm_params:
            init = arm_params[arm.bits]
            if cfg.revisit_epochs is not None:
                train_cfg = TrainConfig(
                    epochs=cfg.revisit_epochs,
                    batch_size=train_cfg.batch_size,
                    lr_initial=train_cfg.lr_initial,
                    lr_decay=train_cfg.lr_decay,
                    seed=train_cfg.seed + t,
                    loss_kind=train_cfg.loss_kind,
                )
        try:
            params, loss = train_sgd(fit_data, sp, train_cfg, init=init)
            if held_data is not None:
                loss = mean_loss(params, sp, held_data, train_cfg.loss_kind)
                gamma = float(np.clip((ref_loss - loss) / ref_loss, -1.0, 1.0))
                # Occam bonus for larger index sets: among arms the target is
                # consistent with, prefer the maximal symmetry (the smaller
                # function class), so the fitted model ranks a group above
                # its subgroups on the same support.
                gamma += cfg.size_bonus * len(arm.descriptor.index_set) / n_coords
            else:
                gamma = -min(loss, cfg.loss_cap) / cfg.loss_cap
            arm_params[arm.bits] = params
            prev = arm_losses.get(arm.bits)
            arm_losses[arm.bits] = loss if prev is None else min(prev, loss)
        except TrainingDivergedError:
            loss = float("inf")
            gamma = -1.0
        records.append(PullRecord(t, arm, gamma, loss))
        post = posterior_update(post, arm.bits, gamma)
    return DiscoveryResult(_rank(arms, post.mu_hat), records, post, arm_losses, arm_params)


def _argmax(arms, mu):
    best, best_score = None, -np.inf
    for arm in arms:
        score = float(np.dot(mu, arm.bits))
        if score > best_score or (score == best_score and arm.bits < best.bits):
            best, best_score = arm, score
    return best


def evaluate_top_arms(
    result: DiscoveryResult,
    dataset: Dataset,
    top: int = 3,
    train_data: Dataset | None = None,
    train_cfg: TrainConfig | None = None,
):
    """Validation MAE for the leading ranked arms.

    Arms the bandit never trained are evaluated as None, unless train_data
    and train_cfg are given, in which case they are trained on demand."""
    out = []
    for arm in result.ranking[:top]:
        params = result.arm_params.get(arm.bits)
        sp = SelectionPair.for_descriptor(arm.descriptor)
        if params is None and train_data is not None and train_cfg is not None:
            try:
                params, _ = train_sgd(train_data, sp, train_cfg)
            except TrainingDivergedError:
                params = None
        mae = None if params is None else evaluate(params, sp, dataset, metric="MAE")
        out.append((arm, mae))
    return out


@dataclass
class LinearInstance:
    """A synthetic linear bandit with a unique best arm and Gaussian noise."""

    mu_star: np.ndarray
    arms: np.ndarray  # (n_arms, d) binary feature rows
    noise_sigma: float
    delta_min: float = 0.0

    def __post_init__(self):
        self.mu_star = np.asarray(self.mu_star, dtype=float)
        self.arms = np.asarray(self.arms, dtype=float)
        means = self.arms @ self.mu_star
        order = np.sort(means)[::-1]
        gap = float(order[0] - order[1])
        if gap <= 0:
            raise ValueError("instance needs a unique best arm")
        self.delta_min = gap
        self.best_index = int(np.argmax(means))


def lints_play_counts(instance: LinearInstance, horizons, nu, rng):
    """One LinTS run to max(horizons); returns play counts at each horizon."""
    d = instance.mu_star.shape[0]
    post = BanditPosterior.fresh(d, nu)
    counts = np.zeros(instance.arms.shape[0], dtype=int)
    snapshots = {}
    horizon_set = set(horizons)
    means = instance.arms @ instance.mu_star
    for t in range(1, max(horizons) + 1):
        mu = posterior_sample(post, rng)
        idx = int(np.argmax(instance.arms @ mu))
        reward = means[idx] + instance.noise_sigma * rng.standard_normal()
        post = posterior_update(post, instance.arms[idx], reward)
        counts[idx] += 1
        if t in horizon_set:
            snapshots[t] = counts.copy()
    return snapshots


def simulate_linear(instance: LinearInstance, horizons, nu, trials, seed=0):
    """Empirical P[A_T != a*] per horizon, A_T drawn from the play counts."""
    if trials < 1:
        raise ValueError("need at least one trial")
    horizons = sorted(horizons)
    misid = {T: 0 for T in horizons}
    root = np.random.SeedSequence(seed)
    for child in root.spawn(trials):
        rng = np.random.default_rng(child)
        snapshots = lints_play_counts(instance, horizons, nu, rng)
        for T in horizons:
            counts = snapshots[T]
            guess = rng.choice(len(counts), p=counts / counts.sum())
            misid[T] += int(guess != instance.best_index)
    return {T: misid[T] / trials for T in horizons}
