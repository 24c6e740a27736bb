"""Command-line entry point: dataset generation, discovery runs, property
verification suites, and the linear-bandit simulator.

Every command is a pure function of (config file, seed): artifacts land in
an output directory named by the hash of the effective configuration, so
re-running a config reproduces its outputs bit for bit.

Exit codes: 0 = ok, 1 = a verification or discovery check failed,
2 = usage or configuration error.
"""

from __future__ import annotations

import hashlib
import sys
import time
from pathlib import Path

import click
import numpy as np
import yaml

from .bandit import (
    DiscoveryConfig,
    LinearInstance,
    evaluate_top_arms,
    filter_arms,
    run_discovery,
    screen_coordinates,
    simulate_linear,
)
from .errors import SymforgeError
from .groups import CYCLIC, DIHEDRAL, SYMMETRIC, GroupDescriptor, elements
from .net import TrainConfig, Dataset, forward, gradient_check, init_params
from .oracle import (
    check_invariance,
    find_set_e_counterexample,
    nonrealizability_counts,
    verify_orbit_mapping,
    verify_product_group,
)
from .relaxed import evaluate_relaxed, train_relaxed
from .selection import SelectionPair, dense_render, enumerate_arms
from .tasks import (
    BUILTIN_NAMES,
    builtin_polynomial,
    gen_quadrangle_dataset,
    make_splits,
    persist_dataset,
)

_DEFAULTS = {
    "task": {"kind": "polynomial", "name": "Z_I(5)", "sizes": [64, 480, 4800], "seed": 0},
    "arms": {"screen": True, "screen_threshold": 0.08, "screen_repeats": 30},
    "bandit": {
        "T": None,  # default 4n
        "nu": 0.5,
        "loss_cap": 1.0,
        "reward_holdout": 0.25,
        "size_bonus": 1.2,
        "cold_start": True,
        "revisit_epochs": None,
    },
    "training": {
        "epochs": 400,
        "batch_size": 16,
        "lr_initial": 0.2,
        "lr_decay": 0.997,
        "loss": "squared",
    },
    "sim": {
        "mu_star": [1.0, 0.2, 0.2, 0.2, 0.2],
        "noise_sigma": 0.1,
        "nu": 0.5,
        "horizons": [100, 200, 400, 800],
        "trials": 200,
    },
    "output": {"dir": "runs"},
}


class ConfigError(SymforgeError):
    pass


def load_config(path, seed_override=None) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}")
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping of sections")
    cfg = {}
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        user = raw.get(section, {})
        if not isinstance(user, dict):
            raise ConfigError(f"section '{section}' must be a mapping in {path}")
        for key, value in user.items():
            if key not in merged:
                raise ConfigError(f"unknown key '{section}.{key}' in {path}")
            merged[key] = value
        cfg[section] = merged
    for section in raw:
        if section not in _DEFAULTS:
            raise ConfigError(f"unknown section '{section}' in {path}")
    if seed_override is not None:
        cfg["task"]["seed"] = int(seed_override)
    return cfg


def config_hash(cfg: dict, tag: str = "") -> str:
    canon = yaml.safe_dump(cfg, sort_keys=True) + tag
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def output_dir(cfg: dict, tag: str = "") -> Path:
    out = Path(cfg["output"]["dir"]) / config_hash(cfg, tag)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _train_config(cfg: dict, seed: int) -> TrainConfig:
    t = cfg["training"]
    return TrainConfig(
        epochs=int(t["epochs"]),
        batch_size=int(t["batch_size"]),
        lr_initial=float(t["lr_initial"]),
        lr_decay=float(t["lr_decay"]),
        seed=seed,
        loss_kind=t["loss"],
    )


def _task_splits(cfg: dict):
    task = cfg["task"]
    sizes = tuple(int(s) for s in task["sizes"])
    seed = int(task["seed"])
    if task["kind"] == "polynomial":
        spec = builtin_polynomial(task["name"])
        splits, manifest = make_splits(spec, sizes, seed=seed)
        return spec, splits, manifest
    if task["kind"] == "quadrangle":
        names = ("train", "val", "test")[: len(sizes)]
        streams = np.random.SeedSequence(seed).spawn(len(sizes))
        splits = {
            name: gen_quadrangle_dataset(size, np.random.default_rng(stream))
            for name, size, stream in zip(names, sizes, streams)
        }
        manifest = {
            "spec": "quadrangle-area",
            "seed": seed,
            "sizes": {name: size for name, size in zip(names, sizes)},
        }
        return None, splits, manifest
    raise ConfigError(
        f"unknown task kind {task['kind']!r}; valid kinds: polynomial, quadrangle"
    )


def run_gen_data(cfg: dict) -> Path:
    try:
        spec, splits, manifest = _task_splits(cfg)
    except KeyError as exc:
        raise ConfigError(
            f"unknown task name {cfg['task']['name']!r}; valid names: {BUILTIN_NAMES}"
        ) from exc
    out = output_dir(cfg)
    files = {}
    for name, dataset in splits.items():
        path = out / f"{name}.csv"
        persist_dataset(dataset, path)
        files[name] = str(path)
    manifest = dict(manifest, files=files)
    (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=True))
    return out


def _entries_dense(entries, shape):
    dense = np.zeros(shape, dtype=int)
    for r, c in entries:
        dense[r, c] = 1
    return dense


def _write_matrix(path, matrix):
    with open(path, "w") as fh:
        for row in np.atleast_2d(matrix):
            fh.write(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
            fh.write("\n")


def run_discover(cfg: dict, sgd_only: bool = False) -> tuple[Path, dict]:
    t_start = time.perf_counter()
    try:
        spec, splits, manifest = _task_splits(cfg)
    except KeyError as exc:
        raise ConfigError(
            f"unknown task name {cfg['task']['name']!r}; valid names: {BUILTIN_NAMES}"
        ) from exc
    train = splits["train"]
    val = splits.get("val")
    seed = int(cfg["task"]["seed"])
    train_cfg = _train_config(cfg, seed=0)
    out = output_dir(cfg, tag="sgd-only" if sgd_only else "")
    report: dict = {"config": cfg, "seed": seed, "task": manifest}

    if sgd_only:
        params, loss = train_relaxed(train, train_cfg)
        report["mode"] = "sgd-only"
        report["train_loss"] = loss
        if val is not None:
            report["val_mae"] = evaluate_relaxed(params, val)
        _write_matrix(out / "m1.csv", params.m1)
        _write_matrix(out / "m2.csv", params.m2)
        report["m1_path"] = str(out / "m1.csv")
        report["m2_path"] = str(out / "m2.csv")
        report["timing_seconds"] = round(time.perf_counter() - t_start, 3)
        (out / "report.yaml").write_text(yaml.safe_dump(report, sort_keys=True))
        return out, report

    n = train.inputs.shape[1]
    arms = enumerate_arms(n)
    arm_cfg = cfg["arms"]
    kept = tuple(range(n))
    if arm_cfg["screen"]:
        kept = screen_coordinates(
            train,
            train_cfg,
            threshold=float(arm_cfg["screen_threshold"]),
            repeats=int(arm_cfg["screen_repeats"]),
            seed=seed,
        )
        arms = filter_arms(arms, kept)
    b = cfg["bandit"]
    T = int(b["T"]) if b["T"] else 4 * n
    dcfg = DiscoveryConfig(
        T=T,
        nu=float(b["nu"]),
        train_cfg=train_cfg,
        loss_cap=float(b["loss_cap"]),
        reward_holdout=float(b["reward_holdout"]),
        size_bonus=float(b["size_bonus"]),
        cold_start=bool(b["cold_start"]),
        revisit_epochs=b["revisit_epochs"],
        seed=seed,
    )
    result = run_discovery(arms, train, dcfg)

    top = evaluate_top_arms(
        result, val if val is not None else train, top=3,
        train_data=train, train_cfg=train_cfg,
    )
    mu_hat = result.posterior.mu_hat
    report["mode"] = "bandit"
    report["screened_coordinates"] = list(kept)
    report["arm_count"] = len(arms)
    report["T"] = T
    report["top3"] = [
        {
            "kind": arm.descriptor.kind,
            "index_set": list(arm.descriptor.index_set),
            "score": float(np.dot(mu_hat, arm.bits)),
            "val_mae": mae,
        }
        for arm, mae in top
    ]

    with open(out / "pulls.csv", "w") as fh:
        fh.write("t,bits,reward,loss\n")
        for rec in result.records:
            bits = "".join(str(b) for b in rec.arm.bits)
            fh.write(f"{rec.t},{bits},{rec.reward:.17g},{rec.train_loss:.17g}\n")
    with open(out / "ranking.csv", "w") as fh:
        fh.write("rank,kind,index_set,score\n")
        for i, arm in enumerate(result.ranking):
            idx = " ".join(str(j) for j in arm.descriptor.index_set)
            fh.write(f"{i},{arm.descriptor.kind},{idx},{np.dot(mu_hat, arm.bits):.17g}\n")
    winner = result.ranking[0]
    sp = SelectionPair.for_descriptor(winner.descriptor)
    _write_matrix(out / "m1.csv", _entries_dense(sp.m1_entries, (n, n)))
    _write_matrix(out / "m2.csv", _entries_dense(sp.m2_entries, (n * n, n * n)))
    report["winner"] = {
        "kind": winner.descriptor.kind,
        "index_set": list(winner.descriptor.index_set),
        "m1_path": str(out / "m1.csv"),
        "m2_path": str(out / "m2.csv"),
    }
    report["pull_log"] = str(out / "pulls.csv")
    report["ranking_path"] = str(out / "ranking.csv")
    report["timing_seconds"] = round(time.perf_counter() - t_start, 3)
    (out / "report.yaml").write_text(yaml.safe_dump(report, sort_keys=True))
    return out, report


VERIFY_SUITES = ("orbits", "product", "nonreal", "gradients", "invariance")


def run_verify(suite: str) -> tuple[bool, dict]:
    """Run one named property suite with default sizes; (passed, summary)."""
    if suite == "orbits":
        summary = {}
        ok = True
        for kind in (CYCLIC, DIHEDRAL, SYMMETRIC):
            for k in range(2, 6):
                report = verify_orbit_mapping(kind, k, trials=100)
                summary[f"{kind}-k{k}"] = (
                    "pass" if report.passed else f"{len(report.failures)} failures"
                )
                ok = ok and report.passed
        counter = find_set_e_counterexample(k=4)
        summary["dihedral-duplicate-counterexample"] = (
            "found" if counter is not None else "missing"
        )
        ok = ok and counter is not None
        return ok, summary
    if suite == "product":
        combos = [
            (
                (
                    GroupDescriptor(CYCLIC, (0, 1, 2), 5),
                    GroupDescriptor(SYMMETRIC, (3, 4), 5),
                ),
                10,
            ),
            (
                (
                    GroupDescriptor(DIHEDRAL, (0, 1, 2), 7),
                    GroupDescriptor(CYCLIC, (3, 4, 5, 6), 7),
                ),
                3,
            ),
        ]
        summary = {}
        ok = True
        for components, trials in combos:
            report = verify_product_group(components, trials=trials)
            label = "x".join(f"{c.kind}{len(c.index_set)}" for c in components)
            summary[label] = "pass" if report.passed else f"{len(report.failures)} failures"
            ok = ok and report.passed
        return ok, summary
    if suite == "nonreal":
        summary = {}
        ok = True
        for k in (3, 4, 5):
            report = nonrealizability_counts(k, trials=50)
            summary[f"k{k}"] = "pass" if report.passed else f"{len(report.failures)} failures"
            ok = ok and report.passed
        return ok, summary
    if suite == "gradients":
        rng = np.random.default_rng(0)
        descriptor = GroupDescriptor(CYCLIC, (0, 2, 3), 5)
        sp = SelectionPair.for_descriptor(descriptor)
        params = init_params(5, p=8, h=12, seed=0)
        X = rng.uniform(size=(10, 5))
        y = rng.uniform(size=10)
        err = gradient_check(params, sp, X, y, n_coords=20)
        return err <= 1e-4, {"max_relative_error": float(err)}
    if suite == "invariance":
        summary = {}
        ok = True
        for kind, k in ((CYCLIC, 4), (DIHEDRAL, 4), (SYMMETRIC, 3)):
            descriptor = GroupDescriptor(kind, tuple(range(1, k + 1)), k + 2)
            sp = SelectionPair.for_descriptor(descriptor)
            params = init_params(k + 2, p=8, h=12, seed=1)
            report = check_invariance(
                lambda x: forward(params, sp, x), descriptor, samples=100
            )
            summary[f"{kind}-k{k}"] = (
                "pass" if report.passed else f"violation {report.max_violation:.2e}"
            )
            ok = ok and report.passed
        return ok, summary
    raise ConfigError(f"unknown suite {suite!r}; valid suites: {VERIFY_SUITES}")


def run_bandit_sim(cfg: dict) -> tuple[Path, dict]:
    s = cfg["sim"]
    trials = int(s["trials"])
    if trials < 1:
        raise ConfigError("sim.trials must be >= 1")
    mu_star = np.asarray(s["mu_star"], dtype=float)
    instance = LinearInstance(mu_star, np.eye(mu_star.size), float(s["noise_sigma"]))
    horizons = [int(T) for T in s["horizons"]]
    rates = simulate_linear(
        instance, horizons, nu=float(s["nu"]), trials=trials, seed=int(cfg["task"]["seed"])
    )
    out = output_dir(cfg)
    with open(out / "misid.csv", "w") as fh:
        fh.write("T,misid_rate\n")
        for T in sorted(rates):
            fh.write(f"{T},{rates[T]:.17g}\n")
    return out, {T: rates[T] for T in sorted(rates)}


@click.group()
def main():
    """Discover which discrete symmetry a target function respects."""


@main.command("gen-data")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
def gen_data_cmd(config_path, seed):
    """Generate dataset CSVs and a manifest."""
    cfg = _load_or_usage(config_path, seed)
    try:
        out = run_gen_data(cfg)
    except SymforgeError as exc:
        _fail_usage(str(exc))
    click.echo(f"wrote datasets to {out}")


@main.command("discover")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
@click.option("--sgd-only", is_flag=True, default=False)
def discover_cmd(config_path, seed, sgd_only):
    """Run the full discovery pipeline and write a run report."""
    cfg = _load_or_usage(config_path, seed)
    try:
        out, report = run_discover(cfg, sgd_only=sgd_only)
    except SymforgeError as exc:
        _fail_usage(str(exc))
    click.echo(f"report written to {out / 'report.yaml'}")
    if not sgd_only:
        for row in report["top3"]:
            click.echo(
                f"  {row['kind']} {row['index_set']} score={row['score']:.4f}"
                + (f" val_mae={row['val_mae']:.4f}" if row["val_mae"] is not None else "")
            )


@main.command("verify")
@click.option("--suite", required=True, type=click.Choice(VERIFY_SUITES))
def verify_cmd(suite):
    """Run a named property-verification suite."""
    passed, summary = run_verify(suite)
    for key, value in summary.items():
        click.echo(f"{suite}.{key}: {value}")
    if not passed:
        click.echo(f"suite {suite}: FAIL", err=True)
        sys.exit(1)
    click.echo(f"suite {suite}: pass")


@main.command("bandit-sim")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--seed", type=int, default=None)
def bandit_sim_cmd(config_path, seed):
    """Monte-Carlo misidentification rates for the linear-bandit simulator."""
    cfg = _load_or_usage(config_path, seed)
    try:
        out, rates = run_bandit_sim(cfg)
    except SymforgeError as exc:
        _fail_usage(str(exc))
    for T, rate in rates.items():
        click.echo(f"T={T}: misid={rate:.4f}")
    click.echo(f"csv written to {out / 'misid.csv'}")


def _load_or_usage(config_path, seed):
    try:
        return load_config(config_path, seed_override=seed)
    except ConfigError as exc:
        _fail_usage(str(exc))


def _fail_usage(message):
    click.echo(f"error: {message}", err=True)
    sys.exit(2)


if __name__ == "__main__":
    main()
