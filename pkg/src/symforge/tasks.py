"""Synthetic regression tasks: invariant polynomials and quadrangle areas.

The builtin polynomials have integer coefficients and are term-permutations
under their group, so generated targets are exactly invariant.  Targets of
polynomial tasks are min-max normalized with train-split statistics so the
bandit's loss cap is meaningful; quadrangle areas already live in (0, 1].
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DatasetParseError, GenerationError
from .groups import CYCLIC, DIHEDRAL, SYMMETRIC, GroupDescriptor, act, elements
from .net import Dataset

BUILTIN_NAMES = ("S_I(4)", "Z_I(5)", "Z_I(7)", "D_I(5)", "D_I(7)")

# Cycle orders, 0-based: the index sets {1,2,3,4}, {1,2,3,6,7} and
# {1,2,3,6,7,9,10} of the benchmark definitions.
_CYCLE_5 = (0, 1, 2, 5, 6)
_CYCLE_7 = (0, 1, 2, 5, 6, 8, 9)


@dataclass(frozen=True)
class PolynomialSpec:
    """A target polynomial with its invariance group.

    terms: tuple of (coefficient, ((variable, exponent), ...)) monomials.
    """

    name: str
    descriptor: GroupDescriptor
    terms: tuple

    def __post_init__(self):
        rng = np.random.default_rng(12345)
        X = rng.uniform(size=(100, self.descriptor.n))
        base = self.evaluate(X)
        for g in elements(self.descriptor):
            if np.max(np.abs(self.evaluate(act(g, X)) - base)) > 1e-12:
                raise ValueError(f"{self.name}: polynomial is not invariant under {g}")

    @property
    def n(self) -> int:
        return self.descriptor.n

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.zeros(X.shape[0])
        for coeff, monomial in self.terms:
            term = np.full(X.shape[0], float(coeff))
            for var, exp in monomial:
                term = term * X[:, var] ** exp
            out += term
        return out


def _chain_terms(cycle, close_reversed=False):
    pairs = [(cycle[j], cycle[(j + 1) % len(cycle)]) for j in range(len(cycle))]
    if close_reversed:
        pairs += [(b, a) for a, b in pairs]
    return tuple((1, ((a, 1), (b, 2))) for a, b in pairs)


def builtin_polynomial(name: str) -> PolynomialSpec:
    """The benchmark polynomials, keyed by kind and index-set size."""
    if name == "S_I(4)":
        descriptor = GroupDescriptor(SYMMETRIC, (0, 1, 2, 3), 5)
        terms = ((1, ((0, 1), (1, 1), (2, 1), (3, 1))), (1, ((4, 1),)))
        return PolynomialSpec(name, descriptor, terms)
    if name == "Z_I(5)":
        descriptor = GroupDescriptor(CYCLIC, _CYCLE_5, 10)
        return PolynomialSpec(name, descriptor, _chain_terms(_CYCLE_5))
    if name == "Z_I(7)":
        descriptor = GroupDescriptor(CYCLIC, _CYCLE_7, 10)
        return PolynomialSpec(name, descriptor, _chain_terms(_CYCLE_7))
    if name == "D_I(5)":
        descriptor = GroupDescriptor(DIHEDRAL, _CYCLE_5, 10)
        return PolynomialSpec(name, descriptor, _chain_terms(_CYCLE_5, True))
    if name == "D_I(7)":
        descriptor = GroupDescriptor(DIHEDRAL, _CYCLE_7, 10)
        return PolynomialSpec(name, descriptor, _chain_terms(_CYCLE_7, True))
    raise KeyError(f"unknown polynomial {name!r}; valid names: {BUILTIN_NAMES}")


def gen_poly_dataset(spec: PolynomialSpec, m: int, rng) -> Dataset:
    """Uniform inputs on [0,1]^n with exact targets.

    For dihedral specs, rows with a repeated coordinate are resampled: the
    orbit-mapping argument for dihedral groups fails on such inputs.
    """
    if m < 1:
        raise ValueError("need m >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    rows = []
    while len(rows) < m:
        x = rng.uniform(size=spec.n)
        if spec.descriptor.kind == DIHEDRAL and len(set(x.tolist())) < spec.n:
            continue
        rows.append(x)
    X = np.asarray(rows)
    return Dataset(X, spec.evaluate(X))


def make_splits(spec: PolynomialSpec, sizes=(64, 480, 4800), seed=0):
    """Train/val/test from disjoint sub-streams of one seed, targets min-max
    normalized to [0,1] with train statistics.  Returns (splits, manifest)."""
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    names = ("train", "val", "test")[: len(sizes)]
    raw = {
        name: gen_poly_dataset(spec, size, np.random.default_rng(stream))
        for name, size, stream in zip(names, sizes, streams)
    }
    y_min = float(raw["train"].targets.min())
    y_max = float(raw["train"].targets.max())
    span = y_max - y_min
    if span <= 0:
        raise GenerationError("degenerate target range in the training split")
    splits = {
        name: Dataset(ds.inputs, (ds.targets - y_min) / span)
        for name, ds in raw.items()
    }
    manifest = {
        "spec": spec.name,
        "descriptor": spec.descriptor.to_record(),
        "seed": seed,
        "sizes": {name: size for name, size in zip(names, sizes)},
        "normalization": {"y_min": y_min, "y_max": y_max},
    }
    return splits, manifest


def _shoelace(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def canonical_quadrangle(vertices) -> np.ndarray:
    """Counterclockwise cyclic order starting at the smallest vertex.

    Idempotent, and constant on the 8 dihedral relabelings of the vertex
    list (cyclic shifts and reversal)."""
    v = np.asarray(vertices, dtype=float)
    if _shoelace(v) < 0:
        v = v[::-1]
    start = min(range(len(v)), key=lambda i: (v[i, 0], v[i, 1]))
    return np.roll(v, -start, axis=0)


@dataclass(frozen=True)
class QuadrangleSample:
    vertices: np.ndarray  # (4, 2), canonical order
    area: float


def _in_convex_position(vertices) -> bool:
    v = np.asarray(vertices, dtype=float)
    cross = []
    for i in range(4):
        a, b, c = v[i], v[(i + 1) % 4], v[(i + 2) % 4]
        u, w = b - a, c - b
        cross.append(u[0] * w[1] - u[1] * w[0])
    cross = np.asarray(cross)
    return bool(np.all(cross > 1e-12) or np.all(cross < -1e-12))


def sample_quadrangle(rng, max_tries=10**4) -> QuadrangleSample:
    """Rejection-sample a convex quadrangle in [0,2]^2 with area in (0,1].

    Points are sorted around their centroid before the convexity test so
    that any convex 4-point configuration is accepted."""
    for _ in range(max_tries):
        pts = rng.uniform(0.0, 2.0, size=(4, 2))
        centroid = pts.mean(axis=0)
        angles = np.arctan2(pts[:, 1] - centroid[1], pts[:, 0] - centroid[0])
        ordered = pts[np.argsort(angles)]
        if not _in_convex_position(ordered):
            continue
        ordered = canonical_quadrangle(ordered)
        area = _shoelace(ordered)
        if 0.0 < area <= 1.0:
            return QuadrangleSample(ordered, area)
    raise GenerationError("quadrangle rejection budget exhausted")


def gen_quadrangle_dataset(m: int, rng) -> Dataset:
    """Inputs are the 8 flattened vertex coordinates; targets the areas."""
    if m < 1:
        raise ValueError("need m >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    samples = [sample_quadrangle(rng) for _ in range(m)]
    X = np.stack([s.vertices.ravel() for s in samples])
    y = np.asarray([s.area for s in samples])
    return Dataset(X, y)


def persist_dataset(dataset: Dataset, path) -> None:
    n = dataset.inputs.shape[1]
    header = ",".join([f"x_{i + 1}" for i in range(n)] + ["y"])
    lines = [header]
    for x, y in zip(dataset.inputs, dataset.targets):
        lines.append(",".join(f"{v:.17g}" for v in (*x, y)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    with open(path) as fh:
        return _parse_dataset(fh)


def loads_dataset(text: str) -> Dataset:
    return _parse_dataset(io.StringIO(text))


def _parse_dataset(fh) -> Dataset:
    header = fh.readline().strip()
    if not header:
        raise DatasetParseError("empty dataset file", line=1)
    columns = header.split(",")
    if columns[-1] != "y":
        raise DatasetParseError("missing column 'y'", line=1)
    n = len(columns) - 1
    expected = [f"x_{i + 1}" for i in range(n)]
    for want, got in zip(expected, columns):
        if want != got:
            raise DatasetParseError(f"missing column '{want}'", line=1)
    rows, targets = [], []
    for lineno, line in enumerate(fh, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != n + 1:
            raise DatasetParseError(
                f"expected {n + 1} fields, found {len(parts)}", line=lineno
            )
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise DatasetParseError("non-numeric field", line=lineno)
        rows.append(values[:-1])
        targets.append(values[-1])
    if not rows:
        raise DatasetParseError("dataset has a header but no rows", line=2)
    return Dataset(np.asarray(rows), np.asarray(targets))
