"""Selection matrices M1/M2, the bandit arm space and its binary encoding.

M1 (n x n) compacts the index set into the leading slots: (M1 x)_u = x_{i_u}
for u < k and 0 above.  M2 (n^2 x n^2) is a constant row selection on the
unified pair lift: with slot u holding x_{i_u}, the pair (x_{i_u}, x_{i_v})
sits at unified row u*n + v, so the value conditions defining M2 reduce to
fixed source-row indices per subgroup kind.

Both matrices are stored sparsely as (row, col) entry lists.  The complement
block zeroes the coordinates inside the index set and keeps the rest in
place, so it is untouched by every element of the arm's group.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, EnumerationTooLargeError, InvalidDescriptorError
from .groups import CYCLIC, DIHEDRAL, SYMMETRIC, GroupDescriptor
from .rho import rho_unified

ARM_N_GUARD = 14

# One-hot order of the trailing kind bits.
KIND_BIT_ORDER = (SYMMETRIC, DIHEDRAL, CYCLIC)


def build_m1(descriptor: GroupDescriptor) -> tuple[tuple[int, int], ...]:
    """Sparse entries of M1: one 1 per row u < k, at column i_u."""
    _require_single(descriptor)
    return tuple((u, i) for u, i in enumerate(descriptor.index_set))


def build_m2(descriptor: GroupDescriptor) -> tuple[tuple[int, int], ...]:
    """Sparse entries of M2 as (output row, unified source row) pairs."""
    _require_single(descriptor)
    n, k = descriptor.n, descriptor.k
    if descriptor.kind == SYMMETRIC:
        return tuple((u, u * n + u) for u in range(k))
    if descriptor.kind == CYCLIC:
        return tuple((u, u * n + (u + 1) % k) for u in range(k))
    fwd = [(u, u * n + (u + 1) % k) for u in range(k)]
    bwd = [(k + u, ((u + 1) % k) * n + u) for u in range(k)]
    return tuple(fwd + bwd)


def _require_single(descriptor: GroupDescriptor):
    if descriptor.kind not in (SYMMETRIC, CYCLIC, DIHEDRAL):
        raise InvalidDescriptorError("selection matrices need a single-kind descriptor")


@dataclass(frozen=True)
class SelectionPair:
    """M1/M2 realized for one arm, plus the derived index bookkeeping."""

    descriptor: GroupDescriptor
    m1_entries: tuple[tuple[int, int], ...]
    m2_entries: tuple[tuple[int, int], ...]

    @staticmethod
    def for_descriptor(descriptor: GroupDescriptor) -> "SelectionPair":
        return SelectionPair(descriptor, build_m1(descriptor), build_m2(descriptor))

    @property
    def n(self) -> int:
        return self.descriptor.n

    def selected_pairs(self) -> tuple[tuple[int, int], ...]:
        """Original-coordinate index pairs picked by M2, in output-row order."""
        idx = self.descriptor.index_set
        n = self.n
        out = []
        for _, src in self.m2_entries:
            u, v = divmod(src, n)
            out.append((idx[u], idx[v]))
        return tuple(out)

    def complement_mask(self) -> np.ndarray:
        """Boolean mask of coordinates outside the index set."""
        mask = np.ones(self.n, dtype=bool)
        mask[list(self.descriptor.index_set)] = False
        return mask


def apply_pipeline_front(sp: SelectionPair, x) -> np.ndarray:
    """The n(n+1) x 2 input to phi: M2 rho(M1 x) stacked over the complement.

    Output rows beyond M2's nonzero rows are (0, 0); the last n rows pair
    each complement coordinate with 0.
    """
    x = np.asarray(x, dtype=float)
    n = sp.n
    if x.shape != (n,):
        raise DimensionError(f"expected a vector of length {n}")
    m1x = np.zeros(n)
    for u, i in sp.m1_entries:
        m1x[u] = x[i]
    lifted = rho_unified(m1x)
    front = np.zeros((n * n, 2))
    for out_row, src in sp.m2_entries:
        front[out_row] = lifted[src]
    comp = np.zeros((n, 2))
    comp[sp.complement_mask(), 0] = x[sp.complement_mask()]
    return np.concatenate([front, comp], axis=0)


@dataclass(frozen=True)
class ArmFeature:
    """A bandit arm: n index bits plus the 3-bit kind one-hot (S, D, Z)."""

    bits: tuple[int, ...]
    descriptor: GroupDescriptor


def encode_arm(descriptor: GroupDescriptor) -> ArmFeature:
    _require_single(descriptor)
    n = descriptor.n
    bits = [0] * (n + 3)
    for i in descriptor.index_set:
        bits[i] = 1
    bits[n + KIND_BIT_ORDER.index(descriptor.kind)] = 1
    return ArmFeature(tuple(bits), descriptor)


def decode_arm(bits, n: int) -> GroupDescriptor:
    bits = tuple(int(b) for b in bits)
    if len(bits) != n + 3 or sum(bits[n:]) != 1:
        raise InvalidDescriptorError("arm feature needs n index bits and one kind bit")
    index_set = tuple(i for i in range(n) if bits[i])
    kind = KIND_BIT_ORDER[bits[n:].index(1)]
    return GroupDescriptor(kind, index_set, n)


def enumerate_arms(n: int) -> list[ArmFeature]:
    """All (kind, I) arms with |I| >= 2; for |I| = 2 the three kinds coincide
    as actions, so only the symmetric arm is kept."""
    if n > ARM_N_GUARD:
        raise EnumerationTooLargeError(f"arm enumeration for n={n} exceeds guard")
    if n < 2:
        raise InvalidDescriptorError("need n >= 2 for any arm")
    arms = []
    for size in range(2, n + 1):
        for combo in itertools.combinations(range(n), size):
            kinds = (SYMMETRIC,) if size == 2 else KIND_BIT_ORDER
            for kind in kinds:
                arms.append(encode_arm(GroupDescriptor(kind, combo, n)))
    return arms


def argmax_arm(mu, arms) -> ArmFeature:
    """Exhaustive scan; ties broken by lexicographically smallest bit vector."""
    mu = np.asarray(mu, dtype=float)
    if not arms:
        raise ValueError("empty arm set")
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu must be finite")
    best = None
    best_score = -np.inf
    for arm in arms:
        score = float(np.dot(mu, arm.bits))
        if score > best_score or (score == best_score and arm.bits < best.bits):
            best, best_score = arm, score
    return best


def argmax_arm_closed(mu, n: int) -> ArmFeature:
    """Constant-time argmax over the full arm space for ambient dimension n.

    The index set is the positive-mu coordinates, padded with the largest
    remaining coordinates up to the feasible sizes; the kind bit is the best
    admissible one (symmetric is forced at |I| = 2).
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (n + 3,):
        raise DimensionError(f"mu must have length n + 3 = {n + 3}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu must be finite")
    coord = mu[:n]
    kind_mu = mu[n:]
    order = sorted(range(n), key=lambda i: (-coord[i], i))
    positives = [i for i in order if coord[i] > 0]

    def candidate(index_set):
        k = len(index_set)
        kinds = (SYMMETRIC,) if k == 2 else KIND_BIT_ORDER
        kind = max(kinds, key=lambda s: kind_mu[KIND_BIT_ORDER.index(s)])
        value = sum(coord[i] for i in index_set)
        value += kind_mu[KIND_BIT_ORDER.index(kind)]
        return value, GroupDescriptor(kind, tuple(sorted(index_set)), n)

    candidates = []
    if len(positives) >= 3:
        candidates.append(candidate(positives))
    else:
        candidates.append(candidate(order[:2]))
        if n >= 3:
            base = positives if len(positives) == 2 else order[:2]
            extra = next(i for i in order if i not in base)
            candidates.append(candidate(base + [extra]))
    value, descriptor = max(candidates, key=lambda c: c[0])
    del value
    return encode_arm(descriptor)


def entries_to_csv(entries) -> str:
    """CSV of (row, col, 1) triples for the interpretability dump."""
    lines = ["row,col,value"]
    for row, col in sorted(entries):
        lines.append(f"{row},{col},1")
    return "\n".join(lines) + "\n"


def dense_render(entries, shape) -> str:
    """Small-n 0/1 text rendering of a sparse selection matrix."""
    grid = np.zeros(shape, dtype=int)
    for row, col in entries:
        grid[row, col] = 1
    return "\n".join(" ".join(str(v) for v in line) for line in grid) + "\n"
