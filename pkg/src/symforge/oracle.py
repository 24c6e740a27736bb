"""Brute-force ground truth: invariance checks, symmetrization, orbit-mapping
verification and orbit-counting arguments.

The orbit of a pair matrix under row permutations is never enumerated;
sorting the rows lexicographically gives a canonical representative, and
canonical-form equality is equivalent to row-permutation-orbit equality.
For distinct-entry inputs the rows of every rho variant are distinct, so
"some row permutation of rho(x) lies in the image" is equivalent to "some
relabeling h of the coordinates preserves the row multiset", which keeps
the search space at k! instead of (rows)!.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLargeError
from .groups import (
    CYCLIC,
    DIHEDRAL,
    PRODUCT,
    SYMMETRIC,
    GroupDescriptor,
    Permutation,
    act,
    elements,
    orbit,
)
from .rho import rho_inverse, rho_variant


@dataclass
class InvarianceReport:
    max_violation: float
    worst_x: np.ndarray | None
    worst_g: Permutation | None
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def check_invariance(fn, descriptor: GroupDescriptor, samples=100, tol=1e-9, seed=0):
    """Max of |fn(g.x) - fn(x)| over random samples and all group elements."""
    rng = np.random.default_rng(seed)
    group = elements(descriptor)
    worst = InvarianceReport(0.0, None, None, tol)
    for _ in range(samples):
        x = rng.uniform(size=descriptor.n)
        base = fn(x)
        for g in group:
            violation = abs(fn(act(g, x)) - base)
            if violation > worst.max_violation:
                worst = InvarianceReport(violation, x, g, tol)
    return worst


def symmetrize(fn, descriptor: GroupDescriptor):
    """Group average of fn: the canonical invariant reference function."""
    group = elements(descriptor)
    scale = 1.0 / len(group)

    def averaged(x):
        return scale * sum(fn(act(g, x)) for g in group)

    return averaged


def _distinct_sample(rng, k):
    while True:
        x = rng.uniform(size=k)
        if len(set(x.tolist())) == k:
            return x


def _row_multiset(m) -> tuple:
    return tuple(sorted(map(tuple, np.asarray(m))))


def step3_passing_perms(kind: str, x) -> list[Permutation]:
    """All coordinate relabelings preserving the row multiset of rho(x)."""
    x = np.asarray(x, dtype=float)
    k = x.shape[0]
    if k > 8:
        raise EnumerationTooLargeError(f"S_{k} enumeration refused")
    target = _row_multiset(rho_variant(x, kind))
    out = []
    for images in itertools.permutations(range(k)):
        h = Permutation(images)
        if _row_multiset(rho_variant(act(h, x), kind)) == target:
            out.append(h)
    return out


@dataclass
class OrbitMappingReport:
    kind: str
    k: int
    trials: int
    expected_count: int
    failures: list = field(default_factory=list)
    counts: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_orbit_mapping(kind: str, k: int, trials=100, seed=0) -> OrbitMappingReport:
    """Check the four structural facts that make orbits recoverable from lifts.

    1. rho is injective (exact round trip through its inverse).
    2. rho is equivariant: every group element permutes the rows.
    3. Image characterization: exactly the group's relabelings keep the
       lifted matrix in the image (distinct-entry inputs only).
    4. Distinct orbits lift to distinct row-sorted canonical forms.
    """
    rng = np.random.default_rng(seed)
    descriptor = GroupDescriptor(kind, tuple(range(k)), k)
    group = elements(descriptor)
    group_set = {g.mapping for g in group}
    report = OrbitMappingReport(kind, k, trials, expected_count=len(group))

    canon_by_orbit = []
    for trial in range(trials):
        x = _distinct_sample(rng, k)
        lifted = rho_variant(x, kind)

        recovered = rho_inverse(lifted, kind)
        if not np.array_equal(recovered, x):
            report.failures.append(("step1", trial, x))

        base = _row_multiset(lifted)
        for h in group:
            if _row_multiset(rho_variant(act(h, x), kind)) != base:
                report.failures.append(("step2", trial, h))

        passing = step3_passing_perms(kind, x)
        report.counts.append(len(passing))
        if len(passing) != len(group):
            report.failures.append(("step3-count", trial, len(passing)))
        for h in passing:
            if h.mapping not in group_set:
                report.failures.append(("step3-membership", trial, h))

        canon = _row_multiset(lifted)
        this_orbit = orbit(descriptor, x).elements
        for other_orbit, other_canon in canon_by_orbit:
            same_orbit = this_orbit == other_orbit
            if same_orbit != (canon == other_canon):
                report.failures.append(("step4", trial, x))
        # A random in-orbit representative must map to the same canonical form.
        g = group[rng.integers(len(group))]
        if _row_multiset(rho_variant(act(g, x), kind)) != canon:
            report.failures.append(("step4-orbit", trial, g))
        canon_by_orbit.append((this_orbit, canon))
    return report


def find_set_e_counterexample(k=4, seed=0, max_tries=200):
    """A duplicate-coordinate input where the dihedral image test admits a
    relabeling outside the dihedral group; None if the search fails."""
    rng = np.random.default_rng(seed)
    descriptor = GroupDescriptor(DIHEDRAL, tuple(range(k)), k)
    dihedral = {g.mapping for g in elements(descriptor)}
    for _ in range(max_tries):
        x = _distinct_sample(rng, k)
        i, j = rng.choice(k, size=2, replace=False)
        x[i] = x[j]
        for h in step3_passing_perms(DIHEDRAL, x):
            if h.mapping not in dihedral:
                return x, h
    return None


@dataclass
class CountingReport:
    k: int
    trials: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def nonrealizability_counts(k: int, trials=50, seed=0, cond_cap=1e3):
    """Orbit-size counting behind the linear non-realizability argument:
    cyclic orbits have at most k points while the symmetric orbit of a
    generic image under an invertible map has k! points."""
    if k < 3:
        raise ValueError("the counting argument needs k >= 3")
    rng = np.random.default_rng(seed)
    cyclic = GroupDescriptor(CYCLIC, tuple(range(k)), k)
    symmetric = GroupDescriptor(SYMMETRIC, tuple(range(k)), k)
    report = CountingReport(k, trials)
    for trial in range(trials):
        while True:
            M = rng.normal(size=(k, k))
            if np.linalg.cond(M) <= cond_cap:
                break
        x = _distinct_sample(rng, k)
        z = M @ x
        if len(set(z.tolist())) < k:
            report.failures.append(("degenerate-image", trial))
            continue
        if len(orbit(cyclic, x).elements) > k:
            report.failures.append(("cyclic-orbit", trial, x))
        if len(orbit(symmetric, z).elements) != math.factorial(k):
            report.failures.append(("symmetric-orbit", trial, z))
    return report


def rho_product(components, x) -> np.ndarray:
    """Concatenated per-component pair lifts on the component index sets."""
    x = np.asarray(x, dtype=float)
    blocks = [rho_variant(x[list(c.index_set)], c.kind) for c in components]
    return np.concatenate(blocks, axis=0)


@dataclass
class ProductReport:
    descriptor: GroupDescriptor
    trials: int
    order: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_product_group(components, trials=20, seed=0) -> ProductReport:
    """Injectivity, equivariance and image characterization for the
    concatenated lift of a product group on disjoint index sets."""
    components = tuple(components)
    n = components[0].n
    descriptor = GroupDescriptor(PRODUCT, (), n, components)
    if descriptor.order() > 10**4:
        raise EnumerationTooLargeError("product order exceeds verification guard")
    support = descriptor.index_set
    if len(support) > 8:
        raise EnumerationTooLargeError("support too large for S_|I| enumeration")
    group = elements(descriptor)
    group_restricted = {tuple(g.mapping[i] for i in support) for g in group}
    rng = np.random.default_rng(seed)
    report = ProductReport(descriptor, trials, len(group))

    for trial in range(trials):
        x = np.empty(n)
        x[:] = _distinct_sample(rng, n)
        lifted = rho_product(components, x)

        # Step 1: blockwise inversion recovers the supported coordinates.
        offset = 0
        for c in components:
            rows = 2 * c.k if c.kind == DIHEDRAL else c.k
            block = lifted[offset : offset + rows]
            if not np.array_equal(rho_inverse(block, c.kind), x[list(c.index_set)]):
                report.failures.append(("step1", trial, c))
            offset += rows

        # Step 2: equivariance, as row-multiset preservation.
        base = _row_multiset(lifted)
        for h in group:
            if _row_multiset(rho_product(components, act(h, x))) != base:
                report.failures.append(("step2", trial, h))

        # Step 3: only the group's relabelings of the support preserve rows.
        passing = 0
        for images in itertools.permutations(support):
            mapping = list(range(n))
            for pos, img in zip(support, images):
                mapping[pos] = img
            h = Permutation(tuple(mapping))
            if _row_multiset(rho_product(components, act(h, x))) == base:
                passing += 1
                restricted = tuple(h.mapping[i] for i in support)
                if restricted not in group_restricted:
                    report.failures.append(("step3-membership", trial, h))
        if passing != len(group):
            report.failures.append(("step3-count", trial, passing))
    return report
