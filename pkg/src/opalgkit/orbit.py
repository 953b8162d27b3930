"""Finite dynamical systems and their one-point operator algebras.

A finite system is a total self-map phi on a finite label set K with a
basepoint t.  The forward orbit of t eventually cycles; the preperiod/period
split induces level projections that decompose the algebra generated by the
shift together with the diagonal matrices diag(f(phi^n(t))).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linop import (
    GAP_TOL,
    OperatorSubspace,
    ShapeError,
    as_matrix,
    frob,
    generated_unital_algebra,
    matrix_unit,
    orthonormalize,
    subspace_contains,
    subspace_equal,
    truncated_shift,
)


class TruncationTooShort(ValueError):
    """The level window does not reach the first full cycle."""


@dataclass(frozen=True)
class FiniteDynSys:
    """Total map phi on the finite label set, with basepoint t."""

    points: tuple
    phi: dict
    t: str

    def __post_init__(self):
        pts = tuple(self.points)
        object.__setattr__(self, "points", pts)
        missing = [k for k in pts if k not in self.phi]
        if missing:
            raise ValueError(f"phi undefined on {missing}")
        bad = [k for k in pts if self.phi[k] not in pts]
        if bad:
            raise ValueError(f"phi leaves the point set at {bad}")
        if self.t not in pts:
            raise ValueError(f"basepoint {self.t!r} not a point")

    def step(self, k):
        return self.phi[k]


@dataclass(frozen=True)
class OrbitDecomposition:
    """Preperiod/period data of the basepoint orbit, relative to N levels."""

    n0: int
    p: int
    orbit: tuple           # t, phi(t), ..., length n0 + p (distinct labels)
    levels: int
    tail_indices: tuple    # levels 0..n0-1
    cycle_classes: tuple   # p tuples of level indices, class i = n0 + i + p*j

    def label_of_level(self, n: int) -> str:
        if n < self.n0:
            return self.orbit[n]
        return self.orbit[self.n0 + (n - self.n0) % self.p]


def analyze_orbit(sys: FiniteDynSys, levels: int) -> OrbitDecomposition:
    """Detect (preperiod, period) by direct iteration and slice the levels.

    Over a finite set every forward orbit becomes periodic (pigeonhole), so
    the period is always >= 1.  Requires levels >= n0 + p so the window sees
    one full cycle.
    """
    seen: dict = {}
    path = []
    cur = sys.t
    while cur not in seen:
        seen[cur] = len(path)
        path.append(cur)
        cur = sys.step(cur)
    n0 = seen[cur]
    p = len(path) - n0
    if levels < n0 + p:
        raise TruncationTooShort(
            f"need at least {n0 + p} levels for preperiod {n0} and period {p}, got {levels}"
        )
    tail = tuple(range(n0))
    classes = tuple(tuple(range(n0 + i, levels, p)) for i in range(p))
    return OrbitDecomposition(
        n0=n0, p=p, orbit=tuple(path), levels=levels, tail_indices=tail, cycle_classes=classes
    )


def orbit_diagonal(sys: FiniteDynSys, f, levels: int) -> np.ndarray:
    """diag(f(t), f(phi(t)), ...): a coefficient function evaluated along the orbit."""
    missing = [k for k in sys.points if k not in f]
    if missing:
        raise ValueError(f"function undefined on {missing}")
    vals = []
    cur = sys.t
    for _ in range(levels):
        vals.append(complex(f[cur]))
        cur = sys.step(cur)
    return np.diag(np.asarray(vals, dtype=np.complex128))


def class_projection(dec: OrbitDecomposition, indices) -> np.ndarray:
    q = np.zeros((dec.levels, dec.levels), dtype=np.complex128)
    for i in indices:
        q[i, i] = 1.0
    return q


def one_point_algebra(sys: FiniteDynSys, levels: int) -> OperatorSubspace:
    """span{ v^n diag(indicator of k along the orbit) : n < levels, k in K }.

    Points off the orbit contribute the zero diagonal and cannot enlarge the
    span.  Propagates the truncation check from analyze_orbit.
    """
    analyze_orbit(sys, levels)
    v = truncated_shift(levels)
    mats = []
    vn = np.eye(levels, dtype=np.complex128)
    for _ in range(levels):
        for k in sys.points:
            mats.append(vn @ orbit_diagonal(sys, {q: 1.0 if q == k else 0.0 for q in sys.points}, levels))
        vn = v @ vn
    return orthonormalize(mats, ambient_dim=levels)


def structure_check(sys: FiniteDynSys, levels: int, tol: float = GAP_TOL) -> dict:
    """Rebuild the algebra as (all lower-triangular on tail columns) (+)
    (one shifted-Toeplitz family per cycle class) and compare spans.

    The tail part has dimension sum over lambda < n0 of (levels - lambda);
    class i contributes the compressions of the shift powers to its columns.
    """
    dec = analyze_orbit(sys, levels)
    built = one_point_algebra(sys, levels)

    tail_mats = [
        matrix_unit(levels, kappa, lam)
        for lam in dec.tail_indices
        for kappa in range(lam, levels)
    ]
    tail = orthonormalize(tail_mats, ambient_dim=levels)

    v = truncated_shift(levels)
    parts = [tail]
    part_dims = {"tail": tail.dim}
    for i, cls in enumerate(dec.cycle_classes):
        proj = class_projection(dec, cls)
        mats = []
        vm = np.eye(levels, dtype=np.complex128)
        for _ in range(levels):
            mats.append(vm @ proj)
            vm = v @ vm
        part = orthonormalize(mats, ambient_dim=levels)
        parts.append(part)
        part_dims[f"class_{i}"] = part.dim

    union = orthonormalize(
        [b for part in parts for b in part.basis], ambient_dim=levels
    )
    equal, gap = subspace_equal(union, built, tol)
    dims_add = sum(p.dim for p in parts) == union.dim
    expected_tail = sum(levels - lam for lam in dec.tail_indices)
    return {
        "n0": dec.n0,
        "p": dec.p,
        "equal": equal,
        "gap": gap,
        "dims": {"built": built.dim, "structural_sum": union.dim, **part_dims},
        "parts_independent": dims_add,
        "tail_dim_formula": expected_tail,
        "tail_dim_matches": expected_tail == tail.dim,
    }


def one_point_membership(t, sys: FiniteDynSys, levels: int, tol: float = GAP_TOL) -> tuple[bool, dict]:
    """Diagonal-class membership test for the one-point algebra.

    An operator belongs iff it is lower triangular and, on each diagonal m,
    entries at columns whose orbit labels agree are equal.  Equivalent to
    span membership in one_point_algebra (cross-validated in the suites).
    """
    t = as_matrix(t)
    if t.shape[0] != levels:
        raise ShapeError(f"size mismatch: {t.shape[0]} vs {levels} levels")
    dec = analyze_orbit(sys, levels)
    scale = max(1.0, frob(t))
    report: dict = {"member": True, "violation": None}
    for i in range(levels):
        for j in range(i + 1, levels):
            if abs(t[i, j]) > tol * scale:
                report["member"] = False
                report["violation"] = {"kind": "support-above-diagonal", "index": (i, j)}
                return False, report
    for m in range(levels):
        by_label: dict = {}
        for lam in range(levels - m):
            by_label.setdefault(dec.label_of_level(lam), []).append(lam)
        for label, cols in by_label.items():
            base = t[cols[0] + m, cols[0]]
            for lam in cols[1:]:
                if abs(t[lam + m, lam] - base) > tol * scale:
                    report["member"] = False
                    report["violation"] = {
                        "kind": "diagonal-not-constant-on-class",
                        "diagonal": m,
                        "label": label,
                        "index_pair": [(cols[0] + m, cols[0]), (lam + m, lam)],
                    }
                    return False, report
    return True, report


def uniform_algebra_span_check(sys: FiniteDynSys, funcs, levels: int, tol: float = GAP_TOL) -> bool:
    """Whether a family of coefficient functions suffices to span the algebra.

    The unital algebra generated by the family (pointwise on the distinct
    orbit labels) replaces the full indicator family; a family separating the
    orbit generates everything, so the expected answer is True whenever the
    separation precondition holds.  Non-separating input raises, naming an
    unseparated pair.
    """
    dec = analyze_orbit(sys, levels)
    labels = list(dict.fromkeys(dec.orbit))
    for a_i in range(len(labels)):
        for b_i in range(a_i + 1, len(labels)):
            a, b = labels[a_i], labels[b_i]
            if not any(abs(complex(f[a]) - complex(f[b])) > 1e-12 for f in funcs):
                raise ValueError(f"family does not separate orbit points {a!r} and {b!r}")

    diag_mats = [np.diag([complex(f[lab]) for lab in labels]) for f in funcs]
    gen = generated_unital_algebra(diag_mats, ambient_dim=len(labels))

    v = truncated_shift(levels)
    mats = []
    vn = np.eye(levels, dtype=np.complex128)
    for _ in range(levels):
        for g in gen.basis:
            table = {lab: g[i, i] for i, lab in enumerate(labels)}
            full_table = {k: table.get(k, 0.0) for k in sys.points}
            mats.append(vn @ orbit_diagonal(sys, full_table, levels))
        vn = v @ vn
    span = orthonormalize(mats, ambient_dim=levels)
    equal, _ = subspace_equal(span, one_point_algebra(sys, levels), tol)
    return equal
