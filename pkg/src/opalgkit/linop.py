"""Dense complex linear algebra over subspaces of M_n(C).

The whole package works with the trace inner product <X, Y> = tr(Y* X),
which identifies M_n(C) with the Hilbert space C^(n^2) under row-major
flattening.  A subspace of operators is carried as a stack of matrices
that is orthonormal in that inner product.

Annihilators use the *bilinear* trace pairing tr(S R) (no conjugation),
which keeps them complex-linear and matches the rank-one duality used by
the reflexive-cover engines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Numerical conventions, shared across the package.
RANK_RTOL = 1e-10      # singular values below RANK_RTOL * smax * max(shape) count as zero
GAP_TOL = 1e-8         # subspace equality gap tolerance
RESIDUAL_TOL = 1e-10   # residual tolerance for algebraic identities
UNITARY_TOL = 1e-10    # ||U*U - I||_F <= UNITARY_TOL * n


class ShapeError(ValueError):
    """Operands do not have the shape/ambient size the operation requires."""


def as_matrix(x) -> np.ndarray:
    """Coerce to a square complex matrix."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {a.shape}")
    return a


def frob(x) -> float:
    return float(np.linalg.norm(x))


def opnorm(x) -> float:
    return float(np.linalg.norm(x, 2))


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = as_matrix(u)
    n = u.shape[0]
    return frob(u.conj().T @ u - np.eye(n)) <= tol * n


def is_hermitian(a, tol: float = UNITARY_TOL) -> bool:
    a = as_matrix(a)
    return frob(a - a.conj().T) <= tol * a.shape[0]


def nullspace(a, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal columns spanning {x : a @ x = 0}."""
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ShapeError("nullspace expects a 2-d array")
    m, n = a.shape
    if m == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    cut = rtol * (s[0] if s.size else 0.0) * max(m, n)
    rank = int(np.sum(s > cut))
    return vh[rank:].conj().T


def trace_pair(s, r) -> complex:
    """Bilinear pairing tr(s @ r), evaluated without forming the product."""
    return complex(np.einsum("ik,ki->", s, r))


@dataclass(frozen=True)
class PatternMeta:
    """Declares S = left @ span{E_ij : (i, j) in units} @ right.

    Trusted metadata attached at construction time; it is never inferred
    numerically.  left/right default to the identity.
    """

    units: tuple
    left: np.ndarray | None = None
    right: np.ndarray | None = None


@dataclass(eq=False)
class OperatorSubspace:
    """Linear subspace of M_n(C), stored as a trace-orthonormal basis stack.

    basis has shape (dim, n, n); rows of basis.reshape(dim, n*n) are
    orthonormal for the standard Hermitian inner product.
    """

    ambient_dim: int
    basis: np.ndarray
    pattern: PatternMeta | None = None

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=np.complex128)
        if b.ndim != 3:
            b = b.reshape((-1, self.ambient_dim, self.ambient_dim))
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def flat(self) -> np.ndarray:
        return self.basis.reshape(self.dim, -1)

    def project(self, t) -> np.ndarray:
        """Orthogonal projection of t onto the subspace."""
        t = as_matrix(t)
        if t.shape[0] != self.ambient_dim:
            raise ShapeError(f"ambient mismatch: {t.shape[0]} vs {self.ambient_dim}")
        coeff = self.flat().conj() @ t.ravel()
        return (coeff @ self.flat()).reshape(t.shape)

    def __repr__(self):  # keep reports readable
        return f"OperatorSubspace(n={self.ambient_dim}, dim={self.dim})"


def _stack(mats) -> np.ndarray:
    mats = [as_matrix(m) for m in mats]
    if not mats:
        raise ShapeError("empty matrix list needs an explicit ambient dimension")
    n = mats[0].shape[0]
    for m in mats:
        if m.shape[0] != n:
            raise ShapeError(f"mismatched shapes: {m.shape} vs ({n}, {n})")
    return np.stack(mats)


def orthonormalize(spanning_set, tol: float = RANK_RTOL, ambient_dim: int | None = None) -> OperatorSubspace:
    """Orthonormal basis of the span of `spanning_set`.

    Deterministic: input order, then Gram-Schmidt (two passes for numerical
    orthogonality).  Directions whose residual falls below
    tol * max_input_norm * max(count, n^2) are dropped, the standard
    numerical-rank convention at the package's working conditioning.
    """
    seq = list(spanning_set)
    if not seq:
        if ambient_dim is None:
            raise ShapeError("empty spanning set needs ambient_dim")
        return OperatorSubspace(ambient_dim, np.zeros((0, ambient_dim, ambient_dim), dtype=np.complex128))
    arr = _stack(seq)
    k, n, _ = arr.shape
    flat = arr.reshape(k, -1)
    scale = float(np.max(np.linalg.norm(flat, axis=1)))
    if scale == 0.0:
        return OperatorSubspace(n, np.zeros((0, n, n), dtype=np.complex128))
    thr = tol * scale * max(k, n * n)
    rows: list[np.ndarray] = []
    for v in flat:
        v = v.copy()
        for _ in range(2):
            for b in rows:
                v -= (b.conj() @ v) * b
        nv = np.linalg.norm(v)
        if nv > thr:
            rows.append(v / nv)
    basis = np.array(rows, dtype=np.complex128).reshape(len(rows), n, n)
    return OperatorSubspace(n, basis)


def subspace_contains(s: OperatorSubspace, t, tol: float = GAP_TOL) -> tuple[bool, float]:
    """Membership test with residual: ||t - proj(t)||_F <= tol * max(1, ||t||_F)."""
    t = as_matrix(t)
    residual = frob(t - s.project(t))
    return residual <= tol * max(1.0, frob(t)), residual


def subspace_equal(s1: OperatorSubspace, s2: OperatorSubspace, tol: float = GAP_TOL) -> tuple[bool, float]:
    """Equality via the gap ||P_S1 - P_S2|| between orthogonal projections.

    For equal dimensions the gap is the sine of the largest principal angle,
    computed from the cross-Gram matrix; for unequal dimensions it is 1.
    """
    if s1.ambient_dim != s2.ambient_dim:
        raise ShapeError("ambient mismatch")
    if s1.dim != s2.dim:
        return False, 1.0
    if s1.dim == 0:
        return True, 0.0
    c = s1.flat() @ s2.flat().conj().T
    sv = np.linalg.svd(c, compute_uv=False)
    smin = float(np.clip(sv[-1], 0.0, 1.0))
    gap = float(np.sqrt(max(0.0, 1.0 - smin * smin)))
    return gap <= tol, gap


def subspace_leq(s1: OperatorSubspace, s2: OperatorSubspace, tol: float = GAP_TOL) -> tuple[bool, float]:
    """Containment s1 <= s2; returns the worst basis-element residual."""
    worst = 0.0
    for b in s1.basis:
        _, r = subspace_contains(s2, b, tol)
        worst = max(worst, r)
    return worst <= tol, worst


def sum_span(s1: OperatorSubspace, s2: OperatorSubspace) -> OperatorSubspace:
    if s1.ambient_dim != s2.ambient_dim:
        raise ShapeError("ambient mismatch")
    mats = list(s1.basis) + list(s2.basis)
    return orthonormalize(mats, ambient_dim=s1.ambient_dim)


def intersect(s1: OperatorSubspace, s2: OperatorSubspace) -> OperatorSubspace:
    """Intersection via the nullspace of [B1^H, -B2^H] in coefficient space."""
    if s1.ambient_dim != s2.ambient_dim:
        raise ShapeError("ambient mismatch")
    n = s1.ambient_dim
    if s1.dim == 0 or s2.dim == 0:
        return orthonormalize([], ambient_dim=n)
    a = np.hstack([s1.flat().T, -s2.flat().T])  # columns: coefficient pairs (a; b)
    null = nullspace(a)
    mats = []
    for col in null.T:
        x = (col[: s1.dim] @ s1.flat()).reshape(n, n)
        mats.append(x)
    return orthonormalize(mats, ambient_dim=n)


def annihilator(s: OperatorSubspace) -> OperatorSubspace:
    """{R : tr(S_i R) = 0 for every basis element S_i} under the bilinear pairing."""
    n = s.ambient_dim
    if s.dim == 0:
        return full_matrix_space(n)
    # tr(S R) = flat(S^T) . flat(R), a plain (unconjugated) dot product.
    constraints = np.transpose(s.basis, (0, 2, 1)).reshape(s.dim, -1)
    null = nullspace(constraints)
    basis = null.T.reshape(-1, n, n)
    return OperatorSubspace(n, basis)


def commutant_of_set(generators, ambient_dim: int | None = None) -> OperatorSubspace:
    """{X : X G = G X for every generator G}, by incremental nullspace reduction.

    An empty generator list returns all of M_n (ambient_dim required then).
    """
    gens = [as_matrix(g) for g in generators]
    if not gens:
        if ambient_dim is None:
            raise ShapeError("empty generator list needs ambient_dim")
        return full_matrix_space(ambient_dim)
    n = gens[0].shape[0]
    for g in gens:
        if g.shape[0] != n:
            raise ShapeError("generators must share one ambient size")
    cur = np.eye(n * n, dtype=np.complex128).reshape(n * n, n, n)
    for g in gens:
        if cur.shape[0] == 0:
            break
        d = cur @ g - g @ cur
        k = d.reshape(cur.shape[0], -1).T  # constraints: columns indexed by current basis
        null = nullspace(k)
        cur = np.einsum("ji,jab->iab", null, cur)
    return OperatorSubspace(n, cur)


def generated_unital_algebra(generators, ambient_dim: int | None = None) -> OperatorSubspace:
    """Smallest unital subalgebra containing the generators.

    Iterates span <- span + span*span until the dimension stabilizes;
    terminates because dim <= n^2.
    """
    gens = [as_matrix(g) for g in generators]
    if not gens and ambient_dim is None:
        raise ShapeError("empty generator list needs ambient_dim")
    n = gens[0].shape[0] if gens else ambient_dim
    cur = orthonormalize([np.eye(n, dtype=np.complex128)] + gens)
    while True:
        b = cur.basis
        products = np.einsum("iab,jbc->ijac", b, b).reshape(-1, n, n)
        nxt = orthonormalize(list(b) + list(products), ambient_dim=n)
        if nxt.dim == cur.dim:
            return nxt
        cur = nxt


def algebra_closure_residual(s: OperatorSubspace) -> float:
    """Worst residual of a basis-pair product against the span (0 for algebras)."""
    worst = 0.0
    for x in s.basis:
        for y in s.basis:
            _, r = subspace_contains(s, x @ y)
            worst = max(worst, r)
    return worst


# ---------------------------------------------------------------------------
# Stock matrices and spaces used throughout the package.

def matrix_unit(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros((n, n), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def truncated_shift(n: int) -> np.ndarray:
    """Nilpotent shift e_k -> e_{k+1}, the finite window of the unilateral shift."""
    v = np.zeros((n, n), dtype=np.complex128)
    for k in range(n - 1):
        v[k + 1, k] = 1.0
    return v


def cyclic_permutation(n: int) -> np.ndarray:
    """Unitary cycle e_k -> e_{k+1 mod n}."""
    w = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        w[(k + 1) % n, k] = 1.0
    return w


def full_matrix_space(n: int) -> OperatorSubspace:
    basis = np.eye(n * n, dtype=np.complex128).reshape(n * n, n, n)
    units = tuple((i, j) for i in range(n) for j in range(n))
    return OperatorSubspace(n, basis, pattern=PatternMeta(units=units))


def pattern_space(n: int, units) -> OperatorSubspace:
    """Span of matrix units over an index pattern, with trusted pattern metadata."""
    units = tuple(sorted((int(i), int(j)) for i, j in units))
    basis = np.stack([matrix_unit(n, i, j) for i, j in units]) if units else np.zeros((0, n, n), dtype=np.complex128)
    return OperatorSubspace(n, basis, pattern=PatternMeta(units=units))


def twist_subspace(s: OperatorSubspace, left=None, right=None) -> OperatorSubspace:
    """left @ S @ right for unitaries; pattern metadata is carried along."""
    n = s.ambient_dim
    l = np.eye(n, dtype=np.complex128) if left is None else as_matrix(left)
    r = np.eye(n, dtype=np.complex128) if right is None else as_matrix(right)
    basis = np.einsum("ab,ibc,cd->iad", l, s.basis, r)
    meta = None
    if s.pattern is not None:
        oldl = s.pattern.left if s.pattern.left is not None else np.eye(n)
        oldr = s.pattern.right if s.pattern.right is not None else np.eye(n)
        meta = PatternMeta(units=s.pattern.units, left=l @ oldl, right=oldr @ r)
    return OperatorSubspace(n, basis, pattern=meta)


def diagonal_space(n: int) -> OperatorSubspace:
    return pattern_space(n, [(i, i) for i in range(n)])


def lower_triangular_space(n: int) -> OperatorSubspace:
    """All lower triangular matrices (the scalar-level analogue of a nest algebra)."""
    return pattern_space(n, [(i, j) for i in range(n) for j in range(i + 1)])


def toeplitz_lower_space(n: int) -> OperatorSubspace:
    """Lower-triangular Toeplitz matrices: polynomials in the nilpotent shift."""
    v = truncated_shift(n)
    mats = [np.eye(n, dtype=np.complex128)]
    for _ in range(n - 1):
        mats.append(mats[-1] @ v)
    return orthonormalize(mats)


def block_lower_pattern(levels: int, block_dim: int) -> OperatorSubspace:
    """Block lower-triangular pattern with respect to a level grading."""
    units = []
    for kappa in range(levels):
        for lam in range(kappa + 1):
            for i in range(block_dim):
                for j in range(block_dim):
                    units.append((kappa * block_dim + i, lam * block_dim + j))
    return pattern_space(levels * block_dim, units)
