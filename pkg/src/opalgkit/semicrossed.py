"""Truncated semicrossed products and their commutant theory.

A finite dynamical algebra is a unital subalgebra A of M_d together with a
unitary w satisfying w A w* <= A; conjugation by w is the endomorphism the
crossed construction twists by.  Two realizations of the truncated product
live on C^d (x) C^N:

  * w-form:    span{ W^n (b (x) 1) }  with  W = w* (x) v  (twisted shift),
  * beta-form: span{ V^n pi(b) }      with  V = 1 (x) v   and
               pi(b) = sum_k (w^k b w^-k) (x) p_k  (twisted coefficients).

The two are exchanged by the block-diagonal unitary with blocks w^-n.
Block-lower-triangular compression is multiplicative, so every algebraic
identity below truncates exactly; only reflexivity questions acquire
truncation defects (see the reflexivity module).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graded import GradedOperator, level_shift, matrix_element
from .linop import (
    GAP_TOL,
    OperatorSubspace,
    RESIDUAL_TOL,
    ShapeError,
    algebra_closure_residual,
    as_matrix,
    commutant_of_set,
    frob,
    intersect,
    is_unitary,
    orthonormalize,
    subspace_contains,
    subspace_equal,
    subspace_leq,
    sum_span,
    toeplitz_lower_space,
    truncated_shift,
)


class CovarianceError(ValueError):
    """The unitary does not map the coefficient algebra into itself."""


@dataclass(eq=False)
class FinDynAlgebra:
    """Coefficient algebra A <= M_d plus the implementing unitary w."""

    d: int
    algebra: OperatorSubspace
    w: np.ndarray

    def beta(self, b) -> np.ndarray:
        """The twist b -> w b w*."""
        return self.w @ as_matrix(b) @ self.w.conj().T

    def beta_power(self, b, k: int) -> np.ndarray:
        wk = np.linalg.matrix_power(self.w, k)
        return wk @ as_matrix(b) @ wk.conj().T


def dynamical_algebra(algebra_basis, w, tol: float = GAP_TOL) -> FinDynAlgebra:
    """Validated constructor: unital, multiplicatively closed, w-covariant."""
    w = as_matrix(w)
    d = w.shape[0]
    alg = algebra_basis if isinstance(algebra_basis, OperatorSubspace) else orthonormalize(algebra_basis)
    if alg.ambient_dim != d:
        raise ShapeError(f"algebra lives in M_{alg.ambient_dim} but w is {d} x {d}")
    if not is_unitary(w):
        raise CovarianceError("w is not unitary")
    ok, r = subspace_contains(alg, np.eye(d))
    if not ok:
        raise CovarianceError(f"identity not in the algebra (residual {r:.2e})")
    closure = algebra_closure_residual(alg)
    if closure > tol:
        raise CovarianceError(f"not closed under multiplication (residual {closure:.2e})")
    for idx, b in enumerate(alg.basis):
        ok, r = subspace_contains(alg, w @ b @ w.conj().T)
        if not ok:
            raise CovarianceError(
                f"w b w* leaves the algebra for basis element {idx} (residual {r:.2e})"
            )
    return FinDynAlgebra(d, alg, w)


@dataclass(eq=False)
class TruncatedSemicrossed:
    """A built truncation: the defining system, level count, form, and span."""

    source: FinDynAlgebra
    levels: int
    form: str  # "w" | "beta"
    space: OperatorSubspace


def rho(b, levels: int) -> np.ndarray:
    """b (x) 1: constant block-diagonal operator."""
    return np.kron(np.eye(levels, dtype=np.complex128), as_matrix(b))


def twisted_shift(sys: FinDynAlgebra, levels: int) -> np.ndarray:
    """W = w* (x) v."""
    return np.kron(truncated_shift(levels), sys.w.conj().T)


def coefficient_rep(sys: FinDynAlgebra, b, levels: int) -> np.ndarray:
    """pi(b): block-diagonal with level-k block beta^k(b)."""
    d = sys.d
    out = np.zeros((d * levels, d * levels), dtype=np.complex128)
    bk = as_matrix(b)
    for k in range(levels):
        out[k * d : (k + 1) * d, k * d : (k + 1) * d] = bk
        bk = sys.beta(bk)
    return out


def _covariance_check(sys: FinDynAlgebra, levels: int) -> None:
    w_shift = twisted_shift(sys, levels)
    scale = max(1.0, frob(w_shift))
    for idx, b in enumerate(sys.algebra.basis):
        lhs = rho(b, levels) @ w_shift
        rhs = w_shift @ rho(sys.beta(b), levels)
        if frob(lhs - rhs) > 1e-10 * scale:
            raise CovarianceError(f"covariance identity fails on basis element {idx}")


def build_w_form(sys: FinDynAlgebra, levels: int) -> TruncatedSemicrossed:
    """span{ W^n (b (x) 1) : n < levels, b in A }; covariance verified at build time."""
    if levels < 1:
        raise ValueError("need at least one level")
    _covariance_check(sys, levels)
    w_shift = twisted_shift(sys, levels)
    mats = []
    wn = np.eye(sys.d * levels, dtype=np.complex128)
    for _ in range(levels):
        for b in sys.algebra.basis:
            mats.append(wn @ rho(b, levels))
        wn = w_shift @ wn
    space = orthonormalize(mats)
    if space.dim != levels * sys.algebra.dim:
        raise RuntimeError("graded independence failed: unexpected span dimension")
    return TruncatedSemicrossed(sys, levels, "w", space)


def build_beta_form(sys: FinDynAlgebra, levels: int) -> TruncatedSemicrossed:
    """span{ V^n pi(b) : n < levels, b in A }."""
    if levels < 1:
        raise ValueError("need at least one level")
    _covariance_check(sys, levels)
    v = level_shift(sys.d, levels)
    mats = []
    vn = np.eye(sys.d * levels, dtype=np.complex128)
    for _ in range(levels):
        for b in sys.algebra.basis:
            mats.append(vn @ coefficient_rep(sys, b, levels))
        vn = v @ vn
    space = orthonormalize(mats)
    if space.dim != levels * sys.algebra.dim:
        raise RuntimeError("graded independence failed: unexpected span dimension")
    return TruncatedSemicrossed(sys, levels, "beta", space)


def intertwiner(sys: FinDynAlgebra, levels: int) -> np.ndarray:
    """Block-diagonal unitary with level-n block w^-n; maps beta-form onto w-form."""
    d = sys.d
    q = np.zeros((d * levels, d * levels), dtype=np.complex128)
    wk = np.eye(d, dtype=np.complex128)
    winv = sys.w.conj().T
    for k in range(levels):
        q[k * d : (k + 1) * d, k * d : (k + 1) * d] = wk
        wk = wk @ winv
    return q


def membership_char(
    t: GradedOperator,
    sys: FinDynAlgebra,
    form: str = "w",
    tol: float = GAP_TOL,
) -> tuple[bool, dict]:
    """Block-level membership test, computed entirely from matrix elements.

    w-form: every block on diagonal m must equal (w*)^m b_m with one
    b_m in A shared by the whole diagonal.  beta-form: every block lies in
    A and consecutive blocks on a diagonal are linked by the twist.
    The report names the first violated condition.
    """
    if t.block_dim != sys.d:
        raise ShapeError(f"grading mismatch: block_dim {t.block_dim} vs d {sys.d}")
    n = t.levels
    scale = max(1.0, frob(t.matrix))
    report: dict = {"form": form, "member": True, "violation": None}

    def fail(kind, **info):
        report["member"] = False
        report["violation"] = {"kind": kind, **info}
        return False, report

    for lam in range(n):
        for kappa in range(lam):
            r = frob(matrix_element(t, kappa, lam))
            if r > tol * scale:
                return fail("support-above-diagonal", index=(kappa, lam), residual=r)

    if form == "w":
        for m in range(n):
            wm = np.linalg.matrix_power(sys.w, m)
            b0 = wm @ matrix_element(t, m, 0)
            ok, r = subspace_contains(sys.algebra, b0, tol)
            if not ok:
                return fail("coefficient-outside-algebra", diagonal=m, index=(m, 0), residual=r)
            for lam in range(1, n - m):
                blam = wm @ matrix_element(t, m + lam, lam)
                r = frob(blam - b0)
                if r > tol * scale:
                    return fail("diagonal-not-constant", diagonal=m, index=(m + lam, lam), residual=r)
    elif form == "beta":
        for lam in range(n):
            for kappa in range(lam, n):
                ok, r = subspace_contains(sys.algebra, matrix_element(t, kappa, lam), tol)
                if not ok:
                    return fail("block-outside-algebra", index=(kappa, lam), residual=r)
        for m in range(n):
            for lam in range(n - m - 1):
                lhs = sys.beta(matrix_element(t, m + lam, lam))
                rhs = matrix_element(t, m + lam + 1, lam + 1)
                r = frob(lhs - rhs)
                if r > tol * scale:
                    return fail("twist-chain-broken", diagonal=m, index=(m + lam + 1, lam + 1), residual=r)
    else:
        raise ValueError(f"unknown form {form!r}")
    return True, report


def tensor_with_toeplitz(algebra: OperatorSubspace, levels: int) -> OperatorSubspace:
    """A (x) T_N: spans of b (x) v^m."""
    v = truncated_shift(levels)
    mats = []
    vm = np.eye(levels, dtype=np.complex128)
    for _ in range(levels):
        for b in algebra.basis:
            mats.append(np.kron(vm, b))
        vm = v @ vm
    return orthonormalize(mats)


def tensor_toeplitz_compare(sys: FinDynAlgebra, levels: int, tol: float = GAP_TOL) -> dict:
    """Compare the truncated product with A (x) T_N.

    Returns a classification plus the data that drives it: membership of w
    and w* in A, the sequence dim(w^n A  intersect  A), and the root-of-unity
    refinement (the intersection picks up the span of W^{nq} (b (x) 1) when
    w^q = 1).  In finite dimensions w in A already forces w* in A, since the
    inverse of a unitary is a polynomial in it; the report records both flags.
    """
    sc = build_w_form(sys, levels).space
    tens = tensor_with_toeplitz(sys.algebra, levels)
    inter = intersect(sc, tens)
    rho_a = orthonormalize([rho(b, levels) for b in sys.algebra.basis])

    w_in, w_in_res = subspace_contains(sys.algebra, sys.w, tol)
    ws_in, ws_in_res = subspace_contains(sys.algebra, sys.w.conj().T, tol)

    twists = []
    wn = np.array(sys.w)
    for n in range(1, levels):
        shifted = orthonormalize([wn @ b for b in sys.algebra.basis])
        twists.append(intersect(shifted, sys.algebra).dim)
        wn = wn @ sys.w

    eq, gap = subspace_equal(sc, tens, tol)
    t_in_sc, _ = subspace_leq(tens, sc, tol)
    sc_in_t, _ = subspace_leq(sc, tens, tol)
    inter_is_rho, rho_gap = subspace_equal(inter, rho_a, tol)
    if eq:
        classification = "equal"
    elif t_in_sc:
        classification = "semicrossed-strictly-larger"
    elif sc_in_t:
        classification = "tensor-strictly-larger"
    elif inter_is_rho:
        classification = "intersection=rho(A)"
    else:
        classification = "other"

    # Root-of-unity refinement: smallest q with w^q = 1, if any fits the window.
    refinement = None
    wq = np.array(sys.w)
    for q in range(1, levels):
        if frob(wq - np.eye(sys.d)) <= 1e-10 * sys.d:
            periodic = []
            w_shift = twisted_shift(sys, levels)
            wsq = np.linalg.matrix_power(w_shift, q)
            cur = np.eye(sys.d * levels, dtype=np.complex128)
            n = 0
            while n * q < levels:
                for b in sys.algebra.basis:
                    periodic.append(cur @ rho(b, levels))
                cur = wsq @ cur
                n += 1
            span = orthonormalize(periodic)
            inside, worst = subspace_leq(span, inter, tol)
            refinement = {
                "q": q,
                "periodic_span_dim": span.dim,
                "inside_intersection": inside,
                "worst_residual": worst,
            }
            break
        wq = wq @ sys.w

    return {
        "classification": classification,
        "dims": {
            "semicrossed": sc.dim,
            "tensor": tens.dim,
            "intersection": inter.dim,
            "rho(A)": rho_a.dim,
        },
        "gap_semicrossed_vs_tensor": gap,
        "intersection_is_rho_gap": rho_gap,
        "w_in_A": bool(w_in),
        "w_star_in_A": bool(ws_in),
        "w_membership_residuals": {"w": w_in_res, "w*": ws_in_res},
        "twist_overlap_dims": twists,  # dim(w^n A  cap  A) for n = 1..levels-1
        "root_of_unity": refinement,
        "note": "finite dimensions: w in A implies w* in A (inverse is a polynomial in w)",
    }


def predicted_commutant(sys: FinDynAlgebra, levels: int) -> TruncatedSemicrossed:
    """The commutant of the truncated product, built without brute force.

    Commuting with the twisted shift forces blocks along each lower diagonal
    to follow the inverse twist, and commuting with b (x) 1 puts them in the
    commutant algebra A'.  The result is the twisted-coefficient form of the
    system (A', w*); it is contained in the brute-force commutant of the
    generators exactly, because the commutation relations survive compression.
    """
    a_prime = commutant_of_set(list(sys.algebra.basis), ambient_dim=sys.d)
    csys = dynamical_algebra(a_prime, sys.w.conj().T)
    return build_beta_form(csys, levels)


def brute_commutant(sys: FinDynAlgebra, levels: int) -> OperatorSubspace:
    """Nullspace-oracle commutant of the generating set {b (x) 1, W}."""
    gens = [rho(b, levels) for b in sys.algebra.basis] + [twisted_shift(sys, levels)]
    return commutant_of_set(gens)


def bicommutant_check(sys: FinDynAlgebra, levels: int, tol: float = GAP_TOL) -> dict:
    """Compare the brute double commutant with the build over A''.

    The prediction is the w-form over the double commutant of the coefficient
    algebra; the brute side iterates the nullspace oracle on {b (x) 1, W}.
    """
    c1 = brute_commutant(sys, levels)
    c2 = commutant_of_set(list(c1.basis))
    a_prime = commutant_of_set(list(sys.algebra.basis), ambient_dim=sys.d)
    a_second = commutant_of_set(list(a_prime.basis), ambient_dim=sys.d)
    predicted = build_w_form(dynamical_algebra(a_second, sys.w), levels)
    contained, worst = subspace_leq(predicted.space, c2, tol)
    equal, gap = subspace_equal(predicted.space, c2, tol)
    return {
        "dims": {
            "commutant": c1.dim,
            "double_commutant": c2.dim,
            "predicted": predicted.space.dim,
            "A''": a_second.dim,
        },
        "predicted_inside_brute": contained,
        "containment_residual": worst,
        "equal": equal,
        "gap": gap,
    }


def reduced_crossed_window(
    m_alg: OperatorSubspace,
    w,
    window: int,
    tol: float = GAP_TOL,
) -> tuple[OperatorSubspace, OperatorSubspace]:
    """Two-sided (reduced) construction on a symmetric level window.

    Levels run over -window..window with the truncated bilateral shift; the
    full span uses all integer powers, the analytic part only n >= 0.  The
    analytic part is asserted to be the intersection of the full span with
    the block-lower-triangular pattern.
    """
    w = as_matrix(w)
    d = w.shape[0]
    if m_alg.ambient_dim != d:
        raise ShapeError("algebra/unitary size mismatch")
    if not is_unitary(w):
        raise CovarianceError("w is not unitary")
    for idx, b in enumerate(m_alg.basis):
        ok, r = subspace_contains(m_alg, b.conj().T, tol)
        if not ok:
            raise ValueError(f"algebra not *-closed at basis element {idx} (residual {r:.2e})")
        ok, _ = subspace_contains(m_alg, w @ b @ w.conj().T, tol)
        if not ok:
            raise CovarianceError(f"w does not normalize the algebra at basis element {idx}")
    ok, _ = subspace_contains(m_alg, np.eye(d), tol)
    if not ok:
        raise ValueError("algebra is not unital")
    if algebra_closure_residual(m_alg) > tol:
        raise ValueError("not an algebra: product leaves the span")

    lev = 2 * window + 1
    u = np.kron(truncated_shift(lev), np.eye(d, dtype=np.complex128))

    def pihat(b):
        out = np.zeros((d * lev, d * lev), dtype=np.complex128)
        for k in range(lev):
            e = k - window
            we = np.linalg.matrix_power(w, e) if e >= 0 else np.linalg.matrix_power(w.conj().T, -e)
            out[k * d : (k + 1) * d, k * d : (k + 1) * d] = we @ b @ we.conj().T
        return out

    reps = [pihat(b) for b in m_alg.basis]
    full_mats, analytic_mats = [], []
    for n in range(-(lev - 1), lev):
        un = (
            np.linalg.matrix_power(u, n)
            if n >= 0
            else np.linalg.matrix_power(u.conj().T, -n)
        )
        for p in reps:
            full_mats.append(un @ p)
            if n >= 0:
                analytic_mats.append(un @ p)
    crossed_span = orthonormalize(full_mats)
    analytic_part = orthonormalize(analytic_mats)

    from .linop import block_lower_pattern

    lower = block_lower_pattern(lev, d)
    inter = intersect(crossed_span, lower)
    equal, gap = subspace_equal(analytic_part, inter, tol)
    if not equal:
        raise RuntimeError(f"analytic part != lower-triangular slice (gap {gap:.2e})")
    return crossed_span, analytic_part


def graded_maps_preserve(space: OperatorSubspace, block_dim: int, tol: float = GAP_TOL) -> float:
    """Worst residual of a block-diagonal extraction against the span."""
    from .graded import fourier_coefficient, graded

    n = space.ambient_dim // block_dim
    worst = 0.0
    for b in space.basis:
        g = graded(b, block_dim)
        for m in range(-(n - 1), n):
            _, r = subspace_contains(space, fourier_coefficient(g, m).matrix, tol)
            worst = max(worst, r)
    return worst
