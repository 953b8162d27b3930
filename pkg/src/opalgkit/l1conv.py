"""Finitely supported convolution algebras over a matrix C*-algebra.

Elements are finite coefficient sequences (x_0, ..., x_k) in a *-closed
unital algebra C <= M_d carrying a *-endomorphism alpha.  Two products are
available, twisting on opposite sides:

    left:  (n, x) * (m, y) -> (n + m, alpha^m(x) y)
    right: (n, x) * (m, y) -> (n + m, x alpha^n(y))

Completions are out of scope: everything here is exact finite-support
algebra, plus the level-graded representations by the truncated shift.
The represented norms reported by callers are lower bounds for any
supremum over representations, and are labeled as such where surfaced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graded import GradedOperator, level_shift
from .linop import (
    GAP_TOL,
    OperatorSubspace,
    ShapeError,
    algebra_closure_residual,
    as_matrix,
    frob,
    is_unitary,
    opnorm,
    orthonormalize,
    subspace_contains,
)


@dataclass(eq=False)
class ConvolutionContext:
    """The coefficient C*-algebra together with its *-endomorphism."""

    algebra: OperatorSubspace
    images: np.ndarray  # alpha applied to each basis element, stacked

    @property
    def d(self) -> int:
        return self.algebra.ambient_dim

    def coefficients(self, x) -> np.ndarray:
        return self.algebra.flat().conj() @ as_matrix(x).ravel()

    def apply(self, x) -> np.ndarray:
        """alpha(x) by linear extension from the basis images."""
        c = self.coefficients(x)
        return np.einsum("k,kab->ab", c, self.images)

    def apply_power(self, x, k: int) -> np.ndarray:
        out = as_matrix(x)
        for _ in range(k):
            out = self.apply(out)
        return out

    def is_commutative(self, tol: float = 1e-10) -> bool:
        b = self.algebra.basis
        comm = np.einsum("iab,jbc->ijac", b, b) - np.einsum("jab,ibc->ijac", b, b)
        return float(np.max(np.abs(comm))) <= tol if b.size else True


def convolution_context(algebra_basis, alpha, tol: float = 1e-10) -> ConvolutionContext:
    """Validated constructor.

    alpha is either a unitary u (then alpha = ad_u) or an explicit list of
    basis images.  Checks: C is a *-closed unital algebra, alpha maps C into
    itself, and alpha is multiplicative and *-preserving on the basis.
    """
    alg = algebra_basis if isinstance(algebra_basis, OperatorSubspace) else orthonormalize(algebra_basis)
    d = alg.ambient_dim
    ok, r = subspace_contains(alg, np.eye(d))
    if not ok:
        raise ValueError(f"coefficient algebra not unital (residual {r:.2e})")
    if algebra_closure_residual(alg) > tol:
        raise ValueError("coefficient span not closed under multiplication")
    for idx, b in enumerate(alg.basis):
        ok, r = subspace_contains(alg, b.conj().T)
        if not ok:
            raise ValueError(f"not *-closed at basis element {idx} (residual {r:.2e})")

    a = np.asarray(alpha, dtype=np.complex128)
    if a.ndim == 2:
        u = as_matrix(a)
        if not is_unitary(u):
            raise ValueError("endomorphism matrix must be unitary")
        images = np.stack([u @ b @ u.conj().T for b in alg.basis])
    else:
        images = np.stack([as_matrix(m) for m in alpha])
        if images.shape[0] != alg.dim:
            raise ShapeError("need one image per basis element")

    ctx = ConvolutionContext(alg, images)
    for idx, b in enumerate(alg.basis):
        ok, r = subspace_contains(alg, images[idx])
        if not ok:
            raise ValueError(f"alpha leaves the algebra at basis element {idx} (residual {r:.2e})")
        if frob(ctx.apply(b.conj().T) - ctx.apply(b).conj().T) > tol * d:
            raise ValueError(f"alpha not *-preserving at basis element {idx}")
    for bi in alg.basis:
        for bj in alg.basis:
            if frob(ctx.apply(bi @ bj) - ctx.apply(bi) @ ctx.apply(bj)) > tol * d:
                raise ValueError("alpha not multiplicative on the algebra")
    return ctx


@dataclass(eq=False)
class L1Element:
    """Finite coefficient sequence in a convolution context."""

    context: ConvolutionContext
    coeffs: np.ndarray  # (support, d, d)

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim == 2:
            c = c[None]
        object.__setattr__(self, "coeffs", c)

    @property
    def support(self) -> int:
        return self.coeffs.shape[0]

    @property
    def ell1_norm(self) -> float:
        """Sum of operator norms of the coefficients."""
        return float(sum(opnorm(x) for x in self.coeffs))


def monomial(ctx: ConvolutionContext, n: int, x) -> L1Element:
    """The element supported at position n with coefficient x."""
    d = ctx.d
    coeffs = np.zeros((n + 1, d, d), dtype=np.complex128)
    coeffs[n] = as_matrix(x)
    return L1Element(ctx, coeffs)


def _check_same_context(f: L1Element, g: L1Element):
    if f.context is not g.context:
        if f.context.d != g.context.d or not np.allclose(f.context.algebra.basis, g.context.algebra.basis) or not np.allclose(f.context.images, g.context.images):
            raise ValueError("mismatched algebra contexts")


def conv_left(f: L1Element, g: L1Element) -> L1Element:
    """Bilinear extension of (n, x) * (m, y) -> (n + m, alpha^m(x) y)."""
    _check_same_context(f, g)
    ctx = f.context
    d = ctx.d
    out = np.zeros((f.support + g.support - 1, d, d), dtype=np.complex128)
    for m, y in enumerate(g.coeffs):
        if not np.any(y):
            continue
        for n, x in enumerate(f.coeffs):
            if not np.any(x):
                continue
            out[n + m] += ctx.apply_power(x, m) @ y
    return L1Element(ctx, out)


def conv_right(f: L1Element, g: L1Element) -> L1Element:
    """Bilinear extension of (n, x) * (m, y) -> (n + m, x alpha^n(y))."""
    _check_same_context(f, g)
    ctx = f.context
    d = ctx.d
    out = np.zeros((f.support + g.support - 1, d, d), dtype=np.complex128)
    for n, x in enumerate(f.coeffs):
        if not np.any(x):
            continue
        for m, y in enumerate(g.coeffs):
            if not np.any(y):
                continue
            out[n + m] += x @ ctx.apply_power(y, n)
    return L1Element(ctx, out)


def opposite_identity_check(ctx: ConvolutionContext, samples: int = 16, seed: int = 0, max_support: int = 4) -> dict:
    """For commutative coefficients the two products are opposite to each other:
    left(F, G) must equal right(G, F).  Checked on random pairs."""
    if not ctx.is_commutative():
        raise ValueError("coefficient algebra is not commutative")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        f = random_element(ctx, rng, max_support)
        g = random_element(ctx, rng, max_support)
        lhs = conv_left(f, g)
        rhs = conv_right(g, f)
        worst = max(worst, float(np.max(np.abs(lhs.coeffs - rhs.coeffs))))
    return {"ok": worst <= 1e-10, "worst_residual": worst, "samples": samples}


def random_element(ctx: ConvolutionContext, rng: np.random.Generator, max_support: int) -> L1Element:
    support = int(rng.integers(1, max_support + 1))
    d = ctx.d
    coeffs = np.zeros((support, d, d), dtype=np.complex128)
    for n in range(support):
        c = rng.standard_normal(ctx.algebra.dim) + 1j * rng.standard_normal(ctx.algebra.dim)
        coeffs[n] = np.einsum("k,kab->ab", c, ctx.algebra.basis)
    return L1Element(ctx, coeffs)


def diagonal_rep(ctx: ConvolutionContext, x, levels: int) -> np.ndarray:
    """The level-graded representation of a coefficient: blockdiag(alpha^k(x))."""
    d = ctx.d
    out = np.zeros((d * levels, d * levels), dtype=np.complex128)
    cur = as_matrix(x)
    for k in range(levels):
        out[k * d : (k + 1) * d, k * d : (k + 1) * d] = cur
        cur = ctx.apply(cur)
    return out


def lt_rep(f: L1Element, levels: int) -> GradedOperator:
    """Sum of V^n diag-rep(x_n): the shift-side representation.

    A unital homomorphism for the left product; exact under truncation since
    lower-triangular compression is multiplicative.  Truncation below the
    support length only drops coefficients that act as zero, flagged in meta.
    """
    ctx = f.context
    v = level_shift(ctx.d, levels)
    out = np.zeros((ctx.d * levels, ctx.d * levels), dtype=np.complex128)
    vn = np.eye(ctx.d * levels, dtype=np.complex128)
    for n in range(f.support):
        if n >= levels:
            break
        out += vn @ diagonal_rep(ctx, f.coeffs[n], levels)
        vn = v @ vn
    meta = {"truncated_support": f.support > levels}
    return GradedOperator(ctx.d, levels, out, meta=meta)


def rt_rep(f: L1Element, levels: int) -> GradedOperator:
    """Sum of diag-rep(x_n) (V*)^n: the adjoint-side representation,
    a homomorphism for the right product."""
    ctx = f.context
    vstar = level_shift(ctx.d, levels).conj().T
    out = np.zeros((ctx.d * levels, ctx.d * levels), dtype=np.complex128)
    vn = np.eye(ctx.d * levels, dtype=np.complex128)
    for n in range(f.support):
        if n >= levels:
            break
        out += diagonal_rep(ctx, f.coeffs[n], levels) @ vn
        vn = vn @ vstar
    meta = {"truncated_support": f.support > levels}
    return GradedOperator(ctx.d, levels, out, meta=meta)


def covariant_pair_check(
    ctx: ConvolutionContext,
    pi_images,
    t,
    side: str = "left",
    tol: float = 1e-10,
) -> tuple[bool, dict]:
    """Validate a covariant pair (pi, T) over the context.

    pi is given by its values on the algebra basis and must be a unital
    *-homomorphism; T must be a contraction.  Left covariance asks
    pi(x) T = T pi(alpha(x)); right covariance asks T pi(x) = pi(alpha(x)) T.
    For left pairs the induced commutation of T T* with pi(C) is also
    reported.
    """
    images = np.stack([as_matrix(m) for m in pi_images])
    if images.shape[0] != ctx.algebra.dim:
        raise ShapeError("need one pi image per algebra basis element")
    t = as_matrix(t)
    m = t.shape[0]
    if images.shape[1] != m:
        raise ShapeError("pi images and T act on different spaces")

    def pi(x):
        c = ctx.coefficients(x)
        return np.einsum("k,kab->ab", c, images)

    scale = max(1.0, float(np.max(np.abs(images))))
    hom_res = 0.0
    for bi in ctx.algebra.basis:
        for bj in ctx.algebra.basis:
            hom_res = max(hom_res, frob(pi(bi @ bj) - pi(bi) @ pi(bj)))
        hom_res = max(hom_res, frob(pi(bi.conj().T) - pi(bi).conj().T))
    hom_res = max(hom_res, frob(pi(np.eye(ctx.d)) - np.eye(m)))
    if hom_res > tol * scale * m:
        raise ValueError(f"pi is not a unital *-homomorphism (residual {hom_res:.2e})")

    norm_t = opnorm(t)
    norm_ok = norm_t <= 1.0 + 1e-10
    residuals = []
    for b in ctx.algebra.basis:
        if side == "left":
            residuals.append(frob(pi(b) @ t - t @ pi(ctx.apply(b))))
        elif side == "right":
            residuals.append(frob(t @ pi(b) - pi(ctx.apply(b)) @ t))
        else:
            raise ValueError(f"unknown side {side!r}")
    cov_ok = max(residuals) <= tol * max(1.0, norm_t) * scale * m

    report = {
        "side": side,
        "norm": norm_t,
        "norm_ok": norm_ok,
        "covariance_residuals": residuals,
        "covariance_ok": cov_ok,
    }
    if side == "left":
        tt = t @ t.conj().T
        comm = [frob(tt @ pi(b) - pi(b) @ tt) for b in ctx.algebra.basis]
        report["tt_star_commutes_residuals"] = comm
        report["tt_star_commutes"] = max(comm) <= tol * scale * m
    return bool(norm_ok and cov_ok), report
