"""Indefinite quadratic forms, cones and J-separated linear maps.

A :class:`QuadForm` stores a non-degenerate indefinite form as
``J(v) = sum_i signs[i] * (P v)_i ** 2`` with the ``-1`` signs first. Every
operation below conjugates its matrices into these adapted coordinates
(``L -> P L P^-1``), where the form is ``diag(signs)`` and the pseudo-adjoint
is ``J L^T J``; results are mapped back to the caller's coordinates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (DegenerateEigenvector, DegenerateForm, DomainError, NotIndefinite,
                     NotSeparatedSpectrum, PreconditionFailed, SamplingError)

TOL_CONE = 1e-10
TOL_SEPARATION = 1e-10
TOL_MONOTONE = 1e-10
DET_TOL = 1e-12


class ConeLabel(enum.Enum):
    POSITIVE = "Positive"
    ZERO = "Zero"
    NEGATIVE = "Negative"


class Separation(enum.Enum):
    STRICTLY_SEPARATED = "StrictlySeparated"
    SEPARATED = "Separated"
    NOT_SEPARATED = "NotSeparated"
    INDETERMINATE = "Indeterminate"


class Monotonicity(enum.Enum):
    STRICTLY_MONOTONE = "StrictlyMonotone"
    MONOTONE = "Monotone"
    NOT_MONOTONE = "NotMonotone"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class QuadForm:
    """Non-degenerate indefinite quadratic form in adapted coordinates."""
    signs: np.ndarray
    adapt_basis: np.ndarray

    def __post_init__(self):
        signs = np.asarray(self.signs, dtype=float)
        n = signs.size
        P = np.asarray(self.adapt_basis, dtype=float)
        if P.shape != (n, n):
            raise DomainError(f"adapt_basis has shape {P.shape}, expected {(n, n)}")
        if not np.all(np.abs(signs) == 1.0):
            raise DomainError("signs must be ±1")
        q = int(np.sum(signs < 0))
        if not 1 <= q <= n - 1:
            raise NotIndefinite(f"index {q} is not in 1..{n - 1}")
        if np.any(np.diff(signs) < 0):
            raise DomainError("signs must list the -1 entries first")
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "adapt_basis", P)

    @classmethod
    def standard(cls, signs) -> "QuadForm":
        signs = np.asarray(signs, dtype=float)
        return cls(signs, np.eye(signs.size))

    @classmethod
    def from_index(cls, n: int, q: int) -> "QuadForm":
        return cls.standard(np.r_[-np.ones(q), np.ones(n - q)])

    @property
    def n(self) -> int:
        return self.signs.size

    @property
    def q(self) -> int:
        return int(np.sum(self.signs < 0))

    @property
    def p(self) -> int:
        return self.n - self.q

    @property
    def J(self) -> np.ndarray:
        return np.diag(self.signs)

    @property
    def gram(self) -> np.ndarray:
        """Symmetric matrix G with J(v) = v^T G v in the caller's coordinates."""
        P = self.adapt_basis
        return P.T @ (self.signs[:, None] * P)

    def negated(self) -> "QuadForm":
        """The form -J, re-sorted so that its -1 signs come first."""
        order = np.r_[np.arange(self.q, self.n), np.arange(self.q)]
        return QuadForm(-self.signs[order], self.adapt_basis[order])

    def to_adapted(self, L) -> np.ndarray:
        P = self.adapt_basis
        return P @ np.linalg.solve(P.T, np.asarray(L, dtype=float).T).T

    def from_adapted(self, La) -> np.ndarray:
        P = self.adapt_basis
        return np.linalg.solve(P, La @ P)


def lagrange_diagonalize(G) -> QuadForm:
    """Reduce a symmetric indefinite form to a signed sum of squares.

    Completing squares with 1x1 pivots (largest diagonal entry) or, when the
    off-diagonal part dominates, 2x2 pivots. The returned form satisfies
    ``P^T diag(signs) P = G`` exactly up to rounding.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DomainError("G must be square")
    if not np.allclose(G, G.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(G).max())):
        raise DomainError("G must be symmetric")
    n = G.shape[0]
    scale = np.abs(G).max()
    if scale == 0.0:
        raise DegenerateForm("zero form")
    sign, logdet = np.linalg.slogdet(G / scale)
    if sign == 0 or logdet < np.log(DET_TOL):
        raise DegenerateForm("form is degenerate")

    A = 0.5 * (G + G.T)
    forms, coefs = [], []
    remaining = list(range(n))
    while remaining:
        sub = A[np.ix_(remaining, remaining)]
        diag = np.abs(np.diag(sub))
        i_loc = int(np.argmax(diag))
        off = np.abs(sub - np.diag(np.diag(sub)))
        off_max = off.max() if len(remaining) > 1 else 0.0
        if diag[i_loc] >= 0.5 * off_max and diag[i_loc] > 1e-14 * scale:
            i = remaining[i_loc]
            d = A[i, i]
            ell = A[i] / d
            forms.append(ell)
            coefs.append(d)
            A = A - d * np.outer(ell, ell)
            remaining.remove(i)
        elif off_max > 1e-14 * scale:
            a, b = np.unravel_index(int(np.argmax(off)), off.shape)
            i, j = remaining[a], remaining[b]
            rows = A[[i, j]]
            B = rows[:, [i, j]]
            Binv = np.linalg.inv(B)
            lam, Q = np.linalg.eigh(Binv)
            for k in range(2):
                forms.append(Q[:, k] @ rows)
                coefs.append(lam[k])
            A = A - rows.T @ Binv @ rows
            remaining.remove(i)
            remaining.remove(j)
        else:
            raise DegenerateForm("residual form vanished before full rank")
        A = 0.5 * (A + A.T)
    coefs = np.array(coefs)
    P = np.sqrt(np.abs(coefs))[:, None] * np.array(forms)
    signs = np.sign(coefs)
    order = np.argsort(signs, kind="stable")
    signs, P = signs[order], P[order]
    q = int(np.sum(signs < 0))
    if q == 0 or q == n:
        raise NotIndefinite(f"form is {'negative' if q == n else 'positive'} definite")
    return QuadForm(signs, P)


def evaluate(J: QuadForm, v) -> float:
    y = J.adapt_basis @ np.asarray(v, dtype=float)
    return float(np.sum(J.signs * y * y))


def cone_of(J: QuadForm, v, tol: float = TOL_CONE) -> ConeLabel:
    v = np.asarray(v, dtype=float)
    val = evaluate(J, v)
    nrm2 = float(v @ v)
    if val > tol * nrm2:
        return ConeLabel.POSITIVE
    if abs(val) <= tol * nrm2:
        return ConeLabel.ZERO
    return ConeLabel.NEGATIVE


def pseudo_adjoint(J: QuadForm, L) -> np.ndarray:
    """The operator L^+ with (Lv, w) = (v, L^+ w) for the bilinear form of J."""
    La = J.to_adapted(L)
    s = J.signs
    return J.from_adapted(s[:, None] * La.T * s[None, :])


def _adjoint_adapted(s, La):
    return s[:, None] * La.T * s[None, :]


def _golden_max(f, lo, hi, tol=1e-12, max_iter=200):
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _pencil_bracket(F, s):
    # real generalized eigenvalues of (F, diag(s)) bound the feasible interval
    ev = np.linalg.eigvals(s[:, None] * F)
    real = ev[np.abs(ev.imag) <= 1e-9 * max(1.0, np.abs(ev).max())].real
    return real


def _min_eig(M):
    return float(np.linalg.eigvalsh(M)[0])


@dataclass(frozen=True)
class SeparationResult:
    verdict: Separation
    witness: float
    min_eig: float

    @property
    def separated(self) -> bool:
        return self.verdict in (Separation.SEPARATED, Separation.STRICTLY_SEPARATED)

    @property
    def strict(self) -> bool:
        return self.verdict is Separation.STRICTLY_SEPARATED


def separation_test(J: QuadForm, L, strict: bool = True, tol: float = TOL_SEPARATION,
                    check_invertible: bool = True) -> SeparationResult:
    """Decide (strict) cone invariance of ``L`` through the pencil ``Q1 - a J``.

    ``Q1 = L^T J L`` (adapted coordinates) represents ``v -> J(Lv)``. ``L`` is
    separated iff ``Q1 - a J`` is positive semidefinite for some ``a > 0`` and
    strictly separated iff it is positive definite. The witness maximises the
    smallest eigenvalue of ``Q1 - a J``, found by golden-section search on
    ``log a`` (the objective is concave in ``a``).

    A best value within ``tol`` (relative to ``||Q1||``) of zero is reported
    as ``SEPARATED`` when ``strict`` is False and ``INDETERMINATE`` when a
    strictness decision was requested.

    ``check_invertible=False`` skips the relative-determinant guard, for
    maps known to be invertible (tangent maps of a flow) whose contraction
    ratio puts the determinant below the guard.
    """
    La = J.to_adapted(L)
    n = J.n
    if La.shape != (n, n):
        raise DomainError("dimension mismatch between J and L")
    if check_invertible:
        sign, logdet = np.linalg.slogdet(La / max(np.abs(La).max(), 1e-300))
        if sign == 0 or logdet < np.log(DET_TOL):
            raise PreconditionFailed("L is singular")
    s = J.signs
    Q1 = La.T @ (s[:, None] * La)
    Q1 = 0.5 * (Q1 + Q1.T)
    scale = max(1.0, np.linalg.norm(Q1, 2))
    Sm = np.diag(s)

    def objective(loga):
        return _min_eig(Q1 - np.exp(loga) * Sm)

    real = _pencil_bracket(Q1, s)
    pos = real[real > 0]
    if pos.size:
        lo, hi = np.log(pos.min()) - np.log(4.0), np.log(pos.max()) + np.log(4.0)
    else:
        lo, hi = np.log(1e-8 * scale), np.log(1e8 * scale)
    loga, best = _golden_max(objective, lo, hi)
    a = float(np.exp(loga))
    thr = tol * scale
    if best > thr:
        verdict = Separation.STRICTLY_SEPARATED
    elif best >= -thr:
        verdict = Separation.INDETERMINATE if strict else Separation.SEPARATED
    else:
        verdict = Separation.NOT_SEPARATED
    return SeparationResult(verdict, a, float(best))


@dataclass(frozen=True)
class PolarPair:
    """``L = R U`` with ``R`` J-symmetric (positive spectrum), ``U`` a J-isometry.

    ``r_minus`` and ``r_plus`` are ascending: ``r1_minus = r_minus[-1]`` is the
    largest negative-type value, ``r1_plus = r_plus[0]`` the smallest
    positive-type one. ``eigvecs`` holds the J-normalised eigenvectors of ``R``
    (negative type first), in the caller's coordinates.
    """
    R: np.ndarray
    U: np.ndarray
    r_minus: np.ndarray
    r_plus: np.ndarray
    eigvecs_minus: np.ndarray
    eigvecs_plus: np.ndarray

    @property
    def r1_minus(self) -> float:
        return float(self.r_minus[-1])

    @property
    def r1_plus(self) -> float:
        return float(self.r_plus[0])


def _cluster_orthogonalize(mu, V, s, rtol=1e-8):
    # eigenvectors of a repeated eigenvalue: pick a J-orthogonal basis of the eigenspace
    order = np.argsort(mu)
    mu, V = mu[order], V[:, order]
    out = V.copy()
    start = 0
    n = mu.size
    while start < n:
        stop = start + 1
        while stop < n and abs(mu[stop] - mu[start]) <= rtol * max(abs(mu[start]), 1e-300):
            stop += 1
        if stop - start > 1:
            blk = V[:, start:stop]
            Q, _ = np.linalg.qr(blk)
            gram = Q.T @ (s[:, None] * Q)
            _, W = np.linalg.eigh(0.5 * (gram + gram.T))
            out[:, start:stop] = Q @ W
        start = stop
    return mu, out


def _refine_isometry(s, U, max_iter=6):
    # Newton iteration U <- (U + U^{-+}) / 2 for the J-isometric polar factor
    for _ in range(max_iter):
        Un = 0.5 * (U + np.linalg.inv(_adjoint_adapted(s, U)))
        done = np.abs(Un - U).max() <= 4 * np.finfo(float).eps * np.abs(Un).max()
        U = Un
        if done:
            break
    return U


def _assemble_polar(J, La, mu, V):
    s = J.signs
    n = J.n
    V = V / np.linalg.norm(V, axis=0)
    jv = np.einsum("ik,i,ik->k", V, s, V)
    if np.any(np.abs(jv) <= TOL_CONE):
        raise DegenerateEigenvector("an eigenvector of L L^+ lies on the zero cone")
    neg = jv < 0
    if int(neg.sum()) != J.q:
        raise NotSeparatedSpectrum(
            f"{int(neg.sum())} negative-type eigenvectors, expected index {J.q}")
    V = V / np.sqrt(np.abs(jv))
    r = np.sqrt(mu)
    Ra = V @ np.diag(r) @ np.linalg.inv(V)
    Ua = _refine_isometry(s, np.linalg.solve(Ra, La))
    Ra = La @ _adjoint_adapted(s, Ua)
    r_minus, r_plus = r[neg], r[~neg]
    om, op = np.argsort(r_minus), np.argsort(r_plus)
    Vm, Vp = V[:, neg][:, om], V[:, ~neg][:, op]
    Pinv = np.linalg.inv(J.adapt_basis)
    return PolarPair(J.from_adapted(Ra), J.from_adapted(Ua), r_minus[om], r_plus[op],
                     Pinv @ Vm, Pinv @ Vp)


def polar_decompose(J: QuadForm, L, method: str = "eig") -> PolarPair:
    """Pseudo-Euclidean polar decomposition of a J-separated map.

    ``R`` is the principal square root of ``S = L L^+``; ``U = R^-1 L``.
    ``method="eig"`` diagonalises ``S`` with a dense nonsymmetric solver.
    ``method="pencil"`` (strictly separated input only) instead solves the
    symmetric-definite pencil ``(J, B - aJ)`` with ``B = J S`` and ``a`` a
    separation witness for ``L^+``; it never touches a nonsymmetric solver and
    serves as an independent cross-check.
    """
    La = J.to_adapted(L)
    s = J.signs
    Lp = _adjoint_adapted(s, La)
    if method == "eig":
        S = La @ Lp
        mu, V = np.linalg.eig(S)
        rho = np.abs(mu).max()
        if np.any(np.abs(mu.imag) > 1e-9 * rho) or np.any(mu.real < 1e-12):
            raise NotSeparatedSpectrum(f"spectrum of L L^+ is not real positive: {mu}")
        mu, V = _cluster_orthogonalize(mu.real, V.real, s)
    elif method == "pencil":
        sep = separation_test(QuadForm.standard(s), Lp, strict=True)
        if not sep.strict:
            raise PreconditionFailed("pencil method needs a strictly separated map")
        B = s[:, None] * (La @ Lp)
        B = 0.5 * (B + B.T)
        Pd = B - sep.witness * np.diag(s)
        nu, V = scipy.linalg.eigh(np.diag(s), Pd)
        mu = sep.witness + 1.0 / nu
        if np.any(mu <= 0):
            raise NotSeparatedSpectrum("non-positive eigenvalue from pencil")
    else:
        raise ValueError(f"unknown method {method!r}")
    return _assemble_polar(J, La, mu, V)


def _top_eigenvalues(S, k):
    mu = np.linalg.eigvals(S)
    mu = mu[np.argsort(-mu.real)][:k]
    if np.any(mu.real <= 0) or np.any(np.abs(mu.imag) > 1e-9 * np.abs(mu)):
        raise NotSeparatedSpectrum(f"leading eigenvalues of L L^+ are not real positive: {mu}")
    return mu.real


def singular_j_values(J: QuadForm, L, L_inv=None) -> tuple[np.ndarray, np.ndarray]:
    """Singular J-values ``(r_minus, r_plus)``, ascending, of a strictly separated map.

    For strictly separated ``L`` every ``r^+`` exceeds every ``r^-``, so the
    ``p`` largest eigenvalues of ``L L^+`` are the squares of ``r^+`` and the
    ``q`` largest eigenvalues of the same product for ``L^-1`` are the squares
    of ``1 / r^-``. Each side is then resolved to relative accuracy even when
    ``r^- / r^+`` is far below machine precision, where
    :func:`polar_decompose` cannot separate the two spectra. ``L_inv``, if
    given, is used instead of inverting ``L``.
    """
    La = J.to_adapted(L)
    s = J.signs
    Li = np.linalg.inv(La) if L_inv is None else J.to_adapted(L_inv)
    r_plus = np.sqrt(_top_eigenvalues(La @ _adjoint_adapted(s, La), J.p))
    r_minus = 1.0 / np.sqrt(_top_eigenvalues(Li @ _adjoint_adapted(s, Li), J.q))
    if r_minus.max() >= r_plus.min():
        raise NotSeparatedSpectrum("r^- and r^+ overlap: the map is not strictly separated")
    return np.sort(r_minus), np.sort(r_plus)


@dataclass(frozen=True)
class MonotonicityResult:
    verdict: Monotonicity
    r1_minus: float
    r1_plus: float
    sampled_min: float
    consistent: bool


def monotonicity_test(J: QuadForm, L, strict: bool = True, tol: float = TOL_MONOTONE,
                      samples: int = 256, seed: int = 0) -> MonotonicityResult:
    """J-monotonicity of ``L`` read off the singular J-values.

    Monotone iff ``r1_minus <= 1 <= r1_plus`` (strict: both strict). The
    verdict is cross-checked against ``J(Lv) - J(v)`` on random unit vectors.
    """
    pp = polar_decompose(J, L)
    rm, rp = pp.r1_minus, pp.r1_plus
    if rm < 1 - tol and rp > 1 + tol:
        verdict = Monotonicity.STRICTLY_MONOTONE
    elif rm <= 1 + tol and rp >= 1 - tol:
        verdict = Monotonicity.INDETERMINATE if strict else Monotonicity.MONOTONE
    else:
        verdict = Monotonicity.NOT_MONOTONE

    La = J.to_adapted(L)
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(samples, J.n))
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    LY = Y @ La.T
    diff = LY ** 2 @ J.signs - Y ** 2 @ J.signs
    sampled_min = float(diff.min())
    slack = 1e-9 * max(1.0, np.linalg.norm(La, 2) ** 2)
    consistent = True
    if verdict in (Monotonicity.MONOTONE, Monotonicity.STRICTLY_MONOTONE):
        consistent = sampled_min >= -slack
    return MonotonicityResult(verdict, rm, rp, sampled_min, bool(consistent))


def _adapted_form(J: QuadForm, F) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    Pinv = np.linalg.inv(J.adapt_basis)
    Fa = Pinv.T @ F @ Pinv
    return 0.5 * (Fa + Fa.T)


def zero_cone_mesh(J: QuadForm, samples: int, rng) -> np.ndarray:
    """Random vectors on the zero cone, in adapted coordinates, unit norm."""
    um = rng.normal(size=(samples, J.q))
    up = rng.normal(size=(samples, J.p))
    um /= np.linalg.norm(um, axis=1, keepdims=True)
    up /= np.linalg.norm(up, axis=1, keepdims=True)
    return np.hstack([um, up]) / np.sqrt(2.0)


def kuhne_bounds(J: QuadForm, F, mesh: int = 2000, seed: int = 0,
                 tol: float = 1e-12) -> tuple[float, float]:
    """The interval ``{r : F - r J is positive semidefinite}``.

    ``F`` must be non-negative on the zero cone (checked on a random mesh).
    The interval is located by maximising the smallest eigenvalue of
    ``F - r J`` and bisecting each side for the sign change.
    """
    Fa = _adapted_form(J, F)
    s = J.signs
    scale = max(1.0, np.linalg.norm(Fa, 2))
    rng = np.random.default_rng(seed)
    Z = zero_cone_mesh(J, mesh, rng)
    on_cone = np.einsum("ki,ij,kj->k", Z, Fa, Z)
    if on_cone.min() < -1e-10 * scale:
        raise PreconditionFailed(f"F is negative on the zero cone ({on_cone.min():.3g})")

    Sm = np.diag(s)

    def g(r):
        return _min_eig(Fa - r * Sm)

    real = _pencil_bracket(Fa, s)
    if real.size:
        lo, hi = real.min(), real.max()
        pad = max(1.0, hi - lo)
        lo, hi = lo - pad, hi + pad
    else:
        lo, hi = -scale, scale
    r0, best = _golden_max(g, lo, hi, tol=1e-14)
    thr = 1e-10 * scale
    if best < -thr:
        raise PreconditionFailed("no r makes F - rJ positive semidefinite")
    if best <= 0.0:
        return float(r0), float(r0)

    def edge(direction):
        step = max(1.0, abs(r0))
        inner, outer = r0, r0 + direction * step
        while g(outer) >= 0.0:
            inner, outer = outer, outer + direction * step
            step *= 2.0
        for _ in range(200):
            mid = 0.5 * (inner + outer)
            if mid in (inner, outer):
                break
            if g(mid) >= 0.0:
                inner = mid
            else:
                outer = mid
        return inner

    return float(edge(-1.0)), float(edge(+1.0))


def sampled_cone_ratios(J: QuadForm, F, samples: int, seed: int = 0):
    """Monte-Carlo ``(inf over C+, sup over C-)`` of ``F(v,v) / J(v)``."""
    Fa = _adapted_form(J, F)
    s = J.signs
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(samples, J.n))
    jv = Y ** 2 @ s
    fv = np.einsum("ki,ij,kj->k", Y, Fa, Y)
    pos, neg = jv > TOL_CONE, jv < -TOL_CONE
    inf_plus = float(np.min(fv[pos] / jv[pos])) if pos.any() else np.inf
    sup_minus = float(np.max(fv[neg] / jv[neg])) if neg.any() else -np.inf
    return inf_plus, sup_minus


def _j_volume_ratio(s, La, V):
    g0 = V.T @ (s[:, None] * V)
    LV = La @ V
    g1 = LV.T @ (s[:, None] * LV)
    d0, d1 = np.linalg.det(g0), np.linalg.det(g1)
    if d0 <= 0 or d1 <= 0:
        return None
    return float(np.sqrt(d1 / d0))


@dataclass(frozen=True)
class SigmaD:
    formula_value: float
    mc_infimum: float
    extremal_value: float


def sigma_d(J: QuadForm, L, d: int, mc_samples: int = 1000, seed: int = 0,
            max_retries: int = 100) -> SigmaD:
    """Minimal J-volume expansion of ``L`` over positive ``d``-subspaces.

    ``formula_value`` is the product of the ``d`` smallest positive-type
    singular J-values; ``mc_infimum`` minimises the expansion rate over
    random ``d``-subspaces of the positive cone (graphs of contractions from
    the positive to the negative coordinate block); ``extremal_value`` is the
    rate on the subspace spanned by ``U^-1`` of the matching eigenvectors.
    """
    if not 1 <= d <= J.p:
        raise DomainError(f"d={d} outside 1..{J.p}")
    sep = separation_test(J, L, strict=True)
    if not sep.strict:
        raise PreconditionFailed("sigma_d needs a strictly J-separated map")
    pp = polar_decompose(J, L)
    formula = float(np.prod(pp.r_plus[:d]))
    La = J.to_adapted(L)
    s = J.signs
    P = J.adapt_basis
    # extremal subspace: U^-1 applied to the R-eigenvectors of the d smallest r+
    Ua = J.to_adapted(pp.U)
    Vext = np.linalg.solve(Ua, P @ pp.eigvecs_plus[:, :d])
    extremal = _j_volume_ratio(s, La, Vext)

    rng = np.random.default_rng(seed)
    best = np.inf
    for _ in range(mc_samples):
        for _attempt in range(max_retries):
            W = rng.normal(size=(J.p, d))
            K = rng.normal(size=(J.q, J.p))
            K *= rng.uniform(0.0, 1.0) / max(np.linalg.norm(K, 2), 1e-300)
            V = np.vstack([K @ W, W])
            ratio = _j_volume_ratio(s, La, V)
            if ratio is not None:
                break
        else:
            raise SamplingError("could not draw a subspace inside the positive cone")
        best = min(best, ratio)
    return SigmaD(formula, float(best), float(extremal))


@dataclass(frozen=True)
class CompositionReport:
    r1_plus: tuple[float, float, float]
    r1_minus: tuple[float, float, float]
    plus_ok: bool
    minus_ok: bool
    plus_margin: float
    minus_margin: float

    @property
    def ok(self) -> bool:
        return self.plus_ok and self.minus_ok


def composition_check(J: QuadForm, L1, L2, slack: float = 1e-9) -> CompositionReport:
    """Check super-multiplicativity of r1_plus and sub-multiplicativity of r1_minus.

    Tuples hold ``(value for L1, value for L2, value for L1 L2)``. Margins are
    relative: ``r(L1L2) / (r(L1) r(L2)) - 1`` for ``r1_plus`` and the reverse
    ratio for ``r1_minus``; both are non-negative when the inequalities hold.
    """
    L1 = np.asarray(L1, dtype=float)
    L2 = np.asarray(L2, dtype=float)
    p1, p2, p12 = (polar_decompose(J, M) for M in (L1, L2, L1 @ L2))
    plus = (p1.r1_plus, p2.r1_plus, p12.r1_plus)
    minus = (p1.r1_minus, p2.r1_minus, p12.r1_minus)
    plus_rhs = plus[0] * plus[1]
    minus_rhs = minus[0] * minus[1]
    plus_ok = plus[2] >= plus_rhs - slack * max(1.0, plus_rhs)
    minus_ok = minus[2] <= minus_rhs + slack * max(1.0, minus_rhs)
    return CompositionReport(plus, minus, bool(plus_ok), bool(minus_ok),
                             plus[2] / plus_rhs - 1.0, minus_rhs / minus[2] - 1.0)


def random_j_isometry(rng, signs, scale: float = 0.5) -> np.ndarray:
    """exp of a random J-skew generator ``diag(signs) @ A`` with ``A`` antisymmetric."""
    n = len(signs)
    A = rng.normal(scale=scale, size=(n, n))
    A = A - A.T
    return scipy.linalg.expm(np.asarray(signs, dtype=float)[:, None] * A)


def random_strictly_separated(rng, n: int, q: int, scale: float = 0.5):
    """A random strictly J-separated map ``W D W^-1 U`` for ``J = diag(-1^q, 1^(n-q))``.

    ``W`` and ``U`` are random J-isometries and ``D`` holds singular J-values
    with ``max(r_minus) < min(r_plus)``. Returns ``(J, L, r_minus, r_plus)``.
    """
    J = QuadForm.from_index(n, q)
    shift = rng.uniform(-1.0, 1.0)
    r_minus = np.exp(rng.uniform(-2.0, -0.05, size=q) + shift)
    r_plus = np.exp(rng.uniform(0.05, 2.0, size=n - q) + shift)
    W = random_j_isometry(rng, J.signs, scale)
    U = random_j_isometry(rng, J.signs, scale)
    D = np.diag(np.r_[r_minus, r_plus])
    L = W @ D @ np.linalg.solve(W, U)
    return J, L, np.sort(r_minus), np.sort(r_plus)
