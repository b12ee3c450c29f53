"""Subbundles and quadratic-form fields sampled along an orbit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, NonInvariantSubbundle
from .flow import OrbitSegment
from .pseudo_euclidean import QuadForm

INVARIANCE_TOL = 1e-3
ANGLE_TOL = 1e-3


def _orthonormal_columns(V) -> np.ndarray:
    Q, R = np.linalg.qr(V)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= 1e-12 * max(d.max(), 1e-300):
        raise DomainError("basis vectors are linearly dependent")
    return Q


@dataclass(frozen=True)
class Subbundle:
    """Orthonormal frames of a subbundle at orbit samples ``start..start+len-1``.

    ``frames`` has shape ``(len, n, d)``; columns span the fibre.
    """
    start: int
    frames: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + len(self.frames) - 1

    @property
    def dim(self) -> int:
        return self.frames.shape[2]

    @property
    def n(self) -> int:
        return self.frames.shape[1]

    def at(self, i: int) -> np.ndarray:
        if not self.start <= i <= self.stop:
            raise DomainError(f"sample {i} outside {self.start}..{self.stop}")
        return self.frames[i - self.start]

    @classmethod
    def constant(cls, orbit: OrbitSegment, basis, start: int = 0, stop: int | None = None):
        """The same subspace at every sample; ``basis`` lists spanning vectors (rows)."""
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        if B.shape[1] != orbit.n:
            raise DomainError(f"basis vectors must have length {orbit.n}")
        Q = _orthonormal_columns(B.T)
        stop = orbit.m if stop is None else stop
        return cls(start, np.broadcast_to(Q, (stop - start + 1,) + Q.shape).copy())

    def restrict(self, start: int, stop: int) -> "Subbundle":
        return Subbundle(start, self.frames[start - self.start:stop - self.start + 1])


def restricted_factors(orbit: OrbitSegment, bundle: Subbundle, tol: float = INVARIANCE_TOL):
    """The cocycle in the bundle frames: ``A_i = F_{i+1}^T Phi_i F_i``.

    Returns ``(A, logs, residual)``; ``residual[i]`` is the sine of the largest
    angle between ``Phi_i F_i`` and ``F_{i+1}``. Raises
    :class:`NonInvariantSubbundle` when it exceeds ``tol``.
    """
    a, b = bundle.start, bundle.stop
    if b > orbit.m or a < 0:
        raise DomainError("subbundle extends beyond the orbit")
    Fr = bundle.frames
    img = orbit.factors[a:b] @ Fr[:-1]
    A = np.swapaxes(Fr[1:], 1, 2) @ img
    Q = np.linalg.qr(img)[0]
    resid = Q - Fr[1:] @ (np.swapaxes(Fr[1:], 1, 2) @ Q)
    residual = np.linalg.norm(resid, ord=2, axis=(1, 2)) if len(resid) else np.zeros(0)
    worst = float(residual.max(initial=0.0))
    if worst > tol:
        k = int(np.argmax(residual)) + a
        raise NonInvariantSubbundle(
            f"subbundle not invariant: angle {worst:.3g} at sample {k} exceeds {tol:g}")
    return A, orbit.renorm_log[a:b].copy(), residual


def min_angle(U, V) -> float:
    """Smallest principal angle between the column spans of orthonormal ``U`` and ``V``."""
    s = np.linalg.svd(U.T @ V, compute_uv=False)
    return float(np.arccos(np.clip(s.max(initial=0.0), -1.0, 1.0)))


def check_complementary(E: Subbundle, F: Subbundle) -> None:
    if E.n != F.n or E.dim + F.dim != E.n:
        raise DomainError(f"dimensions {E.dim} + {F.dim} do not add up to {E.n}")
    if (E.start, E.stop) != (F.start, F.stop):
        raise DomainError("E and F are sampled on different ranges")
    for i in (E.start, (E.start + E.stop) // 2, E.stop):
        if min_angle(E.at(i), F.at(i)) < ANGLE_TOL:
            raise DomainError(f"E and F are not complementary at sample {i}")


@dataclass(frozen=True)
class JField:
    """A quadratic form at each sample: ``J_i = P_i^T diag(signs) P_i``."""
    signs: tuple
    start: int
    adapt: np.ndarray

    @property
    def stop(self) -> int:
        return self.start + len(self.adapt) - 1

    @property
    def q(self) -> int:
        return sum(1 for s in self.signs if s < 0)

    def form_at(self, i: int) -> QuadForm:
        return QuadForm(self.signs, self.adapt[i - self.start])

    @classmethod
    def constant(cls, J: QuadForm, start: int, stop: int) -> "JField":
        P = np.asarray(J.adapt_basis, dtype=float)
        return cls(tuple(J.signs), start, np.broadcast_to(P, (stop - start + 1,) + P.shape).copy())

    @classmethod
    def from_splitting(cls, E: Subbundle, F: Subbundle, weights=None) -> "JField":
        """``J = -1`` on E and ``+1`` on F in the frame ``[E | w F]``.

        ``weights`` (default 1) rescale the F frame sample by sample; the
        field is then defined on the first ``len(weights)`` samples.
        """
        check_complementary(E, F)
        Ef, Ff = E.frames, F.frames
        if weights is not None:
            w = np.asarray(weights, dtype=float)
            Ef, Ff = Ef[:len(w)], Ff[:len(w)] * w[:, None, None]
        B = np.concatenate([Ef, Ff], axis=2)
        signs = (-1,) * E.dim + (1,) * F.dim
        return cls(signs, E.start, np.linalg.inv(B))


def area_weights(orbit: OrbitSegment, F: Subbundle, horizon: float) -> np.ndarray:
    """Frame weights of a metric on ``F`` adapted to area growth.

    With ``S_i`` the accumulated log-volume growth of ``F`` and ``N`` samples
    per ``horizon``, the weight ``exp(phi_i / dim F)`` with
    ``phi_i = S_i - mean(S_i, ..., S_{i+N-1})`` turns the volume growth of
    every window into its average over start points spread across the next
    ``horizon`` time units. The weights are bounded, so the metric is
    equivalent to the ambient one; they cover samples
    ``F.start .. F.stop - N``.
    """
    N = int(round(horizon / orbit.dt))
    if N < 1:
        return np.ones(len(F.frames))
    A, logs, _ = restricted_factors(orbit, F, tol=np.inf)
    ld = np.log(np.abs(np.linalg.det(A))) + F.dim * logs
    S = np.r_[0.0, np.cumsum(ld)]
    M = len(S) - N
    if M < 1:
        raise DomainError("orbit shorter than the adaptation horizon")
    cs = np.r_[0.0, np.cumsum(S)]
    phi = S[:M] - (cs[N:N + M] - cs[:M]) / N
    return np.exp(phi / F.dim)


def tau_maps(orbit: OrbitSegment, jf: JField, tau: float, with_inverse: bool = False):
    """Time-``tau`` maps in adapted coordinates, as ``(starts, maps, logs)``.

    ``maps[k] * exp(logs[k])`` is ``P_{i+s} Phi P_i^{-1}`` for ``i = starts[k]``.
    With ``with_inverse`` the inverse maps and their log-scales are appended,
    computed as products of inverse factors rather than by inverting the
    (possibly very ill-conditioned) forward maps.
    """
    step = int(round(tau / orbit.dt))
    if step < 1 or abs(step * orbit.dt - tau) > 1e-9 * max(tau, 1.0):
        raise DomainError(f"tau={tau} is not a positive multiple of dt={orbit.dt}")
    starts = np.arange(jf.start, jf.stop - step + 1, step)
    if len(starts) == 0:
        raise DomainError("orbit too short for a single time-tau map")
    rel = (starts - jf.start).astype(np.int64)
    P = jf.adapt[rel]
    Pn = jf.adapt[rel + step]
    fac = np.ascontiguousarray(orbit.factors[jf.start:jf.stop])
    lg = np.ascontiguousarray(orbit.renorm_log[jf.start:jf.stop])
    M, s = _kernels.window_products(fac, lg, rel, step, True)
    maps, logs = _normalise(Pn @ M @ np.linalg.inv(P), s)
    if not with_inverse:
        return starts, maps, logs
    Mi, si = _kernels.window_products(np.linalg.inv(fac), -lg, rel, step, False)
    inv_maps, inv_logs = _normalise(P @ Mi @ np.linalg.inv(Pn), si)
    return starts, maps, logs, inv_maps, inv_logs


def _normalise(L, s):
    nrm = np.linalg.norm(L, axis=(1, 2))
    return L / nrm[:, None, None], s + np.log(nrm)
