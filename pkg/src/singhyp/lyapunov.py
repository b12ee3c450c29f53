"""Lyapunov spectra, p-sectional exponents, domination functionals and
Wojtkowski-type averages of singular J-values along an orbit.

Growth rates are read off the Gram-Schmidt stretch factors of a QR sweep.
The first quarter of the horizon is discarded as burn-in: with
``S(t)`` the accumulated log-stretch, the estimate is
``(S(T) - S(T/4)) / (3T/4)``, which removes the constant offset left by the
initial frame and converges like ``exp(-gap * T/4)`` on linear fields
instead of ``1/T``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .bundles import JField, Subbundle, check_complementary, restricted_factors, tau_maps
from .errors import DomainError, PreconditionFailed
from .exterior import exterior_power_batch
from .flow import ATOL, RENORM_MAX, RTOL, ESCAPE_RADIUS, OrbitSegment, VectorFieldSpec, \
    _raise_status, trace_integral
from .pseudo_euclidean import QuadForm, polar_decompose, separation_test, singular_j_values

BURN_IN = 0.25
LOW_CONFIDENCE = 0.05
MIN_HORIZON = 10.0
CLUSTER_TOL = 1e-6
# Oseledets directions are accurate to ~exp(-gap * T / 2), far coarser than roundoff
SUBSPACE_CONE_TOL = 1e-6
SUBADDITIVITY_TOL = 1e-6


def random_frame(n: int, k: int, seed: int = 0) -> np.ndarray:
    """Orthonormal ``n x k`` frame from a seeded Gaussian matrix."""
    rng = np.random.default_rng(seed)
    return np.linalg.qr(rng.standard_normal((n, k)))[0]


def _growth(factors, logs, q0, store_frames=False):
    frames, logdiag = _kernels.qr_sweep(np.ascontiguousarray(factors), q0, store_frames)
    return frames, logdiag + logs[:, None]


def _rates(logdiag, times, burn_in=BURN_IN):
    """Burn-in growth rates, their running estimates and last-quartile drift.

    ``logdiag`` has one row per window ending at ``times[1:]``. Rates are
    sorted in descending order, row by row for the running series.
    """
    m = len(logdiag)
    b = int(burn_in * m)
    cum = np.cumsum(logdiag, axis=0)
    base = cum[b - 1] if b > 0 else np.zeros(logdiag.shape[1])
    t = times[b + 1:] - times[b]
    running = -np.sort(-(cum[b:] - base) / t[:, None], axis=1)
    final = running[-1]
    q = max(0, (3 * m) // 4 - b)
    drift = float(np.max(np.abs(running[q:] - final))) if len(running) else 0.0
    return final, times[b + 1:], running, drift


@dataclass(frozen=True)
class SpectrumReport:
    """Lyapunov exponents of an orbit with convergence diagnostics.

    Attributes
    ----------
    exponents : ndarray
        ``chi_1 >= ... >= chi_n`` per unit time.
    times, running : ndarray
        Running estimates (one row per sample after burn-in).
    p_sectional : dict
        ``p -> ascending exponents`` of the p-th exterior power restricted to
        a chosen subbundle.
    horizon : float
    error_estimate : float
        Largest deviation of the running estimates from the final values
        over the last quarter of the horizon.
    trace_average : float
        Time average of ``tr DX`` over the same window as the exponents.
    """
    exponents: np.ndarray
    times: np.ndarray
    running: np.ndarray
    horizon: float
    error_estimate: float
    trace_average: float
    p_sectional: dict = dc_field(default_factory=dict)

    @property
    def low_confidence(self) -> bool:
        return self.error_estimate > LOW_CONFIDENCE

    def to_dict(self) -> dict:
        return {"exponents": [float(v) for v in self.exponents],
                "sum": float(np.sum(self.exponents)),
                "trace_average": float(self.trace_average),
                "horizon": self.horizon,
                "error_estimate": self.error_estimate,
                "low_confidence": self.low_confidence,
                "p_sectional": {str(p): [float(v) for v in e]
                                for p, e in sorted(self.p_sectional.items())}}

    def write_json(self, path, extra: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump({"schema": 1, **(extra or {}), **self.to_dict()}, fh,
                      indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path, max_rows: int = 2000) -> None:
        """Running estimates as ``t, chi_1, ..., chi_n`` (thinned to ``max_rows``)."""
        stride = max(1, len(self.times) // max_rows)
        idx = np.r_[np.arange(0, len(self.times) - 1, stride), len(self.times) - 1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"chi_{i + 1}" for i in range(self.running.shape[1])])
            for i in idx:
                w.writerow([repr(float(self.times[i]))] + [repr(float(v)) for v in self.running[i]])


def lyapunov_exponents(orbit: OrbitSegment, F: Subbundle | None = None, p_values=(),
                       seed: int = 0, burn_in: float = BURN_IN) -> SpectrumReport:
    """Benettin estimate of the Lyapunov spectrum along ``orbit``.

    If a subbundle ``F`` is given, the p-sectional exponents along it are
    added for each ``p`` in ``p_values``.
    """
    if orbit.horizon < MIN_HORIZON:
        raise DomainError(f"horizon {orbit.horizon} is below the minimum {MIN_HORIZON}")
    n = orbit.n
    _, logdiag = _growth(orbit.factors, orbit.renorm_log, random_frame(n, n, seed))
    exps, times, running, drift = _rates(logdiag, orbit.times, burn_in)
    b = int(burn_in * orbit.m)
    tr = trace_integral(orbit)
    trace_avg = (tr[-1] - tr[b]) / (orbit.times[-1] - orbit.times[b])
    psec = {}
    for p in p_values:
        if F is None:
            raise DomainError("p-sectional exponents need a subbundle")
        psec[int(p)] = p_sectional_exponents(orbit, F, int(p), seed=seed, burn_in=burn_in)
    return SpectrumReport(exps, times, running, orbit.horizon, drift, float(trace_avg), psec)


def p_sectional_exponents(orbit: OrbitSegment, F: Subbundle, p: int, seed: int = 0,
                          burn_in: float = BURN_IN) -> np.ndarray:
    """Growth rates of the p-th exterior power of the cocycle on ``F``, ascending."""
    if not 2 <= p <= F.dim:
        raise DomainError(f"p={p} outside 2..{F.dim}")
    A, logs, _ = restricted_factors(orbit, F)
    Ap = exterior_power_batch(A, p)
    N = Ap.shape[1]
    _, logdiag = _growth(Ap, p * logs, random_frame(N, N, seed))
    times = orbit.times[F.start:F.stop + 1]
    return np.sort(_rates(logdiag, times, burn_in)[0])


@dataclass(frozen=True)
class DominationResult:
    """``f_t = log ||Phi_t|E|| - log m(Phi_t|F)`` and its fitted slope."""
    slope: float
    times: np.ndarray
    values: np.ndarray
    drift: float
    subadditive: bool
    subadditivity_margin: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "drift": self.drift, "subadditive": self.subadditive,
                "subadditivity_margin": self.subadditivity_margin,
                "horizon": float(self.times[-1])}


def _log_norm_series(A, logs, inverse=False):
    if inverse:
        return _kernels.running_log_norms(np.linalg.inv(A), -logs, False)
    return _kernels.running_log_norms(np.ascontiguousarray(A), logs, True)


def domination_functional(orbit: OrbitSegment, E: Subbundle, F: Subbundle,
                          checks: int = 3) -> DominationResult:
    """Slope of ``f_t`` by least squares over the second half of the horizon.

    The co-norm ``m`` is the smallest singular value, computed as the inverse
    norm of the inverse restricted map so that products never underflow.
    Subadditivity ``f_{t+s} <= f_s + f_t o X_s`` is spot-checked at
    ``checks`` split points.
    """
    check_complementary(E, F)
    AE, lE, _ = restricted_factors(orbit, E)
    AF, lF, _ = restricted_factors(orbit, F)
    f = _log_norm_series(AE, lE) + _log_norm_series(AF, lF, inverse=True)
    t = orbit.times[E.start + 1:E.stop + 1] - orbit.times[E.start]
    half = t >= t[-1] / 2
    slope = float(np.polyfit(t[half], f[half], 1)[0])
    last = t >= 0.75 * t[-1]
    drift = float(np.max(np.abs(f[last] / t[last] - slope)))
    M = len(f)
    margin = np.inf
    for j in range(1, checks + 1):
        s = max(1, (j * M) // (2 * (checks + 1)))
        u = M - s
        g = (_log_norm_series(AE[s:], lE[s:])[u - 1]
             + _log_norm_series(AF[s:], lF[s:], inverse=True)[u - 1])
        margin = min(margin, f[s - 1] + g - f[M - 1])
    return DominationResult(slope, t, f, drift, bool(margin >= -SUBADDITIVITY_TOL), float(margin))


@dataclass(frozen=True)
class OseledetsSplitting:
    """Oseledets subspaces at one orbit sample, one per cluster of exponents.

    ``subspaces[j]`` (orthonormal columns) carries the exponent ``values[j]``
    with multiplicity equal to its number of columns; values descend.
    """
    index: int
    values: np.ndarray
    subspaces: tuple


def oseledets_directions(orbit: OrbitSegment, index: int | None = None, seed: int = 0,
                         cluster_tol: float | None = None) -> OseledetsSplitting:
    """Oseledets subspaces at ``index`` (default: the midpoint of the orbit).

    A forward QR sweep over ``[0, index]`` gives the flag of most expanding
    subspaces; a sweep of inverse factors over ``[index, m]`` backwards gives
    the flag of most contracting ones. Each Oseledets subspace is the
    intersection of matching members of the two flags.
    """
    m, n = orbit.m, orbit.n
    c = m // 2 if index is None else int(index)
    if not 1 <= c <= m - 1:
        raise DomainError(f"index {c} outside 1..{m - 1}")
    rep = lyapunov_exponents(orbit, seed=seed) if orbit.horizon >= MIN_HORIZON else None
    fr, ld = _growth(orbit.factors[:c], orbit.renorm_log[:c], random_frame(n, n, seed))
    Qf = fr[0]
    inv = np.linalg.inv(orbit.factors[c:][::-1])
    br, _ = _growth(inv, -orbit.renorm_log[c:][::-1], random_frame(n, n, seed + 1))
    Qb = br[0]
    if rep is not None:
        exps, tol = rep.exponents, rep.error_estimate
    else:
        exps, tol = np.sort(ld.sum(axis=0))[::-1] / orbit.times[c], 0.0
    tol = max(CLUSTER_TOL, 2 * tol) if cluster_tol is None else cluster_tol
    clusters, a = [], 0
    for k in range(1, n + 1):
        if k == n or exps[k - 1] - exps[k] > tol:
            clusters.append((a, k - 1))
            a = k
    values, spaces = [], []
    for a, b in clusters:
        Af, Ab = Qf[:, :b + 1], Qb[:, :n - a]
        _, _, vt = np.linalg.svd(np.hstack([Af, -Ab]))
        coeff = vt[-(b - a + 1):, :b + 1].T
        spaces.append(np.linalg.qr(Af @ coeff)[0])
        values.append(float(np.mean(exps[a:b + 1])))
    return OseledetsSplitting(c, np.array(values), tuple(spaces))


@dataclass(frozen=True)
class WojtkowskiReport:
    """Averages of log singular J-values of time-``tau`` maps against exponents.

    ``bound_minus = tau * sum(chi^-_1..k1)`` must not exceed
    ``average_minus + slack``; ``bound_plus = tau * sum(chi^+_1..k2)`` must be
    at least ``average_plus - slack``.
    """
    tau: float
    k1: int
    k2: int
    average_minus: float
    average_plus: float
    chi_minus: tuple
    chi_plus: tuple
    bound_minus: float
    bound_plus: float
    slack: float
    samples: int
    verdict: str
    note: str = ""

    @property
    def minus_margin(self) -> float:
        return self.average_minus + self.slack - self.bound_minus

    @property
    def plus_margin(self) -> float:
        return self.bound_plus - self.average_plus + self.slack

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("tau", "k1", "k2", "average_minus", "average_plus",
                                           "bound_minus", "bound_plus", "slack", "samples",
                                           "verdict", "note")}
        d.update(chi_minus=list(self.chi_minus), chi_plus=list(self.chi_plus),
                 minus_margin=self.minus_margin, plus_margin=self.plus_margin)
        return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}


def singular_j_value_logs(orbit: OrbitSegment, jf: JField, tau: float, strict: bool = False):
    """Log singular J-values of every time-``tau`` map, ascending within each sign.

    Returns ``(starts, log_r_minus, log_r_plus, verdicts)``; raises
    :class:`PreconditionFailed` if a map is not J-separated.
    """
    starts, maps, logs, imaps, ilogs = tau_maps(orbit, jf, tau, with_inverse=True)
    Js = QuadForm.standard(jf.signs)
    lm = np.empty((len(starts), jf.q))
    lp = np.empty((len(starts), len(jf.signs) - jf.q))
    verdicts = []
    for k, L in enumerate(maps):
        sep = separation_test(Js, L, strict=strict, check_invertible=False)
        verdicts.append(sep.verdict)
        if not sep.separated:
            raise PreconditionFailed(
                f"time-{tau} map at sample {starts[k]} is not J-separated ({sep.verdict.value})")
        if sep.strict:
            r_minus, r_plus = singular_j_values(Js, L, imaps[k] * np.exp(ilogs[k] + logs[k]))
        else:
            pp = polar_decompose(Js, L)
            r_minus, r_plus = pp.r_minus, pp.r_plus
        lm[k] = np.log(r_minus) + logs[k]
        lp[k] = np.log(r_plus) + logs[k]
    return starts, lm, lp, verdicts


def cone_typed_exponents(splitting: OseledetsSplitting, J: QuadForm):
    """Split exponents by the signature of ``J`` on each Oseledets subspace.

    Returns ``(chi_minus descending, chi_plus ascending)`` or ``None`` when a
    subspace meets the zero cone (degenerate restricted form) or the
    negative count differs from the index of ``J``.
    """
    G = J.gram
    minus, plus = [], []
    for v, V in zip(splitting.values, splitting.subspaces):
        ev = np.linalg.eigvalsh(V.T @ G @ V)
        if np.min(np.abs(ev)) <= SUBSPACE_CONE_TOL * max(1.0, np.max(np.abs(ev))):
            return None
        minus += [v] * int(np.sum(ev < 0))
        plus += [v] * int(np.sum(ev > 0))
    if len(minus) != J.q:
        return None
    return np.sort(minus)[::-1], np.sort(plus)


def wojtkowski_checks(orbit: OrbitSegment, J, tau: float, pairs,
                      slack_rate: float = 0.05, seed: int = 0) -> list[WojtkowskiReport]:
    """Compare Birkhoff averages of log singular J-values with cone-typed exponents.

    ``J`` is a constant :class:`QuadForm` or a :class:`JField`; ``pairs``
    lists ``(k1, k2)``. The singular J-values of the time-``tau`` maps are
    computed once for all pairs. Exponent cone types come from the Oseledets
    subspaces at the midpoint of the range where ``J`` is defined.
    """
    jf = J if isinstance(J, JField) else JField.constant(J, 0, orbit.m)
    q = jf.q
    p = len(jf.signs) - q
    for k1, k2 in pairs:
        if not (1 <= k1 <= q and 1 <= k2 <= p):
            raise DomainError(f"need 1 <= k1 <= {q} and 1 <= k2 <= {p}")
    _, lm, lp, _ = singular_j_value_logs(orbit, jf, tau)
    slack = slack_rate * tau
    mid = (jf.start + jf.stop) // 2
    typed = cone_typed_exponents(oseledets_directions(orbit, mid, seed=seed), jf.form_at(mid))
    out = []
    for k1, k2 in pairs:
        avg_minus = float(np.mean(lm[:, ::-1][:, :k1].sum(axis=1)))
        avg_plus = float(np.mean(lp[:, :k2].sum(axis=1)))
        if typed is None:
            out.append(WojtkowskiReport(tau, k1, k2, avg_minus, avg_plus, (), (), np.nan, np.nan,
                                        slack, len(lm), "Indeterminate",
                                        "an Oseledets direction lies on the zero cone"))
            continue
        chi_m, chi_p = typed
        bm = float(tau * np.sum(chi_m[:k1]))
        bp = float(tau * np.sum(chi_p[:k2]))
        ok = bm <= avg_minus + slack and bp >= avg_plus - slack
        out.append(WojtkowskiReport(tau, k1, k2, avg_minus, avg_plus, tuple(map(float, chi_m)),
                                    tuple(map(float, chi_p)), bm, bp, slack, len(lm),
                                    "Pass" if ok else "Fail"))
    return out


def wojtkowski_check(orbit: OrbitSegment, J, tau: float, k1: int, k2: int,
                     slack_rate: float = 0.05, seed: int = 0) -> WojtkowskiReport:
    """Single-pair form of :func:`wojtkowski_checks`."""
    return wojtkowski_checks(orbit, J, tau, [(k1, k2)], slack_rate, seed)[0]


def finite_difference_top_exponent(field: VectorFieldSpec, x0, T: float, interval: float = 0.1,
                                   delta: float = 1e-8, seed: int = 0,
                                   burn_in: float = BURN_IN) -> float:
    """Top exponent from the separation of two nearby trajectories.

    Both copies are integrated as one system on ``R^(2n)`` so they share a
    step sequence; the separation is rescaled to ``delta`` every
    ``interval``. Uses the same burn-in convention as
    :func:`lyapunov_exponents`.
    """
    n = field.n
    m = int(round(T / interval))
    if m < 4 or abs(m * interval - T) > 1e-9 * T:
        raise DomainError("T must be a multiple of interval with at least 4 windows")
    coef, out, exps = field.doubled().table
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(n)
    x = np.asarray(x0, dtype=float)
    y = np.r_[x, x + delta * u / np.linalg.norm(u)]
    growth = np.empty(m)
    h = 0.0
    for k in range(m):
        ys, _, _, status, _, h = _kernels.integrate_windows(
            coef, out, exps, y, interval, 1, RTOL, ATOL, h, False, RENORM_MAX, ESCAPE_RADIUS)
        _raise_status(status, k * interval)
        y = ys[-1]
        d = y[n:] - y[:n]
        g = np.linalg.norm(d)
        growth[k] = np.log(g / delta)
        y = np.r_[y[:n], y[:n] + d * (delta / g)]
    b = int(burn_in * m)
    return float(growth[b:].sum() / ((m - b) * interval))
