"""Invariant splittings and finite-sample hyperbolicity certificates.

Certificates are conservative: a property passes only if every sampled
margin clears its threshold; one violation is enough to fail, and the
violating sample is recorded. Uniform times are searched on a fixed grid
and must clear the threshold by a relative margin of 10%.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.linalg

from . import _kernels
from .bundles import (INVARIANCE_TOL, JField, Subbundle, area_weights, check_complementary,
                      restricted_factors, tau_maps)
from .errors import DomainError, FieldNotNonNegative, NoGap, NotIndefinite, NotSeparatedSpectrum
from .exterior import exterior_power_batch
from .flow import OrbitSegment, SingularityReport, VectorFieldSpec, cocycle
from .lyapunov import _growth, _rates, random_frame
from .pseudo_euclidean import (QuadForm, Separation, lagrange_diagonalize, monotonicity_test,
                               separation_test, singular_j_values)

GRID = (1.0, 2.0, 5.0, 10.0, 20.0)
MARGIN = 0.1
DOMINATION_BOUND = 0.5
CONTRACTION_BOUND = 0.5
EXPANSION_BOUND = 2.0
GAP_TOL = 1e-3
FLOW_ANGLE_TOL = 1e-2
REGULAR_TOL = 1e-10
POINCARE_REGULAR_TOL = 1e-8
HYPERBOLIC_TOL = 1e-8
MARGIN_TOL = 1e-9
MAX_SAMPLES = 2000
MIN_HORIZON = 20.0


class Verdict(enum.Enum):
    PASS = "Pass"
    FAIL = "Fail"
    INDETERMINATE = "Indeterminate"


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if np.isfinite(v) else str(v)
    return v


@dataclass(frozen=True)
class Certificate:
    """Outcome of one property check.

    ``witnesses["margin"]``, when present, is the relative margin by which
    the property holds (negative when violated); ensembles aggregate by the
    minimum.
    """
    property: str
    verdict: Verdict
    witnesses: dict
    tolerances: dict = dc_field(default_factory=dict)
    ensemble: dict = dc_field(default_factory=dict)
    stage: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict is Verdict.PASS

    def to_dict(self) -> dict:
        return _plain({"property": self.property, "verdict": self.verdict,
                       "witnesses": self.witnesses, "tolerances": self.tolerances,
                       "ensemble": self.ensemble, "stage": self.stage})


def combine_verdicts(verdicts) -> Verdict:
    verdicts = list(verdicts)
    if any(v is Verdict.FAIL for v in verdicts):
        return Verdict.FAIL
    if any(v is Verdict.INDETERMINATE for v in verdicts):
        return Verdict.INDETERMINATE
    return Verdict.PASS


def aggregate(certs, ensemble: dict | None = None) -> Certificate:
    """Ensemble certificate: Fail beats Indeterminate beats Pass; margins take the minimum.

    When every member reports a uniform time ``T``, the ensemble reports the
    largest of them.
    """
    certs = list(certs)
    if not certs:
        raise DomainError("nothing to aggregate")
    props = {c.property for c in certs}
    if len(props) != 1:
        raise DomainError(f"cannot aggregate different properties {sorted(props)}")
    margins = [c.witnesses["margin"] for c in certs
               if isinstance(c.witnesses.get("margin"), (int, float))]
    wit = {"members": len(certs), "verdicts": [c.verdict.value for c in certs],
           "margin": min(margins) if margins else None}
    Ts = [c.witnesses.get("T") for c in certs]
    if all(isinstance(T, (int, float)) for T in Ts):
        # one uniform time valid for every member
        wit["T"] = max(Ts)
    bad = [i for i, c in enumerate(certs) if not c.passed]
    if bad:
        wit["first_failing_member"] = bad[0]
        wit["first_failing_witnesses"] = certs[bad[0]].witnesses
    return Certificate(certs[0].property, combine_verdicts(c.verdict for c in certs), wit,
                       certs[0].tolerances, ensemble or {})


@dataclass(frozen=True)
class SplittingField:
    """Orthonormal frames of ``E`` and ``F`` over a common range of samples."""
    E: Subbundle
    F: Subbundle
    window: float = 0.0
    method: str = "constant"
    exponents: np.ndarray | None = None
    residual_E: float = 0.0
    residual_F: float = 0.0

    @property
    def d_E(self) -> int:
        return self.E.dim

    @property
    def start(self) -> int:
        return self.E.start

    @property
    def stop(self) -> int:
        return self.E.stop

    @classmethod
    def constant(cls, orbit: OrbitSegment, E_basis, F_basis, start: int = 0,
                 stop: int | None = None) -> "SplittingField":
        E = Subbundle.constant(orbit, E_basis, start, stop)
        F = Subbundle.constant(orbit, F_basis, start, stop)
        check_complementary(E, F)
        rE = restricted_factors(orbit, E, tol=np.inf)[2]
        rF = restricted_factors(orbit, F, tol=np.inf)[2]
        return cls(E, F, 0.0, "constant", None, float(rE.max(initial=0.0)),
                   float(rF.max(initial=0.0)))

    @property
    def residual(self) -> float:
        return max(self.residual_E, self.residual_F)

    def to_dict(self) -> dict:
        return _plain({"d_E": self.d_E, "d_F": self.F.dim, "start": self.start, "stop": self.stop,
                       "window": self.window, "method": self.method,
                       "exponents": self.exponents, "residual_E": self.residual_E,
                       "residual_F": self.residual_F})


def estimate_splitting(orbit: OrbitSegment, d_E: int, window: float = 10.0,
                       seed: int = 0) -> SplittingField:
    """Finite-time Oseledets splitting at cut ``d_E``.

    ``F`` is spanned by the leading ``n - d_E`` vectors of a forward QR sweep
    (the directions that dominate in forward time), ``E`` by the leading
    ``d_E`` vectors of a backward sweep through the inverse factors. Samples
    within ``window`` of either end are dropped so both sweeps have
    converged.
    """
    n = orbit.n
    if not 1 <= d_E <= n - 1:
        raise DomainError(f"d_E={d_E} outside 1..{n - 1}")
    if orbit.horizon < MIN_HORIZON:
        raise DomainError(f"horizon {orbit.horizon} is below {MIN_HORIZON}")
    W = min(window, orbit.horizon / 4)
    w = max(1, int(round(W / orbit.dt)))
    m = orbit.m
    fwd, ld = _growth(orbit.factors, orbit.renorm_log, random_frame(n, n, seed), True)
    exps = _rates(ld, orbit.times)[0]
    gap = exps[n - d_E - 1] - exps[n - d_E]
    if gap < GAP_TOL:
        raise NoGap(f"exponent gap {gap:.3g} at cut d_E={d_E} is below {GAP_TOL:g}")
    inv = np.linalg.inv(orbit.factors[::-1])
    bwd, _ = _growth(inv, -orbit.renorm_log[::-1], random_frame(n, n, seed + 1), True)
    F = Subbundle(w, np.ascontiguousarray(fwd[w:m - w + 1, :, :n - d_E]))
    E = Subbundle(w, np.ascontiguousarray(bwd[w:m - w + 1][::-1, :, :d_E]))
    rE = restricted_factors(orbit, E, tol=np.inf)[2]
    rF = restricted_factors(orbit, F, tol=np.inf)[2]
    return SplittingField(E, F, float(W), "qr-forward/inverse-backward", exps,
                          float(rE.max(initial=0.0)), float(rF.max(initial=0.0)))


def _starts(start, stop, length, max_samples):
    last = stop - length
    if last < start:
        return np.zeros(0, dtype=np.int64)
    stride = max(1, (last - start + 1) // max_samples)
    return np.arange(start, last + 1, stride, dtype=np.int64)


def _grid_lengths(orbit, splitting, grid):
    span = splitting.stop - splitting.start
    out = []
    for T in grid:
        L = int(round(T / orbit.dt))
        if L >= 1 and abs(L * orbit.dt - T) <= 1e-9 * T and L <= span:
            out.append((float(T), L))
    return out


def _window(A, logs, starts, L, inverse=False):
    if inverse:
        return -_kernels.window_log_norms(np.linalg.inv(A), -logs, starts, L, False)
    return _kernels.window_log_norms(np.ascontiguousarray(A), logs, starts, L, True)


def _fit(Ts, logs):
    if len(Ts) < 2:
        return None, None
    slope, icpt = np.polyfit(Ts, logs, 1)
    return float(np.exp(icpt)), float(-slope)


def _invariance_gate(prop, splitting):
    if splitting.residual > INVARIANCE_TOL:
        return Certificate(prop, Verdict.INDETERMINATE,
                           {"reason": "splitting is not invariant",
                            "residual": splitting.residual},
                           {"invariance": INVARIANCE_TOL}, stage="invariance")
    return None


def _bundle_rates(A, logs, times):
    d = A.shape[1]
    _, ld = _growth(A, logs, random_frame(d, d, 0))
    return _rates(ld, times)[0]


def check_dominated(splitting: SplittingField, orbit: OrbitSegment, grid=GRID,
                    margin: float = MARGIN, max_samples: int = MAX_SAMPLES) -> Certificate:
    """Uniform-time domination ``||Phi_T|E|| * ||(Phi_T|F)^-1|| < 1/2``.

    Passes at the first grid time ``T`` where the supremum over samples is at
    most ``(1 - margin) / 2``. Also fits ``K exp(-lambda T)`` to the sampled
    suprema and reports the growth rates of each bundle.
    """
    prop = "Dominated"
    tols = {"bound": DOMINATION_BOUND, "margin": margin, "grid": list(grid),
            "invariance": INVARIANCE_TOL}
    gate = _invariance_gate(prop, splitting)
    if gate:
        return gate
    AE, lE, _ = restricted_factors(orbit, splitting.E, tol=np.inf)
    AF, lF, _ = restricted_factors(orbit, splitting.F, tol=np.inf)
    times = orbit.times[splitting.start:splitting.stop + 1]
    rates = {"E_max": float(_bundle_rates(AE, lE, times)[0]),
             "F_min": float(_bundle_rates(AF, lF, times)[-1])}
    per_T, Ts, sups = [], [], []
    passed_T = None
    best = -np.inf
    for T, L in _grid_lengths(orbit, splitting, grid):
        st = _starts(0, len(AE), L, max_samples)
        ratio = _window(AE, lE, st, L) - _window(AF, lF, st, L, inverse=True)
        k = int(np.argmax(ratio))
        sup = float(ratio[k])
        mg = 1.0 - np.exp(sup) / DOMINATION_BOUND
        best = max(best, mg)
        per_T.append({"T": T, "log_sup": sup, "margin": mg, "samples": len(st),
                      "worst_sample": int(st[k]) + splitting.start})
        Ts.append(T)
        sups.append(sup)
        if passed_T is None and mg >= margin:
            passed_T = T
    if not per_T:
        return Certificate(prop, Verdict.INDETERMINATE, {"reason": "horizon shorter than grid"},
                           tols)
    K, lam = _fit(Ts, sups)
    wit = {"T": passed_T, "margin": best, "per_T": per_T, "K": K, "lambda": lam,
           "rates": rates}
    if passed_T is None:
        worst = min(per_T, key=lambda r: r["margin"])
        wit["violation"] = {"T": worst["T"], "sample": worst["worst_sample"]}
    return Certificate(prop, Verdict.PASS if passed_T is not None else Verdict.FAIL, wit, tols)


def _gated(prop, upstream: Certificate, stage: str):
    if upstream.passed:
        return None
    return Certificate(prop, upstream.verdict,
                       {"reason": f"{stage} not established", stage: upstream.witnesses},
                       upstream.tolerances, stage=stage)


def check_partial_hyperbolic(splitting: SplittingField, orbit: OrbitSegment,
                             dominated: Certificate | None = None, grid=GRID,
                             margin: float = MARGIN,
                             max_samples: int = MAX_SAMPLES) -> Certificate:
    """Uniform contraction of ``E``: ``||Phi_T|E|| < 1/2`` on top of domination."""
    prop = "PartiallyHyperbolic"
    dominated = dominated or check_dominated(splitting, orbit, grid, margin, max_samples)
    gate = _gated(prop, dominated, "dominated")
    if gate:
        return gate
    AE, lE, _ = restricted_factors(orbit, splitting.E, tol=np.inf)
    per_T, Ts, sups = [], [], []
    passed_T, best = None, -np.inf
    for T, L in _grid_lengths(orbit, splitting, grid):
        st = _starts(0, len(AE), L, max_samples)
        v = _window(AE, lE, st, L)
        k = int(np.argmax(v))
        mg = 1.0 - np.exp(v[k]) / CONTRACTION_BOUND
        best = max(best, mg)
        per_T.append({"T": T, "log_sup": float(v[k]), "margin": mg, "samples": len(st),
                      "worst_sample": int(st[k]) + splitting.start})
        Ts.append(T)
        sups.append(float(v[k]))
        if passed_T is None and mg >= margin:
            passed_T = T
    _, rate = _fit(Ts, sups)
    wit = {"T": passed_T, "margin": best, "per_T": per_T, "contraction_rate": rate}
    return Certificate(prop, Verdict.PASS if passed_T is not None else Verdict.FAIL, wit,
                       {"bound": CONTRACTION_BOUND, "margin": margin, "grid": list(grid)})


def check_p_singular_hyperbolic(splitting: SplittingField, orbit: OrbitSegment, p: int,
                                singularities=(), partial: Certificate | None = None,
                                grid=GRID, margin: float = MARGIN,
                                max_samples: int = MAX_SAMPLES) -> Certificate:
    """Uniform p-sectional expansion of ``F`` on top of partial hyperbolicity.

    The infimum over unit p-vectors of ``F`` is the smallest singular value of
    the p-th exterior power of ``Phi_T|F``, a lower bound for decomposable
    p-vectors. Every singularity in ``singularities`` must be hyperbolic.
    """
    prop = f"PSingularHyperbolic({p})"
    if not 2 <= p <= splitting.F.dim:
        raise DomainError(f"p={p} outside 2..{splitting.F.dim}")
    partial = partial or check_partial_hyperbolic(splitting, orbit, None, grid, margin,
                                                  max_samples)
    gate = _gated(prop, partial, "partially_hyperbolic")
    if gate:
        return gate
    tols = {"bound": EXPANSION_BOUND, "margin": margin, "grid": list(grid),
            "hyperbolicity": HYPERBOLIC_TOL}
    AF, lF, _ = restricted_factors(orbit, splitting.F, tol=np.inf)
    Ap = exterior_power_batch(AF, p)
    per_T, Ts, infs = [], [], []
    passed_T, best = None, -np.inf
    for T, L in _grid_lengths(orbit, splitting, grid):
        st = _starts(0, len(Ap), L, max_samples)
        v = _window(Ap, p * lF, st, L, inverse=True)
        k = int(np.argmin(v))
        mg = np.exp(v[k]) / EXPANSION_BOUND - 1.0
        best = max(best, mg)
        per_T.append({"T": T, "log_inf": float(v[k]), "margin": mg, "samples": len(st),
                      "worst_sample": int(st[k]) + splitting.start})
        Ts.append(T)
        infs.append(float(v[k]))
        if passed_T is None and mg >= margin:
            passed_T = T
    _, rate = _fit(Ts, infs)
    wit = {"T": passed_T, "margin": best, "per_T": per_T,
           "expansion_rate": -rate if rate is not None else None}
    bad = [s for s in singularities if not s.hyperbolic]
    wit["singularities"] = [s.to_dict() for s in singularities]
    if bad:
        wit["non_hyperbolic_singularity"] = bad[0].location
        return Certificate(prop, Verdict.FAIL, wit, tols)
    return Certificate(prop, Verdict.PASS if passed_T is not None else Verdict.FAIL, wit, tols)


def flow_in_F_check(splitting: SplittingField, orbit: OrbitSegment,
                    partial: Certificate | None = None,
                    max_samples: int = MAX_SAMPLES) -> Certificate:
    """The field direction lies in ``F`` (angle at most 1e-2) at every regular sample."""
    prop = "FlowInCentralBundle"
    tols = {"angle": FLOW_ANGLE_TOL, "regular": REGULAR_TOL}
    if partial is not None:
        gate = _gated(prop, partial, "partially_hyperbolic")
        if gate:
            return gate
    st = _starts(splitting.start, splitting.stop, 0, max_samples)
    worst, worst_i, skipped = 0.0, None, 0
    for i in st:
        X = orbit.field(orbit.states[i])
        nx = np.linalg.norm(X)
        if nx < REGULAR_TOL:
            skipped += 1
            continue
        Fr = splitting.F.at(int(i))
        s = np.linalg.norm(X - Fr @ (Fr.T @ X)) / nx
        ang = float(np.arcsin(min(1.0, s)))
        if ang > worst:
            worst, worst_i = ang, int(i)
    wit = {"max_angle": worst, "worst_sample": worst_i, "samples": len(st), "skipped": skipped,
           "margin": 1.0 - worst / FLOW_ANGLE_TOL}
    if skipped == len(st):
        wit["note"] = "vacuous: every sample is a singularity"
    return Certificate(prop, Verdict.PASS if worst <= FLOW_ANGLE_TOL else Verdict.FAIL, wit, tols)


def singularity_compatibility(field: VectorFieldSpec, splitting, singularities,
                              index_bound: int | None = None) -> Certificate:
    """Hyperbolicity, index bound and eigenvalue domination at each singularity.

    ``splitting`` is a :class:`SplittingField` or the cut ``d_E``. At each
    singularity ``E`` is spanned by the ``d_E`` eigendirections with the
    smallest real parts; the domination margin is the gap in real parts at
    the cut. ``index_bound`` defaults to ``d_E``.
    """
    prop = "SingularityCompatibility"
    d_E = splitting if isinstance(splitting, (int, np.integer)) else splitting.d_E
    bound = d_E if index_bound is None else index_bound
    tols = {"hyperbolicity": HYPERBOLIC_TOL, "index_bound": bound}
    rows, verdicts = [], []
    for s in singularities:
        ev = np.sort_complex(np.asarray(s.eigenvalues, dtype=complex))
        re = np.sort(ev.real)
        gap = float(re[d_E] - re[d_E - 1])
        row = {"location": s.location, "index": s.index, "margin": gap,
               "eigenvalues": [[z.real, z.imag] for z in ev]}
        if np.min(np.abs(re)) <= HYPERBOLIC_TOL:
            row["verdict"] = Verdict.INDETERMINATE
        elif s.index < bound or gap <= 0:
            row["verdict"] = Verdict.FAIL
        else:
            row["verdict"] = Verdict.PASS
        verdicts.append(row["verdict"])
        rows.append(row)
    margin = min((r["margin"] for r in rows), default=None)
    wit = {"singularities": rows, "margin": margin}
    if not rows:
        wit["note"] = "vacuous: no singularities in the ensemble"
    return Certificate(prop, combine_verdicts(verdicts), wit, tols)


ADAPT_HORIZON = 10.0


def candidate_jfield(orbit: OrbitSegment, splitting: SplittingField,
                     adapt_horizon: float = ADAPT_HORIZON) -> JField:
    """``J = -1`` on ``E`` and ``+1`` on ``F``, with ``F`` in an area-adapted metric.

    ``adapt_horizon = 0`` keeps the orthonormal frames.
    """
    w = area_weights(orbit, splitting.F, adapt_horizon) if adapt_horizon > 0 else None
    return JField.from_splitting(splitting.E, splitting.F, w)


def cone_certificate(orbit: OrbitSegment, splitting: SplittingField, tau: float, p: int,
                     adapt_horizon: float = ADAPT_HORIZON,
                     jfield: JField | None = None) -> Certificate:
    """Cone criterion for the candidate J field of a splitting.

    Every time-``tau`` map, written in the adapted frames at its endpoints,
    must be strictly J-separated with ``r_1^- < 1`` and the product of its
    ``p`` smallest ``r^+`` above 1, and the field must be J-non-negative.
    A definite violation gives Fail even if another sub-test was
    inconclusive; otherwise any inconclusive sub-test gives Indeterminate.
    """
    prop = "ConeCriterion"
    jf = jfield or candidate_jfield(orbit, splitting, adapt_horizon)
    if not 1 <= p <= len(jf.signs) - jf.q:
        raise DomainError(f"p={p} outside 1..{len(jf.signs) - jf.q}")
    tols = {"margin": MARGIN_TOL, "tau": tau, "adapt_horizon": adapt_horizon}
    starts, maps, logs, imaps, ilogs = tau_maps(orbit, jf, tau, with_inverse=True)
    Js = QuadForm.standard(jf.signs)
    signs = np.asarray(jf.signs, dtype=float)
    worst_minus, worst_plus, worst_jx = -np.inf, np.inf, np.inf
    violation, undecided, counts = None, None, {v.value: 0 for v in Separation}
    for k, (i, L) in enumerate(zip(starts, maps)):
        sep = separation_test(Js, L, strict=True, check_invertible=False)
        counts[sep.verdict.value] += 1
        X = orbit.field(orbit.states[i])
        v = jf.adapt[i - jf.start] @ X
        jx = float(np.sum(signs * v * v) / max(np.dot(v, v), 1e-300)) if np.any(v) else 0.0
        worst_jx = min(worst_jx, jx)
        try:
            r_minus, r_plus = singular_j_values(Js, L, imaps[k] * np.exp(ilogs[k] + logs[k]))
        except (NotSeparatedSpectrum, np.linalg.LinAlgError) as exc:
            if sep.verdict is Separation.NOT_SEPARATED and violation is None:
                violation = {"sample": int(i), "reason": "not J-separated"}
            elif undecided is None:
                undecided = {"sample": int(i), "reason": str(exc)}
            continue
        lm = float(np.log(r_minus[-1]) + logs[k])
        lp = float(np.sum(np.log(r_plus[:p])) + p * logs[k])
        worst_minus, worst_plus = max(worst_minus, lm), min(worst_plus, lp)
        if violation is None:
            if sep.verdict is Separation.NOT_SEPARATED:
                violation = {"sample": int(i), "reason": "not J-separated"}
            elif lm >= -MARGIN_TOL:
                violation = {"sample": int(i), "reason": "r_1^- >= 1", "log_r1_minus": lm}
            elif lp <= MARGIN_TOL:
                violation = {"sample": int(i), "reason": "product of r^+ <= 1",
                             "log_prod_r_plus": lp}
            elif jx < -MARGIN_TOL:
                violation = {"sample": int(i), "reason": "field is J-negative", "J_X": jx}
        if undecided is None and sep.verdict is not Separation.STRICTLY_SEPARATED:
            undecided = {"sample": int(i), "reason": f"separation {sep.verdict.value}"}
    wit = {"tau": tau, "p": p, "samples": len(starts), "separation_counts": counts,
           "max_r1_minus": float(np.exp(worst_minus)),
           "min_prod_r_plus": float(np.exp(worst_plus)),
           "min_normalized_J_of_X": worst_jx,
           "margin": float(min(-worst_minus, worst_plus))}
    if violation is not None:
        wit["violation"] = violation
        return Certificate(prop, Verdict.FAIL, wit, tols)
    if undecided is not None:
        wit["undecided"] = undecided
        return Certificate(prop, Verdict.INDETERMINATE, wit, tols)
    return Certificate(prop, Verdict.PASS, wit, tols)


def poincare_projection(G, X) -> np.ndarray:
    """Projection onto the G-orthogonal complement of ``X``, parallel to ``X``."""
    G = np.asarray(G, dtype=float)
    X = np.asarray(X, dtype=float)
    gx = G @ X
    return np.eye(len(X)) - np.outer(X, gx) / (X @ gx)


def normal_frame(G, X) -> np.ndarray:
    """Orthonormal basis (columns) of ``{v : X^T G v = 0}``."""
    return scipy.linalg.null_space(np.atleast_2d(np.asarray(G, dtype=float) @ X))


@dataclass(frozen=True)
class PoincareReport:
    """Linear Poincaré flow over time ``t`` at sampled points.

    ``maps[k]`` is the projected cocycle in adapted coordinates of the
    restricted forms at both ends; ``margin`` is the smallest of
    ``log r_1^+`` and ``-log r_1^-`` over samples (positive means strictly
    monotone everywhere).
    """
    t: float
    starts: np.ndarray
    maps: np.ndarray
    signs: tuple
    verdicts: tuple
    log_r1_minus: np.ndarray
    log_r1_plus: np.ndarray

    @property
    def margin(self) -> float:
        return float(min(np.min(self.log_r1_plus), np.min(-self.log_r1_minus)))

    @property
    def strictly_monotone(self) -> bool:
        return self.margin > MARGIN_TOL

    def to_dict(self) -> dict:
        return _plain({"t": self.t, "samples": len(self.starts), "margin": self.margin,
                       "strictly_monotone": self.strictly_monotone,
                       "verdict_counts": {v: self.verdicts.count(v) for v in set(self.verdicts)},
                       "max_r1_minus": float(np.exp(np.max(self.log_r1_minus))),
                       "min_r1_plus": float(np.exp(np.min(self.log_r1_plus)))})


def _restricted_form(G, X):
    B = normal_frame(G, X)
    try:
        J = lagrange_diagonalize(B.T @ G @ B)
    except NotIndefinite:
        raise FieldNotNonNegative("restricted form on the normal space is definite")
    return B, J


def linear_poincare_flow(orbit: OrbitSegment, J, t: float, start: int | None = None,
                         stop: int | None = None,
                         max_samples: int = MAX_SAMPLES) -> PoincareReport:
    """Project the cocycle onto the J-orthogonal complement of the flow.

    ``J`` is a :class:`QuadForm` or :class:`JField`. Raises
    :class:`FieldNotNonNegative` when ``J(X(x)) <= 0`` at a sample and
    :class:`DomainError` at a (near) singular sample.
    """
    jf = J if isinstance(J, JField) else JField.constant(J, 0, orbit.m)
    step = int(round(t / orbit.dt)) if t > 0 else 0
    if t < 0 or (t > 0 and abs(step * orbit.dt - t) > 1e-9 * max(t, 1.0)):
        raise DomainError(f"t={t} is not a non-negative multiple of dt={orbit.dt}")
    a = jf.start if start is None else start
    b = jf.stop if stop is None else stop
    starts = _starts(a, b, step, max_samples)
    maps, verdicts, lm, lp = [], [], [], []
    signs = None
    for i in starts:
        i = int(i)
        x, y = orbit.states[i], orbit.states[i + step]
        Gx, Gy = jf.form_at(i).gram, jf.form_at(i + step).gram
        X, Y = orbit.field(x), orbit.field(y)
        for Z, G, at in ((X, Gx, i), (Y, Gy, i + step)):
            if np.linalg.norm(Z) <= POINCARE_REGULAR_TOL:
                raise DomainError(f"sample {at} is at a singularity")
            if Z @ G @ Z <= 0:
                raise FieldNotNonNegative(f"J(X(x)) <= 0 at sample {at}")
        M, s = cocycle(orbit, i, i + step)
        Bx, Jx = _restricted_form(Gx, X)
        By, Jy = _restricted_form(Gy, Y)
        if not np.array_equal(Jx.signs, Jy.signs):
            raise DomainError("restricted forms have different indices")
        signs = tuple(Jx.signs)
        P = By.T @ poincare_projection(Gy, Y) @ (np.exp(s) * M) @ Bx
        La = Jy.adapt_basis @ P @ np.linalg.inv(Jx.adapt_basis)
        res = monotonicity_test(QuadForm.standard(signs), La, strict=False)
        maps.append(La)
        verdicts.append(res.verdict.value)
        lm.append(np.log(res.r1_minus))
        lp.append(np.log(res.r1_plus))
    if not maps:
        raise DomainError("no samples in range")
    return PoincareReport(float(t), starts, np.array(maps), signs, tuple(verdicts),
                          np.array(lm), np.array(lp))


def verify_orbit(orbit: OrbitSegment, d_E: int, p: int, tau: float, singularities=(),
                 window: float = 10.0, seed: int = 0, grid=GRID, margin: float = MARGIN,
                 adapt_horizon: float = ADAPT_HORIZON):
    """Run the verifier chain on one orbit.

    Splitting, domination, partial and p-singular hyperbolicity, flow in
    ``F`` and the cone criterion give certificates; the linear Poincaré flow
    of the candidate J field is reported alongside (its strict monotonicity
    margin is informative, not a pass/fail criterion). Stage errors become
    Indeterminate certificates tagged with the stage; a missing spectral
    gap fails domination.

    ``p`` may be a single order or a sequence of orders. Returns
    ``(certificates, reports)``.
    """
    try:
        sp = estimate_splitting(orbit, d_E, window, seed)
    except NoGap as exc:
        fail = Certificate("Dominated", Verdict.FAIL, {"reason": str(exc)}, stage="splitting")
        return [fail], {}
    except Exception as exc:
        ind = Certificate("Dominated", Verdict.INDETERMINATE,
                          {"reason": f"{type(exc).__name__}: {exc}"}, stage="splitting")
        return [ind], {}
    ps = [int(p)] if np.ndim(p) == 0 else [int(v) for v in p]
    dom = check_dominated(sp, orbit, grid, margin)
    part = check_partial_hyperbolic(sp, orbit, dom, grid, margin)
    certs = [dom, part]
    certs += [check_p_singular_hyperbolic(sp, orbit, v, singularities, part, grid, margin)
              for v in ps]
    certs.append(flow_in_F_check(sp, orbit, part))
    jf = None
    for v in ps:
        # several orders get distinct property names so ensembles do not mix them
        name = f"ConeCriterion({v})" if len(ps) > 1 else "ConeCriterion"
        try:
            jf = jf or candidate_jfield(orbit, sp, adapt_horizon)
            cert = cone_certificate(orbit, sp, tau, v, jfield=jf)
            certs.append(replace(cert, property=name))
        except Exception as exc:  # stage failure is reported, not raised
            certs.append(Certificate(name, Verdict.INDETERMINATE,
                                     {"reason": f"{type(exc).__name__}: {exc}"}, stage="cone"))
    reports = {"splitting": sp.to_dict()}
    try:
        jf = jf or candidate_jfield(orbit, sp, adapt_horizon)
        reports["poincare"] = linear_poincare_flow(orbit, jf, tau, max_samples=200).to_dict()
    except Exception as exc:
        reports["poincare"] = {"error": f"{type(exc).__name__}: {exc}"}
    return certs, reports
