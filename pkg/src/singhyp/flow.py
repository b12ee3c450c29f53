"""Vector fields, trajectories with tangent cocycles, and singularities."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import _kernels
from .errors import DomainError, Escape, StiffnessError

log = logging.getLogger(__name__)

RTOL = 1e-10
ATOL = 1e-12
ESCAPE_RADIUS = 1e8
RENORM_MAX = 1e50


@dataclass(frozen=True)
class VectorFieldSpec:
    """A polynomial vector field on R^n.

    ``kind`` is ``"linear"`` (``params["A"]``), ``"lorenz"`` (``sigma``,
    ``rho``, ``beta``) or ``"polynomial"`` (``params["terms"]``: a list of
    ``[component, coefficient, [exponents...]]``). All kinds compile to the
    same term table.
    """
    kind: str
    params: dict
    n: int
    _table: tuple = dc_field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_table", _build_table(self.kind, self.params, self.n))

    @classmethod
    def linear(cls, A) -> "VectorFieldSpec":
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError("linear field needs a square matrix")
        return cls("linear", {"A": A.tolist()}, A.shape[0])

    @classmethod
    def lorenz(cls, sigma: float = 10.0, rho: float = 28.0, beta: float = 8.0 / 3.0):
        return cls("lorenz", {"sigma": float(sigma), "rho": float(rho), "beta": float(beta)}, 3)

    @classmethod
    def polynomial(cls, n: int, terms) -> "VectorFieldSpec":
        terms = [[int(c), float(a), [int(e) for e in exps]] for c, a, exps in terms]
        return cls("polynomial", {"terms": terms}, n)

    @classmethod
    def from_dict(cls, d: dict) -> "VectorFieldSpec":
        kind = d["kind"]
        if kind == "linear":
            return cls.linear(d["A"])
        if kind == "lorenz":
            return cls.lorenz(d.get("sigma", 10.0), d.get("rho", 28.0), d.get("beta", 8.0 / 3.0))
        if kind == "polynomial":
            return cls.polynomial(d["n"], d["terms"])
        raise DomainError(f"unknown field kind {kind!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, **self.params}
        if self.kind == "polynomial":
            d["n"] = self.n
        return d

    @property
    def table(self):
        return self._table

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        f = np.empty(self.n)
        _kernels.poly_eval(*self._table, x, f)
        return f

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        jac = np.empty((self.n, self.n))
        _kernels.poly_jac(*self._table, x, jac)
        return jac

    def negated(self) -> "VectorFieldSpec":
        coef, out, exps = self._table
        return VectorFieldSpec.polynomial(
            self.n, [[o, -c, e] for c, o, e in zip(coef, out, exps.tolist())])

    def doubled(self) -> "VectorFieldSpec":
        """Two uncoupled copies of the field on R^(2n)."""
        coef, out, exps = self._table
        z = [0] * self.n
        terms = [[o, c, list(e) + z] for c, o, e in zip(coef, out, exps.tolist())]
        terms += [[o + self.n, c, z + list(e)] for c, o, e in zip(coef, out, exps.tolist())]
        return VectorFieldSpec.polynomial(2 * self.n, terms)

    def divergence(self, x) -> float:
        return float(np.trace(self.jacobian(x)))


def _build_table(kind, params, n):
    terms = []
    if kind == "linear":
        A = np.asarray(params["A"], dtype=float)
        if A.shape != (n, n):
            raise DomainError("matrix shape does not match dimension")
        for i in range(n):
            for j in range(n):
                if A[i, j] != 0.0:
                    e = [0] * n
                    e[j] = 1
                    terms.append((i, A[i, j], e))
    elif kind == "lorenz":
        s, r, b = params["sigma"], params["rho"], params["beta"]
        terms = [(0, s, [0, 1, 0]), (0, -s, [1, 0, 0]),
                 (1, r, [1, 0, 0]), (1, -1.0, [1, 0, 1]), (1, -1.0, [0, 1, 0]),
                 (2, 1.0, [1, 1, 0]), (2, -b, [0, 0, 1])]
    elif kind == "polynomial":
        for c, a, exps in params["terms"]:
            if not 0 <= c < n or len(exps) != n or min(exps, default=0) < 0:
                raise DomainError(f"bad polynomial term {(c, a, exps)}")
            terms.append((c, a, list(exps)))
    else:
        raise DomainError(f"unknown field kind {kind!r}")
    coef = np.array([t[1] for t in terms], dtype=float)
    out = np.array([t[0] for t in terms], dtype=np.int64)
    exps = np.array([t[2] for t in terms], dtype=np.int64).reshape(len(terms), n)
    return coef, out, exps


@dataclass(frozen=True)
class OrbitSegment:
    """Sampled trajectory with the tangent cocycle over each sampling window.

    ``factors[i] * exp(renorm_log[i])`` is the derivative of the flow from
    ``times[i]`` to ``times[i+1]`` at ``states[i]``.
    """
    field: VectorFieldSpec
    times: np.ndarray
    states: np.ndarray
    factors: np.ndarray
    renorm_log: np.ndarray
    meta: dict = dc_field(default_factory=dict)

    @property
    def m(self) -> int:
        return len(self.factors)

    @property
    def n(self) -> int:
        return self.factors.shape[1]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if self.m else 0.0

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    def exterior(self, k: int) -> "OrbitSegment":
        """The same orbit carrying the k-th exterior power of each factor."""
        from .exterior import exterior_power_batch
        facs = exterior_power_batch(self.factors, k)
        return OrbitSegment(self.field, self.times, self.states, facs,
                            k * self.renorm_log, {**self.meta, "exterior_power": k})


def integrate(field: VectorFieldSpec, x0, T: float, dt: float, transient: float = 0.0,
              rtol: float = RTOL, atol: float = ATOL, variational: bool = True,
              seed=None) -> OrbitSegment:
    """Integrate ``field`` from ``x0`` over ``[0, T]`` sampled every ``dt``.

    Dormand-Prince 5(4) with step control on state and tangent map; steps are
    clipped to land on the sampling grid, where the tangent map is stored and
    restarted from the identity. An optional ``transient`` is integrated first
    (state only) and discarded.
    """
    if T <= 0 or dt <= 0:
        raise DomainError("T and dt must be positive")
    m = int(round(T / dt))
    if m < 1 or abs(m * dt - T) > 1e-9 * T:
        raise DomainError(f"T={T} is not a multiple of dt={dt}")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (field.n,):
        raise DomainError(f"x0 has shape {x0.shape}, expected ({field.n},)")
    coef, out, exps = field.table
    h = 0.0
    if transient > 0:
        mt = max(1, int(np.ceil(transient / dt)))
        xs, _, _, status, done, h = _kernels.integrate_windows(
            coef, out, exps, x0, transient / mt, mt, rtol, atol, 0.0, False,
            RENORM_MAX, ESCAPE_RADIUS)
        _raise_status(status, done * transient / mt)
        x0 = xs[-1].copy()
    xs, phis, logs, status, done, _ = _kernels.integrate_windows(
        coef, out, exps, x0, float(dt), m, rtol, atol, h, variational,
        RENORM_MAX, ESCAPE_RADIUS)
    _raise_status(status, done * dt)
    if not variational:
        phis = np.zeros((0, field.n, field.n))
    meta = {"field": field.to_dict(), "rtol": rtol, "atol": atol, "dt": dt,
            "T": T, "transient": transient, "seed": seed}
    return OrbitSegment(field, dt * np.arange(m + 1), xs, phis, logs, meta)


def _raise_status(status, t):
    if status == _kernels.STATUS_ESCAPE:
        raise Escape(f"trajectory left the ball of radius {ESCAPE_RADIUS:g} near t={t:.6g}")
    if status == _kernels.STATUS_STIFF:
        raise StiffnessError(f"step size underflow near t={t:.6g}")


def flow_map(field: VectorFieldSpec, x0, t: float, rtol=RTOL, atol=ATOL) -> np.ndarray:
    """State after time ``t`` (negative ``t`` integrates the reversed field)."""
    if t == 0:
        return np.asarray(x0, dtype=float).copy()
    f = field if t > 0 else field.negated()
    return integrate(f, x0, abs(t), abs(t), rtol=rtol, atol=atol, variational=False).states[-1]


def cocycle(orbit: OrbitSegment, i: int, j: int) -> tuple[np.ndarray, float]:
    """Tangent map from ``times[i]`` to ``times[j]`` as ``(M, s)`` with ``Phi = e^s M``."""
    if not 0 <= i <= j <= orbit.m:
        raise DomainError(f"indices ({i}, {j}) outside 0..{orbit.m}")
    M = np.eye(orbit.n)
    s = 0.0
    for k in range(i, j):
        M = orbit.factors[k] @ M
        nrm = np.linalg.norm(M)
        M /= nrm
        s += np.log(nrm) + orbit.renorm_log[k]
    return M, s


def divergence_along(field: VectorFieldSpec, states) -> np.ndarray:
    """``tr DX`` at each row of ``states`` (vectorised over the term table)."""
    X = np.atleast_2d(np.asarray(states, dtype=float))
    coef, out, exps = field.table
    tr = np.zeros(len(X))
    for c, o, e in zip(coef, out, exps):
        if e[o] == 0:
            continue
        de = e.copy()
        de[o] -= 1
        tr += c * e[o] * np.prod(X ** de, axis=1)
    return tr


def trace_integral(orbit: OrbitSegment) -> np.ndarray:
    """Cumulative trapezoid integral of ``tr DX`` along the sampled states."""
    tr = divergence_along(orbit.field, orbit.states)
    dt = np.diff(orbit.times)
    return np.r_[0.0, np.cumsum(0.5 * (tr[1:] + tr[:-1]) * dt)]


@dataclass(frozen=True)
class SingularityReport:
    location: np.ndarray
    eigenvalues: np.ndarray
    hyperbolic: bool
    index: int

    def to_dict(self) -> dict:
        return {"location": self.location.tolist(),
                "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
                "hyperbolic": self.hyperbolic, "index": self.index}


HYPERBOLIC_TOL = 1e-8


def singularity_report(field: VectorFieldSpec, x) -> SingularityReport:
    x = np.asarray(x, dtype=float)
    ev = np.linalg.eigvals(field.jacobian(x))
    ev = ev[np.lexsort((ev.imag, ev.real))]
    hyperbolic = bool(np.min(np.abs(ev.real)) > HYPERBOLIC_TOL)
    return SingularityReport(x, ev, hyperbolic, int(np.sum(ev.real < 0)))


def find_singularities(field: VectorFieldSpec, seeds, tol: float = 1e-8,
                       max_iter: int = 100) -> list[SingularityReport]:
    """Zeros of the field reached by damped Newton iteration from each seed."""
    found: list[np.ndarray] = []
    for seed in seeds:
        x = np.asarray(seed, dtype=float).copy()
        fx = field(x)
        converged = False
        for _ in range(max_iter):
            nf = np.linalg.norm(fx)
            if nf <= 1e-13 * max(1.0, np.linalg.norm(x)):
                converged = True
                break
            step = np.linalg.lstsq(field.jacobian(x), -fx, rcond=None)[0]
            lam = 1.0
            while lam > 1e-10:
                xn = x + lam * step
                fn = field(xn)
                if np.linalg.norm(fn) < (1 - 1e-4 * lam) * nf:
                    break
                lam *= 0.5
            else:
                break
            x, fx = xn, fn
        if not converged:
            log.info("Newton from seed %s did not converge; skipped", np.asarray(seed).tolist())
            continue
        if not any(np.linalg.norm(x - y) <= tol * max(1.0, np.linalg.norm(y)) for y in found):
            found.append(x)
    return [singularity_report(field, x) for x in found]


def save_orbit(orbit: OrbitSegment, path) -> None:
    """Binary orbit cache (``.npz``) with a JSON header."""
    header = json.dumps({**orbit.meta, "field": orbit.field.to_dict()}, sort_keys=True)
    np.savez_compressed(path, times=orbit.times, states=orbit.states, factors=orbit.factors,
                        renorm_log=orbit.renorm_log, header=np.array(header))


def load_orbit(path) -> OrbitSegment:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["header"]))
        field = VectorFieldSpec.from_dict(meta["field"])
        return OrbitSegment(field, z["times"], z["states"], z["factors"], z["renorm_log"], meta)


def orbit_to_csv(orbit: OrbitSegment, path) -> None:
    """CSV cache: ``#``-prefixed JSON header, then ``t, x_i, phi_ij, log_scale``.

    Row ``i`` carries the factor from ``t_i`` to ``t_{i+1}``; the last row's
    factor columns are empty.
    """
    n = orbit.n
    cols = (["t"] + [f"x_{i + 1}" for i in range(n)]
            + [f"phi_{i + 1}{j + 1}" for i in range(n) for j in range(n)] + ["log_scale"])
    header = json.dumps({**orbit.meta, "field": orbit.field.to_dict()}, sort_keys=True)
    with open(path, "w", newline="") as fh:
        fh.write("# " + header + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(orbit.m + 1):
            row = [repr(float(orbit.times[i]))] + [repr(float(v)) for v in orbit.states[i]]
            if i < orbit.m:
                row += [repr(float(v)) for v in orbit.factors[i].ravel()]
                row.append(repr(float(orbit.renorm_log[i])))
            else:
                row += [""] * (n * n + 1)
            w.writerow(row)


def orbit_from_csv(path) -> OrbitSegment:
    with open(path, newline="") as fh:
        first = fh.readline()
        meta = json.loads(first[2:])
        rows = list(csv.reader(fh))
    field = VectorFieldSpec.from_dict(meta["field"])
    n = field.n
    body = rows[1:]
    times = np.array([float(r[0]) for r in body])
    states = np.array([[float(v) for v in r[1:1 + n]] for r in body])
    facs = np.array([[float(v) for v in r[1 + n:1 + n + n * n]] for r in body[:-1]])
    logs = np.array([float(r[1 + n + n * n]) for r in body[:-1]])
    return OrbitSegment(field, times, states, facs.reshape(-1, n, n), logs, meta)
