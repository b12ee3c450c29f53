"""Seeded Monte-Carlo suites over random J-separated matrices.

Trial ``i`` of a suite run with seed ``s`` draws from
``numpy.random.default_rng([s, i])``, so any violation is reproduced by
rerunning that single trial. Trials run and reduce in index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .pseudo_euclidean import (QuadForm, composition_check, kuhne_bounds, polar_decompose,
                               pseudo_adjoint, random_strictly_separated, sampled_cone_ratios,
                               sigma_d)

DIMENSIONS = ((2, 1), (3, 1), (3, 2), (4, 1), (4, 2))
POLAR_TOL = 1e-9
COMPOSITION_SLACK = 1e-9
KUHNE_OFFSET = 1e-3
KUHNE_MC_TOL = 1e-4
SIGMA_FORMULA_TOL = 1e-12
SIGMA_MC_TOL = 1e-6
SIGMA_EXTREMAL_TOL = 0.05


@dataclass
class SuiteResult:
    """Violation count and worst observed value of each monitored quantity."""
    name: str
    seed: int
    trials: int
    violations: int = 0
    worst: dict = dc_field(default_factory=dict)
    first_violation: dict | None = None

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {"name": self.name, "seed": self.seed, "trials": self.trials,
                "violations": self.violations, "worst": self.worst,
                "first_violation": self.first_violation}

    def _track(self, key, value, larger_is_worse=True):
        value = float(value)
        old = self.worst.get(key)
        if old is None or (value > old if larger_is_worse else value < old):
            self.worst[key] = value

    def _violate(self, trial, detail):
        self.violations += 1
        if self.first_violation is None:
            self.first_violation = {"seed": self.seed, "trial": trial, "detail": detail}


def trial_rng(seed: int, trial: int):
    return np.random.default_rng([seed, trial])


def random_basis(rng, n: int, scale: float = 0.3) -> np.ndarray:
    """A well-conditioned random change of basis ``I + scale * N``."""
    while True:
        P = np.eye(n) + scale * rng.normal(size=(n, n))
        if np.linalg.cond(P) < 10:
            return P


def _draw_dims(rng):
    return DIMENSIONS[rng.integers(len(DIMENSIONS))]


def _separated_pair(rng):
    """``(J, L, r_minus, r_plus)`` with ``J`` in a random (non-standard) basis."""
    n, q = _draw_dims(rng)
    J0, L0, rm, rp = random_strictly_separated(rng, n, q)
    P = random_basis(rng, n)
    return QuadForm(J0.signs, P), np.linalg.solve(P, L0 @ P), rm, rp, P


def polar_suite(trials: int = 1000, seed: int = 0) -> SuiteResult:
    """Reconstruction ``RU = L``, ``U^+ U = I``, ``r1^- < r1^+`` and recovery of the
    generating singular J-values."""
    res = SuiteResult("polar_reconstruction", seed, trials)
    for i in range(trials):
        rng = trial_rng(seed, i)
        J, L, rm, rp, _ = _separated_pair(rng)
        try:
            pp = polar_decompose(J, L)
        except Exception as exc:
            res._violate(i, f"{type(exc).__name__}: {exc}")
            continue
        rec = np.linalg.norm(pp.R @ pp.U - L) / np.linalg.norm(L)
        iso = np.abs(pseudo_adjoint(J, pp.U) @ pp.U - np.eye(J.n)).max()
        gap = pp.r1_plus - pp.r1_minus
        values = np.r_[pp.r_minus, pp.r_plus]
        truth = np.r_[rm, rp]
        rel = np.abs(values - truth).max() / truth.max()
        res._track("reconstruction", rec)
        res._track("isometry", iso)
        res._track("r1_gap", gap, larger_is_worse=False)
        res._track("singular_values", rel)
        bad = [k for k, v in (("reconstruction", rec), ("isometry", iso),
                              ("singular_values", rel)) if v > POLAR_TOL]
        if gap <= 0:
            bad.append("r1_gap")
        if bad:
            res._violate(i, f"tolerance exceeded: {bad}")
    return res


def composition_suite(trials: int = 1000, seed: int = 0,
                      slack: float = COMPOSITION_SLACK) -> SuiteResult:
    """``r1^+(L1 L2) >= r1^+(L1) r1^+(L2)`` and ``r1^-(L1 L2) <= r1^-(L1) r1^-(L2)``."""
    res = SuiteResult("composition", seed, trials)
    for i in range(trials):
        rng = trial_rng(seed, i)
        J, L1, _, _, P = _separated_pair(rng)
        _, L0, _, _ = random_strictly_separated(rng, J.n, J.q)
        L2 = np.linalg.solve(P, L0 @ P)
        try:
            rep = composition_check(J, L1, L2, slack)
        except Exception as exc:
            res._violate(i, f"{type(exc).__name__}: {exc}")
            continue
        res._track("plus_margin", rep.plus_margin, larger_is_worse=False)
        res._track("minus_margin", rep.minus_margin, larger_is_worse=False)
        if not rep.ok:
            res._violate(i, f"plus {rep.plus_margin:.3g}, minus {rep.minus_margin:.3g}")
    return res


def random_cone_nonnegative_form(rng, J: QuadForm):
    """``F = A + r0 J`` with ``A`` positive definite: non-negative on the zero cone."""
    B = rng.normal(size=(J.n, J.n))
    A = B @ B.T + 0.1 * np.eye(J.n)
    r0 = rng.normal()
    return A + r0 * J.gram, r0


def _min_eig(M):
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def kuhne_suite(trials: int = 200, seed: int = 0, mc_samples: int = 10_000,
                interior_points: int = 5, offset: float = KUHNE_OFFSET,
                mc_tol: float = KUHNE_MC_TOL) -> SuiteResult:
    """The interval ``{r : F - r J >= 0}`` against direct eigenvalue checks and sampling.

    ``F - r J`` must be positive semidefinite at interior grid points and
    indefinite at ``r_- - offset`` and ``r_+ + offset``; the sampled
    ``inf F/J`` over the positive cone may not undercut ``r_+`` (nor the
    ``sup`` over the negative cone exceed ``r_-``) by more than ``mc_tol``.
    """
    res = SuiteResult("kuhne_bounds", seed, trials)
    for i in range(trials):
        rng = trial_rng(seed, i)
        n, q = _draw_dims(rng)
        J = QuadForm(QuadForm.from_index(n, q).signs, random_basis(rng, n))
        F, _ = random_cone_nonnegative_form(rng, J)
        G = J.gram
        try:
            lo, hi = kuhne_bounds(J, F, seed=int(rng.integers(2**31)))
        except Exception as exc:
            res._violate(i, f"{type(exc).__name__}: {exc}")
            continue
        scale = max(1.0, np.linalg.norm(F, 2))
        inner = min(_min_eig(F - r * G) for r in np.linspace(lo, hi, interior_points + 2)[1:-1])
        outer = max(_min_eig(F - (lo - offset) * G), _min_eig(F - (hi + offset) * G))
        inf_plus, sup_minus = sampled_cone_ratios(J, F, mc_samples, seed=int(rng.integers(2**31)))
        mc_excess = max(hi - inf_plus, sup_minus - lo)
        res._track("interior_min_eig", inner / scale, larger_is_worse=False)
        res._track("exterior_min_eig", outer / scale)
        res._track("mc_excess", mc_excess)
        bad = []
        if inner < -1e-10 * scale:
            bad.append("interior")
        if outer >= 0:
            bad.append("exterior")
        if mc_excess > mc_tol:
            bad.append("monte_carlo")
        if bad:
            res._violate(i, f"[{lo:.6g}, {hi:.6g}] failed {bad}")
    return res


def diagonal_separated(rng, n: int, q: int):
    """``(J, L, r_plus)`` for ``L = diag(r^-, r^+)`` with ``max r^- < min r^+``."""
    J = QuadForm.from_index(n, q)
    rm = np.exp(rng.uniform(-2.0, -0.05, size=q))
    rp = np.exp(rng.uniform(0.05, 2.0, size=n - q))
    return J, np.diag(np.r_[rm, rp]), np.sort(rp)


def sigma_d_suite(trials: int = 1000, seed: int = 0, mc_samples: int = 100,
                  diagonal: bool = False) -> SuiteResult:
    """Minimal J-volume expansion: closed form against sampled and extremal subspaces.

    The closed form must equal the product of the ``d`` smallest generating
    ``r^+`` to ``1e-12`` (relative), no sampled subspace may expand less by
    more than ``1e-6``, and the extremal subspace must realise the closed form
    within 5%.
    """
    res = SuiteResult("sigma_d" + ("_diagonal" if diagonal else ""), seed, trials)
    for i in range(trials):
        rng = trial_rng(seed, i)
        n, q = _draw_dims(rng)
        if diagonal:
            J, L, rp = diagonal_separated(rng, n, q)
        else:
            J, L, _, rp = random_strictly_separated(rng, n, q)
        d = int(rng.integers(1, J.p + 1))
        try:
            sd = sigma_d(J, L, d, mc_samples=mc_samples, seed=int(rng.integers(2**31)))
        except Exception as exc:
            res._violate(i, f"{type(exc).__name__}: {exc}")
            continue
        truth = float(np.prod(rp[:d]))
        formula_err = abs(sd.formula_value - truth) / truth
        undercut = sd.formula_value - sd.mc_infimum
        extremal_err = abs(sd.extremal_value / sd.formula_value - 1.0)
        res._track("formula_error", formula_err)
        res._track("mc_undercut", undercut)
        res._track("extremal_error", extremal_err)
        # a non-diagonal L is assembled from random isometries, so its r^+ carry roundoff
        ftol = SIGMA_FORMULA_TOL if diagonal else 1e-8
        bad = []
        if formula_err > ftol:
            bad.append("formula")
        if undercut > SIGMA_MC_TOL:
            bad.append("monte_carlo")
        if extremal_err > SIGMA_EXTREMAL_TOL:
            bad.append("extremal")
        if bad:
            res._violate(i, f"d={d}: failed {bad}")
    return res


SUITES = {
    "polar": polar_suite,
    "composition": composition_suite,
    "kuhne": kuhne_suite,
    "sigma_d": sigma_d_suite,
}


def run_suites(trials: int = 1000, seed: int = 0, names=None) -> list[SuiteResult]:
    return [SUITES[name](trials=trials, seed=seed) for name in (names or SUITES)]
