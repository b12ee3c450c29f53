import numpy as np
import pytest
from hypothesis import given, strategies as st

from singhyp.bundles import Subbundle
from singhyp.errors import DomainError, NoGap
from singhyp.flow import VectorFieldSpec, find_singularities, integrate
from singhyp.lyapunov import domination_functional
from singhyp.verifier import (Certificate, SplittingField, Verdict, aggregate, candidate_jfield,
                              check_dominated, check_p_singular_hyperbolic,
                              check_partial_hyperbolic, combine_verdicts, cone_certificate,
                              estimate_splitting, flow_in_F_check, linear_poincare_flow,
                              poincare_projection, singularity_compatibility, verify_orbit)

LORENZ_SEEDS = [[0.0, 0.0, 0.0], [8.0, 8.0, 27.0], [-8.0, -8.0, 27.0]]
V = Verdict


def diagonal_orbit(rates, T=30.0, dt=0.1):
    n = len(rates)
    return integrate(VectorFieldSpec.linear(np.diag(rates)), np.zeros(n), T, dt)


def axis_splitting(orbit, e_axes):
    I = np.eye(orbit.n)
    f_axes = [i for i in range(orbit.n) if i not in e_axes]
    return SplittingField.constant(orbit, I[list(e_axes)], I[f_axes])


@pytest.fixture(scope="module")
def lorenz_splitting(lorenz_orbit):
    return estimate_splitting(lorenz_orbit, 1)


# -------------------------------------------------------------- splitting

def test_estimated_splitting_of_diagonal_field(diag_orbit):
    sp = estimate_splitting(diag_orbit, 1)
    assert abs(sp.E.at(sp.start)[0, 0]) == pytest.approx(1.0, abs=1e-9)
    F = sp.F.at(sp.stop)
    assert np.linalg.norm(F[0]) < 1e-9
    np.testing.assert_allclose(sp.exponents, [10, 4, 2, -3], atol=1e-6)
    assert sp.residual < 1e-9


def test_splitting_rejects_bad_cut_and_missing_gap(diag_orbit):
    with pytest.raises(DomainError):
        estimate_splitting(diag_orbit, 4)
    with pytest.raises(NoGap):
        estimate_splitting(diagonal_orbit([-1.0, -1.0, 2.0]), 1)


def test_lorenz_splitting_is_invariant(lorenz_splitting):
    assert lorenz_splitting.residual < 1e-6
    assert lorenz_splitting.d_E == 1 and lorenz_splitting.F.dim == 2


# ---------------------------------------------------------------- checks

def test_dominated_and_partial_on_diagonal(diag_orbit):
    sp = axis_splitting(diag_orbit, [0])
    dom = check_dominated(sp, diag_orbit)
    assert dom.verdict is V.PASS and dom.witnesses["T"] == 1.0
    assert dom.witnesses["lambda"] == pytest.approx(5.0, abs=1e-6)
    assert dom.witnesses["rates"]["E_max"] == pytest.approx(-3.0, abs=1e-6)
    assert dom.witnesses["rates"]["F_min"] == pytest.approx(2.0, abs=1e-6)
    part = check_partial_hyperbolic(sp, diag_orbit, dom)
    assert part.verdict is V.PASS


def test_wrong_splitting_fails(diag_orbit):
    sp = axis_splitting(diag_orbit, [1])
    dom = check_dominated(sp, diag_orbit)
    assert dom.verdict is V.FAIL and "violation" in dom.witnesses
    part = check_partial_hyperbolic(sp, diag_orbit, dom)
    assert part.verdict is V.FAIL and part.stage == "dominated"


def test_dominated_but_not_contracting():
    orbit = diagonal_orbit([1.0, 3.0, 4.0])
    sp = axis_splitting(orbit, [0])
    dom = check_dominated(sp, orbit)
    assert dom.verdict is V.PASS
    part = check_partial_hyperbolic(sp, orbit, dom)
    assert part.verdict is V.FAIL and part.stage == ""


def test_p_singular_hyperbolicity():
    orbit = diagonal_orbit([-3.0, -2.0, 1.0, 1.5])
    sp = axis_splitting(orbit, [0])
    part = check_partial_hyperbolic(sp, orbit)
    assert part.passed
    # area of the (-2, 1) plane shrinks: no 2-sectional expansion
    c2 = check_p_singular_hyperbolic(sp, orbit, 2, partial=part)
    assert c2.verdict is V.FAIL
    assert c2.witnesses["expansion_rate"] == pytest.approx(-1.0, abs=1e-6)
    c3 = check_p_singular_hyperbolic(sp, orbit, 3, partial=part)
    assert c3.verdict is V.PASS
    with pytest.raises(DomainError):
        check_p_singular_hyperbolic(sp, orbit, 4)


def test_p_singular_requires_hyperbolic_singularities(diag_orbit):
    sp = axis_splitting(diag_orbit, [0])
    centre = find_singularities(VectorFieldSpec.linear([[0, -1], [1, 0]]), [[0.1, 0.1]])
    assert not centre[0].hyperbolic
    cert = check_p_singular_hyperbolic(sp, diag_orbit, 2, centre)
    assert cert.verdict is V.FAIL and "non_hyperbolic_singularity" in cert.witnesses


def test_flow_in_F(lorenz_orbit, lorenz_splitting, diag_orbit):
    cert = flow_in_F_check(lorenz_splitting, lorenz_orbit)
    assert cert.verdict is V.PASS and cert.witnesses["max_angle"] < 1e-3
    vac = flow_in_F_check(axis_splitting(diag_orbit, [0]), diag_orbit)
    assert vac.verdict is V.PASS and "vacuous" in vac.witnesses["note"]
    wrong = SplittingField.constant(lorenz_orbit, [[0, 0, 1.0]], [[1.0, 0, 0], [0, 1.0, 0]])
    assert flow_in_F_check(wrong, lorenz_orbit).verdict is V.FAIL


def test_singularity_compatibility(lorenz, diag_field):
    cert = singularity_compatibility(lorenz, 1, find_singularities(lorenz, LORENZ_SEEDS))
    assert cert.verdict is V.PASS
    assert len(cert.witnesses["singularities"]) == 3
    assert cert.witnesses["margin"] == pytest.approx(13.95, abs=0.01)
    cert = singularity_compatibility(diag_field, 1, find_singularities(diag_field, [np.ones(4)]))
    assert cert.verdict is V.PASS and cert.witnesses["margin"] == pytest.approx(5.0)
    # the saddles at (+-c, +-c, 27) have index 1, below the bound 2
    cert = singularity_compatibility(lorenz, 1, find_singularities(lorenz, LORENZ_SEEDS), 2)
    assert cert.verdict is V.FAIL


def test_non_hyperbolic_singularity_is_indeterminate():
    field = VectorFieldSpec.linear([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    cert = singularity_compatibility(field, 1, find_singularities(field, [[0.1, 0.2, 0.3]]))
    assert cert.verdict is V.INDETERMINATE


def test_cone_certificate_on_diagonal(diag_orbit):
    sp = axis_splitting(diag_orbit, [0])
    cert = cone_certificate(diag_orbit, sp, 0.5, 2)
    assert cert.verdict is V.PASS
    assert cert.witnesses["max_r1_minus"] == pytest.approx(np.exp(-1.5), rel=1e-9)
    assert cert.witnesses["min_prod_r_plus"] == pytest.approx(np.exp(3.0), rel=1e-9)


def test_cone_certificate_fails_on_isometric_cocycle():
    # rotation in the (e2, e3) plane, neutral along e1: J-isometric time-tau maps
    field = VectorFieldSpec.linear([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    orbit = integrate(field, np.zeros(3), 30.0, 0.1)
    sp = axis_splitting(orbit, [0])
    cert = cone_certificate(orbit, sp, 0.5, 2, adapt_horizon=0)
    assert cert.verdict is V.FAIL
    assert cert.witnesses["violation"]["reason"] == "r_1^- >= 1"


@given(st.floats(-2.0, 2.0), st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=2))
def test_cone_pass_implies_domination(e_rate, f_rates):
    orbit = diagonal_orbit([e_rate] + f_rates, T=20.0, dt=0.5)
    sp = axis_splitting(orbit, [0])
    cert = cone_certificate(orbit, sp, 0.5, 1, adapt_horizon=0)
    if cert.passed:
        assert e_rate < 0 < min(f_rates)
        assert domination_functional(orbit, sp.E, sp.F).slope < 0


# ------------------------------------------------------------- Poincaré

def test_poincare_projection():
    G = np.diag([-1.0, 1.0, 1.0])
    X = np.array([0.3, 1.0, -0.5])
    P = poincare_projection(G, X)
    np.testing.assert_allclose(P @ P, P, atol=1e-14)
    np.testing.assert_allclose(P @ X, 0.0, atol=1e-14)
    v = np.array([1.0, 2.0, 3.0])
    assert X @ G @ (P @ v) == pytest.approx(0.0, abs=1e-13)


def test_poincare_flow_at_time_zero_is_identity(lorenz_orbit, lorenz_splitting):
    jf = candidate_jfield(lorenz_orbit, lorenz_splitting)
    rep = linear_poincare_flow(lorenz_orbit, jf, 0.0, max_samples=20)
    for La in rep.maps:
        np.testing.assert_allclose(La, np.eye(2), atol=1e-9)
    assert rep.margin == pytest.approx(0.0, abs=1e-9)


# ------------------------------------------------------------- ensembles

def cert(verdict, margin=1.0, T=1.0, prop="Dominated"):
    return Certificate(prop, verdict, {"margin": margin, "T": T})


def test_aggregation_rules():
    ens = aggregate([cert(V.PASS, 0.5, 2.0), cert(V.PASS, 0.2, 5.0)])
    assert ens.verdict is V.PASS
    assert ens.witnesses["margin"] == 0.2 and ens.witnesses["T"] == 5.0
    ens = aggregate([cert(V.PASS), cert(V.INDETERMINATE), cert(V.FAIL, -0.3)])
    assert ens.verdict is V.FAIL and ens.witnesses["first_failing_member"] == 1
    with pytest.raises(DomainError):
        aggregate([cert(V.PASS), cert(V.PASS, prop="ConeCriterion")])
    with pytest.raises(DomainError):
        aggregate([])


verdicts = st.lists(st.sampled_from(list(Verdict)), min_size=1, max_size=8)
RANK = {V.PASS: 0, V.INDETERMINATE: 1, V.FAIL: 2}


@given(verdicts, st.sampled_from(list(Verdict)))
def test_ensemble_verdict_is_monotone(vs, extra):
    before = combine_verdicts(vs)
    after = combine_verdicts(vs + [extra])
    assert RANK[after] >= RANK[before]
    assert RANK[after] == max(RANK[v] for v in vs + [extra])


# ---------------------------------------------------------------- chains

def test_verify_orbit_on_diagonal(diag_orbit):
    certs, reports = verify_orbit(diag_orbit, 1, [2, 3], 0.5)
    names = [c.property for c in certs]
    assert names == ["Dominated", "PartiallyHyperbolic", "PSingularHyperbolic(2)",
                     "PSingularHyperbolic(3)", "FlowInCentralBundle",
                     "ConeCriterion(2)", "ConeCriterion(3)"]
    assert all(c.passed for c in certs)
    assert reports["splitting"]["d_E"] == 1


def test_verify_orbit_without_gap_fails_domination():
    certs, reports = verify_orbit(diagonal_orbit([-1.0, -1.0, 2.0]), 1, 2, 0.5)
    assert len(certs) == 1 and certs[0].verdict is V.FAIL and certs[0].stage == "splitting"
    assert reports == {}


def test_verify_orbit_lorenz(lorenz_orbit, lorenz):
    sing = find_singularities(lorenz, LORENZ_SEEDS)
    certs, reports = verify_orbit(lorenz_orbit, 1, 2, 0.5, sing)
    by = {c.property: c for c in certs}
    assert by["Dominated"].passed and by["PartiallyHyperbolic"].passed
    assert by["PSingularHyperbolic(2)"].passed
    assert by["FlowInCentralBundle"].passed
    assert "poincare" in reports
