import csv
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singhyp.bundles import Subbundle
from singhyp.errors import DomainError
from singhyp.flow import VectorFieldSpec, integrate
from singhyp.lyapunov import (domination_functional, finite_difference_top_exponent,
                              lyapunov_exponents, oseledets_directions, p_sectional_exponents,
                              wojtkowski_check, wojtkowski_checks)
from singhyp.pseudo_euclidean import QuadForm

EYE4 = np.eye(4)


def test_linear_exponents(diag_orbit):
    rep = lyapunov_exponents(diag_orbit)
    np.testing.assert_allclose(rep.exponents, [10, 4, 2, -3], atol=1e-6)
    assert rep.trace_average == pytest.approx(13.0)
    assert not rep.low_confidence


def test_zero_field_has_zero_exponents():
    orbit = integrate(VectorFieldSpec.linear(np.zeros((3, 3))), np.ones(3), 20.0, 0.5)
    np.testing.assert_allclose(lyapunov_exponents(orbit).exponents, 0.0, atol=1e-12)


def test_short_horizon_rejected(lorenz):
    with pytest.raises(DomainError):
        lyapunov_exponents(integrate(lorenz, [1.0, 1.0, 1.0], 5.0, 0.01))


@given(st.integers(0, 2**31 - 1))
def test_exponents_of_random_diagonal_field(seed):
    rng = np.random.default_rng(seed)
    # gaps of at least 1 so the frame converges well within the burn-in
    lam = -3.0 + np.cumsum(rng.uniform(1.0, 2.0, size=3))
    Q = np.linalg.qr(rng.normal(size=(3, 3)))[0]
    orbit = integrate(VectorFieldSpec.linear(Q @ np.diag(lam) @ Q.T), np.zeros(3), 40.0, 0.2)
    rep = lyapunov_exponents(orbit)
    np.testing.assert_allclose(rep.exponents, lam[::-1], atol=1e-5)
    assert rep.exponents.sum() == pytest.approx(lam.sum(), abs=1e-9)


def test_p_sectional_exponents(diag_orbit):
    F = Subbundle.constant(diag_orbit, EYE4[1:])
    np.testing.assert_allclose(p_sectional_exponents(diag_orbit, F, 2), [6, 12, 14], atol=1e-6)
    np.testing.assert_allclose(p_sectional_exponents(diag_orbit, F, 3), [16], atol=1e-6)
    with pytest.raises(DomainError):
        p_sectional_exponents(diag_orbit, F, 4)
    rep = lyapunov_exponents(diag_orbit, F, p_values=(2, 3))
    assert sorted(rep.p_sectional) == [2, 3]


def test_domination_functional(diag_orbit):
    E = Subbundle.constant(diag_orbit, EYE4[:1])
    F = Subbundle.constant(diag_orbit, EYE4[1:])
    res = domination_functional(diag_orbit, E, F)
    assert res.slope == pytest.approx(-5.0, abs=1e-6)
    assert res.subadditive and res.drift < 1e-6
    swapped = domination_functional(diag_orbit, Subbundle.constant(diag_orbit, EYE4[3:]),
                                    Subbundle.constant(diag_orbit, EYE4[:3]))
    assert swapped.slope == pytest.approx(13.0, abs=1e-6)


def test_domination_rejects_non_complementary(diag_orbit):
    E = Subbundle.constant(diag_orbit, EYE4[:1])
    with pytest.raises(DomainError):
        domination_functional(diag_orbit, E, Subbundle.constant(diag_orbit, EYE4[1:3]))
    with pytest.raises(DomainError):
        domination_functional(diag_orbit, E, Subbundle.constant(diag_orbit, EYE4[[0, 2, 3]]))


def test_error_estimate_shrinks_with_horizon():
    # non-normal linear field: the transient of the running estimate decays like 1/t
    field = VectorFieldSpec.linear([[1.0, 5.0], [0.0, -1.0]])
    errs = [lyapunov_exponents(integrate(field, np.zeros(2), T, 0.1)).error_estimate
            for T in (20.0, 40.0, 80.0, 160.0)]
    for a, b in zip(errs, errs[1:]):
        assert b <= a + 1e-12


def test_oseledets_directions_of_diagonal_field(diag_orbit):
    spl = oseledets_directions(diag_orbit)
    np.testing.assert_allclose(spl.values, [10, 4, 2, -3], atol=1e-6)
    for V, axis in zip(spl.subspaces, (3, 2, 1, 0)):
        assert abs(V[axis, 0]) == pytest.approx(1.0, abs=1e-9)


def test_wojtkowski_equality_for_diagonal_cocycle(diag_orbit):
    J = QuadForm.from_index(4, 1)
    for rep in wojtkowski_checks(diag_orbit, J, 0.5, [(1, 1), (1, 2), (1, 3)]):
        assert rep.verdict == "Pass"
        assert rep.average_minus == pytest.approx(rep.bound_minus, abs=1e-9)
        assert rep.average_plus == pytest.approx(rep.bound_plus, abs=1e-9)
    assert rep.chi_plus == pytest.approx((2.0, 4.0, 10.0), abs=1e-6)


def test_wojtkowski_pair_range_checked(diag_orbit):
    with pytest.raises(DomainError):
        wojtkowski_check(diag_orbit, QuadForm.from_index(4, 1), 0.5, 2, 1)


def test_wojtkowski_on_isometric_cocycle_is_indeterminate():
    # hyperbolic rotations: J-isometric, with Oseledets directions on the zero cone
    orbit = integrate(VectorFieldSpec.linear([[0.0, 1.0], [1.0, 0.0]]), np.zeros(2), 20.0, 0.1)
    rep = wojtkowski_check(orbit, QuadForm.from_index(2, 1), 0.5, 1, 1)
    assert rep.verdict == "Indeterminate"
    assert rep.average_minus == pytest.approx(0.0, abs=1e-9)
    assert rep.average_plus == pytest.approx(0.0, abs=1e-9)


def test_lorenz_short_orbit(lorenz_orbit):
    rep = lyapunov_exponents(lorenz_orbit)
    chi = rep.exponents
    assert chi.sum() == pytest.approx(-41.0 / 3.0, abs=0.05)
    assert rep.trace_average == pytest.approx(-41.0 / 3.0, abs=1e-9)
    assert 0.7 < chi[0] < 1.1 and abs(chi[1]) < 0.05 and -15 < chi[2] < -14


def test_finite_difference_top_exponent_on_linear_field():
    field = VectorFieldSpec.linear(np.diag([0.7, -1.0]))
    assert finite_difference_top_exponent(field, [0.0, 0.0], 20.0) == pytest.approx(0.7, abs=1e-6)


def test_spectrum_report_files(tmp_path, diag_orbit):
    F = Subbundle.constant(diag_orbit, EYE4[1:])
    rep = lyapunov_exponents(diag_orbit, F, p_values=(2,))
    rep.write_json(tmp_path / "s.json", extra={"orbit": 0})
    d = json.loads((tmp_path / "s.json").read_text())
    assert d["orbit"] == 0 and d["schema"] == 1
    np.testing.assert_allclose(d["exponents"], rep.exponents)
    assert d["sum"] == pytest.approx(13.0, abs=1e-6)
    np.testing.assert_allclose(d["p_sectional"]["2"], [6, 12, 14], atol=1e-6)
    rep.write_csv(tmp_path / "s.csv", max_rows=50)
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["t", "chi_1", "chi_2", "chi_3", "chi_4"]
    assert 2 <= len(rows) - 1 <= 100
    assert float(rows[-1][0]) == pytest.approx(rep.times[-1])
