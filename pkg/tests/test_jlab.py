import numpy as np

from singhyp import jlab
from singhyp.pseudo_euclidean import polar_decompose


def test_trials_are_reproducible():
    a = jlab._separated_pair(jlab.trial_rng(7, 3))
    b = jlab._separated_pair(jlab.trial_rng(7, 3))
    np.testing.assert_array_equal(a[1], b[1])
    J, L, _, _, _ = a
    polar_decompose(J, L)


def test_random_basis_is_well_conditioned():
    rng = np.random.default_rng(0)
    assert all(np.linalg.cond(jlab.random_basis(rng, 4)) < 10 for _ in range(50))


def test_suites_pass_on_small_runs():
    for name, fn in jlab.SUITES.items():
        kw = {"mc_samples": 500} if name == "kuhne" else {}
        res = fn(trials=20, seed=11, **kw)
        assert res.ok, res.first_violation
        assert res.trials == 20 and res.worst


def test_sigma_d_suite_on_diagonal_models():
    res = jlab.sigma_d_suite(trials=20, seed=2, mc_samples=200, diagonal=True)
    assert res.ok and res.worst["formula_error"] <= 1e-12


def test_violations_are_recorded():
    res = jlab.SuiteResult("demo", 5, 3)
    res._violate(1, "first")
    res._violate(2, "second")
    assert not res.ok and res.violations == 2
    assert res.first_violation == {"seed": 5, "trial": 1, "detail": "first"}
    assert res.to_dict()["first_violation"]["trial"] == 1
