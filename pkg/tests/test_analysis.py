import numpy as np
import pytest

from comp_noma import efficiency, finite_diff_hessian, hessian_minors
from comp_noma.analysis import LN2, sum_rate_objective


def test_minors_two_user_hand_values():
    rep = hessian_minors([0.5, 0.5], [1.0, 2.0])
    assert rep.minors[0] == pytest.approx(-0.25, abs=1e-12)
    assert rep.minors[1] == pytest.approx(0.25 * (1.0 - 4.0 / 9.0), abs=1e-4)
    assert rep.minors[1] == pytest.approx(0.1389, abs=1e-4)
    assert rep.passed
    assert rep.fd_max_rel_err is not None and rep.fd_max_rel_err < 1e-5


def test_minor_vanishes_as_gains_merge():
    rep = hessian_minors([0.5, 0.5], [1.0, 1.0 + 1e-9], cross_check=False)
    assert abs(rep.minors[1]) < 1e-9


def test_three_user_sign_pattern():
    rep = hessian_minors([0.3, 0.3, 0.4], [1.0, 2.0, 5.0])
    assert rep.signs == (-1, 1, -1)
    assert rep.passed
    assert rep.fd_max_rel_err < 1e-4


def test_minors_reject_bad_input():
    with pytest.raises(ValueError):
        hessian_minors([1.0], [1.0])
    with pytest.raises(ValueError):
        hessian_minors([0.5, 0.5], [2.0, 1.0])


def test_finite_diff_on_quadratic_is_exact():
    a = np.array([[2.0, 0.5, 0.0], [0.5, 1.0, -0.3], [0.0, -0.3, 4.0]])

    def f(x):
        return 0.5 * float(x @ a @ x)

    h = finite_diff_hessian(f, [1.0, 1.0, 1.0], 1e-4)
    assert np.allclose(h, a, atol=1e-6)
    assert np.array_equal(h, h.T)


def test_finite_diff_matches_analytic_entries():
    p, g = [0.5, 0.5], [1.0, 2.0]
    h = finite_diff_hessian(sum_rate_objective(g), p, 1e-4) * LN2
    pi2 = (1.0 / (1.0 + 1.0)) ** 2
    assert h[0, 0] == pytest.approx(-pi2, abs=1e-5)
    assert h[0, 1] == pytest.approx(-pi2, abs=1e-5)


def test_finite_diff_rejects_boundary_point():
    with pytest.raises(ValueError):
        finite_diff_hessian(sum_rate_objective([1.0, 2.0]), [1e-6, 0.5], 1e-4)
    with pytest.raises(ValueError):
        finite_diff_hessian(sum_rate_objective([1.0, 2.0]), [0.5, 0.5], 0.0)


def test_concavity_random_points():
    rng = np.random.default_rng(31)
    for m in (2, 3, 4):
        for _ in range(50):
            gains = np.sort(rng.uniform(0.1, 20.0, size=m))
            while np.any(gains[1:] / gains[:-1] < 1.05):
                gains = np.sort(rng.uniform(0.1, 20.0, size=m))
            powers = rng.uniform(0.05, 1.0, size=m)
            rep = hessian_minors(powers.tolist(), gains.tolist(), cross_check=False)
            assert rep.passed, (powers, gains, rep.minors)


def test_efficiency_unit_conversion():
    rep = efficiency([10.0], [1.0], 1, 180e3)
    assert rep.ee_mb_per_joule == pytest.approx(1.8, rel=1e-12)
    assert rep.se_bits_per_hz == 10.0
    # report arithmetic identity holds exactly
    assert rep.ee_mb_per_joule == rep.se_bits_per_hz * 1 * 180e3 / rep.total_power_watts / 1e6


def test_efficiency_zero_rates():
    rep = efficiency([0.0, 0.0], [2.0], 4, 180e3)
    assert rep.ee_mb_per_joule == 0.0


def test_efficiency_power_scaling():
    a = efficiency([5.0, 5.0], [1.0], 2, 180e3)
    b = efficiency([5.0, 5.0], [2.0], 2, 180e3)
    assert a.ee_mb_per_joule == pytest.approx(2.0 * b.ee_mb_per_joule, rel=1e-12)


def test_efficiency_rejects_free_lunch():
    with pytest.raises(ValueError):
        efficiency([1.0], [0.0], 1, 180e3)
