import math

import numpy as np
import pytest

from mec_ppo import noma, oracles
from mec_ppo.oracles import OracleError, OracleReport

W, N0, G = 1e6, 1e-20, 1e-13


def test_bisect_linear_root():
    assert oracles.bisect_root(lambda x: x - 2.0, 0.0, 5.0) == pytest.approx(2.0, abs=1e-11)


def test_bisect_stops_at_width():
    calls = []

    def f(x):
        calls.append(x)
        return x - 0.3

    r = oracles.bisect_root(f, 0.0, 1.0, tol=1e-3)
    assert abs(r - 0.3) <= 1e-3
    assert len(calls) <= 2 + math.ceil(math.log2(1e3)) + 1


def test_bisect_requires_bracket():
    with pytest.raises(OracleError):
        oracles.bisect_root(lambda x: x + 1.0, 0.0, 1.0)


def test_grid_search_quadratic():
    x, f = oracles.grid_search(lambda p: (p[:, 0] - 0.37) ** 2, [], [(0.0, 1.0)],
                               resolution=101, refine=3)
    assert x[0] == pytest.approx(0.37, abs=1e-4)
    assert f == pytest.approx(0.0, abs=1e-8)


def test_grid_search_respects_constraints():
    # minimise x + y subject to x + y >= 1 on the unit square
    x, f = oracles.grid_search(lambda p: p.sum(axis=1), [lambda p: 1.0 - p.sum(axis=1)],
                               [(0.0, 1.0), (0.0, 1.0)], resolution=51)
    assert f == pytest.approx(1.0)
    with pytest.raises(OracleError):
        oracles.grid_search(lambda p: p[:, 0], [lambda p: np.ones(len(p))], [(0.0, 1.0)])
    with pytest.raises(ValueError):
        oracles.grid_search(lambda p: p[:, 0], [], [(0.0, 1.0)], resolution=1)


def test_finite_difference_exact_on_linear():
    a = np.array([1.5, -2.0, 0.25])
    g = oracles.finite_difference_gradient(lambda x: a @ x + 7.0, np.ones(3), 0.1)
    np.testing.assert_allclose(g, a, rtol=1e-12)


def test_finite_difference_second_order():
    x0 = np.array([0.4])
    err = [abs(oracles.finite_difference_gradient(lambda x: math.exp(x[0]), x0, h)[0]
               - math.exp(0.4)) for h in (1e-2, 5e-3)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.01)
    with pytest.raises(ValueError):
        oracles.finite_difference_gradient(lambda x: 0.0, x0, 0.0)


def test_sinr_rates_explicit():
    r = oracles.sinr_rates([0.1, 0.2], [G, G], W, N0)
    assert r[0] == pytest.approx(W)
    assert r[1] == pytest.approx(W)


def test_product_form_matches_closed_form(rng):
    loads = rng.uniform(1e5, 1e7, 5)
    gains = 10 ** rng.uniform(-9, -5, 5)
    a = oracles.product_form_powers(loads, gains, W, N0, 3.0)
    b = noma.min_powers_for_time(loads, gains, W, N0, 3.0)
    np.testing.assert_allclose(a, b, rtol=1e-10)
    batch = oracles.product_form_powers_batch(loads[None], gains, W, N0, [3.0])
    np.testing.assert_allclose(batch[0], a, rtol=1e-12)


def test_roundtrip_single_ue():
    rep = oracles.roundtrip_check([1e7], [G], W, N0, 10 / math.log2(3))
    assert rep.passed
    assert rep.meta["powers"][0] == pytest.approx(0.2, rel=1e-12)


def test_roundtrip_zero_loads():
    rep = oracles.roundtrip_check([0.0, 0.0], [G, G], W, N0, 1.0)
    assert rep.passed and rep.abs_error == 0.0
    with pytest.raises(ValueError):
        oracles.roundtrip_check([1.0], [G], W, N0, 0.0)


def test_roundtrip_random(rng):
    loads = rng.uniform(0, 5e7, 5)
    gains = 10 ** rng.uniform(-9, -4, 5)
    assert oracles.roundtrip_check(loads, gains, 5e6, N0, 2.5).rel_error <= 1e-9


def test_roundtrip_catches_wrong_powers():
    bad = lambda *a: 0.9 * noma.min_powers_for_time(*a)
    assert not oracles.roundtrip_check([1e7, 2e6], [G, G], W, N0, 5.0, powers_fn=bad).passed


def test_capacity_root_closed_form():
    # a single UE: theta = w log2(1 + p g / (w n0)) / load
    assert oracles.capacity_root(0.0, 1e7, G, W, N0, 0.2) == pytest.approx(
        W * math.log2(3) / 1e7, rel=1e-10)
    # one earlier load equal to its own: 2^{2u} - 2^u = 2 at u = 1
    assert oracles.capacity_root(5e6, 5e6, G, W, N0, 0.2) == pytest.approx(W / 5e6, rel=1e-10)


def test_joint_upload_time_matches_solver():
    assert oracles.joint_upload_time([5e6, 5e6], [G, G], W, N0, 0.2) == pytest.approx(5.0,
                                                                                        rel=1e-9)
    assert oracles.joint_upload_time([0.0], [G], W, N0, 0.2) == 0.0


def test_oracle_report_compare():
    ok = OracleReport.compare(1.0 + 1e-10, 1.0, rtol=1e-9)
    assert ok.passed and ok.rel_error == pytest.approx(1e-10, rel=1e-3)
    assert not OracleReport.compare(1.1, 1.0, rtol=1e-3).passed
    assert OracleReport.compare(0.0, 0.0, rtol=0.0).passed
    assert OracleReport.compare(1e-3, 0.0, rtol=0.0).rel_error == math.inf
