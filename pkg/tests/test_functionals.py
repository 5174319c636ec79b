import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.special import gamma

from fracsurf import functionals as f
from fracsurf import geometry as g
from fracsurf.quadrature import FractionalOrder
from fracsurf.sets import Ball, Box, HalfSpace

N = 100_000


def disk_sper(s, R=1.0):
    return (2 * math.pi * R / 4) * (2 * R) ** (1 - 2 * s) / (2 * s * (1 - 2 * s)) * (
        2 * math.sqrt(math.pi) * gamma(1.5 - s) / gamma(2 - s))


def within(a, b, k=3.0):
    return abs(a.value - b.value) <= k * math.hypot(a.std_error, b.std_error)


@pytest.mark.parametrize("s", [0.15, 0.3, 0.45])
def test_disk_methods_agree_and_match_closed_form(s):
    o = FractionalOrder(s)
    a = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 1)
    b = f.s_perimeter(Ball([0, 0], 1), o, f.CROSSING_PARITY, N, 1)
    assert within(a, b)
    assert abs(a.value - disk_sper(s)) <= 4 * a.std_error


def test_dilation_scales_by_power():
    s = 0.3
    o = FractionalOrder(s)
    a = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 2)
    b = f.s_perimeter(Ball([0, 0], 2), o, f.SET_PAIRS, N, 3)
    lam = 2.0 ** (2 - 2 * s)
    assert abs(b.value - lam * a.value) <= 3 * math.hypot(b.std_error, lam * a.std_error)


def test_rigid_motion_invariance():
    o = FractionalOrder(0.25)
    a = f.s_perimeter(Box([0, 0], [1, 1]), o, f.CROSSING_PARITY, N, 4)
    th = 0.37
    Q = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]]) @ Q.T + [3.0, -1.5]
    moved = SimpleNamespace(boundary=lambda: g.make_polyline(sq, closed=True), bounded=True)
    b = f.s_perimeter(moved, o, f.CROSSING_PARITY, N, 5)
    assert within(a, b)
    c = f.s_perimeter(Ball([3, -1], 1), o, f.SET_PAIRS, N, 6)
    d = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 7)
    assert within(c, d)


def test_three_dimensional_ball():
    s = 0.3
    o = FractionalOrder(s)
    a = f.s_perimeter(Ball([0, 0, 0], 1), o, f.SET_PAIRS, N, 8)
    b = f.s_perimeter(Ball([0, 0, 0], 1), o, f.CROSSING_PARITY, N, 9)
    assert within(a, b, 4.0)


def test_relative_equals_full_when_set_inside_window():
    o = FractionalOrder(0.3)
    full = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 10)
    rel = f.s_perimeter_relative(Ball([0, 0], 1), Ball([0, 0], 3), o, N, 11)
    assert within(full, rel)


def test_relative_perimeter_grows_with_window():
    o = FractionalOrder(0.3)
    H = HalfSpace([0, 0], [0, 1])
    a = f.s_perimeter_relative(H, Ball([0, 0], 1), o, N, 12)
    b = f.s_perimeter_relative(H, Ball([0, 0], 2), o, N, 12)
    assert b.value - a.value > 3 * math.hypot(a.std_error, b.std_error)
    assert a.bias_bound == 0.0


def test_relative_rejects_box_window():
    with pytest.raises(TypeError):
        f.s_perimeter_relative(HalfSpace([0, 0], [0, 1]), Box([-1, -1], [1, 1]),
                               FractionalOrder(0.3), 1000, 0)


def test_area_of_closed_curve_is_its_perimeter():
    o = FractionalOrder(0.3)
    area = f.s_area(g.make_circle([0, 0], 1), Ball([0, 0], 3), o, N=N, seed=13)
    per = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 14)
    assert abs(area.value - per.value) <= 3 * math.hypot(area.std_error, per.std_error)


def test_area_needs_surface_inside_window():
    with pytest.raises(ValueError):
        f.s_area(g.make_circle([0, 0], 1), Ball([0, 0], 0.5), FractionalOrder(0.3), N=1000)


def test_interaction_rejects_overlap():
    with pytest.raises(ValueError):
        f.interaction(Ball([0, 0], 1), Ball([0.5, 0], 1), FractionalOrder(0.3), 1000, 0)


def test_separated_interaction_is_symmetric():
    o = FractionalOrder(0.3)
    A, B = Ball([0, 0], 1), Ball([3, 0], 0.5)
    a = f.interaction(A, B, o, N, 15)
    b = f.interaction(B, A, o, N, 16)
    assert within(a, b)


def test_same_seed_same_answer_across_workers():
    o = FractionalOrder(0.3)
    a = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 17, workers=1)
    b = f.s_perimeter(Ball([0, 0], 1), o, f.SET_PAIRS, N, 17, workers=3)
    assert a.value == b.value and a.std_error == b.std_error
    assert a.config_hash == b.config_hash


def test_unbounded_set_needs_relative():
    with pytest.raises(ValueError):
        f.s_perimeter(HalfSpace([0, 0], [0, 1]), FractionalOrder(0.3))


def test_sweep_recovers_constant_exactly():
    c = 2.5
    r = f.scaled_limit_sweep(lambda s: (c / (1 - 2 * s), 0.0), [0.3, 0.4, 0.45, 0.49])
    assert r.limit == pytest.approx(c, rel=1e-13)
    assert r.limit_error == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("grid", [[0.3, 0.4], [0.4, 0.3, 0.45], [0.3, 0.4, 0.5]])
def test_sweep_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        f.scaled_limit_sweep(lambda s: (1.0, 0.0), grid)
