"""Base dynamics: cat map, full shift, brackets, periodic/homoclinic points."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from cocyclelab.base import (
    BOX_RADIUS,
    CAT_TAU,
    STABLE_SLOPE,
    SymbolSequence,
    TorusPoint,
    UNSTABLE_SLOPE,
    bracket,
    cat_map,
    dist_to_stable_line,
    dist_to_unstable_line,
    distance,
    format_point,
    full_shift,
    homoclinic_point,
    orbit_coords,
    orbit_symbols,
    parse_point,
    periodic_point,
    sample,
    step,
)
from cocyclelab.errors import ConfigError

CAT = cat_map()
SHIFT = full_shift(2)


def seq(left, core, right, origin=0, k=2):
    return SymbolSequence(k, left, core, right, origin)


ZERO_SEQ = seq([0], [0], [0])


def test_step_fixed_points():
    origin = TorusPoint(Fraction(0), Fraction(0))
    assert step(CAT, origin, 5) == origin
    assert step(SHIFT, ZERO_SEQ, -3) == ZERO_SEQ


def test_step_exact_rational():
    p = TorusPoint(Fraction(1, 5), Fraction(2, 5))
    q = step(CAT, p, 1)
    assert (q.x, q.y) == (Fraction(4, 5), Fraction(3, 5))
    assert step(CAT, q, -1) == p


def test_step_group_action_exact():
    rng = np.random.default_rng(0)
    pts = [TorusPoint(Fraction(int(a), 37), Fraction(int(b), 41))
           for a, b in rng.integers(0, 30, size=(10, 2))]
    pts.append(seq([0, 1], [1, 0, 0, 1], [1, 1, 0], origin=2))
    for p in pts:
        sys = CAT if isinstance(p, TorusPoint) else SHIFT
        for m, n in rng.integers(-10, 11, size=(10, 2)):
            assert step(sys, step(sys, p, int(m)), int(n)) == step(sys, p, int(m + n))


def test_bracket_idempotent_on_diagonal():
    p = TorusPoint(0.3, 0.7)
    w = bracket(CAT, p, p)
    assert distance(CAT, w, p) < 1e-12
    s = seq([1, 0], [0, 1, 1], [0], origin=1)
    assert bracket(SHIFT, s, s) == s


def test_bracket_shift_splice():
    y = seq([1], [0], [1])  # ...111 0 111...
    z = ZERO_SEQ            # ...000 0 000...
    w = bracket(SHIFT, y, z)
    assert w.window(-3, 3) == (1, 1, 1, 0, 0, 0, 0)
    assert w == seq([1], [0], [0])


def test_bracket_requires_common_box():
    with pytest.raises(ConfigError, match="product box"):
        bracket(SHIFT, seq([0], [1], [0]), ZERO_SEQ)
    with pytest.raises(ConfigError, match="product box"):
        bracket(CAT, TorusPoint(0.0, 0.0), TorusPoint(0.5, 0.5))


def test_bracket_catmap_lands_on_stable_line():
    origin = TorusPoint(Fraction(0), Fraction(0))
    z = TorusPoint(0.05, -0.11)
    w = bracket(CAT, origin, z)
    # w - z must be parallel to the stable eigendirection.
    dx = (float(w.x) - float(z.x) + 0.5) % 1.0 - 0.5
    dy = (float(w.y) - float(z.y) + 0.5) % 1.0 - 0.5
    unstable_part = (-STABLE_SLOPE * dx + dy) / math.sqrt(5.0)
    assert abs(unstable_part) < 1e-12
    # and w - origin parallel to the unstable eigendirection.
    wx, wy = w.floats()
    assert abs(wy - UNSTABLE_SLOPE * wx) < 1e-12 or dist_to_unstable_line(w) < 1e-12


def test_bracket_equivariance_on_shift():
    y = seq([1, 0], [0, 1, 1], [1], origin=0)   # y0=0, y1=1
    z = seq([0], [0, 1], [0], origin=0)          # z0=0, z1=1
    lhs = step(SHIFT, bracket(SHIFT, y, z), 1)
    rhs = bracket(SHIFT, step(SHIFT, y, 1), step(SHIFT, z, 1))
    assert lhs == rhs


def test_periodic_point_examples():
    p, kappa, corrected = periodic_point(CAT, ("0", "0"))
    assert (p.x, p.y, kappa, corrected) == (0, 0, 1, False)

    p, kappa, corrected = periodic_point(SHIFT, "01")
    assert kappa == 2 and not corrected
    assert p.window(0, 3) == (0, 1, 0, 1)
    assert step(SHIFT, p, 2) == p

    p, kappa, corrected = periodic_point(CAT, ("1/5", "2/5"))
    assert kappa == 2
    assert step(CAT, p, 2) == p and step(CAT, p, 1) != p


def test_periodic_point_corrects_nonminimal_word():
    p, kappa, corrected = periodic_point(SHIFT, "0101")
    assert kappa == 2 and corrected


def test_homoclinic_point_shift():
    p, _, _ = periodic_point(SHIFT, "0")
    z, q = homoclinic_point(SHIFT, p, depth=1)
    assert q == 1
    assert z.window(-3, 3) == (0, 0, 0, 1, 0, 0, 0)
    # z in W^u_loc(p): agreement at n <= -1.
    assert all(z.get(n) == p.get(n) for n in range(-40, 0))
    # f^q(z) in W^s_loc(p): agreement at n >= 0 after shifting by q.
    fz = step(SHIFT, z, q)
    assert all(fz.get(n) == p.get(n) for n in range(0, 40))
    assert z != p and z != step(SHIFT, z, q)


def test_homoclinic_point_shift_period_two():
    p, kappa, _ = periodic_point(SHIFT, "01")
    z, q = homoclinic_point(SHIFT, p, depth=1)
    assert q % kappa == 0
    assert all(z.get(n) == p.get(n) for n in range(-30, 0))
    fz = step(SHIFT, z, q)
    assert all(fz.get(n) == p.get(n) for n in range(0, 30))
    assert any(z.get(n) != p.get(n) for n in range(0, q))


def test_homoclinic_point_catmap():
    p, _, _ = periodic_point(CAT, (0, 0))
    z, q = homoclinic_point(CAT, p, depth=1)
    assert z != p
    assert dist_to_unstable_line(z) < 1e-12
    assert distance(CAT, z, p) <= BOX_RADIUS
    fz = step(CAT, z, q)
    assert dist_to_stable_line(fz) < 1e-12
    assert distance(CAT, fz, p) <= BOX_RADIUS


def test_homoclinic_depth_validation():
    p, _, _ = periodic_point(SHIFT, "0")
    with pytest.raises(ConfigError, match="depth"):
        homoclinic_point(SHIFT, p, depth=0)


def test_homoclinic_catmap_requires_fixed_point():
    p, _, _ = periodic_point(CAT, ("1/5", "2/5"))
    with pytest.raises(ConfigError, match="fixed point"):
        homoclinic_point(CAT, p)


def test_distance_shift():
    y = seq([0], [0], [0])
    z = seq([0], [0, 1], [0], origin=0)  # differs first at index 1
    assert distance(SHIFT, y, z) == 0.5
    assert distance(SHIFT, y, y) == 0.0
    assert distance(SHIFT, seq([0], [1], [0]), y) == 1.0


def test_contraction_rate_on_stable_segment():
    # Direct float iteration is meaningful only while the contracted distance
    # stays above the rounding noise amplified along the unstable direction
    # (~eps * lambda^n); beyond that the declared rate is checked against an
    # independent eigenvalue computation in well-conditioned coordinates.
    delta = 1e-3
    nrm = math.hypot(1.0, STABLE_SLOPE)
    y = TorusPoint(0.37, 0.52)
    z = TorusPoint(0.37 + delta / nrm, 0.52 + delta * STABLE_SLOPE / nrm)
    d0 = distance(CAT, y, z)
    for n in range(1, 13):
        dn = distance(CAT, step(CAT, y, n), step(CAT, z, n))
        assert dn <= (1 + 1e-6) * math.exp(-n * CAT_TAU) * d0
    mu = min(abs(np.linalg.eigvals(np.array([[2.0, 1.0], [1.0, 1.0]]))))
    for n in range(1, 31):
        assert mu ** n * d0 <= (1 + 1e-6) * math.exp(-n * CAT_TAU) * d0


def test_local_product_structure_roundtrip():
    rng = np.random.default_rng(42)
    # FullShift: exact round trip through the bracket pair.
    for _ in range(50):
        x, w = sample(SHIFT, rng, 2, core_width=24)
        if x.get(0) != w.get(0):
            continue
        a = bracket(SHIFT, x, w)
        b = bracket(SHIFT, w, x)
        assert bracket(SHIFT, b, a) == w
    # CatMap: round trip within float tolerance.
    for _ in range(50):
        x = TorusPoint(0.4, 0.6)
        w = TorusPoint(0.4 + rng.uniform(-0.05, 0.05), 0.6 + rng.uniform(-0.05, 0.05))
        a = bracket(CAT, x, w)
        b = bracket(CAT, w, x)
        w2 = bracket(CAT, b, a)
        assert distance(CAT, w, w2) < 1e-9


def test_sample_deterministic():
    a = sample(CAT, np.random.default_rng(9), 5)
    b = sample(CAT, np.random.default_rng(9), 5)
    assert a == b
    c = sample(SHIFT, np.random.default_rng(9), 5)
    d = sample(SHIFT, np.random.default_rng(9), 5)
    assert c == d


def test_sample_bernoulli_frequency():
    pts = sample(SHIFT, np.random.default_rng(123), 10_000)
    freq0 = sum(1 for p in pts if p.get(0) == 0) / len(pts)
    assert 0.47 <= freq0 <= 0.53


def test_sample_lebesgue_mean():
    pts = sample(CAT, np.random.default_rng(7), 10_000)
    mean_x = sum(p.floats()[0] for p in pts) / len(pts)
    assert 0.47 <= mean_x <= 0.53


def test_measure_preservation_histogram():
    rng = np.random.default_rng(11)
    pts = rng.random((100_000, 2))
    pushed = np.column_stack(((2 * pts[:, 0] + pts[:, 1]) % 1.0,
                              (pts[:, 0] + pts[:, 1]) % 1.0))
    for col in range(2):
        h, _ = np.histogram(pushed[:, col], bins=10, range=(0, 1), density=False)
        l1 = np.abs(h / len(pushed) - 0.1).sum()
        assert l1 < 0.05


def test_orbit_coords_matches_step():
    p = TorusPoint(0.2, 0.9)
    coords = orbit_coords(CAT, p, 12)
    q = p
    for i in range(12):
        np.testing.assert_allclose(coords[i], q.floats(), atol=5e-13)
        q = step(CAT, q, 1)


def test_orbit_symbols_window():
    s = seq([1, 0], [0, 1, 1], [1], origin=1)
    np.testing.assert_array_equal(orbit_symbols(SHIFT, s, -3, 3),
                                  [s.get(n) for n in range(-3, 4)])


def test_point_text_roundtrip():
    for text in ("torus:1/5,2/5", "torus:0.25,0.75", "seq:2:01|100@1|1"):
        p = parse_point(text)
        assert parse_point(format_point(p)) == p
    assert parse_point("torus:1/5,2/5").exact


def test_parse_point_errors():
    for bad in ("torus:1", "torus:a,b", "seq:2:01", "ball:1,2", "seq:11:0|0@0|0"):
        with pytest.raises(ConfigError):
            parse_point(bad)


def test_full_shift_validation():
    with pytest.raises(ConfigError, match="weights"):
        full_shift(2, [0.4, 0.7])
    with pytest.raises(ConfigError, match="positive"):
        full_shift(2, [1.0, 0.0])
    with pytest.raises(ConfigError):
        full_shift(1)


def test_sequence_equality_across_representations():
    a = seq([0, 1], [0, 1], [0, 1], origin=0)
    b = seq([1, 0], [1, 0, 1], [0, 1], origin=1)
    assert a == b
    assert periodic_point(SHIFT, "01").point == a
