"""QR spectrum estimates against exact rates, form symmetry, and an i.i.d. oracle."""

import math
from fractions import Fraction

import numpy as np
import pytest
import scipy.linalg

from cocyclelab.base import SymbolSequence, TorusPoint, cat_map, full_shift
from cocyclelab.cocycles import (
    constant_cocycle,
    fourier_cocycle,
    locally_constant,
    product,
)
from cocyclelab.errors import ConfigError, NumericalError
from cocyclelab.groups import lie_from_coords, make_group
from cocyclelab.spectrum import _mc_core_width, lyapunov_spectrum, top_exponent_mc

SL2 = make_group("SL", "real", 2)
SP4 = make_group("Sp", "real", 4)
SYS_CAT = cat_map()
SYS_SHIFT = full_shift(2)
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])
TAU = math.log((3.0 + math.sqrt(5.0)) / 2.0)
P0 = TorusPoint(Fraction(3, 7), Fraction(2, 9))
SEQ0 = SymbolSequence(2, (0, 1), (1, 0, 1, 1), (1, 0), 1)


def sp4_fourier(scale):
    def coef(s):
        c = np.random.default_rng(s).normal(size=10) * scale
        return lie_from_coords(SP4, c).entries

    return fourier_cocycle(
        SP4, [(1, 0, "cos", coef(1)), (0, 1, "sin", coef(2)), (1, 1, "cos", coef(3))]
    )


def swap_table():
    # 0 stretches the axes, 1 is a quarter turn, drawn i.i.d. by the shift
    return {(0,): np.diag([2.0, 0.5]), (1,): ROT.copy()}


def test_constant_diag_spectrum_is_exact_on_both_bases():
    A = constant_cocycle(SL2, np.diag([2.0, 0.5]))
    for sys, x in ((SYS_CAT, P0), (SYS_SHIFT, SEQ0)):
        rep = lyapunov_spectrum(A, sys, x, 1000)
        assert abs(rep.exponents[0] - math.log(2.0)) <= 1e-12
        assert abs(rep.exponents[1] + math.log(2.0)) <= 1e-12
        assert rep.sum_residual <= 1e-12


def test_cat_matrix_rate_with_warmup():
    A = constant_cocycle(SL2, [[2, 1], [1, 1]])
    rep = lyapunov_spectrum(A, SYS_CAT, P0, 1000, warmup=100)
    assert abs(rep.exponents[0] - TAU) <= 1e-10
    assert rep.sum_residual <= 1e-12
    assert list(rep.exponents) == sorted(rep.exponents, reverse=True)


def test_warmup_removes_cold_start_alignment_bias():
    # identity initial frame is misaligned with the expanding direction, which
    # biases the average by O(1/n); a short warmup removes it entirely
    A = constant_cocycle(SL2, [[2, 1], [1, 1]])
    cold = abs(lyapunov_spectrum(A, SYS_CAT, P0, 20_000).exponents[0] - TAU)
    warm = abs(lyapunov_spectrum(A, SYS_CAT, P0, 20_000, warmup=100).exponents[0] - TAU)
    assert cold > 1e-8
    assert warm < 1e-10


def test_warmup_length_does_not_matter_once_aligned():
    A = constant_cocycle(SL2, [[2, 1], [1, 1]])
    a = lyapunov_spectrum(A, SYS_CAT, P0, 1000, warmup=100)
    b = lyapunov_spectrum(A, SYS_CAT, P0, 1000, warmup=300)
    assert abs(a.exponents[0] - b.exponents[0]) <= 1e-13


def test_rotation_valued_exponents_vanish():
    A = fourier_cocycle(SL2, [(1, 0, "cos", 0.3 * ROT), (0, 1, "sin", 0.2 * ROT)])
    rep = lyapunov_spectrum(A, SYS_CAT, P0, 10_000)
    assert max(abs(v) for v in rep.exponents) < 1e-12


def test_symplectic_spectrum_pairing():
    # sp(4) values force lambda_i + lambda_{5-i} = 0; the drift term bounds
    # how much of the residual is finite-time noise
    rep = lyapunov_spectrum(sp4_fourier(0.5), SYS_CAT, P0, 10_000, warmup=100)
    lam = rep.exponents
    assert list(lam) == sorted(lam, reverse=True)
    sym = max(abs(lam[i] + lam[3 - i]) for i in range(4))
    assert sym <= 3.0 * rep.window_drift
    assert rep.sum_residual <= 1e-12


def test_top_exponent_agrees_with_product_norm_route():
    A = sp4_fourier(0.25)
    n = 10_000
    sp = product(A, SYS_CAT, P0, n)
    M, ls = (sp.matrix, sp.log_scale) if hasattr(sp, "log_scale") else (sp, 0.0)
    top_norm = (ls + math.log(np.linalg.norm(np.asarray(M, dtype=float), 2))) / n
    rep = lyapunov_spectrum(A, SYS_CAT, P0, n)
    assert abs(top_norm - rep.exponents[0]) <= 2.0 * rep.window_drift + 2e-4


def test_estimates_stabilize_as_n_grows():
    A = sp4_fourier(0.5)
    r1 = lyapunov_spectrum(A, SYS_CAT, P0, 2000, warmup=100)
    r2 = lyapunov_spectrum(A, SYS_CAT, P0, 20_000, warmup=100)
    assert abs(r1.exponents[0] - r2.exponents[0]) <= r1.window_drift + 1e-3
    assert r2.window_drift < r1.window_drift


def test_complex_group_boost_rate():
    SU11 = make_group("SU_pq", "complex", 2, signature=(1, 1))
    B = scipy.linalg.expm(np.array([[0.0, 0.3], [0.3, 0.0]], dtype=complex))
    rep = lyapunov_spectrum(constant_cocycle(SU11, B), SYS_SHIFT, SEQ0, 1000, warmup=100)
    assert abs(rep.exponents[0] - 0.3) <= 1e-12
    assert abs(rep.exponents[0] + rep.exponents[1]) <= 1e-12


def test_spectrum_input_validation():
    A = constant_cocycle(SL2, np.diag([2.0, 0.5]))
    with pytest.raises(ConfigError):
        lyapunov_spectrum(A, SYS_CAT, P0, 0)
    with pytest.raises(ConfigError):
        lyapunov_spectrum(A, SYS_CAT, P0, 100, warmup=-1)
    with pytest.raises(ConfigError):
        top_exponent_mc(A, SYS_CAT, n=100, trials=1, seed=0)


def test_overflow_reports_offending_step():
    A = fourier_cocycle(SL2, [(1, 0, "cos", 800.0 * np.diag([1.0, -1.0]))])
    with pytest.raises(NumericalError, match="step"):
        lyapunov_spectrum(A, SYS_CAT, P0, 2000)


def test_mc_is_deterministic_and_thread_invariant():
    A = fourier_cocycle(SL2, [(1, 0, "cos", 0.4 * np.diag([1.0, -1.0]))])
    a = top_exponent_mc(A, SYS_CAT, n=500, trials=4, seed=99)
    b = top_exponent_mc(A, SYS_CAT, n=500, trials=4, seed=99)
    c = top_exponent_mc(A, SYS_CAT, n=500, trials=4, seed=99, threads=2)
    assert a.per_trial == b.per_trial == c.per_trial
    assert a.mean == c.mean and a.std_error == c.std_error
    d = top_exponent_mc(A, SYS_CAT, n=500, trials=4, seed=100)
    assert d.per_trial != a.per_trial


def test_mc_core_covers_every_symbol_read():
    # sample() centers the origin, so the right half of the core alone must
    # cover the warmup plus the full run plus the window overhang
    for window in (0, 1, 2):
        table_size = 2 ** (2 * window + 1)
        A = locally_constant(
            SL2,
            2,
            window,
            {
                tuple(map(int, np.binary_repr(i, 2 * window + 1))): np.eye(2)
                for i in range(table_size)
            },
        )
        for n, warmup in ((300, 0), (1000, 50)):
            W = _mc_core_width(A, n, warmup)
            assert W - W // 2 >= warmup + n + window
            assert W // 2 >= window


def test_mc_runs_on_shift_with_window():
    table = {}
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                s = 0.3 * a - 0.2 * c
                t = 1.5 if b else 1.0 / 1.5
                table[(a, b, c)] = np.array([[t, s], [0.0, 1.0 / t]])
    A = locally_constant(SL2, 2, 1, table)
    res = top_exponent_mc(A, SYS_SHIFT, n=300, trials=3, seed=5, warmup=20)
    assert all(math.isfinite(v) for v in res.per_trial)
    assert res.trials == 3 and res.n == 300


def walk_oracle(n, seed):
    """Exact top-exponent estimate for the swap table, without any linear algebra.

    The quarter turn permutes the coordinate axes and diag(2, 1/2) doubles
    one of them, so the triangularized frame stays axis aligned and the top
    QR increment is +-log 2 on each 0-symbol, 0 on each 1-symbol, with the
    sign flipping at every quarter turn seen so far.  The estimate is then
    |S| log 2 / n for the signed count S.  The true exponent is 0.
    """
    bits = np.random.default_rng(seed).integers(0, 2, size=n)
    parity = np.cumsum(bits) - bits
    eps = 1 - 2 * (parity & 1)
    S = int(np.sum(np.where(bits == 0, eps, 0)))
    return abs(S) * math.log(2.0) / n


def test_walk_oracle_frozen_values():
    assert walk_oracle(10_000_000, 20260823) == 0.0001571364658329396
    assert walk_oracle(1_000_000, 1) == 0.0001316979643063896


def test_iid_top_exponent_matches_walk_oracle():
    # S is asymptotically N(0, n), so the estimator mean is
    # sqrt(2/(pi n)) log 2 even though the true exponent is 0; the slack
    # floor absorbs small-sample skew of the folded mean over 8 trials
    n, trials = 600_000, 8
    A = locally_constant(SL2, 2, 0, swap_table())
    res = top_exponent_mc(A, SYS_SHIFT, n=n, trials=trials, seed=20260823)
    expected = math.sqrt(2.0 / (math.pi * n)) * math.log(2.0)
    assert abs(res.mean - expected) <= 4.0 * max(res.std_error, 1e-4)
    assert res.mean <= 2e-3
    assert min(res.per_trial) >= 0.0
