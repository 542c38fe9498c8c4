"""Homoclinic site data, the loop map, its Jacobian, and positivity sweeps."""

import math
import warnings

import numpy as np
import pytest
import scipy.linalg

from cocyclelab.base import (
    UNSTABLE_SLOPE,
    cat_map,
    full_shift,
    point_distance,
    sample,
    step,
)
from cocyclelab.cocycles import (
    Bump,
    constant_cocycle,
    fourier_cocycle,
    locally_constant,
    perturbed,
    rho,
)
from cocyclelab.errors import ConfigError, NumericalError, RefusalError
from cocyclelab.genericity import (
    build_homoclinic_data,
    jacobian_mode_agreement,
    phi,
    phi_jacobian,
    positivity_sweep,
)
from cocyclelab.groups import contains, lie_from_coords, make_group

SL2 = make_group("SL", "real", 2)
SYS_CAT = cat_map()
SYS_SHIFT = full_shift(2)
ROT = np.array([[0.0, -1.0], [1.0, 0.0]])


def rot(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s], [s, c]])


def shift_identity():
    I2 = np.eye(2)
    return locally_constant(SL2, 2, 0, {(0,): I2, (1,): I2})


def near_identity_table(seed, scale=0.05):
    rng = np.random.default_rng(seed)

    def g():
        return scipy.linalg.expm(lie_from_coords(SL2, rng.normal(size=3) * scale).entries)

    return locally_constant(SL2, 2, 0, {(0,): g(), (1,): g()})


ROTATION_CAT = fourier_cocycle(SL2, [(1, 0, "cos", 0.05 * ROT)])


class TestBuildData:
    def test_one_site_shift(self):
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        assert data.l == 1 and data.exact
        s = data.sites[0]
        assert s.p.window(-3, 3) == (0,) * 7
        assert s.kappa == 1 and s.q == 1
        assert s.z.window(-2, 2) == (0, 0, 1, 0, 0)
        assert s.p_radius == 0.5 and s.z_radius == 0.5

    def test_two_sites_shift(self):
        data = build_homoclinic_data(SYS_SHIFT, 2, 1)
        s0, s1 = data.sites
        assert s1.p.window(0, 1) == (0, 1)
        assert s1.kappa == 2 and s1.q == 2
        # z deviates from the 01-pattern only at index 0
        assert s1.z.window(-2, 2) == (0, 1, 1, 1, 0)
        assert s0.z_radius == 0.25  # shrunk: f(p_1) is 2^-2 from z_0

    def test_deterministic(self):
        a = build_homoclinic_data(SYS_SHIFT, 2, 1)
        b = build_homoclinic_data(SYS_SHIFT, 2, 1)
        assert a.sites == b.sites and a.horizon == b.horizon

    @pytest.mark.parametrize("l", [1, 2, 3])
    def test_metric_disjointness_oracle(self, l):
        # re-derive the support rules with point_distance only: each ball
        # excludes every orbit point it must, independent of the cylinder
        # arithmetic used to build the radii
        data = build_homoclinic_data(SYS_SHIFT, l, 1)
        N = data.horizon + 2
        orbits = []
        for s in data.sites:
            orbits.append([step(SYS_SHIFT, s.p, a) for a in range(s.kappa)])
        for j, sj in enumerate(data.sites):
            for i, si in enumerate(data.sites):
                for a, ph in enumerate(orbits[i]):
                    if (i, a) != (j, 0):
                        assert point_distance(ph, sj.p) >= sj.p_radius
                    assert point_distance(ph, sj.z) >= sj.z_radius
                for n in range(-N, N + 1):
                    w = step(SYS_SHIFT, si.z, n)
                    if i != j or 0 <= n < si.q:
                        assert point_distance(w, sj.p) >= sj.p_radius
                    if (i, n) != (j, 0):
                        assert point_distance(w, sj.z) >= sj.z_radius

    def test_cat_site(self):
        data = build_homoclinic_data(SYS_CAT, 1, 1)
        assert not data.exact and data.horizon >= data.sites[0].q
        s = data.sites[0]
        assert s.kappa == 1
        zx, zy = s.z.floats()
        assert zy / zx == pytest.approx(UNSTABLE_SLOPE, rel=1e-12)
        assert s.p_radius > 0 and s.z_radius > 0

    def test_errors(self):
        with pytest.raises(ConfigError):
            build_homoclinic_data(SYS_SHIFT, 0, 1)
        with pytest.raises(ConfigError):
            build_homoclinic_data(SYS_SHIFT, 1, 0)
        with pytest.raises(ConfigError, match="full shift"):
            build_homoclinic_data(SYS_CAT, 2, 1)


class TestPhi:
    def test_window0_values_are_table_entries(self):
        # p = 0^inf and z deviating once: the period product is the 0-entry
        # and the transition product collapses to the 1-entry, holonomies
        # frozen at the identity
        u, v = rot(0.3), rot(-0.2)
        B = locally_constant(SL2, 2, 0, {(0,): u, (1,): v})
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        g = phi(B, data)
        assert np.array_equal(g[0], u)
        assert np.array_equal(g[1], v)

    def test_identity_cocycle(self):
        data = build_homoclinic_data(SYS_SHIFT, 2, 1)
        for g in phi(shift_identity(), data):
            assert np.array_equal(g, np.eye(2))

    def test_constant_gives_powers(self):
        g0 = rot(0.7)
        B = constant_cocycle(SL2, g0)
        data = build_homoclinic_data(SYS_SHIFT, 2, 1)
        vals = phi(B, data)
        for g, n in zip(vals, (1, 2, 1, 2)):  # kappa_1, kappa_2, q_1, q_2
            assert np.allclose(g, np.linalg.matrix_power(g0, n), atol=1e-13)

    def test_outputs_in_group(self):
        data = build_homoclinic_data(SYS_CAT, 1, 1)
        for g in phi(ROTATION_CAT, data):
            assert contains(SL2, g, tol=1e-8).ok

    def test_refuses_unbunched(self):
        B = constant_cocycle(SL2, np.diag([2.0, 0.5]))
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        with pytest.raises(RefusalError, match="bunched"):
            phi(B, data)

    def test_nonconvergence_names_site(self):
        data = build_homoclinic_data(SYS_CAT, 1, 1)
        with pytest.raises(NumericalError, match="site 0"):
            phi(ROTATION_CAT, data, tol=1e-15, n_max=2)


class TestJacobian:
    def test_identity_closed_form(self):
        # With B = I every factor commutes, so the whole Jacobian has a
        # closed form: diagonal blocks are the identity and the holonomy
        # block is -c I with c the total bump-profile deficit along the
        # stable and unstable tails (distances 2^-(i+1) and 2^-i, radius
        # one half).
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        c = sum(1.0 - rho(2.0 ** -(i + 1) / 0.5) for i in range(60))
        c += sum(1.0 - rho(2.0 ** -i / 0.5) for i in range(1, 60))
        assert abs(c - 2.7378517785839127) < 1e-12
        ja = phi_jacobian(shift_identity(), data, mode="analytic")
        D = 3
        assert np.allclose(ja.matrix[:D, :D], np.eye(D), atol=1e-12)
        assert np.allclose(ja.matrix[D:, D:], np.eye(D), atol=1e-12)
        assert np.all(ja.matrix[:D, D:] == 0.0)
        assert np.allclose(ja.matrix[D:, :D], -c * np.eye(D), atol=1e-8)
        assert ja.rank == 6

    def test_identity_fd_matches(self):
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        ja = phi_jacobian(shift_identity(), data, mode="analytic")
        jf = phi_jacobian(shift_identity(), data, mode="finite_difference")
        assert jacobian_mode_agreement(ja, jf) < 1e-6
        assert jf.block_norms["upper_right"] == 0.0

    @pytest.mark.parametrize("l", [1, 2])
    def test_near_identity_full_rank(self, l):
        B = near_identity_table(11)
        data = build_homoclinic_data(SYS_SHIFT, l, 1)
        ja = phi_jacobian(B, data, mode="analytic")
        assert ja.rank == 2 * l * 3
        s = ja.singular_values
        assert s[-1] / s[0] > 1e-6
        assert ja.block_norms["upper_right"] == 0.0
        jf = phi_jacobian(B, data, mode="finite_difference", h=1e-4)
        assert jf.block_norms["upper_right"] == 0.0
        assert jacobian_mode_agreement(ja, jf) < 1e-6

    def test_cat_modes_agree(self):
        data = build_homoclinic_data(SYS_CAT, 1, 1)
        ja = phi_jacobian(ROTATION_CAT, data, mode="analytic")
        jf = phi_jacobian(ROTATION_CAT, data, mode="finite_difference")
        assert ja.rank == 6
        assert jacobian_mode_agreement(ja, jf) < 1e-6

    def test_rank_persists_under_perturbation(self):
        # submersion property is open: full rank survives random bumps of
        # sweep size
        B = near_identity_table(3)
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        rng = np.random.default_rng(20)
        for _ in range(10):
            centers = sample(SYS_SHIFT, rng, 2, core_width=32)
            bumps = [
                Bump(c, 0.25, lie_from_coords(SL2, rng.normal(size=3)).entries, 1e-2)
                for c in centers
            ]
            ja = phi_jacobian(perturbed(B, bumps), data, mode="analytic")
            assert ja.rank == 6
            assert ja.singular_values[-1] / ja.singular_values[0] > 1e-6

    def test_mode_validation(self):
        data = build_homoclinic_data(SYS_SHIFT, 1, 1)
        with pytest.raises(ConfigError):
            phi_jacobian(shift_identity(), data, mode="spectral")
        with pytest.raises(ConfigError):
            phi_jacobian(shift_identity(), data, h=0.0)


class TestSweep:
    def test_deterministic_and_thread_invariant(self):
        a = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 4, 7, 20000, threads=1)
        b = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 4, 7, 20000, threads=3)
        assert a == b
        c = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 4, 8, 20000)
        assert a != c

    def test_rotation_base_turns_positive(self):
        rep = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 5, 505, 20000)
        assert rep.fraction == 1.0
        for t in rep.trials:
            assert t.lambda1 > 1e-3
            assert 1e-4 < t.holder_distance < 5.0
            assert t.bunched
            assert t.amplitude <= 1e-2

    def test_positive_trials_survive_doubling(self):
        short = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 4, 7, 20000)
        long = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 4, 7, 40000)
        for a, b in zip(short.trials, long.trials):
            assert a.amplitude == b.amplitude  # same perturbation redrawn
            if a.positive:
                assert b.lambda1 > short.threshold / 2.0

    def test_zero_epsilon_zero_fraction(self):
        rep = positivity_sweep(ROTATION_CAT, SYS_CAT, 0.0, 4, 7, 20000)
        assert rep.fraction == 0.0
        for t in rep.trials:
            assert abs(t.lambda1) < 1e-8
            assert t.holder_distance == 0.0

    def test_isotropic_mode_runs(self):
        rep = positivity_sweep(ROTATION_CAT, SYS_CAT, 1e-2, 3, 7, 5000,
                               direction_mode="isotropic")
        assert rep.direction_mode == "isotropic"
        assert 0.0 <= rep.fraction <= 1.0

    def test_breakdown_logged_and_excluded(self):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rep = positivity_sweep(ROTATION_CAT, SYS_CAT, 600.0, 2, 7, 200)
        assert rep.failures == 2
        assert rep.trials == ()
        assert rep.fraction == 0.0

    def test_shift_base_supported(self):
        A = locally_constant(SL2, 2, 0, {(0,): rot(0.3), (1,): rot(-0.2)})
        rep = positivity_sweep(A, SYS_SHIFT, 1e-2, 2, 7, 4000)
        assert len(rep.trials) == 2

    def test_validation(self):
        for kwargs in (
            dict(epsilon=-1.0),
            dict(trials=0),
            dict(n=0),
            dict(direction_mode="radial"),
            dict(threads=0),
        ):
            args = dict(epsilon=1e-2, trials=2, seed=1, n=100)
            args.update(kwargs)
            with pytest.raises(ConfigError):
                positivity_sweep(ROTATION_CAT, SYS_CAT, args["epsilon"],
                                 args["trials"], args["seed"], args["n"],
                                 direction_mode=args.get("direction_mode", "coherent"),
                                 threads=args.get("threads", 1))
