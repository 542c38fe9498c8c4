"""Config-driven experiment runner.

Each subcommand reads one TOML config, runs the referenced computation and
writes a CSV data file plus a JSON summary (seed, versions, config hash,
wall time) into the output directory.  Exit codes: 0 success, 2 config
error, 3 numerical failure, 4 hypothesis refusal.  All floats are printed
with shortest-roundtrip repr so identical config + seed gives identical
bytes, for any --threads.
"""

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import scipy
import scipy.linalg

from . import __version__
from .base import (
    SymbolSequence,
    cat_map,
    full_shift,
    periodic_point,
    point_distance,
    sample,
    step,
)
from .cocycles import Bump, constant_cocycle, locally_constant, perturbed, product
from .config import base_point, build_base, build_cocycle, build_group, load_config
from .errors import ConfigError, NumericalError, RefusalError
from .genericity import (
    build_homoclinic_data,
    jacobian_mode_agreement,
    phi,
    phi_jacobian,
    positivity_sweep,
)
from .groups import contains, lie_basis, lie_from_coords, make_group
from .holonomy import (
    domination_check,
    stable_holonomy,
    stable_holonomy_derivative,
    unstable_holonomy,
    unstable_holonomy_derivative,
)
from .projective import (
    MeasureTestOptions,
    box_partition,
    common_invariant_measure_test,
    disintegration_invariance_test,
    empirical_measure,
    leaf_pairs,
    measure_distance,
)
from .spectrum import _mc_core_width, lyapunov_spectrum

OUTDIR_ENV = "COCYCLELAB_OUTDIR"
MODE_AGREE_TOL = 1e-3  # analytic vs finite-difference Jacobian flag level

COMMANDS = (
    "lyap",
    "holonomy",
    "holonomy-deriv-check",
    "domination",
    "phi-rank",
    "invariant-measure",
    "disintegration",
    "sweep",
)


# --- output plumbing --------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return str(v)


def write_csv(path: Path, schema: str, version: int, cols, rows):
    lines = [f"# schema={schema}/{version}", ",".join(cols)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _config_hash(raw: dict, seed: int) -> str:
    payload = {k: v for k, v in raw.items() if k != "run"}
    payload["seed"] = seed
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _write_summary(outdir, command, cfg_hash, seed, threads, wall, outputs, extra):
    payload = {
        "command": command,
        "config_hash": cfg_hash,
        "seed": seed,
        "threads": threads,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "cocyclelab": __version__,
        },
        "wall_time_s": round(wall, 6),
        "outputs": outputs,
    }
    payload.update(extra)
    path = outdir / (command.replace("-", "_") + "_summary.json")
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _point_str(x) -> str:
    if isinstance(x, SymbolSequence):
        return "".join(str(s) for s in x.window(-8, 8))
    a, b = x.floats()
    return f"{a!r};{b!r}"


def _mat_cols(tag: str, d: int):
    return [f"{tag}_{i + 1}_{j + 1}" for i in range(d) for j in range(d)]


def _jsonable(m):
    if m is None:
        return None
    arr = np.asarray(m)
    if np.iscomplexobj(arr):
        return [[[float(v.real), float(v.imag)] for v in row] for row in arr]
    return [[float(v) for v in row] for row in arr]


# --- sections ---------------------------------------------------------------


def _sec(raw, name) -> dict:
    return raw.get(name, {})


def _pos_int(sec, key, default, where):
    v = sec.get(key, default)
    if v is None:
        raise ConfigError(f"{where} needs a '{key}' key")
    v = int(v)
    if v < 1:
        raise ConfigError(f"{where}.{key} must be >= 1, got {v}")
    return v


def _dyn(raw):
    G = build_group(raw)
    base = build_base(raw)
    A = build_cocycle(raw, G, base)
    return G, base, A


# --- commands ---------------------------------------------------------------


def _cmd_lyap(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "lyap")
    n = _pos_int(sec, "n", None, "[lyap]")
    warmup = int(sec.get("warmup", 0))
    ns = sorted({int(v) for v in sec.get("checkpoints", [n])})
    if any(v < 1 for v in ns):
        raise ConfigError("[lyap].checkpoints must all be >= 1")
    if "x0" in sec:
        x0 = base_point(sec["x0"], base, "[lyap].x0")
    else:
        rng = np.random.default_rng(seed)
        width = _mc_core_width(A, max(ns), warmup)
        x0 = sample(base, rng, 1, core_width=width)[0]
    rows = []
    rep = None
    for ni in ns:
        rep = lyapunov_spectrum(A, base, x0, ni, warmup=warmup)
        rows.append([_point_str(x0), ni, *rep.exponents,
                     rep.sum_residual, rep.window_drift])
    cols = ["x0", "n", *[f"lambda_{i + 1}" for i in range(G.d)],
            "sum_residual", "window_drift"]
    write_csv(outdir / "lyap.csv", "lyap", 1, cols, rows)
    return ["lyap.csv"], {
        "exponents": [float(v) for v in rep.exponents],
        "n": ns[-1],
        "window_drift": float(rep.window_drift),
    }


def _holonomy_for(A, base, x, y, side, tol, n_max):
    if side == "stable":
        return stable_holonomy(A, base, x, y, tol=tol, n_max=n_max)
    return unstable_holonomy(A, base, x, y, tol=tol, n_max=n_max)


def _cmd_holonomy(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "holonomy")
    side = sec.get("side", "both")
    n_pairs = _pos_int(sec, "pairs", 6, "[holonomy]")
    tol = float(sec.get("tol", 1e-10))
    n_max = _pos_int(sec, "n_max", 400, "[holonomy]")
    pairs = leaf_pairs(base, n_pairs, seed, side,
                       float(sec.get("separation", 0.1)),
                       int(sec.get("core_width", 64)))
    rows, gap_rows = [], []
    converged = 0
    for i, (x, y, s) in enumerate(pairs):
        r = _holonomy_for(A, base, x, y, s, tol, n_max)
        converged += r.converged
        rows.append([i, s, r.n_stop, r.cauchy_gap, r.converged, *r.H.flatten()])
        if sec.get("gap_history", False):
            # tail Cauchy gap: max pairwise distance among truncations n
            # through n_stop, so the recorded decay is monotone by
            # construction (the running deque gap is not)
            hs = [_holonomy_for(A, base, x, y, s, 0.0, n).H
                  for n in range(1, r.n_stop + 1)]
            tail = 0.0
            gaps = {}
            for n in range(r.n_stop - 1, 0, -1):
                for m in range(n + 1, r.n_stop + 1):
                    d = float(np.linalg.norm(hs[m - 1] - hs[n - 1], 2))
                    tail = max(tail, d)
                gaps[n] = tail
            for n in sorted(gaps):
                gap_rows.append([i, s, n, gaps[n]])
    cols = ["pair", "kind", "n_stop", "cauchy_gap", "converged",
            *_mat_cols("h", G.d)]
    write_csv(outdir / "holonomy.csv", "holonomy", 1, cols, rows)
    outputs = ["holonomy.csv"]
    if sec.get("gap_history", False):
        write_csv(outdir / "holonomy_gaps.csv", "holonomy_gaps", 1,
                  ["pair", "kind", "n", "cauchy_gap"], gap_rows)
        outputs.append("holonomy_gaps.csv")
    return outputs, {"pairs": len(pairs), "converged": converged}


def _cmd_holonomy_deriv_check(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "holonomy_deriv_check")
    kind = sec.get("kind", "both")
    if kind not in ("stable", "unstable", "both"):
        raise ConfigError(
            f"[holonomy_deriv_check].kind must be stable, unstable or both, "
            f"got {kind!r}")
    depth = _pos_int(sec, "depth", 1, "[holonomy_deriv_check]")
    h = float(sec.get("h", 1e-4))
    if not h > 0.0:
        raise ConfigError(f"[holonomy_deriv_check].h must be > 0, got {h}")
    tol = float(sec.get("tol", 1e-8))
    n_max = _pos_int(sec, "n_max", 400, "[holonomy_deriv_check]")
    data = build_homoclinic_data(base, 1, depth)
    site = data.sites[0]
    if "direction" in sec:
        from .config import as_matrix

        xi = as_matrix(sec["direction"], G, "[holonomy_deriv_check].direction")
    else:
        xi = lie_basis(G)[0].entries
    bump = Bump(site.p, site.p_radius, xi, 1.0)
    y = step(base, site.z, site.q)
    rows = []
    worst = 0.0
    for s in ("stable", "unstable") if kind == "both" else (kind,):
        if s == "stable":
            an = stable_holonomy_derivative(A, base, site.p, y, bump,
                                            tol=tol, n_max=n_max)
            hol = lambda B: stable_holonomy(B, base, site.p, y,
                                            tol=tol / 100.0, n_max=n_max)
        else:
            an = unstable_holonomy_derivative(A, base, site.z, site.p, bump,
                                              tol=tol, n_max=n_max)
            hol = lambda B: unstable_holonomy(B, base, site.p, site.z,
                                              tol=tol / 100.0, n_max=n_max)
        mats = []
        for a in (h, -h):
            r = hol(perturbed(A, [Bump(site.p, site.p_radius, xi, a)]))
            if not r.converged:
                raise NumericalError(
                    f"{s} holonomy at amplitude {a:g} did not converge "
                    f"(gap {r.cauchy_gap:.3e} after {r.n_stop} steps)")
            mats.append(r.H)
        fd = (mats[0] - mats[1]) / (2.0 * h)
        scale = max(np.linalg.norm(an, 2), np.linalg.norm(fd, 2))
        rel = float(np.linalg.norm(an - fd, 2) / scale) if scale > 0 else 0.0
        worst = max(worst, rel)
        rows.append([s, *an.flatten(), *fd.flatten(), rel])
    cols = ["kind", *_mat_cols("a", G.d), *_mat_cols("fd", G.d), "rel_error"]
    write_csv(outdir / "holonomy_deriv.csv", "holonomy_deriv", 1, cols, rows)
    return ["holonomy_deriv.csv"], {"max_rel_error": worst, "fd_step": h}


def _cmd_domination(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "domination")
    if "point" not in sec:
        raise ConfigError("[domination] needs a 'point' key (periodic spec)")
    pp = periodic_point(base, sec["point"])
    cert = domination_check(A, base, pp.point,
                            _pos_int(sec, "block", 1, "[domination]"),
                            sec.get("theta"),
                            _pos_int(sec, "k_max", 16, "[domination]"))
    cols = ["N", "theta", "k_max", "max_log_ratio", "holds", "tau", "bunched"]
    write_csv(outdir / "domination.csv", "domination", 1, cols,
              [[cert.N, cert.theta, cert.k_max, cert.max_log_ratio,
                cert.holds, cert.tau, cert.bunched]])
    return ["domination.csv"], {"holds": cert.holds, "bunched": cert.bunched,
                                "period": pp.period}


def _cmd_phi_rank(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "phi_rank")
    l = _pos_int(sec, "l", 1, "[phi_rank]")
    depth = _pos_int(sec, "depth", 1, "[phi_rank]")
    h = float(sec.get("h", 1e-4))
    tol = float(sec.get("tol", 1e-10))
    n_max = _pos_int(sec, "n_max", 400, "[phi_rank]")
    data = build_homoclinic_data(base, l, depth)
    ja = phi_jacobian(A, data, "analytic", tol=tol, n_max=n_max)
    jf = phi_jacobian(A, data, "finite_difference", h=h, tol=tol, n_max=n_max)
    agree = jacobian_mode_agreement(ja, jf)
    flagged = agree > MODE_AGREE_TOL
    bn = ja.block_norms
    rows = [
        [i, sa, sf, ja.rank, bn["upper_left"], bn["upper_right"],
         bn["lower_left"], bn["lower_right"], agree, flagged]
        for i, (sa, sf) in enumerate(zip(ja.singular_values, jf.singular_values))
    ]
    cols = ["index", "singular_value", "singular_value_fd", "rank",
            "upper_left", "upper_right", "lower_left", "lower_right",
            "mode_agreement", "mode_flagged"]
    write_csv(outdir / "phi_rank.csv", "phi_rank", 1, cols, rows)
    return ["phi_rank.csv"], {
        "rank": ja.rank,
        "full_rank": ja.rank == 2 * l * G.lie_dim,
        "mode_agreement": float(agree),
        "mode_flagged": bool(flagged),
        "l": l,
    }


def _load_pair_matrix(sec, key, G):
    if key in sec and key + "_file" in sec:
        raise ConfigError(f"[invariant_measure]: give '{key}' or '{key}_file', not both")
    if key in sec:
        from .config import as_matrix

        return as_matrix(sec[key], G, f"[invariant_measure].{key}")
    path = sec.get(key + "_file")
    if path is None:
        raise ConfigError(f"[invariant_measure] needs '{key}' or '{key}_file'")
    try:
        m = np.loadtxt(path, dtype=G.dtype, ndmin=2)
    except OSError as e:
        raise ConfigError(f"[invariant_measure].{key}_file: {e}")
    except ValueError as e:
        raise ConfigError(f"[invariant_measure].{key}_file is not a matrix: {e}")
    if m.shape != (G.d, G.d):
        raise ConfigError(
            f"[invariant_measure].{key}_file must be {G.d}x{G.d}, got {m.shape}")
    return m


def _cmd_invariant_measure(raw, seed, threads, outdir):
    G = build_group(raw)
    sec = _sec(raw, "invariant_measure")
    a = _load_pair_matrix(sec, "a", G)
    b = _load_pair_matrix(sec, "b", G)
    for name, m in (("a", a), ("b", b)):
        res = contains(G, m)
        if not res.ok:
            raise ConfigError(
                f"[invariant_measure].{name} is not in the group "
                f"(det residual {res.det_residual:.3e}, "
                f"form residual {res.form_residual:.3e})")
    opts = MeasureTestOptions(
        L=_pos_int(sec, "word_length", 60, "[invariant_measure]"),
        bound=float(sec.get("bound", 1e6)),
        finite_orbit=_pos_int(sec, "finite_orbit", 4, "[invariant_measure]"),
        n_words=_pos_int(sec, "n_words", 400, "[invariant_measure]"),
        seed=seed,
        subspace_tol=float(sec.get("subspace_tol", 1e-8)),
    )
    v = common_invariant_measure_test(a, b, opts)
    cert = {
        "kind": v.kind,
        "stage": v.stage,
        "detail": v.detail,
        "residual": None if v.residual is None else float(v.residual),
        "growth_rate": None if v.growth_rate is None else float(v.growth_rate),
        "witness": _jsonable(v.witness),
    }
    (outdir / "invariant_measure.json").write_text(
        json.dumps(cert, indent=2, sort_keys=True) + "\n")
    return ["invariant_measure.json"], {"verdict": v.kind, "stage": v.stage}


def _cmd_disintegration(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "disintegration")
    pairs = leaf_pairs(base, _pos_int(sec, "pairs", 40, "[disintegration]"),
                       seed, sec.get("side", "both"),
                       float(sec.get("separation", 0.1)))
    partition = box_partition(base, _pos_int(sec, "depth", 3, "[disintegration]"))
    rep = disintegration_invariance_test(
        A, base, pairs, partition, seed,
        n_orbits=_pos_int(sec, "n_orbits", 60, "[disintegration]"),
        n_iter=_pos_int(sec, "n_iter", 800, "[disintegration]"),
        zero_tol=float(sec.get("zero_tol", 1e-2)),
        spectrum_n=_pos_int(sec, "spectrum_n", 4000, "[disintegration]"),
        holonomy_tol=float(sec.get("holonomy_tol", 1e-8)),
        holonomy_n_max=_pos_int(sec, "holonomy_n_max", 400, "[disintegration]"),
        threads=threads,
    )
    rows = [[i, s, d, rep.resolution] for i, (s, d) in enumerate(rep.per_pair)]
    write_csv(outdir / "disintegration.csv", "disintegration", 1,
              ["pair", "kind", "distance", "resolution"], rows)
    return ["disintegration.csv"], {
        "max_distance": float(rep.max_distance),
        "mean_distance": float(rep.mean_distance),
        "resolution": float(rep.resolution),
        "pairs": rep.n_pairs,
        "skipped": rep.skipped,
        "exponents": [float(v) for v in rep.exponents],
    }


def _cmd_sweep(raw, seed, threads, outdir):
    G, base, A = _dyn(raw)
    sec = _sec(raw, "sweep")
    for key in ("epsilon", "trials", "n"):
        if key not in sec:
            raise ConfigError(f"[sweep] needs a '{key}' key")
    rep = positivity_sweep(
        A, base, float(sec["epsilon"]), int(sec["trials"]), seed, int(sec["n"]),
        threshold=float(sec.get("threshold", 1e-3)),
        n_bumps=_pos_int(sec, "n_bumps", 8, "[sweep]"),
        bump_radius=float(sec.get("bump_radius", 0.3)),
        direction_mode=sec.get("direction_mode", "coherent"),
        jitter=float(sec.get("jitter", 0.17)),
        holder_r=int(sec.get("holder_r", 0)),
        holder_nu=float(sec.get("holder_nu", 1.0)),
        holder_samples=_pos_int(sec, "holder_samples", 100, "[sweep]"),
        threads=threads,
    )
    rows = [[t.index, t.amplitude, t.holder_distance, t.lambda1, t.n,
             t.positive, t.bunched] for t in rep.trials]
    write_csv(outdir / "sweep.csv", "sweep", 1,
              ["trial", "amplitude", "holder_distance", "lambda1", "n",
               "positive", "bunched"], rows)
    return ["sweep.csv"], {
        "fraction": float(rep.fraction),
        "failures": rep.failures,
        "threshold": float(rep.threshold),
        "epsilon": float(rep.epsilon),
    }


_RUNNERS = {
    "lyap": _cmd_lyap,
    "holonomy": _cmd_holonomy,
    "holonomy-deriv-check": _cmd_holonomy_deriv_check,
    "domination": _cmd_domination,
    "phi-rank": _cmd_phi_rank,
    "invariant-measure": _cmd_invariant_measure,
    "disintegration": _cmd_disintegration,
    "sweep": _cmd_sweep,
}


# --- selftest ---------------------------------------------------------------


def _expect(exc_type, fn):
    try:
        fn()
    except exc_type:
        return
    except Exception as e:  # noqa: BLE001 - reported as a case failure
        raise AssertionError(
            f"expected {exc_type.__name__}, got {type(e).__name__}: {e}")
    raise AssertionError(f"expected {exc_type.__name__}, nothing raised")


def _selftest_cases(corrupt: bool):
    # membership cases take the possibly corrupted tolerance; everything
    # else is insensitive to it
    tol = 0.0 if corrupt else None
    SL2 = make_group("SL", "real", 2)
    shift = full_shift(2)
    cat = cat_map()
    rot = lambda a: np.array([[math.cos(a), -math.sin(a)],
                              [math.sin(a), math.cos(a)]])
    table = locally_constant(SL2, 2, 0, {(0,): rot(0.3), (1,): rot(-0.2)})

    def member(G, m):
        r = contains(G, m, tol=tol)
        assert r.ok, (f"membership rejected: det residual {r.det_residual:.3e}, "
                      f"form residual {r.form_residual:.3e}, tol {tol}")

    def case_identity_member():
        member(make_group("SL", "real", 2), np.eye(2))

    def case_det_two_rejected():
        assert not contains(SL2, 2.0 * np.eye(2)).ok

    def case_sp_form_matrix():
        G = make_group("Sp", "real", 4)
        assert contains(G, np.asarray(G.form, dtype=float)).ok

    def case_odd_sp_rejected():
        _expect(ConfigError, lambda: make_group("Sp", "real", 3))

    def case_bad_family_rejected():
        _expect(ConfigError, lambda: make_group("GL", "real", 2))

    def case_member_exp_sl():
        member(SL2, scipy.linalg.expm(
            lie_from_coords(SL2, np.array([0.3, -0.2, 0.5])).entries))

    def case_member_rotation_product():
        member(SL2, rot(0.3) @ rot(0.4))

    def case_member_exp_sp4():
        G = make_group("Sp", "real", 4)
        c = np.linspace(-0.3, 0.4, G.lie_dim)
        member(G, scipy.linalg.expm(lie_from_coords(G, c).entries))

    def case_member_exp_su11():
        G = make_group("SU_pq", "complex", 2, signature=(1, 1))
        c = np.linspace(0.2, 0.5, G.lie_dim)
        member(G, scipy.linalg.expm(lie_from_coords(G, c).entries))

    def case_shift_step():
        x = periodic_point(shift, (0, 1, 1)).point
        assert step(shift, x, 1).get(0) == x.get(1)

    def case_periodic_word_corrected():
        pp = periodic_point(shift, (0, 1, 0, 1))
        assert pp.period == 2 and pp.corrected

    def case_cat_fixed_point():
        assert periodic_point(cat, (0, 0)).period == 1

    def case_point_distance_zero():
        x = periodic_point(shift, (0, 1)).point
        assert point_distance(x, x) == 0.0

    def case_cocycle_identity():
        x = periodic_point(shift, (0, 1, 1)).point
        lhs = product(table, shift, x, 5)
        rhs = product(table, shift, step(shift, x, 2), 3) @ product(table, shift, x, 2)
        assert np.linalg.norm(lhs - rhs, 2) <= 1e-9 * np.linalg.norm(lhs, 2)

    def case_constant_power():
        A = constant_cocycle(SL2, rot(0.5))
        x = periodic_point(shift, (0,)).point
        assert np.allclose(product(A, shift, x, 3),
                           np.linalg.matrix_power(rot(0.5), 3), atol=1e-13)

    def case_lyap_diag_exact():
        A = constant_cocycle(SL2, np.diag([2.0, 0.5]))
        x = periodic_point(shift, (0,)).point
        rep = lyapunov_spectrum(A, shift, x, 1000)
        assert abs(rep.exponents[0] - math.log(2.0)) < 1e-12
        assert abs(rep.exponents[1] + math.log(2.0)) < 1e-12

    def case_lyap_sum_residual():
        A = constant_cocycle(SL2, np.array([[2.0, 1.0], [1.0, 1.0]]))
        x = periodic_point(shift, (0,)).point
        assert lyapunov_spectrum(A, shift, x, 500).sum_residual < 1e-9

    def case_lyap_rotation_null():
        A = constant_cocycle(SL2, rot(0.7))
        x = periodic_point(shift, (0,)).point
        rep = lyapunov_spectrum(A, shift, x, 500)
        assert max(abs(v) for v in rep.exponents) < 1e-10

    def case_holonomy_same_point():
        x = periodic_point(shift, (0, 1)).point
        r = stable_holonomy(table, shift, x, x)
        assert np.array_equal(r.H, np.eye(2)) and r.n_stop == 0

    def _leaf_pair():
        x = periodic_point(shift, (0,)).point
        w = (0,)
        y = SymbolSequence(2, (1,), (1, 0), w, 1)  # same future, different past
        return x, y

    def case_holonomy_window0_stable():
        x, y = _leaf_pair()
        r = stable_holonomy(table, shift, x, y)
        assert np.array_equal(r.H, np.eye(2)) and r.converged

    def case_holonomy_window0_unstable_step():
        x = periodic_point(shift, (0,)).point
        z = SymbolSequence(2, (0,), (0, 1), (1,), 0)  # same past, new future
        r = unstable_holonomy(table, shift, x, z)
        assert r.converged and r.n_stop == 1

    def case_domination_diag_unbunched():
        A = constant_cocycle(SL2, np.diag([2.0, 0.5]))
        p = periodic_point(shift, (0,)).point
        assert not domination_check(A, shift, p, 1, None, 8).bunched

    def case_domination_rotation_bunched():
        p = periodic_point(shift, (0,)).point
        cert = domination_check(table, shift, p, 1, None, 8)
        assert cert.holds and cert.bunched

    def case_homoclinic_pinned():
        data = build_homoclinic_data(shift, 1, 1)
        s = data.sites[0]
        assert s.kappa == 1 and s.q == 1
        assert s.p_radius == 0.5 and s.z_radius == 0.5

    def case_phi_window0_bitwise():
        data = build_homoclinic_data(shift, 1, 1)
        g = phi(table, data)
        assert np.array_equal(g[0], rot(0.3))
        assert np.array_equal(g[1], rot(-0.2))

    def case_measure_identity_pair():
        v = common_invariant_measure_test(np.eye(2), np.eye(2))
        assert v.kind == "PossiblyCommon"

    def case_measure_growth_pair():
        v = common_invariant_measure_test(np.diag([2.0, 0.5]), rot(1.0))
        assert v.kind == "NoCommonMeasure"

    def case_measure_distance_zero():
        m = empirical_measure([(np.array([1.0, 0.0]), 0.5),
                               (np.array([0.0, 1.0]), 0.5)])
        assert measure_distance(m, m) == 0.0

    def case_sweep_zero_epsilon():
        rep = positivity_sweep(table, shift, 0.0, 2, 3, 200)
        assert rep.fraction == 0.0

    def case_config_unknown_key():
        with tempfile.TemporaryDirectory() as d:
            p = Path(d) / "bad.toml"
            p.write_text("[lyap]\nbogus = 1\n")
            _expect(ConfigError, lambda: load_config(p))

    return [
        ("group-identity-member", case_identity_member),
        ("group-det-two-rejected", case_det_two_rejected),
        ("group-sp-form-matrix", case_sp_form_matrix),
        ("group-odd-sp-rejected", case_odd_sp_rejected),
        ("group-bad-family-rejected", case_bad_family_rejected),
        ("member-exp-sl", case_member_exp_sl),
        ("member-rotation-product", case_member_rotation_product),
        ("member-exp-sp4", case_member_exp_sp4),
        ("member-exp-su11", case_member_exp_su11),
        ("base-shift-step", case_shift_step),
        ("base-periodic-word-corrected", case_periodic_word_corrected),
        ("base-cat-fixed-point", case_cat_fixed_point),
        ("base-point-distance-zero", case_point_distance_zero),
        ("cocycle-identity", case_cocycle_identity),
        ("cocycle-constant-power", case_constant_power),
        ("lyap-diag-exact", case_lyap_diag_exact),
        ("lyap-sum-residual", case_lyap_sum_residual),
        ("lyap-rotation-null", case_lyap_rotation_null),
        ("holonomy-same-point-identity", case_holonomy_same_point),
        ("holonomy-window0-stable-identity", case_holonomy_window0_stable),
        ("holonomy-window0-unstable-one-step", case_holonomy_window0_unstable_step),
        ("domination-diag-unbunched", case_domination_diag_unbunched),
        ("domination-rotation-bunched", case_domination_rotation_bunched),
        ("homoclinic-pinned-site", case_homoclinic_pinned),
        ("phi-window0-bitwise", case_phi_window0_bitwise),
        ("measure-identity-possibly-common", case_measure_identity_pair),
        ("measure-growth-no-common", case_measure_growth_pair),
        ("measure-distance-identical-zero", case_measure_distance_zero),
        ("sweep-zero-epsilon", case_sweep_zero_epsilon),
        ("config-unknown-key-rejected", case_config_unknown_key),
    ]


def selftest(corrupt_tolerance: bool = False, out=None) -> int:
    out = sys.stdout if out is None else out
    t0 = time.perf_counter()
    cases = _selftest_cases(corrupt_tolerance)
    failures = 0
    for name, fn in cases:
        try:
            fn()
        except Exception as e:  # noqa: BLE001 - any breakage is a failed case
            failures += 1
            msg = " ".join(str(e).split()) or type(e).__name__
            print(f"FAIL  {name}: {msg}", file=out)
        else:
            print(f"ok    {name}", file=out)
    dt = time.perf_counter() - t0
    print(f"selftest: {len(cases)} cases, {failures} failures, {dt:.1f} s",
          file=out)
    return 1 if failures else 0


# --- entry point ------------------------------------------------------------


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cocyclelab",
        description="cocycle experiments: spectra, holonomies, rank "
                    "certificates, sweeps")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None,
                       help="override [run].seed")
        p.add_argument("--threads", type=int, default=None,
                       help="override [run].threads")
        p.add_argument("--out", default=None,
                       help=f"output directory (default [run].out, then "
                            f"${OUTDIR_ENV}, then cwd)")
    st = sub.add_parser("selftest")
    st.add_argument("--corrupt-tolerance", action="store_true",
                    help="negative control: run membership cases at tol 0")
    return parser


def _run(args) -> None:
    raw = load_config(args.config)
    run_cfg = _sec(raw, "run")
    seed = args.seed if args.seed is not None else int(run_cfg.get("seed", 0))
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    threads = (args.threads if args.threads is not None
               else int(run_cfg.get("threads", 1)))
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    out = args.out or run_cfg.get("out") or os.environ.get(OUTDIR_ENV) or "."
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    outputs, extra = _RUNNERS[args.command](raw, seed, threads, outdir)
    _write_summary(outdir, args.command, _config_hash(raw, seed), seed,
                   threads, time.perf_counter() - t0, outputs, extra)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "selftest":
        return selftest(args.corrupt_tolerance)
    try:
        _run(args)
    except ConfigError as e:
        _report_error(args.command, "config", 2, e)
        return 2
    except NumericalError as e:
        _report_error(args.command, "numerical", 3, e)
        return 3
    except RefusalError as e:
        _report_error(args.command, "refusal", 4, e)
        return 4
    return 0


def _report_error(command, kind, code, e):
    msg = " ".join(str(e).split())
    print(f'cocyclelab-error command={command} kind={kind} exit={code} '
          f'msg="{msg}"', file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
