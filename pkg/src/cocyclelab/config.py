"""Experiment configs: one TOML file per run, strictly validated.

Every section and key is checked against a fixed schema before any object
is built, so a typo fails fast with the offending name instead of silently
falling back to a default.  Flags on the command line only override the
[run] keys; everything else lives in the file so a run is archivable.
"""

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from .base import BaseSystem, SymbolSequence, TorusPoint, cat_map, full_shift
from .cocycles import (
    Bump,
    constant_cocycle,
    fourier_cocycle,
    locally_constant,
    perturbed,
)
from .errors import ConfigError
from .groups import GroupDescriptor, make_group

SECTIONS = {
    "run": {"seed", "threads", "out"},
    "group": {"family", "field", "d", "signature", "membership_tol"},
    "base": {"kind", "symbols", "weights"},
    "cocycle": {"kind", "matrix", "window", "table", "terms", "base", "bumps"},
    "lyap": {"n", "warmup", "x0", "checkpoints"},
    "holonomy": {"side", "pairs", "tol", "n_max", "separation", "core_width",
                 "gap_history"},
    "holonomy_deriv_check": {"kind", "depth", "h", "tol", "n_max", "direction"},
    "domination": {"point", "block", "theta", "k_max"},
    "phi_rank": {"l", "depth", "h", "tol", "n_max"},
    "invariant_measure": {"a", "b", "a_file", "b_file", "word_length", "bound",
                          "n_words", "finite_orbit", "subspace_tol"},
    "disintegration": {"pairs", "side", "separation", "depth", "n_orbits",
                       "n_iter", "zero_tol", "spectrum_n", "holonomy_tol",
                       "holonomy_n_max"},
    "sweep": {"epsilon", "trials", "n", "threshold", "n_bumps", "bump_radius",
              "direction_mode", "jitter", "holder_r", "holder_nu",
              "holder_samples"},
}

_TERM_KEYS = {"k1", "k2", "kind", "coeff"}
_BUMP_KEYS = {"center", "radius", "direction", "amplitude"}


def _check_keys(table, allowed, where):
    unknown = sorted(set(table) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def load_config(path) -> dict:
    """Parse and schema-check a TOML config; returns the raw dict."""
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"config {path} is not valid TOML: {e}")
    _check_keys(raw, set(SECTIONS), "config")
    for name, table in raw.items():
        if not isinstance(table, dict):
            raise ConfigError(f"[{name}] must be a table, got {type(table).__name__}")
        _check_keys(table, SECTIONS[name], f"[{name}]")
    _check_cocycle_keys(raw.get("cocycle"), "[cocycle]", nested=False)
    return raw


def _check_cocycle_keys(table, where, nested):
    if table is None:
        return
    for i, t in enumerate(table.get("terms", []) or []):
        if not isinstance(t, dict):
            raise ConfigError(f"{where}.terms[{i}] must be a table")
        _check_keys(t, _TERM_KEYS, f"{where}.terms[{i}]")
    if nested and ("base" in table or "bumps" in table):
        raise ConfigError(f"{where}: a perturbed base cannot itself be perturbed")
    for i, b in enumerate(table.get("bumps", []) or []):
        if not isinstance(b, dict):
            raise ConfigError(f"{where}.bumps[{i}] must be a table")
        _check_keys(b, _BUMP_KEYS, f"{where}.bumps[{i}]")
    if "base" in table:
        base = table["base"]
        if not isinstance(base, dict):
            raise ConfigError(f"{where}.base must be a table")
        _check_keys(base, SECTIONS["cocycle"], f"{where}.base")
        _check_cocycle_keys(base, f"{where}.base", nested=True)


def _require(table, key, where):
    if table is None or key not in table:
        raise ConfigError(f"{where} needs a '{key}' key")
    return table[key]


def as_matrix(raw, G: GroupDescriptor, where) -> np.ndarray:
    """Nested TOML arrays to a d x d matrix; complex entries are [re, im]."""
    if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
        raise ConfigError(f"{where} must be a nested array of rows")

    def entry(v):
        if isinstance(v, list):
            if len(v) != 2 or G.dtype is not complex:
                raise ConfigError(
                    f"{where}: entry {v!r} is not a number "
                    "([re, im] pairs are only valid for complex groups)")
            return complex(v[0], v[1])
        return float(v)

    try:
        m = np.array([[entry(v) for v in row] for row in raw], dtype=G.dtype)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}")
    if m.shape != (G.d, G.d):
        raise ConfigError(f"{where} must be {G.d}x{G.d}, got {m.shape}")
    return m


def build_group(raw: dict) -> GroupDescriptor:
    g = raw.get("group")
    family = _require(g, "family", "[group]")
    d = _require(g, "d", "[group]")
    sig = g.get("signature")
    return make_group(
        family,
        g.get("field", "real"),
        d,
        signature=tuple(int(s) for s in sig) if sig is not None else None,
        **({"membership_tol": float(g["membership_tol"])}
           if "membership_tol" in g else {}),
    )


def build_base(raw: dict) -> BaseSystem:
    b = raw.get("base")
    kind = _require(b, "kind", "[base]")
    if kind == "cat_map":
        if "symbols" in b or "weights" in b:
            raise ConfigError("[base]: symbols/weights only apply to full_shift")
        return cat_map()
    if kind == "full_shift":
        return full_shift(int(b.get("symbols", 2)), b.get("weights"))
    raise ConfigError(f"[base].kind must be cat_map or full_shift, got {kind!r}")


def _word(raw, where):
    if isinstance(raw, str):
        raw = list(raw)
    if not isinstance(raw, list) or not raw:
        raise ConfigError(f"{where} must be a nonempty word (array or string)")
    try:
        return tuple(int(s) for s in raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{where} must hold integer symbols")


def base_point(raw, sys: BaseSystem, where):
    """A config point: [x, y] floats on the torus, a symbol word on the
    shift (read as the periodic sequence repeating it, anchored at 0)."""
    if sys.kind == "catmap":
        if not (isinstance(raw, list) and len(raw) == 2):
            raise ConfigError(f"{where} must be [x, y] on the torus")
        return TorusPoint(float(raw[0]), float(raw[1]))
    w = _word(raw, where)
    if any(s >= sys.k for s in w):
        raise ConfigError(f"{where}: symbols must be < {sys.k}")
    return SymbolSequence(sys.k, w, w, w, 0)


def build_cocycle(raw: dict, G: GroupDescriptor, sys: BaseSystem):
    return _cocycle(raw.get("cocycle"), "[cocycle]", G, sys)


def _cocycle(c, where, G, sys):
    kind = _require(c, "kind", where)
    if kind == "constant":
        return constant_cocycle(G, as_matrix(_require(c, "matrix", where), G,
                                             f"{where}.matrix"))
    if kind == "locally_constant":
        if sys.kind != "fullshift":
            raise ConfigError(f"{where}: locally_constant needs a full_shift base")
        table = _require(c, "table", where)
        if not isinstance(table, dict):
            raise ConfigError(f"{where}.table must be a table of word = matrix")
        parsed = {
            _word(word, f"{where}.table key {word!r}"):
                as_matrix(m, G, f"{where}.table[{word!r}]")
            for word, m in table.items()
        }
        return locally_constant(G, sys.k, int(c.get("window", 0)), parsed)
    if kind == "fourier":
        if sys.kind != "catmap":
            raise ConfigError(f"{where}: fourier needs a cat_map base")
        terms = _require(c, "terms", where)
        return fourier_cocycle(G, [
            (_require(t, "k1", f"{where}.terms[{i}]"),
             _require(t, "k2", f"{where}.terms[{i}]"),
             _require(t, "kind", f"{where}.terms[{i}]"),
             as_matrix(_require(t, "coeff", f"{where}.terms[{i}]"), G,
                       f"{where}.terms[{i}].coeff"))
            for i, t in enumerate(terms)
        ])
    if kind == "perturbed":
        base = _cocycle(_require(c, "base", where), f"{where}.base", G, sys)
        bumps = [
            Bump(
                base_point(_require(b, "center", f"{where}.bumps[{i}]"), sys,
                           f"{where}.bumps[{i}].center"),
                float(_require(b, "radius", f"{where}.bumps[{i}]")),
                as_matrix(_require(b, "direction", f"{where}.bumps[{i}]"), G,
                          f"{where}.bumps[{i}].direction"),
                float(_require(b, "amplitude", f"{where}.bumps[{i}]")),
            )
            for i, b in enumerate(_require(c, "bumps", where))
        ]
        return perturbed(base, bumps)
    raise ConfigError(
        f"{where}.kind must be constant, locally_constant, fourier or "
        f"perturbed, got {kind!r}")
