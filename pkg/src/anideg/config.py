"""Run configuration: a strict sectioned ``key = value`` format.

Example::

    [grid]
    N = 128
    upper = 32

    [material]
    potential = log_quench
    theta_c = 2.0
    delta = 0.05

Blank lines and ``#`` comments are ignored. Unknown sections or keys,
duplicate keys and malformed lines are errors that name the line.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from anideg.anisotropy import AnisotropySpec
from anideg.errors import ParseError, ValidationError
from anideg.grid import TorusGrid, read_snapshot
from anideg.material import double_well, log_quench
from anideg.stepper import SAFEGUARDS, SCHEMES, SolverConfig

# section -> key -> (parser, default); default None means required or auto
_INT = "int"
_FLOAT = "float"
_STR = "str"
_INTS = "ints"
_FLOATS = "floats"
_BOOL = "bool"
_OPT_FLOAT = "float|auto"

SCHEMA = {
    "grid": {
        "d": (_INT, 1),
        "N": (_INTS, None),
        "lower": (_FLOATS, [0.0]),
        "upper": (_FLOATS, [1.0]),
    },
    "anisotropy": {
        "anisotropy": (_STR, "isotropic"),
        "matrix": (_FLOATS, None),
        "matrices": (_FLOATS, None),
        "n_samples": (_INT, 20000),
        "seed": (_INT, 0),
    },
    "material": {
        "potential": (_STR, "log_quench"),
        "theta": (_FLOAT, 1.0),
        "theta_c": (_FLOAT, 2.0),
        "m": (_FLOAT, 1.0),
        "delta": (_FLOAT, 0.05),
    },
    "initial": {
        "kind": (_STR, "seeded_noise"),
        "value": (_FLOAT, 0.0),
        "mean": (_FLOAT, 0.0),
        "amplitude": (_FLOAT, 0.1),
        "seed": (_INT, 0),
        "centers": (_FLOATS, None),
        "width": (_FLOAT, 1.0),
        "path": (_STR, None),
    },
    "solver": {
        "scheme": (_STR, "imex"),
        "dt_init": (_FLOAT, 1e-6),
        "dt_min": (_FLOAT, 1e-9),
        "dt_max": (_FLOAT, 2e-3),
        "kappa": (_OPT_FLOAT, None),
        "t_final": (_FLOAT, 1.0),
        "energy_tol_per_step": (_FLOAT, 1e-12),
        "safeguard": (_STR, "reject_and_halve"),
        "snapshot_stride": (_INT, 100),
        "diagnostics_stride": (_INT, 10),
    },
    "output": {
        "directory": (_STR, "run"),
        "snapshots": (_BOOL, True),
    },
}

POTENTIALS = ("log_quench", "double_well", "custom")
INITIAL_KINDS = ("constant", "seeded_noise", "tanh_profile", "from_snapshot")


@dataclass
class RunConfig:
    grid: dict
    anisotropy: dict
    material: dict
    initial: dict
    solver: dict
    output: dict
    text: str = ""
    lines: dict = field(default_factory=dict, repr=False)

    @property
    def hash(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    def build_grid(self):
        g = self.grid
        return TorusGrid(tuple(g["N"]), tuple(g["lower"]), tuple(g["upper"]))

    def build_anisotropy(self):
        a = self.anisotropy
        d = self.grid["d"]
        fam = a["anisotropy"]
        if fam == "isotropic":
            return AnisotropySpec.isotropic(d)
        key = "matrix" if fam == "quadratic" else "matrices"
        try:
            if fam == "quadratic":
                return AnisotropySpec.quadratic(np.reshape(a["matrix"], (d, d)))
            return AnisotropySpec.ellipsoid_sum(list(np.reshape(a["matrices"], (-1, d, d))))
        except ValueError as exc:
            raise ValidationError(key, str(exc), self.lines.get(("anisotropy", key))) from None

    def material_factory(self):
        m = self.material
        if m["potential"] == "log_quench":
            return partial(log_quench, theta=m["theta"], theta_c=m["theta_c"])
        return partial(double_well, m=m["m"])

    def build_solver(self):
        return SolverConfig(**self.solver)

    def initial_raw(self, grid):
        """Initial datum before the (1 - delta) scaling."""
        ic = self.initial
        kind = ic["kind"]
        if kind == "constant":
            return np.full(grid.shape, ic["value"])
        if kind == "seeded_noise":
            rng = np.random.default_rng(ic["seed"])
            return ic["mean"] + ic["amplitude"] * rng.uniform(-1.0, 1.0, size=grid.shape)
        if kind == "tanh_profile":
            x = grid.coords()[0]
            out = np.ones(grid.shape)
            for c in ic["centers"]:
                out = out * np.tanh((x - c) / ic["width"])
            return out
        sgrid, _, values = read_snapshot(ic["path"])
        if sgrid != grid:
            raise ValidationError("path", "snapshot grid does not match [grid] section", self.lines.get(("initial", "path")))
        return values


def _parse_value(kind, raw, line, key):
    try:
        if kind == _INT:
            return int(raw)
        if kind == _FLOAT:
            return float(raw)
        if kind == _OPT_FLOAT:
            return None if raw == "auto" else float(raw)
        if kind == _INTS:
            return [int(x) for x in raw.split(",")]
        if kind == _FLOATS:
            return [float(x) for x in raw.split(",")]
        if kind == _BOOL:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError
            return low == "true"
        return raw
    except ValueError:
        raise ParseError(line, key, f"cannot parse {raw!r} as {kind}") from None


def parse_config(text: str) -> RunConfig:
    values = {sec: {} for sec in SCHEMA}
    lines = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(lineno, line, "malformed section header")
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ParseError(lineno, section, "unknown section")
            continue
        if "=" not in line:
            raise ParseError(lineno, line, "expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if section is None:
            raise ParseError(lineno, key, "key outside of any section")
        if key not in SCHEMA[section]:
            raise ParseError(lineno, key, f"unknown key in [{section}]")
        if (section, key) in lines:
            first = lines[(section, key)]
            raise ParseError(lineno, key, f"duplicate key (first set on line {first}, again on line {lineno})")
        if not val:
            raise ParseError(lineno, key, "empty value")
        values[section][key] = _parse_value(SCHEMA[section][key][0], val, lineno, key)
        lines[(section, key)] = lineno

    for sec, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            values[sec].setdefault(key, default)
    cfg = RunConfig(**values, text=text, lines=lines)
    _validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())


def _validate(cfg: RunConfig):
    def fail(sec, key, reason):
        raise ValidationError(key, reason, cfg.lines.get((sec, key)))

    g = cfg.grid
    d = g["d"]
    if d not in (1, 2, 3):
        fail("grid", "d", "must be 1, 2 or 3")
    if g["N"] is None:
        fail("grid", "N", "required")
    for key in ("N", "lower", "upper"):
        if len(g[key]) == 1:
            g[key] = g[key] * d
        if len(g[key]) != d:
            fail("grid", key, f"needs 1 or {d} entries")
    for n in g["N"]:
        if n < 8 or n & (n - 1):
            fail("grid", "N", f"must be a power of two >= 8, got {n}")
    if any(a >= b for a, b in zip(g["lower"], g["upper"])):
        fail("grid", "upper", "must exceed lower on every axis")

    a = cfg.anisotropy
    fam = a["anisotropy"]
    if fam not in ("isotropic", "quadratic", "ellipsoid_sum"):
        fail("anisotropy", "anisotropy", "must be isotropic, quadratic or ellipsoid_sum")
    if fam == "quadratic" and (a["matrix"] is None or len(a["matrix"]) != d * d):
        fail("anisotropy", "matrix", f"quadratic needs {d * d} row-major entries")
    if fam == "ellipsoid_sum" and (
        a["matrices"] is None or len(a["matrices"]) == 0 or len(a["matrices"]) % (d * d)
    ):
        fail("anisotropy", "matrices", f"ellipsoid_sum needs a multiple of {d * d} row-major entries")
    if a["n_samples"] < 1000:
        fail("anisotropy", "n_samples", "must be >= 1000")

    m = cfg.material
    if m["potential"] not in POTENTIALS:
        fail("material", "potential", f"must be one of {POTENTIALS}")
    if m["potential"] == "custom":
        fail("material", "potential", "custom potentials are a library extension point, not configurable")
    if not 0 < m["delta"] < 1:
        fail("material", "delta", "must lie in the open interval (0,1)")
    if m["m"] < 1:
        fail("material", "m", "must be >= 1")
    if m["potential"] == "log_quench" and m["m"] != 1:
        fail("material", "m", "log_quench fixes m = 1")
    if m["theta"] <= 0 or m["theta_c"] <= 0:
        fail("material", "theta", "theta and theta_c must be positive")

    ic = cfg.initial
    if ic["kind"] not in INITIAL_KINDS:
        fail("initial", "kind", f"must be one of {INITIAL_KINDS}")
    if ic["kind"] == "constant" and abs(ic["value"]) > 1:
        fail("initial", "value", "must satisfy |value| <= 1")
    if ic["kind"] == "seeded_noise" and abs(ic["mean"]) + abs(ic["amplitude"]) > 1:
        fail("initial", "amplitude", "|mean| + amplitude must not exceed 1")
    if ic["kind"] == "tanh_profile" and not ic["centers"]:
        fail("initial", "centers", "tanh_profile needs centers")
    if ic["kind"] == "tanh_profile" and ic["width"] <= 0:
        fail("initial", "width", "must be positive")
    if ic["kind"] == "from_snapshot" and not ic["path"]:
        fail("initial", "path", "from_snapshot needs a path")

    s = cfg.solver
    if s["scheme"] not in SCHEMES:
        fail("solver", "scheme", f"must be one of {SCHEMES}")
    if s["safeguard"] not in SAFEGUARDS:
        fail("solver", "safeguard", f"must be one of {SAFEGUARDS}")
    if not 0 < s["dt_min"] <= s["dt_init"] <= s["dt_max"]:
        fail("solver", "dt_init", "need 0 < dt_min <= dt_init <= dt_max")
    if s["t_final"] < 0:
        fail("solver", "t_final", "must be nonnegative")
    if s["kappa"] is not None and s["kappa"] < 0:
        fail("solver", "kappa", "must be nonnegative")
    for key in ("snapshot_stride", "diagnostics_stride"):
        if s[key] < 1:
            fail("solver", key, "must be positive")
