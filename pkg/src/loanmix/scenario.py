"""Scenario files: TOML documents that map one-to-one onto :class:`EconomyParams`.

Example::

    [economy]
    R = 1.2
    A = 2.0

    [signals]
    y1 = 1.0
    y2 = 3.0
    nodes = 41          # or: values = [...], weights = [...]

    [noise]
    kind = "two_point"
    sigma = 0.3

    [utility]
    family = "quadratic"
    alpha = 10.0
    beta = 0.5

    [production]
    kind = "direct"
    omega = 1.5

Unknown sections or keys are rejected.  Every error carries the file name,
line number and dotted field name.
"""

from __future__ import annotations

import os
import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from loanmix.economy import (
    CARA,
    CRRA,
    CobbDouglas,
    DirectWage,
    EconomyParams,
    NoiseSpec,
    Quadratic,
    SignalGrid,
)
from loanmix.equilibrium import SolverConfig
from loanmix.errors import ValidationError
from loanmix.oracle import OracleConfig

SCENARIO_DIR_ENV = "LOANMIX_SCENARIO_DIR"

_NUM = (int, float)
_SECTIONS = {
    "economy": {"R": _NUM, "A": _NUM},
    "signals": {"y1": _NUM, "y2": _NUM, "nodes": int, "values": list, "weights": list},
    "noise": {"kind": str, "sigma": _NUM, "gh_nodes": int},
    "utility": {"family": str, "gamma": _NUM, "lambda": _NUM, "alpha": _NUM, "beta": _NUM,
                "scale": _NUM, "enforce_bliss": bool},
    "production": {"kind": str, "omega": _NUM, "delta": _NUM},
    "solver": {"damping": _NUM, "tol": _NUM, "max_iter": int},
    "oracle": {"seed": int, "samples": int, "grid_points": int},
}
_TOP_LEVEL = {"name": str, "description": str}
_REQUIRED = ("economy", "signals", "utility")
_FAMILY_KEYS = {
    "crra": {"family", "gamma", "scale"},
    "cara": {"family", "lambda", "scale"},
    "quadratic": {"family", "alpha", "beta", "scale", "enforce_bliss"},
}
_PRODUCTION_KEYS = {"direct": {"kind", "omega"}, "cobb_douglas": {"kind", "delta"}}


class ScenarioError(ValidationError):
    def __init__(self, message, field=None, source="<string>", line=None):
        self.source = source
        self.line = line
        self.detail = message
        where = f"{source}:{line}" if line is not None else source
        prefix = f"{where}: {field}: " if field else f"{where}: "
        super().__init__(prefix + message, field=field)


@dataclass(frozen=True)
class Scenario:
    params: EconomyParams
    solver: SolverConfig = field(default_factory=SolverConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    name: str = ""
    description: str = ""


class _Lines:
    """Best-effort map from ``section.key`` to the line it was written on."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_]+)\s*\]")
    _key = re.compile(r"^\s*([A-Za-z0-9_]+)\s*=")

    def __init__(self, text):
        self.where = {}
        section = ""
        for n, line in enumerate(text.splitlines(), start=1):
            m = self._header.match(line)
            if m:
                section = m.group(1)
                self.where.setdefault(section, n)
                continue
            m = self._key.match(line)
            if m:
                key = f"{section}.{m.group(1)}" if section else m.group(1)
                self.where.setdefault(key, n)

    def __call__(self, dotted):
        if dotted is None:
            return None
        while dotted:
            if dotted in self.where:
                return self.where[dotted]
            dotted = dotted.rpartition(".")[0]
        return None


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed TOML: {exc}", source=source) from None
    lines = _Lines(text)

    def fail(msg, dotted):
        raise ScenarioError(msg, dotted, source, lines(dotted))

    for key, value in doc.items():
        if key in _TOP_LEVEL:
            if not isinstance(value, str):
                fail("expected a string", key)
        elif key not in _SECTIONS:
            fail(f"unknown section; expected one of {sorted(_SECTIONS)}", key)
        elif not isinstance(value, dict):
            fail("expected a table", key)
    for name in _REQUIRED:
        if name not in doc:
            fail("required section is missing", name)
    for sec, table in doc.items():
        if sec not in _SECTIONS:
            continue
        schema = _SECTIONS[sec]
        for key, value in table.items():
            dotted = f"{sec}.{key}"
            if key not in schema:
                fail(f"unknown key; expected one of {sorted(schema)}", dotted)
            want = schema[key]
            if isinstance(value, bool) and want is not bool:
                fail("expected a number, got a boolean", dotted)
            if not isinstance(value, want):
                fail(f"expected {_type_name(want)}, got {type(value).__name__}", dotted)

    def build(dotted, fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            fail(str(exc), exc.field or dotted)
        except (TypeError, ValueError, IndexError) as exc:
            fail(str(exc), dotted)

    eco = doc["economy"]
    for key in ("R", "A"):
        if key not in eco:
            fail("required key is missing", f"economy.{key}")

    grid = build("signals", _grid, doc["signals"], fail)
    noise_t = doc.get("noise", {})
    noise = build("noise", NoiseSpec, **{k: v for k, v in noise_t.items()})
    util = build("utility", _utility, doc["utility"], fail)
    prod = build("production", _production, doc.get("production", {}), fail)
    params = build("economy", EconomyParams, float(eco["R"]), float(eco["A"]), grid, noise,
                   util, prod)
    solver = build("solver", SolverConfig, **doc.get("solver", {}))
    oracle = build("oracle", OracleConfig, **doc.get("oracle", {}))
    return Scenario(params, solver, oracle, doc.get("name", ""), doc.get("description", ""))


def _type_name(want):
    if want is _NUM:
        return "a number"
    return {int: "an integer", str: "a string", bool: "a boolean", list: "an array"}[want]


def _grid(t, fail):
    if "values" in t:
        if "nodes" in t:
            fail("give either nodes or values, not both", "signals.nodes")
        values = t["values"]
        if not values or not all(isinstance(v, _NUM) and not isinstance(v, bool) for v in values):
            fail("expected a non-empty array of numbers", "signals.values")
        weights = t.get("weights")
        if weights is not None and not all(
                isinstance(v, _NUM) and not isinstance(v, bool) for v in weights):
            fail("expected an array of numbers", "signals.weights")
        return SignalGrid.explicit(values, weights, t.get("y1"), t.get("y2"))
    if "weights" in t:
        fail("weights need explicit values", "signals.weights")
    for key in ("y1", "y2"):
        if key not in t:
            fail("required key is missing", f"signals.{key}")
    return SignalGrid.uniform(float(t["y1"]), float(t["y2"]), t.get("nodes", 41))


def _utility(t, fail):
    fam = t.get("family")
    if fam not in _FAMILY_KEYS:
        fail(f"expected one of {sorted(_FAMILY_KEYS)}", "utility.family")
    for key in t:
        if key not in _FAMILY_KEYS[fam]:
            fail(f"not a parameter of {fam} utility", f"utility.{key}")
    scale = float(t.get("scale", 1.0))
    if fam == "crra":
        return CRRA(float(t.get("gamma", 2.0)), scale)
    if fam == "cara":
        return CARA(float(t.get("lambda", 0.5)), scale)
    return Quadratic(float(t.get("alpha", 10.0)), float(t.get("beta", 0.5)), scale,
                     bool(t.get("enforce_bliss", True)))


def _production(t, fail):
    kind = t.get("kind", "direct")
    if kind not in _PRODUCTION_KEYS:
        fail(f"expected one of {sorted(_PRODUCTION_KEYS)}", "production.kind")
    for key in t:
        if key not in _PRODUCTION_KEYS[kind]:
            fail(f"not a parameter of {kind} production", f"production.{key}")
    if kind == "direct":
        return DirectWage(float(t.get("omega", 1.5)))
    return CobbDouglas(float(t.get("delta", 0.3)))


def scenario_to_dict(sc: Scenario) -> dict:
    p = sc.params
    doc = {}
    if sc.name:
        doc["name"] = sc.name
    if sc.description:
        doc["description"] = sc.description
    doc["economy"] = {"R": p.interest_rate, "A": p.basic_capital}
    g = p.signal_grid
    if g.uniform_nodes is not None:
        doc["signals"] = {"y1": g.lower, "y2": g.upper, "nodes": g.uniform_nodes}
    else:
        doc["signals"] = {"y1": g.lower, "y2": g.upper, "values": list(g.values),
                          "weights": list(g.weights)}
    doc["noise"] = {"kind": p.noise.kind, "sigma": p.noise.sigma, "gh_nodes": p.noise.gh_nodes}
    u = p.utility
    if isinstance(u, CRRA):
        doc["utility"] = {"family": "crra", "gamma": u.gamma, "scale": u.scale}
    elif isinstance(u, CARA):
        doc["utility"] = {"family": "cara", "lambda": u.lam, "scale": u.scale}
    else:
        doc["utility"] = {"family": "quadratic", "alpha": u.alpha, "beta": u.beta,
                          "scale": u.scale, "enforce_bliss": u.enforce_bliss}
    if isinstance(p.production, DirectWage):
        doc["production"] = {"kind": "direct", "omega": p.production.wage}
    else:
        doc["production"] = {"kind": "cobb_douglas", "delta": p.production.delta}
    doc["solver"] = {"damping": sc.solver.damping, "tol": sc.solver.tol,
                     "max_iter": sc.solver.max_iter}
    doc["oracle"] = {"seed": sc.oracle.seed, "samples": sc.oracle.samples,
                     "grid_points": sc.oracle.grid_points}
    return doc


def dump_scenario(sc: Scenario) -> str:
    return tomli_w.dumps(scenario_to_dict(sc))


def shipped_dir():
    return resources.files("loanmix") / "scenarios"


def shipped_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in shipped_dir().iterdir() if p.name.endswith(".toml"))


def resolve_scenario(name: str):
    """Find a scenario by path, then in ``$LOANMIX_SCENARIO_DIR``, then among shipped ones."""
    path = Path(name)
    if path.is_file():
        return path
    stem = name if name.endswith(".toml") else name + ".toml"
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env and (Path(env) / stem).is_file():
        return Path(env) / stem
    shipped = shipped_dir() / stem
    if shipped.is_file():
        return shipped
    raise ScenarioError("no such scenario file or shipped scenario", source=name)


def load_scenario(name: str) -> Scenario:
    path = resolve_scenario(name)
    return parse_scenario(path.read_text(encoding="utf-8"), source=str(name))
