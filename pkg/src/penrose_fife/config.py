"""Scenario files: sectioned ``key = value`` text mapped onto :class:`ProblemSpec`.

Every key has a default, so an empty file describes the default scenario.
"""
from __future__ import annotations

import configparser
import csv
import math
import re
from dataclasses import dataclass, field, fields, replace
from typing import Optional

import numpy as np

from .domain import (ProblemSpec, SpatialMesh, cubic_beta, linear_beta, piecewise_beta,
                     polynomial_beta)
from .errors import ParseError, UnknownKey
from .kernel import build_kernel, constant_kernel, gaussian_kernel, tabulated_kernel, zero_kernel


@dataclass
class MeshSection:
    dimension: int = 1
    nodes: int = 128
    extent: float = 1.0


@dataclass
class KernelSection:
    name: str = "gaussian"
    width: float = 0.1
    strength: float = 1.0
    value: float = 1.0
    table: str = ""


@dataclass
class NonlinearitySection:
    beta: str = "cubic"
    beta_coeff: float = 1.0
    knee: float = 1.0
    beta_poly: str = "0.0, 1.0"
    pi_slope: float = -1.0
    pi_lipschitz: Optional[float] = None


@dataclass
class DataSection:
    f: str = "zero"
    f_value: float = 0.0
    f_amp: float = 0.0
    f_freq: float = 1.0
    g: str = "constant"
    g_value: float = -1.0
    g_amp: float = 0.0
    theta0: str = "constant"
    theta0_value: float = 1.0
    theta0_slope: float = 0.0
    phi0: str = "cosine"
    phi0_amp: float = 0.5
    v0: str = "zero"
    v0_value: float = 0.0
    seed: int = 0


@dataclass
class TimeSection:
    T: float = 1.0
    N: int = 64
    ladder: str = ""
    reference_N: int = 0


@dataclass
class SolverSection:
    tol: float = 1e-10
    max_iter: int = 50
    elliptic_tol: float = 1e-10
    theta_min: float = 1e-8
    points_per_step: int = 8
    workers: int = 1


@dataclass
class OutputSection:
    directory: str = "out"
    stride: int = 1


@dataclass
class ScenarioConfig:
    mesh: MeshSection = field(default_factory=MeshSection)
    kernel: KernelSection = field(default_factory=KernelSection)
    nonlinearity: NonlinearitySection = field(default_factory=NonlinearitySection)
    data: DataSection = field(default_factory=DataSection)
    time: TimeSection = field(default_factory=TimeSection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)

    def ladder_exponents(self):
        return parse_ladder(self.time.ladder) if self.time.ladder else None


CHOICES = {
    ("kernel", "name"): {"zero", "constant", "gaussian", "custom-table"},
    ("nonlinearity", "beta"): {"cubic", "piecewise", "linear", "custom"},
    ("data", "f"): {"zero", "constant", "sine"},
    ("data", "g"): {"constant", "pulsed"},
    ("data", "theta0"): {"constant", "linear"},
    ("data", "phi0"): {"cosine", "constant", "zero", "random"},
    ("data", "v0"): {"zero", "constant", "cosine"},
}

# (section, key) -> predicate, message
BOUNDS = {
    ("mesh", "dimension"): (lambda v: v in (1, 2), "must be 1 or 2"),
    ("mesh", "nodes"): (lambda v: v >= 3, "must be >= 3"),
    ("mesh", "extent"): (lambda v: v > 0, "must be > 0"),
    ("kernel", "width"): (lambda v: v > 0, "must be > 0"),
    ("time", "T"): (lambda v: v > 0, "must be > 0"),
    ("time", "N"): (lambda v: v >= 1, "must be >= 1 (N >= 1)"),
    ("time", "reference_N"): (lambda v: v >= 0, "must be >= 0"),
    ("solver", "tol"): (lambda v: v > 0, "must be > 0"),
    ("solver", "max_iter"): (lambda v: v >= 1, "must be >= 1"),
    ("solver", "elliptic_tol"): (lambda v: v > 0, "must be > 0"),
    ("solver", "theta_min"): (lambda v: v > 0, "must be > 0"),
    ("solver", "points_per_step"): (lambda v: v >= 8, "must be >= 8"),
    ("solver", "workers"): (lambda v: v >= 1, "must be >= 1"),
    ("output", "stride"): (lambda v: v >= 1, "must be >= 1"),
}

_LADDER = re.compile(r"^\s*(\d+)\s*\.\.\s*(\d+)\s*$")


def parse_ladder(text):
    """``"5..10"`` -> ``range(5, 11)``; a comma list is also accepted."""
    m = _LADDER.match(text)
    if m:
        lo, hi = int(m.group(1)), int(m.group(2))
        if hi < lo:
            raise ParseError(f"empty ladder {text!r}")
        return list(range(lo, hi + 1))
    try:
        return sorted(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ParseError(f"bad ladder {text!r}; expected 'lo..hi'") from None


def _line_index(text):
    index = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
        elif "=" in s and section and not s.startswith(("#", ";")):
            index[(section, s.split("=", 1)[0].strip())] = lineno
    return index


def _convert(raw, typ, where, line):
    try:
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
        if typ in ("Optional[float]",):
            return None if raw.strip() == "" else float(raw)
        return raw.strip()
    except ValueError:
        raise ParseError(f"{where}: cannot read {raw!r} as {typ}", line) from None


def parse_config(text):
    """Parse scenario text; omitted keys keep their documented defaults."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("key outside of any [section]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ParseError(f"duplicate key {exc.option!r}", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ParseError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", lineno) from None

    lines = _line_index(text)
    config = ScenarioConfig()
    sections = {f.name: f for f in fields(ScenarioConfig)}
    for section in parser.sections():
        if section not in sections:
            raise UnknownKey(f"unknown section [{section}]", _section_line(text, section))
        current = getattr(config, section)
        known = {f.name: f.type for f in fields(current)}
        updates = {}
        for key, raw in parser.items(section):
            line = lines.get((section, key))
            if key not in known:
                raise UnknownKey(f"unknown key {key!r} in [{section}]", line)
            value = _convert(raw, known[key], f"[{section}] {key}", line)
            if (section, key) in CHOICES and value not in CHOICES[(section, key)]:
                raise ParseError(f"[{section}] {key}: {value!r} not in {sorted(CHOICES[(section, key)])}", line)
            bound = BOUNDS.get((section, key))
            if bound and not bound[0](value):
                raise ParseError(f"[{section}] {key} = {raw.strip()} {bound[1]}", line)
            if isinstance(value, float) and not math.isfinite(value):
                raise ParseError(f"[{section}] {key} must be finite", line)
            updates[key] = value
        setattr(config, section, replace(current, **updates))
    if config.time.ladder:
        parse_ladder(config.time.ladder)
    try:
        poly = _floats(config.nonlinearity.beta_poly)
    except ValueError:
        poly = []
    if not poly:
        raise ParseError(f"beta_poly must be a comma list of numbers, got {config.nonlinearity.beta_poly!r}",
                         lines.get(("nonlinearity", "beta_poly")))
    return config


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _section_line(text, section):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def serialize_config(config):
    out = []
    for sec in fields(config):
        out.append(f"[{sec.name}]")
        body = getattr(config, sec.name)
        for f in fields(body):
            value = getattr(body, f.name)
            if value is None:
                text = ""
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            out.append(f"{f.name} = {text}")
        out.append("")
    return "\n".join(out)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# -- building the problem ---------------------------------------------------------------

def _kernel_function(cfg):
    k = cfg.kernel
    if k.name == "zero":
        return zero_kernel()
    if k.name == "constant":
        return constant_kernel(k.value)
    if k.name == "gaussian":
        return gaussian_kernel(k.width, k.strength)
    with open(k.table, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    try:
        data = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError:
        data = np.array([[float(a), float(b)] for a, b in rows[1:]])
    return tabulated_kernel(data[:, 0], data[:, 1])


def _nonlinearity(cfg):
    n = cfg.nonlinearity
    if n.beta == "cubic":
        nl = cubic_beta(n.beta_coeff, n.pi_slope)
    elif n.beta == "piecewise":
        nl = piecewise_beta(n.beta_coeff, n.pi_slope, n.knee)
    elif n.beta == "linear":
        nl = linear_beta(n.beta_coeff, n.pi_slope)
    else:
        nl = polynomial_beta(_floats(n.beta_poly), n.pi_slope)
    if n.pi_lipschitz is not None:
        nl = replace(nl, pi_lipschitz=float(n.pi_lipschitz))
    return nl


def _cosine(mesh):
    out = np.ones(mesh.size)
    for i, L in enumerate(mesh.extent):
        out *= np.cos(np.pi * mesh.points[:, i] / L)
    return out


def build_problem(cfg):
    """Turn a parsed configuration into a :class:`ProblemSpec`."""
    mesh = SpatialMesh.uniform(cfg.mesh.nodes, cfg.mesh.extent, cfg.mesh.dimension)
    d = cfg.data
    T = cfg.time.T
    x1 = mesh.points[:, 0]

    if d.f == "zero":
        f = lambda pts, t: 0.0  # noqa: E731
    elif d.f == "constant":
        fv = d.f_value
        f = lambda pts, t: fv  # noqa: E731
    else:
        fv, fa, fw = d.f_value, d.f_amp, d.f_freq
        f = lambda pts, t: fv + fa * np.sin(2.0 * np.pi * fw * t)  # noqa: E731

    if d.g == "constant":
        gv = d.g_value
        g = lambda pts, t: gv  # noqa: E731
    else:
        gv, ga = d.g_value, d.g_amp
        g = lambda pts, t: gv * (1.0 + ga * np.sin(np.pi * t / T) ** 2)  # noqa: E731

    theta0 = np.full(mesh.size, d.theta0_value)
    if d.theta0 == "linear":
        theta0 = d.theta0_value + d.theta0_slope * x1

    if d.phi0 == "cosine":
        phi0 = d.phi0_amp * _cosine(mesh)
    elif d.phi0 == "constant":
        phi0 = np.full(mesh.size, d.phi0_amp)
    elif d.phi0 == "random":
        phi0 = d.phi0_amp * np.random.default_rng(d.seed).uniform(-1.0, 1.0, mesh.size)
    else:
        phi0 = np.zeros(mesh.size)

    if d.v0 == "zero":
        v0 = np.zeros(mesh.size)
    elif d.v0 == "constant":
        v0 = np.full(mesh.size, d.v0_value)
    else:
        v0 = d.v0_value * _cosine(mesh)

    return ProblemSpec(
        mesh=mesh,
        kernel=build_kernel(_kernel_function(cfg), mesh),
        nonlinearity=_nonlinearity(cfg),
        T=T,
        f=f,
        g=g,
        theta0=theta0,
        phi0=phi0,
        v0=v0,
        theta_min=cfg.solver.theta_min,
    )


def run_options(cfg):
    s = cfg.solver
    return dict(tol=s.tol, max_iter=s.max_iter, elliptic_tol=s.elliptic_tol,
                points_per_step=s.points_per_step)
