"""INI-style problem configuration: parsing, validation, defaults.

A problem file has flat sections [outer], [inner], [discretization],
[transmission], [solver], [shape], [output].  Expression values may be
quoted; all parse and validation errors are collected and reported
together, each tagged with the line where its key appears.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .expressions import ExpressionError, ExpressionFn
from .geometry import (
    DiscreteBoundary,
    ParametricCurve,
    circle,
    contains_points,
    discretize,
    ellipse,
    expression_curve,
    star,
)
from .nonlinear import NonlinearError, TransmissionData
from .shape import ShapeFamily


class ConfigError(ValueError):
    """All collected problems of one config file."""

    def __init__(self, problems: List[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))
        self.problems = problems


@dataclass(frozen=True)
class ProblemConfig:
    outer_curve: ParametricCurve = field(repr=False)
    inner_curve: ParametricCurve = field(repr=False)
    n: int
    data: TransmissionData = field(repr=False)
    method: str
    tol: float
    max_iter: int
    damping: float
    family: Optional[ShapeFamily] = field(repr=False, default=None)
    s_max: float = 0.0
    steps: int = 0
    probes_interior: Tuple[Tuple[float, float], ...] = ()
    probes_exterior: Tuple[Tuple[float, float], ...] = ()
    field_grid: int = 40
    write_figures: bool = True

    def boundaries(self) -> Tuple[DiscreteBoundary, DiscreteBoundary]:
        return discretize(self.outer_curve, self.n), discretize(self.inner_curve, self.n)


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
        return value[1:-1]
    return value


class _Collector:
    def __init__(self, path):
        self.problems: List[str] = []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                self.lines = fh.read().splitlines()
        except OSError:
            self.lines = []

    def line_of(self, key: str) -> str:
        for i, line in enumerate(self.lines, start=1):
            stripped = line.strip()
            if stripped.startswith(key) and "=" in stripped:
                return f"line {i}"
        return "unknown line"

    def add(self, key: str, message: str):
        self.problems.append(f"{key} ({self.line_of(key)}): {message}")


def _get(section, key, default=None):
    if section is None or key not in section:
        return default
    return _unquote(section[key])


def _build_curve(cp, name, errs: _Collector) -> Optional[ParametricCurve]:
    if name not in cp:
        errs.problems.append(f"missing section [{name}]")
        return None
    sec = cp[name]
    kind = _get(sec, "kind", "builtin")
    try:
        if kind == "builtin":
            shape = _get(sec, "shape", "circle")
            center = (float(_get(sec, "center_x", "0")),
                      float(_get(sec, "center_y", "0")))
            if shape == "circle":
                return circle(float(_get(sec, "radius", "1")), center)
            if shape == "ellipse":
                return ellipse(float(_get(sec, "a", "1")),
                               float(_get(sec, "b", "1")), center)
            if shape == "star":
                return star(float(_get(sec, "radius", "1")),
                            float(_get(sec, "amplitude", "0")),
                            int(_get(sec, "frequency", "3")), center)
            errs.add("shape", f"unknown builtin shape {shape!r}")
            return None
        if kind == "expression":
            parts = {}
            for key in ("x", "y", "dx", "dy"):
                src = _get(sec, key)
                if src is None:
                    errs.add(key, f"[{name}] expression curve needs {key!r}")
                    return None
                parts[key] = ExpressionFn(src, ("t",))
            return expression_curve(parts["x"], parts["y"], parts["dx"], parts["dy"])
        errs.add("kind", f"unknown curve kind {kind!r}")
    except (ValueError, ExpressionError) as exc:
        errs.add("kind", f"[{name}]: {exc}")
    return None


def _parse_points(text: str):
    points = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        xy = chunk.replace(",", " ").split()
        if len(xy) != 2:
            raise ValueError(f"point {chunk!r} is not an x y pair")
        points.append((float(xy[0]), float(xy[1])))
    return tuple(points)


def load_config(path) -> ProblemConfig:
    """Read and fully validate a problem file; raises :class:`ConfigError`."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    errs = _Collector(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc}"]) from exc
    except configparser.Error as exc:
        raise ConfigError([str(exc)]) from exc

    outer_curve = _build_curve(cp, "outer", errs)
    inner_curve = _build_curve(cp, "inner", errs)

    disc = cp["discretization"] if "discretization" in cp else None
    n = 64
    try:
        n = int(_get(disc, "n", "64"))
        if n % 2 != 0:
            errs.add("n", "N must be even")
        elif not 8 <= n <= 4096:
            errs.add("n", "N must lie in [8, 4096]")
    except ValueError:
        errs.add("n", "N must be an integer")

    trans = cp["transmission"] if "transmission" in cp else None
    data = None
    if trans is None:
        errs.problems.append("missing section [transmission]")
    else:
        try:
            data = TransmissionData.from_sources(
                F1=_get(trans, "f1", "0"), F2=_get(trans, "f2", "0"),
                dF1_dz1=_get(trans, "df1_dz1", "0"),
                dF1_dz2=_get(trans, "df1_dz2", "0"),
                dF2_dz1=_get(trans, "df2_dz1", "0"),
                dF2_dz2=_get(trans, "df2_dz2", "0"),
                f_o=_get(trans, "f_o", "0"),
            )
        except (ExpressionError, NonlinearError) as exc:
            errs.add("f1", str(exc))

    solver = cp["solver"] if "solver" in cp else None
    method = _get(solver, "method", "hybrid")
    if method not in ("picard", "newton", "hybrid"):
        errs.add("method", f"unknown method {method!r}")
    tol, max_iter, damping = 1e-10, 100, 1.0
    try:
        tol = float(_get(solver, "tol", "1e-10"))
        max_iter = int(_get(solver, "max_iter", "100"))
        damping = float(_get(solver, "damping", "1.0"))
        if tol <= 0 or max_iter < 1 or not 0 < damping <= 1:
            errs.add("tol", "need tol > 0, max_iter >= 1, 0 < damping <= 1")
    except ValueError:
        errs.add("tol", "solver numbers malformed")

    family = None
    s_max, steps = 0.0, 0
    probes_interior: tuple = ()
    probes_exterior: tuple = ()
    if "shape" in cp:
        sec = cp["shape"]
        try:
            s_max = float(_get(sec, "s_max", "0"))
            steps = int(_get(sec, "steps", "0"))
            if steps < 0 or s_max < 0:
                errs.add("steps", "need steps >= 0 and s_max >= 0")
        except ValueError:
            errs.add("s_max", "shape numbers malformed")
        try:
            probes_interior = _parse_points(_get(sec, "interior_probes", ""))
            probes_exterior = _parse_points(_get(sec, "exterior_probes", ""))
        except ValueError as exc:
            errs.add("interior_probes", str(exc))
        if inner_curve is not None and _get(sec, "dx") is not None:
            try:
                family = ShapeFamily.from_sources(
                    inner_curve,
                    dx=_get(sec, "dx"), dy=_get(sec, "dy", "0"),
                    dx_dt=_get(sec, "dx_dt", "0"), dy_dt=_get(sec, "dy_dt", "0"),
                )
            except (ExpressionError, ValueError) as exc:
                errs.add("dx", str(exc))

    out = cp["output"] if "output" in cp else None
    field_grid, write_figures = 40, True
    try:
        field_grid = int(_get(out, "field_grid", "40"))
        if field_grid < 2:
            errs.add("field_grid", "field_grid must be >= 2")
        write_figures = _get(out, "write_figures", "true").lower() in ("1", "true", "yes")
    except ValueError:
        errs.add("field_grid", "output numbers malformed")

    # probe containment at the reference shape
    if outer_curve is not None and inner_curve is not None and not errs.problems:
        outer_b = discretize(outer_curve, max(n, 64))
        inner_b = discretize(inner_curve, max(n, 64))
        for p in probes_interior:
            if not contains_points(inner_b, [p])[0]:
                errs.add("interior_probes", f"probe {p} is not inside the inclusion")
        for p in probes_exterior:
            inside = contains_points(outer_b, [p])[0] \
                and not contains_points(inner_b, [p])[0]
            if not inside:
                errs.add("exterior_probes",
                         f"probe {p} is not in the annular region")

    if errs.problems:
        raise ConfigError(errs.problems)

    return ProblemConfig(
        outer_curve=outer_curve, inner_curve=inner_curve, n=n, data=data,
        method=method, tol=tol, max_iter=max_iter, damping=damping,
        family=family, s_max=s_max, steps=steps,
        probes_interior=probes_interior, probes_exterior=probes_exterior,
        field_grid=field_grid, write_figures=write_figures,
    )
