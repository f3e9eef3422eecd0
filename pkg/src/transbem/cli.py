"""Command-line front end: solve, perturb, verify, convergence.

Every command reads one INI problem file, writes delimited results and
rendered figures into the output directory, and reports through exit
codes: 0 success, 1 configuration error, 2 non-convergence or partial
results (outputs still written), 3 internal error, 4 verification
failure.  All files are written atomically and numeric output uses the
shortest round-trip float representation, so identical inputs produce
bitwise-identical CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import plotting
from .config import ConfigError, ProblemConfig, load_config
from .geometry import ShapeMap, discretize, sigma_tilde
from .nonlinear import (
    ConvergenceError,
    TransmissionSystem,
    linearization_matrix,
    reconstruct_solution,
)
from .operators import check_A_conditions, zero_density_set
from .oracle import fourier_V_eigenvalue
from .potential import (
    BoundaryDensity,
    near_boundary,
    normal_derivative,
    trace_V_matrix,
    wstar_matrix,
)
from .shape import BranchError, continue_branch, smoothness_probe

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2
EXIT_INTERNAL = 3
EXIT_VERIFY = 4


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _say(args, message):
    if not args.quiet:
        print(message)


def _probe_names(config: ProblemConfig):
    names = ([f"u_i_probe{j}" for j in range(len(config.probes_interior))]
             + [f"u_o_probe{j}" for j in range(len(config.probes_exterior))])
    return names


def _probe_values(config: ProblemConfig, densities, outer, inner):
    pair = reconstruct_solution(densities, outer, inner)
    vals = []
    if config.probes_interior:
        vals.extend(pair.u_i(np.asarray(config.probes_interior)).tolist())
    if config.probes_exterior:
        vals.extend(pair.u_o(np.asarray(config.probes_exterior)).tolist())
    return vals


def _field_samples(config: ProblemConfig, densities, outer, inner):
    """Rectilinear grid with region masks; a band near boundaries is skipped."""
    pad = 0.05 * (outer.nodes.max() - outer.nodes.min())
    lo = outer.nodes.min(axis=0) - pad
    hi = outer.nodes.max(axis=0) + pad
    m = config.field_grid
    xs = np.linspace(lo[0], hi[0], m)
    ys = np.linspace(lo[1], hi[1], m)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=-1)

    pair = reconstruct_solution(densities, outer, inner)
    region = pair.classify(points)
    band = near_boundary(outer, points) | near_boundary(inner, points)
    region[band] = "skip"

    values = np.zeros(len(points))
    for name, fn in (("outer", pair.u_o), ("inner", pair.u_i)):
        idx = np.nonzero(region == name)[0]
        if idx.size:
            values[idx] = fn(points[idx])
    rows = []
    for p, reg, val in zip(points, region, values):
        rows.append((float(p[0]), float(p[1]), reg,
                     float(val) if reg != "skip" else ""))
    return xs, ys, region, values, rows


def _write_solution(config, args, densities, trace, outer, inner):
    out = args.out_dir
    _write_json(os.path.join(out, "densities.json"), {
        "mu_o": densities.mu_o.values.tolist(),
        "mu_i": densities.mu_i.values.tolist(),
        "eta_i": densities.eta_i.values.tolist(),
        "rho_o": densities.rho_o,
        "rho_i": densities.rho_i,
    })
    _write_csv(os.path.join(out, "trace.csv"),
               ["iteration", "residual", "step", "phase"], trace)
    xs, ys, region, values, rows = _field_samples(config, densities, outer, inner)
    _write_csv(os.path.join(out, "field.csv"), ["x", "y", "region", "value"], rows)
    probes = _probe_values(config, densities, outer, inner)
    _write_json(os.path.join(out, "probes.json"),
                dict(zip(_probe_names(config), probes)))
    if config.write_figures:
        masked = [v if r != "skip" else np.nan for r, v in zip(region, values)]
        plotting.field_figure(os.path.join(out, "field.png"), xs, ys,
                              masked, region)
        plotting.trace_figure(os.path.join(out, "trace.png"), trace)


def cmd_solve(config: ProblemConfig, args) -> int:
    outer, inner = config.boundaries()
    system = TransmissionSystem(config.data, outer, inner)
    try:
        densities, trace = system.solve(
            method=config.method, tol=config.tol,
            max_iter=config.max_iter, damping=config.damping)
    except ConvergenceError as exc:
        _write_csv(os.path.join(args.out_dir, "trace.csv"),
                   ["iteration", "residual", "step", "phase"], exc.trace)
        _say(args, f"solve: no convergence ({exc})")
        return EXIT_PARTIAL
    _write_solution(config, args, densities, trace, outer, inner)
    _say(args, f"solve: converged, residual {trace[-1][1]:.3e}, "
               f"{len(trace) - 1} iterations")
    return EXIT_OK


def _branch_rows(config, branch):
    rows = []
    for bp in branch:
        rows.append([bp.s, bp.residual_norm, bp.densities.rho_o,
                     bp.densities.rho_i]
                    + [float(v) for v in bp.probe_interior]
                    + [float(v) for v in bp.probe_exterior])
    return rows


def cmd_perturb(config: ProblemConfig, args) -> int:
    if config.family is None:
        raise ConfigError(["[shape] section with a displacement family "
                           "is required for perturb"])
    outer, inner = config.boundaries()
    partial = False
    try:
        branch = continue_branch(
            config.family, config.steps, config.data, outer, inner,
            config.s_max, probes_interior=config.probes_interior,
            probes_exterior=config.probes_exterior, tol=config.tol,
            solver_max_iter=config.max_iter)
    except BranchError as exc:
        branch = exc.partial
        partial = True
        _say(args, f"perturb: partial branch ({exc})")
        if not branch:
            return EXIT_PARTIAL

    names = _probe_names(config)
    header = ["s", "residual_norm", "rho_o", "rho_i"] + names
    rows = _branch_rows(config, branch)
    _write_csv(os.path.join(args.out_dir, "branch.csv"), header, rows)

    smooth_rows = []
    n_int = len(config.probes_interior)
    if not partial and len(branch) >= 17:
        s_vals = [bp.s for bp in branch]
        for p, name in enumerate(names):
            use_ext = p >= n_int
            idx = p - n_int if use_ext else p
            diags = smoothness_probe(branch, idx, max_order=4,
                                     use_exterior=use_ext)
            for order, d in diags.items():
                for j, c in enumerate(d.centers):
                    smooth_rows.append([
                        name, order, int(c), s_vals[c], d.d_h[j], d.d_2h[j],
                        d.d_4h[j], float(d.ratios[j]),
                    ])
        _write_csv(os.path.join(args.out_dir, "smoothness.csv"),
                   ["probe", "order", "center", "s", "d_h", "d_2h", "d_4h",
                    "ratio"], smooth_rows)

    if config.write_figures and branch:
        cols = list(map(list, zip(*[r[4:] for r in rows]))) if names else []
        plotting.branch_figure(os.path.join(args.out_dir, "branch.png"),
                               [r[0] for r in rows], [r[1] for r in rows],
                               cols, names)
    if partial:
        return EXIT_PARTIAL
    _say(args, f"perturb: branch of {len(branch)} points written")
    return EXIT_OK


def _verify_checks(config: ProblemConfig, seed: int):
    """Measured potential-theory identities on the configured geometry."""
    rng = np.random.default_rng(seed)
    outer, inner = config.boundaries()
    checks = []

    def add(name, measured, threshold, status=None):
        if status is None:
            status = "passed" if measured <= threshold else "failed"
        checks.append({"name": name, "measured": measured,
                       "threshold": threshold, "status": status})

    # jump identity on both configured boundaries
    worst = 0.0
    for b in (outer, inner):
        mu = BoundaryDensity(b, rng.standard_normal(b.n))
        gap = (normal_derivative("exterior", b, mu).values
               - normal_derivative("interior", b, mu).values - mu.values)
        worst = max(worst, float(np.max(np.abs(gap)) / np.max(np.abs(mu.values))))
    add("jump_identity", worst, 1e-14)

    # symmetry of the single layer trace under the arclength inner product
    worst = 0.0
    for b in (outer, inner):
        v = trace_V_matrix(b)
        mu = rng.standard_normal(b.n)
        eta = rng.standard_normal(b.n)
        lhs = float(np.sum(b.weights * (v @ mu) * eta))
        rhs = float(np.sum(b.weights * mu * (v @ eta)))
        worst = max(worst, abs(lhs - rhs)
                    / (np.linalg.norm(mu) * np.linalg.norm(eta)))
    add("trace_symmetry", worst, 1e-11)

    # closed-form circle references (skipped for non-circle geometry)
    for label, curve in (("outer", config.outer_curve),
                         ("inner", config.inner_curve)):
        if curve.kind != "circle":
            add(f"fourier_trace_{label}", 0.0, 1e-11, status="skipped")
            add(f"wstar_average_{label}", 0.0, 1e-12, status="skipped")
            continue
        b = discretize(curve, 256)
        v = trace_V_matrix(b)
        worst = 0.0
        for k in range(0, 9):
            lam = fourier_V_eigenvalue(curve.radius, k)
            for wave in (np.cos, np.sin):
                mode = wave(k * b.params)
                if k == 0 and wave is np.sin:
                    continue
                worst = max(worst, float(np.max(np.abs(v @ mode - lam * mode))))
        add(f"fourier_trace_{label}", worst, 1e-11)
        mu = rng.standard_normal(b.n)
        target = float(np.sum(b.weights * mu)) / (4 * np.pi * curve.radius)
        measured = float(np.max(np.abs(wstar_matrix(b) @ mu - target)))
        add(f"wstar_average_{label}", measured, 1e-12)

    # change-of-variables weight of the identity map
    st = sigma_tilde(ShapeMap.identity(config.inner_curve), config.n)
    add("sigma_tilde_identity", float(np.max(np.abs(st - 1.0))), 1e-14)

    # admissibility of the zero-trace linearization
    zeros = np.zeros(inner.n)
    a0 = linearization_matrix(config.data, inner.nodes, zeros, zeros)
    rep = check_A_conditions(a0, inner)
    add("A0_admissible", 0.0 if rep.admissible else 1.0, 0.5)

    # homogeneous system has only the zero solution
    system = TransmissionSystem(config.data, outer, inner)
    if rep.admissible:
        from .operators import solve_JA
        zero_rhs = np.zeros(outer.n + 2 * inner.n)
        hom = solve_JA(system.J0, zero_rhs)
        add("homogeneous_uniqueness", hom.norm(), 1e-10)
    else:
        add("homogeneous_uniqueness", 0.0, 1e-10, status="skipped")

    tamper = os.environ.get("TRANSBEM_VERIFY_TAMPER")
    if tamper:
        for check in checks:
            if check["name"] == tamper:
                check["threshold"] = -1.0
                check["status"] = "failed"
    return checks


def cmd_verify(config: ProblemConfig, args) -> int:
    checks = _verify_checks(config, args.seed)
    all_passed = all(c["status"] != "failed" for c in checks)
    _write_json(os.path.join(args.out_dir, "verify.json"), {
        "seed": args.seed,
        "all_passed": all_passed,
        "checks": checks,
    })
    for c in checks:
        _say(args, f"verify: {c['name']}: {c['status']} "
                   f"(measured {c['measured']:.3e}, threshold {c['threshold']:.1e})")
    return EXIT_OK if all_passed else EXIT_VERIFY


def cmd_convergence(config: ProblemConfig, args) -> int:
    levels = [n for n in (16, 32, 64, 128, 256) if n <= config.n]
    if not levels:
        levels = [config.n]
    names = _probe_names(config) + ["rho_o", "rho_i"]
    values, runtimes = [], []
    code = EXIT_OK
    for n in levels:
        outer = discretize(config.outer_curve, n)
        inner = discretize(config.inner_curve, n)
        system = TransmissionSystem(config.data, outer, inner)
        t0 = time.perf_counter()
        try:
            densities, _ = system.solve(method=config.method, tol=config.tol,
                                        max_iter=config.max_iter,
                                        damping=config.damping)
        except ConvergenceError:
            _say(args, f"convergence: no convergence at N = {n}")
            code = EXIT_PARTIAL
            values.append(None)
            runtimes.append(time.perf_counter() - t0)
            continue
        runtimes.append(time.perf_counter() - t0)
        values.append(_probe_values(config, densities, outer, inner)
                      + [densities.rho_o, densities.rho_i])

    finest = next((v for v in reversed(values) if v is not None), None)
    rows = []
    for n, vals, rt in zip(levels, values, runtimes):
        if vals is None:
            rows.append([n, rt] + ["" for _ in names])
        elif len(levels) == 1 or finest is None:
            rows.append([n, rt] + ["" for _ in names])
        else:
            rows.append([n, rt] + [abs(v - f) for v, f in zip(vals, finest)])
    header = ["n", "runtime"] + [f"delta_{name}" for name in names]
    _write_csv(os.path.join(args.out_dir, "convergence.csv"), header, rows)

    if config.write_figures and len(levels) > 1 and finest is not None:
        cols = []
        for j in range(len(names)):
            cols.append([row[2 + j] if row[2 + j] != "" else np.nan
                         for row in rows[:-1]])
        plotting.convergence_figure(os.path.join(args.out_dir, "convergence.png"),
                                    levels[:-1], cols, names)
    _say(args, f"convergence: levels {levels} written")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="transbem",
        description="Boundary-element solver for a nonlinear transmission "
                    "problem with a perturbable inclusion.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="problem configuration file (INI)")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0,
                        help="seed for randomized checks")
    common.add_argument("--quiet", action="store_true", help="suppress chatter")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common],
                   help="solve the unperturbed problem")
    sub.add_parser("perturb", parents=[common],
                   help="continue the branch along the shape family")
    sub.add_parser("verify", parents=[common],
                   help="run potential-theory identity checks")
    sub.add_parser("convergence", parents=[common],
                   help="discretization refinement study")
    return parser


_COMMANDS = {
    "solve": cmd_solve,
    "perturb": cmd_perturb,
    "verify": cmd_verify,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        os.makedirs(args.out_dir, exist_ok=True)
        return _COMMANDS[args.command](config, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
