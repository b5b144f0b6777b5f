"""Command-line front end: configuration loading, run orchestration, and
file emission.

Verbs: roots, mode-table, direction, nodal-export, residual-check,
continue, selfcheck. All outputs are plain data files (CSV / JSON / OBJ)
written to the output directory together with a manifest recording the
exact configuration, its hash, and the random seed, so identical
invocations produce byte-identical results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from .harmonics import SpectralField, analyze, build_grid, sf_index, synthesize
from .geometry import export_node_csv, export_obj, geometry_from_u
from .model import (
    DEFAULT_CONFIG,
    ModelState,
    constitutive_from_config,
)
from .residual import full_residual, state_from_coeffs
from .linear import apply_L, mode_data
from .symmetry import (
    CATALOG,
    act,
    fixed_space,
    reduce_basis,
    rotation,
    subgroup,
)
from .continuation import (
    ContinuationConfig,
    NewtonError,
    branch_switch,
    continue_branch,
    detect_bifurcations,
    frozen_u_probe,
)

__all__ = ["main", "load_config", "RunConfigError"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2


class RunConfigError(ValueError):
    pass


DEFAULT_RUN_CONFIG = {
    "constitutive": {
        "epsilon": DEFAULT_CONFIG["epsilon"],
        "pressure": DEFAULT_CONFIG["pressure"],
        "W": DEFAULT_CONFIG["W"],
        "B": DEFAULT_CONFIG["B"],
        "E": DEFAULT_CONFIG["E"],
    },
    "l_max": 16,
    "subgroup": "D6d",
    "l": [2, 3, 4, 5, 6],
    "lambda_interval": None,
    "roots": "positive",
    "continuation": {
        "t0": 1e-2,
        "ds": 2e-2,
        "ds_min": 1e-5,
        "ds_max": 0.1,
        "newton_tol": 1e-9,
        "max_newton": 12,
        "max_points": 40,
        "max_folds": 10,
    },
    "snapshot_every": 5,
    "out": "runs",
    "seed": 0,
}


def _merge(base, override, path=""):
    out = dict(base)
    for key, val in override.items():
        if key not in base:
            raise RunConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and isinstance(val, dict):
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = val
    return out


def load_config(path=None, overrides=None):
    """Default run configuration, optionally merged with a JSON file and
    command-line overrides; validated before any computation."""
    cfg = json.loads(json.dumps(DEFAULT_RUN_CONFIG))
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise RunConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(user, dict):
            raise RunConfigError("config root must be a JSON object")
        # the constitutive block has a free-form schema owned by the model
        # module; merge it wholesale
        con_cfg = user.pop("constitutive", None)
        cfg = _merge(cfg, user)
        if con_cfg is not None:
            cfg["constitutive"] = con_cfg
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    if not isinstance(cfg["l_max"], int) or cfg["l_max"] < 1:
        raise RunConfigError("l_max must be a positive integer")
    ls = cfg["l"]
    if isinstance(ls, int):
        cfg["l"] = ls = [ls]
    if not all(isinstance(l, int) and l >= 0 for l in ls):
        raise RunConfigError("l must be a list of nonnegative integers")
    if cfg["subgroup"] is not None:
        try:
            subgroup(cfg["subgroup"])
        except KeyError as exc:
            raise RunConfigError(
                f"unknown subgroup {cfg['subgroup']!r}; "
                f"catalogue: {', '.join(CATALOG)}") from exc
    li = cfg["lambda_interval"]
    if li is not None and not (len(li) == 2 and li[0] < li[1]):
        raise RunConfigError("lambda_interval must be [lo, hi] with lo < hi")
    if cfg["roots"] not in ("positive", "negative", "all"):
        raise RunConfigError("roots must be 'positive', 'negative' or 'all'")
    if not isinstance(cfg["seed"], int):
        raise RunConfigError("seed must be an integer")
    try:
        _continuation_config(cfg).validate()
    except (TypeError, ValueError) as exc:
        raise RunConfigError(f"continuation config invalid: {exc}") from exc
    try:
        constitutive_from_config(cfg["constitutive"])
    except (KeyError, TypeError, ValueError) as exc:
        raise RunConfigError(f"constitutive config invalid: {exc}") from exc


def _continuation_config(cfg):
    c = cfg["continuation"]
    return ContinuationConfig(
        t0=float(c["t0"]), ds=float(c["ds"]), ds_min=float(c["ds_min"]),
        ds_max=float(c["ds_max"]), newton_tol=float(c["newton_tol"]),
        max_newton=int(c["max_newton"]), max_points=int(c["max_points"]),
        max_folds=int(c["max_folds"]), subgroup=cfg["subgroup"],
        l=cfg["l"][0] if cfg["l"] else 0, l_max=int(cfg["l_max"]))


def _config_hash(cfg):
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _write_manifest(outdir, cfg, command, outputs):
    manifest = {
        "command": command,
        "config": cfg,
        "config_sha256": _config_hash(cfg),
        "seed": cfg["seed"],
        "outputs": sorted(outputs),
        "versions": {
            "numpy": np.__version__,
            "scipy": __import__("scipy").__version__,
        },
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
        fh.write("\n")
    return path


def _outdir(cfg):
    os.makedirs(cfg["out"], exist_ok=True)
    return cfg["out"]


def _csv_row(values):
    return ",".join(repr(v) if isinstance(v, float) else str(v)
                    for v in values) + "\n"


# ---------------------------------------------------------------- verbs


def cmd_roots(cfg):
    """Characteristic roots per requested degree: columns l, root,
    crossing_slope."""
    con = constitutive_from_config(cfg["constitutive"])
    interval = cfg["lambda_interval"]
    if interval is not None:
        interval = tuple(interval)
    outdir = _outdir(cfg)
    path = os.path.join(outdir, "roots.csv")
    with open(path, "w") as fh:
        fh.write("l,root,crossing_slope\n")
        for l in cfg["l"]:
            for m in mode_data(l, con, interval):
                if not m.tangential:
                    fh.write(_csv_row([l, m.lam, m.crossing_slope]))
    _write_manifest(outdir, cfg, "roots", ["roots.csv"])
    print(f"wrote {path}")
    return EXIT_OK


def cmd_mode_table(cfg):
    """Mode table per degree: root, amplitude factors sigma/tau, branch
    type, and crossing slope."""
    con = constitutive_from_config(cfg["constitutive"])
    interval = cfg["lambda_interval"]
    if interval is not None:
        interval = tuple(interval)
    outdir = _outdir(cfg)
    path = os.path.join(outdir, "mode_table.csv")
    with open(path, "w") as fh:
        fh.write("l,root,sigma,tau,pitchfork,tangential,crossing_slope\n")
        for l in cfg["l"]:
            for m in mode_data(l, con, interval):
                fh.write(_csv_row([l, m.lam, m.sigma, m.tau,
                                   int(m.pitchfork), int(m.tangential),
                                   m.crossing_slope]))
    _write_manifest(outdir, cfg, "mode-table", ["mode_table.csv"])
    print(f"wrote {path}")
    return EXIT_OK


def _direction_field(cfg):
    """Invariant direction data for (l, subgroup); returns (l, fs, field)
    where field is None when the fixed space is not one-dimensional."""
    l = cfg["l"][0]
    grid = build_grid(max(cfg["l_max"], l))
    fs = fixed_space(l, subgroup(cfg["subgroup"]), grid)
    if fs.dimension != 1:
        return l, fs, None, grid
    f = SpectralField.zeros(grid.l_max)
    base = sf_index(l, -l)
    f.coeffs[base:base + 2 * l + 1] = fs.basis_unnormalized[0]
    return l, fs, f, grid


def cmd_direction(cfg):
    """Fixed-space data and nodal-set mesh for one (l, subgroup) pair."""
    outdir = _outdir(cfg)
    l, fs, f, grid = _direction_field(cfg)
    report = {"l": l, "subgroup": cfg["subgroup"], "dimension": fs.dimension}
    outputs = ["direction.json"]
    if f is None:
        print(f"fixed space of degree {l} under {cfg['subgroup']} has "
              f"dimension {fs.dimension}; no single direction")
    else:
        vec = fs.basis_unnormalized[0]
        cut = 1e-12 * np.max(np.abs(vec))
        report["coefficients"] = [
            [l, m, float(vec[l + m])]
            for m in range(-l, l + 1) if abs(vec[l + m]) > cut]
        vals = synthesize(f, grid).values
        obj = os.path.join(outdir, "direction.obj")
        export_obj(obj, SpectralField.zeros(grid.l_max), grid,
                   vertex_scalar=vals)
        outputs.append("direction.obj")
        print(f"degree-{l} {cfg['subgroup']}-invariant direction written")
    path = os.path.join(outdir, "direction.json")
    with open(path, "w") as fh:
        json.dump(report, fh, sort_keys=True, indent=1)
        fh.write("\n")
    _write_manifest(outdir, cfg, "direction", outputs)
    return EXIT_OK


def cmd_nodal_export(cfg):
    """Nodal table and mesh of the invariant direction: the sign of the
    vertex scalar gives the two-phase coloring."""
    outdir = _outdir(cfg)
    l, fs, f, grid = _direction_field(cfg)
    if f is None:
        print(f"fixed space of degree {l} under {cfg['subgroup']} has "
              f"dimension {fs.dimension}; nothing to export", file=sys.stderr)
        return EXIT_FAIL
    vals = synthesize(f, grid).values
    csv_path = os.path.join(outdir, "nodal.csv")
    with open(csv_path, "w") as fh:
        fh.write("theta,psi,value,sign\n")
        for i in range(grid.n_theta):
            for j in range(grid.n_psi):
                fh.write(_csv_row([float(grid.theta[i]), float(grid.psi[j]),
                                   float(vals[i, j]),
                                   int(np.sign(vals[i, j]))]))
    obj_path = os.path.join(outdir, "nodal.obj")
    export_obj(obj_path, SpectralField.zeros(grid.l_max), grid,
               vertex_scalar=vals)
    _write_manifest(outdir, cfg, "nodal-export", ["nodal.csv", "nodal.obj"])
    print(f"wrote {csv_path} and {obj_path}")
    return EXIT_OK


def cmd_residual_check(cfg, n_lambda=30, tol=1e-9):
    """Residual of the undeformed spherical state across lambda; fails if
    any component exceeds the tolerance."""
    con = constitutive_from_config(cfg["constitutive"])
    interval = cfg["lambda_interval"] or (-1.5, 1.5)
    l_max = cfg["l_max"]
    grid = build_grid(l_max)
    state = ModelState.trivial(l_max)
    outdir = _outdir(cfg)
    path = os.path.join(outdir, "residual_check.csv")
    worst = 0.0
    with open(path, "w") as fh:
        fh.write("lambda,phase_inf,shape_inf,area,mean_phase\n")
        for lam in np.linspace(interval[0], interval[1], n_lambda):
            norms = full_residual(state, float(lam), con, grid).norms()
            worst = max(worst, *norms)
            fh.write(_csv_row([float(lam), *[float(x) for x in norms]]))
    _write_manifest(outdir, cfg, "residual-check", ["residual_check.csv"])
    ok = worst <= tol
    print(f"residual-check: max defect {worst:.3e} "
          f"({'PASS' if ok else 'FAIL'}, tolerance {tol:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


def _branch_files(outdir, tag, branch, cfg, grid):
    """Write one branch: JSON-lines points, summary CSV, OBJ snapshots."""
    outputs = []
    jsonl = os.path.join(outdir, f"branch_{tag}.jsonl")
    with open(jsonl, "w") as fh:
        for pt in branch.points:
            fh.write(json.dumps(pt.to_json(), sort_keys=True) + "\n")
    outputs.append(os.path.basename(jsonl))
    csv = os.path.join(outdir, f"branch_{tag}.csv")
    with open(csv, "w") as fh:
        fh.write("s,lambda,amplitude,energy,min_J\n")
        s = 0.0
        prev = None
        for pt in branch.points:
            y = pt.y()
            if prev is not None:
                s += float(np.linalg.norm(y - prev))
            prev = y
            fh.write(_csv_row([s, pt.lam, pt.amplitude, pt.energy, pt.min_J]))
    outputs.append(os.path.basename(csv))
    every = max(1, int(cfg["snapshot_every"]))
    basis = reduce_basis(cfg["l_max"], subgroup(branch.subgroup), grid)
    for k in range(0, len(branch.points), every):
        pt = branch.points[k]
        st = state_from_coeffs(pt.coeffs, basis, cfg["l_max"],
                               pt.zeta, pt.xi)
        vals = synthesize(st.phi, grid).values
        obj = os.path.join(outdir, f"branch_{tag}_point{k:03d}.obj")
        export_obj(obj, st.u, grid, vertex_scalar=vals)
        outputs.append(os.path.basename(obj))
    return outputs


def cmd_continue(cfg):
    """Detect admissible bifurcation points for (l, subgroup), switch onto
    the branch in both directions, and continue each side."""
    con = constitutive_from_config(cfg["constitutive"])
    group = subgroup(cfg["subgroup"])
    l = cfg["l"][0]
    l_max = cfg["l_max"]
    grid = build_grid(l_max)
    interval = cfg["lambda_interval"]
    if interval is not None:
        interval = tuple(interval)
    ccfg = _continuation_config(cfg)
    modes = detect_bifurcations(l, group, con, interval, l_max=min(8, l_max),
                                grid=build_grid(min(8, l_max)))
    if cfg["roots"] == "positive":
        modes = [m for m in modes if m.lam > 0]
    elif cfg["roots"] == "negative":
        modes = [m for m in modes if m.lam < 0]
    if not modes:
        print("no admissible bifurcation point found", file=sys.stderr)
        return EXIT_FAIL
    outdir = _outdir(cfg)
    outputs = []
    for mode in modes:
        for sign, tag in ((+1.0, "plus"), (-1.0, "minus")):
            try:
                start = branch_switch(mode, group, con, sign * ccfg.t0,
                                      l_max=l_max, grid=grid, config=ccfg)
                branch = continue_branch(start, mode, group, con, ccfg, grid)
            except NewtonError as exc:
                print(f"branch (l={mode.l}, root {mode.lam:.6f}, {tag}) "
                      f"failed: {exc}", file=sys.stderr)
                return EXIT_FAIL
            tag_full = f"l{mode.l}_{'p' if mode.lam > 0 else 'm'}_{tag}"
            outputs += _branch_files(outdir, tag_full, branch, cfg, grid)
            print(f"branch {tag_full}: {len(branch.points)} points, "
                  f"termination '{branch.termination}', "
                  f"final lambda {branch.points[-1].lam!r}")
    _write_manifest(outdir, cfg, "continue", outputs)
    return EXIT_OK


def _check(name, value, tol, results):
    ok = value <= tol
    results.append(ok)
    print(f"{'PASS' if ok else 'FAIL'} {name}: defect {value:.3e} "
          f"(tolerance {tol:.1e})")
    return ok


def cmd_selfcheck(cfg):
    """Cross-module invariant suite; nonzero exit on any failure."""
    con = constitutive_from_config(cfg["constitutive"])
    l_max = cfg["l_max"]
    grid = build_grid(l_max)
    rng = np.random.default_rng(cfg["seed"])
    results = []

    # resolution guard: requested degrees must fit the basis with cubic
    # headroom on the grid
    max_l = max(cfg["l"]) if cfg["l"] else 0
    if max_l > l_max or 2 * max_l > grid.l_cap:
        print(f"FAIL aliasing guard: degree {max_l} content does not fit "
              f"l_max={l_max} (grid capacity {grid.l_cap})")
        results.append(False)
    else:
        print(f"PASS aliasing guard: degree {max_l} fits l_max={l_max}")
        results.append(True)

    # spherical state annihilates the residual
    state = ModelState.trivial(l_max)
    worst = 0.0
    for lam in np.linspace(-1.5, 1.5, 11):
        worst = max(worst, *full_residual(state, float(lam), con, grid).norms())
    _check("spherical-state residual", worst, 1e-9, results)

    # Gauss-Bonnet on random shapes band-limited to degree 4
    worst = 0.0
    nb = min(25, (l_max + 1) ** 2)
    for _ in range(3):
        u = SpectralField.zeros(l_max)
        u.coeffs[:nb] = 0.02 * rng.standard_normal(nb) / np.sqrt(
            grid.norms2[:nb])
        g = geometry_from_u(u, grid)
        worst = max(worst, abs(grid.integrate(g.K * g.J) - 4 * np.pi))
    _check("Gauss-Bonnet", worst, 1e-8, results)

    # equivariance of the residual under a random rotation; both sides are
    # compared after projection onto the resolved band (the projection
    # commutes with the rotation)
    G = rotation(rng.standard_normal(3), rng.uniform(0, np.pi))
    phi = SpectralField.zeros(l_max)
    u = SpectralField.zeros(l_max)
    phi.coeffs[:nb] = 0.02 * rng.standard_normal(nb) / np.sqrt(grid.norms2[:nb])
    u.coeffs[:nb] = 0.02 * rng.standard_normal(nb) / np.sqrt(grid.norms2[:nb])
    st = ModelState(phi, u)
    lam = 0.2
    res = full_residual(st, lam, con, grid)
    st_r = ModelState(act(G, phi, grid), act(G, u, grid))
    res_r = full_residual(st_r, lam, con, grid)
    defect = 0.0
    for f_plain, f_rot in ((res.r_phase, res_r.r_phase),
                           (res.r_shape, res_r.r_shape)):
        rotated = synthesize(act(G, analyze(f_plain, l_max), grid), grid)
        projected = synthesize(analyze(f_rot, l_max), grid)
        scale = max(1.0, float(np.max(np.abs(f_plain.values))))
        defect = max(defect, float(np.max(np.abs(
            projected.values - rotated.values))) / scale)
    _check("equivariance", defect, 1e-6, results)

    # analytic linearization against finite differences of the residual
    lam = 0.3
    h = 1e-6
    worst = 0.0
    for _ in range(3):
        G1 = SpectralField.zeros(l_max)
        nu = SpectralField.zeros(l_max)
        G1.coeffs[:16] = rng.standard_normal(16) / np.sqrt(grid.norms2[:16])
        nu.coeffs[:16] = rng.standard_normal(16) / np.sqrt(grid.norms2[:16])
        dz, dx = rng.standard_normal(2)
        sp = ModelState(SpectralField(l_max, h * G1.coeffs),
                        SpectralField(l_max, h * nu.coeffs), h * dz, h * dx)
        sm = ModelState(SpectralField(l_max, -h * G1.coeffs),
                        SpectralField(l_max, -h * nu.coeffs), -h * dz, -h * dx)
        rp = full_residual(sp, lam, con, grid)
        rm = full_residual(sm, lam, con, grid)
        c1, c2, c3, c4 = apply_L(lam, (G1, nu, dz, dx), con,
                                 fd_convention=True)
        fd1 = (rp.r_phase.values - rm.r_phase.values) / (2 * h)
        an1 = synthesize(c1, grid).values
        scale = max(1.0, float(np.max(np.abs(an1))))
        worst = max(worst, float(np.max(np.abs(fd1 - an1))) / scale)
    _check("linearization FD-vs-analytic", worst, 1e-5, results)

    # fixed-space table sanity: one catalogued coefficient ratio
    fs = fixed_space(4, subgroup("OxZ2c"), build_grid(8))
    if fs.dimension == 1:
        vec = fs.basis_unnormalized[0]
        ratio = vec[4 + 0] / vec[4 + 4]
        _check("octahedral degree-4 ratio", abs(ratio - 168.0) / 168.0,
               1e-6, results)
    else:
        print(f"FAIL octahedral degree-4 ratio: dimension {fs.dimension}")
        results.append(False)

    # frozen-shape rigidity probe
    rep = frozen_u_probe(0.1, con, trials=20, seed=cfg["seed"], l_max=8)
    bad = rep["phase_patterns"] + len(rep["full_system_solutions"])
    _check("frozen-shape rigidity probe", float(bad), 0.0, results)

    ok = all(results)
    print(f"selfcheck: {sum(results)}/{len(results)} checks passed")
    return EXIT_OK if ok else EXIT_FAIL


# ----------------------------------------------------------------- main


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="vesiclebif",
        description="Spectral bifurcation toolkit for a two-phase "
                    "vesicle model")
    parser.add_argument("verb", choices=[
        "roots", "mode-table", "direction", "nodal-export",
        "residual-check", "continue", "selfcheck"])
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--l", type=int, default=None,
                        help="single degree override")
    parser.add_argument("--subgroup", default=None)
    parser.add_argument("--lmax", type=int, default=None)
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, {
            "out": args.out, "seed": args.seed,
            "l": [args.l] if args.l is not None else None,
            "subgroup": args.subgroup, "l_max": args.lmax})
    except RunConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    dispatch = {
        "roots": cmd_roots,
        "mode-table": cmd_mode_table,
        "direction": cmd_direction,
        "nodal-export": cmd_nodal_export,
        "residual-check": cmd_residual_check,
        "continue": cmd_continue,
        "selfcheck": cmd_selfcheck,
    }
    try:
        return dispatch[args.verb](cfg)
    except RunConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NewtonError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
