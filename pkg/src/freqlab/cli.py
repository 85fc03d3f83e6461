"""Command-line front end: freq-lab <ode|solve|frequency|audit|check>.

Exit codes: 0 success (audit: genuine), 2 configuration or validation
error, 3 solver non-convergence, 4 contradiction certified, 5 residual
veto, 6 inconclusive audit.  The FREQ_LAB_OUT environment variable
overrides the output directory.
"""

import argparse
import concurrent.futures
import math
import os
import sys

import numpy as np

from . import __version__
from .audit import AuditControls, audit
from .config import ConfigError, RunConfig, parse_problem_spec, parse_run_config
from .fields import (SolverError, load_field, manufactured_bowl, save_field,
                     solve_grid_2d, solve_radial)
from .frequency import ProfileControls, frequency_profile, run_all_identity_checks
from .io import RunRecord, profile_to_csv, trajectory_to_csv, write_csv, write_json
from .model import ProblemSpec, ball_grid, check_A1, check_A3
from .odes import (PmeField, conserved_energy, counterexample_profile,
                   integrate_plane, integrate_radial, zero_audit)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CONTRADICTION = 4
EXIT_VETO = 5
EXIT_INCONCLUSIVE = 6

_CLASSIFICATION_EXIT = {
    "genuine_nonvanishing": EXIT_OK,
    "contradiction_certified": EXIT_CONTRADICTION,
    "residual_veto": EXIT_VETO,
    "inconclusive": EXIT_INCONCLUSIVE,
}


def _build_parser():
    p = argparse.ArgumentParser(prog="freq-lab",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="run/problem config file (INI)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--q", type=str, help="exponent (ode accepts a comma list)")
        sp.add_argument("--N", dest="dimension", type=int)

    sp = sub.add_parser("ode", help="counterexample / energy / shooting / pme demos")
    common(sp)
    sp.add_argument("--counterexample", action="store_const", dest="ode_task",
                    const="counterexample")
    sp.add_argument("--energy", action="store_const", dest="ode_task", const="energy")
    sp.add_argument("--shoot", action="store_const", dest="ode_task", const="shoot")
    sp.add_argument("--pme", action="store_const", dest="ode_task", const="pme")
    sp.add_argument("--amplitude", type=float)
    sp.add_argument("--step", dest="radial_step", type=float)
    sp.add_argument("--tmax", dest="t_max", type=float)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--radius", dest="outer_radius", type=float)

    sp = sub.add_parser("solve", help="produce and serialize a solution field")
    common(sp)
    sp.add_argument("--mode", choices=("radial", "grid2d"))
    sp.add_argument("--amplitude", type=float)
    sp.add_argument("--step", dest="radial_step", type=float)
    sp.add_argument("--radius", dest="outer_radius", type=float)
    sp.add_argument("--rings", type=int)
    sp.add_argument("--angles", type=int)
    sp.add_argument("--boundary", type=str,
                    help="harmonic | radial-trace | cos:<k>:<eps>")
    sp.add_argument("--manufactured", action="store_true", default=None)

    sp = sub.add_parser("frequency", help="frequency profile and identity reports")
    common(sp)
    sp.add_argument("field", help="field file to analyze")
    sp.add_argument("--radii", dest="n_radii", type=int)

    sp = sub.add_parser("audit", help="vanishing-contradiction audit")
    common(sp)
    sp.add_argument("field", help="field file to audit")
    sp.add_argument("--tol-d", dest="tol_d_rel", type=float)
    sp.add_argument("--residual-gate", dest="residual_gate", type=float)
    sp.add_argument("--h-floor", dest="h_floor_rel", type=float)

    sp = sub.add_parser("check", help="assumption audit of a problem spec")
    common(sp)
    sp.add_argument("--samples-x", type=int, default=64)
    sp.add_argument("--samples-s", type=int, default=256)
    return p


def _merge_config(args):
    cfg = parse_run_config(args.config) if args.config else RunConfig()
    cfg.command = args.command
    if args.config:
        cfg.config_path = args.config
    qtext = getattr(args, "q", None)
    q_list = None
    if qtext is not None:
        parts = [float(v) for v in str(qtext).split(",") if v.strip()]
        if not parts:
            raise ConfigError("empty --q")
        cfg.q = parts[0]
        q_list = parts
    for name in ("dimension", "amplitude", "radial_step", "t_max", "t0",
                 "outer_radius", "mode", "rings", "angles", "boundary",
                 "ode_task", "n_radii", "tol_d_rel", "residual_gate",
                 "h_floor_rel", "seed", "jobs", "manufactured"):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    cfg.out_dir = os.environ.get("FREQ_LAB_OUT", cfg.out_dir)
    if getattr(args, "field", None):
        cfg.field_file = args.field
    cfg.validate()
    for q in (q_list or ()):
        probe = RunConfig(command=cfg.command, ode_task=cfg.ode_task, q=q)
        probe.validate()
    return cfg, (q_list or [cfg.q])


def _load_spec(cfg, field=None):
    if cfg.spec_file:
        return parse_problem_spec(cfg.spec_file)
    if cfg.config_path:
        with open(cfg.config_path, encoding="utf-8") as fh:
            text = fh.read()
        if "[domain]" in text:
            return parse_problem_spec(text)
    dim = field.dim if field is not None else cfg.dimension
    q = field.q if field is not None else cfg.q
    radius = field.outer_radius if field is not None else cfg.outer_radius
    return ProblemSpec.model(dim, q, outer_radius=radius)


def _record(cfg):
    os.makedirs(cfg.out_dir, exist_ok=True)
    import dataclasses

    snap = dataclasses.asdict(cfg)
    return RunRecord(cfg.command, snap, cfg.out_dir, __version__).start()


# --------------------------------------------------------------------------
# commands


def cmd_ode(cfg, q_list):
    rec = _record(cfg)
    out = cfg.out_dir
    summary = {}

    def one_counterexample(q):
        t_branch = np.linspace(-1.0, 1.0, 2001) + cfg.t0
        u, upp = counterexample_profile(q, cfg.t0, t_branch)
        fvals = np.sign(u) * np.abs(u) ** (q - 1.0)
        res = np.abs(upp - fvals) / np.maximum(1.0, np.abs(upp))
        path = os.path.join(out, f"counterexample_q{q!r}.csv")
        write_csv(path, ["t", "u", "upp"], [t_branch, u, upp],
                  schema_comment="freqlab-counterexample 1")
        return path, {"q": q, "max_relative_residual": float(res.max())}

    def one_energy(q):
        traj = integrate_plane(q, 1.0, 0.0, cfg.radial_step, cfg.t_max)
        E = conserved_energy(traj)
        drift = float(np.max(np.abs(E - E[0])))
        path = os.path.join(out, f"energy_q{q!r}.csv")
        write_csv(path, ["t", "u", "du", "E"], [traj.t, traj.u, traj.du, E],
                  schema_comment="freqlab-energy 1")
        return path, {"q": q, "E0": float(E[0]), "max_drift": drift}

    def one_shoot(q):
        traj = integrate_radial(cfg.dimension, q, cfg.amplitude,
                                cfg.outer_radius, cfg.radial_step)
        path = os.path.join(out, f"trajectory_N{cfg.dimension}_q{q!r}.csv")
        trajectory_to_csv(traj, path)
        zeros = zero_audit(traj)
        E = conserved_energy(traj)
        incr = float(np.max(np.diff(E))) if len(E) > 1 else 0.0
        return path, {"q": q, "zeros": [
            {"location": z.location, "slope": z.slope, "degenerate": z.degenerate}
            for z in zeros], "max_energy_increase": incr}

    def one_pme(q):
        from .odes import pme_residual_grid

        base = integrate_radial(cfg.dimension, q, cfg.amplitude,
                                cfg.outer_radius, cfg.radial_step)
        pme = PmeField(base, t0=cfg.t0)
        n = len(base.u)
        r_idx = np.arange(max(4, n // 16), n - 4, max(1, n // 64))
        t_vals = cfg.t0 + 1.0 + np.linspace(0.0, 1.0, 64)
        r_idx, t_vals, resgrid = pme_residual_grid(pme, r_idx, t_vals)
        res = float(np.max(np.abs(resgrid)))
        w = pme.w(r_idx, t_vals)
        wsup = float(np.max(np.abs(w)))
        path = os.path.join(out, f"pme_grid_N{cfg.dimension}_q{q!r}.csv")
        rr, tt = np.meshgrid(base.t[r_idx], t_vals, indexing="ij")
        write_csv(path, ["x", "t", "w", "residual"],
                  [rr.ravel(), tt.ravel(), w.T.ravel(), resgrid.T.ravel()],
                  schema_comment="freqlab-pme 1")
        return path, {"q": q, "max_residual": res, "w_sup": wsup,
                      "relative_residual": res / wsup if wsup else 0.0}

    runner = {"counterexample": one_counterexample, "energy": one_energy,
              "shoot": one_shoot, "pme": one_pme}[cfg.ode_task]
    results = []
    if cfg.jobs > 1 and len(q_list) > 1:
        with concurrent.futures.ThreadPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(runner, q_list))
    else:
        results = [runner(q) for q in q_list]
    ok = True
    per_q = []
    for path, info in results:
        rec.add(path)
        per_q.append(info)
        if cfg.ode_task == "counterexample":
            ok &= info["max_relative_residual"] <= 1e-12
        elif cfg.ode_task == "energy":
            bound = 1e-8 * max(1.0, (cfg.radial_step / 1e-2) ** 4)
            ok &= info["max_drift"] <= bound
        elif cfg.ode_task == "shoot":
            ok &= info["max_energy_increase"] <= 1e-5
        elif cfg.ode_task == "pme":
            ok &= info["relative_residual"] <= 1e-6
    summary["schema_version"] = 1
    summary["task"] = cfg.ode_task
    summary["results"] = per_q
    summary["passed"] = bool(ok)
    rec.add(write_json(os.path.join(out, "ode_summary.json"), summary))
    rec.finish({"passed": bool(ok)})
    return EXIT_OK if ok else EXIT_CONFIG


def cmd_solve(cfg, q_list):
    rec = _record(cfg)
    out = cfg.out_dir
    if cfg.manufactured:
        mp = manufactured_bowl(outer_radius=cfg.outer_radius, q=cfg.q,
                               amplitude=min(cfg.amplitude, 1.0))
        rows = []
        prev = None
        for scale in (2, 1):
            n_r = max(8, cfg.rings // scale)
            n_t = max(16, cfg.angles // scale)
            fld = solve_grid_2d(mp.spec, mp.boundary, n_r=n_r, n_theta=n_t,
                                source=mp.source, damping=cfg.damping,
                                tol=cfg.fp_tol, max_iters=cfg.max_iters)
            err = float(np.max(np.abs(fld.u - mp.u(fld.points()))))
            rows.append((n_r, n_t, err))
            prev = fld
        path = os.path.join(out, "manufactured_errors.csv")
        write_csv(path, ["n_r", "n_theta", "sup_error"],
                  [[float(r[0]) for r in rows], [float(r[1]) for r in rows],
                   [r[2] for r in rows]],
                  schema_comment="freqlab-mms 1")
        rec.add(path)
        order = math.log2(rows[0][2] / rows[1][2]) if rows[1][2] > 0 else float("inf")
        fpath = os.path.join(out, "field.txt")
        save_field(prev, fpath)
        rec.add(fpath)
        rec.finish({"mode": "manufactured", "orders": order})
        return EXIT_OK

    spec = _load_spec(cfg)
    try:
        if cfg.mode == "radial":
            fld = solve_radial(spec, cfg.amplitude, h=cfg.radial_step)
        else:
            boundary = _boundary_factory(cfg, spec)
            fld = solve_grid_2d(spec, boundary, n_r=cfg.rings,
                                n_theta=cfg.angles, damping=cfg.damping,
                                tol=cfg.fp_tol, max_iters=cfg.max_iters)
    except SolverError as exc:
        sys.stderr.write(f"solver failed: {exc}\n")
        rec.finish({"error": str(exc), "distance": exc.distance})
        return EXIT_SOLVER
    fpath = os.path.join(out, "field.txt")
    save_field(fld, fpath)
    rec.add(fpath)
    rec.finish({"mode": cfg.mode, "residual_scale": fld.residual_scale})
    return EXIT_OK


def _boundary_factory(cfg, spec):
    kind = cfg.boundary
    if kind == "harmonic":
        return lambda th: spec.outer_radius * np.cos(th)
    if kind == "radial-trace":
        rfld = solve_radial(spec, cfg.amplitude, h=cfg.radial_step)
        trace = float(rfld.u[-1])
        return lambda th: np.full_like(th, trace)
    if kind.startswith("cos:"):
        parts = kind.split(":")
        k, eps = int(parts[1]), float(parts[2])
        return lambda th: eps * np.cos(k * th)
    raise ConfigError(f"unknown boundary kind {kind!r}")


def cmd_frequency(cfg, q_list):
    if not os.path.exists(cfg.field_file):
        sys.stderr.write(f"field file not found: {cfg.field_file}\n")
        return EXIT_CONFIG
    fld = load_field(cfg.field_file)
    spec = _load_spec(cfg, field=fld)
    rec = _record(cfg)
    out = cfg.out_dir
    prof = frequency_profile(spec, fld, ProfileControls(
        n_radii=cfg.n_radii, h_floor_rel=cfg.h_floor_rel))
    rec.add(profile_to_csv(prof, os.path.join(out, "profile.csv")))
    reports = run_all_identity_checks(spec, fld, prof)
    all_ok = True
    blob = {"schema_version": 1}
    for name, rep in sorted(reports.items()):
        if cfg.identity_tol_scale != 1.0 and math.isfinite(rep.tolerance):
            rep.tolerance = rep.tolerance * cfg.identity_tol_scale
        blob[name] = rep.to_dict()
        all_ok &= rep.passed
    rec.add(write_json(os.path.join(out, "identities.json"), blob))
    rec.finish({"identities_passed": bool(all_ok),
                "n_radii": int(len(prof.r))})
    return EXIT_OK if all_ok else EXIT_CONFIG


def cmd_audit(cfg, q_list):
    if not os.path.exists(cfg.field_file):
        sys.stderr.write(f"field file not found: {cfg.field_file}\n")
        return EXIT_CONFIG
    fld = load_field(cfg.field_file)
    spec = _load_spec(cfg, field=fld)
    rec = _record(cfg)
    controls = AuditControls(
        tol_d_rel=cfg.tol_d_rel, residual_gate=cfg.residual_gate,
        profile=ProfileControls(n_radii=max(cfg.n_radii, 2000),
                                h_floor_rel=cfg.h_floor_rel))
    chain = audit(spec, fld, controls)
    rec.add(write_json(os.path.join(cfg.out_dir, "certificate.json"),
                       chain.to_dict()))
    rec.finish({"classification": chain.classification})
    sys.stdout.write(chain.classification + "\n")
    return _CLASSIFICATION_EXIT[chain.classification]


def cmd_check(cfg, q_list, samples_x=64, samples_s=256):
    from .model import s_grid

    spec = _load_spec(cfg)
    rec = _record(cfg)
    pts = ball_grid(spec.dim, spec.outer_radius, samples_x)
    # seeded extra interior samples so the audit is not blind to structure
    # that happens to dodge the tensor grid
    rng = np.random.default_rng(cfg.seed)
    extra = rng.uniform(-spec.outer_radius, spec.outer_radius,
                        size=(max(16, samples_x // 2), spec.dim))
    extra = extra[np.sum(extra ** 2, axis=1) <= spec.outer_radius ** 2]
    pts = np.vstack([pts, extra])
    rep1 = check_A1(spec.coefficients, pts, radius=spec.outer_radius)
    rep3 = check_A3(spec.nonlinearity, pts,
                    s_values=s_grid(spec.nonlinearity.eps0, samples_s),
                    radius=spec.outer_radius)
    blob = {"schema_version": 1,
            "A1": rep1.to_dict(), "A3": rep3.to_dict(),
            "A2_note": "potential sampled finite" if spec.potential is None
            else "potential is a bounded expression on the closed ball"}
    ok = rep1.passed and rep3.passed
    rec.add(write_json(os.path.join(cfg.out_dir, "assumptions.json"), blob))
    rec.finish({"passed": bool(ok)})
    return EXIT_OK if ok else EXIT_CONFIG


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, q_list = _merge_config(args)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    handler = {"ode": cmd_ode, "solve": cmd_solve, "frequency": cmd_frequency,
               "audit": cmd_audit, "check": cmd_check}[cfg.command]
    try:
        if cfg.command == "check":
            return handler(cfg, q_list, samples_x=args.samples_x,
                           samples_s=args.samples_s)
        return handler(cfg, q_list)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except SolverError as exc:
        sys.stderr.write(f"solver failed: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
