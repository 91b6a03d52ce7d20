"""Command-line entry point: ``constellation <command> ...``.

Exit status: 0 success, 1 no-match (``match`` only), 2 usage error,
3 data or format error. Results go to stdout, diagnostics to stderr. Each
command first prints a ``# config`` line echoing every resolved setting.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .core import Constellation, RigidTransform
from .io import FormatError, read_mnu, render, write_mnu
from .missing import MissingParams, augment, detect_missing
from .second_order import SecondOrderParams, build_second_order_db, match_two_pass
from .spring import (
    GridSpec,
    PhysicsParams,
    assemble,
    brute_force_sim,
    kabsch_align,
    resolve_params,
    rotation_sweep,
    similarity_score,
    simulate,
    write_trajectory,
)
from .synth import PerturbSpec, generate, perturb
from .vicinity import FeatureVector, RepresentativeDB, build_representative_db, compute_feature_vector, default_bit_threshold, hamming

EXIT_OK, EXIT_NO_MATCH, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _echo(command: str, cfg: dict) -> None:
    print(f"# config {json.dumps({'command': command, **cfg}, sort_keys=True, default=str)}")


def _transform_arg(text: str | None):
    if text is None or text == "none":
        return None
    if text == "random":
        return "random"
    try:
        dx, dy, deg = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'random', 'none' or DX,DY,DEGREES") from None
    return RigidTransform(dx, dy, math.radians(deg))


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, default=str) + "\n")


# -- commands ------------------------------------------------------------------


def cmd_gen(a) -> int:
    c = generate(a.n, a.width, a.height, a.min_sep, seed=a.seed, id=a.id or f"synth-{a.seed}")
    spec = PerturbSpec(
        transform=a.transform,
        jitter_sigma=a.jitter,
        theta_jitter_sigma=a.theta_jitter,
        occlusions=a.occlusions,
        spurious=a.spurious,
        distortion_amp=a.distortion,
        distortion_scale=a.distortion_scale,
        seed=a.perturb_seed if a.perturb_seed is not None else a.seed + 1,
    )
    cfg = {k: getattr(a, k) for k in ("n", "width", "height", "min_sep", "seed")}
    if a.impression:
        cfg["perturb"] = {**asdict(replace(spec, transform=None)), "transform": a.transform_text}
    _echo("gen", cfg)
    if a.output:
        write_mnu(a.output, c)
        print(f"wrote {a.output} ({len(c)} minutiae)")
    else:
        sys.stdout.write(render(c))
    if a.impression:
        imp, gt = perturb(c, spec)
        write_mnu(a.impression, imp)
        print(f"wrote {a.impression} ({len(imp)} minutiae)")
        if a.truth:
            _write_json(a.truth, {"transform": asdict(gt.transform), "removed": gt.removed, "added": gt.added, "origin": gt.origin})
    return EXIT_OK


def _pool(a) -> list[Constellation]:
    if a.pool:
        return [read_mnu(p) for p in a.pool]
    rng = np.random.Generator(np.random.PCG64(a.seed))
    return [generate(a.pool_n, a.width, a.height, seed=int(s), id=f"pool{k}") for k, s in enumerate(rng.integers(0, 2**31, a.synthetic))]


def cmd_builddb(a) -> int:
    pool = _pool(a)
    cfg = {
        "pool": a.pool or {"synthetic": a.synthetic, "n": a.pool_n, "width": a.width, "height": a.height},
        "seed": a.seed,
        "rho": a.rho,
        "order": 2 if a.second_order else 1,
    }
    if a.second_order:
        p = SecondOrderParams(a.rho, a.rho2, a.sig_l_min, a.sig_l_max)
        n = a.n_reps if a.n_reps is not None else 64
        l_min = a.l_min if a.l_min is not None else 2
        l_max = a.l_max if a.l_max is not None else 8
        cfg.update(rho2=a.rho2, sig_l_min=a.sig_l_min, sig_l_max=a.sig_l_max, n_reps=n, l_min=l_min, l_max=l_max, d_min=a.d_min)
        _echo("builddb", cfg)
        db = build_second_order_db(pool, p, l_min, l_max, a.d_min, n, rng_seed=a.seed)
    else:
        n = a.n_reps if a.n_reps is not None else 128
        l_min = a.l_min if a.l_min is not None else 3
        l_max = a.l_max if a.l_max is not None else 8
        cfg.update(n_reps=n, l_min=l_min, l_max=l_max, d_min=a.d_min)
        _echo("builddb", cfg)
        db = build_representative_db(pool, a.rho, l_min, l_max, a.d_min, n, rng_seed=a.seed)
    db.save(a.output)
    print(f"wrote {a.output} ({len(db)} representatives, order {db.order}, db_id {db.db_id})")
    return EXIT_OK


def _bit_threshold(db: RepresentativeDB, value: float | None) -> float:
    if value is not None:
        return value
    return default_bit_threshold(db.params, db.order)


def cmd_enroll(a) -> int:
    db = RepresentativeDB.load(a.db)
    t = _bit_threshold(db, a.bit_threshold)
    _echo("enroll", {"input": a.input, "db": a.db, "db_id": db.db_id, "bit_threshold": t})
    fv = compute_feature_vector(read_mnu(a.input), db, t)
    if a.output:
        _write_json(a.output, fv.to_dict())
    print(fv.to_hex())
    return EXIT_OK


def _vector(path: str, db: RepresentativeDB, t: float) -> FeatureVector:
    if path.endswith(".json"):
        return FeatureVector.from_dict(json.loads(Path(path).read_text()))
    return compute_feature_vector(read_mnu(path), db, t)


def cmd_match(a) -> int:
    db = RepresentativeDB.load(a.db)
    t1 = _bit_threshold(db, a.bit_threshold)
    cfg = {"candidate": a.candidate, "template": a.template, "db": a.db, "db_id": db.db_id, "t": a.t, "bit_threshold": t1}
    raw = (a.missing or a.second_order) and (a.candidate.endswith(".json") or a.template.endswith(".json"))
    if raw:
        raise UsageError("--missing and --second-order need minutiae files, not enrolled vectors")
    if a.missing:
        mp = MissingParams(eps_miss=a.eps_miss, k_max=a.k_max)
        cfg["missing"] = asdict(mp)
    if a.second_order:
        if not a.db2:
            raise UsageError("--second-order requires --db2")
        db2 = RepresentativeDB.load(a.db2)
        if db.order != 1 or db2.order != 2:
            raise ValueError("--db must be first-order and --db2 second-order")
        p = replace(
            SecondOrderParams.from_source(db2.source, db2.rho),
            t1=int(a.t),
            t2=a.t2,
            bit_t1=t1,
            bit_t2=_bit_threshold(db2, a.bit_threshold2),
        )
        cfg.update(db2=a.db2, second_order=asdict(p))
    _echo("match", cfg)

    if a.missing or a.second_order:
        cand, tmpl = read_mnu(a.candidate), read_mnu(a.template)
        if a.missing:
            report = detect_missing(cand, tmpl, db.rho, db.params, mp)
            print(f"missing_hypotheses {len(report.hypotheses)}")
            print(f"forgiven_penalty {report.forgiven_total:.6f}")
            if a.report:
                _write_json(a.report, report.to_dict())
            cand = augment(cand, report)
        if a.second_order:
            r = match_two_pass(cand, tmpl, db, db2, p)
            print(f"hamming1 {r.hamming1}")
            print(f"hamming2 {r.hamming2}")
            print(f"decision {'match' if r.match else 'no-match'}")
            return EXIT_OK if r.match else EXIT_NO_MATCH
        u, v = compute_feature_vector(cand, db, t1), compute_feature_vector(tmpl, db, t1)
    else:
        u, v = _vector(a.candidate, db, t1), _vector(a.template, db, t1)
    score = hamming(u, v)
    ok = score <= a.t
    print(f"score {score}")
    print(f"decision {'match' if ok else 'no-match'}")
    return EXIT_OK if ok else EXIT_NO_MATCH


def _physics(a) -> PhysicsParams:
    return PhysicsParams(
        k=a.k,
        k_v=a.kv,
        dt=a.dt,
        max_steps=a.max_steps,
        eps_kinetic=a.eps_kinetic,
        settle_window=a.settle_window,
        trajectory_stride=a.stride if getattr(a, "trajectory", None) else 0,
    )


def _paired(a) -> tuple[np.ndarray, np.ndarray]:
    ca, cb = read_mnu(a.a), read_mnu(a.b)
    if len(ca) != len(cb):
        raise ValueError(f"size mismatch: {len(ca)} vs {len(cb)} minutiae (points are paired by order)")
    return ca.xy, cb.xy


def cmd_simulate(a) -> int:
    pa, pb = _paired(a)
    s = assemble(pa, pb, _physics(a))
    p = s.params
    _echo("simulate", {"a": a.a, "b": a.b, "physics": asdict(p), "base": a.base})
    r = simulate(s)
    print(f"e_min {r.e_min:.10g}")
    print(f"sim_phi {r.sim_phi:.10g}")
    print(f"similarity {similarity_score(r.sim_phi, a.base):.10g}")
    print(f"steps {r.steps}")
    print(f"converged {str(r.converged).lower()}")
    print(f"pose {r.final_pose.dx:.6f} {r.final_pose.dy:.6f} {math.degrees(r.final_pose.theta):.6f}")
    for x, y in r.final_points:
        print(f"point {x:.6f} {y:.6f}")
    if a.trajectory:
        write_trajectory(a.trajectory, r.trajectory)
        print(f"wrote {a.trajectory} ({len(r.trajectory)} rows)")
    if not r.converged:
        print("warning: did not settle within max_steps", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(a) -> int:
    pa, pb = _paired(a)
    p = resolve_params(pa, _physics(a))
    _echo("sweep", {"a": a.a, "b": a.b, "increment_deg": a.increment, "min_increment_deg": a.min_increment, "physics": asdict(p)})
    r = rotation_sweep(pa, pb, increment=math.radians(a.increment), params=p, min_increment=math.radians(a.min_increment))
    print(f"best_theta_deg {math.degrees(r.best_theta):.6f}")
    print(f"best_energy {r.best_energy:.10g}")
    if a.output:
        r.write_csv(a.output)
        print(f"wrote {a.output}")
    return EXIT_OK


def cmd_bench(a) -> int:
    spec = bench_mod.CorpusSpec(
        population=a.population,
        n_minutiae=a.n,
        width=a.width,
        height=a.height,
        min_sep=a.min_sep,
        perturb=PerturbSpec(
            transform=a.transform,
            jitter_sigma=a.jitter,
            theta_jitter_sigma=a.theta_jitter,
            occlusions=a.occlusions,
            spurious=a.spurious,
            distortion_amp=a.distortion,
        ),
        max_impostors=a.max_impostors,
        occlusion_cover=a.occlusion_cover,
    )
    if a.missing_gain:
        _echo("bench", {"mode": "missing_gain", "seed": a.seed, "corpus": spec.to_dict(), "thresholds": a.thresholds})
        rep = bench_mod.compare_missing_gain(spec, a.thresholds, a.seed)
        for t, fa, fb in zip(rep.thresholds, rep.frr_plain, rep.frr_with_missing):
            print(f"threshold {t:g} frr_plain {fa:.4f} frr_with_missing {fb:.4f}")
        print(f"forgiven_total {rep.forgiven_total:.6f}")
        print(f"hypotheses {rep.n_hypotheses}")
        if a.output:
            _write_json(a.output, rep.to_dict())
        if a.pairs:
            with open(a.pairs, "w") as fh:
                fh.write("pair_id,plain,with_missing\n")
                for pid, x, y in rep.pairs:
                    fh.write(f"{pid},{x!r},{y!r}\n")
        return EXIT_OK
    cfg = bench_mod.BenchConfig()
    _echo("bench", {"matcher": a.matcher, "seed": a.seed, "corpus": spec.to_dict(), "bench": cfg.to_dict(), "thresholds": a.thresholds})
    rep = bench_mod.run_bench(a.matcher, spec, a.thresholds, a.seed, cfg)
    for k, t in enumerate(rep.thresholds):
        far = "absent" if rep.far is None else f"{rep.far[k]:.4f}"
        print(f"threshold {t:g} far {far} frr {rep.frr[k]:.4f}")
    print(f"auc {'absent' if rep.auc is None else f'{rep.auc:.4f}'}")
    if a.output:
        rep.write_json(a.output)
    if a.pairs:
        rep.write_csv(a.pairs)
    return EXIT_OK


def cmd_oracle(a) -> int:
    pa, pb = _paired(a)
    grid = GridSpec(a.theta_steps, a.trans_steps, a.tol, a.starts)
    _echo("oracle", {"a": a.a, "b": a.b, "k": a.k, "grid": asdict(grid)})
    t, res = kabsch_align(pa, pb)
    print(f"kabsch_pose {t.dx:.6f} {t.dy:.6f} {math.degrees(t.theta):.6f}")
    print(f"kabsch_residual_sq {res:.10g}")
    print(f"optimum_energy {0.5 * a.k * res:.10g}")
    value, tb = brute_force_sim(pa, pb, grid)
    print(f"brute_force_sim {value:.10g}")
    print(f"brute_force_pose {tb.dx:.6f} {tb.dy:.6f} {math.degrees(tb.theta):.6f}")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_physics(p: argparse.ArgumentParser) -> None:
    d = PhysicsParams()
    p.add_argument("--k", type=float, default=d.k, help="spring stiffness")
    p.add_argument("--kv", type=float, default=None, help="drag coefficient (default 2*sqrt(k*n))")
    p.add_argument("--dt", type=float, default=d.dt)
    p.add_argument("--max-steps", type=int, default=d.max_steps)
    p.add_argument("--eps-kinetic", type=float, default=None, help="settle threshold (default 1e-9*k*diameter^2)")
    p.add_argument("--settle-window", type=int, default=d.settle_window)


def _add_box(p: argparse.ArgumentParser) -> None:
    p.add_argument("--width", type=float, default=400.0)
    p.add_argument("--height", type=float, default=400.0)
    p.add_argument("--min-sep", type=float, default=10.0)


def _add_perturb(p: argparse.ArgumentParser, transform: str) -> None:
    p.add_argument("--transform", default=transform, help="'random', 'none' or DX,DY,DEGREES")
    p.add_argument("--jitter", type=float, default=0.0, help="position jitter sigma (px)")
    p.add_argument("--theta-jitter", type=float, default=0.0, help="orientation jitter sigma (rad)")
    p.add_argument("--occlusions", type=int, default=0)
    p.add_argument("--spurious", type=int, default=0)
    p.add_argument("--distortion", type=float, default=0.0, help="distortion amplitude (px)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="constellation", description="Match oriented point constellations (fingerprint minutiae).")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic constellation (and optionally a perturbed impression)")
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--id", default="")
    _add_box(p)
    p.add_argument("-o", "--output", help="template file (default: stdout)")
    p.add_argument("--impression", help="also write a perturbed impression here")
    p.add_argument("--truth", help="ground truth JSON for the impression")
    p.add_argument("--perturb-seed", type=int, default=None, help="default: seed + 1")
    p.add_argument("--distortion-scale", type=float, default=200.0)
    _add_perturb(p, "none")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("builddb", help="build a representative vicinity database")
    p.add_argument("pool", nargs="*", help="pool minutiae files (default: a synthetic pool)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--synthetic", type=int, default=50, help="synthetic pool size")
    p.add_argument("--pool-n", type=int, default=40, help="minutiae per synthetic pool member")
    p.add_argument("--width", type=float, default=400.0)
    p.add_argument("--height", type=float, default=400.0)
    p.add_argument("--rho", type=float, default=75.0)
    p.add_argument("--n-reps", type=int, default=None, help="default 128 (64 with --second-order)")
    p.add_argument("--l-min", type=int, default=None)
    p.add_argument("--l-max", type=int, default=None)
    p.add_argument("--d-min", type=float, default=None, help="default K_NA")
    p.add_argument("--second-order", action="store_true")
    p.add_argument("--rho2", type=float, default=150.0)
    p.add_argument("--sig-l-min", type=int, default=3)
    p.add_argument("--sig-l-max", type=int, default=8)
    p.set_defaults(func=cmd_builddb)

    p = sub.add_parser("enroll", help="compute and store a feature vector")
    p.add_argument("input")
    p.add_argument("--db", required=True)
    p.add_argument("--bit-threshold", type=float, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("match", help="compare a candidate with a template")
    p.add_argument("candidate")
    p.add_argument("template")
    p.add_argument("--db", required=True)
    p.add_argument("-t", type=float, default=20, help="Hamming acceptance threshold")
    p.add_argument("--bit-threshold", type=float, default=None)
    p.add_argument("--second-order", action="store_true")
    p.add_argument("--db2")
    p.add_argument("--t2", type=int, default=8)
    p.add_argument("--bit-threshold2", type=float, default=None)
    p.add_argument("--missing", action="store_true", help="re-insert inferred missing minutiae first")
    p.add_argument("--eps-miss", type=float, default=10.0)
    p.add_argument("--k-max", type=int, default=2, choices=(1, 2))
    p.add_argument("--report", help="write the missing-minutia report here")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("simulate", help="spring relaxation of A onto B (points paired by order)")
    p.add_argument("a")
    p.add_argument("b")
    _add_physics(p)
    p.add_argument("--base", type=float, default=math.e, help="similarity = base ** -sim_phi")
    p.add_argument("--trajectory", help="write the trajectory CSV here")
    p.add_argument("--stride", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="forced-rotation sweep")
    p.add_argument("a")
    p.add_argument("b")
    _add_physics(p)
    p.add_argument("--increment", type=float, default=10.0, help="degrees")
    p.add_argument("--min-increment", type=float, default=0.5, help="degrees")
    p.add_argument("-o", "--output", help="curve CSV")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="FAR/FRR benchmark on a synthetic corpus")
    p.add_argument("--matcher", choices=bench_mod.MATCHERS, default="vicinity")
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--n", type=int, default=40)
    _add_box(p)
    _add_perturb(p, "random")
    p.add_argument("--max-impostors", type=int, default=500)
    p.add_argument("--occlusion-cover", type=int, default=0)
    p.add_argument("--thresholds", type=_floats, default=[5, 10, 15, 20, 25, 30, 40])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--missing-gain", action="store_true", help="compare FRR with and without missing-minutia forgiveness")
    p.add_argument("-o", "--output", help="JSON report")
    p.add_argument("--pairs", help="per-pair CSV dump")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("oracle", help="closed-form and brute-force alignment of paired point sets")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--k", type=float, default=1.0)
    g = GridSpec()
    p.add_argument("--theta-steps", type=int, default=g.theta_steps)
    p.add_argument("--trans-steps", type=int, default=g.trans_steps)
    p.add_argument("--tol", type=float, default=g.tol)
    p.add_argument("--starts", type=int, default=g.starts)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    if hasattr(a, "transform"):
        a.transform_text = a.transform
        try:
            a.transform = _transform_arg(a.transform)
        except argparse.ArgumentTypeError as e:
            print(f"{ap.prog} {a.command}: error: {e}", file=sys.stderr)
            return EXIT_USAGE
    try:
        return a.func(a)
    except UsageError as e:
        print(f"{ap.prog} {a.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ValueError, KeyError, OSError, json.JSONDecodeError) as e:
        print(f"{ap.prog} {a.command}: {e}", file=sys.stderr)
        return EXIT_DATA


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
