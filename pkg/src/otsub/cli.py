"""Command-line entry point: ``otsub {gen,solve,subsample,bound,bench,report}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time

from . import bench as bench_mod
from .bounds import bound_report
from .entropic import SinkhornConfig, solve_sinkhorn
from .errors import OTError
from .exact import solve_transport_simplex
from .instances import InstanceSpec
from .measure import read_instance, write_instance
from .subsample import SubsampleParams, approximate

log = logging.getLogger("otsub")


class _ExtendList(argparse.Action):
    """Accept ``--S 100 500`` and ``--S 100,500``; repeated flags extend."""

    def __init__(self, *args, kind=float, **kwargs):
        self.kind = kind
        super().__init__(*args, **kwargs)

    def __call__(self, parser, ns, values, option_string=None):
        items = []
        for v in values:
            for part in str(v).split(","):
                if part.strip():
                    try:
                        items.append(self.kind(part))
                    except ValueError:
                        parser.error(f"{option_string}: cannot parse {part!r}")
        cur = getattr(ns, self.dest, None)
        setattr(ns, self.dest, (cur or []) + items)


def _list_flag(p, name, kind, help, dest=None):
    extra = {"dest": dest} if dest else {}
    p.add_argument(name, nargs="+", action=_ExtendList, kind=kind, default=None, help=help, **extra)


def _shared(p, lists=True):
    p.add_argument("--seed", type=int, default=None, help="base seed (u64)")
    if lists:
        _list_flag(p, "--p", float, "exponent(s) p >= 1")
        _list_flag(p, "--S", int, "sample size(s)")
        _list_flag(p, "--B", int, "repetition count(s)")
    p.add_argument("--backend", choices=("simplex", "sinkhorn"), default=None)
    p.add_argument("--reps", type=int, default=None, help="repetitions per grid cell")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--exact-cap", type=int, default=None, help="largest N solved exactly")
    p.add_argument("--timing-strict", action="store_true", help="run jobs serially on one worker")


def build_parser():
    ap = argparse.ArgumentParser(prog="otsub", description="Exact and subsampled discrete optimal transport.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a seeded instance file")
    g.add_argument("--family", choices=("grid", "point-cloud"), default="grid")
    g.add_argument("--class", dest="cls", default="cauchy-density")
    g.add_argument("--R", type=int, default=32, help="grid resolution")
    g.add_argument("--D", type=int, default=2, help="point-cloud dimension")
    g.add_argument("--N", type=int, default=1024, help="point-cloud size")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)

    s = sub.add_parser("solve", help="full-problem distance of an instance file")
    s.add_argument("instance")
    _shared(s)

    ss = sub.add_parser("subsample", help="subsampling estimate on an instance file")
    ss.add_argument("instance")
    ss.add_argument("--workers", type=int, default=1)
    _shared(ss)

    b = sub.add_parser("bound", help="error-bound report for an instance file")
    b.add_argument("instance")
    b.add_argument("--q", type=int, default=2)
    b.add_argument("--lmax", type=int, default=None)
    _list_flag(b, "--z", float, "tail-bound evaluation points")
    _shared(b)

    be = sub.add_parser("bench", help="run an experiment grid and write CSVs")
    be.add_argument("--config", default=None, help="JSON file mirroring ExperimentConfig")
    be.add_argument("--family", choices=("grid", "point-cloud"), default=None)
    _list_flag(be, "--class", str, "instance class(es)", dest="cls")
    _list_flag(be, "--R", int, "grid resolution(s)")
    be.add_argument("--D", type=int, default=2)
    be.add_argument("--N", type=int, default=None)
    _list_flag(be, "--instance-seeds", int, "instance seed(s)")
    be.add_argument("--workers", type=int, default=None)
    _shared(be)

    rp = sub.add_parser("report", help="summarize a records CSV")
    rp.add_argument("records")
    rp.add_argument("--out", default=None, help="summary CSV path (stdout if omitted)")
    rp.add_argument("--fit", action="store_true", help="also fit the error rate in S per group")
    return ap


def _emit(obj, out):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_gen(a):
    spec = InstanceSpec(family=a.family, cls=a.cls, R=a.R, D=a.D, N=a.N if a.family == "point-cloud" else 0,
                        seed=a.seed)
    _, r, s = spec.build()
    write_instance(a.out, r, s, meta=spec.to_dict())
    log.info("wrote %s (N=%d)", a.out, r.n)
    return 0


def cmd_solve(a):
    r, s = read_instance(a.instance)
    out = []
    for p in a.p or [1.0]:
        t0 = time.perf_counter()
        if (a.backend or "simplex") == "simplex":
            plan = solve_transport_simplex(r, s, p)
            value, cost = plan.value, plan.cost
        else:
            res = solve_sinkhorn(r, s, p, SinkhornConfig(), return_plan=False)
            value, cost = res.value, res.value**p
        out.append({"p": p, "backend": a.backend or "simplex", "value": value, "cost": cost,
                    "time_ms": 1e3 * (time.perf_counter() - t0)})
    _emit(out if len(out) > 1 else out[0], a.out)
    return 0


def cmd_subsample(a):
    r, s = read_instance(a.instance)
    out = []
    for p in a.p or [1.0]:
        for S in a.S or [1000]:
            for B in a.B or [1]:
                params = SubsampleParams(S=S, B=B, seed=a.seed or 0, backend=a.backend or "simplex",
                                         workers=1 if a.timing_strict else a.workers)
                res = approximate(r, s, p, params)
                out.append({"p": p, "S": S, "B": B, "seed": params.seed, "backend": params.backend,
                            "estimate": res.estimate, "repetition_values": res.repetition_values.tolist(),
                            "times_ms": (1e3 * res.times).tolist()})
    _emit(out if len(out) > 1 else out[0], a.out)
    return 0


def cmd_bound(a):
    r, s = read_instance(a.instance)
    out = []
    for p in a.p or [1.0]:
        for S in a.S or [1000]:
            for B in a.B or [1]:
                out.append(bound_report(r, s, p=p, S=S, B=B, q=a.q, l_max=a.lmax, z_values=a.z))
    _emit(out if len(out) > 1 else out[0], a.out)
    return 0


def _bench_config(a):
    cfg = bench_mod.ExperimentConfig.from_json(a.config) if a.config else bench_mod.ExperimentConfig()
    if a.cls or a.R or a.family or a.N or a.instance_seeds:
        family = a.family or "grid"
        classes = a.cls or ["cauchy-density"]
        seeds = a.instance_seeds or [1]
        if family == "grid":
            insts = [InstanceSpec("grid", c, R, seed=sd) for c in classes for R in (a.R or [32]) for sd in seeds]
        else:
            insts = [InstanceSpec("point-cloud", c, D=a.D, N=a.N or 1024, seed=sd) for c in classes for sd in seeds]
        cfg = bench_mod.with_overrides(cfg, instances=insts)
    cfg = bench_mod.with_overrides(
        cfg,
        p_values=a.p, S_values=a.S, B_values=a.B, reps=a.reps,
        backends=[a.backend] if a.backend else None,
        base_seed=a.seed, exact_cap=a.exact_cap, workers=a.workers,
        timing_strict=True if a.timing_strict else None,
    )
    # re-run validation on the merged values
    return bench_mod.ExperimentConfig.from_dict(cfg.to_dict())


def cmd_bench(a):
    cfg = _bench_config(a)
    out = a.out or "bench-out"

    def progress(rec):
        log.info("%s %s p=%g S=%d B=%d rep=%d -> %.6g", rec.instance_id, rec.backend, rec.p, rec.S, rec.B,
                 rec.repetition, rec.value_approx)

    records = bench_mod.run_experiment(cfg, progress=progress)
    paths = bench_mod.emit_report(records, out)
    with open(f"{out}/config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
    print("\n".join(paths))
    return 0


def cmd_report(a):
    records = bench_mod.read_records_csv(a.records)
    summary = bench_mod.summarize(records)
    if a.out:
        bench_mod.write_summary_csv(summary, a.out)
    else:
        import csv

        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(bench_mod.SUMMARY_COLUMNS)
        for row in summary:
            w.writerow([bench_mod._fmt(row[c]) for c in bench_mod.SUMMARY_COLUMNS])
    if a.fit:
        groups = {}
        for rec in records:
            groups.setdefault((rec.instance_id, rec.backend, rec.p, rec.B), []).append(rec)
        for key, recs in groups.items():
            try:
                fit = bench_mod.fit_rate(recs)
            except OTError as exc:
                print(f"# {key}: {exc}", file=sys.stderr)
                continue
            print(f"# rate {key}: slope {fit.slope:.4f} +- {fit.stderr:.4f}", file=sys.stderr)
    return 0


COMMANDS = {
    "gen": cmd_gen, "solve": cmd_solve, "subsample": cmd_subsample, "bound": cmd_bound,
    "bench": cmd_bench, "report": cmd_report,
}


def main(argv=None):
    ap = build_parser()
    a = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[a.command](a)
    except (OTError, OSError) as exc:
        print(f"otsub: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
