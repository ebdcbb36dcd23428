"""Command line: gen, run, verify, sweep, calibrate."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from ..sinr import SinrParams
from .calibrate import CalibrationFailed, calibrate_dilution
from .metrics import append_csv, to_csv
from .runner import PROTOCOLS, TPT_MODES, RunConfig, run_protocol, verify_artifacts
from .scenario import KINDS, ScenarioError, Unsatisfiable, generate, load, save

EXIT_OK, EXIT_CHECK_FAILED, EXIT_BAD_INPUT = 0, 1, 2
SSF_CHOICES = ("greedy", "randomized", "algebraic")


def _out_dir(args) -> Path:
    return Path(os.environ.get("SINRLAB_OUT") or args.out)


def _params(args) -> SinrParams:
    return SinrParams.with_unit_range(alpha=args.alpha, beta=args.beta, epsilon=args.epsilon)


def _int_range(text: str) -> list[int]:
    """'4' -> [4]; '2..8' -> [2, ..., 8]; '2,4,8' -> [2, 4, 8]."""
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",")]


def _run_config(args, protocol=None) -> RunConfig:
    return RunConfig(protocol or args.protocol, seed=args.seed, max_rounds=args.max_rounds,
                     k_density=args.k_density, d_silence=args.d_silence, ssf=args.ssf,
                     tpt_mode=args.tpt_mode, messages=args.messages)


def cmd_gen(args) -> int:
    sc = generate(args.kind, _params(args), seed=args.seed, n=args.n, n_labels=args.N,
                  all_awake=args.all_awake, k=args.k, slots=args.slots)
    path = Path(args.scenario) if args.scenario else _out_dir(args) / "scenario.json"
    save(sc, path)
    print(f"wrote {path} ({len(sc.stations)} stations, id {sc.id})")
    return EXIT_OK


def _write_run(res, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.csv").write_text(res.trace_text())
    (out / "state.json").write_text(res.state_json())
    append_csv(out / "metrics.csv", [res.metrics])


def _summarize(res) -> str:
    m = res.metrics
    lines = [f"{m.protocol} on {m.scenario_id}: rounds {m.rounds_used}/{m.round_budget}, "
             f"messages {m.messages_sent}, max payload {m.max_payload_bits} bits, "
             f"{m.properties_passed}/{len(res.reports)} properties passed"]
    for r in res.failures():
        lines.append(f"  FAIL {r.property_id}: {r.witness!r}")
    return "\n".join(lines)


def cmd_run(args) -> int:
    sc = load(args.scenario)
    res = run_protocol(sc, _run_config(args))
    _write_run(res, _out_dir(args))
    print(_summarize(res))
    return EXIT_OK if res.passed else EXIT_CHECK_FAILED


def cmd_verify(args) -> int:
    out = _out_dir(args)
    sc = load(args.scenario)
    trace_path = Path(args.trace) if args.trace else out / "trace.csv"
    state_path = Path(args.state) if args.state else out / "state.json"
    reports = verify_artifacts(sc, trace_path.read_text(), json.loads(state_path.read_text()))
    for r in reports:
        status = "ok" if r else f"FAIL {r.witness!r}"
        print(f"{r.property_id}: {status}")
    return EXIT_OK if all(reports) else EXIT_CHECK_FAILED


def _sweep_one(job):
    kind, n, seed, params, cfg = job
    sc = generate(kind, params, seed=seed, n=n)
    res = run_protocol(sc, cfg)
    return res.metrics, res.passed


def cmd_sweep(args) -> int:
    params = _params(args)
    cfg = _run_config(args)
    jobs = [(args.kind, n, seed, params, cfg) for n in _int_range(args.n) for seed in range(args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_sweep_one, jobs))
    else:
        results = [_sweep_one(j) for j in jobs]
    rows = [m for m, _ in results]
    out = _out_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "sweep.csv"
    path.write_text(to_csv(rows))
    failed = [m for m, ok in results if not ok]
    print(f"wrote {len(rows)} rows to {path}; {len(failed)} runs failed a check")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_calibrate(args) -> int:
    params = _params(args)
    try:
        dil = calibrate_dilution(params, args.k_density or 1)
    except CalibrationFailed as e:
        print(f"calibration failed: {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(json.dumps({"alpha": params.alpha, "beta": params.beta, "epsilon": params.epsilon,
                      "k_density": dil.k_density, "d_silence": dil.d_silence, "c_derived": dil.c_derived}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sinrlab", description="SINR radio network protocol simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, run_flags=True):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="runs", help="output directory (SINRLAB_OUT overrides)")
        sp.add_argument("--alpha", type=float, default=3.0)
        sp.add_argument("--beta", type=float, default=1.0)
        sp.add_argument("--epsilon", type=float, default=1.0)
        if run_flags:
            sp.add_argument("--protocol", choices=PROTOCOLS, required=True)
            sp.add_argument("--max-rounds", type=int, default=None)
            sp.add_argument("--k-density", type=int, default=None)
            sp.add_argument("--d-silence", type=int, default=None)
            sp.add_argument("--ssf", choices=SSF_CHOICES, default=None)
            sp.add_argument("--tpt-mode", choices=TPT_MODES, default="exchange")
            sp.add_argument("--messages", type=int, default=None,
                            help="multi-broadcast: number of initial messages (default n)")

    g = sub.add_parser("gen", help="write a scenario file")
    common(g, run_flags=False)
    g.add_argument("--kind", choices=KINDS, default="random_geometric")
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--N", type=int, default=None, help="label space size (default 2n)")
    g.add_argument("--k", type=int, default=3, help="two_box: stations per box")
    g.add_argument("--slots", type=int, default=3, help="snowball: number of clusters")
    g.add_argument("--all-awake", action="store_true")
    g.add_argument("--scenario", default=None, help="output path (default OUT/scenario.json)")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="run a protocol, write trace, state and metrics")
    common(r)
    r.add_argument("--scenario", required=True)
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="re-check a saved trace and final state")
    common(v, run_flags=False)
    v.add_argument("--scenario", required=True)
    v.add_argument("--trace", default=None)
    v.add_argument("--state", default=None)
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", help="run a protocol over a grid of sizes and seeds")
    common(s)
    s.add_argument("--kind", choices=KINDS, default="random_geometric")
    s.add_argument("--n", default="2..8", help="sizes, e.g. 2..8 or 4,8,16")
    s.add_argument("--seeds", type=int, default=10)
    s.add_argument("--jobs", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    c = sub.add_parser("calibrate", help="find the silence radius for given SINR parameters")
    common(c, run_flags=False)
    c.add_argument("--k-density", type=int, default=1)
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ScenarioError, Unsatisfiable, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
