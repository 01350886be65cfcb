"""``splitcubic`` command line: ``run``, ``profile`` and ``verify``.

Exit codes: 0 success, 2 usage or config error, 3 run failure,
4 verification violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import bench, verify

SUITES = ("lemmas", "theorem1", "solver_kkt", "all")


def _dims(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def cmd_verify(suite: str, trials: int, seed: int, output_dir=None, log=print) -> int:
    """Run verification campaigns; exit 4 and dump instances on any violation."""
    if trials < 1:
        log("usage error: --trials must be at least 1")
        return 2
    if suite not in SUITES:
        log(f"usage error: unknown suite {suite!r}")
        return 2
    chosen = SUITES[:3] if suite == "all" else (suite,)
    results = []
    for name in chosen:
        if name == "lemmas":
            results.append(verify.lemma_campaign(trials, seed))
        elif name == "solver_kkt":
            results.append(verify.solver_campaign(trials, seed))
        else:
            # deterministic runs: trials beyond one add nothing
            results.append(verify.theorem1_campaign(seed))
    total = 0
    for res in results:
        for line in res.lines():
            log(line)
        for key, val in res.info.items():
            log(f"{res.name}: {key} = {val}")
        total += res.violations
    if total:
        out = Path(os.environ.get(bench.OUTPUT_ENV) or output_dir or "results")
        out.mkdir(parents=True, exist_ok=True)
        dump = out / f"verify_{suite}_seed{seed}_failures.json"
        with open(dump, "w") as fh:
            json.dump([f for r in results for f in r.failures], fh)
        log(f"{total} violations; falsifying instances written to {dump}")
        return 4
    log("no violations")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="splitcubic", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run the methods of an experiment config")
    r.add_argument("config")

    p = sub.add_parser("profile", help="time gradient, Hessian, factorization and cubic step")
    p.add_argument("--dims", type=_dims, default=[50, 100, 200, 400])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--output-dir", default=None)

    v = sub.add_parser("verify", help="numerical checks of the theory and the solver")
    v.add_argument("--suite", choices=SUITES, default="all")
    v.add_argument("--trials", type=int, default=1000)
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--output-dir", default=None)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    if args.command == "run":
        return bench.cmd_run(args.config)
    if args.command == "profile":
        return bench.cmd_profile(args.dims, args.n, args.seed, args.output_dir)
    return cmd_verify(args.suite, args.trials, args.seed, args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
