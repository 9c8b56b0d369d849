"""Command-line entry point ``fracreach``.

Exit codes: 0 success, 1 a solve or check failed, 2 usage or configuration
error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import DelayViolation, DomainError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _cmd_sweep(args) -> int:
    from .experiments import run_lambda_sweep

    res = run_lambda_sweep(args.config, args.out, workers=args.workers)
    for r in res.rows:
        status = "ok" if r.converged else "FAILED"
        print(f"lambda={r.lam:.1e}  error={r.terminal_error:.6e}  iters={r.picard_iterations}  {status}")
    print(f"wrote {args.out}")
    return EXIT_OK if res.all_converged else EXIT_FAIL


def _cmd_linear(args) -> int:
    from .experiments import run_linear_check

    rep = run_linear_check(args.config)
    if args.json:
        print(json.dumps(rep.to_dict(), indent=2))
    else:
        for c in rep.checks:
            print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _cmd_invariants(args) -> int:
    from .invariants import SUITES, run_checks

    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    results = run_checks(args.suite)
    if args.json:
        print(json.dumps([r.__dict__ for r in results], indent=2))
    else:
        for r in results:
            print(f"{'PASS' if r.passed else 'FAIL'}  {r.module}.{r.name}: {r.detail}")
        n_ok = sum(r.passed for r in results)
        print(f"{n_ok}/{len(results)} checks passed")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def _cmd_ml(args) -> int:
    from .special_fn import ml_evaluate

    res = ml_evaluate(args.z, args.alpha, args.beta)
    if args.json:
        print(json.dumps({"alpha": args.alpha, "beta": args.beta, "z": args.z, "value": res.value,
                          "strategy": res.strategy, "terms": res.terms}))
    else:
        print(f"E_{{{args.alpha},{args.beta}}}({args.z}) = {res.value:.17g}")
        print(f"strategy: {res.strategy}, terms: {res.terms}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracreach", description="Fractional control toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sweep", help="lambda -> 0 sweep of the fixed-point problem")
    s.add_argument("--config", required=True, help="scenario JSON")
    s.add_argument("--out", required=True, help="CSV output path")
    s.add_argument("--workers", type=int, default=1, help="concurrent lambda solves")
    s.set_defaults(func=_cmd_sweep)

    s = sub.add_parser("linear-check", help="Grammian decay and linear steering checks")
    s.add_argument("--config", required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_linear)

    s = sub.add_parser("invariants", help="run invariant checks")
    s.add_argument("--suite", default="all", help="all or a module name")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_invariants)

    s = sub.add_parser("ml-eval", help="evaluate the Mittag-Leffler function")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--beta", type=float, default=1.0)
    s.add_argument("--z", type=float, required=True)
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=_cmd_ml)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, DelayViolation, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OverflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
