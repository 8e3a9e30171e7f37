"""Command line: ``simulate``, ``classify`` and ``presets list``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import runner, surfaces


def _simulate(args) -> int:
    try:
        spec = runner.load_config(args.config)
    except (OSError, runner.ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status, summaries = runner.run_scenario(spec, strict=args.strict, out=args.out)
    for s in summaries:
        flags = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in s["acceptance"].items())
        print(f"{s['scenario']} [{s['regime']}] {s['terminated_reason']} at t={s['final_time']!r}: {flags}")
    return status


def _classify(args) -> int:
    try:
        data = surfaces.load_surface(args.surface)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except surfaces.SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    verdicts, errors = [], []
    for name in data.curves:
        try:
            verdicts.append(surfaces.verdict_to_json(surfaces.classify_contraction(name, data)))
        except (surfaces.NonIntegralGenus, surfaces.ContradictionWitness) as exc:
            errors.append({"curve": name, "error": type(exc).__name__, "message": str(exc)})
    out = {"curves": list(data.curves), "verdicts": verdicts,
           "hodge_disjoint": surfaces.hodge_matrix(data), "errors": errors}
    print(json.dumps(out, indent=2))
    return 1 if errors else 0


def _presets(args) -> int:
    for row in runner.preset_table():
        print(f"{row['name']:16s} {row['regime']:12s} T={row['T']:6s} k={row['k']} a={row['a']} "
              f"b={row['b']} alpha={row['alpha']} eps={row['epsilon']} delta={row['delta']} "
              f"N={row['N']} R={row['R']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conekrf", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a flow scenario from a JSON config")
    sim.add_argument("--config", required=True, help="config file (schema 1)")
    sim.add_argument("--strict", action="store_true",
                     help="exit nonzero on positivity loss or any failed acceptance check")
    sim.add_argument("--out", help="output directory (overrides the config)")
    sim.set_defaults(func=_simulate)

    cl = sub.add_parser("classify", help="classify the curves of a surface description")
    cl.add_argument("--surface", required=True, help="surface JSON file")
    cl.set_defaults(func=_classify)

    pr = sub.add_parser("presets", help="scenario presets")
    prs = pr.add_subparsers(dest="action", required=True)
    ls = prs.add_parser("list", help="list the presets")
    ls.set_defaults(func=_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
