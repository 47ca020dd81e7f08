"""Command-line entry point: ``certrom offline|online|sweep|coverage|preset``.

On failure a JSON object ``{"error": <category>, "message": ...}`` is
printed to stderr and the exit code is nonzero (1 for library errors, 3 for
I/O errors).
"""

import argparse
import json
import os
import sys

from ..exceptions import CertromError
from .config import PRESETS, load_config, preset_text
from .experiment import load_artifacts, run_coverage, run_offline, run_online
from .results import emit_coverage, emit_results


def _manifest(config, artifacts, reference):
    return {"config": config.echo(), "config_hash": config.offline_hash(),
            "seed": config.seed, "p_lb": artifacts.realization.p_lb,
            "reference": reference, "versions": artifacts.manifest["versions"]}


def _summary(config, artifacts, table, out):
    print(f"P_LB(gamma={config.gamma}, M={config.n_samples}, "
          f"J={config.j_test}) = {artifacts.realization.p_lb:.4f}")
    print("note: " + table.info["assumption"])
    if "spectral_norm_A" in table.info:
        print(f"reference: ||A||_2 = {table.info['spectral_norm_A']:.6f}")
    print(f"results written to {out}")


def cmd_offline(args):
    config = load_config(args.config)
    art = run_offline(config, out_dir=args.out)
    print(f"offline artifacts for n = {list(config.dims)} written to {args.out}")
    print(f"P_LB = {art.realization.p_lb:.4f}")


def cmd_online(args):
    config = load_config(args.config)
    art = load_artifacts(args.artifacts, config)
    table = run_online(config, art, reference=args.reference)
    out = args.out or os.path.join(args.artifacts, "results")
    emit_results(table, out, _manifest(config, art, args.reference), config.metrics)
    _summary(config, art, table, out)


def cmd_sweep(args):
    config = load_config(args.config)
    out = args.out or config.out_dir
    art = run_offline(config, out_dir=os.path.join(out, "artifacts"))
    table = run_online(config, art, reference=args.reference)
    emit_results(table, out, _manifest(config, art, args.reference), config.metrics)
    _summary(config, art, table, out)


def cmd_coverage(args):
    config = load_config(args.config)
    out = args.out or os.path.join(config.out_dir, "coverage")
    result = run_coverage(config, args.reps)
    emit_coverage(result, out, {"config": config.echo(), "seed": config.seed,
                                "p_lb": result.p_lb})
    for n in sorted(result.covered):
        print(f"n={n}: coverage {result.frequency(n):.4f} "
              f"(p_lb {result.p_lb:.4f}, se {result.standard_error(n):.4f})")
    print(f"results written to {out}")


def cmd_preset(args):
    sys.stdout.write(preset_text(args.name))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="certrom",
        description="Learned reduced models with a posteriori error estimates.")
    sub = parser.add_subparsers(dest="command", required=True)
    config_help = "config file, or preset:<name>"

    p = sub.add_parser("offline", help="learn operators and norm bounds")
    p.add_argument("--config", required=True, help=config_help)
    p.add_argument("--out", required=True, help="artifact directory")
    p.set_defaults(func=cmd_offline)

    p = sub.add_parser("online", help="certified prediction from artifacts")
    p.add_argument("--config", required=True, help=config_help)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--out", help="result directory (default <artifacts>/results)")
    p.add_argument("--reference", action="store_true",
                   help="query the full system for true errors and intrusive "
                        "reference estimates")
    p.set_defaults(func=cmd_online)

    p = sub.add_parser("sweep", help="offline and online over all basis sizes")
    p.add_argument("--config", required=True, help=config_help)
    p.add_argument("--out", help="result directory (default from config)")
    p.add_argument("--reference", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("coverage", help="Monte Carlo coverage of the learned estimate")
    p.add_argument("--config", required=True, help=config_help)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--out", help="result directory")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("preset", help="print a bundled config")
    p.add_argument("name", choices=sorted(PRESETS))
    p.set_defaults(func=cmd_preset)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CertromError as exc:
        print(json.dumps({"error": exc.category, "message": str(exc)}),
              file=sys.stderr)
        return 1
    except OSError as exc:
        print(json.dumps({"error": "io", "message": str(exc)}), file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
