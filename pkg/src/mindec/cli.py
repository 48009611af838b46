"""Command line entry point: ``mindec {train,sweep,estimate,dump-codebook}``.

Results go to stdout or ``--out``; progress goes to stderr. On failure the
last stderr line is a JSON object ``{"error": <type>, "message": <text>}``
and the exit status is non-zero.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import harness, mind
from .coding import dump_codebook
from .estimators import RateEstimate, estimate_rates
from .neuralnet import CheckpointError


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _config(args) -> harness.ExperimentConfig:
    overrides = {"seed": args.seed}
    if getattr(args, "snr_db", None) is not None:
        overrides["snr_db_grid"] = (args.snr_db,)
    if args.config:
        return harness.load_config(args.config, **overrides)
    if getattr(args, "scenario", None):
        return harness.parse_config(f"scenario = {args.scenario}", **overrides)
    raise harness.ConfigError("either --config or --scenario is required")


def cmd_train(args) -> int:
    cfg = _config(args)
    res = harness.train_point(cfg, 0, args.kind)
    harness.save_checkpoint(res.disc, args.out)
    _progress(f"trained {args.kind} discriminator at {cfg.snr_db_grid[0]:g} dB, "
              f"final loss {res.final_loss:.6f} -> {args.out}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    out = args.out or cfg.output
    if not out:
        raise harness.ConfigError("no output path: pass --out or set 'output' in the config")
    rows = harness.run_scenario(cfg, jobs=args.jobs, progress=_progress)
    harness.save_results(cfg, rows, out)
    _progress(f"wrote {out}")
    return 0


def format_rate(est: RateEstimate) -> str:
    header = ",".join(RateEstimate.FIELDS)
    values = ",".join(format(getattr(est, f), ".17g") for f in RateEstimate.FIELDS)
    return header + "\n" + values + "\n"


def cmd_estimate(args) -> int:
    cfg = _config(args)
    cb = harness.scenario_codebook(cfg)
    disc = harness.load_checkpoint(args.checkpoint, cb)
    ch = harness.scenario_channel(cfg, cb, cfg.snr_db_grid[0])
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, 7]))
    _, y, _ = mind.draw_samples(cb, ch, cfg.eval_samples, rng)
    text = format_rate(estimate_rates(mind.posterior(disc, y, normalize=True), cb.n))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_dump_codebook(args) -> int:
    sys.stdout.write(dump_codebook(harness.scenario_codebook(_config(args))))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mindec", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, snr=False):
        sp.add_argument("--config", help="flat key = value experiment config")
        sp.add_argument("--scenario", choices=sorted(harness.SCENARIOS),
                        help="use scenario defaults instead of a config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        if snr:
            sp.add_argument("--snr-db", type=float, dest="snr_db")

    sp = sub.add_parser("train", help="train one discriminator and write a checkpoint")
    common(sp, snr=True)
    sp.add_argument("--kind", choices=("supervised", "unsupervised"), default="supervised")
    sp.set_defaults(func=cmd_train, out_required=True)

    sp = sub.add_parser("sweep", help="run the SNR grid and write the results CSV")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("estimate", help="rate / error-probability estimates from a checkpoint")
    common(sp, snr=True)
    sp.add_argument("--checkpoint", required=True)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("dump-codebook", help="print the scenario codebook")
    common(sp)
    sp.set_defaults(func=cmd_dump_codebook)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "out_required", False) and not args.out:
        parser.error("--out is required")
    try:
        return args.func(args)
    except (harness.ConfigError, CheckpointError, mind.TrainingDivergence,
            OSError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
