"""Command-line entry point: ``mcaa {train,score,evaluate,sweep-epsmax,synth-demo}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiment as E
from .errors import McaaError

log = logging.getLogger("mcaa")


def _add_common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", type=Path,
                       help="config JSON, or any output file with a provenance header")
        p.add_argument("--preset", choices=sorted(E.PRESETS),
                       help="published dataset settings to start from (applied below --config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--method", choices=["mcaa", "mcdropout"])
    p.add_argument("--out", type=Path, default=Path("runs"),
                   help="base output directory (default: runs)")
    p.add_argument("--force", action="store_true", help="overwrite existing output files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcaa", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the base network")
    _add_common(p)

    p = sub.add_parser("score", help="per-point predictions and MI for a split")
    _add_common(p)
    p.add_argument("--model", type=Path, help="model.json (default: <run dir>/model.json)")
    p.add_argument("--split", choices=["train", "val", "test"])
    p.add_argument("--eps-max", type=float)

    p = sub.add_parser("evaluate", help="uncertainty curves, ROC and PR for a scores file")
    _add_common(p, config=False)
    p.add_argument("--config", type=Path, help="an evaluate output to rerun from")
    p.add_argument("--scores", type=Path)
    p.add_argument("--n-thresholds", type=int)
    p.set_defaults(out=None)

    p = sub.add_parser("sweep-epsmax", help="pick eps_max by validation AUROC")
    _add_common(p)
    p.add_argument("--model", type=Path)
    p.add_argument("--eps-max", type=float, nargs="+", dest="candidates")

    p = sub.add_parser("synth-demo", help="synthetic 2-D experiment end to end")
    _add_common(p)
    p.add_argument("--eps-max", type=float)
    return parser


def _resolve(args, file_args: dict | None = None) -> dict:
    file_cfg = None
    if args.config is not None:
        file_cfg, extra = E.load_config_file(args.config)
        if file_args is not None:
            file_args.update(extra)
    return E.resolve_config(file_cfg, args.preset, seed=args.seed, method=args.method,
                            eps_max=getattr(args, "eps_max", None))


def run(args) -> int:
    extra: dict = {}
    if args.command == "evaluate":
        if args.config is not None:
            extra = E.read_provenance(args.config).get("args", {})
        scores = args.scores or extra.get("scores")
        if scores is None:
            raise McaaError("evaluate needs --scores (or --config pointing at an evaluate output)")
        n = args.n_thresholds or extra.get("n_thresholds")
        res = E.cmd_evaluate(Path(scores), args.out, n, args.force)
        print(json.dumps({k: res["summary"][k] for k in ("auroc", "aupr", "n_test", "n_incorrect")}))
        for err in res["errors"]:
            log.error("%s", err)
        print(res["run_dir"])
        return 1 if res["errors"] else 0

    cfg = _resolve(args, extra)
    if args.command == "train":
        res = E.cmd_train(cfg, args.out, args.force)
    elif args.command == "score":
        model = args.model or extra.get("model") or E.run_dir(args.out, cfg) / "model.json"
        res = E.cmd_score(cfg, Path(model), args.out, args.split or extra.get("split", "test"),
                          args.force)
    elif args.command == "sweep-epsmax":
        model = args.model or extra.get("model") or E.run_dir(args.out, cfg) / "model.json"
        candidates = args.candidates or extra.get("eps_max") or E.SWEEP_DEFAULT
        res = E.cmd_sweep_epsmax(cfg, Path(model), candidates, args.out, args.force)
        print(f"selected eps_max = {res['selected']!r}")
    else:
        res = E.cmd_synth_demo(cfg, args.out, args.force)
    print(res["run_dir"])
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (McaaError, ValueError, KeyError, OSError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
