"""Command-line front end: single attacks and batch campaigns."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness, oracle
from .attack import AttackConfig, run_attack
from .errors import ConfigError, ModelFormatError
from .harness import ATTACKERS, random_baseline_attack
from .oracle import QueryCounter
from .sampling import STRATEGIES

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_INTERNAL_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfoattack",
        description="Targeted black-box adversarial attacks under an l-infinity budget",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    atk = sub.add_parser("attack", help="attack one image toward one target class")
    atk.add_argument("--model", required=True, help="weights file (JSON)")
    atk.add_argument("--image", required=True, help="image file (JSON)")
    atk.add_argument("--target", required=True, type=int, help="target class index")
    atk.add_argument("--eps", required=True, type=float, help="l-infinity energy budget")
    atk.add_argument("--budget", type=int, default=3000, help="query budget n_max")
    atk.add_argument("--batch", type=int, default=50, help="coordinates per batch")
    atk.add_argument("--kappa", type=int, default=None, help="query cap per batch")
    atk.add_argument("--strategy", choices=STRATEGIES, default="variance")
    atk.add_argument("--attacker", choices=ATTACKERS, default="bobyqa")
    atk.add_argument("--seed", type=int, default=0)
    atk.add_argument("--out", default=None, help="write the result as JSON here")

    camp = sub.add_parser("campaign", help="run a batch campaign from a config file")
    camp.add_argument("--config", required=True, help="experiment config (JSON)")
    return parser


def _run_attack_command(args) -> int:
    model = oracle.load_model(args.model)
    image = harness.load_image(args.image)
    config = AttackConfig(
        epsilon=args.eps,
        n_max=args.budget,
        b=args.batch,
        kappa=args.kappa,
        strategy=args.strategy,
        seed=args.seed,
    )
    counter = QueryCounter(budget=args.budget)
    fn = run_attack if args.attacker == "bobyqa" else random_baseline_attack
    result = fn(config, model, image, args.target, counter)
    print(
        f"attacker={args.attacker} target={args.target} eps={args.eps:g} "
        f"success={str(result.success).lower()} queries={result.queries_used}"
    )
    if args.out:
        payload = {
            "attacker": args.attacker,
            "target": args.target,
            "eps": args.eps,
            "success": result.success,
            "verified": result.verified,
            "queries_used": result.queries_used,
            "levels_completed": result.levels_completed,
            "loss_trace": result.loss_trace,
            "final_perturbation": result.final_perturbation.tolist(),
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh)
            fh.write("\n")
    return EXIT_OK


def _run_campaign_command(args) -> int:
    config = harness.load_experiment_config(args.config)
    records, summary = harness.run_campaign(config)
    out = config.output or "campaign.csv"
    harness.write_records_csv(records, out)
    harness.write_summary_json(summary, str(Path(out).with_suffix("")) + ".summary.json")
    for key in sorted(summary["cells"]):
        cell = summary["cells"][key]
        print(f"{key}: success_rate={cell['success_rate']:.3f} records={cell['records']}")
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "attack":
            return _run_attack_command(args)
        return _run_campaign_command(args)
    except (ConfigError, ModelFormatError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
