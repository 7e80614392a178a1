"""Command-line entry point: ``python -m hcb <subcommand>``.

stdout carries ``key=value`` summary lines only; logs go to stderr (level from
HCB_LOG). Exit status: 0 success, 1 suite or check failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from hcb import streams
from hcb.adversary import (
    adversarial_wedge,
    build_adversarial_family,
    export_family,
    matching_shape,
    theoretical_lower_bound,
)
from hcb.config import (
    DEFAULT_SEED,
    QUICK_FACTOR,
    AdversarySettings,
    ExperimentConfig,
    GeneratorSpec,
    concentration_generator,
    generator_from_dict,
    load_config,
    regime2_generator,
    wedge_generator,
)
from hcb.errors import AdversaryError, ConfigError, HcbError
from hcb.harness import estimate_simple_regret, random_instance, resolve_instance, sweep, write_reports
from hcb.log import configure_logging
from hcb.model import instance_to_dict, save_instance
from hcb.verify import run_all

logger = logging.getLogger(__name__)

PRESETS = {
    "wedge": wedge_generator,
    "regime2": regime2_generator,
    "concentration": concentration_generator,
}


def _emit(**pairs) -> None:
    print(" ".join(f"{k}={v}" for k, v in pairs.items()))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--quick", action="store_true", help=f"divide replication counts by {QUICK_FACTOR}")
    common.add_argument("--out", type=Path, help="output directory (file for gen-instance)")

    parser = argparse.ArgumentParser(prog="hcb", description="Hierarchical causal bandit experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="estimate simple regret for one (algorithm, T) cell")
    sub.add_parser("sweep", parents=[common], help="regret over the config's algorithms and T grid")
    verify = sub.add_parser("verify-lemmas", parents=[common], help="run the verification suites")
    verify.add_argument("--slow", action="store_true", help="include the wedge and scaling suites")
    verify.add_argument("--regime2", action="store_true", help="include the N=64 regime-2 wedge")
    adversary = sub.add_parser("adversary", parents=[common], help="measured regret against the lower bound")
    adversary.add_argument("--regime2", action="store_true", help="use the N=64 regime-2 instance")
    gen = sub.add_parser("gen-instance", parents=[common], help="write a random instance")
    gen.add_argument("--preset", choices=sorted(PRESETS), default="wedge")
    return parser


def _require_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config PATH")
    config = load_config(args.config)
    if args.seed is not None:
        config = _with(config, seed=args.seed)
    if args.quick:
        config = config.scaled(QUICK_FACTOR)
    return config


def _with(config: ExperimentConfig, **changes) -> ExperimentConfig:
    return replace(config, **changes)


def cmd_run(args: argparse.Namespace) -> int:
    config = _require_config(args)
    instance = resolve_instance(config)
    algorithm, T = config.algorithms[0], config.t_grid[-1]
    report = estimate_simple_regret(
        instance, algorithm, T, config.reps, config.seed, len(config.t_grid) - 1, args.workers, config.mode
    )
    out = args.out or (Path(config.out) if config.out else None)
    if out:
        write_reports([report], out, stem="run")
    _emit(**report.row())
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _require_config(args)
    if args.out:
        config = _with(config, out=str(args.out))
    for report in sweep(config, workers=args.workers):
        _emit(**report.row())
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    results = run_all(seed, quick=args.quick, workers=args.workers, slow=args.slow, regime2=args.regime2)
    for suite in results:
        _emit(suite=suite.name, status="pass" if suite.passed else "fail", checks=suite.checked)
        for line in suite.failures:
            print(f"{suite.name}: {line}", file=sys.stderr)
    ok = all(s.passed for s in results)
    _emit(result="pass" if ok else "fail", seed=seed)
    return 0 if ok else 1


def cmd_adversary(args: argparse.Namespace) -> int:
    settings = AdversarySettings()
    if args.config is not None:
        config = _require_config(args)
        instance = resolve_instance(config)
        settings = config.adversary or settings
        seed = config.seed
    else:
        seed = DEFAULT_SEED if args.seed is None else args.seed
        gen = regime2_generator() if args.regime2 else wedge_generator()
        instance = random_instance(gen, streams.stream(seed, purpose="instance"))
        if args.regime2:
            settings = AdversarySettings(t_grid=(1000,))
    if instance.K != 2:
        raise ConfigError("adversarial families are built for K = 2 instances")
    reps = max(2, settings.reps // QUICK_FACTOR) if args.quick and args.config is None else settings.reps

    rows = adversarial_wedge(
        instance.alpha1, instance.p, instance.q, settings.policy, settings.t_grid, reps, seed,
        args.workers, settings.shape, settings.lead, settings.members,
    )
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        families = []
        for T in settings.t_grid:
            report = theoretical_lower_bound(instance.alpha1, instance.p, instance.q, T)
            shape, lead = matching_shape(report) if settings.shape == "auto" else (settings.shape, settings.lead)
            families.append(export_family(build_adversarial_family(instance.alpha1, instance.p, instance.q, T, shape, lead)))
        (args.out / "families.json").write_text(json.dumps(families, indent=2, sort_keys=True) + "\n")
    for row in rows:
        _emit(
            T=row.T, regime=row.regime, shape=row.shape, worst_member=row.worst_member,
            regret=f"{row.regret:.6g}", stderr=f"{row.stderr:.3g}", bound=f"{row.bound:.6g}",
            gap_shortfalls=len(row.gap_shortfalls),
            status="pass" if row.passed else "fail",
        )
    ok = all(row.passed for row in rows)
    _emit(result="pass" if ok else "fail", seed=seed)
    return 0 if ok else 1


def cmd_gen_instance(args: argparse.Namespace) -> int:
    seed = DEFAULT_SEED if args.seed is None else args.seed
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read generator spec {args.config}: {exc}") from None
        gen: GeneratorSpec = generator_from_dict(data.get("instance", data) if isinstance(data, dict) else data)
    else:
        gen = PRESETS[args.preset]()
    instance = random_instance(gen, streams.stream(seed, purpose="instance"))
    if args.out:
        path = save_instance(instance, args.out)
        _emit(instance=path, N=instance.N, K=instance.K, seed=seed)
    else:
        print(json.dumps(instance_to_dict(instance), indent=2))
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "verify-lemmas": cmd_verify,
    "adversary": cmd_adversary,
    "gen-instance": cmd_gen_instance,
}


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.workers < 1:
        parser.print_usage(sys.stderr)
        print("hcb: error: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, AdversaryError) as exc:
        parser.print_usage(sys.stderr)
        print(f"hcb: error: {exc}", file=sys.stderr)
        return 2
    except HcbError as exc:
        logger.error("%s", exc)
        return 1
