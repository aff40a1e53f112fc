"""Command-line entry point: ``banditprompt run`` and ``banditprompt score``."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, Policy, config_from_dict, load_config
from .errors import ConfigError, DataError, ServiceError
from .reward import avg_rouge_reward, load_profiles
from .simulation import aggregate, run_suite, synthetic_profiles

EXIT_CONFIG, EXIT_DATA, EXIT_SERVICE = 1, 2, 3

_UNSAFE = re.compile(r"[^A-Za-z0-9._-]+")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def _resolve_config(args) -> ExperimentConfig:
    if args.manifest:
        try:
            manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            cfg = config_from_dict(manifest["config"])
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {args.manifest}: {exc}") from exc
        args.profiles = args.profiles or manifest.get("profiles")
        args.synthetic = args.synthetic or manifest.get("synthetic")
        args.policy = args.policy or manifest.get("policies")
    elif args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc.strerror}") from exc
        cfg = load_config(text)
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    if args.endpoint:
        cfg = cfg.replace(reward_oracle={**vars(cfg.reward_oracle), "kind": "rouge", "endpoint": args.endpoint})
    if cfg.reward_oracle.kind == "rouge" and not cfg.reward_oracle.endpoint:
        raise ConfigError("the rouge oracle needs --endpoint or reward_oracle.endpoint", "reward_oracle.endpoint")
    return cfg


def _average_curves(groups) -> str:
    rows = {name: np.mean([tr.best_curve for tr in trajs], axis=0) for name, trajs in groups.items()}
    names = list(rows)
    lines = [",".join(["t"] + names)]
    for t in range(len(next(iter(rows.values())))):
        lines.append(",".join([str(t)] + [repr(float(rows[n][t])) for n in names]))
    return "\n".join(lines) + "\n"


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    if not args.profiles and not args.synthetic:
        raise DataError("one of --profiles or --synthetic is required")
    if args.profiles and args.synthetic:
        raise DataError("--profiles and --synthetic are mutually exclusive")
    if args.profiles:
        profiles = load_profiles(args.profiles)
    else:
        try:
            profiles = synthetic_profiles(args.synthetic)
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    policies = []
    for name in args.policy or ["neuralucb", "neuralts"]:
        pol = Policy.parse(name)
        if pol not in policies:
            policies.append(pol)

    out = Path(args.out)
    traj_dir = out / "trajectories"
    traj_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "tool": "banditprompt",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_fingerprint": cfg.fingerprint(),
        "profiles": str(args.profiles) if args.profiles else None,
        "synthetic": args.synthetic,
        "policies": [p.value for p in policies],
        "out": str(out),
        "started_at": _now(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")

    groups, baseline = run_suite(profiles, cfg, policies, jobs=args.jobs)
    for name, trajs in list(groups.items()) + [("baseline", baseline)]:
        for tr in trajs:
            tr.write_csv(traj_dir / f"{_UNSAFE.sub('_', tr.profile_id)}__{name}.csv")
    report = aggregate(groups, baseline)
    (out / "report.json").write_text(report.dumps() + "\n", encoding="utf-8")
    (out / "average_curves.csv").write_text(_average_curves({**groups, "baseline": baseline}), encoding="utf-8")
    print(
        f"{len(profiles)} profiles x {len(policies)} policies; best {report.best_policy} "
        f"{report.policies[report.best_policy].mean:.4f} vs baseline {report.baseline.mean:.4f} "
        f"({report.improvement_pct:+.1f}%)"
    )
    return 0


def _read_lines(path) -> list:
    try:
        return Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def cmd_score(args) -> int:
    generated, gold = _read_lines(args.generated), _read_lines(args.gold)
    if len(generated) != len(gold):
        raise DataError(f"line count mismatch: {len(generated)} generated vs {len(gold)} gold")
    scores = [avg_rouge_reward(g, r) for g, r in zip(generated, gold)]
    for s in scores:
        print(repr(s))
    print(f"mean\t{float(np.mean(scores)) if scores else 0.0!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="banditprompt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run bandit policies and the baseline over profiles")
    run.add_argument("--config", help="JSON config file (defaults apply to absent keys)")
    run.add_argument("--manifest", help="re-run from a previous run's manifest.json")
    run.add_argument("--profiles", help="profile file (JSON array of records)")
    run.add_argument("--synthetic", help="synthetic landscape suite id: small | standard")
    run.add_argument(
        "--policy",
        action="append",
        choices=["neuralucb", "neuralts", "random"],
        help="policy to run; repeatable (default: neuralucb and neuralts)",
    )
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--endpoint", help="generation service base URL (switches to the ROUGE oracle)")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--jobs", type=int, default=1, help="profiles to run concurrently")
    run.set_defaults(func=cmd_run)

    score = sub.add_parser("score", help="average ROUGE-1/L F1 of generated vs gold lines")
    score.add_argument("--generated", required=True)
    score.add_argument("--gold", required=True)
    score.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ServiceError as exc:
        where = f" at iteration {exc.iteration}" if exc.iteration is not None else ""
        print(f"service error{where}: {exc}", file=sys.stderr)
        return EXIT_SERVICE


if __name__ == "__main__":
    sys.exit(main())
