"""Command-line entry points.

Exit codes: 0 success, 1 other failure, 2 configuration, 3 authentication,
4 file I/O, 5 schema or validation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .agents import (AgentConfig, ChatGateway, OracleAgent, RemoteAdversary, RemoteAgent, RemoteCritic,
                     ToyAgent, ToyPolicyParams, default_temperatures)
from .credit import OracleAdversary, OracleCritic
from .datasynth import (CurriculumRecord, RemoteInstructions, RemoteKnowledge, dataset_stats,
                        gen_basic_knowledge, gen_instruction_knowledge, gen_process_preference)
from .env.generate import DIFFICULTY, generate_suite
from .errors import AuthError, ConfigError, CrmarlError, SchemaMismatch, ValidationError
from .io import (envpack_json, load_envpack, read_json, read_jsonl, write_json, write_jsonl,
                 write_manifest)
from .rollout import (RolloutConfig, read_trajectory_log, run_rollouts, step_success_rate, success_rate,
                      write_trajectory_log)
from .schemas import CHECKPOINT_SCHEMA, check
from .training import TrainConfig, checkpoint_json, continual_train, load_checkpoint, marl_train, suite_kind

log = logging.getLogger("crmarl")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_AUTH, EXIT_IO, EXIT_SCHEMA = 0, 1, 2, 3, 4, 5

CONFIG_SECTIONS = {"seed", "backend", "model", "base_url", "rollout", "train", "synth", "critic", "adversary"}


# -- configuration --------------------------------------------------------

def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        cfg = read_json(path)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(cfg) - CONFIG_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if any(k.lower().endswith(("key", "token", "secret")) for k in _flat_keys(cfg)):
        raise ConfigError("credentials belong in the environment, not in config files")
    return cfg


def _flat_keys(d: dict[str, Any]):
    for k, v in d.items():
        yield k
        if isinstance(v, dict):
            yield from _flat_keys(v)


def require_seed(args, cfg: dict[str, Any]) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("a seed is required (--seed or \"seed\" in the config)")
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return seed


def gateway_from(cfg: dict[str, Any]) -> ChatGateway:
    gw = ChatGateway(cfg.get("base_url"), cfg.get("model") or "gpt-4o-mini")
    gw.api_key()  # fail before any work if the key is missing
    return gw


def rollout_config(args, cfg: dict[str, Any], seed: int, env_kind: str, backend: str) -> RolloutConfig:
    section = dict(cfg.get("rollout", {}))
    if args.n is not None:
        section["n"] = args.n
    if args.m is not None:
        section["m"] = args.m
    section["seed"] = seed
    section["env_kind"] = env_kind
    n = section.get("n", 4)
    if "agent_configs" not in section:
        section["agent_configs"] = [AgentConfig(backend, t, model=cfg.get("model"), agent_index=i).to_json()
                                    for i, t in enumerate(default_temperatures(n))]
    try:
        return RolloutConfig.from_json(section)
    except TypeError as exc:
        raise ConfigError(f"rollout config: {exc}") from exc


def train_config(args, cfg: dict[str, Any], seed: int) -> TrainConfig:
    section = dict(cfg.get("train", {}))
    for flag, key in (("epochs", "epochs"), ("beta", "beta"), ("n", "n"), ("m", "m")):
        if getattr(args, flag, None) is not None:
            section[key] = getattr(args, flag)
    section["seed"] = seed
    return TrainConfig.from_json(section)


def read_checkpoint(path: str) -> tuple[ToyPolicyParams, ToyPolicyParams, TrainConfig, dict[str, Any]]:
    data = read_json(path)
    if not isinstance(data, dict) or data.get("schema") != CHECKPOINT_SCHEMA:
        raise SchemaMismatch(f"{path} is not a checkpoint")
    check("checkpoint", data)
    params, ref, tc = load_checkpoint(data)
    return params, ref, tc, data


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands -------------------------------------------------------------

def cmd_genenv(args) -> int:
    cfg = load_config(args.config)
    seed = require_seed(args, cfg)
    suite = generate_suite(seed, args.kind, args.difficulty, args.n_tasks, args.tasks_per_env)
    pack = envpack_json(suite, args.kind, args.difficulty, seed)
    check("envpack", pack)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, pack)
    write_manifest(out, "genenv", {"kind": args.kind, "difficulty": args.difficulty, "n_tasks": args.n_tasks,
                                   "tasks_per_env": args.tasks_per_env}, {"seed": seed}, [out])
    print(f"wrote {sum(len(t) for _, t in suite)} tasks in {len(suite)} environments to {out}")
    return EXIT_OK


def policy_agents(backend: str, rc: RolloutConfig, cfg: dict[str, Any], checkpoint: str | None):
    if backend == "scripted":
        return [OracleAgent(c) for c in rc.agent_configs]
    if backend == "toy":
        params = read_checkpoint(checkpoint)[0] if checkpoint else ToyPolicyParams.zeros(rc.n)
        return [ToyAgent(c, params) for c in rc.agent_configs]
    gw = gateway_from(cfg)
    return [RemoteAgent(c, gw) for c in rc.agent_configs]


def _rollout_summary(trajs, suite) -> dict[str, Any]:
    worlds = {w.id: w for w, _ in suite}
    return {"episodes": len(trajs), "successes": sum(t.outcome_reward for t in trajs),
            "sr": success_rate(trajs), "ssr": step_success_rate(trajs, worlds),
            "steps": sum(len(t.steps) for t in trajs)}


def cmd_rollout(args) -> int:
    cfg = load_config(args.config)
    seed = require_seed(args, cfg)
    backend = args.backend or cfg.get("backend", "scripted")
    _, suite = load_envpack(args.envpack)
    rc = rollout_config(args, cfg, seed, suite_kind(suite).value, backend)
    agents = policy_agents(backend, rc, cfg, args.checkpoint)
    trajs = run_rollouts(suite, rc, agents, mode=args.mode)
    out = _out_dir(args.out)
    log_path, summary_path = out / "trajectories.jsonl", out / "summary.json"
    with open(log_path, "w", encoding="utf-8") as fh:
        write_trajectory_log(fh, rc, trajs, {"mode": args.mode, "backend": backend})
    summary = {"mode": args.mode, "backend": backend, **_rollout_summary(trajs, suite)}
    write_json(summary_path, summary)
    write_manifest(log_path, "rollout", rc.to_json(), {"seed": seed}, [log_path, summary_path])
    print(json.dumps(summary))
    return EXIT_OK


def _critic_and_adversary(cfg: dict[str, Any]):
    critic = OracleCritic()
    adversary = OracleAdversary()
    if cfg.get("critic") == "remote" or cfg.get("adversary") == "remote":
        gw = gateway_from(cfg)
        if cfg.get("critic") == "remote":
            critic = RemoteCritic(gw)
        if cfg.get("adversary") == "remote":
            adversary = RemoteAdversary(gw)
    return critic, adversary


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    seed = require_seed(args, cfg)
    tc = train_config(args, cfg, seed)
    _, suite = load_envpack(args.envpack)
    eval_suite = load_envpack(args.eval_envpack)[1] if args.eval_envpack else suite
    critic, adversary = _critic_and_adversary(cfg)
    if args.continue_from:
        prior = read_checkpoint(args.continue_from)[0]
        params, ref, metrics = continual_train(prior, tc, suite, eval_suite, critic, adversary)
        mode = "continual"
    else:
        params, ref, metrics = marl_train(tc, suite, eval_suite, critic, adversary)
        mode = "fresh"
    out = _out_dir(args.out)
    ckpt_path, metrics_path = out / "checkpoint.json", out / "metrics.jsonl"
    ckpt = {"schema": CHECKPOINT_SCHEMA, **checkpoint_json(params, ref, tc, suite_kind(suite)), "mode": mode}
    check("checkpoint", ckpt)
    write_json(ckpt_path, ckpt)
    rows = [{"epoch": 0, "eval_sr": metrics.initial_eval_sr, "eval_ssr": metrics.initial_eval_ssr}]
    rows += [e.to_json() for e in metrics.epochs]
    write_jsonl(metrics_path, rows)
    write_manifest(ckpt_path, "train", {"train": tc.to_json(), "mode": mode}, {"seed": seed},
                   [ckpt_path, metrics_path])
    print(json.dumps({"mode": mode, "initial_eval_sr": metrics.initial_eval_sr,
                      "final_eval_sr": metrics.final_eval_sr}))
    return EXIT_OK


def _split(count: int, parts: int) -> list[int]:
    return [count // parts + (k < count % parts) for k in range(parts)]


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    seed = require_seed(args, cfg)
    section = dict(cfg.get("synth", {}))
    counts = {t: getattr(args, t) if getattr(args, t) is not None else section.get(t, 0)
              for t in ("basic", "instruction", "preference")}
    backend = args.backend or cfg.get("backend", "scripted")
    if backend not in ("scripted", "remote"):
        raise ConfigError("synth backends are scripted or remote")
    _, suite = load_envpack(args.envpack)
    knowledge = instructions = None
    ui_agent = OracleAgent()
    adversary, critic = OracleAdversary(), OracleCritic()
    if backend == "remote":
        gw = gateway_from(cfg)
        knowledge, instructions = RemoteKnowledge(gw), RemoteInstructions(gw)
        ui_agent = RemoteAgent(AgentConfig("remote", 0.1, model=cfg.get("model")), gw)
        adversary, critic = RemoteAdversary(gw), RemoteCritic(gw)

    records: dict[str, list[CurriculumRecord]] = {"basic": [], "instruction": [], "preference": []}
    rejected = {"basic": 0, "instruction": 0, "preference": 0}
    drops: dict[str, int] = {}
    for k, ((world, _), c) in enumerate(zip(suite, _split(counts["basic"], len(suite)))):
        if c:
            r = gen_basic_knowledge(world, c, knowledge, seed * 1000 + k)
            records["basic"] += r.records
            rejected["basic"] += r.rejected
    for k, ((world, _), c) in enumerate(zip(suite, _split(counts["instruction"], len(suite)))):
        if c:
            r = gen_instruction_knowledge(world, c, instructions, seed * 1000 + k)
            records["instruction"] += r.records
            rejected["instruction"] += r.rejected
    if counts["preference"]:
        r = gen_process_preference(suite, counts["preference"], ui_agent, adversary, critic, seed, backend)
        records["preference"] = r.records
        rejected["preference"] = r.rejected
        drops = r.drops

    out = _out_dir(args.out)
    paths = []
    for tier, recs in records.items():
        p = out / f"{tier}.jsonl"
        write_jsonl(p, (r.to_json() for r in recs))
        paths.append(p)
    stats = dataset_stats([r for recs in records.values() for r in recs], drops, rejected)
    stats["requested"] = counts
    stats_path = out / "stats.json"
    write_json(stats_path, stats)
    write_manifest(stats_path, "synth", {"counts": counts, "backend": backend}, {"seed": seed},
                   paths + [stats_path])
    print(json.dumps(stats["tiers"]))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    seed = require_seed(args, cfg)
    _, suite = load_envpack(args.envpack)
    kind = suite_kind(suite).value
    backend = args.backend or ("toy" if args.checkpoint else cfg.get("backend", "scripted"))
    source_kind = None
    if args.checkpoint:
        source_kind = read_checkpoint(args.checkpoint)[3]["env_kind"]
    rc = rollout_config(args, cfg, seed, kind, backend)
    agents = policy_agents(backend, rc, cfg, args.checkpoint)
    trajs = run_rollouts(suite, rc, agents, mode=args.mode)
    out = _out_dir(args.out)
    log_path, report_path = out / "eval_trajectories.jsonl", out / "report.json"
    with open(log_path, "w", encoding="utf-8") as fh:
        write_trajectory_log(fh, rc, trajs, {"mode": args.mode, "backend": backend})
    summary = _rollout_summary(trajs, suite)
    report = {"mode": args.mode, "backend": backend, "env_kind": kind, "checkpoint_env_kind": source_kind,
              "transfer": source_kind is not None and source_kind != kind, **summary}
    if args.mode == "step":
        report.pop("sr")
    write_json(report_path, report)
    write_manifest(report_path, "eval", rc.to_json(), {"seed": seed}, [log_path, report_path])
    print(json.dumps(report))
    return EXIT_OK


def _detect(path: Path) -> tuple[str, Any]:
    """Guess the schema of a file from its first record."""
    if path.suffix == ".jsonl":
        rows = read_jsonl(path)
        if not rows:
            return "empty", rows
        first = rows[0]
        if first.get("type") == "header":
            return "trajectory_line", rows
        if first.get("schema") == "crmarl.curriculum/1":
            return "curriculum", rows
        if first.get("schema") == "crmarl.preference/1":
            return "preference", rows
        if "epoch" in first:
            return "metrics", rows
        return "unknown", rows
    data = read_json(path)
    schema = data.get("schema") if isinstance(data, dict) else None
    kinds = {"crmarl.envpack/1": "envpack", CHECKPOINT_SCHEMA: "checkpoint", "crmarl.manifest/1": "manifest"}
    return kinds.get(schema, "json"), data


def cmd_report(args) -> int:
    failures = 0
    for name in args.paths:
        path = Path(name)
        kind, data = _detect(path)
        if args.validate:
            if kind in ("trajectory_line", "curriculum", "preference"):
                bad = 0
                for row in data:
                    try:
                        check(kind, row)
                    except SchemaMismatch as exc:
                        bad += 1
                        if bad == 1:
                            print(f"{path}: {exc}", file=sys.stderr)
                print(f"{path}: {kind} {len(data) - bad}/{len(data)} valid")
                failures += bad > 0
            elif kind in ("envpack", "checkpoint", "manifest"):
                try:
                    check(kind, data)
                    print(f"{path}: {kind} valid")
                except SchemaMismatch as exc:
                    print(f"{path}: {exc}", file=sys.stderr)
                    failures += 1
            elif kind == "empty":
                print(f"{path}: empty, nothing to validate")
            else:
                print(f"{path}: no schema for this file", file=sys.stderr)
                failures += 1
            continue
        if kind == "trajectory_line":
            header, trajs = read_trajectory_log(path)
            succ = sum(t.outcome_reward for t in trajs)
            print(f"{path}: {len(trajs)} episodes, SR {succ / len(trajs) if trajs else 0.0:.3f}")
        elif kind == "metrics":
            for row in data:
                print(f"{path}: epoch {row['epoch']} eval SR {row['eval_sr']:.3f}")
        elif kind == "checkpoint":
            print(f"{path}: {data['env_kind']} checkpoint, seed {data['seed']}, "
                  f"{data.get('mode', 'fresh')} training")
        elif kind in ("curriculum", "preference"):
            print(f"{path}: {len(data)} {kind} records")
        else:
            print(f"{path}: {json.dumps(data)[:400]}")
    return EXIT_SCHEMA if failures else EXIT_OK


# -- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crmarl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", help="JSON config file; flags override its values")
        if seed:
            p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True)

    def team(p):
        p.add_argument("--n", type=int, help="number of agents")
        p.add_argument("--m", type=int, help="conversation rounds per step")

    p = sub.add_parser("genenv", help="generate an environment pack")
    common(p)
    p.add_argument("--kind", choices=("mobile", "web"), default="mobile")
    p.add_argument("--difficulty", choices=tuple(DIFFICULTY), default="easy")
    p.add_argument("--n-tasks", type=int, default=20)
    p.add_argument("--tasks-per-env", type=int, default=4)
    p.set_defaults(func=cmd_genenv)

    p = sub.add_parser("rollout", help="run episodes and log trajectories")
    common(p)
    team(p)
    p.add_argument("--envpack", required=True)
    p.add_argument("--backend", choices=("scripted", "toy", "remote"))
    p.add_argument("--checkpoint", help="toy policy checkpoint")
    p.add_argument("--mode", choices=("online", "step"), default="online")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("train", help="multi-agent preference training of the toy policy")
    common(p)
    team(p)
    p.add_argument("--envpack", required=True)
    p.add_argument("--eval-envpack")
    p.add_argument("--epochs", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--continue-from", help="checkpoint to resume from in a new environment")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth", help="synthesize curriculum datasets")
    common(p)
    p.add_argument("--envpack", required=True)
    p.add_argument("--backend", choices=("scripted", "remote"))
    p.add_argument("--basic", type=int)
    p.add_argument("--instruction", type=int)
    p.add_argument("--preference", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="evaluate a policy (SR online, SSR in step mode)")
    common(p)
    team(p)
    p.add_argument("--envpack", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--backend", choices=("scripted", "toy", "remote"))
    p.add_argument("--mode", choices=("online", "step"), default="online")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="summarize or validate output files")
    p.add_argument("paths", nargs="+")
    p.add_argument("--validate", action="store_true", help="check files against their schemas")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AuthError as exc:
        print(f"auth error: {exc}", file=sys.stderr)
        return EXIT_AUTH
    except (SchemaMismatch, ValidationError, json.JSONDecodeError) as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CrmarlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
