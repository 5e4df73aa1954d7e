"""Command-line entry points: train, eval, serve, replay.

All commands are seeded and reproducible; `train` requires an explicit
seed so two runs of the same invocation write byte-identical logs.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from ..config import AppConfig, ConfigError, load_config, write_default_config
from ..ddqn import (
    GreedyPolicy,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)
from ..metrics import TrialMode
from ..sim_env import Layout
from ..trials import ReplayMismatchError, parse_kv_line, replay_trial, run_trial
from .server import SessionServer

__all__ = ["main"]

_LAYOUTS = {
    "RandomUniform": Layout.RANDOM_UNIFORM,
    "EvalA": Layout.EVAL_A,
    "EvalB": Layout.EVAL_B,
    "EvalC": Layout.EVAL_C,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pegsim",
        description="Peg-transfer simulator with a learned coarse controller "
                    "and manual-override precision control.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train the coarse controller")
    p_train.add_argument("--config", help="INI config file")
    p_train.add_argument("--seed", type=int, required=True,
                         help="master seed (required for reproducibility)")
    p_train.add_argument("--episodes", type=int, help="override max episodes")
    p_train.add_argument("--checkpoint", default="pegsim.ckpt",
                         help="where to write the trained network")
    p_train.add_argument("--log", help="training log path (line-delimited records)")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--config", help="INI config file")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--layout", default="RandomUniform", choices=sorted(_LAYOUTS))
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--mode", choices=["coarse", "manual", "semi"],
                        default="coarse",
                        help="coarse: greedy reach episodes; manual/semi: "
                             "full scripted trials with the virtual operator")
    p_eval.add_argument("--log", help="write trial logs here (manual/semi modes)")

    p_serve = sub.add_parser("serve", help="run the operator session server")
    p_serve.add_argument("--config", help="INI config file")
    p_serve.add_argument("--checkpoint", required=True)
    p_serve.add_argument("--port", type=int)
    p_serve.add_argument("--seed", type=int, default=0)
    p_serve.add_argument("--mode", choices=["manual", "semi"], default="semi")
    p_serve.add_argument("--log", help="append trial logs to this file")

    p_replay = sub.add_parser("replay", help="re-simulate and verify a trial log")
    p_replay.add_argument("--config", help="INI config file")
    p_replay.add_argument("--log", required=True)

    p_cfg = sub.add_parser("write-config", help="emit a commented default config")
    p_cfg.add_argument("path")
    return parser


def _load(args) -> AppConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return AppConfig()


def cmd_train(args) -> int:
    cfg = _load(args)
    train_cfg = cfg.train
    train_cfg.seed = args.seed
    if args.episodes:
        train_cfg.max_episodes = args.episodes
    log_lines: list[str] = []
    result = train(train_cfg, env_config=cfg.env, render_config=cfg.render,
                   log_lines=log_lines)
    net, target = result.best_networks()
    save_checkpoint(net, target, args.checkpoint)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write("\n".join(log_lines) + "\n")
    succ = sum(e.success for e in result.episodes[-20:]) / min(20, len(result.episodes))
    print(f"trained {len(result.episodes)} episodes "
          f"({result.global_steps} steps, {result.elapsed_s:.1f}s); "
          f"final-20 success {succ:.2f}; checkpoint -> {args.checkpoint}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load(args)
    net, _ = load_checkpoint(args.checkpoint, expected_actions=27)
    if args.mode == "coarse":
        step_log = [] if args.log else None
        rate, mean_len, _ = evaluate(
            net, cfg.env, _LAYOUTS[args.layout], args.episodes, args.seed,
            obs_mode="vision" if len(net.input_shape) == 3 else "feature",
            render_config=cfg.render, step_log=step_log,
        )
        if args.log and step_log is not None:
            with open(args.log, "w", encoding="utf-8") as fh:
                fh.write("\n".join(step_log) + "\n")
        print(f"success_rate={rate!r} mean_length={mean_len!r} "
              f"episodes={args.episodes} layout={args.layout}")
        return 0

    mode = TrialMode.MANUAL if args.mode == "manual" else TrialMode.SEMI_AUTONOMOUS
    policy = GreedyPolicy(net, cfg.env, cfg.render)
    seeds = np.random.default_rng(args.seed)
    travels, durations = [], []
    all_lines: list[str] = []
    for _ in range(args.episodes):
        result = run_trial(mode, int(seeds.integers(0, 2**31 - 1)), cfg.env,
                           agent=policy, arb_config=cfg.arbiter)
        if not result.completed:
            print("warning: trial did not complete", file=sys.stderr)
            continue
        travels.append(result.travel_mm)
        durations.append(result.duration_s)
        all_lines.extend(result.log_lines)
    if args.log and all_lines:
        with open(args.log, "w", encoding="utf-8") as fh:
            fh.write("\n".join(all_lines) + "\n")
    print(f"mode={args.mode} trials={len(travels)} "
          f"mean_m_mm={float(np.mean(travels))!r} "
          f"mean_t_s={float(np.mean(durations))!r}")
    return 0


def cmd_serve(args) -> int:
    cfg = _load(args)
    if args.port:
        cfg.gateway.port = args.port
    net, _ = load_checkpoint(args.checkpoint, expected_actions=27)
    policy = GreedyPolicy(net, cfg.env, cfg.render)
    mode = TrialMode.MANUAL if args.mode == "manual" else TrialMode.SEMI_AUTONOMOUS
    server = SessionServer(cfg, policy, mode=mode, seed=args.seed,
                           trial_log_path=args.log)
    port = server.bind()
    print(f"listening on {cfg.gateway.host}:{port} "
          f"(tcp json-lines or websocket), mode={args.mode}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_replay(args) -> int:
    cfg = _load(args)
    with open(args.log, encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    # a file may hold several concatenated trials; split on headers
    trials: list[list[str]] = []
    for line in lines:
        if line.startswith("trial "):
            trials.append([])
        if not trials:
            print("error: log does not start with a trial header", file=sys.stderr)
            return 2
        trials[-1].append(line)
    for i, chunk in enumerate(trials):
        try:
            result = replay_trial(chunk, cfg.env, arb_config=cfg.arbiter)
        except ReplayMismatchError as exc:
            print(f"trial {i}: MISMATCH: {exc}", file=sys.stderr)
            return 1
        _, summary = parse_kv_line(chunk[-1])
        print(f"trial {i}: verified m_mm={summary['m_mm']} t_s={summary['t_s']} "
              f"completed={result.completed}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "write-config":
            write_default_config(args.path)
            print(f"wrote {args.path}")
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
