"""Command-line pipeline: generate, synchronize, pre-train, clone, evaluate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical abort.
All randomness derives from --seed; reruns with the same seed reproduce
outputs bit-for-bit on one machine.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import RunConfig, load_config, write_resolved_config
from .dataio import (
    compute_stats,
    filter_valid,
    format_stats,
    read_episode,
    read_manifest,
    stats_key_value,
    write_episode,
    write_manifest,
)
from .errors import DataError, NumericalError, UsageError, VtlabError
from .seeding import child_seed

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

DATA_DIR_ENV = "VITAMIN_DATA_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); remap to a usage error
        raise UsageError(message)


def _data_dir_default() -> str | None:
    return os.environ.get(DATA_DIR_ENV)


def _require(value, flag: str):
    if value is None:
        raise UsageError(f"{flag} is required (or set ${DATA_DIR_ENV})")
    return value


def _load_dataset(data_dir: str | Path, kinds: tuple[str, ...] = ("raw", "aligned")):
    data_dir = Path(data_dir)
    episodes = []
    for entry in read_manifest(data_dir):
        episodes.append(read_episode(data_dir / entry["file"]))
    if not episodes:
        raise DataError(f"dataset at {data_dir} is empty")
    return episodes


def _gen_one(args: tuple) -> dict:
    from .simworld import collect_episode

    task, index, seed, out_dir, cfg = args
    episode = collect_episode(task, seed, cfg)
    name = f"ep_{task.value}_{index:05d}.vtmn"
    write_episode(episode, Path(out_dir) / name)
    return {"file": name, "task_id": task.value, "seed": seed, "index": index,
            "tracking_failed": episode.tracking_failed}


def cmd_gen_data(args, cfg: RunConfig) -> int:
    from .simworld import TaskId

    task = TaskId(args.task)
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)

    jobs = [(task, i, child_seed(args.seed, "episode", task.value, i), out_dir, cfg.simworld)
            for i in range(args.episodes)]
    if args.workers > 1:
        import multiprocessing as mp

        with mp.Pool(args.workers) as pool:
            entries = pool.map(_gen_one, jobs)
    else:
        entries = [_gen_one(job) for job in jobs]
    entries.sort(key=lambda e: e["index"])
    write_manifest(out_dir, entries)
    print(f"wrote {len(entries)} episodes to {out_dir}")
    return EXIT_OK


def cmd_sync(args, cfg: RunConfig) -> int:
    from .sync import align_episode

    data_dir = Path(_require(args.data or _data_dir_default(), "--data"))
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)

    entries = []
    for entry in read_manifest(data_dir):
        episode = read_episode(data_dir / entry["file"])
        aligned = align_episode(episode, rate=cfg.sync.policy_hz)
        name = entry["file"].replace("ep_", "aligned_")
        write_episode(aligned, out_dir / name)
        entries.append({**entry, "file": name, "ticks": len(aligned)})
    write_manifest(out_dir, entries)
    print(f"aligned {len(entries)} episodes into {out_dir}")
    return EXIT_OK


def cmd_stats(args, cfg: RunConfig) -> int:
    data_dir = Path(_require(args.data or _data_dir_default(), "--data"))
    episodes = _load_dataset(data_dir)
    stats = compute_stats(episodes)
    print(format_stats(stats))
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(stats_key_value(stats), encoding="utf-8")
        print(f"stats written to {args.out}")
    return EXIT_OK


def cmd_pretrain(args, cfg: RunConfig) -> int:
    from .pretrain import pretrain

    data_dir = Path(_require(args.data or _data_dir_default(), "--data"))
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    if args.steps is not None:
        cfg.repr.steps = args.steps

    episodes = _load_dataset(data_dir)  # pre-training keeps tracking-failed episodes
    model = pretrain(episodes, cfg.repr, seed=args.seed, out_dir=out_dir)
    losses = model.loss_history
    print(f"pre-trained for {len(losses)} steps; loss {losses[0]:.3f} -> {losses[-1]:.3f}; "
          f"checkpoint {out_dir / 'repr_final.ckpt'}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    from .policy import Variant, train_policy
    from .pretrain import load_repr_checkpoint

    data_dir = Path(_require(args.data or _data_dir_default(), "--data"))
    out_dir = Path(_require(args.out, "--out"))
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config(cfg, out_dir)
    if args.epochs is not None:
        cfg.policy.epochs = args.epochs

    episodes = _load_dataset(data_dir)
    if args.task:
        episodes = [ep for ep in episodes if ep.task_id == args.task]
    episodes = filter_valid(episodes)
    if not episodes:
        raise DataError("no valid episodes to train on after filtering")

    repr_model = load_repr_checkpoint(args.repr)
    model = train_policy(episodes, repr_model, Variant(args.variant), cfg.policy,
                         seed=args.seed, out_dir=out_dir)
    losses = model.loss_history
    print(f"trained {args.variant} on {len(episodes)} episodes; "
          f"loss {losses[0]:.3f} -> {losses[-1]:.3f}; "
          f"checkpoint {out_dir / f'policy_{args.variant}.ckpt'}")
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    from .evalharness import evaluate_model, write_rows_csv
    from .policy import load_policy_checkpoint

    model = load_policy_checkpoint(args.policy, unet_channels=cfg.policy.unet_channels)
    if args.variant and args.variant != model.variant.value:
        raise UsageError(f"--variant {args.variant} does not match checkpoint "
                         f"variant {model.variant.value}")
    trials = args.trials if args.trials is not None else cfg.eval.trials
    rows = evaluate_model(model, args.task, trials, args.seed,
                          sim_cfg=cfg.simworld, eval_cfg=cfg.eval)
    out = Path(args.out or "eval.csv")
    write_rows_csv(rows, out)
    rate = sum(r.overall for r in rows) / len(rows)
    print(f"{len(rows)} trials on {args.task}: success {rate:.2f}; csv {out}")
    return EXIT_OK


def cmd_rollout(args, cfg: RunConfig) -> int:
    from .deploy import LatencyConfig, PolicyPlanner, run_rollout, write_trace
    from .policy import load_policy_checkpoint

    model = load_policy_checkpoint(args.policy, unet_channels=cfg.policy.unet_channels)
    latency = LatencyConfig(inference_latency=cfg.deploy.inference_latency,
                            perception_latency=cfg.deploy.perception_latency,
                            control_period=cfg.deploy.control_period)
    trace = run_rollout(PolicyPlanner(model, seed=args.seed), args.task, latency,
                        seed=args.seed, max_ticks=cfg.deploy.max_ticks,
                        replan_interval=cfg.deploy.replan_interval, sim_cfg=cfg.simworld)
    out = Path(args.out or "trace.vtmn")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out)
    print(f"rollout on {args.task}: {len(trace)} ticks, {trace.termination}; trace {out}")
    return EXIT_OK


def cmd_plot(args, cfg: RunConfig) -> int:
    from .evalharness import ExperimentResult, plot_experiment, read_rows_csv

    rows = read_rows_csv(args.csv)
    if not rows:
        raise DataError(f"{args.csv} contains no trial rows")
    result = ExperimentResult(rows=rows)
    out_dir = Path(args.out or ".")
    tasks = sorted({r.task for r in rows})
    for task in tasks:
        path = plot_experiment(result, args.experiment, task, out_dir, x_label=args.x_label)
        print(f"plot written to {path}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="vtlab", description=__doc__)
    parser.add_argument("--config", default=None, help="YAML config file")
    parser.add_argument("--seed", type=int, default=0, help="root random seed")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate raw demonstration episodes")
    p.add_argument("--task", required=True, choices=["lift-place", "occluded-adjust"])
    p.add_argument("--episodes", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("sync", help="synchronize raw episodes onto the policy clock")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sync)

    p = sub.add_parser("stats", help="dataset statistics (raw/valid counts, lengths)")
    p.add_argument("--data", default=None)
    p.add_argument("--out", default=None, help="optional key/value output file")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("pretrain", help="contrastive pre-training of the tactile encoder")
    p.add_argument("--data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--steps", type=int, default=None)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("train", help="diffusion-policy behavior cloning")
    p.add_argument("--data", default=None)
    p.add_argument("--repr", required=True, help="repr checkpoint path")
    p.add_argument("--variant", required=True,
                   choices=["vision-only", "visuotactile-scratch",
                            "visuotactile-pretrained", "visuotactile-lowres"])
    p.add_argument("--task", default=None, help="restrict training to one task")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="paired-trial evaluation of a policy checkpoint")
    p.add_argument("--policy", required=True)
    p.add_argument("--task", required=True, choices=["lift-place", "occluded-adjust"])
    p.add_argument("--variant", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rollout", help="single latency-compensated rollout; writes a trace")
    p.add_argument("--policy", required=True)
    p.add_argument("--task", required=True, choices=["lift-place", "occluded-adjust"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("plot", help="emit plots from an experiment CSV")
    p.add_argument("--csv", required=True)
    p.add_argument("--experiment", default="experiment")
    p.add_argument("--x-label", default="fraction")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, FileNotFoundError) as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except VtlabError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
