"""Command line entry point: train, eval, inspect, baseline and generate.

Configuration precedence is defaults < checkpoint config < ``--config`` file
< explicit flags. Exit codes: 0 success, 2 config error, 3 data error,
4 checkpoint error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from hisres.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from hisres.config import RunConfig, read_config_file
from hisres.context import Timer
from hisres.data import DatasetBundle, load_dataset
from hisres.errors import CheckpointError, ConfigError, DataError
from hisres.evaluation import MetricsReport, validate_report
from hisres.fusion import export_gate_weights, write_gate_csv
from hisres.graphs import window_graphs
from hisres.model import PHASES, HisRES, phase_triples
from hisres.numerics.tensor import no_grad
from hisres.relevance import dump_attention, write_attention_csv
from hisres.synthetic import PATTERNS, GeneratorSpec, generate
from hisres.training import build_index, evaluate, evaluate_baseline, model_from_checkpoint, train

log = logging.getLogger("hisres")

EXIT_CONFIG, EXIT_DATA, EXIT_CHECKPOINT = 2, 3, 4
INSPECT_TARGETS = ("gates", "attention", "timings", "graph")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; explicit flags override it")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.type in ("bool", bool):
            p.add_argument(flag, dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        else:
            p.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper())
    p.add_argument("--report-dir", help="directory for CSV dumps and PNG figures")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hisres", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    _add_config_flags(p)
    p.add_argument("--resume", help="continue from this checkpoint")
    p.add_argument("--eval-split", choices=("valid", "test"), default="test",
                   help="split evaluated after training when --metrics-out is given")

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    _add_config_flags(p)
    p.add_argument("--split", choices=("valid", "test"), default="test")
    p.add_argument("--noise-seed", type=int, default=0)

    p = sub.add_parser("baseline", help="historical-frequency baseline, no checkpoint needed")
    _add_config_flags(p)
    p.add_argument("--split", choices=("valid", "test"), default="test")

    p = sub.add_parser("inspect", help="dump gates, attention, timings or graphs")
    _add_config_flags(p)
    p.add_argument("what", help="one of: " + ", ".join(INSPECT_TARGETS))
    p.add_argument("--split", choices=("train", "valid", "test"), default="test")
    p.add_argument("--time", type=int, help="timestamp to inspect (default: first of --split)")

    p = sub.add_parser("generate", help="write a synthetic dataset")
    p.add_argument("out")
    p.add_argument("--pattern", choices=PATTERNS, default="periodic")
    for f in dataclasses.fields(GeneratorSpec):
        if f.name in ("pattern", "facts", "split"):
            continue
        kind = {"int": int, "float": float}.get(str(f.type))
        flag = "--" + f.name.replace("_", "-")
        if str(f.type) == "bool":
            p.add_argument(flag, dest=f.name, action="store_true")
        else:
            p.add_argument(flag, dest=f.name, type=kind, default=f.default)
    p.add_argument("--split", type=float, nargs=3, default=(0.8, 0.1, 0.1), metavar=("TRAIN", "VALID", "TEST"))
    return parser


def resolve_config(args: argparse.Namespace, base: Optional[RunConfig] = None) -> RunConfig:
    values = (base or RunConfig()).to_dict()
    if getattr(args, "config", None):
        values.update({k.replace("-", "_"): v for k, v in read_config_file(args.config).items()})
    values.update({f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
                   if getattr(args, f.name, None) is not None})
    return RunConfig.from_dict(values).validate()


def _bundle(cfg: RunConfig) -> DatasetBundle:
    if not cfg.dataset_dir:
        raise ConfigError("--dataset-dir is required")
    gran = cfg.granularity if cfg.granularity == "auto" else int(cfg.granularity)
    return load_dataset(cfg.dataset_dir, granularity=gran)


def _checkpoint(args, required: bool = True) -> Optional[Checkpoint]:
    """Load the checkpoint named by --checkpoint or the --config file."""
    path = resolve_config(args).checkpoint
    if not path:
        if required:
            raise ConfigError("--checkpoint is required")
        return None
    return load_checkpoint(path)


def _report_dir(args) -> Optional[Path]:
    if not args.report_dir:
        return None
    out = Path(args.report_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_metrics(report: MetricsReport, cfg: RunConfig, report_dir: Optional[Path], stem: str) -> None:
    validate_report(report.to_dict())
    text = report.to_json(cfg.metrics_out)
    print(text)
    if report_dir is not None:
        from hisres import plotting

        with (report_dir / f"{stem}_per_timestamp.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "mrr", "hits1", "hits3", "hits10", "num_queries"])
            for row in report.per_timestamp:
                w.writerow([row[k] for k in ("time", "mrr", "hits1", "hits3", "hits10", "num_queries")])
        (report_dir / f"{stem}_metrics.json").write_text(text + "\n")
        plotting.plot_per_timestamp(report.per_timestamp, report_dir / f"{stem}_per_timestamp.png", stem)


def cmd_train(args) -> int:
    resume = load_checkpoint(args.resume) if args.resume else None
    cfg = resolve_config(args, resume.config if resume else None)
    bundle = _bundle(cfg)
    report_dir = _report_dir(args)
    result = train(cfg, bundle, resume=resume,
                   on_epoch=lambda e, loss: print(f"epoch {e} loss {loss:.6f}", flush=True))
    if cfg.checkpoint:
        save_checkpoint(result.checkpoint(), cfg.checkpoint)
        log.info("checkpoint written to %s", cfg.checkpoint)
    if report_dir is not None:
        from hisres import plotting

        with (report_dir / "losses.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss"])
            w.writerows(enumerate(result.losses))
        if result.losses:
            plotting.plot_losses(result.losses, report_dir / "losses.png")
    if cfg.metrics_out or report_dir is not None:
        _write_metrics(evaluate(result.model, bundle, args.eval_split), cfg, report_dir, args.eval_split)
    return 0


def cmd_eval(args) -> int:
    ckpt = _checkpoint(args)
    cfg = resolve_config(args, ckpt.config)
    bundle = _bundle(cfg)
    _check_shape(ckpt, bundle)
    model = model_from_checkpoint(ckpt)
    report = evaluate(model, bundle, args.split, noise_std=cfg.noise_std, noise_seed=args.noise_seed)
    _write_metrics(report, cfg, _report_dir(args), args.split)
    return 0


def cmd_baseline(args) -> int:
    cfg = resolve_config(args)
    _write_metrics(evaluate_baseline(_bundle(cfg), args.split), cfg, _report_dir(args), f"baseline_{args.split}")
    return 0


def _check_shape(ckpt: Checkpoint, bundle: DatasetBundle) -> None:
    if (ckpt.num_entities, ckpt.num_relations) != (bundle.num_entities, bundle.num_relations):
        raise CheckpointError(f"checkpoint was trained on {ckpt.num_entities} entities / {ckpt.num_relations} "
                              f"relations, dataset has {bundle.num_entities} / {bundle.num_relations}")


def _inspect_time(args, bundle: DatasetBundle) -> int:
    if args.time is not None:
        return args.time
    snaps = [s for s in bundle.split(args.split) if len(s)]
    if not snaps:
        raise DataError(f"split {args.split!r} has no facts")
    return snaps[0].time


def cmd_inspect(args) -> int:
    if args.what not in INSPECT_TARGETS:
        raise ConfigError(f"unknown inspect target {args.what!r}; choose from {', '.join(INSPECT_TARGETS)}")
    ckpt = _checkpoint(args, required=args.what in ("gates", "attention"))
    cfg = resolve_config(args, ckpt.config if ckpt else None)
    bundle = _bundle(cfg)
    if ckpt is not None:
        _check_shape(ckpt, bundle)
        model = model_from_checkpoint(ckpt)
    else:
        model = HisRES(bundle.num_entities, bundle.num_relations, cfg)
    out = _report_dir(args) or Path(".")
    from hisres import plotting

    if args.what == "timings":
        rows = _timings(model, bundle)
        with (out / "timings.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["module", "phase", "seconds"])
            for m, p, s in sorted(rows):
                w.writerow([m, p, f"{s:.6f}"])
        plotting.plot_timings(rows, out / "timings.png")
        print(f"wrote {out / 'timings.csv'}")
        return 0

    t = _inspect_time(args, bundle)
    timeline = bundle.timeline()
    if not 0 <= t < len(timeline):
        raise DataError(f"timestamp {t} outside the dataset")
    queries = phase_triples(timeline[t], "raw", bundle.num_relations)
    index = build_index(bundle)
    if args.what == "graph":
        history = model.history(timeline, t)
        with (out / f"windows_t{t}.tsv").open("w") as fh:
            fh.write("start\tend\tsubject\trelation\tobject\n")
            for win in window_graphs(history, cfg.omega, bundle.num_relations, strict=False) if history else []:
                for s, r, o in win.triples.tolist():
                    fh.write(f"{win.start}\t{win.end}\t{s}\t{r}\t{o}\n")
        graph = index.build(np.unique(queries[:, :2], axis=0), t)
        with (out / f"global_t{t}.tsv").open("w") as fh:
            fh.write("subject\trelation\tobject\n")
            for s, r, o in graph.triples.tolist():
                fh.write(f"{s}\t{r}\t{o}\n")
        print(f"t={t}: {len(history)} history snapshots, global graph with {len(graph)} edges "
              f"for {len(graph.query_pairs)} query pairs")
        return 0

    with no_grad():
        ctx = model.context(training=False)
        enc = model.encode(timeline, t, queries, index if cfg.use_global else None, ctx)
    if args.what == "gates":
        means = {}
        if enc.inter is not None:
            means["recent"] = export_gate_weights(model.params.gate_recent, enc.intra)
            write_gate_csv(out / f"gates_recent_t{t}.csv", means["recent"])
        if enc.global_ is not None:
            means["global"] = export_gate_weights(model.params.gate_global, enc.global_)
            write_gate_csv(out / f"gates_global_t{t}.csv", means["global"])
        if not means:
            raise ConfigError("this model has no self-gates (inter and global encoders disabled)")
        plotting.plot_gate_histogram(means, out / f"gates_t{t}.png")
        for name, values in means.items():
            print(f"{name}: mean gate {float(np.mean(values)):.4f} over {len(values)} entities")
        return 0

    # attention
    if enc.graph is None:
        raise ConfigError("this model has no relevance encoder (use_global is off)")
    records = dump_attention(enc.graph, enc.recent, enc.relations, model.params.convgat)
    write_attention_csv(out / f"attention_t{t}.csv", records)
    plotting.plot_attention(records, out / f"attention_t{t}.png")
    print(f"t={t}: attention over {len(enc.graph)} edges into {len(records)} objects")
    return 0


def _timings(model: HisRES, bundle: DatasetBundle) -> list[tuple[str, str, float]]:
    """One training pass (without parameter updates) and one inference pass over the test split."""
    timer = Timer()
    timeline = bundle.timeline()
    index = build_index(bundle) if model.config.use_global else None
    for snap in bundle.train:
        if not len(snap):
            continue
        for phase in PHASES:
            ctx = model.context(training=True, timer=timer, phase="training")
            loss = model.loss(timeline, snap.time, phase_triples(snap, phase, model.num_relations), index, ctx)
            with timer.section("backward", "training"):
                loss.backward()
            model.zero_grad()
    evaluate(model, bundle, "test", timer=timer)
    return timer.rows()


def cmd_generate(args) -> int:
    fields = {f.name for f in dataclasses.fields(GeneratorSpec)}
    kwargs = {k: v for k, v in vars(args).items() if k in fields and k != "split"}
    spec = GeneratorSpec(**kwargs, split=tuple(args.split))
    out = generate(spec).write(args.out)
    print(f"wrote {out}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "baseline": cmd_baseline, "inspect": cmd_inspect,
            "generate": cmd_generate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT


if __name__ == "__main__":
    sys.exit(main())
