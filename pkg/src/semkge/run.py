"""
Command entry point: filter, train, eval, grid and stats.

Every subcommand reads the same sectioned YAML config (``--config``), applies
``--preset`` and flag overrides, and writes fixed-name outputs plus the
effective ``config.yaml`` into the output directory.
"""

from __future__ import annotations

import argparse
import csv
import logging
from pathlib import Path
from typing import Any, NoReturn

from semkge.tools import runlog
from semkge.tools.buckets import bucket_summary, load_bucket_spec
from semkge.tools.checkpoint import load_checkpoint, save_checkpoint
from semkge.tools.config import RunConfig, build_run_config, load_config_file
from semkge.tools.errors import SemKgeError, checkpoint_mismatch, io_error, usage_error
from semkge.tools.evaluation import EvalReport, evaluate
from semkge.tools.ingest import filter_dataset, load_dataset, stats, write_dataset
from semkge.tools.trainer import GridResult, expand_grid, grid_search, train

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.yaml"
CHECKPOINT_FILE = "checkpoint.bin"
TRAIN_LOG_FILE = "train_log.jsonl"
EVAL_REPORT_FILE = "eval_report.json"
RANKS_FILE = "ranks.jsonl"
GRID_FILE = "grid.csv"
STATS_FILE = "stats.json"
FILTERED_DIR = "filtered"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise usage_error(message, f"Run `{self.prog} --help` for the accepted flags")


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _axis(text: str) -> tuple[str, list[str]]:
    name, sep, values = text.partition("=")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=v1,v2,..., got {text!r}")
    return name.strip(), [v.strip() for v in values.split(",") if v.strip()]


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="YAML run configuration")
    parser.add_argument("--preset", help="Chosen hyperparameters, e.g. transe/fb15k187")
    parser.add_argument("--data-dir", type=Path, help="Folder with train/valid/test and schema TSV files")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--threads", type=int, help="Evaluation worker threads")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")


def _training_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", help="transe | transh | distmult | complex | simple")
    parser.add_argument("--loss", help="phl | bcel | pll")
    parser.add_argument("--variant", help="vanilla | S | S'")
    parser.add_argument("--epsilon", type=float, help="Semantic factor")
    parser.add_argument("--gamma", type=float, help="PHL margin")
    parser.add_argument("--lr", type=float, help="Learning rate")
    parser.add_argument("--dim", type=int, help="Embedding dimension")
    parser.add_argument("--batch-size", type=int, help="Positives per batch")
    parser.add_argument("--epochs", type=int, help="Maximum number of epochs")
    parser.add_argument("--eval-every", type=int, help="Validate every N epochs (0 = never)")
    parser.add_argument("--regularizer", help="none | l1 | l2")
    parser.add_argument("--reg-weight", type=float, help="Regularization weight")


def _eval_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--split", help="Split to rank: train | valid | test")
    parser.add_argument("--mode", help="filtered | raw")
    parser.add_argument("--ks", type=_int_list, help="Cut-offs, e.g. 1,3,10")
    parser.add_argument("--ties", help="optimistic | pessimistic")
    parser.add_argument("--buckets", help="Bucket spec JSON file or shipped name")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semkge-run", description="Semantic-driven KGE losses: train and evaluate.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("filter", help="Apply the schema filter and write the filtered dataset")
    _common(p)
    p.add_argument("--min-candidates", type=int, help="Relations need more valid heads/tails than this")

    p = sub.add_parser("train", help="Train one configuration and keep the best checkpoint")
    _common(p)
    _training_flags(p)
    p.add_argument("--resume", type=Path, help="Continue from a checkpoint")
    p.add_argument("--mode", help="Validation ranking mode: filtered | raw")

    p = sub.add_parser("eval", help="Rank a split with a trained checkpoint")
    _common(p)
    _eval_flags(p)
    p.add_argument("--model", help="Expected model kind of the checkpoint")
    p.add_argument("--checkpoint", type=Path, help=f"Checkpoint (default: <out>/{CHECKPOINT_FILE})")
    p.add_argument("--dump-ranks", action="store_true", help=f"Also write <out>/{RANKS_FILE}")

    p = sub.add_parser("grid", help="Grid search ranked by validation MRR")
    _common(p)
    _training_flags(p)
    p.add_argument("--mode", help="Validation ranking mode: filtered | raw")
    p.add_argument("--axis", type=_axis, action="append", default=[], help="Grid axis, e.g. margin=1,2,3 (repeatable)")

    p = sub.add_parser("stats", help="Dataset sizes and relation buckets")
    _common(p)
    p.add_argument("--buckets", help="Bucket spec JSON file or shipped name")
    return parser


def _overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    def get(name: str) -> Any:
        return getattr(args, name, None)

    return {
        "data": {"dir": get("data_dir"), "min_candidates": get("min_candidates")},
        "train": {
            "model": get("model"),
            "batch_size": get("batch_size"),
            "dim": get("dim"),
            "lr": get("lr"),
            "regularizer": get("regularizer"),
            "reg_weight": get("reg_weight"),
            "max_epochs": get("epochs"),
            "seed": get("seed"),
            "eval_every": get("eval_every"),
            "threads": get("threads"),
        },
        "loss": {
            "family": get("loss"),
            "variant": get("variant"),
            "margin": get("gamma"),
            "epsilon": get("epsilon"),
        },
        "eval": {
            "split": get("split"),
            "mode": get("mode"),
            "ks": get("ks"),
            "ties": get("ties"),
            "buckets": get("buckets"),
        },
        "grid": dict(get("axis") or []),
        "output": {"dir": get("out")},
    }


def load_run_config(args: argparse.Namespace) -> tuple[RunConfig, dict[str, dict[str, Any]]]:
    """Effective config plus the raw file sections it was built from."""
    file_values = load_config_file(args.config) if args.config else {}
    return build_run_config(file_values, preset=args.preset, overrides=_overrides(args)), file_values


def _format_report(report: EvalReport) -> str:
    ks = report.ks
    header = f"{'':<12}{'queries':>9}{'MRR':>8}" + "".join(f"{'H@' + str(k):>8}" for k in ks) + "".join(
        f"{'Sem@' + str(k):>9}" for k in ks
    )
    lines = [f"{report.split} ({report.mode})", header]
    rows = [("overall", report.overall), *report.by_side.items(), *report.by_bucket.items()]
    for name, block in rows:
        if not block.num_queries:
            continue
        lines.append(
            f"{name:<12}{block.num_queries:>9}{block.mrr:>8.4f}"
            + "".join(f"{block.hits[k]:>8.4f}" for k in ks)
            + "".join(f"{block.sem[k]:>9.4f}" for k in ks)
        )
    return "\n".join(lines)


def cmd_filter(cfg: RunConfig) -> int:
    paths = cfg.data_paths()
    min_candidates = cfg.section("data")["min_candidates"]
    kg = load_dataset(paths)
    filtered = filter_dataset(kg, min_candidates=min_candidates)
    out = cfg.output_dir / FILTERED_DIR
    write_dataset(filtered, out)
    runlog.write_report(
        out / STATS_FILE,
        {"input": stats(kg).to_json(), "filtered": stats(filtered).to_json(), "min_candidates": min_candidates},
    )
    cfg.write(cfg.output_dir / CONFIG_FILE)
    print(stats(kg).format_table("input"))
    print(stats(filtered).format_table("filtered"))
    print(f"Wrote filtered dataset to {out}")
    return 0


def cmd_train(cfg: RunConfig, resume_path: Path | None) -> int:
    tcfg = cfg.train_config()
    paths = cfg.data_paths()
    resume = load_checkpoint(resume_path, expect_kind=tcfg.model) if resume_path else None
    kg = load_dataset(paths)
    out = cfg.output_dir
    cfg.write(out / CONFIG_FILE)
    ckpt = train(tcfg, kg, log_path=out / TRAIN_LOG_FILE, resume=resume)
    save_checkpoint(ckpt, out / CHECKPOINT_FILE)
    best = ckpt.best_record() or {}
    mrr = best.get("val_mrr")
    suffix = f", validation MRR {mrr:.4f}" if mrr is not None else ""
    print(f"Best checkpoint: epoch {ckpt.epoch}{suffix} -> {out / CHECKPOINT_FILE}")
    return 0


def cmd_eval(cfg: RunConfig, checkpoint_path: Path | None, dump_ranks: bool, expect_kind: str | None = None) -> int:
    paths = cfg.data_paths()
    settings = cfg.section("eval")
    ks = cfg.ks()
    bucket_spec = load_bucket_spec(settings["buckets"]) if settings["buckets"] is not None else None
    out = cfg.output_dir
    checkpoint_path = checkpoint_path or out / CHECKPOINT_FILE
    ckpt = load_checkpoint(checkpoint_path, expect_kind=expect_kind)
    kg = load_dataset(paths)
    if (ckpt.params.num_entities, ckpt.params.num_relations) != (kg.num_entities, kg.num_relations):
        raise checkpoint_mismatch(
            f"{checkpoint_path} has |E|={ckpt.params.num_entities}, |R|={ckpt.params.num_relations}; "
            f"dataset has |E|={kg.num_entities}, |R|={kg.num_relations}"
        )
    report = evaluate(
        ckpt.params,
        kg,
        settings["split"],
        settings["mode"],
        bucket_spec,
        ks=ks,
        ties=settings["ties"],
        threads=cfg.section("train")["threads"],
    )
    cfg.write(out / CONFIG_FILE)
    runlog.write_report(out / EVAL_REPORT_FILE, report.to_json())
    if dump_ranks:
        runlog.write_ranks(out / RANKS_FILE, report.results)
    print(_format_report(report))
    print(f"Wrote {out / EVAL_REPORT_FILE}")
    return 0


GRID_COLUMNS = (
    "rank", "config_hash", "model", "loss", "batch_size", "dim", "lr", "regularizer",
    "reg_weight", "margin", "epsilon", "val_mrr", "val_sem10", "error",
)


def _grid_row(rank: int, result: GridResult) -> dict[str, Any]:
    cfg = result.config
    return {
        "rank": rank,
        "config_hash": result.config_hash,
        "model": cfg.model,
        "loss": cfg.loss.name,
        "batch_size": cfg.batch_size,
        "dim": cfg.dim,
        "lr": cfg.lr,
        "regularizer": cfg.regularizer,
        "reg_weight": cfg.reg_weight,
        "margin": cfg.loss.margin,
        "epsilon": "" if cfg.loss.epsilon is None else cfg.loss.epsilon,
        "val_mrr": "" if result.val_mrr is None else repr(result.val_mrr),
        "val_sem10": "" if result.val_sem10 is None else repr(result.val_sem10),
        "error": result.error or "",
    }


def cmd_grid(cfg: RunConfig) -> int:
    grid = expand_grid(cfg.train_config(), cfg.section("grid"))
    paths = cfg.data_paths()
    kg = load_dataset(paths)
    out = cfg.output_dir
    cfg.write(out / CONFIG_FILE)
    results = grid_search(grid, kg)
    path = out / GRID_FILE
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=GRID_COLUMNS)
            writer.writeheader()
            for rank, result in enumerate(results, start=1):
                writer.writerow(_grid_row(rank, result))
    except OSError as e:
        raise io_error(str(path), str(e)) from e
    for rank, result in enumerate(results, start=1):
        score = "failed" if result.val_mrr is None else f"MRR {result.val_mrr:.4f}"
        print(f"{rank:>3}. {result.config_hash} {result.config.loss.name:<8} {score}")
    print(f"Wrote {path}")
    return 0 if any(r.error is None for r in results) else 2


def cmd_stats(cfg: RunConfig) -> int:
    paths = cfg.data_paths()
    buckets = cfg.section("eval")["buckets"]
    bucket_spec = load_bucket_spec(buckets) if buckets is not None else None
    kg = load_dataset(paths)
    st = stats(kg)
    report: dict[str, Any] = st.to_json()
    print(st.format_table(paths.train.parent.name or "dataset"))
    if bucket_spec is not None:
        summary = bucket_summary(kg, bucket_spec)
        report["buckets"] = summary
        for bucket, sides in summary.items():
            cells = ", ".join(
                f"{side} {v['relations']} [{v['min']}, {v['max']}]" if v["relations"] else f"{side} 0"
                for side, v in sides.items()
            )
            print(f"{bucket:<12}{cells}")
    runlog.write_report(cfg.output_dir / STATS_FILE, report)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s: %(message)s",
        )
        cfg, file_values = load_run_config(args)
        if args.command == "filter":
            return cmd_filter(cfg)
        if args.command == "train":
            return cmd_train(cfg, args.resume)
        if args.command == "eval":
            expect_kind = args.model or file_values.get("train", {}).get("model")
            return cmd_eval(cfg, args.checkpoint, args.dump_ranks, expect_kind)
        if args.command == "grid":
            return cmd_grid(cfg)
        return cmd_stats(cfg)
    except SemKgeError as e:
        print(e.format())
        return e.code


if __name__ == "__main__":
    raise SystemExit(main())
