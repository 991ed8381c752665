"""Command line entry point: ``tracklet-reid <subcommand> ...``.

Every run writes a JSON manifest next to its outputs. If a run fails, the
outputs it already wrote are removed, so no output is left without a manifest.
Option precedence: command-line flags > ``--config`` JSON file > defaults.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path
from typing import Optional

from . import bench, metrics, motio, reid, synth
from .trackers import (
    EVAL_SORT_CONFIG,
    OracleTracker,
    ReidConfig,
    ReidTracker,
    SortConfig,
    SortTracker,
    run_tracker,
)

log = logging.getLogger("tracklet_reid")

EMBEDDERS = ("model", "random", "generic", "supervised", "oracle")


class CliError(Exception):
    pass


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


class Run:
    """Tracks written outputs; writes the manifest on success, cleans up on failure."""

    def __init__(self, command: str, settings: dict, manifest_path: Path):
        self.command = command
        self.settings = settings
        self.manifest_path = manifest_path
        self.outputs: list[Path] = []
        self.start = time.perf_counter()

    def write_text(self, path: Path, text: str) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
        self.outputs.append(path)
        return path

    def record(self, path: Path) -> Path:
        self.outputs.append(path)
        return path

    def finish(self) -> None:
        for p in self.outputs:
            if not p.exists():
                raise CliError(f"declared output {p} was not written")
        manifest = {
            "command": self.command,
            "config": self.settings,
            "seed": self.settings.get("seed"),
            "inputs": self.settings.get("inputs", []),
            "outputs": [str(p) for p in self.outputs],
            "version": _version(),
            "duration_seconds": round(time.perf_counter() - self.start, 3),
        }
        self.manifest_path.parent.mkdir(parents=True, exist_ok=True)
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")

    def abort(self) -> None:
        for p in reversed(self.outputs):
            if p.is_file():
                p.unlink()


def _merge(args: argparse.Namespace, defaults: dict) -> dict:
    settings = dict(defaults)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config {args.config}: {exc}") from exc
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise CliError(f"unknown config keys: {sorted(unknown)}")
        settings.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _sequence_dirs(paths) -> list[Path]:
    """Expand each path to sequence directories (those holding ``det/det.txt``)."""
    out = []
    for p in map(Path, paths):
        if (p / "det" / "det.txt").is_file():
            out.append(p)
            continue
        subs = sorted(q for q in p.iterdir() if (q / "det" / "det.txt").is_file()) if p.is_dir() else []
        if not subs:
            raise CliError(f"{p}: no sequence directories found")
        out.extend(subs)
    return out


def _sort_config(s: dict, max_age: int) -> SortConfig:
    return SortConfig(
        iou_infeasible_above=s["iou_infeasible_above"],
        max_age=s["max_age"] if s["max_age"] is not None else max_age,
        min_hits=s["min_hits"],
        confidence_min=s["confidence_min"],
        emit_raw_boxes=s["emit_raw_boxes"],
    )


# ---------------------------------------------------------------- simulate


def _simulate_one(args):
    config, out_dir = args
    scenario = synth.generate(config)
    path = motio.write_sequence(scenario.bundle, Path(out_dir) / scenario.bundle.name)
    return str(path)


def cmd_simulate(args) -> None:
    s = _merge(args, {"preset": "crowded", "seed": 0, "count": 1, "out": None, "jobs": bench.default_jobs()})
    if s["out"] is None:
        raise CliError("--out is required")
    out = Path(s["out"])
    configs = [synth.preset(s["preset"], seed=s["seed"] + i) for i in range(s["count"])]
    run = Run("simulate", s, out / "manifest.json")
    try:
        for path in bench.map_jobs(_simulate_one, [(c, str(out)) for c in configs], s["jobs"]):
            for f in ("seqinfo.ini", "det/det.txt", "det/features.txt", "gt/gt.txt"):
                if (Path(path) / f).exists():
                    run.record(Path(path) / f)
            print(path)
        run.finish()
    except BaseException:
        run.abort()
        raise


# ---------------------------------------------------------------- labels / training


def _label_sequence(args):
    path, sort_config, min_len, from_gt = args
    bundle = motio.read_sequence(path)
    if from_gt:
        return reid.labels_from_ground_truth([bundle], min_len)
    return reid.generate_labels([bundle], sort_config, min_len)


def cmd_gen_labels(args) -> None:
    s = _merge(
        args,
        {
            "inputs": None, "out": None, "from_gt": False, "min_tracklet_length": 2,
            "iou_infeasible_above": 0.7, "max_age": 1, "min_hits": 3, "confidence_min": 0.0,
            "emit_raw_boxes": False, "jobs": bench.default_jobs(),
        },
    )
    if not s["inputs"] or not s["out"]:
        raise CliError("--in and --out are required")
    dirs = _sequence_dirs(s["inputs"])
    s["inputs"] = [str(d) for d in dirs]
    names = [motio.read_seqinfo((d / "seqinfo.ini").read_text()).get("name", d.name)
             if (d / "seqinfo.ini").is_file() else d.name for d in dirs]
    if len(set(names)) != len(names):
        raise CliError("sequence names must be unique to serve as video ids")
    sort_config = _sort_config(s, 1)
    per_seq = bench.map_jobs(
        _label_sequence, [(str(d), sort_config, s["min_tracklet_length"], s["from_gt"]) for d in dirs], s["jobs"]
    )
    # each sequence was labeled from 0; shift to one global contiguous range
    records, offset = [], 0
    for recs in per_seq:
        records.extend(dataclasses.replace(r, label=r.label + offset) for r in recs)
        offset += len({r.label for r in recs})
    out = Path(s["out"])
    run = Run("gen-labels", s, out.with_name(out.name + ".manifest.json"))
    try:
        run.write_text(out, motio.write_labels(records))
        motio.read_labels(out.read_text())
        print(f"{len(records)} records, {offset} labels from {len(dirs)} sequences")
        run.finish()
    except BaseException:
        run.abort()
        raise


def cmd_train_reid(args) -> None:
    defaults = {f.name: f.default for f in dataclasses.fields(reid.TrainConfig)}
    s = _merge(args, {"labels": None, "out": None, **defaults})
    if not s["labels"] or not s["out"]:
        raise CliError("--labels and --out are required")
    records = motio.read_labels(Path(s["labels"]).read_text())
    s["inputs"] = [s["labels"]]
    config = reid.TrainConfig(**{k: s[k] for k in defaults})
    result = reid.train(records, config)
    for epoch, loss in enumerate(result.epoch_losses, start=1):
        print(f"epoch {epoch:3d} loss {loss:.6f}")
    print(f"train accuracy {result.train_accuracy:.4f}")
    out = Path(s["out"])
    run = Run("train-reid", s, out.with_name(out.name + ".manifest.json"))
    try:
        out.parent.mkdir(parents=True, exist_ok=True)
        reid.save_model(result.model, out)
        run.record(out)
        reid.load_model(out)
        run.finish()
    except BaseException:
        run.abort()
        raise


# ---------------------------------------------------------------- tracking


def _make_embedder(kind: str, model_path: Optional[str], input_dim: int, seed: int):
    if kind in ("model", "supervised"):
        if not model_path:
            raise CliError(f"--embedder {kind} needs --model")
        return reid.ModelEmbedder(reid.load_model(model_path))
    if kind == "random":
        return reid.RandomEmbedder(seed=seed)
    if kind == "generic":
        return reid.GenericProjectionEmbedder(input_dim, seed=seed)
    if kind == "oracle":
        return reid.OracleEmbedder()
    raise CliError(f"unknown embedder {kind!r}")


def _track_one(args):
    path, s = args
    bundle = motio.read_sequence(path)
    tracker_kind = s["tracker"]
    if tracker_kind == "sort":
        out = run_tracker(SortTracker(_sort_config(s, EVAL_SORT_CONFIG.max_age)), bundle)
    elif tracker_kind == "oracle":
        out = run_tracker(OracleTracker(_sort_config(s, EVAL_SORT_CONFIG.max_age)), bundle)
    else:
        if not bundle.has_features and s["embedder"] in ("model", "supervised", "generic"):
            raise CliError(f"{path}: detections lack appearance features (det/features.txt)")
        dim = len(bundle.detections[0].feature) if bundle.has_features else 1
        embedder = _make_embedder(s["embedder"], s["model"], dim, s["seed"])
        config = ReidConfig(
            appearance_infeasible_above=s["appearance_infeasible_above"],
            max_age=s["max_age"] if s["max_age"] is not None else ReidConfig.max_age,
            min_hits=s["min_hits"],
            confidence_min=s["confidence_min"],
            emit_raw_boxes=s["emit_raw_boxes"],
        )
        out = run_tracker(ReidTracker(config), reid.apply_embedder(bundle, embedder))
    return bundle.name, motio.write_results(out.results)


def cmd_track(args) -> None:
    s = _merge(
        args,
        {
            "inputs": None, "out": None, "tracker": "reid", "embedder": "model", "model": None,
            "seed": 0, "iou_infeasible_above": 0.7, "max_age": None, "min_hits": 3,
            "confidence_min": 0.0, "emit_raw_boxes": False,
            "appearance_infeasible_above": ReidConfig.appearance_infeasible_above,
            "jobs": bench.default_jobs(),
        },
    )
    if not s["inputs"] or not s["out"]:
        raise CliError("--in and --out are required")
    if s["tracker"] not in ("sort", "reid", "oracle"):
        raise CliError(f"unknown tracker {s['tracker']!r}")
    if s["embedder"] not in EMBEDDERS:
        raise CliError(f"unknown embedder {s['embedder']!r}")
    dirs = _sequence_dirs(s["inputs"])
    s["inputs"] = [str(d) for d in dirs]
    results = bench.map_jobs(_track_one, [(str(d), s) for d in dirs], s["jobs"])
    out = Path(s["out"])
    single = len(dirs) == 1 and out.suffix == ".txt"
    manifest = out.with_name(out.name + ".manifest.json") if single else out / "manifest.json"
    run = Run("track", s, manifest)
    try:
        for name, text in results:
            path = out if single else out / f"{name}.txt"
            run.write_text(path, text)
            motio.parse_results(path.read_text())
            print(path)
        run.finish()
    except BaseException:
        run.abort()
        raise


# ---------------------------------------------------------------- evaluation


def cmd_eval(args) -> None:
    s = _merge(args, {"gt": None, "results": None, "out": None, "iou_min": 0.5})
    if not s["gt"] or not s["results"]:
        raise CliError("--gt and --results are required")
    dirs = _sequence_dirs(s["gt"])
    res_path = Path(s["results"])
    s["inputs"] = [str(d) for d in dirs] + [str(res_path)]
    rows, total = {}, metrics.Counts()
    for d in dirs:
        bundle = motio.read_sequence(d)
        if bundle.ground_truth is None:
            raise CliError(f"{d}: no gt/gt.txt")
        rfile = res_path if res_path.is_file() else res_path / f"{bundle.name}.txt"
        if not rfile.is_file():
            raise CliError(f"missing results file {rfile}")
        if res_path.is_file() and len(dirs) > 1:
            raise CliError("a single results file needs a single ground-truth sequence")
        counts = metrics.sequence_counts(bundle.ground_truth, motio.parse_results(rfile.read_text()), s["iou_min"])
        rows[bundle.name] = metrics.EvalReport.from_counts(counts)
        total = total + counts
    rows["OVERALL"] = metrics.EvalReport.from_counts(total)
    table = metrics.format_report(rows)
    sys.stdout.write(table)
    if s["out"]:
        out = Path(s["out"])
        run = Run("eval", s, out.with_name(out.name + ".manifest.json"))
        try:
            run.write_text(out, table)
            run.finish()
        except BaseException:
            run.abort()
            raise


def cmd_bench(args) -> None:
    s = _merge(
        args,
        {"preset": "crowded", "seeds": 10, "train_sequences": 6, "epochs": 30, "seed": 0,
         "out": None, "jobs": bench.default_jobs()},
    )
    config = bench.BenchConfig(
        preset=s["preset"],
        seeds=s["seeds"],
        train_sequences=s["train_sequences"],
        train=reid.TrainConfig(epochs=s["epochs"], seed=s["seed"]),
        embedding_seed=s["seed"],
        jobs=s["jobs"],
    )
    result = bench.run_bench(config)
    sys.stdout.write(result.table())
    if s["out"]:
        out = Path(s["out"])
        run = Run("bench", s, out.with_name(out.name + ".manifest.json"))
        try:
            run.write_text(out, result.csv())
            run.finish()
        except BaseException:
            run.abort()
            raise


# ---------------------------------------------------------------- parser


def _add_sort_flags(p) -> None:
    p.add_argument("--iou-infeasible-above", dest="iou_infeasible_above", type=float)
    p.add_argument("--max-age", dest="max_age", type=int)
    p.add_argument("--min-hits", dest="min_hits", type=int)
    p.add_argument("--confidence-min", dest="confidence_min", type=float)
    p.add_argument("--emit-raw-boxes", dest="emit_raw_boxes", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tracklet-reid", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="JSON file with option values")
        p.set_defaults(func=fn)
        return p

    def jobs(p):
        p.add_argument("--jobs", type=int, help="parallel workers (default: $TRACKLET_REID_JOBS or 1)")

    p = add("simulate", cmd_simulate, "write synthetic sequences")
    p.add_argument("--preset", choices=sorted(synth.PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--out")
    jobs(p)

    p = add("gen-labels", cmd_gen_labels, "pseudo-label tracklets of unlabeled sequences")
    p.add_argument("--in", dest="inputs", nargs="+")
    p.add_argument("--out")
    p.add_argument("--from-gt", dest="from_gt", action="store_const", const=True,
                   help="label by ground-truth identity instead (supervised baseline)")
    p.add_argument("--min-tracklet-length", dest="min_tracklet_length", type=int)
    _add_sort_flags(p)
    jobs(p)

    p = add("train-reid", cmd_train_reid, "train the embedding model on a label file")
    p.add_argument("--labels")
    p.add_argument("--out")
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)

    p = add("track", cmd_track, "run a tracker over sequences")
    p.add_argument("--tracker", choices=("sort", "reid", "oracle"))
    p.add_argument("--embedder", choices=EMBEDDERS)
    p.add_argument("--model")
    p.add_argument("--in", dest="inputs", nargs="+")
    p.add_argument("--out", help="results file (one sequence) or directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--appearance-infeasible-above", dest="appearance_infeasible_above", type=float)
    _add_sort_flags(p)
    jobs(p)

    p = add("eval", cmd_eval, "score results against ground truth")
    p.add_argument("--gt", nargs="+")
    p.add_argument("--results")
    p.add_argument("--out")
    p.add_argument("--iou-min", dest="iou_min", type=float)

    p = add("bench", cmd_bench, "run the ReID ablation ladder on simulated data")
    p.add_argument("--preset", choices=sorted(synth.PRESETS))
    p.add_argument("--seeds", type=int)
    p.add_argument("--train-sequences", dest="train_sequences", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    jobs(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"tracklet-reid {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
