"""Ablation ladder: the same tracker with progressively better appearance models.

Rows, in order: None (motion-only SORT), Random, Generic, Ours (pseudo-label
training), Supervised (ground-truth identity training), Oracle (identity
revealing embeddings). Models are trained on a separate pool of training
sequences; evaluation sequences are never seen in training.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics, reid, synth
from .trackers import EVAL_SORT_CONFIG, ReidConfig, ReidTracker, SortConfig, SortTracker, run_tracker

LADDER = ("None", "Random", "Generic", "Ours", "Supervised", "Oracle")
TRAIN_SEED_OFFSET = 1000


@dataclass(frozen=True)
class BenchConfig:
    preset: str = "crowded"
    seeds: int = 10
    train_sequences: int = 6
    train: reid.TrainConfig = field(default_factory=reid.TrainConfig)
    label_sort: SortConfig = field(default_factory=SortConfig)
    eval_sort: SortConfig = EVAL_SORT_CONFIG
    reid: ReidConfig = field(default_factory=ReidConfig)
    embedding_seed: int = 0
    jobs: int = 1


@dataclass
class RowSummary:
    name: str
    report: metrics.EvalReport
    per_seed: list

    def stderr(self, attr: str) -> float:
        vals = np.array([getattr(r, attr) for r in self.per_seed], dtype=np.float64)
        if len(vals) < 2:
            return 0.0
        return float(vals.std(ddof=1) / math.sqrt(len(vals)))

    def mean(self, attr: str) -> float:
        return float(np.mean([getattr(r, attr) for r in self.per_seed]))


@dataclass
class BenchResult:
    rows: dict
    train_label_count: int
    train_accuracy: float
    epoch_losses: list

    def idf1(self, name: str) -> float:
        return 100.0 * self.rows[name].report.idf1

    def table(self) -> str:
        head = f"{'ReID':<11}{'MOTA':>15}{'IDF1':>15}{'IDSW':>7}{'FP':>7}{'FN':>7}"
        lines = [head, "-" * len(head)]
        for name in LADDER:
            row = self.rows[name]
            r = row.report
            mota = f"{100 * r.mota:.1f} ± {100 * row.stderr('mota'):.1f}"
            idf1 = f"{100 * r.idf1:.1f} ± {100 * row.stderr('idf1'):.1f}"
            lines.append(
                f"{name:<11}{mota:>15}{idf1:>15}{r.id_switches:>7}{r.false_positives:>7}{r.false_negatives:>7}"
            )
        gap = self.idf1("Oracle") - self.idf1("Ours")
        lines.append(f"IDF1 gap Ours -> Oracle: {gap:.1f}")
        return "\n".join(lines) + "\n"

    def csv(self) -> str:
        lines = ["reid,MOTA,MOTA_stderr,IDF1,IDF1_stderr,IDP,IDR,FP,FN,IDSW"]
        for name in LADDER:
            row, r = self.rows[name], self.rows[name].report
            lines.append(
                f"{name},{r.mota:.4f},{row.stderr('mota'):.4f},{r.idf1:.4f},{row.stderr('idf1'):.4f},"
                f"{r.idp:.4f},{r.idr:.4f},{r.false_positives},{r.false_negatives},{r.id_switches}"
            )
        return "\n".join(lines) + "\n"


def _evaluate_seed(args):
    config, seed, embedders = args
    bundle = synth.generate(synth.preset(config.preset, seed=seed)).bundle
    counts = {}
    out = run_tracker(SortTracker(config.eval_sort), bundle)
    counts["None"] = metrics.sequence_counts(bundle.ground_truth, out.results)
    for name in LADDER[1:]:
        embedded = reid.apply_embedder(bundle, embedders[name])
        out = run_tracker(ReidTracker(config.reid), embedded)
        counts[name] = metrics.sequence_counts(bundle.ground_truth, out.results)
    return counts


def map_jobs(fn, items, jobs: int):
    """Ordered map, in-process for one job, else over a process pool."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def train_models(config: BenchConfig):
    train_cfg = [synth.preset(config.preset, seed=TRAIN_SEED_OFFSET + i) for i in range(config.train_sequences)]
    train_seqs = [b.bundle for b in map_jobs(synth.generate, train_cfg, config.jobs)]
    labels = reid.generate_labels(train_seqs, config.label_sort, config.train.min_tracklet_length)
    ours = reid.train(labels, config.train)
    supervised = reid.train(
        reid.labels_from_ground_truth(train_seqs, config.train.min_tracklet_length), config.train
    )
    return labels, ours, supervised


def run_bench(config: BenchConfig | None = None) -> BenchResult:
    config = config or BenchConfig()
    labels, ours, supervised = train_models(config)
    input_dim = ours.model.input_dim
    embedders = {
        "Random": reid.RandomEmbedder(seed=config.embedding_seed),
        "Generic": reid.GenericProjectionEmbedder(input_dim, seed=config.embedding_seed),
        "Ours": reid.ModelEmbedder(ours.model),
        "Supervised": reid.ModelEmbedder(supervised.model),
        "Oracle": reid.OracleEmbedder(),
    }
    per_seed = map_jobs(_evaluate_seed, [(config, s, embedders) for s in range(config.seeds)], config.jobs)
    rows = {}
    for name in LADDER:
        seed_counts = [c[name] for c in per_seed]
        total = sum(seed_counts, metrics.Counts())
        rows[name] = RowSummary(
            name,
            metrics.EvalReport.from_counts(total),
            [metrics.EvalReport.from_counts(c) for c in seed_counts],
        )
    return BenchResult(rows, len({r.label for r in labels}), ours.train_accuracy, ours.epoch_losses)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TRACKLET_REID_JOBS", "1")))
    except ValueError:
        return 1
