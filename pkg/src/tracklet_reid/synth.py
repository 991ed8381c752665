"""Deterministic synthetic sequences: ground truth, noisy detections, appearance features.

Agents move with piecewise-constant velocity and reflect off the arena
boundary. Each agent has a latent unit appearance vector drawn inside an
*identity subspace* shared by every scenario built from the same
``population_seed``; emitted features add per-detection nuisance variation in
the complementary subspace plus isotropic noise, then get normalized.
Occlusions are detection dropout intervals; ground truth keeps the occluded
boxes (visibility 0).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .core import BBox, Detection
from .motio import Annotation, SequenceBundle


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    frame_count: int = 200
    agent_count: int = 6
    arena: tuple = (1280.0, 720.0)
    speed_range: tuple = (1.0, 4.0)
    direction_change_prob: float = 0.02
    height_range: tuple = (90.0, 180.0)
    aspect_range: tuple = (0.35, 0.5)
    lanes: bool = False
    appearance_dim: int = 64
    identity_dim: int = 16
    appearance_noise_sigma: float = 0.05
    nuisance_sigma: float = 0.0
    population_seed: int = 0
    occlusion_rate: float = 0.0
    occlusion_duration: tuple = (2, 5)
    miss_prob: float = 0.0
    jitter_sigma: float = 0.0
    false_positive_rate: float = 0.0
    confidence_mean: float = 0.8
    confidence_sigma: float = 0.1
    false_positive_confidence: tuple = (0.05, 0.6)
    name: str = ""

    def __post_init__(self):
        for p in ("direction_change_prob", "occlusion_rate", "miss_prob"):
            if not 0.0 <= getattr(self, p) <= 1.0:
                raise ValueError(f"{p} must be a probability")
        for s in ("appearance_noise_sigma", "nuisance_sigma", "jitter_sigma", "false_positive_rate"):
            if getattr(self, s) < 0:
                raise ValueError(f"{s} must be >= 0")
        if self.agent_count < 1 or self.frame_count < 1:
            raise ValueError("agent_count and frame_count must be >= 1")
        if not 1 <= self.identity_dim <= self.appearance_dim:
            raise ValueError("identity_dim must lie in [1, appearance_dim]")

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return dataclasses.replace(self, seed=seed)

    @property
    def sequence_name(self) -> str:
        return f"{self.name or 'SIM'}-{self.seed:04d}"


PRESETS = {
    # well separated agents, perfect detector
    "noiseless": ScenarioConfig(
        frame_count=120, agent_count=3, lanes=True, speed_range=(1.0, 2.5),
        direction_change_prob=0.0, name="noiseless",
    ),
    "easy": ScenarioConfig(
        frame_count=150, agent_count=4, occlusion_rate=0.005, occlusion_duration=(2, 4),
        miss_prob=0.02, jitter_sigma=1.0, nuisance_sigma=0.15, name="easy",
    ),
    "crowded": ScenarioConfig(
        frame_count=300, agent_count=12, arena=(960.0, 540.0), speed_range=(1.5, 4.5),
        direction_change_prob=0.03, height_range=(80.0, 150.0), occlusion_rate=0.012,
        occlusion_duration=(6, 24), miss_prob=0.05, jitter_sigma=2.0,
        false_positive_rate=0.02, nuisance_sigma=0.25, name="crowded",
    ),
}


def preset(name: str, seed: int = 0, **overrides) -> ScenarioConfig:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return dataclasses.replace(base, seed=seed, **overrides)


def _population(config: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases of the identity subspace and its complement."""
    rng = np.random.default_rng([config.population_seed, config.appearance_dim, config.identity_dim])
    q, _ = np.linalg.qr(rng.standard_normal((config.appearance_dim, config.appearance_dim)))
    return q[:, : config.identity_dim], q[:, config.identity_dim :]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass
class Scenario:
    """A generated sequence plus simulator-side truth that files do not carry."""

    bundle: SequenceBundle
    latents: np.ndarray
    detection_sources: list = field(default_factory=list)  # agent identity or None (false positive)
    miss_opportunities: int = 0
    misses: int = 0


def _trajectories(config: ScenarioConfig, rng: np.random.Generator):
    n, T = config.agent_count, config.frame_count
    aw, ah = config.arena
    heights = rng.uniform(*config.height_range, size=n)
    aspects = rng.uniform(*config.aspect_range, size=n)
    if config.lanes:
        band = ah / n
        cy = (np.arange(n) + 0.5) * band
        cx = rng.uniform(0.1 * aw, 0.9 * aw, size=n)
        heights = np.minimum(heights, 0.8 * band)
    else:
        cx = rng.uniform(0.0, aw, size=n)
        cy = rng.uniform(0.0, ah, size=n)
    angle = rng.uniform(0, 2 * np.pi, size=n) if not config.lanes else np.where(rng.random(n) < 0.5, 0.0, np.pi)
    speed = rng.uniform(*config.speed_range, size=n)
    pos = np.empty((T, n, 2))
    for t in range(T):
        pos[t, :, 0], pos[t, :, 1] = cx, cy
        turn = rng.random(n) < config.direction_change_prob
        if turn.any():
            new_angle = rng.uniform(0, 2 * np.pi, size=n)
            if config.lanes:
                new_angle = np.where(rng.random(n) < 0.5, 0.0, np.pi)
            angle = np.where(turn, new_angle, angle)
            speed = np.where(turn, rng.uniform(*config.speed_range, size=n), speed)
        vx, vy = speed * np.cos(angle), speed * np.sin(angle)
        cx, cy = cx + vx, cy + vy
        # reflect off the arena walls
        low, high = cx < 0, cx > aw
        cx = np.where(low, -cx, np.where(high, 2 * aw - cx, cx))
        angle = np.where(low | high, np.pi - angle, angle)
        if not config.lanes:
            low, high = cy < 0, cy > ah
            cy = np.where(low, -cy, np.where(high, 2 * ah - cy, cy))
            angle = np.where(low | high, -angle, angle)
    return pos, heights, aspects


def generate(config: ScenarioConfig) -> Scenario:
    """Build one sequence; the output is a pure function of ``config``."""
    rng = np.random.default_rng(config.seed)
    n, T = config.agent_count, config.frame_count
    basis, complement = _population(config)
    latents = _unit(rng.standard_normal((n, config.identity_dim))) @ basis.T
    pos, heights, aspects = _trajectories(config, rng)
    widths = heights * aspects

    occluded = np.zeros((T, n), dtype=bool)
    for t in range(T):
        starts = rng.random(n) < config.occlusion_rate
        for a in np.nonzero(starts)[0]:
            dur = int(rng.integers(config.occlusion_duration[0], config.occlusion_duration[1] + 1))
            occluded[t : t + dur, a] = True

    gt, detections, sources = [], [], []
    opportunities = misses = 0
    m = config.appearance_dim
    for t in range(T):
        frame = t + 1
        frame_dets = []
        for a in range(n):
            box = BBox(pos[t, a, 0] - widths[a] / 2, pos[t, a, 1] - heights[a] / 2, widths[a], heights[a])
            gt.append(Annotation(frame, a + 1, box, 0.0 if occluded[t, a] else 1.0))
            if occluded[t, a]:
                continue
            opportunities += 1
            if rng.random() < config.miss_prob:
                misses += 1
                continue
            jit = rng.normal(0.0, config.jitter_sigma, size=4) if config.jitter_sigma > 0 else np.zeros(4)
            w = max(widths[a] + 0.5 * jit[2], 1.0)
            h = max(heights[a] + 0.5 * jit[3], 1.0)
            det_box = BBox(box.left + jit[0], box.top + jit[1], w, h)
            feat = latents[a].copy()
            if config.nuisance_sigma > 0:
                feat += complement @ rng.normal(0.0, config.nuisance_sigma, size=complement.shape[1])
            if config.appearance_noise_sigma > 0:
                feat += rng.normal(0.0, config.appearance_noise_sigma, size=m)
            conf = float(np.clip(rng.normal(config.confidence_mean, config.confidence_sigma), 0.05, 1.0))
            frame_dets.append((Detection(frame, det_box, conf, _unit(feat)), a + 1))
        n_fp = rng.poisson(config.false_positive_rate * n) if config.false_positive_rate > 0 else 0
        aw, ah = config.arena
        for _ in range(n_fp):
            h = rng.uniform(*config.height_range)
            w = h * rng.uniform(*config.aspect_range)
            box = BBox(rng.uniform(0, aw) - w / 2, rng.uniform(0, ah) - h / 2, w, h)
            conf = float(rng.uniform(*config.false_positive_confidence))
            frame_dets.append((Detection(frame, box, conf, _unit(rng.standard_normal(m))), None))
        for k in rng.permutation(len(frame_dets)):
            det, src = frame_dets[k]
            detections.append(det)
            sources.append(src)

    bundle = SequenceBundle(
        name=config.sequence_name,
        frame_count=T,
        frame_rate=30.0,
        detections=detections,
        ground_truth=gt,
    )
    return Scenario(bundle, latents, sources, opportunities, misses)
