"""Occlusion-aware synthetic detection and counting metrics.

Visibility is purely geometric: the fraction of each pest disc hidden
under higher-stacked pests decides whether the detector can see it.
The detector itself is a parametric stand-in for a trained network:
visible pests are found with high probability, partially hidden ones
with reduced probability, fully hidden ones never, and murky water
(high agitation) suppresses everything.  Counting is scored by the
error ``gt - tp`` and by a Jaccard-style confidence
``tp / (tp + fp + fn)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError, ParameterError
from .fluidsim import Scene

N_DISC_SAMPLES = 64
VISIBLE_BELOW = 0.1
OCCLUDED_FROM = 0.5
DEFAULT_COUNT_NORMALIZER = 100.0
UNIFORMITY_SECTORS = 6


def _sunflower_disc(n: int) -> np.ndarray:
    """Deterministic quasi-uniform points on the unit disc (golden angle)."""
    i = np.arange(n)
    r = np.sqrt((i + 0.5) / n)
    theta = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


_DISC_SAMPLES = _sunflower_disc(N_DISC_SAMPLES)


class Visibility(enum.IntEnum):
    VISIBLE = 0
    PARTIAL = 1
    OCCLUDED = 2


@dataclass(frozen=True)
class DetectorParams:
    """Synthetic detector behaviour."""

    p_detect_visible: float = 0.95
    p_detect_partial: float = 0.5
    fp_rate: float = 0.3            # expected false positives per frame
    conf_alpha: float = 8.0         # true detections score Beta(alpha, beta)
    conf_beta: float = 2.0          # false positives score Beta(beta, alpha)
    clarity_penalty: float = 0.4    # detection loss at full agitation

    def __post_init__(self) -> None:
        for name in ("p_detect_visible", "p_detect_partial", "clarity_penalty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must be in [0, 1], got {v}")
        if self.fp_rate < 0.0:
            raise ParameterError(f"fp_rate must be >= 0, got {self.fp_rate}")
        if self.conf_alpha <= 0.0 or self.conf_beta <= 0.0:
            raise ParameterError("confidence shape parameters must be positive")


@dataclass
class DetectionResult:
    """One frame's worth of detector output.

    ``matches`` pairs each true positive with the pest it came from, so
    counts can always be re-tallied from first principles.
    """

    tp: int
    fp: int
    fn_: int
    matches: list[tuple[int, float]]
    false_confidences: list[float]

    def __post_init__(self) -> None:
        if self.tp != len(self.matches):
            raise ParameterError("tp must equal the number of matches")
        if self.fp != len(self.false_confidences):
            raise ParameterError("fp must equal the number of false confidences")
        if min(self.tp, self.fp, self.fn_) < 0:
            raise ParameterError("counts must be non-negative")
        confs = [c for _, c in self.matches] + list(self.false_confidences)
        if any(not 0.0 <= c <= 1.0 for c in confs):
            raise ParameterError("detection confidences must lie in [0, 1]")


@dataclass(frozen=True)
class FeatureVector:
    """The six per-frame inputs of the confidence prediction model."""

    mean_confidence: float        # x1: mean score over all detections
    predicted_count: float        # x2: (tp + fp) / normalizer
    image_quality: float          # x3: 1 - fraction of partially hidden pests
    image_complexity: float       # x4: fraction of pests touching another pest
    image_clarity: float          # x5: 1 - min(agitation, 1)
    distribution_uniformity: float  # x6: 1 - normalized sector chi-square

    def __post_init__(self) -> None:
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ParameterError("feature values must be finite")
        bounded = [self.mean_confidence, self.image_quality, self.image_complexity,
                   self.image_clarity, self.distribution_uniformity]
        if any(not 0.0 <= v <= 1.0 for v in bounded):
            raise ParameterError("feature values outside their declared [0, 1] range")
        if self.predicted_count < 0.0:
            raise ParameterError("predicted_count must be >= 0")

    def as_array(self) -> np.ndarray:
        return np.array([
            self.mean_confidence, self.predicted_count, self.image_quality,
            self.image_complexity, self.image_clarity, self.distribution_uniformity,
        ])


def covered_fractions(scene: Scene) -> np.ndarray:
    """Fraction of each pest disc hidden under higher-stacked pests.

    Estimated on a fixed 64-point quasi-random set per disc, so the
    result is deterministic for a given scene.
    """
    pos = scene.positions
    rad = scene.radii
    z = scene.z_rank
    n = scene.n_pests
    fractions = np.zeros(n)
    if n == 0:
        return fractions
    diff = pos[:, None, :] - pos[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    touching = dist < (rad[:, None] + rad[None, :])
    for i in range(n):
        covers = np.flatnonzero(touching[i] & (z > z[i]))
        if covers.size == 0:
            continue
        pts = pos[i] + rad[i] * _DISC_SAMPLES
        d = np.linalg.norm(pts[:, None, :] - pos[covers][None, :, :], axis=2)
        hidden = np.any(d < rad[covers][None, :], axis=1)
        fractions[i] = hidden.mean()
    return fractions


def compute_visibility(scene: Scene) -> np.ndarray:
    """Classify every pest as Visible, Partial, or Occluded."""
    frac = covered_fractions(scene)
    out = np.full(scene.n_pests, Visibility.VISIBLE, dtype=int)
    out[frac >= VISIBLE_BELOW] = Visibility.PARTIAL
    out[frac >= OCCLUDED_FROM] = Visibility.OCCLUDED
    return out


def simulate_detection(scene: Scene, visibility: np.ndarray, params: DetectorParams,
                       agitation: float, seed: int) -> DetectionResult:
    """Draw one frame of detections.

    Occluded pests are never detected -- they are exactly the
    undercount mechanism stirring is meant to fix.
    """
    rng = np.random.default_rng(seed)
    clarity_factor = 1.0 - params.clarity_penalty * min(agitation, 1.0)
    p = np.zeros(scene.n_pests)
    p[visibility == Visibility.VISIBLE] = params.p_detect_visible * clarity_factor
    p[visibility == Visibility.PARTIAL] = params.p_detect_partial * clarity_factor
    detected = rng.uniform(size=scene.n_pests) < p
    detected_ids = scene.ids[detected]
    tp_conf = rng.beta(params.conf_alpha, params.conf_beta, size=int(detected.sum()))
    n_fp = int(rng.poisson(params.fp_rate))
    fp_conf = rng.beta(params.conf_beta, params.conf_alpha, size=n_fp)
    return DetectionResult(
        tp=int(detected.sum()),
        fp=n_fp,
        fn_=int(scene.n_pests - detected.sum()),
        matches=[(int(i), float(c)) for i, c in zip(detected_ids, tp_conf)],
        false_confidences=[float(c) for c in fp_conf],
    )


def counting_error(gt_real: int, tp: int) -> int:
    """Ground-truth count minus correct detections; never negative."""
    if tp > gt_real:
        raise ContractViolationError(f"tp ({tp}) cannot exceed gt_real ({gt_real})")
    return gt_real - tp


def counting_confidence(tp: int, fp: int, fn_: int) -> float:
    """Jaccard-style agreement between detections and ground truth.

    The vacuous 0/0 case (empty trap, nothing reported) counts as a
    perfectly confident 1.0.
    """
    if min(tp, fp, fn_) < 0:
        raise ParameterError("counts must be non-negative")
    total = tp + fp + fn_
    if total == 0:
        return 1.0
    return tp / total


def _sector_uniformity(scene: Scene) -> float:
    """1 minus the normalized chi-square of a 6-sector angular quadrat count."""
    n = scene.n_pests
    if n == 0:
        return 1.0
    angles = np.mod(np.arctan2(scene.positions[:, 1], scene.positions[:, 0]),
                    2.0 * math.pi)
    sectors = np.minimum(
        (angles / (2.0 * math.pi) * UNIFORMITY_SECTORS).astype(int),
        UNIFORMITY_SECTORS - 1,
    )
    counts = np.bincount(sectors, minlength=UNIFORMITY_SECTORS)
    expected = n / UNIFORMITY_SECTORS
    chi2 = float(np.sum((counts - expected) ** 2) / expected)
    # chi2 maxes out at n * (sectors - 1) when everything shares one sector
    return max(0.0, 1.0 - chi2 / (n * (UNIFORMITY_SECTORS - 1)))


def extract_features(scene: Scene, visibility: np.ndarray, det: DetectionResult,
                     agitation: float,
                     count_normalizer: float = DEFAULT_COUNT_NORMALIZER) -> FeatureVector:
    """Assemble the six confidence-model inputs for one frame."""
    confs = [c for _, c in det.matches] + list(det.false_confidences)
    n = scene.n_pests
    partial = int(np.sum(visibility == Visibility.PARTIAL))
    diff = scene.positions[:, None, :] - scene.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    touching = dist < (scene.radii[:, None] + scene.radii[None, :])
    np.fill_diagonal(touching, False)
    overlapping = int(np.sum(np.any(touching, axis=1)))
    return FeatureVector(
        mean_confidence=float(np.mean(confs)) if confs else 0.0,
        predicted_count=(det.tp + det.fp) / count_normalizer,
        image_quality=1.0 - (partial / n if n else 0.0),
        image_complexity=(overlapping / n) if n else 0.0,
        image_clarity=1.0 - min(agitation, 1.0),
        distribution_uniformity=_sector_uniformity(scene),
    )


def frame_record(t: float, gt: int, det: DetectionResult, error: int,
                 confidence: float, features: FeatureVector) -> tuple:
    """Values in the per-frame record order: t gt tp fp fn E C x1..x6."""
    return (t, gt, det.tp, det.fp, det.fn_, error, confidence,
            *features.as_array().tolist())
