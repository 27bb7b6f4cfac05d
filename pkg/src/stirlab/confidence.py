"""Quadratic counting-confidence prediction.

The model is a full second-order response surface over the six frame
features: an intercept, six linear terms, six squares, and the fifteen
pairwise products, 28 coefficients in all.  Features are z-scored with
training statistics before expansion (stored in the coefficient file,
applied again at prediction time) to keep the design well conditioned.
Fitting is ordinary least squares through an SVD, never the normal
equations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CoefficientFileError, FitError, ParameterError
from .perception import FeatureVector
from .util import fmt

N_FEATURES = 6
CROSS_PAIRS = [(i, j) for i in range(N_FEATURES) for j in range(i + 1, N_FEATURES)]
N_TERMS = 1 + N_FEATURES + N_FEATURES + len(CROSS_PAIRS)  # 28
FILE_MAGIC = "stirlab-coef v1"

_FEATURE_NAMES = ["x1", "x2", "x3", "x4", "x5", "x6"]


def term_names() -> list[str]:
    """Human-readable names for the 28 design columns, in order."""
    names = ["1"]
    names += _FEATURE_NAMES
    names += [f"{n}^2" for n in _FEATURE_NAMES]
    names += [f"{_FEATURE_NAMES[i]}*{_FEATURE_NAMES[j]}" for i, j in CROSS_PAIRS]
    return names


def _as_feature_array(x) -> np.ndarray:
    if isinstance(x, FeatureVector):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.shape != (N_FEATURES,):
        raise ParameterError(f"expected {N_FEATURES} features, got shape {arr.shape}")
    return arr


def design_row(x) -> np.ndarray:
    """Expand one feature vector into the 28-term design row.

    Order: [1, x1..x6, x1^2..x6^2, x1x2, x1x3, ..., x5x6] with the
    cross terms in lexicographic order.
    """
    arr = _as_feature_array(x)
    if not np.all(np.isfinite(arr)):
        raise ParameterError("features must be finite")
    cross = [arr[i] * arr[j] for i, j in CROSS_PAIRS]
    return np.concatenate([[1.0], arr, arr**2, cross])


def design_matrix(features: np.ndarray) -> np.ndarray:
    """Vectorized design rows for an (m, 6) feature block."""
    x = np.asarray(features, dtype=float)
    cross = np.column_stack([x[:, i] * x[:, j] for i, j in CROSS_PAIRS])
    return np.hstack([np.ones((len(x), 1)), x, x**2, cross])


@dataclass
class Coefficients:
    """Fitted model: 28 coefficients over z-scored features.

    ``fit_residual_std`` summarizes the training residual spread; it is
    a diagnostic, never added to predictions.
    """

    beta0: float
    beta_linear: np.ndarray   # 6
    beta_quad: np.ndarray     # 6
    beta_cross: np.ndarray    # 15
    fit_residual_std: float
    feature_mean: np.ndarray  # z-score statistics from training
    feature_std: np.ndarray
    training_meta: str = ""

    def __post_init__(self) -> None:
        self.beta_linear = np.asarray(self.beta_linear, dtype=float)
        self.beta_quad = np.asarray(self.beta_quad, dtype=float)
        self.beta_cross = np.asarray(self.beta_cross, dtype=float)
        self.feature_mean = np.asarray(self.feature_mean, dtype=float)
        self.feature_std = np.asarray(self.feature_std, dtype=float)
        if (len(self.beta_linear), len(self.beta_quad), len(self.beta_cross)) != (6, 6, 15):
            raise ParameterError("expected 6 linear, 6 quadratic, 15 cross coefficients")
        if len(self.feature_mean) != 6 or len(self.feature_std) != 6:
            raise ParameterError("expected 6 standardization means and stds")
        if self.fit_residual_std < 0.0:
            raise ParameterError("fit_residual_std must be >= 0")

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.beta_linear,
                               self.beta_quad, self.beta_cross])

    @classmethod
    def from_vector(cls, vec: np.ndarray, residual_std: float,
                    feature_mean: np.ndarray, feature_std: np.ndarray,
                    training_meta: str = "") -> "Coefficients":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (N_TERMS,):
            raise ParameterError(f"expected {N_TERMS} coefficients, got {vec.shape}")
        return cls(
            beta0=float(vec[0]),
            beta_linear=vec[1:7],
            beta_quad=vec[7:13],
            beta_cross=vec[13:28],
            fit_residual_std=residual_std,
            feature_mean=feature_mean,
            feature_std=feature_std,
            training_meta=training_meta,
        )


def _standardize(features: np.ndarray, mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return (features - mean) / std


def _name_collinear_columns(design: np.ndarray) -> list[str]:
    _, sv, vt = np.linalg.svd(design, full_matrices=False)
    tol = sv[0] * max(design.shape) * np.finfo(float).eps
    names = term_names()
    flagged: list[str] = []
    for row in vt[sv < max(tol, 1e-12 * sv[0])]:
        weight = np.abs(row)
        for idx in np.flatnonzero(weight > 0.3 * weight.max()):
            if names[idx] not in flagged:
                flagged.append(names[idx])
    return flagged or ["<undetermined>"]


def fit(features, targets) -> Coefficients:
    """Least-squares fit of the 28-term surface to confidence targets.

    Accepts an (m, 6) array or a sequence of FeatureVector/target pairs
    zipped by the caller.  Requires at least 28 rows and targets in
    [0, 1]; raises a FitError naming the offending columns when the
    standardized design is rank deficient.
    """
    if len(features) and isinstance(features[0], FeatureVector):
        x = np.array([f.as_array() for f in features])
    else:
        x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2 or x.shape[1] != N_FEATURES:
        raise ParameterError(f"features must be (m, {N_FEATURES}), got {x.shape}")
    if len(x) != len(y):
        raise ParameterError("features and targets must have equal length")
    if len(x) < N_TERMS:
        raise FitError(f"need at least {N_TERMS} rows to fit, got {len(x)}")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise ParameterError("features and targets must be finite")
    if y.min() < 0.0 or y.max() > 1.0:
        raise ParameterError("targets must lie in [0, 1]")

    mean = x.mean(axis=0)
    std = x.std(axis=0)
    flat = np.flatnonzero(std <= 1e-12)
    if flat.size:
        raise FitError(
            "constant feature column(s): "
            + ", ".join(_FEATURE_NAMES[i] for i in flat)
        )
    a = design_matrix(_standardize(x, mean, std))
    beta, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < N_TERMS:
        raise FitError(
            "rank-deficient design; near-collinear columns: "
            + ", ".join(_name_collinear_columns(a))
        )
    residuals = a @ beta - y
    residual_std = float(np.sqrt(np.mean(residuals**2)))
    return Coefficients.from_vector(beta, residual_std, mean, std)


def predict_raw(coef: Coefficients, x) -> float:
    """Unclipped model value at one feature vector."""
    z = _standardize(_as_feature_array(x), coef.feature_mean, coef.feature_std)
    return float(design_row(z) @ coef.vector)


def predict(coef: Coefficients, x) -> float:
    """Predicted counting confidence, clipped into [0, 1]."""
    return float(np.clip(predict_raw(coef, x), 0.0, 1.0))


def predict_many(coef: Coefficients, features: np.ndarray) -> np.ndarray:
    z = _standardize(np.asarray(features, dtype=float), coef.feature_mean, coef.feature_std)
    return np.clip(design_matrix(z) @ coef.vector, 0.0, 1.0)


def raw_basis_vector(coef: Coefficients) -> np.ndarray:
    """The same surface expressed over unstandardized features.

    Substituting z_i = (x_i - m_i) / s_i into the fitted polynomial and
    collecting monomials gives an exact 28-vector in the raw basis,
    which makes fitted models comparable to generators defined on raw
    features.
    """
    a = 1.0 / coef.feature_std
    c = -coef.feature_mean / coef.feature_std
    out = np.zeros(N_TERMS)
    out[0] = coef.beta0
    out[0] += float(coef.beta_linear @ c)
    out[0] += float(coef.beta_quad @ (c**2))
    for idx, (i, j) in enumerate(CROSS_PAIRS):
        out[0] += coef.beta_cross[idx] * c[i] * c[j]
    for i in range(N_FEATURES):
        out[1 + i] = coef.beta_linear[i] * a[i] + 2.0 * coef.beta_quad[i] * a[i] * c[i]
        out[7 + i] = coef.beta_quad[i] * a[i] ** 2
    for idx, (i, j) in enumerate(CROSS_PAIRS):
        b = coef.beta_cross[idx]
        out[1 + i] += b * a[i] * c[j]
        out[1 + j] += b * a[j] * c[i]
        out[13 + idx] = b * a[i] * a[j]
    return out


def save(coef: Coefficients, path) -> None:
    """Versioned plain-text format, round-trip exact.

    Line 1 magic, line 2 means, line 3 stds, lines 4-31 coefficients in
    design order, line 32 residual std, remainder free-text metadata.
    """
    lines = [FILE_MAGIC]
    lines.append(" ".join(fmt(v) for v in coef.feature_mean))
    lines.append(" ".join(fmt(v) for v in coef.feature_std))
    lines.extend(fmt(v) for v in coef.vector)
    lines.append(fmt(coef.fit_residual_std))
    if coef.training_meta:
        lines.extend(coef.training_meta.splitlines())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load(path) -> Coefficients:
    """Read a coefficient file, refusing wrong versions or counts."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != FILE_MAGIC:
        got = lines[0].strip() if lines else "<empty file>"
        raise CoefficientFileError(
            f"bad coefficient file header {got!r}; expected {FILE_MAGIC!r}"
        )
    if len(lines) < 3 + N_TERMS + 1:
        raise CoefficientFileError(
            f"coefficient file truncated: expected {3 + N_TERMS + 1} data lines, "
            f"got {len(lines)}"
        )

    def parse_floats(text: str, expect: int, what: str) -> np.ndarray:
        parts = text.split()
        if len(parts) != expect:
            raise CoefficientFileError(f"expected {expect} {what}, got {len(parts)}")
        try:
            return np.array([float(p) for p in parts])
        except ValueError as exc:
            raise CoefficientFileError(f"bad {what}: {exc}") from exc

    mean = parse_floats(lines[1], N_FEATURES, "standardization means")
    std = parse_floats(lines[2], N_FEATURES, "standardization stds")
    coef_lines = lines[3 : 3 + N_TERMS]
    vec = np.array([parse_floats(ln, 1, "coefficient")[0] for ln in coef_lines])
    residual = float(parse_floats(lines[3 + N_TERMS], 1, "residual std")[0])
    meta = "\n".join(lines[3 + N_TERMS + 1 :]).strip()
    return Coefficients.from_vector(vec, residual, mean, std, training_meta=meta)


def calibrate(n_frames: int = 5000, seed: int = 0, *, arena=None, template=None,
              flow=None, detector=None, count_normalizer: float = 100.0,
              holdout_fraction: float = 0.2) -> Coefficients:
    """Fit the surface on simulated frames spanning densities and stir phases.

    Runs the standard stir-and-settle protocol over all trajectory
    kinds and densities until ``n_frames`` frames are collected, scores
    each frame's true confidence, fits on a shuffled 80% split, and
    records the held-out R^2 in the metadata.  Deterministic for a
    given seed.
    """
    from . import engine
    from .arena import ArenaSpec, TemplateSpec
    from .fluidsim import Density, FlowParams
    from .perception import DetectorParams
    from .trajectory import TrajectoryKind
    from .util import mix64

    arena = arena or ArenaSpec()
    template = template or TemplateSpec()
    flow = flow or FlowParams()
    detector = detector or DetectorParams()

    rows: list[np.ndarray] = []
    targets: list[float] = []
    kinds = list(TrajectoryKind)
    densities = list(Density)
    trial = 0
    while len(rows) < n_frames:
        kind = kinds[trial % len(kinds)]
        density = densities[(trial // len(kinds)) % len(densities)]
        frames = engine.run_selection_trial(
            kind, density, arena=arena, template=template, flow=flow,
            detector=detector, trial_seed=mix64(seed, "calibrate", trial),
            count_normalizer=count_normalizer,
        )
        for obs in frames:
            rows.append(obs.features.as_array())
            targets.append(obs.confidence)
        trial += 1
    x = np.array(rows[:n_frames])
    y = np.array(targets[:n_frames])

    rng = np.random.default_rng(mix64(seed, "calibrate", "split"))
    order = rng.permutation(len(x))
    n_hold = int(round(holdout_fraction * len(x)))
    hold, train = order[:n_hold], order[n_hold:]
    coef = fit(x[train], y[train])

    if len(hold):
        pred = predict_many(coef, x[hold])
        ss_res = float(np.sum((y[hold] - pred) ** 2))
        ss_tot = float(np.sum((y[hold] - y[hold].mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    else:
        r2 = float("nan")
    meta = (
        f"protocol=stir-settle-sweep n_frames={len(x)} seed={seed} "
        f"holdout_r2={r2:.4f} trials={trial}"
    )
    return replace(coef, training_meta=meta)
