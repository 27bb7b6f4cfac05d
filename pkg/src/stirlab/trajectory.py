"""Stirring trajectory generation, validation, and time parameterization.

Six path families are supported, all drawn inside the annulus between
the trap's central exclusion disc and its reference circle:

* circle        -- the reference circle itself, clockwise
* square        -- largest inscribed square, one vertex at the shared start
* triangle      -- largest inscribed equilateral triangle, same start
* spiral        -- Archimedean spiral, exclusion radius out to the
                   reference circle over three full clockwise turns
* four_small_circles -- four unit-radius circles tangent to the
                   reference circle from the inside, joined by straight
                   transitions, traversed clockwise around the trap
* random_lines  -- a seeded continuous polyline of chords that never
                   clip the exclusion disc

Every path except the spiral starts at (reference_radius, 0); every
closed path runs clockwise.  Paths are emitted as dense polylines with
an arc-length spacing of ~0.1 cm so polyline length tracks analytic
length to better than 0.01% for the circle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .arena import ArenaSpec
from .errors import GenerationError, ParameterError

DEFAULT_SPACING = 0.1
DEFAULT_N_LINES = 8
DEFAULT_MAX_RETRIES = 10_000
DEFAULT_V_MAX = 20.0  # cm/s at speed scale 1.0
SMALL_CIRCLE_RADIUS = 1.0
SPIRAL_TURNS = 3


class TrajectoryKind(enum.Enum):
    CIRCLE = "circle"
    SQUARE = "square"
    TRIANGLE = "triangle"
    SPIRAL = "spiral"
    FOUR_SMALL_CIRCLES = "four_small_circles"
    RANDOM_LINES = "random_lines"

    @classmethod
    def from_name(cls, name: str) -> "TrajectoryKind":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ParameterError(
            f"unknown trajectory kind {name!r}; expected one of "
            + ", ".join(k.value for k in cls)
        )


@dataclass
class Path:
    """A polyline in the trap-centred frame, coordinates in cm.

    ``closed`` means the segment from the last waypoint back to the
    first is implied; it is included in lengths, validation, and
    traversal but not stored as a duplicate point.
    """

    waypoints: np.ndarray
    kind: TrajectoryKind
    closed: bool = False

    def __post_init__(self) -> None:
        self.waypoints = np.asarray(self.waypoints, dtype=float)
        if self.waypoints.ndim != 2 or self.waypoints.shape[1] != 2:
            raise ParameterError("waypoints must be an (n, 2) array")
        if len(self.waypoints) < 2:
            raise ParameterError("a path needs at least 2 waypoints")
        steps = np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)
        if np.any(steps == 0.0):
            raise ParameterError("consecutive waypoints must be distinct")

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start/end point arrays, including the closing segment."""
        w = self.waypoints
        if self.closed:
            return w, np.vstack([w[1:], w[:1]])
        return w[:-1], w[1:]


@dataclass
class TimedPath:
    """A path resampled at a uniform time step with a constant speed.

    ``positions[i]`` is the stick location at ``times[i]``;
    ``arc_positions[i]`` is the distance travelled along the (possibly
    looped) path, so consecutive arc differences equal
    ``speed_scale * v_max * dt`` exactly.
    """

    positions: np.ndarray
    times: np.ndarray
    arc_positions: np.ndarray
    speed_scale: float
    v_max: float
    traversal_time: float  # time for one full pass of the source path
    cycle_length: float

    def __post_init__(self) -> None:
        if len(self.positions) != len(self.times):
            raise ParameterError("positions and times must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ParameterError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def samples(self):
        for (x, y), t in zip(self.positions, self.times):
            yield (float(x), float(y)), float(t)


@dataclass(frozen=True)
class ValidationReport:
    """Result of checking a path against the central exclusion disc."""

    min_center_distance: float
    exclusion_radius: float
    violation: bool


class PathCursor:
    """Arc-length walker along a path, optionally wrapping at the end.

    For closed paths the wrap is seamless.  For open paths the wrap
    travels a straight connecting segment back to the first waypoint at
    the commanded speed, so the stick never teleports.
    """

    def __init__(self, path: Path, loop: bool = True):
        w = path.waypoints
        if path.closed or loop:
            verts = np.vstack([w, w[:1]])
        else:
            verts = w
        seg = np.diff(verts, axis=0)
        lengths = np.linalg.norm(seg, axis=1)
        keep = lengths > 0.0  # the wrap segment degenerates if start == end
        self._starts = verts[:-1][keep]
        self._vecs = seg[keep]
        self._lengths = lengths[keep]
        self._cum = np.concatenate([[0.0], np.cumsum(self._lengths)])
        self.cycle_length = float(self._cum[-1])
        self.loop = loop

    def positions(self, arc: np.ndarray) -> np.ndarray:
        s = np.asarray(arc, dtype=float)
        if self.loop:
            s = np.mod(s, self.cycle_length)
        else:
            s = np.clip(s, 0.0, self.cycle_length)
        idx = np.searchsorted(self._cum, s, side="right") - 1
        idx = np.clip(idx, 0, len(self._lengths) - 1)
        frac = (s - self._cum[idx]) / self._lengths[idx]
        return self._starts[idx] + frac[:, None] * self._vecs[idx]

    def position(self, arc: float) -> np.ndarray:
        return self.positions(np.array([arc]))[0]


def _densify(vertices: np.ndarray, spacing: float, closed: bool) -> np.ndarray:
    """Subdivide straight edges at ~spacing, keeping exact vertices."""
    verts = np.asarray(vertices, dtype=float)
    edges = np.vstack([verts, verts[:1]]) if closed else verts
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        length = float(np.hypot(*(b - a)))
        m = max(1, math.ceil(length / spacing))
        t = np.arange(m) / m
        pieces.append(a + t[:, None] * (b - a))
    if not closed:
        pieces.append(verts[-1:])
    return np.vstack(pieces)


def _circle_points(center: np.ndarray, radius: float, start_angle: float,
                   spacing: float) -> np.ndarray:
    """One full clockwise lap, start point included, lap-close excluded."""
    n = max(3, math.ceil(2.0 * math.pi * radius / spacing))
    theta = start_angle - 2.0 * math.pi * np.arange(n) / n
    return center + radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _segment_min_center_distance(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    """Distance from the origin to each segment p0[i]->p1[i]."""
    d = p1 - p0
    dd = np.einsum("ij,ij->i", d, d)
    t = np.where(dd > 0.0, -np.einsum("ij,ij->i", p0, d) / np.where(dd > 0, dd, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = p0 + t[:, None] * d
    return np.linalg.norm(closest, axis=1)


def _gen_circle(arena: ArenaSpec, spacing: float) -> Path:
    pts = _circle_points(np.zeros(2), arena.reference_radius, 0.0, spacing)
    return Path(pts, TrajectoryKind.CIRCLE, closed=True)


def _gen_square(arena: ArenaSpec, spacing: float) -> Path:
    r = arena.reference_radius
    verts = np.array([[r, 0.0], [0.0, -r], [-r, 0.0], [0.0, r]])
    return Path(_densify(verts, spacing, closed=True), TrajectoryKind.SQUARE, closed=True)


def _gen_triangle(arena: ArenaSpec, spacing: float) -> Path:
    r = arena.reference_radius
    h = r * math.sqrt(3.0) / 2.0
    verts = np.array([[r, 0.0], [-r / 2.0, -h], [-r / 2.0, h]])
    return Path(_densify(verts, spacing, closed=True), TrajectoryKind.TRIANGLE, closed=True)


def _gen_spiral(arena: ArenaSpec, spacing: float) -> Path:
    r0 = arena.exclusion_radius
    r1 = arena.reference_radius
    total_angle = 2.0 * math.pi * SPIRAL_TURNS
    # upper bound on arc length keeps point spacing <= requested everywhere
    n = math.ceil(total_angle * r1 / spacing)
    u = np.arange(n + 1) / n
    radii = r0 + (r1 - r0) * u
    theta = -total_angle * u  # clockwise
    pts = radii[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    return Path(pts, TrajectoryKind.SPIRAL, closed=False)


def _gen_four_small_circles(arena: ArenaSpec, spacing: float) -> Path:
    """Four clockwise unit laps joined by four straight transitions.

    Each small circle is internally tangent to the reference circle
    (centres on the radius ``reference_radius - SMALL_CIRCLE_RADIUS``
    ring, 90 degrees apart, ordered clockwise), which keeps every
    waypoint inside the reference circle.  A lap is entered at the point
    nearest the previous lap's exit and traversed in full, so exit and
    entry coincide; the fourth transition closes the loop back to the
    start.
    """
    r_small = SMALL_CIRCLE_RADIUS
    ring = arena.reference_radius - r_small
    center_angles = [0.0, -math.pi / 2.0, -math.pi, -1.5 * math.pi]
    centers = [ring * np.array([math.cos(a), math.sin(a)]) for a in center_angles]

    entries = [np.array([arena.reference_radius, 0.0])]
    for k in range(1, 4):
        towards = entries[k - 1] - centers[k]
        entries.append(centers[k] + r_small * towards / np.linalg.norm(towards))

    pieces = []
    for k in range(4):
        rel = entries[k] - centers[k]
        start_angle = math.atan2(rel[1], rel[0])
        pieces.append(_circle_points(centers[k], r_small, start_angle, spacing))
        pieces.append(entries[k][None, :])  # close the lap at its entry point
        nxt = entries[(k + 1) % 4]
        chord = _densify(np.vstack([entries[k], nxt]), spacing, closed=False)
        pieces.append(chord[1:-1])  # transition interior only; endpoints already present
    return Path(np.vstack(pieces), TrajectoryKind.FOUR_SMALL_CIRCLES, closed=True)


def _gen_random_lines(arena: ArenaSpec, seed: int, spacing: float,
                      n_lines: int, max_retries: int) -> Path:
    rng = np.random.default_rng(seed)
    r_ref = arena.reference_radius
    r_excl = arena.exclusion_radius
    verts = [np.array([r_ref, 0.0])]
    attempts = 0
    for _ in range(n_lines):
        while True:
            attempts += 1
            if attempts > max_retries:
                raise GenerationError(
                    f"random_lines: no valid chord after {max_retries} samples"
                )
            radius = r_ref * math.sqrt(rng.uniform())
            angle = rng.uniform(0.0, 2.0 * math.pi)
            cand = radius * np.array([math.cos(angle), math.sin(angle)])
            dist = _segment_min_center_distance(verts[-1][None, :], cand[None, :])[0]
            if dist >= r_excl:
                verts.append(cand)
                break
    pts = _densify(np.array(verts), spacing, closed=False)
    return Path(pts, TrajectoryKind.RANDOM_LINES, closed=False)


def generate(kind: TrajectoryKind, arena: ArenaSpec | None = None, seed: int = 0, *,
             spacing: float = DEFAULT_SPACING, n_lines: int = DEFAULT_N_LINES,
             max_retries: int = DEFAULT_MAX_RETRIES) -> Path:
    """Build the requested stirring path inside the arena's annulus.

    ``seed`` only affects ``RANDOM_LINES``; all other kinds are fully
    deterministic functions of the arena geometry.
    """
    arena = arena or ArenaSpec()
    if spacing <= 0.0:
        raise ParameterError(f"spacing must be positive, got {spacing}")
    if kind is TrajectoryKind.CIRCLE:
        path = _gen_circle(arena, spacing)
    elif kind is TrajectoryKind.SQUARE:
        path = _gen_square(arena, spacing)
    elif kind is TrajectoryKind.TRIANGLE:
        path = _gen_triangle(arena, spacing)
    elif kind is TrajectoryKind.SPIRAL:
        path = _gen_spiral(arena, spacing)
    elif kind is TrajectoryKind.FOUR_SMALL_CIRCLES:
        path = _gen_four_small_circles(arena, spacing)
    elif kind is TrajectoryKind.RANDOM_LINES:
        if n_lines < 1:
            raise ParameterError(f"n_lines must be >= 1, got {n_lines}")
        path = _gen_random_lines(arena, seed, spacing, n_lines, max_retries)
    else:  # pragma: no cover - enum is closed
        raise ParameterError(f"unhandled kind {kind}")

    radii = np.linalg.norm(path.waypoints, axis=1)
    if radii.max() > arena.reference_radius + 1e-9 or radii.min() < arena.exclusion_radius - 1e-9:
        raise GenerationError(
            f"{kind.value}: construction produced waypoints outside "
            f"[{arena.exclusion_radius}, {arena.reference_radius}]"
        )
    return path


def path_length(path: Path) -> float:
    """Total polyline length in cm, closing segment included when closed."""
    p0, p1 = path.segments()
    return float(np.sum(np.linalg.norm(p1 - p0, axis=1)))


def validate(path: Path, arena: ArenaSpec) -> ValidationReport:
    """Report the closest approach of any path point to the trap centre.

    Segment interiors count, so a chord passing over the column is
    caught even when both endpoints are legal.
    """
    p0, p1 = path.segments()
    min_dist = float(np.min(_segment_min_center_distance(p0, p1)))
    return ValidationReport(
        min_center_distance=min_dist,
        exclusion_radius=arena.exclusion_radius,
        violation=min_dist < arena.exclusion_radius - 1e-9,
    )


def time_parameterize(path: Path, speed_scale: float, v_max: float = DEFAULT_V_MAX,
                      dt: float = 0.02, duration: float | None = None) -> TimedPath:
    """Sample the path at a constant speed ``speed_scale * v_max``.

    Without an explicit ``duration`` the samples cover one traversal of
    the path.  With one, the path loops: closed paths wrap seamlessly,
    open paths return to their first waypoint along a straight segment
    at the same speed.
    """
    if speed_scale <= 0.0 or speed_scale > 1.0:
        raise ParameterError(f"speed_scale must be in (0, 1], got {speed_scale}")
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if v_max <= 0.0:
        raise ParameterError(f"v_max must be positive, got {v_max}")

    speed = speed_scale * v_max
    length = path_length(path)
    traversal_time = length / speed
    loop = duration is not None
    cursor = PathCursor(path, loop=loop)
    span = traversal_time if duration is None else duration
    n = int(math.floor(span / dt + 1e-9))
    times = np.arange(n + 1) * dt
    arc = speed * times
    return TimedPath(
        positions=cursor.positions(arc),
        times=times,
        arc_positions=arc,
        speed_scale=speed_scale,
        v_max=v_max,
        traversal_time=traversal_time,
        cycle_length=cursor.cycle_length,
    )


def write_waypoints(timed: TimedPath, path_kind: TrajectoryKind, seed: int, out_file) -> None:
    """Write ``x_cm y_cm t_s`` rows with a one-line descriptive header."""
    from .util import fmt

    out_file.write(
        f"# kind={path_kind.value} seed={seed} speed_scale={fmt(timed.speed_scale)}\n"
    )
    for (x, y), t in timed.samples():
        out_file.write(f"{fmt(x)} {fmt(y)} {fmt(t)}\n")
