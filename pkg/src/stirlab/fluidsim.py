"""Pest transport under a stirred-water surrogate flow.

The stick drags water with it; pests relax toward the local flow,
receive agitation-scaled random kicks, and stay inside the annulus
between the support column and the trap wall.  A single scalar
"agitation" tracks how energetic the water is: it grows with stick
speed and decays exponentially once stirring stops.  The point of the
model is the causal chain stick motion -> transport + mixing ->
de-occlusion, not fluid accuracy.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .arena import ArenaSpec, TemplateSpec
from .errors import InitializationError, ParameterError
from .util import fmt

DEFAULT_PEST_RADIUS = 0.4
PLACEMENT_BUDGET = 10_000


class Density(enum.Enum):
    """Initial crowding level: pests placed per template cell."""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @property
    def pests_per_region(self) -> int:
        return {"low": 2, "medium": 4, "high": 6}[self.value]

    @classmethod
    def from_name(cls, name: str) -> "Density":
        key = name.strip().lower()
        for d in cls:
            if d.value == key:
                return d
        raise ParameterError(f"unknown density {name!r}; expected low, medium, or high")


@dataclass(frozen=True)
class FlowParams:
    """Knobs of the kernel-advection surrogate; all configurable."""

    kernel_sigma: float = 2.0       # cm, reach of the stick's influence
    drag_coeff: float = 2.5         # 1/s, velocity relaxation rate
    swirl_coeff: float = 0.3        # circulation around the moving stick
    noise_scale: float = 0.5        # cm/s of kick per unit agitation
    agitation_gain: float = 0.05    # agitation added per cm of stick travel
    agitation_decay: float = 0.15   # 1/s once the water is left alone

    def __post_init__(self) -> None:
        if self.kernel_sigma <= 0.0:
            raise ParameterError("kernel_sigma must be positive")
        for name in ("drag_coeff", "swirl_coeff", "noise_scale",
                     "agitation_gain", "agitation_decay"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be non-negative")


@dataclass(frozen=True)
class Pest:
    """Read-only view of one pest; scenes store the data as arrays."""

    id: int
    position: tuple[float, float]
    velocity: tuple[float, float]
    radius: float
    z_rank: int


@dataclass
class StickState:
    """The stirring stick while it is inside the water."""

    position: np.ndarray
    velocity: np.ndarray
    radius: float = 1.0

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=float)
        self.velocity = np.asarray(self.velocity, dtype=float)


class Scene:
    """Full simulated state of the trap at one instant.

    Pest data lives in flat arrays (positions, velocities, radii,
    z-ranks, ids) for stepping speed; ``pests`` materializes per-pest
    views when convenient.  A scene owns its process-noise generator,
    so identical seeds replay bit-identically.
    """

    def __init__(self, arena: ArenaSpec, positions: np.ndarray, radii: np.ndarray,
                 z_rank: np.ndarray, ids: np.ndarray,
                 rng: np.random.Generator, agitation: float = 0.0, time: float = 0.0):
        self.arena = arena
        self.positions = np.asarray(positions, dtype=float)
        self.velocities = np.zeros_like(self.positions)
        self.radii = np.asarray(radii, dtype=float)
        self.z_rank = np.asarray(z_rank, dtype=int)
        self.ids = np.asarray(ids, dtype=int)
        self.agitation = float(agitation)
        self.time = float(time)
        self.rng = rng
        if len(set(self.z_rank.tolist())) != len(self.z_rank):
            raise ParameterError("z_rank values must be unique within a scene")
        # pest radii are constant over a scene's lifetime, so the annulus
        # bounds can be cached for the stepping hot path
        self._r_out = arena.trap_radius - self.radii
        self._r_in = arena.column_radius + self.radii
        self._r_out2 = self._r_out**2
        self._r_in2 = self._r_in**2

    @property
    def n_pests(self) -> int:
        return len(self.positions)

    @property
    def pests(self) -> list[Pest]:
        return [
            Pest(
                id=int(self.ids[i]),
                position=(float(self.positions[i, 0]), float(self.positions[i, 1])),
                velocity=(float(self.velocities[i, 0]), float(self.velocities[i, 1])),
                radius=float(self.radii[i]),
                z_rank=int(self.z_rank[i]),
            )
            for i in range(self.n_pests)
        ]

    def copy(self) -> "Scene":
        dup = Scene(
            self.arena,
            self.positions.copy(),
            self.radii.copy(),
            self.z_rank.copy(),
            self.ids.copy(),
            copy.deepcopy(self.rng),
            agitation=self.agitation,
            time=self.time,
        )
        dup.velocities = self.velocities.copy()
        return dup

    def kinetic_energy(self) -> float:
        return float(0.5 * np.sum(self.velocities**2))


def _pair_distance_for_overlap(fraction: float, radius: float) -> float:
    """Centre distance giving a lens/disc area ratio of ``fraction``.

    For equal discs the covered fraction is
    (2/pi)(acos(u) - u sqrt(1 - u^2)) with u = d / 2r; invert by
    bisection (the function is strictly decreasing in u).
    """
    if not 0.0 < fraction < 1.0:
        raise ParameterError(f"overlap fraction must be in (0, 1), got {fraction}")
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        f = (2.0 / math.pi) * (math.acos(mid) - mid * math.sqrt(1.0 - mid * mid))
        if f > fraction:
            lo = mid
        else:
            hi = mid
    return 2.0 * radius * 0.5 * (lo + hi)


def _sample_in_disc(rng: np.random.Generator, center: np.ndarray, radius: float) -> np.ndarray:
    r = radius * math.sqrt(rng.uniform())
    a = rng.uniform(0.0, 2.0 * math.pi)
    return center + r * np.array([math.cos(a), math.sin(a)])


def _place_pairs(rng: np.random.Generator, center: np.ndarray, inner_radius: float,
                 n_pairs: int, frac_range: tuple[float, float], pest_radius: float,
                 cell_index: int) -> list[np.ndarray]:
    """Place overlapping pairs so only partners touch each other."""
    placed: list[np.ndarray] = []
    clearance = 2.0 * pest_radius + 0.02
    for _ in range(n_pairs):
        for attempt in range(PLACEMENT_BUDGET):
            frac = rng.uniform(*frac_range)
            d = _pair_distance_for_overlap(frac, pest_radius)
            a = _sample_in_disc(rng, center, inner_radius)
            ang = rng.uniform(0.0, 2.0 * math.pi)
            b = a + d * np.array([math.cos(ang), math.sin(ang)])
            if np.linalg.norm(b - center) > inner_radius:
                continue
            if placed and min(
                min(np.linalg.norm(a - p), np.linalg.norm(b - p)) for p in placed
            ) < clearance:
                continue
            placed.extend([a, b])
            break
        else:
            raise InitializationError(
                f"cell {cell_index}: cannot place {n_pairs} overlapping pairs "
                f"at fraction {frac_range} within the cell"
            )
    return placed


def _place_separated(rng: np.random.Generator, center: np.ndarray, inner_radius: float,
                     count: int, pest_radius: float, cell_index: int) -> list[np.ndarray]:
    placed: list[np.ndarray] = []
    clearance = 2.0 * pest_radius + 1e-3
    for _ in range(count):
        for attempt in range(PLACEMENT_BUDGET):
            p = _sample_in_disc(rng, center, inner_radius)
            if placed and min(np.linalg.norm(p - q) for q in placed) < clearance:
                continue
            placed.append(p)
            break
        else:
            raise InitializationError(
                f"cell {cell_index}: cannot place {count} non-overlapping pests"
            )
    return placed


def init_scene(density: Density, template: TemplateSpec, arena: ArenaSpec,
               seed: int, pest_radius: float = DEFAULT_PEST_RADIUS) -> Scene:
    """Arrange pests on the template at the requested crowding level.

    Low: all pests separated.  Medium: pairs with slight mutual overlap
    (covered fraction 0.1-0.3).  High: tight pairs with covered
    fraction >= 0.5, so at least half of all pests start occluded.
    Placement is deterministic given the seed; z-order is a random
    permutation.
    """
    inner = template.cell_radius - pest_radius
    if inner <= 0.0:
        raise InitializationError(
            f"cell radius {template.cell_radius} cannot contain pests of radius {pest_radius}"
        )
    centers = template.region_centers()
    max_reach = template.ring_radius + inner
    min_reach = template.ring_radius - inner
    if max_reach > arena.trap_radius - pest_radius or min_reach < arena.column_radius + pest_radius:
        raise InitializationError("template cells extend outside the trap annulus")

    rng = np.random.default_rng(seed)
    per_region = density.pests_per_region
    positions: list[np.ndarray] = []
    for i, c in enumerate(centers):
        if density is Density.LOW:
            positions.extend(_place_separated(rng, c, inner, per_region, pest_radius, i))
        elif density is Density.MEDIUM:
            positions.extend(_place_pairs(rng, c, inner, per_region // 2,
                                          (0.12, 0.28), pest_radius, i))
        else:
            positions.extend(_place_pairs(rng, c, inner, per_region // 2,
                                          (0.55, 0.75), pest_radius, i))

    n = len(positions)
    return Scene(
        arena=arena,
        positions=np.array(positions),
        radii=np.full(n, pest_radius),
        z_rank=rng.permutation(n),
        ids=np.arange(n),
        rng=rng,
    )


def stick_velocity_field(stick: StickState, flow: FlowParams,
                         query: np.ndarray) -> np.ndarray:
    """Water velocity induced at ``query`` points by the moving stick.

    A Gaussian kernel of the distance to the stick scales the stick
    velocity plus a perpendicular swirl component, giving transport
    along the stroke and circulation around it.
    """
    q = np.atleast_2d(np.asarray(query, dtype=float))
    delta = q - stick.position
    dist2 = np.einsum("ij,ij->i", delta, delta)
    gain = np.exp(-dist2 / (2.0 * flow.kernel_sigma**2))
    vx, vy = stick.velocity
    base = np.array([vx - flow.swirl_coeff * vy, vy + flow.swirl_coeff * vx])
    out = gain[:, None] * base[None, :]
    return out if np.asarray(query).ndim == 2 else out[0]


def step(scene: Scene, stick: StickState | None, flow: FlowParams, dt: float) -> Scene:
    """Advance the scene by ``dt`` seconds (in place; returns the scene).

    Velocities relax toward the stick-induced field, take isotropic
    kicks with standard deviation ``noise_scale * agitation * sqrt(dt)``
    per axis, positions integrate explicitly, and pests are projected
    back into the annulus with radial velocity reflection.  Pests inside
    the stick disc are pushed out along the contact normal.  Agitation
    decays exponentially and grows with stick speed.
    """
    if not 0.0 < dt <= 0.1:
        raise ParameterError(f"dt must be in (0, 0.1], got {dt}")

    pos = scene.positions
    vel = scene.velocities
    n = scene.n_pests
    drag = flow.drag_coeff * dt

    if stick is not None:
        delta = pos - stick.position
        d2 = np.einsum("ij,ij->i", delta, delta)
        gain = np.exp(d2 * (-0.5 / (flow.kernel_sigma * flow.kernel_sigma)))
        svx, svy = float(stick.velocity[0]), float(stick.velocity[1])
        base = np.array([svx - flow.swirl_coeff * svy, svy + flow.swirl_coeff * svx])
        vel += drag * (gain[:, None] * base - vel)
    else:
        vel *= 1.0 - drag
    sigma = flow.noise_scale * scene.agitation * math.sqrt(dt)
    vel += sigma * scene.rng.standard_normal((n, 2))
    pos += vel * dt

    if stick is not None:
        delta = pos - stick.position
        sd2 = np.einsum("ij,ij->i", delta, delta)
        contact = stick.radius + scene.radii
        hit = sd2 < contact * contact
        if hit.any():
            dist = np.sqrt(sd2[hit])
            safe = np.where(dist > 1e-12, dist, 1.0)
            normal = np.where(dist[:, None] > 1e-12, delta[hit] / safe[:, None], [[1.0, 0.0]])
            pos[hit] = stick.position + normal * contact[hit, None]

    r2 = np.einsum("ij,ij->i", pos, pos)
    for mask, bound, outward in ((r2 > scene._r_out2, scene._r_out, True),
                                 (r2 < scene._r_in2, scene._r_in, False)):
        if mask.any():
            radius = np.sqrt(r2[mask])
            degenerate = radius < 1e-12
            if degenerate.any():
                # a pest exactly on the column axis gets an arbitrary normal
                sub = pos[mask]
                sub[degenerate] = (1.0, 0.0)
                pos[mask] = sub
                radius = np.where(degenerate, 1.0, radius)
            normal = pos[mask] / radius[:, None]
            pos[mask] = normal * bound[mask, None]
            v_rad = np.einsum("ij,ij->i", vel[mask], normal)
            moving_in = v_rad > 0.0 if outward else v_rad < 0.0
            if moving_in.any():
                idx = np.flatnonzero(mask)[moving_in]
                vel[idx] -= 2.0 * v_rad[moving_in, None] * normal[moving_in]

    scene.agitation *= math.exp(-flow.agitation_decay * dt)
    if stick is not None:
        scene.agitation += flow.agitation_gain * math.hypot(
            float(stick.velocity[0]), float(stick.velocity[1])
        ) * dt
    scene.time += dt
    return scene


def agitation_energy(scene: Scene) -> float:
    """Current water-motion energy proxy; clarity degrades as it rises."""
    return scene.agitation


def format_snapshot(scene: Scene) -> str:
    """Plain-text dump: header with time/agitation, then id x y z_rank rows."""
    lines = [f"# t={fmt(scene.time)} agitation={fmt(scene.agitation)}"]
    for i in range(scene.n_pests):
        lines.append(
            f"{int(scene.ids[i])} {fmt(scene.positions[i, 0])} "
            f"{fmt(scene.positions[i, 1])} {int(scene.z_rank[i])}"
        )
    return "\n".join(lines) + "\n"


def write_snapshot(scene: Scene, out_file) -> None:
    out_file.write(format_snapshot(scene))
