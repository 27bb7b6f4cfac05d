import io
import math

import numpy as np
import pytest

from stirlab import (ArenaSpec, Density, FlowParams, InitializationError,
                     ParameterError, StickState, TemplateSpec, TrajectoryKind,
                     agitation_energy, generate, init_scene, step,
                     stick_velocity_field)
from stirlab.fluidsim import format_snapshot
from stirlab.trajectory import PathCursor

from conftest import lens_fraction

FLOW = FlowParams()


def pairwise_distances(positions):
    diff = positions[:, None, :] - positions[None, :, :]
    return np.linalg.norm(diff, axis=2)


def test_low_density_no_overlap(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=0)
    assert scene.n_pests == 16
    d = pairwise_distances(scene.positions)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 2 * 0.4


def test_high_density_severe_occlusion(arena, template):
    scene = init_scene(Density.HIGH, template, arena, seed=0)
    assert scene.n_pests == 48
    d = pairwise_distances(scene.positions)
    np.fill_diagonal(d, np.inf)
    # per-pest covered fraction, via the analytic lens formula against
    # whichever other pests it touches (pairs never chain by construction)
    severe = 0
    for i in range(48):
        touching = np.flatnonzero(d[i] < 0.8)
        frac = sum(lens_fraction(d[i][j], 0.4) for j in touching)
        if frac >= 0.5:
            severe += 1
    assert severe >= 24


def test_medium_density_slight_occlusion(arena, template):
    scene = init_scene(Density.MEDIUM, template, arena, seed=3)
    assert scene.n_pests == 32
    d = pairwise_distances(scene.positions)
    np.fill_diagonal(d, np.inf)
    partners = d.min(axis=1)
    for dist in partners:
        assert 0.1 <= lens_fraction(dist, 0.4) <= 0.3


def test_medium_single_region_containment(arena):
    template = TemplateSpec(n_regions=1)
    scene = init_scene(Density.MEDIUM, template, arena, seed=1)
    assert scene.n_pests == 4
    center = template.region_centers()[0]
    dist = np.linalg.norm(scene.positions - center, axis=1)
    assert np.all(dist <= template.cell_radius - 0.4 + 1e-12)


def test_init_scene_is_deterministic(arena, template):
    a = init_scene(Density.HIGH, template, arena, seed=42)
    b = init_scene(Density.HIGH, template, arena, seed=42)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.z_rank, b.z_rank)


def test_init_scene_identity_fields(arena, template):
    scene = init_scene(Density.MEDIUM, template, arena, seed=9)
    assert sorted(scene.ids.tolist()) == list(range(32))
    assert sorted(scene.z_rank.tolist()) == list(range(32))


def test_init_scene_impossible_template(arena):
    # a cell barely larger than one pest cannot hold six
    template = TemplateSpec(n_regions=1, cell_radius=0.85, ring_radius=5.5)
    with pytest.raises(InitializationError):
        init_scene(Density.HIGH, template, arena, seed=0)


def test_field_zero_for_resting_stick():
    stick = StickState(np.array([5.0, 0.0]), np.array([0.0, 0.0]))
    q = np.array([[4.0, 1.0], [5.0, 0.0], [-3.0, 2.0]])
    assert np.all(stick_velocity_field(stick, FLOW, q) == 0.0)


def test_field_peak_equals_stick_velocity():
    flow = FlowParams(swirl_coeff=0.0)
    stick = StickState(np.array([5.0, 0.0]), np.array([3.0, -2.0]))
    out = stick_velocity_field(stick, flow, np.array([5.0, 0.0]))
    assert np.allclose(out, [3.0, -2.0], atol=1e-15)


def test_field_two_sigma_value():
    flow = FlowParams(swirl_coeff=0.0)
    stick = StickState(np.array([0.0, 0.0]), np.array([10.0, 0.0]))
    out = stick_velocity_field(stick, flow, np.array([2 * flow.kernel_sigma, 0.0]))
    assert abs(out[0] - 10.0 * math.exp(-2.0)) < 1e-12
    assert out[1] == 0.0


def test_field_linear_in_stick_speed():
    stick1 = StickState(np.array([1.0, 2.0]), np.array([4.0, -1.0]))
    stick3 = StickState(np.array([1.0, 2.0]), 3.0 * np.array([4.0, -1.0]))
    q = np.array([[0.0, 0.0], [3.0, 3.0]])
    f1 = stick_velocity_field(stick1, FLOW, q)
    f3 = stick_velocity_field(stick3, FLOW, q)
    assert np.all(np.abs(f3 - 3.0 * f1) <= 1e-12 * np.abs(f3).max())


def test_step_fixed_point(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=4)
    before_pos = scene.positions.copy()
    t0 = scene.time
    step(scene, None, FLOW, 0.02)
    assert np.array_equal(scene.positions, before_pos)
    assert np.all(scene.velocities == 0.0)
    assert scene.time > t0


def test_agitation_decay_closed_form(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=4)
    scene.agitation = 1.0
    for _ in range(500):
        step(scene, None, FLOW, 0.02)
    expected = math.exp(-0.15 * 10.0)
    assert abs(scene.agitation - expected) < 1e-9 * expected
    assert agitation_energy(scene) == scene.agitation


def test_agitation_rises_with_stirring_and_settles(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=4)
    stick = StickState(np.array([7.0, 0.0]), np.array([0.0, -10.0]))
    step(scene, stick, FLOW, 0.02)
    assert scene.agitation > 0.0
    for _ in range(3000):
        step(scene, None, FLOW, 0.02)
    assert scene.agitation < 0.01


def test_conservation_and_containment_long_run(arena, template):
    scene = init_scene(Density.HIGH, template, arena, seed=8)
    ids = scene.ids.copy()
    path = generate(TrajectoryKind.CIRCLE, arena)
    cursor = PathCursor(path)
    arc = 0.0
    for k in range(10_000):
        prev = cursor.position(arc)
        arc += 10.0 * 0.02
        nxt = cursor.position(arc)
        stick = StickState(nxt, (nxt - prev) / 0.02)
        step(scene, stick, FLOW, 0.02)
    assert scene.n_pests == 48
    assert np.array_equal(scene.ids, ids)
    r = np.linalg.norm(scene.positions, axis=1)
    assert np.all(r <= arena.trap_radius - scene.radii + 1e-9)
    assert np.all(r >= arena.column_radius + scene.radii - 1e-9)


def test_step_rejects_bad_dt(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=0)
    for dt in (0.0, -0.01, 0.11):
        with pytest.raises(ParameterError):
            step(scene, None, FLOW, dt)


def test_settling_energy_never_increases(arena, template):
    scene = init_scene(Density.MEDIUM, template, arena, seed=5)
    scene.velocities[:] = np.random.default_rng(1).normal(0, 3.0, scene.velocities.shape)
    scene.agitation = 0.0
    last = scene.kinetic_energy()
    for _ in range(200):
        step(scene, None, FLOW, 0.02)
        now = scene.kinetic_energy()
        assert now <= last + 1e-12
        last = now


def test_step_determinism_bitwise(arena, template):
    def run():
        scene = init_scene(Density.HIGH, template, arena, seed=77)
        stick = StickState(np.array([6.0, 2.0]), np.array([-5.0, 5.0]))
        for _ in range(300):
            step(scene, stick, FLOW, 0.02)
        return scene

    a, b = run(), run()
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.velocities, b.velocities)
    assert a.agitation == b.agitation


def test_scene_copy_is_independent(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=3)
    scene.agitation = 0.5
    dup = scene.copy()
    step(scene, None, FLOW, 0.02)
    step(dup, None, FLOW, 0.02)
    assert np.array_equal(scene.positions, dup.positions)
    step(scene, None, FLOW, 0.02)
    assert scene.time != dup.time


def mean_nn_distance(positions):
    d = pairwise_distances(positions)
    np.fill_diagonal(d, np.inf)
    return float(d.min(axis=1).mean())


@pytest.mark.slow
def test_stirring_disperses_high_density(arena, template):
    """13 s of stirring must spread the initial clusters, every kind."""
    for kind in TrajectoryKind:
        path = generate(kind, arena, seed=123)
        cursor = PathCursor(path)
        gains = []
        for seed in range(50):
            scene = init_scene(Density.HIGH, template, arena, seed=seed)
            initial = mean_nn_distance(scene.positions)
            arc = 0.0
            for k in range(650):  # 13 s at dt = 0.02
                prev = cursor.position(arc)
                arc += 10.0 * 0.02
                nxt = cursor.position(arc)
                step(scene, StickState(nxt, (nxt - prev) / 0.02), FLOW, 0.02)
            gains.append(mean_nn_distance(scene.positions) - initial)
        assert np.mean(gains) > 0.0, kind


def test_snapshot_format(arena, template):
    scene = init_scene(Density.LOW, template, arena, seed=2)
    text = format_snapshot(scene)
    lines = text.splitlines()
    assert lines[0].startswith("# t=0.0 agitation=0.0")
    assert len(lines) == 1 + scene.n_pests
    first = lines[1].split()
    assert len(first) == 4
    assert int(first[0]) == 0
