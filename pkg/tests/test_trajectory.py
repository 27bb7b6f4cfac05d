import io
import math

import numpy as np
import pytest

from stirlab import (ArenaSpec, GenerationError, ParameterError, Path,
                     TrajectoryKind, generate, path_length, time_parameterize,
                     validate)
from stirlab.trajectory import PathCursor, write_waypoints

from conftest import shoelace_area

ALL_KINDS = list(TrajectoryKind)


def test_circle_geometry(arena):
    path = generate(TrajectoryKind.CIRCLE, arena)
    assert path.closed
    analytic = 2.0 * math.pi * arena.reference_radius
    assert abs(path_length(path) - analytic) / analytic < 1e-4
    radii = np.linalg.norm(path.waypoints, axis=1)
    assert np.allclose(radii, 8.0, atol=1e-9)
    assert np.allclose(path.waypoints[0], [8.0, 0.0])


def test_square_geometry(arena):
    path = generate(TrajectoryKind.SQUARE, arena)
    side = path_length(path) / 4.0
    assert abs(side - 8.0 * math.sqrt(2.0)) < 1e-9
    report = validate(path, arena)
    assert abs(report.min_center_distance - 8.0 / math.sqrt(2.0)) < 1e-9
    assert report.min_center_distance > 3.0
    assert not report.violation


def test_triangle_geometry(arena):
    path = generate(TrajectoryKind.TRIANGLE, arena)
    side = path_length(path) / 3.0
    assert abs(side - 8.0 * math.sqrt(3.0)) < 1e-9
    # apothem of the inscribed equilateral triangle is half the circumradius
    report = validate(path, arena)
    assert abs(report.min_center_distance - 4.0) < 1e-9


def test_spiral_geometry(arena):
    path = generate(TrajectoryKind.SPIRAL, arena)
    radii = np.linalg.norm(path.waypoints, axis=1)
    assert abs(radii[0] - 3.0) < 1e-9
    assert abs(radii[-1] - 8.0) < 1e-9
    # radius grows linearly with angle: one full turn adds (8-3)/3 cm
    angles = np.unwrap(np.arctan2(path.waypoints[:, 1], path.waypoints[:, 0]))
    turns = -angles / (2.0 * math.pi)  # clockwise traversal
    assert abs(turns[-1] - 3.0) < 1e-9
    assert np.max(np.abs(radii - (3.0 + turns * (5.0 / 3.0)))) < 1e-9
    assert not path.closed
    assert not np.allclose(path.waypoints[0], [8.0, 0.0])


def test_four_small_circles_against_reconstruction(arena):
    """Independent re-derivation of the entry points and chord lengths."""
    path = generate(TrajectoryKind.FOUR_SMALL_CIRCLES, arena)
    assert path.closed
    assert np.allclose(path.waypoints[0], [8.0, 0.0])

    # brute-force entries: densely sample each circle, walk the
    # entered-nearest-previous-exit rule
    ring = 7.0
    centers = [np.array([ring * math.cos(a), ring * math.sin(a)])
               for a in (0.0, -math.pi / 2, -math.pi, -1.5 * math.pi)]
    theta = np.linspace(0.0, 2.0 * math.pi, 400_000, endpoint=False)
    entries = [np.array([8.0, 0.0])]
    for k in range(1, 4):
        pts = centers[k] + np.column_stack([np.cos(theta), np.sin(theta)])
        nearest = pts[np.argmin(np.linalg.norm(pts - entries[-1], axis=1))]
        entries.append(nearest)
    chords = sum(
        np.linalg.norm(entries[(k + 1) % 4] - entries[k]) for k in range(4)
    )
    expected = 4.0 * 2.0 * math.pi * 1.0 + chords
    # arcs are polylines, so allow their inscribed-polygon shortfall
    assert abs(path_length(path) - expected) < 0.02

    radii = np.linalg.norm(path.waypoints, axis=1)
    assert radii.max() <= 8.0 + 1e-9
    assert radii.min() >= 3.0 - 1e-9


def test_random_lines_connectivity_and_seeding(arena):
    a = generate(TrajectoryKind.RANDOM_LINES, arena, seed=5)
    b = generate(TrajectoryKind.RANDOM_LINES, arena, seed=5)
    c = generate(TrajectoryKind.RANDOM_LINES, arena, seed=6)
    assert np.array_equal(a.waypoints, b.waypoints)
    assert not np.array_equal(a.waypoints, c.waypoints)
    assert np.allclose(a.waypoints[0], [8.0, 0.0])
    assert not a.closed
    # one continuous polyline: consecutive points stay within the spacing
    steps = np.linalg.norm(np.diff(a.waypoints, axis=0), axis=1)
    assert steps.max() <= 0.1 + 1e-9


def test_random_lines_line_count(arena):
    few = generate(TrajectoryKind.RANDOM_LINES, arena, seed=2, n_lines=3, spacing=100.0)
    assert len(few.waypoints) == 4  # no subdivision at huge spacing


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_exclusion_zone_over_seeds(kind, arena):
    seeds = range(100) if kind is TrajectoryKind.RANDOM_LINES else range(3)
    for seed in seeds:
        report = validate(generate(kind, arena, seed=seed), arena)
        assert not report.violation
        assert report.min_center_distance >= 3.0 - 1e-9


@pytest.mark.parametrize("kind", ALL_KINDS)
def test_shared_start_point(kind, arena):
    path = generate(kind, arena, seed=0)
    if kind is TrajectoryKind.SPIRAL:
        assert np.allclose(path.waypoints[0], [3.0, 0.0], atol=1e-12)
    else:
        assert np.allclose(path.waypoints[0], [8.0, 0.0], atol=1e-12)


@pytest.mark.parametrize(
    "kind",
    [TrajectoryKind.CIRCLE, TrajectoryKind.SQUARE, TrajectoryKind.TRIANGLE,
     TrajectoryKind.FOUR_SMALL_CIRCLES],
)
def test_closed_paths_run_clockwise(kind, arena):
    path = generate(kind, arena)
    assert path.closed
    assert shoelace_area(path.waypoints) < 0.0


def test_validate_catches_center_crossing(arena):
    path = Path(np.array([[-4.0, 0.0], [4.0, 0.0]]), TrajectoryKind.RANDOM_LINES)
    report = validate(path, arena)
    assert report.min_center_distance == 0.0
    assert report.violation


def test_path_length_simple_and_additive(arena):
    two = Path(np.array([[0.0, 3.0], [0.0, 8.0]]), TrajectoryKind.RANDOM_LINES)
    assert path_length(two) == 5.0
    pts = np.array([[3.0, 0.0], [5.0, 1.0], [4.0, 4.0], [0.0, 6.0]])
    whole = Path(pts, TrajectoryKind.RANDOM_LINES)
    first = Path(pts[:3], TrajectoryKind.RANDOM_LINES)
    second = Path(pts[2:], TrajectoryKind.RANDOM_LINES)
    total = path_length(first) + path_length(second)
    assert abs(path_length(whole) - total) < 1e-12


def test_circle_length_converges_with_sampling(arena):
    analytic = 2.0 * math.pi * 8.0
    coarse = generate(TrajectoryKind.CIRCLE, arena, spacing=analytic / 100)
    fine = generate(TrajectoryKind.CIRCLE, arena, spacing=analytic / 1000)
    err_coarse = abs(path_length(coarse) - analytic) / analytic
    err_fine = abs(path_length(fine) - analytic) / analytic
    assert err_fine < err_coarse
    assert err_fine < 1e-4


def test_generation_failure_reports_kind(arena):
    with pytest.raises(GenerationError) as exc:
        generate(TrajectoryKind.RANDOM_LINES, arena, seed=0, max_retries=0)
    assert "random_lines" in str(exc.value)


def test_path_construction_errors():
    with pytest.raises(ParameterError):
        Path(np.array([[1.0, 0.0]]), TrajectoryKind.CIRCLE)
    with pytest.raises(ParameterError):
        Path(np.array([[1.0, 0.0], [1.0, 0.0]]), TrajectoryKind.CIRCLE)


def test_time_parameterize_straight_path():
    path = Path(np.array([[0.0, 3.0], [0.0, 8.0]]), TrajectoryKind.RANDOM_LINES)
    timed = time_parameterize(path, 0.5, v_max=20.0, dt=0.1)
    assert len(timed) == 6
    assert timed.traversal_time == 0.5
    assert np.allclose(timed.times, np.arange(6) * 0.1)


def test_time_parameterize_circle_lap(arena):
    path = generate(TrajectoryKind.CIRCLE, arena)
    timed = time_parameterize(path, 1.0, v_max=20.0, dt=0.02)
    assert abs(timed.traversal_time - 2.51327) < 2.51327 * 1e-4


def test_time_parameterize_halving_speed_doubles_time(arena):
    for kind in ALL_KINDS:
        path = generate(kind, arena, seed=1)
        fast = time_parameterize(path, 0.5, dt=0.02)
        slow = time_parameterize(path, 0.25, dt=0.02)
        assert slow.traversal_time == 2.0 * fast.traversal_time


def test_time_parameterize_constant_arc_speed(arena):
    path = generate(TrajectoryKind.SPIRAL, arena)
    timed = time_parameterize(path, 0.5, v_max=20.0, dt=0.02, duration=20.0)
    spacing = np.diff(timed.arc_positions)
    assert np.all(np.abs(spacing / (0.5 * 20.0 * 0.02) - 1.0) < 1e-6)
    assert np.all(np.diff(timed.times) > 0)


def test_time_parameterize_loops_open_paths(arena):
    path = generate(TrajectoryKind.SPIRAL, arena)
    length = path_length(path)
    timed = time_parameterize(path, 1.0, v_max=20.0, dt=0.02, duration=15.0)
    assert timed.arc_positions[-1] > length  # wrapped at least once
    # wrapped samples still sit inside the reference circle
    assert np.linalg.norm(timed.positions, axis=1).max() <= 8.0 + 1e-9


def test_time_parameterize_rejects_bad_parameters(arena):
    path = generate(TrajectoryKind.CIRCLE, arena)
    with pytest.raises(ParameterError):
        time_parameterize(path, 0.0, dt=0.1)
    with pytest.raises(ParameterError):
        time_parameterize(path, 1.5, dt=0.1)
    with pytest.raises(ParameterError):
        time_parameterize(path, 0.5, dt=0.0)


def test_cursor_wraps_closed_path(arena):
    path = generate(TrajectoryKind.CIRCLE, arena)
    cursor = PathCursor(path, loop=True)
    start = cursor.position(0.0)
    wrapped = cursor.position(cursor.cycle_length)
    assert np.allclose(start, wrapped, atol=1e-12)


def test_waypoint_export_format(arena):
    path = generate(TrajectoryKind.CIRCLE, arena)
    timed = time_parameterize(path, 0.5, dt=0.5)
    buf = io.StringIO()
    write_waypoints(timed, TrajectoryKind.CIRCLE, 0, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# kind=circle seed=0 speed_scale=0.5"
    assert len(lines) == 1 + len(timed)
    x, y, t = (float(v) for v in lines[1].split())
    assert (x, y, t) == (8.0, 0.0, 0.0)
