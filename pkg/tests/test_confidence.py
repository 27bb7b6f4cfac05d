import numpy as np
import pytest

from stirlab import (CoefficientFileError, FitError, ParameterError, calibrate,
                     design_row, fit, load, predict, save)
from stirlab.confidence import (CROSS_PAIRS, N_TERMS, Coefficients, design_matrix,
                                predict_raw, raw_basis_vector, term_names)
from stirlab.perception import FeatureVector


def random_raw_coefficients(rng):
    """A generator surface that keeps targets safely inside [0, 1]."""
    vec = rng.uniform(-1.0, 1.0, N_TERMS) * 0.01
    vec[0] = rng.uniform(0.4, 0.6)
    return vec


def generate_rows(rng, vec, n, noise=0.0):
    x = rng.uniform(0.0, 1.0, size=(n, 6))
    y = design_matrix(x) @ vec
    if noise:
        y = y + rng.normal(0.0, noise, size=n)
    return x, y


def test_design_row_basics():
    assert N_TERMS == 28
    assert len(CROSS_PAIRS) == 15
    zeros = design_row(np.zeros(6))
    assert zeros[0] == 1.0
    assert np.all(zeros[1:] == 0.0)
    ones = design_row(np.ones(6))
    assert np.all(ones == 1.0)
    assert len(ones) == 28


def test_design_row_ordering():
    x = np.array([2.0, 3.0, 5.0, 7.0, 11.0, 13.0])
    row = design_row(x)
    assert np.array_equal(row[1:7], x)
    assert np.array_equal(row[7:13], x**2)
    assert row[13] == 2.0 * 3.0   # x1*x2 comes first
    assert row[-1] == 11.0 * 13.0  # x5*x6 comes last
    assert term_names()[13] == "x1*x2"


def test_design_row_accepts_feature_vector():
    fv = FeatureVector(0.5, 0.2, 1.0, 0.0, 1.0, 0.9)
    assert np.array_equal(design_row(fv), design_row(fv.as_array()))


def test_design_row_rejects_nonfinite():
    with pytest.raises(ParameterError):
        design_row(np.array([1.0, np.nan, 0.0, 0.0, 0.0, 0.0]))


def test_noiseless_recovery():
    rng = np.random.default_rng(101)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 500)
    coef = fit(x, y)
    recovered = raw_basis_vector(coef)
    assert np.max(np.abs(recovered - vec)) < 1e-6
    # predictions reproduce the generator on training points
    for i in range(0, 500, 50):
        assert abs(predict(coef, x[i]) - y[i]) < 1e-6


def test_raw_basis_consistency():
    """Raw-basis coefficients and the standardized model agree everywhere."""
    rng = np.random.default_rng(7)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 200)
    coef = fit(x, y)
    raw = raw_basis_vector(coef)
    for probe in rng.uniform(0, 1, size=(20, 6)):
        assert abs(predict_raw(coef, probe) - design_row(probe) @ raw) < 1e-10


def test_constant_target_fit():
    rng = np.random.default_rng(3)
    x = rng.uniform(0.0, 1.0, size=(100, 6))
    coef = fit(x, np.full(100, 0.37))
    assert abs(coef.beta0 - 0.37) < 1e-8
    assert np.max(np.abs(coef.vector[1:])) < 1e-8
    assert coef.fit_residual_std < 1e-8


def test_fit_requires_enough_rows():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(27, 6))
    with pytest.raises(FitError):
        fit(x, np.full(27, 0.5))


def test_fit_rejects_bad_targets():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(40, 6))
    with pytest.raises(ParameterError):
        fit(x, np.full(40, 1.2))


def test_fit_names_collinear_columns():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, size=(100, 6))
    x[:, 5] = x[:, 4]  # x6 duplicates x5
    with pytest.raises(FitError) as exc:
        fit(x, rng.uniform(0, 1, size=100))
    assert "x5" in str(exc.value) or "x6" in str(exc.value)


def test_fit_names_constant_column():
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 1, size=(100, 6))
    x[:, 2] = 0.5
    with pytest.raises(FitError) as exc:
        fit(x, rng.uniform(0, 1, size=100))
    assert "x3" in str(exc.value)


def test_predict_constant_and_clipping():
    mean, std = np.zeros(6), np.ones(6)
    flat = Coefficients.from_vector(
        np.concatenate([[0.5], np.zeros(27)]), 0.0, mean, std)
    high = Coefficients.from_vector(
        np.concatenate([[1.3], np.zeros(27)]), 0.0, mean, std)
    rng = np.random.default_rng(1)
    for x in rng.uniform(0, 1, size=(5, 6)):
        assert predict(flat, x) == 0.5
        assert predict(high, x) == 1.0
        assert predict_raw(high, x) == 1.3


def test_prediction_is_quadratic_along_lines():
    rng = np.random.default_rng(21)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 200)
    coef = fit(x, y)
    x0 = rng.uniform(0, 1, 6)
    d = rng.normal(size=6)
    ts = np.array([0.0, 0.5, 1.0])
    vals = [predict_raw(coef, x0 + t * d) for t in ts]
    poly = np.polyfit(ts, vals, 2)
    probe = 1.7
    assert abs(np.polyval(poly, probe) - predict_raw(coef, x0 + probe * d)) < 1e-9


def test_noisy_fit_holdout_rmse():
    rng = np.random.default_rng(303)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 500, noise=0.01)
    coef = fit(x, np.clip(y, 0.0, 1.0))
    x_test, y_test = generate_rows(rng, vec, 300)
    pred = np.array([predict(coef, xi) for xi in x_test])
    rmse = float(np.sqrt(np.mean((pred - y_test) ** 2)))
    assert rmse <= 0.02


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(99)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 100)
    coef = fit(x, y)
    coef.training_meta = "unit-test fit\nsecond line"
    path = tmp_path / "coef.txt"
    save(coef, path)
    loaded = load(path)
    assert np.array_equal(loaded.vector, coef.vector)
    assert np.array_equal(loaded.feature_mean, coef.feature_mean)
    assert np.array_equal(loaded.feature_std, coef.feature_std)
    assert loaded.fit_residual_std == coef.fit_residual_std
    assert loaded.training_meta == coef.training_meta
    # a second save of the loaded object is byte-identical
    path2 = tmp_path / "coef2.txt"
    save(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_load_rejects_wrong_version(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("stirlab-coef v9\n" + "0\n" * 40)
    with pytest.raises(CoefficientFileError) as exc:
        load(path)
    assert "stirlab-coef v1" in str(exc.value)


def test_load_rejects_wrong_count(tmp_path):
    rng = np.random.default_rng(12)
    vec = random_raw_coefficients(rng)
    x, y = generate_rows(rng, vec, 100)
    coef = fit(x, y)
    path = tmp_path / "coef.txt"
    save(coef, path)
    lines = path.read_text().splitlines()
    del lines[10]  # drop one coefficient line
    short = tmp_path / "short.txt"
    short.write_text("\n".join(lines) + "\n")
    with pytest.raises(CoefficientFileError):
        load(short)


def test_load_rejects_garbage_values(tmp_path):
    path = tmp_path / "bad.txt"
    lines = ["stirlab-coef v1", "0 0 0 0 0 0", "1 1 1 1 1 1"]
    lines += ["abc"] + ["0.0"] * 27 + ["0.0"]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CoefficientFileError):
        load(path)


@pytest.mark.slow
def test_calibrate_deterministic_and_well_fit():
    a = calibrate(n_frames=1500, seed=42)
    b = calibrate(n_frames=1500, seed=42)
    assert np.array_equal(a.vector, b.vector)
    assert a.training_meta == b.training_meta
    r2 = float(a.training_meta.split("holdout_r2=")[1].split()[0])
    assert r2 >= 0.6


def test_calibrate_too_few_frames_fails():
    with pytest.raises(FitError):
        calibrate(n_frames=10, seed=0)
