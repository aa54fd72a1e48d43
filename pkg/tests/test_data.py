import numpy as np
import pytest
from scipy import stats

from sparsedlm.data import Dataset, detrend_running_line, load_csv, preprocess, save_csv, standardize
from sparsedlm.errors import InputError


def _write(path, text):
    path.write_text(text)
    return path


def test_load_three_columns(tmp_path):
    rng = np.random.default_rng(0)
    y = rng.normal(size=(285, 3))
    lines = ["a,b,c"] + [",".join(repr(float(v)) for v in row) for row in y]
    data = load_csv(_write(tmp_path / "d.csv", "\n".join(lines) + "\n"))
    assert (data.T, data.m) == (285, 3)
    assert data.labels == ["a", "b", "c"]
    np.testing.assert_array_equal(data.series, y)
    np.testing.assert_array_equal(data.regressors, np.ones((285, 3)))


def test_na_cell_names_location(tmp_path):
    path = _write(tmp_path / "d.csv", "a,b\n1,2\n3,NA\n")
    with pytest.raises(InputError, match=r"row 3.*'b'"):
        load_csv(path)


def test_inf_rejected(tmp_path):
    with pytest.raises(InputError, match="non-finite"):
        load_csv(_write(tmp_path / "d.csv", "a\n1\ninf\n"))


def test_ragged_row(tmp_path):
    with pytest.raises(InputError, match="row 3"):
        load_csv(_write(tmp_path / "d.csv", "a,b\n1,2\n3\n"))


def test_missing_column_and_file(tmp_path):
    path = _write(tmp_path / "d.csv", "a,b\n1,2\n")
    with pytest.raises(InputError, match="missing column"):
        load_csv(path, series=["a", "z"])
    with pytest.raises(InputError, match="no such file"):
        load_csv(tmp_path / "nope.csv")


def test_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    data = Dataset(series=rng.normal(size=(40, 3)) * 1e3, regressors=rng.random((40, 3)), labels=["v1", "v2", "v3"],
                   sampling_interval=2.5, metadata={"seed": 3})
    save_csv(data, tmp_path / "rt.csv")
    back = load_csv(tmp_path / "rt.csv")
    np.testing.assert_allclose(back.series, data.series, rtol=0, atol=1e-12)
    np.testing.assert_allclose(back.regressors, data.regressors, rtol=0, atol=1e-12)
    assert back.labels == data.labels
    assert back.sampling_interval == 2.5 and back.metadata == {"seed": 3}


def test_dataset_rejects_nonfinite():
    with pytest.raises(InputError, match="row 2, column 1"):
        Dataset(series=np.array([[1.0], [np.nan]]))


def test_detrend_line_is_removed():
    t = np.arange(50.0)
    np.testing.assert_allclose(detrend_running_line(3.0 - 0.2 * t, k=50), 0.0, atol=1e-10)
    np.testing.assert_allclose(detrend_running_line(3.0 - 0.2 * t, k=7), 0.0, atol=1e-10)


def test_detrend_constant():
    np.testing.assert_allclose(detrend_running_line(np.full(30, 4.2), k=5), 0.0, atol=1e-12)


def test_detrend_matches_local_ols():
    rng = np.random.default_rng(2)
    y = rng.normal(size=40)
    k = 9
    out = detrend_running_line(y, k)
    for t in (0, 3, 20, 39):
        start = min(max(t - (k - 1) // 2, 0), 40 - k)
        idx = np.arange(start, start + k)
        fit = np.polyfit(idx, y[idx], 1)
        assert out[t] == pytest.approx(y[t] - np.polyval(fit, t), abs=1e-10)


def test_detrend_noisy_line_leaves_no_trend():
    rng = np.random.default_rng(3)
    T = 300
    t = np.arange(T)
    r = detrend_running_line(5 + 0.05 * t + rng.standard_normal(T), k=30)
    assert abs(r.mean()) < 3 / np.sqrt(T)
    assert stats.linregress(t, r).pvalue > 0.01


def test_detrend_k_range():
    with pytest.raises(InputError):
        detrend_running_line(np.zeros(10), k=2)
    with pytest.raises(InputError):
        detrend_running_line(np.zeros(10), k=11)


def test_standardize_and_preprocess():
    rng = np.random.default_rng(4)
    y = rng.normal(3.0, 2.0, size=(100, 2))
    z = standardize(y)
    np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(z.std(axis=0), 1.0)
    out = preprocess(Dataset(series=y), k=30)
    assert out.detrended and out.metadata["standardized"] and out.metadata["detrend_k"] == 30
    np.testing.assert_allclose(out.series.std(axis=0), 1.0)
