import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csatml import sim
from csatml.dataprep import (NormStats, build_dataset, chunk_matrix, chunk_offsets, chunk_trace,
                             clamp_outliers, compute_norm_stats, count_outliers, denormalize,
                             normalize, parse_line, read_dataset, write_dataset)


def brute_offsets(n, w):
    stride = 1 if w < 4 else w // 4
    out, o = [], 0
    while o + w <= n:
        out.append(o)
        o += stride
    return out


def test_offsets_w128():
    assert chunk_offsets(256, 128).tolist() == [0, 32, 64, 96, 128]


def test_single_chunk_when_n_equals_w():
    assert chunk_offsets(512, 512).tolist() == [0]


def test_chunk_count_10000_128():
    assert len(chunk_offsets(10000, 128)) == (10000 - 128) // 32 + 1 == 309
    assert len(brute_offsets(10000, 128)) == 309


def test_short_trace_rejected():
    with pytest.raises(ValueError, match="shorter"):
        chunk_offsets(100, 128)


def test_width_not_divisible_by_4_rejected():
    with pytest.raises(ValueError, match="divisible"):
        chunk_offsets(1000, 130)


def test_chunk_trace_windows():
    v = np.arange(300, dtype=float)
    chunks = chunk_trace(v, 128)
    assert [o for o, _ in chunks] == brute_offsets(300, 128)
    for o, c in chunks:
        assert np.array_equal(c, v[o:o + 128])
    assert np.array_equal(chunk_matrix(v, 128), np.stack([c for _, c in chunks]))


@settings(max_examples=60, deadline=None)
@given(w=st.sampled_from([1, 2, 3, 4, 8, 16, 64, 128]), extra=st.integers(0, 500))
def test_offsets_match_brute_force(w, extra):
    assert chunk_offsets(w + extra, w).tolist() == brute_offsets(w + extra, w)


# -- clamp / stats / normalize ------------------------------------------------------

def test_clamp_examples():
    s = NormStats(-35.0, 2.0)
    assert clamp_outliers([-20.0], s)[0] == -35.0
    assert clamp_outliers([-36.0], s)[0] == -36.0
    assert clamp_outliers([-50.0], s)[0] == -35.0  # two-sided


def test_simulated_class1_has_few_outliers():
    tr = sim.simulate_trace(sim.ScenarioConfig.standard(1, 1_000_000 / 192, seed=4))
    s = compute_norm_stats(tr.values)
    assert count_outliers(tr.values, s) <= 10 * len(tr) / 1e6


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 0), min_size=3, max_size=200),
       st.floats(-60, -20), st.floats(0.1, 10))
def test_clamp_band_and_idempotence(vals, mu, sigma):
    s = NormStats(mu, sigma)
    once = clamp_outliers(vals, s)
    assert np.all(np.abs(once - mu) <= 4 * sigma)
    assert np.array_equal(clamp_outliers(once, s), once)
    inside = np.abs(np.asarray(vals) - mu) <= 4 * sigma
    assert np.array_equal(once[inside], np.asarray(vals)[inside])


def test_norm_stats_example():
    s = compute_norm_stats([-45, -35, -25])
    assert s.mu == -35
    assert s.sigma == pytest.approx(math.sqrt(200 / 3), abs=1e-12)
    assert np.allclose(normalize([-45, -35, -25], s), [-1.224745, 0, 1.224745], atol=1e-6)


def test_zero_variance_rejected():
    with pytest.raises(ValueError, match="zero variance"):
        compute_norm_stats([-30.0] * 10)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-90, -10), min_size=2, max_size=50, unique=True),
       st.floats(-20, 20))
def test_stats_translation(vals, c):
    a = compute_norm_stats(vals)
    b = compute_norm_stats(np.asarray(vals) + c)
    assert b.mu == pytest.approx(a.mu + c, abs=1e-9)
    assert b.sigma == pytest.approx(a.sigma, rel=1e-9, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=50), st.floats(-60, -20),
       st.floats(0.1, 10))
def test_normalize_inverse(x, mu, sigma):
    s = NormStats(mu, sigma)
    assert np.allclose(normalize(denormalize(x, s), s), x, atol=1e-12)
    assert normalize([mu], s)[0] == 0


# -- dataset build and files -----------------------------------------------------------

def _traces(n=10_000, labels=(1, 2), seed=0):
    return [sim.simulate_trace(sim.ScenarioConfig.standard(ap, n / 192, seed=seed + ap))
            for ap in labels]


def test_build_dataset_counts():
    ds = build_dataset(_traces(), 128, 2, seed=1)
    assert len(ds.train_y) + len(ds.test_y) == 618
    assert len(ds.train_y) == len(ds.test_y) == 309
    assert ds.classes == (1, 2)


def test_build_dataset_deterministic():
    a = build_dataset(_traces(), 128, 2, seed=5)
    b = build_dataset(_traces(), 128, 2, seed=5)
    assert np.array_equal(a.train_x, b.train_x) and np.array_equal(a.test_y, b.test_y)


def test_train_pool_is_standardized_when_nothing_clamped():
    traces = _traces()
    ds = build_dataset(traces, 128, 2, seed=2)
    raw = denormalize(ds.train_x, ds.stats)
    assert count_outliers(raw, ds.stats) == 0
    assert abs(ds.train_x.mean()) < 1e-9
    assert abs(ds.train_x.std() - 1) < 1e-9


def test_chunks_never_mix_traces():
    traces = _traces(2000)
    ds = build_dataset(traces, 64, 2, seed=3)
    for x, src, off in zip(denormalize(ds.train_x, ds.stats), ds.train_src, ds.train_off):
        ref = traces[src].values[off:off + 64]
        assert np.allclose(clamp_outliers(ref, ds.stats), x, atol=1e-9)


def test_wrong_class_count_rejected():
    with pytest.raises(ValueError, match="expected 3 classes"):
        build_dataset(_traces(), 128, 3)


def test_class_cap():
    ds = build_dataset(_traces(), 4, 2, seed=0, max_chunks_per_class=100)
    assert np.bincount(np.concatenate([ds.train_y, ds.test_y])).tolist() == [100, 100]


def test_dataset_round_trip(tmp_path):
    ds = build_dataset(_traces(3000), 64, 2, seed=4)
    write_dataset(ds, tmp_path / "d")
    back = read_dataset(tmp_path / "d")
    for name in ("train_x", "train_y", "test_x", "test_y"):
        assert np.array_equal(getattr(ds, name), getattr(back, name))
    assert (back.k, back.w, back.stats, back.classes) == (ds.k, ds.w, ds.stats, ds.classes)


def test_parse_line():
    c = parse_line("1,0.5,-0.25", 2)
    assert c.label == 1 and c.values.tolist() == [0.5, -0.25]
    with pytest.raises(ValueError, match="f.txt:7"):
        parse_line("1,0.5,-0.25,3", 2, "f.txt:7")
    with pytest.raises(ValueError, match="non-numeric"):
        parse_line("1,x,2", 2)


def test_malformed_file_names_line(tmp_path):
    ds = build_dataset(_traces(3000), 64, 2, seed=4)
    write_dataset(ds, tmp_path / "d")
    p = tmp_path / "d_TEST"
    lines = p.read_text().splitlines()
    lines[2] = lines[2] + ",1.0"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="d_TEST:3"):
        read_dataset(tmp_path / "d")
