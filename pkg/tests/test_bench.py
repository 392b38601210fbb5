import io
import math

import numpy as np
import pytest

from conftest import random_kt
from tt2cp.bench import (
    CSV_FIELDS,
    ExperimentConfig,
    MetricRow,
    add_noise,
    component_signals,
    damped_exponentials,
    dehankelize,
    gen_random_kt,
    greedy_match,
    hankel_tensorize,
    hilbert_tensor,
    kruskal_msae,
    msae,
    optimal_match,
    read_metrics_csv,
    run_experiment,
    sae,
    snr_of,
    write_metrics_csv,
    write_outputs,
)
from tt2cp.cpd3 import rank1_factors
from tt2cp.io import load_ktensor
from tt2cp.tensor_core import KruskalTensor
from tt2cp.tt import TTOptions, tt_svd


def test_gen_random_kt_deterministic_and_normalized():
    a = gen_random_kt(5, 5, 10, seed=3)
    b = gen_random_kt(5, 5, 10, seed=3)
    assert all(np.array_equal(f, g) for f, g in zip(a.factors, b.factors))
    assert a.shape == (5,) * 5 and a.rank == 10
    for f in a.factors:
        assert np.allclose(np.linalg.norm(f, axis=0), 1)


@pytest.mark.parametrize("snr", [-5.0, 0.0, 17.3, 40.0])
def test_add_noise_hits_snr(snr):
    y = np.random.default_rng(0).standard_normal((4, 4, 4))
    assert abs(snr_of(y, add_noise(y, snr, seed=1)) - snr) < 1e-10


def test_add_noise_edge_cases():
    y = np.ones((2, 2))
    assert np.array_equal(add_noise(y, math.inf, 0), y)
    noisy = add_noise(y, 0.0, 0)
    assert np.isclose(np.linalg.norm(noisy - y), np.linalg.norm(y))
    yc = y * (1 + 1j)
    assert np.iscomplexobj(add_noise(yc, 10.0, 0))
    with pytest.raises(ValueError):
        add_noise(np.zeros(3), 10.0, 0)


def test_sae_values():
    x = np.array([1.0, 2.0, 3.0])
    assert sae(x, x) == 300.0
    assert sae(x, -x) == 300.0
    assert sae(x, 1j * x) == 300.0
    assert np.isclose(sae([1.0, 0.0], [0.0, 1.0]), -20 * np.log10(np.pi / 2))
    theta = 1e-4
    assert np.isclose(sae([1.0, 0.0], [np.cos(theta), np.sin(theta)]), 80.0, atol=1e-6)
    with pytest.raises(ValueError):
        sae(np.zeros(2), x[:2])


def test_msae_invariances(rng):
    a = rng.standard_normal((6, 4))
    b = a + 1e-3 * rng.standard_normal(a.shape)
    base = msae(a, b)
    perm = rng.permutation(4)
    phases = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    assert np.isclose(msae(a, b[:, perm] * phases), base)
    assert np.isclose(msae(a[:, perm] * -1, b), base)
    with pytest.raises(ValueError):
        msae(a, b[:, :3])


def test_greedy_matches_optimal_oracle_on_small_ranks():
    rng = np.random.default_rng(5)
    for r in range(2, 7):
        a = rng.standard_normal((8, r))
        b = a[:, rng.permutation(r)] + 0.05 * rng.standard_normal((8, r))
        score = np.abs(a.T @ b)
        assert np.array_equal(greedy_match(score), optimal_match(score))


def test_kruskal_msae_exact_copy(rng):
    k = random_kt(rng, (3, 4, 5), 3)
    assert kruskal_msae(k, k.permute([2, 0, 1])) == 300.0


def test_hilbert_tensor():
    assert np.allclose(hilbert_tensor(2, 2), [[1, 0.5], [0.5, 1 / 3]])
    h = hilbert_tensor(4, 20)
    assert h[0, 0, 0, 0] == 1.0 and np.isclose(h.min(), 1 / 77) and h.max() == 1.0


def test_hankel_tensorize():
    t = hankel_tensorize(2.0 ** np.arange(3), (2, 2))
    assert np.array_equal(t, [[1, 2], [2, 4]])
    assert np.linalg.matrix_rank(t) == 1
    with pytest.raises(ValueError):
        hankel_tensorize(np.ones(5), (2, 2))
    # the large configuration needs 192 + 16 + 16 + 192 - 3 samples
    with pytest.raises(ValueError, match="413"):
        hankel_tensorize(np.ones(412), (192, 16, 16, 192))


def test_hankel_ranks_of_exponential_sums():
    sigs = damped_exponentials(3, 29)
    one = tt_svd(hankel_tensorize(sigs[0], (8, 8, 8, 8)), TTOptions(rel_error=1e-8))
    three = tt_svd(hankel_tensorize(sigs.sum(0), (8, 8, 8, 8)), TTOptions(rel_error=1e-8))
    assert max(one.ranks) == 1
    assert max(three.ranks) <= 3


def test_dehankelize_inverts_tensorize():
    s = np.random.default_rng(0).standard_normal(10) + 0j
    assert np.allclose(dehankelize(hankel_tensorize(s, (3, 4, 5))), s)


def test_component_signals_from_exact_terms():
    sigs = damped_exponentials(2, 10)
    cols = [rank1_factors(hankel_tensorize(s, (4, 3, 5))) for s in sigs]
    k = KruskalTensor([np.stack([c[m] for c in cols], axis=1) for m in range(3)])
    assert np.allclose(component_signals(k), sigs)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(kind="toeplitz")
    with pytest.raises(ValueError):
        ExperimentConfig(trials=0)
    with pytest.raises(ValueError):
        ExperimentConfig(snr_db=[float("nan")])
    with pytest.raises(ValueError):
        ExperimentConfig(order=3)
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"bogus": 1})


def _small(**kw):
    base = dict(order=4, extents=[4] * 4, rank=3, snr_db=[math.inf, 20.0], trials=2,
                fit={"max_sweeps": 50, "tol": 1e-10})
    base.update(kw)
    return ExperimentConfig(**base)


def test_noiseless_trial_recovers_exactly():
    rows = list(run_experiment(_small(snr_db=[math.inf], trials=1)))
    by_alg = {r.algorithm: r for r in rows}
    assert set(by_alg) == {"stage2_exact", "stage3_fit", "dense_als"}
    assert by_alg["stage2_exact"].msae_db >= 100


def test_sequential_conversion_config():
    rows = list(run_experiment(_small(conversion="sequential", trials=1, dense_baseline=False)))
    assert {r.algorithm for r in rows} == {"stage2_sequential", "stage3_fit"}
    assert all(r.status == "ok" for r in rows)


def test_csv_roundtrip_and_determinism(tmp_path):
    cfg = _small()
    a = list(run_experiment(cfg, threads=1))
    b = list(run_experiment(cfg, threads=2))
    write_outputs(cfg, a, tmp_path / "a")
    write_outputs(cfg, b, tmp_path / "b")
    bytes_a = (tmp_path / "a" / "metrics.csv").read_bytes()
    assert bytes_a == (tmp_path / "b" / "metrics.csv").read_bytes()
    parsed = read_metrics_csv(tmp_path / "a" / "metrics.csv")
    assert bytes_a.decode().splitlines()[0] == ",".join(CSV_FIELDS)
    assert len(parsed) == len(a) == 2 * 2 * 3
    assert all(isinstance(p["msae_db"], float) and isinstance(p["sweeps"], int) for p in parsed)
    kfiles = sorted((tmp_path / "a" / "ktensor").iterdir())
    assert len(kfiles) == len(a)
    assert load_ktensor(kfiles[0]).rank == 3


def test_failed_trial_becomes_sentinel_row():
    # rank 5 on 2x2x2x2 leaves no core with two full bonds
    cfg = ExperimentConfig(order=4, extents=[2] * 4, rank=5, snr_db=[10.0], trials=1,
                           fit={"max_sweeps": 5}, dense_baseline=False)
    rows = list(run_experiment(cfg))
    stage2 = [r for r in rows if r.algorithm == "stage2_exact"][0]
    assert stage2.status.startswith("failed") and math.isnan(stage2.msae_db)
    assert [r for r in rows if r.algorithm == "stage3_fit"][0].status == "ok"


def test_hankel_and_hilbert_kinds():
    hk = ExperimentConfig(kind="hankel", order=4, extents=[8, 4, 4, 8], rank=3, snr_db=[30.0],
                          trials=1, fit={"max_sweeps": 200})
    rows = list(run_experiment(hk))
    assert all(r.status == "ok" for r in rows)
    hil = ExperimentConfig(kind="hilbert", order=3, extents=[6] * 3, rank=2, snr_db=[math.inf],
                           trials=1, fit={"max_sweeps": 20})
    rows = list(run_experiment(hil))
    assert all(math.isnan(r.msae_db) for r in rows)
    assert all(r.rel_error < 0.1 for r in rows if r.algorithm.startswith("stage"))


def test_metric_row_csv_record():
    row = MetricRow(0, math.inf, "x", math.nan, 0.5, 3, 1.25)
    rec = row.csv_record()
    assert rec["snr_db"] == "inf" and rec["msae_db"] == "nan"
    assert "wall_time" not in rec


def test_write_metrics_csv_to_buffer():
    buf = io.StringIO()
    write_metrics_csv([MetricRow(1, 10.0, "a", 12.5, 0.1, 4)], buf)
    assert read_metrics_csv(buf.getvalue())[0]["msae_db"] == 12.5
