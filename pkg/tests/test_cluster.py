import math

import numpy as np
import pytest

from sparselearn import (
    EMConfig,
    NaiveBayesModel,
    VariableSchema,
    assign_clusters,
    build_correction_table,
    build_default_posterior,
    dataset_from_table,
    dense_counts,
    e_step_dense,
    e_step_sparse,
    ingest_dense,
    init_model,
    m_step,
    run_em,
)
from sparselearn.cluster import (
    ExpectedStats,
    dumps_model,
    load_model,
    loads_model,
    save_model,
)
from sparselearn.errors import (
    EmptyClusterError,
    FormatError,
    LikelihoodUnderflowError,
    SchemaError,
    ZeroParameterError,
)
from sparselearn import instrumentation

from helpers import brute_posteriors, random_dataset, random_model, stats_close


def two_var_model():
    """prior (.6,.4); per-cluster rows for two binary variables."""
    return NaiveBayesModel(
        np.array([0.6, 0.4]),
        [np.array([[0.8, 0.2], [0.3, 0.7]]), np.array([[0.5, 0.5], [0.9, 0.1]])],
    )


def two_var_data():
    schema = (VariableSchema("x0", 2, 0), VariableSchema("x1", 2, 0))
    return dataset_from_table([[0, 1], [1, 0], [0, 0]], schema)


# ---------------------------------------------------------------- model


def test_model_shape_validation():
    with pytest.raises(SchemaError):
        NaiveBayesModel(np.array([0.5, 0.5]), [np.array([[1.0, 0.0]])])  # 1 row
    with pytest.raises(SchemaError):
        NaiveBayesModel(np.array([[0.5], [0.5]]), [np.eye(2)])  # 2-d prior


def test_init_model_deterministic():
    schema = (VariableSchema("a", 3, 0), VariableSchema("b", 2, 1))
    m1 = init_model(schema, 4, seed=9)
    m2 = init_model(schema, 4, seed=9)
    m3 = init_model(schema, 4, seed=10)
    assert np.array_equal(m1.prior, m2.prior)
    assert all(np.array_equal(a, b) for a, b in zip(m1.conditionals, m2.conditionals))
    assert not all(
        np.array_equal(a, b) for a, b in zip(m1.conditionals, m3.conditionals)
    )
    assert np.allclose(m1.prior, 0.25)
    for t, card in zip(m1.conditionals, (3, 2)):
        assert t.shape == (4, card)
        assert np.allclose(t.sum(axis=1), 1.0)
        assert (t > 0).all()


# ---------------------------------------------------------------- E-step


def test_dense_e_step_frozen_values():
    stats, ll = e_step_dense(two_var_model(), two_var_data())
    assert np.allclose(
        stats.ss_c, [1.8343438171024378, 1.1656561828975622], rtol=0, atol=1e-14
    )
    assert np.allclose(
        stats.ss_cx[0],
        [[1.6420361247947455, 0.1923076923076923],
         [0.3579638752052545, 0.8076923076923077]],
        rtol=0,
        atol=1e-14,
    )
    assert np.allclose(
        stats.ss_cx[1],
        [[0.8819628647214854, 0.9523809523809523],
         [1.1180371352785146, 0.047619047619047616]],
        rtol=0,
        atol=1e-14,
    )
    assert ll == pytest.approx(-3.5986310818510314, rel=0, abs=1e-13)
    assert stats.n_records == pytest.approx(3.0)


def test_sparse_e_step_frozen_values():
    stats, ll = e_step_sparse(two_var_model(), two_var_data())
    assert np.allclose(stats.ss_c, [1.8343438171024378, 1.1656561828975622])
    assert ll == pytest.approx(-3.5986310818510314, rel=1e-12)


def test_single_cluster_stats_are_plain_counts(toy):
    model = init_model(toy.schema, 1, seed=0)
    stats, ll = e_step_sparse(model, toy)
    counts = dense_counts(toy, 0)
    assert stats.ss_c.tolist() == [7.0]
    for i in range(3):
        assert np.allclose(stats.ss_cx[i][0], counts.one_way[i], rtol=0, atol=1e-9)
    # joint factorizes, so ll is a sum of per-variable terms
    expected = sum(
        math.log(model.conditionals[i][0, v]) for rec in toy.to_dense()
        for i, v in enumerate(rec)
    )
    assert ll == pytest.approx(expected)


def test_assign_clusters_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(30):
        ds = random_dataset(rng, n_max=6, m_max=25)
        model = random_model(rng, ds.schema, int(rng.integers(1, 5)))
        p = assign_clusters(model, ds)
        expected, _ = brute_posteriors(model, ds.to_dense())
        assert np.allclose(p, expected, rtol=1e-9, atol=1e-12)
        assert np.allclose(p.sum(axis=1), 1.0, rtol=0, atol=1e-12)


def test_sparse_dense_estep_equivalence_sweep():
    rng = np.random.default_rng(7)
    for _ in range(80):
        ds = random_dataset(rng, n_max=8, m_max=40)
        model = random_model(rng, ds.schema, int(rng.integers(1, 5)))
        s_stats, s_ll = e_step_sparse(model, ds)
        d_stats, d_ll = e_step_dense(model, ds)
        assert s_ll == pytest.approx(d_ll, rel=1e-9)
        assert stats_close(s_stats, d_stats)


def test_estep_on_all_default_records():
    schema = (VariableSchema("a", 2, 1), VariableSchema("b", 3, 0))
    ds = dataset_from_table([[1, 0]] * 4, schema)
    model = random_model(np.random.default_rng(3), schema, 3)
    s_stats, s_ll = e_step_sparse(model, ds)
    d_stats, d_ll = e_step_dense(model, ds)
    assert s_ll == pytest.approx(d_ll, rel=1e-12)
    assert stats_close(s_stats, d_stats, rtol=1e-12)
    # every record identical, so posteriors equal the default-record posterior
    p = assign_clusters(model, ds)
    base = build_default_posterior(model, [1, 0])
    expected = np.exp(base - base.max())
    expected /= expected.sum()
    assert np.allclose(p, expected[None, :], rtol=1e-12)


def test_stats_conservation():
    rng = np.random.default_rng(17)
    for _ in range(20):
        ds = random_dataset(rng, n_max=6, m_max=30)
        model = random_model(rng, ds.schema, 3)
        stats, _ = e_step_sparse(model, ds)
        assert stats.ss_c.sum() == pytest.approx(ds.n_records, rel=1e-12)
        for t in stats.ss_cx:
            assert np.allclose(t.sum(axis=1), stats.ss_c, rtol=1e-9, atol=1e-9)


def test_estep_work_counters(toy):
    model = init_model(toy.schema, 2, seed=0)
    e_step_sparse(model, toy)
    c = instrumentation.counters
    assert c.posterior_multiplies == 2 * 8  # r_C * stored pairs
    assert c.normalize_multiplies == 7 * 2
    instrumentation.reset()
    e_step_dense(model, toy)
    c = instrumentation.counters
    assert c.posterior_multiplies == 2 * (3 + 1) * 7  # r_C * (n+1) * m
    assert c.normalize_multiplies == 7 * 2


# ------------------------------------------------- default-record tables


def test_default_posterior_golden():
    base = build_default_posterior(two_var_model(), [0, 0])
    assert np.allclose(np.exp(base), [0.6 * 0.8 * 0.5, 0.4 * 0.3 * 0.9], rtol=1e-15)


def test_default_posterior_three_vars():
    model = NaiveBayesModel(
        np.array([0.5, 0.5]),
        [np.array([[0.8, 0.2], [0.6, 0.4]])] * 3,
    )
    base = build_default_posterior(model, [0, 0, 0])
    assert np.exp(base[0]) == pytest.approx(0.5 * 0.8**3, rel=1e-15)


def test_default_posterior_zero_parameter():
    model = NaiveBayesModel(
        np.array([0.5, 0.5]),
        [np.array([[0.0, 1.0], [0.5, 0.5]])],
    )
    with pytest.raises(ZeroParameterError) as exc:
        build_default_posterior(model, [0])
    assert "prior_strength" in str(exc.value)


def test_correction_table_golden():
    corr = build_correction_table(two_var_model(), [0, 0])
    assert corr.shape == (4, 2)
    # default slots are exactly zero, no tolerance
    assert corr[0].tolist() == [0.0, 0.0]
    assert corr[2].tolist() == [0.0, 0.0]
    assert np.exp(corr[1, 0]) == pytest.approx(0.2 / 0.8, rel=1e-15)
    assert np.exp(corr[1, 1]) == pytest.approx(0.7 / 0.3, rel=1e-15)
    assert np.exp(corr[3, 1]) == pytest.approx(0.1 / 0.9, rel=1e-15)


def test_correction_table_allows_zero_off_default():
    # a zero probability away from the default is representable (-inf)
    model = NaiveBayesModel(np.array([1.0]), [np.array([[1.0, 0.0]])])
    corr = build_correction_table(model, [0])
    assert corr[0, 0] == 0.0
    assert corr[1, 0] == -np.inf
    with pytest.raises(ZeroParameterError):
        build_correction_table(model, [1])  # zero at the default itself


def test_underflow_raises_in_both_modes():
    model = NaiveBayesModel(
        np.array([0.5, 0.5]),
        [np.array([[1.0, 0.0], [1.0, 0.0]])],
    )
    schema = (VariableSchema("a", 2, 0),)
    ds = dataset_from_table([[0], [1]], schema)
    for estep in (e_step_dense, e_step_sparse):
        with pytest.raises(LikelihoodUnderflowError) as exc:
            estep(model, ds)
        assert exc.value.record_index == 1
        assert "record 1" in str(exc.value)


# ---------------------------------------------------------------- M-step


def test_m_step_uniform_stats():
    stats = ExpectedStats(np.array([3.0, 3.0]), [np.full((2, 3), 1.0)])
    model = m_step(stats, EMConfig(cluster_count=2, prior_strength=0.0))
    assert np.allclose(model.prior, 0.5)
    assert np.allclose(model.conditionals[0], 1.0 / 3.0)


def test_m_step_map_frozen_values():
    stats = ExpectedStats(
        np.array([3.0, 4.0]),
        [
            np.array([[1.0, 1.5, 0.5], [0.0, 3.5, 0.5]]),
            np.array([[2.0, 0.5, 0.5], [2.0, 0.5, 1.5]]),
        ],
    )
    model = m_step(stats, EMConfig(cluster_count=2, prior_strength=1.0))
    assert np.allclose(
        model.prior, [0.4444444444444444, 0.5555555555555556], rtol=0, atol=1e-15
    )
    assert np.allclose(
        model.conditionals[0],
        [[0.3333333333333333, 0.4166666666666667, 0.25],
         [0.14285714285714285, 0.6428571428571429, 0.21428571428571427]],
        rtol=0,
        atol=1e-15,
    )
    assert np.allclose(
        model.conditionals[1],
        [[0.5, 0.25, 0.25],
         [0.42857142857142855, 0.21428571428571427, 0.35714285714285715]],
        rtol=0,
        atol=1e-15,
    )


def test_m_step_empty_cluster_without_smoothing():
    stats = ExpectedStats(
        np.array([5.0, 0.0]), [np.array([[3.0, 2.0], [0.0, 0.0]])]
    )
    with pytest.raises(EmptyClusterError):
        m_step(stats, EMConfig(cluster_count=2, prior_strength=0.0))
    # smoothing rescues the same stats
    model = m_step(stats, EMConfig(cluster_count=2, prior_strength=1.0))
    assert np.allclose(model.prior, [6.0 / 7.0, 1.0 / 7.0])
    assert np.allclose(model.conditionals[0][1], [0.5, 0.5])


def test_m_step_ml_recovers_frequencies():
    stats = ExpectedStats(np.array([4.0]), [np.array([[1.0, 3.0]])])
    model = m_step(stats, EMConfig(cluster_count=1, prior_strength=0.0))
    assert model.prior.tolist() == [1.0]
    assert np.allclose(model.conditionals[0], [[0.25, 0.75]])


# ---------------------------------------------------------------- EM loop


def test_run_em_zero_iterations(toy):
    cfg = EMConfig(cluster_count=3, max_iterations=0, seed=5)
    model, trace, stats = run_em(toy, cfg)
    ref = init_model(toy.schema, 3, seed=5)
    assert np.array_equal(model.prior, ref.prior)
    assert trace == []
    assert stats is None


def test_run_em_single_cluster_converges_to_frequencies(toy):
    cfg = EMConfig(cluster_count=1, prior_strength=0.0, seed=1)
    model, trace, _ = run_em(toy, cfg)
    counts = dense_counts(toy, 0)
    for i in range(3):
        assert np.allclose(model.conditionals[i][0], counts.one_way[i] / 7.0)
    assert len(trace) >= 2
    assert trace[-1] == pytest.approx(trace[-2])


def value_covering_dataset(seed, n=6, m=120, p=0.4):
    rng = np.random.default_rng(seed)
    X = (rng.random((m, n)) < p).astype(np.int64)
    return ingest_dense(X, defaults=[0] * n, cardinalities=[2] * n)


def test_run_em_ml_trace_monotone():
    for seed in (0, 1, 2):
        ds = value_covering_dataset(100 + seed)
        cfg = EMConfig(
            cluster_count=3, prior_strength=0.0, seed=seed, estep_mode="sparse"
        )
        _, trace, _ = run_em(ds, cfg)
        diffs = np.diff(np.array(trace))
        assert (diffs >= -1e-10 * np.abs(np.array(trace)[1:])).all()


def test_run_em_modes_agree():
    ds = value_covering_dataset(7)
    traces = {}
    for mode in ("sparse", "dense"):
        cfg = EMConfig(cluster_count=3, seed=2, estep_mode=mode)
        model, trace, _ = run_em(ds, cfg)
        traces[mode] = trace
    a, b = traces["sparse"], traces["dense"]
    assert len(a) == len(b)
    assert np.allclose(a, b, rtol=1e-6)


def test_run_em_reaches_fixpoint(toy):
    cfg = EMConfig(cluster_count=2, seed=3, tolerance=1e-9, max_iterations=500)
    model, trace, stats = run_em(toy, cfg)
    assert len(trace) < 500  # converged, not exhausted
    # one more EM round must not move the likelihood beyond tolerance
    model2 = m_step(stats, cfg)
    _, ll2 = e_step_sparse(model2, toy)
    assert abs(ll2 - trace[-1]) / abs(ll2) < 1e-8


def test_run_em_time_trace(toy):
    times = []
    cfg = EMConfig(cluster_count=2, seed=0, max_iterations=6, tolerance=1e-300)
    _, trace, _ = run_em(toy, cfg, time_trace=times)
    assert len(times) == len(trace) == 6
    assert all(t >= 0.0 for t in times)


def test_em_config_validation():
    with pytest.raises(SchemaError):
        EMConfig(cluster_count=0)
    with pytest.raises(SchemaError):
        EMConfig(cluster_count=2, max_iterations=-1)
    with pytest.raises(SchemaError):
        EMConfig(cluster_count=2, tolerance=-1.0)
    with pytest.raises(SchemaError):
        EMConfig(cluster_count=2, prior_strength=-0.5)
    with pytest.raises(SchemaError):
        EMConfig(cluster_count=2, estep_mode="fast")


# ---------------------------------------------------------- serialization


MODEL_TEXT = (
    "NBMODEL 1\n"
    "clusters 2\n"
    "vars 1\n"
    "prior 0.5 0.5\n"
    "cond 0 0 0.75 0.25\n"
    "cond 0 1 0.25 0.75\n"
)


def test_model_text_golden():
    model = NaiveBayesModel(
        np.array([0.5, 0.5]), [np.array([[0.75, 0.25], [0.25, 0.75]])]
    )
    assert dumps_model(model) == MODEL_TEXT
    back = loads_model(MODEL_TEXT)
    assert np.array_equal(back.prior, model.prior)
    assert np.array_equal(back.conditionals[0], model.conditionals[0])


def test_model_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(11)
    schema = (VariableSchema("a", 4, 0), VariableSchema("b", 2, 1))
    model = random_model(rng, schema, 3)
    p = tmp_path / "m.model"
    save_model(model, p)
    back = load_model(p)
    assert np.array_equal(back.prior, model.prior)
    for a, b in zip(back.conditionals, model.conditionals):
        assert np.array_equal(a, b)
    save_model(back, p)
    text = p.read_text()
    save_model(load_model(p), p)
    assert p.read_text() == text


@pytest.mark.parametrize(
    "mutation",
    [
        lambda t: t.replace("NBMODEL 1", "NBMODEL 2"),
        lambda t: t.replace("clusters 2", "clusters 3"),
        lambda t: t.replace("vars 1", "vars 2"),
        lambda t: t.replace("prior 0.5 0.5", "prior 0.5"),
        lambda t: t.replace("prior 0.5 0.5", "prior 0.6 0.5"),
        lambda t: t.replace("cond 0 1", "cond 0 0"),
        lambda t: t.replace("cond 0 0 0.75 0.25", "cond 0 0 0.75"),
        lambda t: t.replace("0.75 0.25", "0.80 0.25"),  # row sum != 1
        lambda t: t.replace("0.75", "abc"),
    ],
)
def test_loads_model_rejects_corrupt_text(mutation):
    with pytest.raises(FormatError):
        loads_model(mutation(MODEL_TEXT))
