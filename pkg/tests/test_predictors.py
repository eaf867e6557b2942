import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpp_workbench.index import CorpusStats, Query, build_index
from qpp_workbench.predictors import (
    PredictorKind,
    PredictorSpec,
    RelevanceModel,
    avg_idf,
    clarity,
    default_battery,
    estimate_rlm,
    kl_to_collection,
    nqc_from_scores,
    predict,
    query_seed,
    uef,
    wig_from_scores,
)
from qpp_workbench.retrieval import RankedList, RetrievalModel, run_all, search


def _stats(df, n=1000, total=10000):
    return CorpusStats(n, total, df, {t: max(v, 1) for t, v in df.items()}, total / n)


def test_avg_idf_example():
    stats = _stats({"a": 10, "b": 100})
    assert avg_idf(Query("q", ("a", "b")), stats) == pytest.approx((math.log(100) + math.log(10)) / 2)
    assert avg_idf(Query("q", ("a", "b")), stats) == pytest.approx(3.4539, abs=1e-4)


def test_avg_idf_edge_cases():
    stats = _stats({"a": 1000, "b": 10})
    assert avg_idf(Query("q", ("a",)), stats) == 0.0
    assert avg_idf(Query("q", ("zz",)), stats) == 0.0
    assert avg_idf(Query("q", ("b", "zz")), stats) == pytest.approx(math.log(100))


def test_wig_example():
    assert wig_from_scores([-3, -5], -6, 4, 2) == pytest.approx(1.0)
    assert wig_from_scores([-3, -5, -100], -6, 4, 2) == pytest.approx(1.0)


def test_wig_zero_gain_and_bm25_case():
    assert wig_from_scores([-4.0] * 5, -4.0, 3, 20) == 0.0
    assert wig_from_scores([6.0, 4.0, 2.0], 0.0, 4, 20) == pytest.approx(2.0)


def test_nqc_examples():
    assert nqc_from_scores([5, 5, 5], -7, 20) == 0.0
    assert nqc_from_scores([2, 4, 6], -4, 20) == pytest.approx(0.40825, abs=1e-5)
    assert nqc_from_scores([2, 4, 6], 0.0, 20) == pytest.approx(math.sqrt(8 / 3))
    assert nqc_from_scores([3.0], -2, 20) == 0.0
    assert nqc_from_scores([2, 4, 6], -4, 20, ddof=1) == pytest.approx(2 / 4)


scores_st = st.lists(st.floats(-50, 50), min_size=1, max_size=40).map(lambda s: sorted(s, reverse=True))


@given(scores_st, st.floats(-80, -1), st.integers(1, 30), st.integers(1, 5))
def test_only_top_k_matters(scores, cs, k, qlen):
    top = scores[:k]
    assert wig_from_scores(scores, cs, qlen, k) == wig_from_scores(top, cs, qlen, k)
    assert nqc_from_scores(scores, cs, k) == nqc_from_scores(top, cs, k)


@given(scores_st, st.floats(-80, -1), st.integers(1, 30), st.integers(1, 5))
def test_scale_covariance(scores, cs, k, qlen):
    c = 3.7
    scaled = [c * s for s in scores]
    w = wig_from_scores(scores, cs, qlen, k)
    ws = wig_from_scores(scaled, c * cs, qlen, k)
    if abs(w) > 1e-6:
        assert abs(ws - c * w) / abs(c * w) < 1e-9
    assert abs(nqc_from_scores(scaled, c * cs, k) - nqc_from_scores(scores, cs, k)) < 1e-12


def test_clarity_single_term_kl():
    stats = CorpusStats(10, 1000, {"w": 1, "v": 1}, {"w": 1, "v": 999}, 100.0)
    assert kl_to_collection(RelevanceModel({"w": 1.0}), stats) == pytest.approx(math.log2(1000))
    assert math.log2(1000) == pytest.approx(9.9658, abs=1e-4)


def test_clarity_of_collection_model_is_zero():
    stats = CorpusStats(10, 100, {"a": 1, "b": 1}, {"a": 30, "b": 70}, 10.0)
    assert kl_to_collection(RelevanceModel({"a": 0.3, "b": 0.7}), stats) == pytest.approx(0.0, abs=1e-12)


def test_relevance_model_validation():
    with pytest.raises(ValueError):
        RelevanceModel({"a": 0.5, "b": 0.4})
    with pytest.raises(ValueError):
        RelevanceModel({"a": 1.0, "b": 0.0})


SMALL = [
    ("a", "apple banana apple cherry"),
    ("b", "banana banana date"),
    ("c", "apple date elder fig"),
    ("d", "fig grape apple"),
]


@pytest.fixture(scope="module")
def small_index():
    return build_index(SMALL)


def _smoothed(index, doc_id, mu):
    doc = index.document(doc_id)
    s = index.stats
    return {w: (doc.tf(w) + mu * s.cf(w) / s.total_tokens) / (doc.length + mu) for w in doc.term_counts}


def test_rlm_single_doc_is_its_smoothed_model(small_index):
    q = Query.parse("q", "apple")
    rlm = estimate_rlm(q, [small_index.document("a")], small_index, fb_terms=None, mu=10.0)
    p = _smoothed(small_index, "a", 10.0)
    z = sum(p.values())
    assert set(rlm.weights) == set(p)
    for w in p:
        assert rlm.weights[w] == pytest.approx(p[w] / z, abs=1e-12)


def test_rlm_truncation_keeps_top_terms(small_index):
    q = Query.parse("q", "apple")
    full = estimate_rlm(q, [small_index.document("a")], small_index, fb_terms=None, mu=10.0)
    top = estimate_rlm(q, [small_index.document("a")], small_index, fb_terms=1, mu=10.0)
    best = max(full.weights, key=full.weights.get)
    assert dict(top.weights) == {best: 1.0}


def test_rlm_identical_docs():
    index = build_index([("x", "cat dog dog"), ("y", "dog cat dog"), ("z", "bird")])
    docs = [index.document("x"), index.document("y")]
    rlm = estimate_rlm(Query.parse("q", "cat"), docs, index, fb_terms=None, mu=5.0)
    p = _smoothed(index, "x", 5.0)
    z = sum(p.values())
    for w in p:
        assert rlm.weights[w] == pytest.approx(p[w] / z, abs=1e-12)


def test_rlm_matches_direct_mixture(small_index):
    # independent oracle: explicit Σ_D P(w|D) Π_t P(t|D)
    q = Query.parse("q", "apple fig")
    mu = 20.0
    ids = ["a", "c", "d"]
    s = small_index.stats
    vocab = sorted({w for d in ids for w in small_index.document(d).term_counts})
    mix = {w: 0.0 for w in vocab}
    for d in ids:
        doc = small_index.document(d)
        pq = math.prod((doc.tf(t) + mu * s.cf(t) / s.total_tokens) / (doc.length + mu) for t in q.terms)
        for w in vocab:
            mix[w] += pq * (doc.tf(w) + mu * s.cf(w) / s.total_tokens) / (doc.length + mu)
    z = sum(mix.values())
    rlm = estimate_rlm(q, [small_index.document(d) for d in ids], small_index, fb_terms=None, mu=mu)
    for w in vocab:
        assert rlm.weights[w] == pytest.approx(mix[w] / z, rel=1e-10)


def test_rlm_rejects_empty(small_index):
    with pytest.raises(ValueError):
        estimate_rlm(Query.parse("q", "apple"), [], small_index)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=4, unique=True), st.sampled_from([1, 3, None]))
def test_rlm_sums_to_one(small_index, doc_ids, fb):
    docs = [small_index.document(d) for d in doc_ids]
    rlm = estimate_rlm(Query.parse("q", "apple date"), docs, small_index, fb_terms=fb)
    assert sum(rlm.weights.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(w > 0 for w in rlm.weights.values())


def test_clarity_nonnegative_untruncated():
    # the feedback docs cover the whole vocabulary, so Gibbs' inequality applies
    index = build_index([("a", "x y"), ("b", "y z z"), ("c", "x z")])
    spec = PredictorSpec(PredictorKind.CLARITY, k=3, fb_terms=None, mu=2.0)
    for text in ("x", "y", "z", "x z"):
        q = Query.parse("q", text)
        ranked = search(index, RetrievalModel.lmdir(2.0), q, 3)
        docs = RankedList.from_scored("q", [(d, 0.0) for d in "abc"])
        assert clarity(q, docs, index, spec) >= -1e-9
        if len(ranked):
            assert clarity(q, ranked, index, spec) >= -1e-9


def test_clarity_order_invariant_when_likelihoods_equal():
    index = build_index([("a", "cat x"), ("b", "cat y"), ("c", "cat z"), ("d", "dog")])
    spec = PredictorSpec(PredictorKind.CLARITY, k=3)
    q = Query.parse("q", "cat")
    one = RankedList.from_scored("q", [("a", 0.0), ("b", 0.0), ("c", 0.0)])
    two = RankedList.from_scored("q", [("c", 0.0), ("a", 0.0), ("b", 0.0)])
    assert clarity(q, one, index, spec) == pytest.approx(clarity(q, two, index, spec), abs=1e-12)


def test_clarity_empty_list_is_zero(small_index):
    spec = PredictorSpec(PredictorKind.CLARITY)
    assert clarity(Query.parse("q", "apple"), RankedList("q"), small_index, spec) == 0.0


@pytest.mark.parametrize("text,label", [
    ("AvgIDF", "AvgIDF"), ("nqc", "NQC"), ("UEF(WIG)", "UEF(WIG)"), ("uef(clarity)", "UEF(Clarity)"),
])
def test_spec_parse(text, label):
    assert PredictorSpec.parse(text).label == label


@pytest.mark.parametrize("text,params", [
    ("UEF", {}), ("UEF(AvgIDF)", {}), ("NQC(WIG)", {}), ("NQC", {"k": 200}), ("WIG", {"num_samples": 0}),
    ("foo", {}),
])
def test_spec_rejects(text, params):
    with pytest.raises(ValueError):
        PredictorSpec.parse(text, **params)


def test_default_battery_labels():
    assert [p.label for p in default_battery()] == [
        "AvgIDF", "Clarity", "WIG", "NQC", "UEF(Clarity)", "UEF(WIG)", "UEF(NQC)"
    ]


# -- UEF ---------------------------------------------------------------------

def _affine_rescorer(a, b, ranked):
    lookup = dict(zip(ranked.doc_ids, ranked.scores))
    return lambda q, rlm, docs, index, mu: [a * lookup[d.doc_id] + b for d in docs]


@pytest.fixture(scope="module")
def one_query(bundled):
    q = bundled["queries"][1]  # 225 matching documents
    model = RetrievalModel.lmdir(1000)
    return q, search(bundled["index"], model, q, 100), model


@pytest.mark.parametrize("base", ["WIG", "NQC", "Clarity"])
def test_uef_affine_rescoring_gives_mean_base(bundled, one_query, base):
    q, ranked, model = one_query
    index = bundled["index"]
    spec = PredictorSpec.parse(f"UEF({base})", num_samples=4)
    pos = uef(q, ranked, index, model, spec, rescorer=_affine_rescorer(2.5, -1.0, ranked))
    neg = uef(q, ranked, index, model, spec, rescorer=_affine_rescorer(-0.5, 3.0, ranked))
    # mean base value over the same samples, recomputed with xi = 1
    rng = np.random.default_rng(query_seed(spec.seed, q.qid))
    base_spec = spec.base_spec()
    vals = []
    for _ in range(spec.num_samples):
        picked = np.sort(rng.choice(100, size=spec.k, replace=False))
        sample = RankedList.from_scored(q.qid, ((ranked.entries[i].doc_id, ranked.entries[i].score) for i in picked))
        vals.append(_direct_base(base_spec, q, sample, index, model))
    assert pos == pytest.approx(np.mean(vals), abs=1e-9)
    assert neg == pytest.approx(-np.mean(vals), abs=1e-9)


def _direct_base(spec, q, sample, index, model):
    from qpp_workbench.predictors import predict_one

    return predict_one(spec, q, sample, index, model)


@pytest.mark.parametrize("base", ["WIG", "NQC"])
def test_uef_full_sample_reduces_to_base(bundled, one_query, base):
    q, ranked, model = one_query
    index = bundled["index"]
    spec = PredictorSpec.parse(f"UEF({base})", k=20, pool=20, num_samples=1)
    top = ranked.prefix(20)
    got = uef(q, ranked, index, model, spec, rescorer=_affine_rescorer(1.0, 0.0, ranked))
    assert got == pytest.approx(_direct_base(spec.base_spec(), q, top, index, model), abs=1e-9)


def test_uef_single_sample_is_xi_times_base(bundled, one_query):
    from qpp_workbench.correlation import pearson
    from qpp_workbench.predictors import rlm_rescore

    q, ranked, model = one_query
    index = bundled["index"]
    spec = PredictorSpec.parse("UEF(NQC)", k=20, pool=20, num_samples=1)
    top = ranked.prefix(20)
    docs = [index.document(d) for d in top.doc_ids]
    rlm = estimate_rlm(q, docs, index, spec.fb_terms, spec.mu)
    xi = pearson(top.scores, rlm_rescore(q, rlm, docs, index, spec.mu))
    phi = _direct_base(spec.base_spec(), q, top, index, model)
    assert uef(q, ranked, index, model, spec) == pytest.approx(xi * phi, abs=1e-12)


def test_uef_constant_rescore_gives_zero(bundled, one_query):
    q, ranked, model = one_query
    spec = PredictorSpec.parse("UEF(WIG)", num_samples=3)
    const = lambda q, rlm, docs, index, mu: [1.0] * len(docs)  # noqa: E731
    assert uef(q, ranked, bundled["index"], model, spec, rescorer=const) == 0.0


def test_uef_is_deterministic_and_seed_sensitive(bundled, one_query):
    q, ranked, model = one_query
    index = bundled["index"]
    a = uef(q, ranked, index, model, PredictorSpec.parse("UEF(WIG)", seed=42))
    b = uef(q, ranked, index, model, PredictorSpec.parse("UEF(WIG)", seed=42))
    c = uef(q, ranked, index, model, PredictorSpec.parse("UEF(WIG)", seed=7))
    assert a == b
    assert a != c


def test_query_seed_is_stable():
    assert query_seed(42, "301") == query_seed(42, "301")
    assert query_seed(42, "301") != query_seed(42, "302")


def test_avg_idf_same_across_models(bundled):
    index = bundled["index"]
    queries = bundled["queries"]
    spec = PredictorSpec(PredictorKind.AVGIDF)
    vecs = [
        predict(spec, queries, run_all(index, m, queries, kappa), index, m).values
        for m, kappa in ((RetrievalModel.lmjm(0.3), 10), (RetrievalModel.bm25(), 100), (RetrievalModel.lmdir(), 1000))
    ]
    assert vecs[0] == vecs[1] == vecs[2]


def test_nqc_constant_vs_spread():
    index = build_index([("a", "cat"), ("b", "cat"), ("c", "cat dog dog dog")])
    queries = [Query.parse("1", "cat"), Query.parse("2", "dog cat")]
    model = RetrievalModel.bm25()
    runs = run_all(index, model, queries, 10)
    vec = predict(PredictorSpec(PredictorKind.NQC), [queries[1]], runs, index, model)
    assert vec.values[0] > 0
    flat = {"1": RankedList.from_scored("1", [("a", 1.0), ("b", 1.0)])}
    assert predict(PredictorSpec(PredictorKind.NQC), [queries[0]], flat, index, model).values == (0.0,)


def test_predict_missing_run_names_qid(small_index):
    q = Query.parse("q7", "apple")
    with pytest.raises(KeyError, match="q7"):
        predict(PredictorSpec(PredictorKind.WIG), [q], {}, small_index, RetrievalModel.lmdir())
    assert predict(PredictorSpec(PredictorKind.AVGIDF), [q], {}, small_index, RetrievalModel.lmdir()).values


def test_full_battery_is_finite(bundled):
    index = bundled["index"]
    queries = bundled["queries"][:10]
    model = RetrievalModel.lmjm(0.6)
    runs = run_all(index, model, queries, 100)
    vectors = [predict(p, queries, runs, index, model) for p in default_battery(num_samples=2)]
    assert len(vectors) == 7
    for vec in vectors:
        assert len(vec.values) == 10
        assert all(math.isfinite(v) for v in vec.values)
