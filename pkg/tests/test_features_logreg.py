import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import PlantedScorer, brute_aggregates
from sanipipe.corpus import SemanticType, tokenize
from sanipipe.indicators.features import (
    PROB,
    TYPES,
    FeatureVector,
    aggregate_logprobs,
    feature_vector,
    span_features,
    span_text_features,
    spancls_layout,
)
from sanipipe.indicators.logreg import (
    LogRegModel,
    loss_and_grad,
    prob_indicator,
    spancls_indicator,
    train_from_rows,
    train_logreg,
)


@pytest.mark.parametrize("lp,expected", [
    ([-4.0], (-4.0, -4.0, -4.0, -4.0, -4.0)),
    ([-1.0, -2.0, -3.0, -4.0], (-4.0, -1.0, -2.5, -2.5, -10.0)),
    ([-0.5, -9.0, -0.5], (-9.0, -0.5, -10.0 / 3, -0.5, -10.0)),
])
def test_aggregate_examples(lp, expected):
    assert aggregate_logprobs(lp) == pytest.approx(expected)


def test_aggregate_empty_rejected():
    with pytest.raises(ValueError):
        aggregate_logprobs([])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(-50, 0, allow_nan=False), min_size=1, max_size=30))
def test_aggregate_properties(lp):
    lo, hi, mean, mdn, total = aggregate_logprobs(lp)
    assert (lo, hi, mean, mdn, total) == pytest.approx(brute_aggregates(lp))
    assert lo <= mean <= hi and lo <= mdn <= hi


def test_layout_widths():
    assert PROB.width == 5 + 8
    assert spancls_layout(16).width == 7 + 8 + 16
    assert len(TYPES) == 8


def test_kingdom_of_denmark_row():
    surface = "Kingdom of Denmark"
    toks = [t.surface for t in tokenize("the Kingdom of Denmark ratified")]
    fv = span_features(PlantedScorer({}, base=-2.0), toks, (1, 4), "LOC", surface, text_dim=32)
    assert (fv.nb_w, fv.nb_sw, fv.p_sum) == (3, 0, -6.0)
    row = fv.row(spancls_layout(32))
    assert row.shape == (47,) and np.isfinite(row).all()
    onehot = row[7:15]
    assert onehot.sum() == 1.0 and onehot[TYPES.index(SemanticType.LOC)] == 1.0
    prow = fv.row(PROB)
    assert prow.shape == (13,) and prow[5 + TYPES.index(SemanticType.LOC)] == 1.0
    with pytest.raises(ValueError):
        feature_vector([-1.0], 1, "LOC").row(spancls_layout(32))


def test_subword_count():
    fv = feature_vector([-1.0, -2.0, -3.0, -1.0, -1.0], 3, "PERSON")
    assert (fv.nb_w, fv.nb_sw) == (3, 2)
    with pytest.raises(ValueError):
        FeatureVector(-1, -1, -1, -1, -1, 0, 0, SemanticType.CODE)


def test_text_features():
    assert not span_text_features("", 64).any()
    assert not span_text_features(" , . ", 64).any()
    a = span_text_features("Kingdom of Denmark", 64)
    assert np.array_equal(a, span_text_features("Kingdom of Denmark", 64))
    assert np.linalg.norm(a) == pytest.approx(1.0)
    # bag of words: order and case do not matter, repetition does
    assert np.array_equal(a, span_text_features("denmark OF kingdom", 64))
    assert not np.array_equal(a, span_text_features("Kingdom of Denmark Denmark", 64))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 6))
    y = (rng.random(30) < 0.4).astype(float)
    w = rng.normal(size=6)
    b = 0.3
    loss, gw, gb = loss_and_grad(X, y, w, b, 0.01)
    eps = 1e-6
    for j in range(6):
        d = np.zeros(6)
        d[j] = eps
        num = (loss_and_grad(X, y, w + d, b, 0.01)[0] - loss_and_grad(X, y, w - d, b, 0.01)[0]) / (2 * eps)
        assert gw[j] == pytest.approx(num, rel=1e-5, abs=1e-7)
    num_b = (loss_and_grad(X, y, w, b + eps, 0.01)[0] - loss_and_grad(X, y, w, b - eps, 0.01)[0]) / (2 * eps)
    assert gb == pytest.approx(num_b, rel=1e-5, abs=1e-7)


def _rows(rng, n):
    rows = []
    for _ in range(n):
        risky = rng.random() < 0.5
        centre = -12.0 if risky else -2.0
        lp = sorted(rng.normal(centre, 1.0, size=rng.integers(1, 4)).clip(max=0.0).tolist())
        rows.append((feature_vector(lp, len(lp), rng.choice(["PERSON", "ORG"])), "MASK" if risky else "NO_MASK"))
    return rows


def test_separable_data_is_learned():
    rows = _rows(np.random.default_rng(1), 300)
    model = train_from_rows(rows, iters=500)
    preds = [prob_indicator(model, fv).risky for fv, _ in rows]
    acc = np.mean([p == (lab == "MASK") for p, (_, lab) in zip(preds, rows)])
    assert acc >= 0.99
    assert model.meta["iterations"] == 500


def test_single_class_warns_and_is_constant():
    rows = _rows(np.random.default_rng(2), 20)
    rows = [(fv, "MASK") for fv, _ in rows]
    with pytest.warns(UserWarning, match="single-class"):
        model = train_from_rows(rows)
    assert not model.weights.any() and model.bias > 0
    probs = {round(prob_indicator(model, fv).score, 12) for fv, _ in rows}
    assert len(probs) == 1


def test_threshold_is_strict():
    fv = feature_vector([-1.0], 1, "PERSON")
    zero = LogRegModel(PROB, np.zeros(PROB.width), 0.0, np.zeros(5), np.ones(5))
    d = prob_indicator(zero, fv, span=("d", 3, 7))
    assert d.score == 0.5 and not d.risky and d.span == ("d", 3, 7)
    assert prob_indicator(zero, fv, threshold=0.499).risky


def test_layout_mismatch_errors():
    with pytest.raises(ValueError, match="width"):
        train_logreg(np.zeros((3, 4)), np.array([0, 1, 0]), PROB)
    with pytest.raises(ValueError):
        LogRegModel(PROB, np.zeros(3), 0.0, np.zeros(5), np.ones(5))
    zero = LogRegModel(PROB, np.zeros(PROB.width), 0.0, np.zeros(5), np.ones(5))
    with pytest.raises(ValueError, match="SPANCLS"):
        spancls_indicator(zero, feature_vector([-1.0], 1, "PERSON"))


def test_spancls_learns_type_onehot(tmp_path):
    layout = spancls_layout(16)
    rows = []
    for i in range(40):
        t = "CODE" if i % 2 else "DEM"
        rows.append((feature_vector([-3.0, -1.0], 2, t, "case 123", 16), "MASK" if t == "CODE" else "NO_MASK"))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = train_from_rows(rows, layout=layout, iters=300)
    assert spancls_indicator(model, rows[1][0]).risky and not spancls_indicator(model, rows[0][0]).risky
    path = tmp_path / "m.json"
    model.save(path)
    back = LogRegModel.load(path)
    assert back.layout == layout
    assert back.predict_proba(rows[1][0].row(layout)) == pytest.approx(model.predict_proba(rows[1][0].row(layout)))


def test_only_numeric_columns_standardised():
    rows = _rows(np.random.default_rng(4), 50)
    model = train_from_rows(rows, iters=10)
    X = np.array([fv.row(PROB) for fv, _ in rows])
    Z = model.standardize(X)
    np.testing.assert_allclose(Z[:, :5].mean(axis=0), 0, atol=1e-9)
    np.testing.assert_array_equal(Z[:, 5:], X[:, 5:])
