import numpy as np
import pytest

from conftest import informative_noise_split
from mklkit.baselines import fit_l1, fit_l2, fit_svm
from mklkit.boost import fit_boost, predict_boost
from mklkit.ckl import fit_ckl, predict_ckl
from mklkit.errors import ValidationError
from mklkit.harness.multiclass import decision, ovo_fit
from mklkit.kernels import GramSet
from mklkit.linf import fit_linf, predict_linf
from mklkit.serialize import (dumps, dumps_bundle, load_model, loads, loads_bundle,
                              save_model)


@pytest.fixture(scope="module")
def data():
    return informative_noise_split(3, m=30)


def _same_svm(a, b):
    assert np.array_equal(a.alpha, b.alpha) and a.bias == b.bias and a.objective == b.objective


@pytest.mark.parametrize("fit", [fit_linf, fit_l1, fit_l2, fit_svm])
def test_weighted_models_round_trip(data, fit, tmp_path):
    g, S, _ = data
    model = fit(g, C=1.0)
    save_model(model, tmp_path / "m.txt")
    back = load_model(tmp_path / "m.txt")
    assert back.kind == model.kind and np.array_equal(back.lam, model.lam)
    _same_svm(back.svm, model.svm)
    assert back.objective == model.objective or np.isnan(model.objective)
    assert np.array_equal(predict_linf(back, S), predict_linf(model, S))


def test_ckl_round_trip(data):
    g, S, _ = data
    g = GramSet(g.kernels + g.kernels[:1], g.labels, descriptor_of={0: 0, 1: 1, 2: 0})
    S = np.concatenate([S, S[:1]])
    model = fit_ckl(g, C=1.0)
    back = loads(dumps(model))
    assert back.groups == model.groups and back.ties == model.ties
    assert all(np.array_equal(a, b) for a, b in zip(back.inner_lambda, model.inner_lambda))
    assert np.array_equal(back.gamma, model.gamma) and back.gap == model.gap
    _same_svm(back.svm, model.svm)
    assert np.array_equal(predict_ckl(back, S), predict_ckl(model, S))


def test_boost_round_trip(data):
    g, S, _ = data
    model = fit_boost(g, C=1.0, max_rounds=4)
    back = loads(dumps(model))
    assert [r.kernel_index for r in back.rounds] == [r.kernel_index for r in model.rounds]
    assert [r.beta for r in back.rounds] == [r.beta for r in model.rounds]
    assert back.stop_reason == model.stop_reason
    assert np.array_equal(predict_boost(back, S), predict_boost(model, S))


def test_per_sample_C_survives(data):
    g, _, _ = data
    model = fit_boost(g, C=1.0, max_rounds=2)
    back = loads(dumps(model))
    assert np.array_equal(back.rounds[1].svm.C, model.rounds[1].svm.C)


def test_label_hash_mismatch_rejected(data):
    g, _, _ = data
    text = dumps(fit_linf(g, C=1.0))
    line = next(l for l in text.splitlines() if l.startswith("labels = "))
    flipped = line.replace("labels = 1", "labels = -1", 1)
    with pytest.raises(ValidationError):
        loads(text.replace(line, flipped))
    with pytest.raises(ValidationError):
        loads(text.replace("version = 1", "version = 99"))


def test_bundles(data):
    g, S, _ = data
    model = fit_linf(g, C=1.0)
    b = loads_bundle(dumps_bundle({None: model}, [-1, 1], np.array([0.5, 2.0])))
    assert np.array_equal(b["scales"], [0.5, 2.0]) and b["distance_scales"] is None
    assert np.array_equal(b["models"][None].lam, model.lam)
    # a bare model file reads as an unscaled binary bundle
    bare = loads_bundle(dumps(model))
    assert bare["scales"] is None and None in bare["models"]

    y3 = np.arange(g.m) % 3
    multi = GramSet(g.kernels, y3)
    ovo = ovo_fit(multi, "linf", 1.0)
    text = dumps_bundle(ovo.models, ovo.classes, np.ones(2), np.array([1.5, 2.5]), ovo.indices)
    back = loads_bundle(text)
    assert back["classes"] == [0, 1, 2] and np.array_equal(back["distance_scales"], [1.5, 2.5])
    for key, m in ovo.models.items():
        assert np.array_equal(back["indices"][key], ovo.indices[key])
        sub = S[:, ovo.indices[key], :]
        assert np.array_equal(decision(back["models"][key], sub), decision(m, sub))
