import json
import logging
import warnings

import numpy as np
import pytest

from spectral_hmm import (
    build_hsu_model, build_model, build_weighted_model, compute_projection,
    compute_weighted_projection, exact_joint_distributions, exact_moments, hmm_a,
    inverse_sqrt_weights, random_hmm, sample_triples,
)
from spectral_hmm import io as sio
from spectral_hmm.diagnostics import prefix_probabilities


def test_hmm_round_trip_is_exact(tmp_path):
    hmm = random_hmm(3, 5, seed=4)
    path = sio.save_hmm(hmm, tmp_path / "r.hmm.json")
    back = sio.load_hmm(path)
    for a, b in ((hmm.T, back.T), (hmm.O, back.O), (hmm.pi, back.pi)):
        np.testing.assert_array_equal(a, b)
    d = json.loads(path.read_text())
    assert d["format"] == "spectral-hmm/hmm" and d["m"] == 3 and d["v"] == 5
    assert d["T"][0] == hmm.T[0].tolist()


def test_hmm_declared_shape_checked(tmp_path):
    d = sio.hmm_to_dict(hmm_a())
    d["v"] = 3
    with pytest.raises(ValueError):
        sio.hmm_from_dict(d)


def test_triples_round_trip(tmp_path):
    s = sample_triples(hmm_a(), 100, seed=0)
    path = sio.save_triples(s, tmp_path / "t.tsv")
    assert path.read_text().splitlines()[0].count("\t") == 2
    np.testing.assert_array_equal(sio.load_triples(path).triples, s.triples)


def _models():
    hmm = random_hmm(2, 4, seed=1)
    d = exact_joint_distributions(hmm)
    U = compute_projection(d.P21, 2)
    q = inverse_sqrt_weights(d.P1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        weighted = build_weighted_model(hmm, compute_weighted_projection(d.P21, 2, q), q)
    return [build_model(exact_moments(hmm, U), U), build_hsu_model(d, U), weighted]


@pytest.mark.parametrize("index", range(3))
def test_model_round_trip(tmp_path, index):
    model = _models()[index]
    path = sio.save_model(model, tmp_path / "m.json", {"seed": 7})
    back = sio.load_model(path)
    assert type(back) is type(model)
    for a, b in zip(prefix_probabilities(model, 3), prefix_probabilities(back, 3)):
        np.testing.assert_array_equal(a, b)
    assert sio.load_model_metadata(path) == {"seed": 7}


def test_unknown_model_format():
    with pytest.raises(ValueError):
        sio.model_from_dict({"format": "nope"})
    with pytest.raises(TypeError):
        sio.model_to_dict(object())


def test_large_hsu_model_logs_size(caplog, monkeypatch):
    monkeypatch.setattr(sio, "HSU_SIZE_WARNING", 1)
    with caplog.at_level(logging.WARNING, logger="spectral_hmm.io"):
        sio.model_to_dict(_models()[1])
    assert "operator entries" in caplog.text
