"""Plain-text file formats.

``*.hmm.json``
    ``{"format": "spectral-hmm/hmm", "m": int, "v": int, "T": [[...]], "O": [[...]], "pi": [...]}``
    with ``T`` and ``O`` as lists of rows.  Floats are written with ``repr``
    so values round-trip exactly.
Triple samples
    Three tab-separated integer columns ``x1 x2 x3``, one triple per line.
Arrays inside moment/model files
    ``{"shape": [...], "data": [...]}`` with ``data`` flattened in row-major
    (C) order; for the operator tensor ``C`` this means index ``[i, k, j]``
    with ``j`` (the observation coordinate) varying fastest.
"""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .hmm import Hmm, TripleSample
from .model import HsuModel, SpectralModel, WeightedModel
from .moments import MomentSet, Projection

log = logging.getLogger(__name__)

HSU_SIZE_WARNING = 10**7


def _arr(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def _unarr(d) -> np.ndarray:
    return np.asarray(d["data"], dtype=float).reshape(d["shape"])


def _dump(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")
    return path


def _load(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def hmm_to_dict(hmm: Hmm) -> dict:
    return {
        "format": "spectral-hmm/hmm",
        "m": hmm.m,
        "v": hmm.v,
        "T": hmm.T.tolist(),
        "O": hmm.O.tolist(),
        "pi": hmm.pi.tolist(),
    }


def hmm_from_dict(d: dict) -> Hmm:
    hmm = Hmm(d["T"], d["O"], d["pi"])
    if (hmm.m, hmm.v) != (d["m"], d["v"]):
        raise ValueError(f"declared (m, v)=({d['m']}, {d['v']}) disagree with arrays {(hmm.m, hmm.v)}")
    return hmm


def save_hmm(hmm: Hmm, path) -> Path:
    return _dump(hmm_to_dict(hmm), path)


def load_hmm(path) -> Hmm:
    return hmm_from_dict(_load(path))


def save_triples(sample: TripleSample, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, sample.triples, fmt="%d", delimiter="\t")
    return path


def load_triples(path) -> TripleSample:
    arr = np.loadtxt(path, dtype=np.int64, delimiter="\t", ndmin=2)
    return TripleSample(arr)


def moments_to_dict(mom: MomentSet) -> dict:
    return {
        "format": "spectral-hmm/moments",
        "m": mom.m,
        "provenance": mom.provenance,
        "N": mom.N,
        "mu": _arr(mom.mu),
        "sigma": _arr(mom.sigma),
        "kappa": _arr(mom.kappa),
    }


def moments_from_dict(d: dict) -> MomentSet:
    return MomentSet(_unarr(d["mu"]), _unarr(d["sigma"]), _unarr(d["kappa"]),
                     d["provenance"], d["N"])


def model_to_dict(model, metadata: dict | None = None) -> dict:
    meta = dict(metadata or {})
    if isinstance(model, WeightedModel):
        d = model_to_dict(model.model, meta)
        d.update(format="spectral-hmm/weighted-model", q=_arr(model.q),
                 base_U=_arr(model.U.U), base_kind=model.U.kind)
        return d
    if isinstance(model, SpectralModel):
        d = {
            "format": "spectral-hmm/model",
            "m": model.m, "v": model.v,
            "U": _arr(model.U.U), "kind": model.U.kind,
            "c1": _arr(model.c1), "c_inf": _arr(model.c_inf), "C": _arr(model.C),
            "metadata": meta,
        }
        if model.moments is not None:
            d["moments"] = moments_to_dict(model.moments)
        return d
    if isinstance(model, HsuModel):
        if model.v * model.m ** 2 > HSU_SIZE_WARNING:
            log.warning("Hsu model has %d operator entries", model.v * model.m ** 2)
        return {
            "format": "spectral-hmm/hsu-model",
            "m": model.m, "v": model.v,
            "U": _arr(model.U.U), "kind": model.U.kind,
            "b1": _arr(model.b1), "b_inf": _arr(model.b_inf), "B": _arr(model.B),
            "metadata": meta,
        }
    raise TypeError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d: dict):
    fmt = d.get("format")
    if fmt in ("spectral-hmm/model", "spectral-hmm/weighted-model"):
        mom = moments_from_dict(d["moments"]) if "moments" in d else None
        inner = SpectralModel(Projection(_unarr(d["U"]), d["kind"]), _unarr(d["c1"]),
                              _unarr(d["c_inf"]), _unarr(d["C"]), mom)
        if fmt == "spectral-hmm/model":
            return inner
        return WeightedModel(_unarr(d["q"]), Projection(_unarr(d["base_U"]), d["base_kind"]), inner)
    if fmt == "spectral-hmm/hsu-model":
        return HsuModel(Projection(_unarr(d["U"]), d["kind"]), _unarr(d["b1"]),
                        _unarr(d["b_inf"]), _unarr(d["B"]))
    raise ValueError(f"unknown model format {fmt!r}")


def save_model(model, path, metadata: dict | None = None) -> Path:
    return _dump(model_to_dict(model, metadata), path)


def load_model(path):
    d = _load(path)
    return model_from_dict(d)


def load_model_metadata(path) -> dict:
    return _load(path).get("metadata", {})


def save_json(obj, path) -> Path:
    return _dump(obj, path)
