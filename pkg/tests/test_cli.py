import json
import subprocess
import sys

import numpy as np
import pytest

from spectral_hmm import io as sio
from spectral_hmm import hmm_a, identity_hmm, sample_triples, validate
from spectral_hmm.cli import _parse_m_values, main
from spectral_hmm.ngram import triples_to_counters, write_count_files


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def hmm_file(tmp_path):
    return sio.save_hmm(hmm_a(), tmp_path / "a.hmm.json")


def test_generate_identity(tmp_path):
    assert run("generate", "--m", 2, "--v", 2, "--family", "identity", "--out-dir", tmp_path) == 0
    hmm = sio.load_hmm(tmp_path / "hmm.hmm.json")
    np.testing.assert_array_equal(hmm.T, identity_hmm().T)
    np.testing.assert_array_equal(hmm.pi, identity_hmm().pi)
    cfg = json.loads((tmp_path / "generate.config.json").read_text())
    assert cfg["family"] == "identity" and cfg["m"] == 2


def test_generate_deterministic(tmp_path):
    for name in ("x", "y"):
        run("generate", "--m", 3, "--v", 5, "--seed", 9, "--name", name, "--out-dir", tmp_path)
    a = (tmp_path / "x.hmm.json").read_bytes()
    assert a == (tmp_path / "y.hmm.json").read_bytes()
    assert validate(sio.load_hmm(tmp_path / "x.hmm.json")).ok


def test_sample_writes_triples(tmp_path, hmm_file):
    assert run("sample", "--hmm", hmm_file, "--n", 1000, "--seed", 1, "--out-dir", tmp_path) == 0
    s = sio.load_triples(tmp_path / "triples.tsv")
    np.testing.assert_array_equal(s.triples, sample_triples(hmm_a(), 1000, seed=1).triples)


def test_estimate_reduced(tmp_path, hmm_file):
    out = tmp_path / "red"
    assert run("estimate", "--hmm", hmm_file, "--m", 2, "--n", 10**6, "--seed", 0,
               "--out-dir", out) == 0
    rep = json.loads((out / "report.json").read_text())["report"]
    assert isinstance(rep["condition1"], bool) and isinstance(rep["condition2"], bool)
    assert rep["N"] == 10**6 and rep["delta"] == 0.05
    assert (out / "model.json").exists() and (out / "estimate.config.json").exists()


def test_estimate_hsu_records_agreement(tmp_path, hmm_file):
    out = tmp_path / "hsu"
    assert run("estimate", "--hmm", hmm_file, "--m", 2, "--n", 10**5, "--variant", "hsu",
               "--out-dir", out) == 0
    res = json.loads((out / "report.json").read_text())
    assert (out / "hsu_model.json").exists()
    assert res["hsu_vs_reduced_max_abs_diff"] < 1e-10


def test_estimate_weighted_reports_both_lambdas(tmp_path, hmm_file):
    out = tmp_path / "w"
    assert run("estimate", "--hmm", hmm_file, "--m", 2, "--n", 10**5, "--variant", "weighted",
               "--q-mode", "inverse-sqrt-P1", "--out-dir", out) == 0
    res = json.loads((out / "report.json").read_text())
    assert "lambda_hat_unweighted" in res
    assert res["report"]["lambda_hat"] >= 0
    assert any("max |y*|" in n for n in res["report"]["notes"])


def test_eval_exact_model(tmp_path):
    hmm = hmm_a()
    path = sio.save_hmm(hmm, tmp_path / "a.hmm.json")
    from spectral_hmm import build_model, compute_projection, exact_joint_distributions, \
        exact_moments
    U = compute_projection(exact_joint_distributions(hmm).P21, 2)
    sio.save_model(build_model(exact_moments(hmm, U), U), tmp_path / "exact.json")
    for t in (1, 3):
        assert run("eval", "--hmm", path, "--model", tmp_path / "exact.json", "--t", t,
                   "--out-dir", tmp_path / f"t{t}") == 0
        summary = json.loads((tmp_path / f"t{t}" / "eval_summary.json").read_text())
        assert summary["max_relative_error"] < 1e-8
        assert summary["l1_total"] < 1e-8 and abs(summary["kl_conditional"]) < 1e-8
    rows = (tmp_path / "t1" / "eval.csv").read_text().splitlines()[1:]
    assert all(abs(float(r.split(",")[3])) < 1e-10 for r in rows)


def test_missing_model_exits_nonzero(tmp_path, hmm_file, caplog):
    code = run("eval", "--hmm", hmm_file, "--model", tmp_path / "missing.json",
               "--out-dir", tmp_path)
    assert code == 1
    assert "eval failed" in caplog.text


def test_diagnose_round_trip(tmp_path, hmm_file):
    run("estimate", "--hmm", hmm_file, "--m", 2, "--n", 20000, "--out-dir", tmp_path)
    assert run("diagnose", "--model", tmp_path / "model.json", "--triples",
               tmp_path / "triples.tsv", "--out-dir", tmp_path) == 0
    diag = json.loads((tmp_path / "diagnose.json").read_text())
    rep = json.loads((tmp_path / "report.json").read_text())["report"]
    assert diag["sigma_m_hat"] == rep["sigma_m_hat"]


def _corpus(tmp_path):
    s = sample_triples(hmm_a(), 20000, seed=3)
    return write_count_files(triples_to_counters(s), tmp_path / "corpus")


def test_estimate_from_counts(tmp_path):
    paths = _corpus(tmp_path)
    assert run("estimate", "--counts", *paths, "--v", 3, "--m", 2, "--out-dir", tmp_path) == 0
    assert run("estimate", "--counts", *paths, "--m", 2, "--out-dir", tmp_path) == 1


def test_plot_data(tmp_path):
    paths = _corpus(tmp_path)
    for name in ("a", "b"):
        assert run("plot-data", "--counts", *paths, "--v", 3, "--m-values", "1-2",
                   "--out-dir", tmp_path / name) == 0
    a = (tmp_path / "a" / "curve.csv").read_bytes()
    assert a == (tmp_path / "b" / "curve.csv").read_bytes()
    lines = a.decode().splitlines()
    assert len(lines) == 4 and lines[-1].startswith("slope,")
    run("plot-data", "--counts", *paths, "--v", 3, "--m-values", "", "--out-dir", tmp_path / "e")
    assert (tmp_path / "e" / "curve.csv").read_text() == "m,lambda_hat,sigma_m_hat,status\n"


def test_m_values_parser():
    assert _parse_m_values("2-6") == [2, 3, 4, 5, 6]
    assert _parse_m_values("2,3,5") == [2, 3, 5]
    assert _parse_m_values("") == []


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "spectral_hmm", "generate", "--m", "2",
                           "--v", "3", "--out-dir", str(tmp_path)], capture_output=True)
    assert proc.returncode == 0
    assert proc.stdout == b""
    bad = subprocess.run([sys.executable, "-m", "spectral_hmm", "sample", "--hmm",
                          str(tmp_path / "nope.json"), "--n", "5", "--out-dir", str(tmp_path)],
                         capture_output=True)
    assert bad.returncode == 1 and b"sample failed" in bad.stderr
