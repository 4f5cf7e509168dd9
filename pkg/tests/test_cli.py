import numpy as np
import pytest

from ellipsym.cli import main


def test_sample_and_pdf_roundtrip(tmp_path):
    draws = tmp_path / "draws.csv"
    rc = main(
        [
            "sample",
            "--family",
            "student(nu=4)",
            "-m",
            "2",
            "--sigma",
            "2,0.5;0.5,1",
            "-n",
            "200",
            "--seed",
            "9",
            "--out",
            str(draws),
        ]
    )
    assert rc == 0
    data = np.loadtxt(draws, delimiter=",", skiprows=4)
    assert data.shape == (200, 2)

    out = tmp_path / "logpdf.csv"
    rc = main(
        [
            "pdf",
            "--family",
            "student(nu=4)",
            "-m",
            "2",
            "--sigma",
            "2,0.5;0.5,1",
            "--input",
            str(draws),
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    vals = np.loadtxt(out, skiprows=2)
    assert vals.shape == (200,)
    assert np.all(np.isfinite(vals))


def test_fit_subcommand(tmp_path):
    draws = tmp_path / "draws.csv"
    main(
        [
            "sample",
            "--family",
            "student(nu=5)",
            "-m",
            "2",
            "-n",
            "2000",
            "--seed",
            "4",
            "--out",
            str(draws),
        ]
    )
    est = tmp_path / "estimate.csv"
    rc = main(
        [
            "fit",
            "--method",
            "tyler",
            "--input",
            str(draws),
            "--known-mu",
            "0",
            "--out",
            str(est),
        ]
    )
    assert rc == 0
    text = est.read_text()
    assert "vecs_sigma_0" in text and "iterations" in text

    rc = main(
        [
            "fit",
            "--method",
            "ml",
            "--family",
            "student(nu=5)",
            "--input",
            str(draws),
            "--out",
            str(est),
        ]
    )
    assert rc == 0


def test_crb_subcommand(tmp_path):
    out = tmp_path / "crb.csv"
    rc = main(
        [
            "crb",
            "--model",
            "location-vector",
            "--family",
            "gaussian",
            "-m",
            "2",
            "--sigma",
            "2,0.5;0.5,1",
            "-n",
            "100",
            "--out",
            str(out),
        ]
    )
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# model: location-vector")
    crb_rows = [l for l in lines if l.startswith("crb,")]
    got = np.array([[float(v) for v in row.split(",")[2:]] for row in crb_rows])
    assert np.allclose(got, np.array([[2.0, 0.5], [0.5, 1.0]]) / 100)


def test_verify_exit_codes(tmp_path):
    rc = main(["verify", "ml-gaussian-closed-form", "--out-dir", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "ml-gaussian-closed-form.csv").exists()


def test_list_plans_runs():
    assert main(["list-plans"]) == 0


def test_env_seed_default(tmp_path, monkeypatch):
    monkeypatch.setenv("ELLIPSYM_SEED", "31415")
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    main(["sample", "--family", "gaussian", "-m", "2", "-n", "50", "--out", str(a)])
    main(["sample", "--family", "gaussian", "-m", "2", "-n", "50", "--out", str(b)])
    assert a.read_text() == b.read_text()
    assert "seed: 31415" in a.read_text()
