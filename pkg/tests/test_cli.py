import json

import pytest

from nss3dqa.cli import main
from nss3dqa.model_io import write_ply
from nss3dqa.nss import read_features_csv
from nss3dqa.synth import SynthSpec, generate


@pytest.fixture
def cloud_file(tmp_path):
    model = generate(SynthSpec("plane", count=200, color_pattern="random",
                               seed=1))
    path = tmp_path / "cloud.ply"
    path.write_bytes(write_ply(model, "binary_le"))
    return str(path)


@pytest.fixture
def mesh_file(tmp_path):
    model = generate(SynthSpec("grid-mesh", count=100, seed=2))
    path = tmp_path / "mesh.ply"
    path.write_bytes(write_ply(model, "ascii"))
    return str(path)


def test_extract_csv(tmp_path, cloud_file, mesh_file):
    out = tmp_path / "features.csv"
    code = main(["extract", cloud_file, mesh_file, "-o", str(out)])
    assert code == 0
    with open(out) as fh:
        rows = read_features_csv(fh)
    assert [r[0] for r in rows] == [cloud_file, mesh_file]
    assert rows[0][1].kind == "pointcloud" and len(rows[0][1].values) == 88
    assert rows[1][1].kind == "mesh" and len(rows[1][1].values) == 77


def test_extract_threads_match_serial(tmp_path, cloud_file, mesh_file):
    out1 = tmp_path / "serial.csv"
    out2 = tmp_path / "threaded.csv"
    assert main(["extract", cloud_file, mesh_file, "-o", str(out1)]) == 0
    assert main(["extract", cloud_file, mesh_file, "--threads", "4",
                 "-o", str(out2)]) == 0
    assert out1.read_text() == out2.read_text()


def test_extract_missing_file_exit_code(tmp_path):
    assert main(["extract", str(tmp_path / "nope.ply")]) == 1


def test_extract_corrupt_file_exit_code(tmp_path):
    bad = tmp_path / "bad.ply"
    bad.write_bytes(b"not a ply at all")
    assert main(["extract", str(bad)]) == 1


def _write_benchmark(tmp_path, groups=3, count=600, levels=8):
    out_dir = tmp_path / "bench"
    code = main(["synth", "--out-dir", str(out_dir), "--groups", str(groups),
                 "--count", str(count), "--levels", str(levels)])
    assert code == 0
    return str(out_dir / "manifest.csv")


def test_synth_then_train_predict_evaluate(tmp_path):
    manifest = _write_benchmark(tmp_path)
    model_path = tmp_path / "model.json"
    assert main(["train", "--manifest", manifest, "--mos-scale", "10",
                 "-o", str(model_path)]) == 0
    assert model_path.exists()

    # Predict on the corpus and correlate against the manifest.
    paths = []
    with open(manifest) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("path,"):
                continue
            paths.append(line.split(",")[0])
    scores = tmp_path / "scores.csv"
    assert main(["predict", "--model", str(model_path), *paths,
                 "-o", str(scores)]) == 0
    report = tmp_path / "metrics.json"
    assert main(["evaluate", "--manifest", manifest, "--scores", str(scores),
                 "--mos-scale", "10", "-o", str(report)]) == 0
    doc = json.loads(report.read_text())
    assert set(doc) == {"plcc", "srcc", "krcc", "rmse"}
    assert doc["srcc"] > 0.8  # training-set fit should rank well


def test_cv_with_precomputed_features(tmp_path):
    manifest = _write_benchmark(tmp_path)
    feats = tmp_path / "features.csv"
    paths = []
    with open(manifest) as fh:
        for line in fh:
            if line.startswith("#") or line.startswith("path,"):
                continue
            paths.append(line.split(",")[0])
    assert main(["extract", *paths, "-o", str(feats)]) == 0
    out = tmp_path / "cv.json"
    assert main(["cv", "--manifest", manifest, "--features", str(feats),
                 "--mos-scale", "10", "--table", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["folds"]) == 3
    assert "average" in doc


def test_sweep_command(tmp_path):
    manifest = _write_benchmark(tmp_path, groups=5, count=500, levels=10)
    out = tmp_path / "sweep.json"
    assert main(["sweep", "--manifest", manifest, "--mos-scale", "10",
                 "--fractions", "0.4,0.6", "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    fracs = [r["fraction"] for r in doc["fractions"]]
    assert fracs == [0.4, 0.6]


def test_threads_env_fallback(tmp_path, cloud_file, monkeypatch):
    monkeypatch.setenv("NSS3DQA_THREADS", "2")
    out = tmp_path / "f.csv"
    assert main(["extract", cloud_file, "-o", str(out)]) == 0
    assert out.exists()


def test_bad_manifest_exit_code(tmp_path):
    bad = tmp_path / "manifest.csv"
    bad.write_text("wrong,header\n")
    assert main(["cv", "--manifest", str(bad)]) == 1
