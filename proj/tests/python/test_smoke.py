import math

import numpy as np
import pytest

import cl3d


def cube(n, rng):
    return rng.uniform(-1, 1, size=(n, 3))


def test_chamfer_matches_brute_force():
    rng = np.random.default_rng(0)
    a, b = cube(40, rng), cube(55, rng)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    expected = d.min(axis=1).mean() + d.min(axis=0).mean()
    assert cl3d.chamfer(a, b) == pytest.approx(expected, abs=1e-12)
    assert cl3d.chamfer(a, a) == 0.0


def test_distance_matrix_is_symmetric():
    rng = np.random.default_rng(1)
    clouds = [cube(20, rng) for _ in range(5)]
    d = cl3d.chamfer_distance_matrix(clouds)
    assert d.shape == (5, 5)
    assert np.allclose(d, d.T)
    assert np.all(np.diag(d) == 0)
    assert d[1, 3] == pytest.approx(cl3d.chamfer(clouds[1], clouds[3]), abs=1e-12)


def test_triangle_laplacian_spectrum():
    a = np.ones((3, 3)) - np.eye(3)
    lap = cl3d.normalized_laplacian(a)
    assert np.allclose(np.linalg.eigvalsh(lap), [0.0, 1.5, 1.5])
    vectors, values = cl3d.spectral_embed(a, 3)
    assert vectors.shape == (3, 3)
    assert np.allclose(values, [0.0, 1.5, 1.5], atol=1e-10)


def test_kmeans_recovers_planted_blobs():
    rng = np.random.default_rng(2)
    centers = np.array([[0, 0], [10, 0], [0, 10]])
    truth = np.repeat(np.arange(3), 30)
    rows = centers[truth] + rng.normal(scale=0.5, size=(90, 2))
    result = cl3d.kmeans(rows, 3, restarts=5, seed=3)
    assert cl3d.adjusted_rand_index(result["labels"], truth.tolist()) == pytest.approx(1.0)
    assert result["centroids"].shape == (3, 2)


def test_input_selection_covers_modes():
    spec = cl3d.benchmark_spec(4)
    spec["train_per_class"] = 12
    spec["test_per_class"] = 2
    spec["points_per_cloud"] = 64
    ds = cl3d.synthetic_dataset(spec, seed=4)
    assert len(ds["class_names"]) == 8
    samples = ds["train"][0]
    clouds = [s["points"] for s in samples]
    ids = [s["id"] for s in samples]
    out = cl3d.select_exemplars(clouds, ids, method="input", k=4, affinity_k=4)
    assert len(out["indices"]) == 4
    assert out["exemplar_ids"] == [ids[i] for i in out["indices"]]
    assert sum(out["cluster_sizes"]) == len(clouds)
    with pytest.raises(cl3d.ConfigError, match="model required"):
        cl3d.select_exemplars(clouds, ids, method="fusion", k=4)


def test_run_experiment_and_delta(tmp_path):
    spec = cl3d.benchmark_spec(1)
    spec.update(train_per_class=6, test_per_class=3, points_per_cloud=24)
    config = {
        "dataset": {"synthetic": spec},
        "classes_per_stage": 4,
        "selection": {"name": "random", "exemplars_per_class": 2},
        "train": {"epochs": 1, "feature_width": 8},
        "output_dir": str(tmp_path),
        "seed": 1,
    }
    reports = cl3d.run_experiment(config, with_joint=True)
    assert [r["method"] for r in reports] == ["random", "joint"]
    assert len(reports[0]["stages"]) == 2
    assert math.isfinite(reports[0]["delta"])
    assert cl3d.compute_delta(94.3, 90.4) == 3.9


def test_bad_config_raises():
    with pytest.raises(cl3d.ConfigError):
        cl3d.run_experiment({"colour": "red"})
    assert "fusion" in cl3d.selection_names()
    assert cl3d.config_schema()["additionalProperties"] is False
