"""Smoke tests for the fedproc extension module."""

import math
import os
import tempfile

import fedproc


def approx(a, b, tol=1e-9):
    assert abs(a - b) <= tol, (a, b)


def test_losses():
    approx(fedproc.cosine_similarity([1.0, 0.0], [1.0, 0.0]), 1.0)
    approx(fedproc.cosine_similarity([1.0, 1.0], [1.0, 0.0]), 0.70710678118654746)
    approx(fedproc.cross_entropy([0.5] * 10, 3), math.log(10.0))

    protos = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    approx(fedproc.gpc_loss([1.0, 1.0, 1.0], 0, protos), math.log(3.0))
    approx(fedproc.gpc_loss([1.0, 0.0, 0.0], 0, protos), 0.55144471393205108)

    blended = fedproc.blended_loss([1.0, 0.0, 0.0], [0.2, 0.1, -0.4], 0, protos, 5, 10)
    expected = 0.5 * fedproc.gpc_loss([1.0, 0.0, 0.0], 0, protos) + 0.5 * fedproc.cross_entropy(
        [0.2, 0.1, -0.4], 0
    )
    approx(blended, expected, 1e-12)

    assert fedproc.alpha(0, 100) == 1.0
    assert fedproc.alpha(50, 100) == 0.5

    try:
        fedproc.cosine_similarity([0.0, 0.0], [1.0, 0.0])
        raise AssertionError("zero-norm input should raise")
    except fedproc.DegenerateInputError:
        pass
    try:
        fedproc.cross_entropy([1.0, 2.0], 5)
        raise AssertionError("out-of-range label should raise")
    except fedproc.UsageError:
        pass


def test_data():
    feats, labels = fedproc.generate_blobs(3, 4, 5, 0.1, 42)
    assert len(feats) == 15 and len(labels) == 15
    assert all(len(f) == 4 for f in feats)
    feats2, labels2 = fedproc.generate_blobs(3, 4, 5, 0.1, 42)
    assert feats == feats2 and labels == labels2

    counts = fedproc.partition_class_counts(labels, 3, 2, 0.5, 7)
    assert len(counts) == 2
    for k in range(3):
        assert sum(row[k] for row in counts) == 5


def test_experiment_runs_deterministically():
    body = "\n".join(
        [
            "[experiment]",
            "rounds = 2",
            "local_epochs = 1",
            "batch_size = 16",
            "clients = 3",
            "learning_rate = 0.1",
            "seed = 5",
            "[network]",
            "hidden = 12",
            "projection_dim = 8",
            "[data]",
            "classes = 3",
            "dim = 6",
            "per_class = 30",
            "spread = 0.3",
        ]
    )
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as f:
        f.write(body)
        path = f.name
    try:
        rows = fedproc.run_experiment(path)
        again = fedproc.run_experiment(path)
        assert rows == again
        assert [r["round"] for r in rows] == [0, 1]
        assert rows[0]["alpha"] == 1.0 and rows[1]["alpha"] == 0.5
        assert all(0.0 <= r["top1_accuracy"] <= 1.0 for r in rows)
        reseeded = fedproc.run_experiment(path, seed=9)
        assert reseeded != rows
    finally:
        os.unlink(path)


def test_gradient_check():
    result = fedproc.gradient_check(seed=7, points=5)
    assert result["all_passed"], result
    assert len(result["cases"]) == 10


if __name__ == "__main__":
    test_losses()
    test_data()
    test_experiment_runs_deterministically()
    test_gradient_check()
    print("python smoke ok")
