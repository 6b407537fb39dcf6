"""Acceptance gate: one test per numbered criterion from the README.

Each test prints a single `ACCEPTANCE <n> <name>: PASS|FAIL` line (visible
with -v/-s or on failure) and asserts the criterion's pinned tolerances.
The shape corpora are built once per module and shared across criteria.
"""

import time

import numpy as np
import pytest
from conftest import rel_error

from lgprep.cli import main as cli_main
from lgprep.evalmetrics import evaluate
from lgprep.features import (
    FLATTENED,
    LINE_PROFILE,
    feature_dim,
    flatten_baseline,
    lg_preprocess,
    lg_preprocess_batch,
)
from lgprep.imagecore import LabeledDataset, augment_dataset
from lgprep.learners import (
    TrainConfig,
    _loss_and_grads,
    knn_fit,
    mlp_init,
    mlp_train,
    model_size_bytes,
)
from lgprep.lgfilter import laguerre_gauss_filter, filter_spectrum
from lgprep.spectral import dft2_forward, dft2_naive, fftshift, magnitude, pointwise_mul
from lgprep.synthshapes import (
    CLASS_NAMES,
    TABLE_COUNTS,
    generate_binary_dataset,
    generate_dataset,
)


def _report(num, name, ok, detail=""):
    print(f"ACCEPTANCE {num} {name}: {'PASS' if ok else 'FAIL'}"
          + (f" ({detail})" if detail else ""))
    assert ok, f"acceptance criterion {num} ({name}): {detail}"


def _feature_ds(fv, labels, names, split):
    items = [(fv[i], int(labels[i])) for i in range(len(labels))]
    return LabeledDataset(items=items, class_names=list(names), split=split)


def _featurize(ds, mode="full"):
    imgs = np.stack([im for im, _ in ds.items])
    labels = np.array([lbl for _, lbl in ds.items])
    fv = lg_preprocess_batch(imgs, omega=0.9, mode=mode)
    return _feature_ds(fv, labels, ds.class_names, ds.split)


REDUCED_COUNTS = {
    "train": (1000, 1000, 1000),
    "validation": (300, 300, 300),
    "test": (300, 300, 300),
}


@pytest.fixture(scope="module")
def reduced():
    """Reduced corpus pipeline, timed end to end for criterion 6."""
    t0 = time.perf_counter()
    splits = generate_dataset(size=64, counts=REDUCED_COUNTS, seed=0)
    feats = {s: _featurize(ds) for s, ds in splits.items()}
    knn = knn_fit(feats["train"], k=1)
    knn_acc = evaluate(knn, feats["test"]).accuracy
    net, _ = mlp_train(
        mlp_init(128, len(CLASS_NAMES), seed=0),
        feats["train"],
        feats["validation"],
        TrainConfig(seed=0),
    )
    mlp_acc = evaluate(net, feats["test"]).accuracy
    elapsed = time.perf_counter() - t0
    return {
        "splits": splits,
        "feats": feats,
        "knn_acc": knn_acc,
        "mlp_acc": mlp_acc,
        "elapsed": elapsed,
    }


@pytest.fixture(scope="module")
def full_metrics():
    """Reference-count corpus accuracies; images freed on return."""
    splits = generate_dataset(size=64, counts=TABLE_COUNTS, seed=0)
    feats = {s: _featurize(ds) for s, ds in splits.items()}
    del splits
    knn = knn_fit(feats["train"], k=1)
    knn_acc = evaluate(knn, feats["test"]).accuracy
    net, _ = mlp_train(
        mlp_init(128, len(CLASS_NAMES), seed=0),
        feats["train"],
        feats["validation"],
        TrainConfig(seed=0),
    )
    mlp_acc = evaluate(net, feats["test"]).accuracy
    return {"knn_acc": knn_acc, "mlp_acc": mlp_acc}


def test_criterion_01_fft_matches_naive_transform():
    # warm the kernels first so the bound covers the algorithms, not jit
    dft2_forward(np.zeros((4, 4)))
    dft2_naive(np.zeros((4, 4)))
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for n in (4, 8, 12, 16, 64):
        a = rng.standard_normal((n, n))
        worst = max(worst, rel_error(dft2_forward(a), dft2_naive(a)))
    a = rng.standard_normal((16, 16))
    b = rng.standard_normal((16, 16))
    fa = dft2_forward(a)
    lin = rel_error(dft2_forward(2.5 * a - 1.5 * b), 2.5 * fa - 1.5 * dft2_forward(b))
    energy = float(np.sum(a * a))
    parseval = abs(float(np.sum(magnitude(fa) ** 2)) / a.size - energy) / energy
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-9 and lin < 1e-8 and parseval < 1e-8 and elapsed < 5.0
    _report(1, "fft matches naive transform", ok,
            f"rel {worst:.2e} lin {lin:.2e} parseval {parseval:.2e} {elapsed:.2f}s")


def _circular_convolve(a, b):
    n, m = a.shape
    out = np.zeros((n, m))
    for r in range(n):
        for c in range(m):
            acc = 0.0
            for i in range(n):
                for j in range(m):
                    acc += a[i, j] * b[(r - i) % n, (c - j) % m]
            out[r, c] = acc
    return out


def test_criterion_02_convolution_theorem():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(3):
        a = rng.standard_normal((8, 8))
        b = rng.standard_normal((8, 8))
        product = pointwise_mul(dft2_forward(a), dft2_forward(b))
        via_conv = dft2_forward(_circular_convolve(a, b))
        worst = max(worst, rel_error(product, via_conv))
    ok = worst < 1e-8
    _report(2, "convolution theorem", ok, f"rel {worst:.2e}")


def test_criterion_03_filter_sanity():
    spatial = laguerre_gauss_filter(0.9, 64)
    origin_zero = spatial[32, 32] == 0.0

    spec_mag = magnitude(filter_spectrum(0.9, 64))
    dc_ok = spec_mag[0, 0] < 1e-6 * spec_mag.max()

    radii = []
    for omega in (0.5, 0.7, 0.9):
        shifted = magnitude(fftshift(filter_spectrum(omega, 64)))
        r, c = np.unravel_index(np.argmax(shifted), shifted.shape)
        radii.append(float(np.hypot(r - 32, c - 32)))
    radius_ok = radii[0] <= radii[1] <= radii[2]

    ok = origin_zero and dc_ok and radius_ok
    _report(3, "filter sanity", ok,
            f"origin {spatial[32, 32]} dc/peak {spec_mag[0, 0] / spec_mag.max():.2e} radii {radii}")


def test_criterion_04_feature_dimension():
    img = np.random.default_rng(2).random((64, 64))
    lp = lg_preprocess(img, omega=0.9)
    flat = flatten_baseline(img)
    ok = (lp.shape == (128,) and flat.shape == (4096,)
          and feature_dim(LINE_PROFILE, 64) == 128
          and feature_dim(FLATTENED, 64) == 4096)
    _report(4, "feature dimension", ok, f"lp {lp.shape} flat {flat.shape}")


def test_criterion_05_mlp_gradient_check():
    rng = np.random.default_rng(3)
    net = mlp_init(6, 3, seed=0)
    x = rng.random((3, 6))
    y = rng.integers(0, 3, 3)
    _, grads_w, grads_b = _loss_and_grads(net.weights, net.biases, x, y, None)
    h = 1e-5

    def loss(weights, biases):
        value, _, _ = _loss_and_grads(weights, biases, x, y, None)
        return value

    worst = 0.0
    for li in range(len(net.weights)):
        for _ in range(5):
            i = int(rng.integers(0, net.weights[li].shape[0]))
            j = int(rng.integers(0, net.weights[li].shape[1]))
            wp = [w.copy() for w in net.weights]
            wm = [w.copy() for w in net.weights]
            wp[li][i, j] += h
            wm[li][i, j] -= h
            numeric = (loss(wp, net.biases) - loss(wm, net.biases)) / (2 * h)
            analytic = grads_w[li][i, j]
            worst = max(worst, abs(numeric - analytic)
                        / max(abs(numeric), abs(analytic), 1e-10))
        j = int(rng.integers(0, net.biases[li].shape[0]))
        bp = [b.copy() for b in net.biases]
        bm = [b.copy() for b in net.biases]
        bp[li][j] += h
        bm[li][j] -= h
        numeric = (loss(net.weights, bp) - loss(net.weights, bm)) / (2 * h)
        worst = max(worst, abs(numeric - grads_b[li][j])
                    / max(abs(numeric), abs(grads_b[li][j]), 1e-10))
    ok = worst < 1e-4
    _report(5, "mlp gradient check", ok, f"worst rel {worst:.2e}")


def test_criterion_06_shape_classification(full_metrics, reduced):
    ok = (full_metrics["knn_acc"] >= 0.95
          and full_metrics["mlp_acc"] >= 0.90
          and reduced["knn_acc"] >= 0.95
          and reduced["mlp_acc"] >= 0.90
          and reduced["elapsed"] < 600.0)
    _report(6, "shape classification", ok,
            f"full knn {full_metrics['knn_acc']:.4f} mlp {full_metrics['mlp_acc']:.4f}; "
            f"reduced knn {reduced['knn_acc']:.4f} mlp {reduced['mlp_acc']:.4f} "
            f"in {reduced['elapsed']:.1f}s")


def test_criterion_07_ablation_trend(reduced):
    full_acc = reduced["knn_acc"]
    accs = {}
    for mode in ("no_convolution", "no_shift"):
        train = _featurize(reduced["splits"]["train"], mode=mode)
        test = _featurize(reduced["splits"]["test"], mode=mode)
        accs[mode] = evaluate(knn_fit(train, k=1), test).accuracy
    conv_delta = abs(full_acc - accs["no_convolution"])
    shift_delta = full_acc - accs["no_shift"]
    ok = conv_delta < 0.03 and shift_delta >= 0.10
    _report(7, "ablation trend", ok,
            f"full {full_acc:.4f} no_conv {accs['no_convolution']:.4f} "
            f"(delta {conv_delta:.4f}) no_shift {accs['no_shift']:.4f} "
            f"(delta {shift_delta:.4f})")


def test_criterion_08_model_size_ratio(reduced):
    subset = reduced["splits"]["train"].items[:200]
    labels = np.array([lbl for _, lbl in subset])
    imgs = np.stack([im for im, _ in subset])
    lp = _feature_ds(lg_preprocess_batch(imgs, omega=0.9), labels, CLASS_NAMES, "train")
    flat = _feature_ds(np.stack([flatten_baseline(im) for im, _ in subset]),
                       labels, CLASS_NAMES, "train")
    lp_bytes = model_size_bytes(knn_fit(lp, k=1))
    flat_bytes = model_size_bytes(knn_fit(flat, k=1, feature_kind=FLATTENED))
    ratio = flat_bytes / lp_bytes
    ok = 25.0 <= ratio <= 40.0
    _report(8, "model size ratio", ok,
            f"{flat_bytes} / {lp_bytes} = {ratio:.2f}")


BINARY_COUNTS = {"train": (240, 300), "validation": (80, 80), "test": (170, 130)}


def test_criterion_09_binary_task_pipeline(tmp_path, capsys):
    # end-to-end through the cli: synthesize with augmentation to a fixed
    # target, preprocess, train the mlp, evaluate with roc export
    data = tmp_path / "data"
    feats = tmp_path / "feats"
    model = tmp_path / "net.model"
    out = tmp_path / "eval"
    counts = [f"--counts={s}={a},{b}" for s, (a, b) in BINARY_COUNTS.items()]
    assert cli_main(["synth", "--binary", "--out", str(data), "--size", "64",
                     "--seed", "0", "--augment-train-to", "700", *counts]) == 0
    assert cli_main(["preprocess", "--data", str(data), "--out", str(feats),
                     "--size", "64"]) == 0
    assert cli_main(["train", "--features", str(feats), "--out", str(model),
                     "--model", "mlp", "--seed", "0"]) == 0
    assert cli_main(["eval", "--model", str(model),
                     "--features", str(feats / "features_test.csv"),
                     "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    pairs = dict(line.split("=", 1) for line in stdout.splitlines() if "=" in line)
    auc = float(pairs["auc"])
    roc_exported = (out / "roc.csv").exists()
    f1_exported = "f1_background" in pairs and "f1_object" in pairs

    # degenerate all-majority predictor: trained on majority items only,
    # it must score accuracy equal to the majority fraction and zero f1
    # on the minority class
    splits = generate_binary_dataset(size=64, counts=BINARY_COUNTS, seed=0)
    train = _featurize(augment_dataset(splits["train"], 700, seed=0))
    majority = LabeledDataset(
        items=[(f, lbl) for f, lbl in train.items if lbl == 0],
        class_names=train.class_names,
        split="train",
    )
    degenerate = evaluate(knn_fit(majority, k=1), _featurize(splits["test"]))
    majority_fraction = BINARY_COUNTS["test"][0] / sum(BINARY_COUNTS["test"])
    degenerate_ok = (degenerate.accuracy == majority_fraction
                     and degenerate.f1_per_class[1] == 0.0)

    ok = auc > 0.8 and roc_exported and f1_exported and degenerate_ok
    _report(9, "binary task pipeline", ok,
            f"auc {auc:.4f} roc {roc_exported} degenerate acc "
            f"{degenerate.accuracy:.4f} == {majority_fraction:.4f}, "
            f"minority f1 {degenerate.f1_per_class[1]}")


def _run_all_commands(root):
    data = root / "data"
    feats = root / "feats"
    rcs = [
        cli_main(["synth", "--out", str(data), "--size", "32", "--seed", "0",
                  "--counts", "train=6,6,6", "--counts", "validation=4,4,4",
                  "--counts", "test=4,4,4"]),
        cli_main(["preprocess", "--data", str(data), "--out", str(feats),
                  "--size", "32"]),
        cli_main(["train", "--features", str(feats), "--out", str(root / "knn.model"),
                  "--model", "knn"]),
        cli_main(["train", "--features", str(feats), "--out", str(root / "mlp.model"),
                  "--model", "mlp", "--epochs", "4", "--seed", "0",
                  "--history", str(root / "history.csv")]),
        cli_main(["eval", "--model", str(root / "knn.model"),
                  "--features", str(feats / "features_test.csv"),
                  "--out", str(root / "eval")]),
        cli_main(["ablate", "--data", str(data), "--out", str(root / "ablation.txt"),
                  "--size", "32"]),
        cli_main(["profiles", "--features", str(feats / "features_test.csv"),
                  "--out", str(root / "profiles.csv")]),
    ]
    assert all(rc == 0 for rc in rcs)


def test_criterion_10_deterministic_artifacts(tmp_path, capsys):
    first = tmp_path / "a"
    second = tmp_path / "b"
    _run_all_commands(first)
    _run_all_commands(second)
    capsys.readouterr()
    files_a = sorted(p.relative_to(first) for p in first.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(second) for p in second.rglob("*") if p.is_file())
    same_names = files_a == files_b
    diffs = [str(rel) for rel in files_a
             if (first / rel).read_bytes() != (second / rel).read_bytes()]
    ok = same_names and not diffs and len(files_a) > 50
    _report(10, "deterministic artifacts", ok,
            f"{len(files_a)} files, diffs: {diffs[:5]}")
