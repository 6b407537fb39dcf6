"""The preprocessing pipeline: spectra to line-profile features.

An n-by-n image becomes a 2n-vector: the magnitudes along the central
row and central column of the filtered, center-shifted spectrum. Two
ablation variants drop one pipeline step each:

* ``full``           profiles of fftshift(dft2(img) * dft2(filter))
* ``no_convolution`` profiles of fftshift(dft2(img))
* ``no_shift``       profiles of dft2(img) * dft2(filter), unshifted

The flattened baseline (raw n^2 pixels) is the comparison
representation. A per-dimension z-score standardizer serves the MLP;
kNN consumes raw magnitudes.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import lgfilter, spectral
from .imagecore import LabeledDataset

LINE_PROFILE = "line_profile_2n"
FLATTENED = "flattened_n2"
FEATURE_KINDS = (LINE_PROFILE, FLATTENED)

MODES = ("full", "no_convolution", "no_shift")

DEFAULT_OMEGA = 0.9

_STD_FLOOR = 1e-8

# batch driver slice size: bounds the complex spectrum stack held at once
_CHUNK = 256


def line_profiles(shifted) -> np.ndarray:
    """Magnitudes along the central row, then the central column.

    Input must be square n-by-n; output has length 2n. Row floor(n/2)
    and column floor(n/2) are where fftshift parks the zero-frequency
    bin, so both profiles pass through the spectrum center.
    """
    arr = np.asarray(shifted)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"line profiles need a square matrix, got {arr.shape}")
    mid = arr.shape[0] // 2
    return np.concatenate([np.abs(arr[mid, :]), np.abs(arr[:, mid])])


def _check_square_image(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(
            f"pipeline input must be a square image, got {arr.shape}; resize first"
        )
    return arr


def _check_mode(mode: str) -> str:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def lg_preprocess(img, omega: float = DEFAULT_OMEGA, mode: str = "full") -> np.ndarray:
    """Line-profile feature vector of one square image."""
    arr = _check_square_image(img)
    _check_mode(mode)
    spectrum = spectral.dft2_forward(arr)
    if mode == "no_convolution":
        return line_profiles(spectral.fftshift(spectrum))
    product = spectral.pointwise_mul(
        spectrum, lgfilter.filter_spectrum(omega, arr.shape[0])
    )
    if mode == "no_shift":
        return line_profiles(product)
    return line_profiles(spectral.fftshift(product))


def _profiles_of_stack(stack: np.ndarray, omega: float, mode: str) -> np.ndarray:
    spectra = spectral.dft2_stack(stack)
    n = stack.shape[1]
    if mode != "no_convolution":
        spectra *= lgfilter.filter_spectrum(omega, n)
    if mode != "no_shift":
        spectra = np.roll(spectra, (n // 2, n // 2), axis=(1, 2))
    mid = n // 2
    return np.concatenate(
        [np.abs(spectra[:, mid, :]), np.abs(spectra[:, :, mid])], axis=1
    )


def lg_preprocess_batch(
    images,
    omega: float = DEFAULT_OMEGA,
    mode: str = "full",
    workers: int | None = None,
) -> np.ndarray:
    """lg_preprocess over a batch; returns (len(images), 2n).

    Output row i always corresponds to input image i regardless of the
    worker pool's completion order. workers=None uses the available
    parallelism; the batch is processed in fixed slices either way, so
    results do not depend on the worker count.
    """
    _check_mode(mode)
    if isinstance(images, LabeledDataset):
        images = [arr for arr, _ in images.items]
    arrs = [_check_square_image(im) for im in images]
    if not arrs:
        return np.zeros((0, 0))
    n = arrs[0].shape[0]
    for a in arrs:
        if a.shape[0] != n:
            raise ValueError("batch images must share one size")
    lgfilter.filter_spectrum(omega, n)  # build once outside the pool
    stack = np.stack(arrs)
    out = np.empty((len(arrs), 2 * n))
    slices = [slice(s, min(s + _CHUNK, len(arrs))) for s in range(0, len(arrs), _CHUNK)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers <= 1 or len(slices) == 1:
        for sl in slices:
            out[sl] = _profiles_of_stack(stack[sl], omega, mode)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            jobs = {
                pool.submit(_profiles_of_stack, stack[sl], omega, mode): sl
                for sl in slices
            }
            for job, sl in jobs.items():
                out[sl] = job.result()
    return out


def flatten_baseline(img) -> np.ndarray:
    """Row-major copy of the raw intensities (the n^2 baseline)."""
    return np.asarray(img, dtype=np.float64).ravel().copy()


def feature_dim(kind: str, n: int) -> int:
    if kind == LINE_PROFILE:
        return 2 * n
    if kind == FLATTENED:
        return n * n
    raise ValueError(f"unknown feature kind {kind!r}")


# ---------------------------------------------------------------------------
# standardization (z-score fitted on the training split; used by the MLP)


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # floored, never zero

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("standardizer mean/std must be matching 1-D arrays")


def fit_standardizer(train) -> Standardizer:
    """Per-dimension mean/std over the training features.

    Accepts a LabeledDataset of feature vectors or a (N, D) matrix.
    Columns are sorted before the reductions, so the fit is bit-exactly
    invariant to the order of training items. Stds are floored at 1e-8.
    """
    if isinstance(train, LabeledDataset):
        mat = train.stack()
    else:
        mat = np.asarray(train, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ValueError(f"expected a non-empty (N, D) feature matrix, got {mat.shape}")
    ordered = np.sort(mat, axis=0)
    mean = ordered.mean(axis=0)
    # constant columns keep their exact value so they standardize to 0
    constant = ordered[0] == ordered[-1]
    mean[constant] = ordered[0][constant]
    var = ((ordered - mean) ** 2).mean(axis=0)
    std = np.maximum(np.sqrt(var), _STD_FLOOR)
    return Standardizer(mean=mean, std=std)


def apply_standardizer(s: Standardizer, fv) -> np.ndarray:
    """(fv - mean) / std, for one vector or a (N, D) batch."""
    arr = np.asarray(fv, dtype=np.float64)
    if arr.shape[-1] != s.mean.shape[0]:
        raise ValueError(
            f"feature dim {arr.shape[-1]} does not match standardizer dim {s.mean.shape[0]}"
        )
    return (arr - s.mean) / s.std


# ---------------------------------------------------------------------------
# feature CSV: one row per instance, "label,v0,...,vD-1", full precision


def write_features_csv(path, ds: LabeledDataset) -> int:
    """Write feature rows; returns the instance count.

    %.17g formatting round-trips float64 exactly, so the file is a
    lossless (and byte-deterministic) carrier of the features.
    """
    rows = 0
    with open(path, "w", encoding="ascii") as fh:
        for vec, label in ds.items:
            arr = np.asarray(vec, dtype=np.float64).ravel()
            fh.write(f"{label}," + ",".join(f"{v:.17g}" for v in arr) + "\n")
            rows += 1
    return rows


def read_features_csv(path, class_names: list[str] | None = None, split: str = "train") -> LabeledDataset:
    """Read a feature CSV back into a LabeledDataset.

    The format carries only integer labels; real class names can be
    supplied, otherwise class_<i> placeholders cover the label range.
    """
    path = Path(path)
    items: list[tuple[np.ndarray, int]] = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                head, _, rest = line.partition(",")
                try:
                    label = int(head)
                    vec = np.array([float(tok) for tok in rest.split(",")])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad feature row: {exc}") from exc
                items.append((vec, label))
    except OSError as exc:
        raise OSError(f"cannot read features file {path}: {exc}") from exc
    if not items:
        raise ValueError(f"{path}: no feature rows")
    dims = {vec.shape[0] for vec, _ in items}
    if len(dims) != 1:
        raise ValueError(f"{path}: inconsistent feature dimensions {sorted(dims)}")
    max_label = max(label for _, label in items)
    if class_names is None:
        class_names = [f"class_{i}" for i in range(max_label + 1)]
    elif max_label >= len(class_names):
        raise ValueError(
            f"{path}: label {max_label} out of range for {len(class_names)} class names"
        )
    return LabeledDataset(items, class_names, split)
