"""Image representation, codecs, geometry, and dataset ingestion.

Images are plain numpy arrays: grayscale is float64 (H, W), RGB is
float64 (H, W, 3), intensities in [0, 1]. Quantization to 8 bits
happens only at file boundaries (PGM read/write); everything in between
stays real-valued so repeated ops don't accumulate quantization error.

Binary PGM (P5, maxval 255) is the canonical interchange format with a
bit-exact reader/writer pair; other raster formats are read-only
conveniences via Pillow. Dataset directories follow the layout
``root/<class_name>/<file>`` with class indices assigned by sorted
class-name order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _backend

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601 luma

AUGMENT_OPS = ("rotate_small", "rotate_90", "rotate_270", "flip_h", "flip_v")


@dataclass
class LabeledDataset:
    """Items are (image-or-feature-vector, class index) pairs."""

    items: list[tuple[np.ndarray, int]]
    class_names: list[str]
    split: str = "train"

    def __post_init__(self) -> None:
        for _, label in self.items:
            if not 0 <= label < len(self.class_names):
                raise ValueError(
                    f"label {label} out of range for {len(self.class_names)} classes"
                )

    def __len__(self) -> int:
        return len(self.items)

    def labels(self) -> np.ndarray:
        return np.array([label for _, label in self.items], dtype=np.int64)

    def stack(self) -> np.ndarray:
        """All item arrays stacked along a new leading axis."""
        if not self.items:
            raise ValueError("empty dataset")
        return np.stack([arr for arr, _ in self.items])


def _check_gray(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grayscale image must be 2-D, got shape {arr.shape}")
    return arr


def to_grayscale(img) -> np.ndarray:
    """BT.601 luma: y = 0.299 r + 0.587 g + 0.114 b. Gray passes through."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        return arr.copy()
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) rgb image, got shape {arr.shape}")
    r, g, b = arr[:, :, 0], arr[:, :, 1], arr[:, :, 2]
    return GRAY_WEIGHTS[0] * r + GRAY_WEIGHTS[1] * g + GRAY_WEIGHTS[2] * b


def _axis_positions(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # center-aligned sampling: output pixel centers mapped into input coords
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    low = np.floor(pos)
    frac = pos - low
    i0 = np.clip(low, 0, n_in - 1).astype(np.int64)
    i1 = np.clip(low + 1, 0, n_in - 1).astype(np.int64)
    return i0, i1, frac


def resize(img, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize to (out_h, out_w)."""
    arr = _check_gray(img)
    out_w = int(out_w)
    out_h = int(out_h)
    if out_w < 1 or out_h < 1:
        raise ValueError(f"target size must be >= 1, got {out_w}x{out_h}")
    if (out_h, out_w) == arr.shape:
        return arr.copy()
    r0, r1, rf = _axis_positions(arr.shape[0], out_h)
    rows = arr[r0, :] * (1.0 - rf)[:, None] + arr[r1, :] * rf[:, None]
    c0, c1, cf = _axis_positions(arr.shape[1], out_w)
    return rows[:, c0] * (1.0 - cf)[None, :] + rows[:, c1] * cf[None, :]


def _rotate_numpy(arr: np.ndarray, cos_t: float, sin_t: float, fill: float) -> np.ndarray:
    h, w = arr.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    rr, cc = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    dx = cc - cx
    dy = rr - cy
    sx = cos_t * dx + sin_t * dy + cx
    sy = -sin_t * dx + cos_t * dy + cy
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    out = np.zeros((h, w), dtype=np.float64)
    for ix, iy, wgt in (
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1.0, y0, fx * (1.0 - fy)),
        (x0, y0 + 1.0, (1.0 - fx) * fy),
        (x0 + 1.0, y0 + 1.0, fx * fy),
    ):
        inside = (ix >= 0) & (ix <= w - 1) & (iy >= 0) & (iy <= h - 1)
        xi = np.clip(ix, 0, w - 1).astype(np.int64)
        yi = np.clip(iy, 0, h - 1).astype(np.int64)
        out += wgt * np.where(inside, arr[yi, xi], fill)
    return out


if _backend.numba_available:
    import numba
    from numba import prange

    @numba.njit(cache=True, parallel=True)
    def _rotate_numba(arr, cos_t, sin_t, fill):  # pragma: no cover - via dispatch
        h, w = arr.shape
        cy = (h - 1) / 2.0
        cx = (w - 1) / 2.0
        out = np.zeros((h, w), dtype=np.float64)
        for r in prange(h):
            dy = r - cy
            for c in range(w):
                dx = c - cx
                sx = cos_t * dx + sin_t * dy + cx
                sy = -sin_t * dx + cos_t * dy + cy
                x0 = math.floor(sx)
                y0 = math.floor(sy)
                fx = sx - x0
                fy = sy - y0
                acc = 0.0
                for j in range(2):
                    for i in range(2):
                        xi = x0 + i
                        yi = y0 + j
                        wx = fx if i == 1 else 1.0 - fx
                        wy = fy if j == 1 else 1.0 - fy
                        if 0 <= xi <= w - 1 and 0 <= yi <= h - 1:
                            v = arr[yi, xi]
                        else:
                            v = fill
                        acc += (wx * wy) * v
                out[r, c] = acc
        return out


def rotate(img, degrees: float, fill: float = 0.0) -> np.ndarray:
    """Rotate about the image center with bilinear sampling.

    Output dimensions equal input dimensions; samples falling outside
    the source read ``fill``. Square images at exact multiples of 90
    degrees take an index-permutation path, so those rotations are
    lossless.
    """
    arr = _check_gray(img)
    degrees = float(degrees)
    if not 0.0 <= fill <= 1.0:
        raise ValueError(f"fill must be in [0, 1], got {fill}")
    h, w = arr.shape
    if h == w and degrees % 90.0 == 0.0:
        return np.rot90(arr, -int(degrees // 90.0) % 4).copy()
    theta = math.radians(degrees)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    if _backend.use_numba():
        return _rotate_numba(arr, cos_t, sin_t, float(fill))
    return _rotate_numpy(arr, cos_t, sin_t, float(fill))


def flip(img, axis: str) -> np.ndarray:
    """Mirror: 'horizontal' reverses columns, 'vertical' reverses rows."""
    arr = _check_gray(img)
    if axis == "horizontal":
        return arr[:, ::-1].copy()
    if axis == "vertical":
        return arr[::-1, :].copy()
    raise ValueError(f"axis must be 'horizontal' or 'vertical', got {axis!r}")


def augment_dataset(ds: LabeledDataset, target_count: int, seed: int) -> LabeledDataset:
    """Grow a dataset to target_count by appending transformed copies.

    Each appended item applies one op drawn uniformly from
    {rotation U(-20, +20) degrees, rotation 90, rotation 270,
    horizontal flip, vertical flip} to a uniformly chosen original
    item. Labels are preserved. Deterministic given seed.
    """
    if len(ds) == 0:
        raise ValueError("cannot augment an empty dataset")
    target_count = int(target_count)
    if target_count < len(ds):
        raise ValueError(
            f"target_count {target_count} below current size {len(ds)}"
        )
    rng = np.random.default_rng(seed)
    items = list(ds.items)
    n = len(ds.items)
    while len(items) < target_count:
        src, label = ds.items[int(rng.integers(0, n))]
        op = AUGMENT_OPS[int(rng.integers(0, len(AUGMENT_OPS)))]
        if op == "rotate_small":
            out = rotate(src, float(rng.uniform(-20.0, 20.0)))
        elif op == "rotate_90":
            out = rotate(src, 90.0)
        elif op == "rotate_270":
            out = rotate(src, 270.0)
        elif op == "flip_h":
            out = flip(src, "horizontal")
        else:
            out = flip(src, "vertical")
        items.append((out, label))
    return LabeledDataset(items, list(ds.class_names), ds.split)


# ---------------------------------------------------------------------------
# codecs


def write_pgm(img, path) -> None:
    """Binary PGM (P5, maxval 255). Values are rounded to 8 bits."""
    arr = _check_gray(img)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("intensities must be within [0, 1] to write PGM")
    quant = np.rint(arr * 255.0).astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(quant.tobytes())


def _read_pgm_tokens(data: bytes, count: int) -> tuple[list[int], int]:
    # PGM header: ASCII tokens separated by whitespace, '#' starts a comment
    tokens: list[int] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise ValueError("truncated PGM header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] not in (b"\n", b"\r"):
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace():
                j += 1
            tokens.append(int(data[i:j]))
            i = j
    return tokens, i + 1  # consume the single whitespace after the last token


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM written by write_pgm (or any P5, maxval 255)."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read image file {path}: {exc}") from exc
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    (w, h, maxval), offset = _read_pgm_tokens(data[2:], 3)
    offset += 2
    if maxval != 255:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}, expected 255")
    payload = data[offset : offset + w * h]
    if len(payload) != w * h:
        raise ValueError(f"{path}: PGM payload truncated")
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w) / 255.0


def read_image(path) -> np.ndarray:
    """Read a raster file as an RGB float array (H, W, 3) in [0, 1].

    PGM goes through the native bit-exact reader (gray replicated to
    three channels); other formats are decoded by Pillow.
    """
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        gray = read_pgm(path)
        return np.repeat(gray[:, :, np.newaxis], 3, axis=2)
    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover - Pillow is a declared dep
        raise ImportError(f"Pillow is required to read {path.suffix} files") from exc
    try:
        with Image.open(path) as im:
            rgb = np.asarray(im.convert("RGB"), dtype=np.float64)
    except OSError as exc:
        raise OSError(f"cannot read image file {path}: {exc}") from exc
    return rgb / 255.0


# ---------------------------------------------------------------------------
# dataset directories: root/<class_name>/<file>


def load_dataset_dir(root, split: str = "train", size: int | None = None) -> LabeledDataset:
    """Ingest a dataset directory, converting everything to grayscale.

    Class indices follow sorted class-directory names; files within a
    class are read in sorted name order. ``size`` resizes every image
    to size-by-size after grayscale conversion.
    """
    root = Path(root)
    if not root.is_dir():
        raise OSError(f"dataset directory not found: {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not class_dirs:
        raise ValueError(f"no class directories under {root}")
    items: list[tuple[np.ndarray, int]] = []
    names: list[str] = []
    for idx, cdir in enumerate(class_dirs):
        names.append(cdir.name)
        files = sorted(p for p in cdir.iterdir() if p.is_file())
        if not files:
            warnings.warn(f"class directory {cdir} is empty")
            continue
        for fpath in files:
            gray = to_grayscale(read_image(fpath))
            if size is not None and gray.shape != (size, size):
                gray = resize(gray, size, size)
            items.append((gray, idx))
    return LabeledDataset(items, names, split)


def write_dataset_dir(ds: LabeledDataset, root) -> int:
    """Write a grayscale image dataset as PGM files; returns file count.

    Layout is ``root/<class_name>/img_<index>.pgm`` with a dataset-wide
    running index, so load_dataset_dir round-trips labels and order.
    """
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for name in ds.class_names:
        (root / name).mkdir(exist_ok=True)
    for i, (arr, label) in enumerate(ds.items):
        write_pgm(arr, root / ds.class_names[label] / f"img_{i:06d}.pgm")
    return len(ds.items)
