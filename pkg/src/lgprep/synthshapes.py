"""Synthetic shape corpus: circles, squares, triangles on dark ground.

Rendering is anti-aliased by 4x4 subsampling: each pixel's value is the
fraction of its 16 subsample points falling inside the shape. All three
shapes are normalized to a common circumradius so `scale` means the same
thing across classes, with `aspect` squashing one axis (circle becomes
an ellipse, square a rectangle, triangle an isosceles).

Sampling is one-seed deterministic: every item draws its parameters from
`default_rng([seed, split_index, item_index])`, so any item can be
regenerated in isolation and insertion order never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _backend
from .imagecore import LabeledDataset

CLASS_NAMES = ("circle", "square", "triangle")
BINARY_CLASS_NAMES = ("background", "object")
SPLITS = ("train", "validation", "test")

# per-split, per-class item counts of the reference corpus
TABLE_COUNTS = {
    "train": (3277, 4058, 3608),
    "validation": (859, 803, 720),
    "test": (889, 847, 600),
}

FILL_MODES = ("filled", "stroke", "mixed")

_KIND_ELLIPSE = 0
_KIND_RECT = 1
_KIND_TRIANGLE = 2
_SS = 4  # subsamples per axis

MIN_TRIANGLE_ANGLE_DEG = 15.0


@dataclass(frozen=True)
class ShapeSpec:
    shape: str  # circle | square | triangle
    cx: float
    cy: float
    scale: float  # circumradius in pixels
    rotation_deg: float = 0.0
    aspect: float = 1.0  # in (0, 1]; 1 keeps the canonical proportions
    filled: bool = True
    stroke_px: float = 1.5
    noise: float = 0.0  # additive gaussian sigma
    seed: int = 0


def _triangle_vertices(aspect: float) -> np.ndarray:
    """Equilateral triangle squashed in y, renormalized to circumradius 1."""
    angles = np.deg2rad([90.0, 210.0, 330.0])
    verts = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    verts[:, 1] *= aspect
    return verts / np.linalg.norm(verts, axis=1).max()


def _triangle_min_angle_deg(verts: np.ndarray) -> float:
    angles = []
    for i in range(3):
        a = verts[(i + 1) % 3] - verts[i]
        b = verts[(i + 2) % 3] - verts[i]
        cosv = np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b))
        angles.append(math.degrees(math.acos(np.clip(cosv, -1.0, 1.0))))
    return min(angles)


def _shape_params(shape: str, scale: float, aspect: float) -> tuple[int, np.ndarray]:
    """Kind tag plus the local-frame parameter vector the kernels read."""
    if shape == "circle":
        return _KIND_ELLIPSE, np.array([scale, scale * aspect])
    if shape == "square":
        half = scale / math.sqrt(1.0 + aspect * aspect)
        return _KIND_RECT, np.array([half, half * aspect])
    if shape == "triangle":
        verts = _triangle_vertices(aspect) * scale
        if _triangle_min_angle_deg(verts) < MIN_TRIANGLE_ANGLE_DEG:
            raise ValueError(
                f"triangle with aspect {aspect} is too sliver-like to render"
            )
        params = np.empty(9)
        for i in range(3):
            p = verts[i]
            q = verts[(i + 1) % 3]
            nx, ny = -(q[1] - p[1]), q[0] - p[0]
            c = nx * p[0] + ny * p[1]
            if c < 0.0:  # orient so the centroid (origin) is inside
                nx, ny, c = -nx, -ny, -c
            params[3 * i : 3 * i + 3] = (nx, ny, c)
        return _KIND_TRIANGLE, params
    raise ValueError(f"unknown shape {shape!r}; expected one of {CLASS_NAMES}")


def _coverage_numpy(
    size: int, kind: int, cx: float, cy: float, cos_t: float, sin_t: float, p: np.ndarray
) -> np.ndarray:
    base = (np.arange(size * _SS) + 0.5) / _SS - 0.5
    dx = base[None, :] - cx
    dy = base[:, None] - cy
    xr = cos_t * dx + sin_t * dy
    yr = -sin_t * dx + cos_t * dy
    if kind == _KIND_ELLIPSE:
        tx = xr / p[0]
        ty = yr / p[1]
        inside = tx * tx + ty * ty <= 1.0
    elif kind == _KIND_RECT:
        inside = (np.abs(xr) <= p[0]) & (np.abs(yr) <= p[1])
    else:
        inside = (
            (p[0] * xr + p[1] * yr <= p[2])
            & (p[3] * xr + p[4] * yr <= p[5])
            & (p[6] * xr + p[7] * yr <= p[8])
        )
    counts = inside.reshape(size, _SS, size, _SS).sum(axis=(1, 3))
    return counts / float(_SS * _SS)


if _backend.use_numba():
    from numba import njit, prange

    @njit(cache=True, parallel=True)
    def _coverage_numba(size, kind, cx, cy, cos_t, sin_t, p):  # pragma: no cover
        inv = 1.0 / _SS
        out = np.empty((size, size))
        for py in prange(size):
            for px in range(size):
                hits = 0
                for sy in range(_SS):
                    dy = py + (sy + 0.5) * inv - 0.5 - cy
                    for sx in range(_SS):
                        dx = px + (sx + 0.5) * inv - 0.5 - cx
                        xr = cos_t * dx + sin_t * dy
                        yr = -sin_t * dx + cos_t * dy
                        if kind == _KIND_ELLIPSE:
                            tx = xr / p[0]
                            ty = yr / p[1]
                            if tx * tx + ty * ty <= 1.0:
                                hits += 1
                        elif kind == _KIND_RECT:
                            if abs(xr) <= p[0] and abs(yr) <= p[1]:
                                hits += 1
                        else:
                            if (
                                p[0] * xr + p[1] * yr <= p[2]
                                and p[3] * xr + p[4] * yr <= p[5]
                                and p[6] * xr + p[7] * yr <= p[8]
                            ):
                                hits += 1
                out[py, px] = hits / float(_SS * _SS)
        return out


def _coverage(size: int, shape: str, cx, cy, scale, rotation_deg, aspect) -> np.ndarray:
    kind, params = _shape_params(shape, scale, aspect)
    theta = math.radians(rotation_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    if _backend.use_numba():
        return _coverage_numba(size, kind, float(cx), float(cy), cos_t, sin_t, params)
    return _coverage_numpy(size, kind, float(cx), float(cy), cos_t, sin_t, params)


def _validate_spec(spec: ShapeSpec, size: int) -> None:
    if size < 8:
        raise ValueError(f"image size must be >= 8, got {size}")
    if spec.shape not in CLASS_NAMES:
        raise ValueError(f"unknown shape {spec.shape!r}; expected one of {CLASS_NAMES}")
    if spec.scale < 4.0:
        raise ValueError(f"scale must be >= 4 pixels, got {spec.scale}")
    if not 0.0 < spec.aspect <= 1.0:
        raise ValueError(f"aspect must be in (0, 1], got {spec.aspect}")
    if spec.noise < 0.0:
        raise ValueError(f"noise sigma must be >= 0, got {spec.noise}")
    if not spec.filled:
        if spec.stroke_px < 0.5 or spec.scale - spec.stroke_px < 1.0:
            raise ValueError(
                f"stroke width {spec.stroke_px} invalid for scale {spec.scale}"
            )
    s = spec.scale
    if spec.cx - s < 0 or spec.cx + s > size - 1 or spec.cy - s < 0 or spec.cy + s > size - 1:
        raise ValueError(
            f"shape of scale {s} at ({spec.cx}, {spec.cy}) does not fit in {size}x{size}"
        )


def render_shape(spec: ShapeSpec, size: int) -> np.ndarray:
    """Render one spec to a (size, size) float image in [0, 1].

    Stroke rendering subtracts an inner copy shrunk by stroke_px, which
    is exact per subsample because the shapes are convex and concentric.
    """
    _validate_spec(spec, size)
    cov = _coverage(size, spec.shape, spec.cx, spec.cy, spec.scale, spec.rotation_deg, spec.aspect)
    if not spec.filled:
        inner = _coverage(
            size,
            spec.shape,
            spec.cx,
            spec.cy,
            spec.scale - spec.stroke_px,
            spec.rotation_deg,
            spec.aspect,
        )
        cov = cov - inner
    if spec.noise > 0.0:
        rng = np.random.default_rng(spec.seed)
        cov = cov + rng.normal(0.0, spec.noise, (size, size))
    return np.clip(cov, 0.0, 1.0)


def _draw_spec(rng: np.random.Generator, shape: str, size: int, fill_mode: str) -> ShapeSpec:
    scale = rng.uniform(8.0, size / 2 - 2)
    rotation = rng.uniform(0.0, 360.0)
    aspect = rng.uniform(0.5, 1.0)
    noise = rng.uniform(0.0, 0.05)
    margin = scale + 1.0
    cx = rng.uniform(margin, size - margin)
    cy = rng.uniform(margin, size - margin)
    if fill_mode == "filled":
        filled = True
    elif fill_mode == "stroke":
        filled = False
    else:
        filled = bool(rng.random() < 0.5)
    stroke_px = float(rng.uniform(1.0, 3.0)) if not filled else 1.5
    seed = int(rng.integers(0, 2**63))
    return ShapeSpec(
        shape=shape,
        cx=float(cx),
        cy=float(cy),
        scale=float(scale),
        rotation_deg=float(rotation),
        aspect=float(aspect),
        filled=filled,
        stroke_px=stroke_px,
        noise=float(noise),
        seed=seed,
    )


def _check_counts(counts: dict) -> dict:
    for split, row in counts.items():
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}; expected subset of {SPLITS}")
        if len(row) != len(CLASS_NAMES) or any(int(c) < 0 for c in row):
            raise ValueError(f"counts for {split!r} must be {len(CLASS_NAMES)} non-negatives")
    return counts


def generate_dataset(
    size: int = 64,
    counts: dict | None = None,
    seed: int = 0,
    fill_mode: str = "filled",
) -> dict[str, LabeledDataset]:
    """Build the three-class corpus; returns one LabeledDataset per split.

    counts maps split name to per-class item counts and defaults to the
    reference corpus (TABLE_COUNTS). Item parameters are streamed from
    default_rng([seed, split_index, item_index]).
    """
    if fill_mode not in FILL_MODES:
        raise ValueError(f"fill_mode must be one of {FILL_MODES}, got {fill_mode!r}")
    counts = _check_counts(dict(counts) if counts is not None else TABLE_COUNTS)
    out: dict[str, LabeledDataset] = {}
    for si, split in enumerate(SPLITS):
        if split not in counts:
            continue
        items = []
        item_idx = 0
        for ci, cname in enumerate(CLASS_NAMES):
            for _ in range(int(counts[split][ci])):
                rng = np.random.default_rng([seed, si, item_idx])
                spec = _draw_spec(rng, cname, size, fill_mode)
                items.append((render_shape(spec, size), ci))
                item_idx += 1
        out[split] = LabeledDataset(items=items, class_names=list(CLASS_NAMES), split=split)
    return out


# ---------------------------------------------------------------------------
# binary proxy: textured background vs textured background + shape


def _texture(rng: np.random.Generator, size: int) -> np.ndarray:
    fx = rng.uniform(0.5, 3.0)
    fy = rng.uniform(0.5, 3.0)
    phase_x = rng.uniform(0.0, 2.0 * np.pi)
    phase_y = rng.uniform(0.0, 2.0 * np.pi)
    amp = rng.uniform(0.08, 0.2)
    base = rng.uniform(0.35, 0.55)
    ax = np.arange(size) / size
    field = base + amp * np.outer(
        np.sin(2.0 * np.pi * fy * ax + phase_y),
        np.sin(2.0 * np.pi * fx * ax + phase_x),
    )
    return field + rng.normal(0.0, 0.02, (size, size))


def generate_binary_dataset(
    size: int = 64,
    counts: dict | None = None,
    seed: int = 0,
) -> dict[str, LabeledDataset]:
    """Two-class corpus: class 0 is texture only, class 1 has a shape in it.

    counts maps split name to (background, object) item counts. Useful
    for exercising the binary metrics (ROC/AUC) on a problem where the
    line-profile features still separate the classes.
    """
    counts = dict(counts) if counts is not None else {
        "train": (300, 300),
        "validation": (80, 80),
        "test": (160, 160),
    }
    for split, row in counts.items():
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}; expected subset of {SPLITS}")
        if len(row) != 2 or any(int(c) < 0 for c in row):
            raise ValueError(f"counts for {split!r} must be 2 non-negatives")
    out: dict[str, LabeledDataset] = {}
    for si, split in enumerate(SPLITS):
        if split not in counts:
            continue
        items = []
        item_idx = 0
        for ci in range(2):
            for _ in range(int(counts[split][ci])):
                rng = np.random.default_rng([seed, 7, si, item_idx])
                img = _texture(rng, size)
                if ci == 1:
                    shape = CLASS_NAMES[int(rng.integers(0, len(CLASS_NAMES)))]
                    spec = _draw_spec(rng, shape, size, "filled")
                    contrast = rng.uniform(0.3, 0.5)
                    cov = _coverage(
                        size, spec.shape, spec.cx, spec.cy, spec.scale,
                        spec.rotation_deg, spec.aspect,
                    )
                    img = img + contrast * cov
                items.append((np.clip(img, 0.0, 1.0), ci))
                item_idx += 1
        out[split] = LabeledDataset(
            items=items, class_names=list(BINARY_CLASS_NAMES), split=split
        )
    return out
