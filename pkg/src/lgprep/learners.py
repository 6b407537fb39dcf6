"""The two classifiers and their serialized form.

kNN stores the training features verbatim, which is what makes the
line-profile representation shrink the model ~32x against the flattened
baseline. The MLP is a fixed relu stack (in -> 128 -> 64 -> 32 -> C,
softmax head) with inverted dropout (0.5, 0.25, 0.25) after the first
three layers, trained with mini-batch RMSProp on categorical
cross-entropy. Everything is plain numpy: the matrices are small enough
that BLAS-backed GEMMs beat anything hand-compiled.

Determinism contracts: one seed fixes init, shuffling, and dropout.
Training items are put in a canonical lexicographic order before the
seeded shuffle, so the trained model is invariant to the order the
caller happened to store the training set in.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .features import (
    LINE_PROFILE,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
)
from .imagecore import LabeledDataset

HIDDEN_WIDTHS = (128, 64, 32)
DROPOUT_RATES = (0.5, 0.25, 0.25)


class ModelFormatError(ValueError):
    """Model file is not a valid container (magic/version/layout)."""


class NumericError(RuntimeError):
    """Training or inference produced non-finite values."""


# ---------------------------------------------------------------------------
# k nearest neighbors


@dataclass
class KnnModel:
    k: int
    train_features: np.ndarray  # (N, D)
    train_labels: np.ndarray  # (N,)
    feature_kind: str = LINE_PROFILE
    class_names: list[str] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)


def knn_fit(ds: LabeledDataset, k: int = 1, feature_kind: str = LINE_PROFILE) -> KnnModel:
    """Store the training set; all the work happens at query time."""
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(ds) == 0:
        raise ValueError("cannot fit on an empty dataset")
    feats = ds.stack().astype(np.float64)
    if feats.ndim != 2:
        raise ValueError("knn needs flat feature vectors, not images")
    return KnnModel(
        k=k,
        train_features=feats,
        train_labels=ds.labels().astype(np.int32),
        feature_kind=feature_kind,
        class_names=list(ds.class_names),
    )


def _class_min_distances(m: KnnModel, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    train = m.train_features
    d2 = (
        np.sum(queries**2, axis=1)[:, None]
        + np.sum(train**2, axis=1)[None, :]
        - 2.0 * queries @ train.T
    )
    dist = np.sqrt(np.maximum(d2, 0.0))
    c = m.num_classes
    per_class = np.full((queries.shape[0], c), np.inf)
    for ci in range(c):
        cols = m.train_labels == ci
        if cols.any():
            per_class[:, ci] = dist[:, cols].min(axis=1)
    return dist, per_class


def _vote(m: KnnModel, dist_row: np.ndarray) -> int:
    # neighbor selection ordered by (distance, label) so storage order
    # never matters; vote ties break by smaller mean distance, then
    # lower class index
    order = np.lexsort((m.train_labels, dist_row))[: m.k]
    top_labels = m.train_labels[order]
    counts = np.bincount(top_labels, minlength=m.num_classes)
    best = counts.max()
    tied = np.flatnonzero(counts == best)
    if tied.shape[0] == 1:
        return int(tied[0])
    means = np.array(
        [dist_row[order][top_labels == ci].mean() for ci in tied]
    )
    return int(tied[np.argmin(means)])


def _scores_from_class_distances(per_class: np.ndarray) -> np.ndarray:
    """score_c = d_other / (d_c + d_other), d_other = min over classes != c.

    Higher means more likely class c; 0/0 (query sitting on training
    points of two classes) maps to 0.5. A class with no training points
    has d = inf, handled by the ratio's limits: an absent own class
    scores 0, absent others score 1, both absent scores 0.5.
    """
    b, c = per_class.shape
    scores = np.empty((b, c))
    for ci in range(c):
        others = np.delete(per_class, ci, axis=1).min(axis=1)
        own = per_class[:, ci]
        col = np.full(b, 0.5)
        own_inf = np.isinf(own)
        oth_inf = np.isinf(others)
        col[own_inf & ~oth_inf] = 0.0
        col[oth_inf & ~own_inf] = 1.0
        regular = ~own_inf & ~oth_inf & (own + others > 0.0)
        col[regular] = others[regular] / (own[regular] + others[regular])
        scores[:, ci] = col
    return scores


def knn_predict_batch(m: KnnModel, queries) -> tuple[np.ndarray, np.ndarray]:
    """Labels and per-class scores for a (B, D) query batch."""
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if q.shape[1] != m.train_features.shape[1]:
        raise ValueError(
            f"query dim {q.shape[1]} does not match model dim {m.train_features.shape[1]}"
        )
    dist, per_class = _class_min_distances(m, q)
    if m.k == 1:
        preds = per_class.argmin(axis=1).astype(np.int64)
    else:
        preds = np.array([_vote(m, row) for row in dist], dtype=np.int64)
    return preds, _scores_from_class_distances(per_class)


def knn_predict(m: KnnModel, fv) -> tuple[int, np.ndarray]:
    """Predicted class index and per-class scores for one feature vector."""
    preds, scores = knn_predict_batch(m, np.asarray(fv)[np.newaxis, :])
    return int(preds[0]), scores[0]


# ---------------------------------------------------------------------------
# multilayer perceptron


@dataclass
class MlpModel:
    layer_sizes: list[int]  # [in, 128, 64, 32, C]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rates: list[float]
    standardizer: Standardizer | None
    seed: int
    feature_kind: str = LINE_PROFILE
    class_names: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        sizes = self.layer_sizes
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weight/bias count must match layer chain")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise ValueError(f"layer {i} shape mismatch: {w.shape} / {b.shape}")
        for p in self.dropout_rates:
            if not 0.0 <= p < 1.0:
                raise ValueError(f"dropout rate {p} outside [0, 1)")

    @property
    def num_classes(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    rho: float = 0.9
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 50
    patience: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if (
            self.learning_rate <= 0
            or not 0 < self.rho < 1
            or self.epsilon <= 0
            or self.batch_size < 1
            or self.epochs < 1
            or self.patience < 1
        ):
            raise ValueError(f"invalid training config: {self}")


def mlp_init(
    input_dim: int,
    num_classes: int,
    seed: int = 0,
    feature_kind: str = LINE_PROFILE,
    class_names: list[str] | None = None,
) -> MlpModel:
    """Fresh network with He-uniform weights and zero biases."""
    input_dim = int(input_dim)
    num_classes = int(num_classes)
    if input_dim < 1:
        raise ValueError(f"input_dim must be >= 1, got {input_dim}")
    if num_classes < 2:
        raise ValueError(f"num_classes must be >= 2, got {num_classes}")
    sizes = [input_dim, *HIDDEN_WIDTHS, num_classes]
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    if class_names is None:
        class_names = [f"class_{i}" for i in range(num_classes)]
    return MlpModel(
        layer_sizes=sizes,
        weights=weights,
        biases=biases,
        dropout_rates=list(DROPOUT_RATES),
        standardizer=None,
        seed=int(seed),
        feature_kind=feature_kind,
        class_names=list(class_names),
    )


def _affine_forward(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    masks: list[np.ndarray] | None,
) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    """Logits plus the per-layer caches backprop needs."""
    pre: list[np.ndarray] = []
    post: list[np.ndarray] = [x]
    h = x
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if i == last:
            return z, pre, post
        pre.append(z)
        h = np.maximum(z, 0.0)
        if masks is not None and i < len(masks):
            h = h * masks[i]
        post.append(h)
    raise AssertionError("unreachable")


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    # mean of logsumexp(z) - z[true]; exact and overflow-safe
    zmax = logits.max(axis=1)
    lse = zmax + np.log(np.exp(logits - zmax[:, None]).sum(axis=1))
    picked = logits[np.arange(logits.shape[0]), labels]
    return float(np.mean(lse - picked))


def _loss_and_grads(
    weights: list[np.ndarray],
    biases: list[np.ndarray],
    x: np.ndarray,
    labels: np.ndarray,
    masks: list[np.ndarray] | None,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    logits, pre, post = _affine_forward(weights, biases, x, masks)
    loss = _cross_entropy(logits, labels)
    batch = x.shape[0]
    g = _softmax(logits)
    g[np.arange(batch), labels] -= 1.0
    g /= batch
    grads_w: list[np.ndarray] = [np.empty(0)] * len(weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(biases)
    for i in range(len(weights) - 1, -1, -1):
        grads_w[i] = post[i].T @ g
        grads_b[i] = g.sum(axis=0)
        if i > 0:
            g = g @ weights[i].T
            if masks is not None and i - 1 < len(masks):
                g = g * masks[i - 1]
            g = g * (pre[i - 1] > 0.0)
    return loss, grads_w, grads_b


def mlp_forward(m: MlpModel, fv, training: bool = False, seed: int | None = None) -> np.ndarray:
    """Class probabilities for one vector or a (B, D) batch.

    The model's stored standardizer is applied internally, so callers
    pass raw features. Dropout fires only with training=True, driven by
    the given seed.
    """
    arr = np.asarray(fv, dtype=np.float64)
    single = arr.ndim == 1
    x = np.atleast_2d(arr)
    if x.shape[1] != m.layer_sizes[0]:
        raise ValueError(
            f"feature dim {x.shape[1]} does not match model input {m.layer_sizes[0]}"
        )
    if m.standardizer is not None:
        x = apply_standardizer(m.standardizer, x)
    masks = None
    if training:
        rng = np.random.default_rng(seed)
        masks = _draw_masks(rng, m.dropout_rates, x.shape[0], m.layer_sizes)
    logits, _, _ = _affine_forward(m.weights, m.biases, x, masks)
    if not np.all(np.isfinite(logits)):
        raise NumericError("non-finite activations in forward pass")
    probs = _softmax(logits)
    return probs[0] if single else probs


def _draw_masks(
    rng: np.random.Generator,
    rates: list[float],
    batch: int,
    sizes: list[int],
) -> list[np.ndarray]:
    masks = []
    for i, p in enumerate(rates):
        keep = 1.0 - p
        masks.append((rng.random((batch, sizes[i + 1])) < keep) / keep)
    return masks


def rmsprop_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    caches: list[np.ndarray],
    lr: float,
    rho: float,
    eps: float,
) -> None:
    """In-place update: cache = rho*cache + (1-rho)*g^2; p -= lr*g/(sqrt(cache)+eps)."""
    for p, g, c in zip(params, grads, caches):
        c *= rho
        c += (1.0 - rho) * g * g
        p -= lr * g / (np.sqrt(c) + eps)


def _canonical_order(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # lexicographic by feature columns, then label; identical rows are
    # interchangeable, so any permutation of the input lands in one order
    return np.lexsort((y, *tuple(x.T)[::-1]))


def _dataset_matrix(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    return ds.stack().astype(np.float64), ds.labels()


def mlp_train(
    model: MlpModel,
    train: LabeledDataset,
    val: LabeledDataset,
    cfg: TrainConfig | None = None,
) -> tuple[MlpModel, list[dict]]:
    """Mini-batch RMSProp on categorical cross-entropy.

    Records one history row per epoch (clean-pass losses/accuracies for
    both splits), keeps the weights of the best validation accuracy,
    and stops early after cfg.patience epochs without improvement.
    Raises NumericError (with the epoch index) if the loss goes
    non-finite.
    """
    cfg = cfg or TrainConfig()
    x, y = _dataset_matrix(train)
    vx, vy = _dataset_matrix(val)
    if x.shape[1] != model.layer_sizes[0] or vx.shape[1] != model.layer_sizes[0]:
        raise ValueError("feature dims do not match model input width")
    if y.max() >= model.num_classes or vy.max() >= model.num_classes:
        raise ValueError("label outside the model's class range")

    order = _canonical_order(x, y)
    x, y = x[order], y[order]

    model = replace(
        model,
        weights=[w.copy() for w in model.weights],
        biases=[b.copy() for b in model.biases],
        standardizer=model.standardizer or fit_standardizer(x),
        class_names=list(train.class_names) if train.class_names else model.class_names,
    )
    xs = apply_standardizer(model.standardizer, x)
    vxs = apply_standardizer(model.standardizer, vx)

    params = model.weights + model.biases
    caches = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.seed)
    n = xs.shape[0]

    def clean_metrics(data: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
        logits, _, _ = _affine_forward(model.weights, model.biases, data, None)
        loss = _cross_entropy(logits, labels)
        acc = float(np.mean(logits.argmax(axis=1) == labels))
        return loss, acc

    history: list[dict] = []
    best_acc = -1.0
    best_epoch = 0
    best_weights = [w.copy() for w in model.weights]
    best_biases = [b.copy() for b in model.biases]

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            masks = _draw_masks(rng, model.dropout_rates, idx.shape[0], model.layer_sizes)
            loss, grads_w, grads_b = _loss_and_grads(
                model.weights, model.biases, xs[idx], y[idx], masks
            )
            if not np.isfinite(loss):
                raise NumericError(f"loss became non-finite at epoch {epoch}")
            rmsprop_step(
                params, grads_w + grads_b, caches, cfg.learning_rate, cfg.rho, cfg.epsilon
            )
        train_loss, train_acc = clean_metrics(xs, y)
        val_loss, val_acc = clean_metrics(vxs, vy)
        history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "train_acc": train_acc,
                "val_loss": val_loss,
                "val_acc": val_acc,
            }
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_weights = [w.copy() for w in model.weights]
            best_biases = [b.copy() for b in model.biases]
        elif epoch - best_epoch >= cfg.patience:
            break

    model.weights[:] = best_weights
    model.biases[:] = best_biases
    return model, history


def write_history_csv(path, history: list[dict]) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("epoch,train_loss,train_acc,val_loss,val_acc\n")
        for row in history:
            fh.write(
                f"{row['epoch']},{row['train_loss']:.17g},{row['train_acc']:.17g},"
                f"{row['val_loss']:.17g},{row['val_acc']:.17g}\n"
            )


# ---------------------------------------------------------------------------
# serialization: versioned binary container


_MAGIC = b"LGPM"
_VERSION = 1
_KIND_KNN = 1
_KIND_MLP = 2


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def _pack_f64(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f8").tobytes()


def serialize_model(model) -> bytes:
    """Container: magic, version, kind, feature kind, classes, standardizer, payload."""
    parts = [_MAGIC, struct.pack("<I", _VERSION)]
    if isinstance(model, KnnModel):
        parts.append(struct.pack("<B", _KIND_KNN))
    elif isinstance(model, MlpModel):
        parts.append(struct.pack("<B", _KIND_MLP))
    else:
        raise ValueError(f"cannot serialize {type(model).__name__}")
    parts.append(_pack_str(model.feature_kind))
    parts.append(struct.pack("<H", len(model.class_names)))
    parts.extend(_pack_str(name) for name in model.class_names)
    std = getattr(model, "standardizer", None)
    if std is None:
        parts.append(struct.pack("<B", 0))
    else:
        parts.append(struct.pack("<B", 1))
        parts.append(struct.pack("<I", std.mean.shape[0]))
        parts.append(_pack_f64(std.mean))
        parts.append(_pack_f64(std.std))
    if isinstance(model, KnnModel):
        n, d = model.train_features.shape
        parts.append(struct.pack("<IQI", model.k, n, d))
        parts.append(np.ascontiguousarray(model.train_labels, dtype="<i4").tobytes())
        parts.append(_pack_f64(model.train_features))
    else:
        parts.append(struct.pack("<I", len(model.layer_sizes)))
        parts.extend(struct.pack("<I", s) for s in model.layer_sizes)
        parts.append(struct.pack("<I", len(model.dropout_rates)))
        parts.extend(struct.pack("<d", p) for p in model.dropout_rates)
        parts.append(struct.pack("<q", model.seed))
        for w, b in zip(model.weights, model.biases):
            parts.append(_pack_f64(w))
            parts.append(_pack_f64(b))
    return b"".join(parts)


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.data):
            raise ModelFormatError("model file truncated")
        out = self.data[self.pos : self.pos + nbytes]
        self.pos += nbytes
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def take_str(self) -> str:
        (ln,) = self.unpack("<H")
        return self.take(ln).decode("utf-8")

    def take_f64(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def deserialize_model(data: bytes):
    cur = _Cursor(data)
    if cur.take(4) != _MAGIC:
        raise ModelFormatError("bad magic: not a model file")
    (version,) = cur.unpack("<I")
    if version != _VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    (kind,) = cur.unpack("<B")
    feature_kind = cur.take_str()
    (n_classes,) = cur.unpack("<H")
    class_names = [cur.take_str() for _ in range(n_classes)]
    (has_std,) = cur.unpack("<B")
    std = None
    if has_std:
        (dim,) = cur.unpack("<I")
        std = Standardizer(mean=cur.take_f64(dim), std=cur.take_f64(dim))
    if kind == _KIND_KNN:
        k, n, d = cur.unpack("<IQI")
        labels = np.frombuffer(cur.take(4 * n), dtype="<i4").astype(np.int32)
        feats = cur.take_f64(n * d).reshape(n, d)
        return KnnModel(
            k=k,
            train_features=feats,
            train_labels=labels,
            feature_kind=feature_kind,
            class_names=class_names,
        )
    if kind == _KIND_MLP:
        (n_sizes,) = cur.unpack("<I")
        sizes = [cur.unpack("<I")[0] for _ in range(n_sizes)]
        (n_drop,) = cur.unpack("<I")
        drops = [cur.unpack("<d")[0] for _ in range(n_drop)]
        (seed,) = cur.unpack("<q")
        weights = []
        biases = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            weights.append(cur.take_f64(a * b).reshape(a, b))
            biases.append(cur.take_f64(b))
        return MlpModel(
            layer_sizes=sizes,
            weights=weights,
            biases=biases,
            dropout_rates=drops,
            standardizer=std,
            seed=seed,
            feature_kind=feature_kind,
            class_names=class_names,
        )
    raise ModelFormatError(f"unknown model kind tag {kind}")


def save_model(model, path) -> int:
    """Write the container; returns bytes written."""
    blob = serialize_model(model)
    with open(path, "wb") as fh:
        fh.write(blob)
    return len(blob)


def load_model(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read model file {path}: {exc}") from exc
    return deserialize_model(data)


def model_size_bytes(model) -> int:
    return len(serialize_model(model))
