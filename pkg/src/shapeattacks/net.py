"""A small PointNet-style classifier with hand-written forward and backward passes.

Architecture: a shared per-point MLP (3 -> 32 -> 64 -> 128, ReLU), a
feature-wise max pool over points, and a head MLP (128 -> 64 -> M) followed by
softmax. Points that win at least one max-pool channel ("critical points") are
the only ones that receive input gradient.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adam import AdamState, adam_step

log = logging.getLogger(__name__)

POINT_WIDTHS = (32, 64, 128)
HEAD_WIDTHS = (64,)
CHECKPOINT_VERSION = 1


class NonFiniteError(FloatingPointError):
    """Forward pass produced NaN or infinite activations."""


@dataclass
class ClassifierParams:
    """Weights ``W[l]`` of shape (fan_in, fan_out) and biases ``b[l]``.

    The first ``n_point_layers`` layers are the per-point MLP, the rest form the
    head; the last layer emits logits.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    n_point_layers: int = len(POINT_WIDTHS)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("one bias per weight matrix")
        for w, b in zip(self.weights, self.biases):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError("inconsistent layer shapes")
        for w0, w1 in zip(self.weights, self.weights[1:]):
            if w0.shape[1] != w1.shape[0]:
                raise ValueError("consecutive layers do not chain")
        if self.weights[0].shape[0] != 3:
            raise ValueError("first layer must take 3D points")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")

    @property
    def n_classes(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def astype(self, dtype) -> "ClassifierParams":
        return ClassifierParams(
            [w.astype(dtype) for w in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.n_point_layers,
        )

    def copy(self) -> "ClassifierParams":
        return self.astype(self.dtype)


def init_params(n_classes: int, rng: np.random.Generator, dtype=np.float64) -> ClassifierParams:
    """Glorot-uniform weights, zero biases."""
    sizes = (3, *POINT_WIDTHS, *HEAD_WIDTHS, n_classes)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes, sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return ClassifierParams(weights, biases)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class ForwardCache:
    x: np.ndarray
    point_pre: list[np.ndarray]  # pre-activations of the per-point layers
    point_post: list[np.ndarray]
    pooled: np.ndarray  # (B, C)
    argmax: np.ndarray  # (B, C) index of the point that wins each channel
    head_pre: list[np.ndarray]
    head_post: list[np.ndarray]
    logits: np.ndarray
    probs: np.ndarray


def forward_batch(params: ClassifierParams, x: np.ndarray) -> ForwardCache:
    """Forward pass for a batch of clouds, ``x`` of shape (B, N, 3)."""
    x = np.asarray(x, dtype=params.dtype)
    if x.ndim != 3 or x.shape[-1] != 3 or x.shape[1] < 1:
        raise ValueError("expected clouds of shape (B, N, 3) with N >= 1")
    if not np.isfinite(x).all():
        raise NonFiniteError("non-finite input coordinates")
    k = params.n_point_layers
    h = x
    point_pre, point_post = [], []
    for w, b in zip(params.weights[:k], params.biases[:k]):
        a = h @ w + b
        h = np.maximum(a, 0.0)
        point_pre.append(a)
        point_post.append(h)
    # lowest point index wins ties (np.argmax returns the first maximum)
    argmax = h.argmax(axis=1)
    pooled = np.take_along_axis(h, argmax[:, None, :], axis=1)[:, 0, :]
    g = pooled
    head_pre, head_post = [], []
    n_head = len(params.weights) - k
    for j, (w, b) in enumerate(zip(params.weights[k:], params.biases[k:])):
        a = g @ w + b
        head_pre.append(a)
        g = np.maximum(a, 0.0) if j < n_head - 1 else a
        head_post.append(g)
    logits = g
    if not np.isfinite(logits).all():
        raise NonFiniteError("non-finite activations in forward pass")
    return ForwardCache(x, point_pre, point_post, pooled, argmax, head_pre, head_post, logits, softmax(logits))


def backward_batch(
    params: ClassifierParams, cache: ForwardCache, dlogits: np.ndarray, want_params: bool = True
) -> tuple[np.ndarray, list[np.ndarray] | None, list[np.ndarray] | None]:
    """Backpropagate ``dlogits`` (B, M); returns (d input, d weights, d biases)."""
    k = params.n_point_layers
    dw: list[np.ndarray] = [None] * len(params.weights)  # type: ignore[list-item]
    db: list[np.ndarray] = [None] * len(params.biases)  # type: ignore[list-item]
    n_head = len(params.weights) - k
    g = dlogits
    for j in reversed(range(n_head)):
        layer = k + j
        if j < n_head - 1:
            g = g * (cache.head_pre[j] > 0)
        inp = cache.head_post[j - 1] if j > 0 else cache.pooled
        if want_params:
            dw[layer] = inp.T @ g
            db[layer] = g.sum(axis=0)
        g = g @ params.weights[layer].T

    # scatter pooled gradient onto the winning points
    last = cache.point_post[-1]
    dh = np.zeros_like(last)
    np.put_along_axis(dh, cache.argmax[:, None, :], g[:, None, :], axis=1)
    for layer in reversed(range(k)):
        dh = dh * (cache.point_pre[layer] > 0)
        inp = cache.point_post[layer - 1] if layer > 0 else cache.x
        if want_params:
            dw[layer] = np.einsum("bni,bno->io", inp, dh)
            db[layer] = dh.sum(axis=(0, 1))
        dh = dh @ params.weights[layer].T
    if not want_params:
        return dh, None, None
    return dh, dw, db


@dataclass
class Prediction:
    probs: np.ndarray
    logits: np.ndarray
    critical: np.ndarray  # per-channel argmax point indices

    @property
    def label(self) -> int:
        return int(np.argmax(self.probs))


def forward(params: ClassifierParams, cloud) -> Prediction:
    """Class probabilities for one cloud (N, 3), plus max-pool winners."""
    cache = forward_batch(params, np.asarray(cloud)[None])
    return Prediction(cache.probs[0], cache.logits[0], cache.argmax[0])


def predict(params: ClassifierParams, cloud) -> int:
    return forward(params, cloud).label


def predict_batch(params: ClassifierParams, clouds, batch_size: int = 32) -> np.ndarray:
    clouds = np.asarray(clouds)
    out = [
        forward_batch(params, clouds[i : i + batch_size]).probs.argmax(axis=1)
        for i in range(0, len(clouds), batch_size)
    ]
    return np.concatenate(out) if out else np.zeros(0, dtype=int)


def cross_entropy(probs, y: int) -> float:
    """-log p[y] with p[y] clamped at 1e-12."""
    return float(-np.log(max(float(np.asarray(probs)[y]), 1e-12)))


def _onehot(y, m: int) -> np.ndarray:
    y = np.atleast_1d(y)
    out = np.zeros((len(y), m))
    out[np.arange(len(y)), y] = 1.0
    return out


def loss_and_input_gradient(params: ClassifierParams, cloud, y: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross entropy, its gradient w.r.t. the cloud, and the probabilities."""
    cache = forward_batch(params, np.asarray(cloud)[None])
    probs = cache.probs[0]
    dlogits = (cache.probs - _onehot(y, params.n_classes)).astype(params.dtype)
    dx, _, _ = backward_batch(params, cache, dlogits, want_params=False)
    return cross_entropy(probs, y), dx[0], probs


def input_gradient(params: ClassifierParams, cloud, y: int) -> np.ndarray:
    """Gradient of the cross-entropy loss w.r.t. every input coordinate, (N, 3)."""
    return loss_and_input_gradient(params, cloud, y)[1]


def loss_and_param_gradients(params: ClassifierParams, clouds, labels):
    """Mean cross entropy over a batch and its gradients w.r.t. all parameters."""
    cache = forward_batch(params, clouds)
    labels = np.asarray(labels)
    b = len(labels)
    p_true = np.clip(cache.probs[np.arange(b), labels], 1e-12, None)
    loss = float(-np.log(p_true).mean())
    dlogits = ((cache.probs - _onehot(labels, params.n_classes)) / b).astype(params.dtype)
    _, dw, db = backward_batch(params, cache, dlogits)
    acc = float((cache.probs.argmax(axis=1) == labels).mean())
    return loss, dw, db, acc


def saliency(params: ClassifierParams, cloud, y: int | None = None, kind: str = "probability") -> np.ndarray:
    """Per-point saliency, shape (N,).

    ``kind="probability"``: max over classes j of the L2 norm of the gradient
    of probability j at each point (used by the salient-point defense).
    ``kind="loss"``: L2 norm of the loss gradient at each point (used inside
    attacks; needs ``y``). ``kind="logit"`` is the probability variant taken
    on logits instead.
    """
    cloud = np.asarray(cloud)
    if kind == "loss":
        if y is None:
            raise ValueError("loss saliency needs a label")
        return np.linalg.norm(input_gradient(params, cloud, y), axis=1)
    if kind not in ("probability", "logit"):
        raise ValueError(f"unknown saliency kind {kind!r}")
    m = params.n_classes
    cache = forward_batch(params, cloud[None])
    if kind == "probability":
        p = cache.probs[0]
        # row j: d p_j / d logits = p_j (e_j - p)
        dlogits = p[:, None] * (np.eye(m) - p[None, :])
    else:
        dlogits = np.eye(m)
    # replicate the single-cloud cache across the m backward passes
    rep = ForwardCache(
        cache.x.repeat(m, 0),
        [a.repeat(m, 0) for a in cache.point_pre],
        [a.repeat(m, 0) for a in cache.point_post],
        cache.pooled.repeat(m, 0),
        cache.argmax.repeat(m, 0),
        [a.repeat(m, 0) for a in cache.head_pre],
        [a.repeat(m, 0) for a in cache.head_post],
        cache.logits.repeat(m, 0),
        cache.probs.repeat(m, 0),
    )
    dx, _, _ = backward_batch(params, rep, dlogits.astype(params.dtype), want_params=False)
    return np.linalg.norm(dx, axis=2).max(axis=0)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly random 3x3 rotation matrix (QR of a Gaussian matrix)."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@dataclass
class TrainHistory:
    loss: list[float]
    accuracy: list[float]


def train(
    clouds,
    labels,
    n_classes: int,
    epochs: int = 40,
    batch_size: int = 32,
    rng: np.random.Generator | None = None,
    lr: float = 3e-3,
    augment: bool = True,
    jitter: float = 0.01,
    dtype=np.float32,
    verbose: bool = False,
) -> tuple[ClassifierParams, TrainHistory]:
    """Minibatch Adam on cross entropy.

    With ``augment`` each sample is randomly rotated and jittered every epoch.
    Training runs in ``dtype`` (float32 by default for speed); the returned
    parameters are float64 so gradient-checked code paths stay in double.
    """
    clouds = np.asarray(clouds, dtype=float)
    labels = np.asarray(labels)
    if len(clouds) == 0:
        raise ValueError("empty training set")
    if labels.min() < 0 or labels.max() >= n_classes:
        raise ValueError("labels out of range")
    rng = rng if rng is not None else np.random.default_rng(0)
    params = init_params(n_classes, rng, dtype=dtype)
    states = [AdamState(lr=lr) for _ in params.arrays()]
    history = TrainHistory([], [])
    n = len(clouds)
    for epoch in range(epochs):
        order = rng.permutation(n)
        losses, accs, sizes = [], [], []
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            batch = clouds[idx]
            if augment:
                rots = np.stack([random_rotation(rng) for _ in idx])
                batch = np.einsum("bnk,bjk->bnj", batch, rots)
                batch = batch + rng.normal(scale=jitter, size=batch.shape)
            loss, dw, db, acc = loss_and_param_gradients(params, batch.astype(dtype), labels[idx])
            arrays = params.arrays()
            new = [adam_step(s, a, g) for s, a, g in zip(states, arrays, [*dw, *db])]
            k = len(params.weights)
            params = ClassifierParams(new[:k], new[k:], params.n_point_layers)
            losses.append(loss)
            accs.append(acc)
            sizes.append(len(idx))
        history.loss.append(float(np.average(losses, weights=sizes)))
        history.accuracy.append(float(np.average(accs, weights=sizes)))
        msg = "epoch %d: loss %.4f acc %.3f" % (epoch + 1, history.loss[-1], history.accuracy[-1])
        if verbose:
            print(msg)
        log.info(msg)
    return params.astype(np.float64), history


# ---------------------------------------------------------------- checkpoints
def save_params(params: ClassifierParams, path) -> Path:
    """Write an ``.npz`` checkpoint: version, layer count, and every array.

    Keys: ``version`` (int), ``n_point_layers`` (int), ``W0..W{L-1}`` and
    ``b0..b{L-1}``. Arrays are stored at their own dtype, so round trips are
    bit-exact.
    """
    path = Path(path)
    arrays = {"version": np.array(CHECKPOINT_VERSION), "n_point_layers": np.array(params.n_point_layers)}
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


def load_params(path) -> ClassifierParams:
    with np.load(Path(path)) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        n_layers = sum(1 for key in data.files if key.startswith("W"))
        weights = [data[f"W{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        return ClassifierParams(weights, biases, int(data["n_point_layers"]))
