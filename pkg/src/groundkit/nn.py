"""Minimal differentiable layer: linear maps, activations, losses, Adam.

Everything is float64 numpy with hand-derived gradients; there is no tape.
Each loss returns ``(value, grad)`` so callers chain backward passes
explicitly.  Gradients are validated against central finite differences via
:func:`finite_diff_check`.

Randomness: all stochastic pieces take a ``numpy.random.Generator``.  Use
:func:`make_rng` to build one — it derives a PCG64 stream from an integer
seed plus string/int tags, which is reproducible across platforms and
numpy versions.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .ingest import _as_text

ALGORITHM = "PCG64"
_MASK64 = (1 << 64) - 1


class NumericsError(ArithmeticError):
    """A computation produced a non-finite value."""


def make_rng(seed: int, *tags: int | str) -> np.random.Generator:
    """Deterministic PCG64 generator for (seed, *tags).

    Tags name independent streams (e.g. "init", "dropout") so that adding a
    consumer never perturbs the draws of another.
    """
    entropy = [int(seed) & _MASK64]
    for tag in tags:
        if isinstance(tag, str):
            entropy.append(zlib.crc32(tag.encode("utf-8")))
        else:
            entropy.append(int(tag) & _MASK64)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def _ensure_finite(value, what: str) -> None:
    if not np.all(np.isfinite(value)):
        raise NumericsError(f"non-finite {what}")


# ---------------------------------------------------------------------------
# Layers


@dataclass
class LinearLayer:
    """Affine map y = x @ weights.T + bias; weights is (n_out, n_in)."""

    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "LinearLayer":
        # Glorot uniform keeps forward/backward variance comparable across depths.
        limit = np.sqrt(6.0 / (n_in + n_out))
        return cls(
            weights=rng.uniform(-limit, limit, size=(n_out, n_in)),
            bias=np.zeros(n_out),
        )

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]


def linear_forward(layer: LinearLayer, x: np.ndarray) -> np.ndarray:
    return x @ layer.weights.T + layer.bias


def linear_backward(
    layer: LinearLayer, x: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of a scalar loss through ``linear_forward``.

    Returns (grad_weights, grad_bias, grad_x) for upstream = dL/dy.
    Accepts single vectors or batches (leading axis).
    """
    x2 = np.atleast_2d(x)
    up2 = np.atleast_2d(upstream)
    grad_w = up2.T @ x2
    grad_b = up2.sum(axis=0)
    grad_x = up2 @ layer.weights
    if x.ndim == 1:
        grad_x = grad_x[0]
    return grad_w, grad_b, grad_x


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    # Subgradient 0 at exactly 0.
    return upstream * (x > 0.0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    out = np.empty_like(np.asarray(x, dtype=np.float64))
    x = np.asarray(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    """Softmax with max subtraction; rows sum to 1 and never overflow."""
    shifted = x - np.max(x, axis=axis, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=axis, keepdims=True)


def dropout(
    x: np.ndarray, rate: float, rng: np.random.Generator | None, training: bool
) -> tuple[np.ndarray, np.ndarray | None]:
    """Inverted dropout: zero units with probability ``rate``, scale the rest by 1/(1-rate).

    Returns (output, mask); at evaluation time the input passes through
    untouched and the mask is None.  Expectation is preserved at train time,
    so no rescaling happens at eval.
    """
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training:
        return x, None
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(np.float64) / keep
    return x * mask, mask


def dropout_backward(upstream: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    return upstream if mask is None else upstream * mask


# ---------------------------------------------------------------------------
# Losses (each returns value and gradient w.r.t. its first argument)


def cross_entropy(logits: np.ndarray, target_index) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy, fused for stability.

    ``logits`` is (C,) with an int target or (B, C) with (B,) targets; the
    batched form averages, so the gradient carries the 1/B factor.
    """
    _ensure_finite(logits, "logits")
    single = logits.ndim == 1
    z = np.atleast_2d(logits)
    targets = np.atleast_1d(np.asarray(target_index, dtype=np.intp))
    n, c = z.shape
    if targets.shape != (n,):
        raise ValueError(f"targets shape {targets.shape} does not match batch {n}")
    if np.any((targets < 0) | (targets >= c)):
        raise ValueError("target index out of range")
    shifted = z - np.max(z, axis=1, keepdims=True)
    log_norm = np.log(np.sum(np.exp(shifted), axis=1))
    rows = np.arange(n)
    losses = log_norm - shifted[rows, targets]
    loss = float(np.mean(losses))
    grad = softmax(z, axis=1)
    grad[rows, targets] -= 1.0
    grad /= n
    _ensure_finite(loss, "cross-entropy loss")
    return loss, grad[0] if single else grad


def binary_cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Per-class sigmoid cross-entropy from logits, averaged over every element.

    Uses the max(z,0) - z*t + log(1+exp(-|z|)) form, finite for any logit.
    """
    _ensure_finite(logits, "logits")
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.shape != t.shape:
        raise ValueError(f"logits shape {z.shape} != targets shape {t.shape}")
    if np.any((t < 0) | (t > 1)):
        raise ValueError("targets must lie in [0, 1]")
    losses = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    loss = float(np.mean(losses))
    grad = (sigmoid(z) - t) / z.size
    _ensure_finite(loss, "binary cross-entropy loss")
    return loss, grad


def mean_squared_error(pred: np.ndarray, target: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of squared component differences; gradient w.r.t. ``pred``."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"pred shape {p.shape} != target shape {t.shape}")
    diff = p - t
    loss = float(np.mean(diff * diff))
    _ensure_finite(loss, "mean squared error")
    return loss, 2.0 * diff / p.size


# ---------------------------------------------------------------------------
# Optimiser


@dataclass
class AdamState:
    """Adam with bias correction; moments are allocated lazily per parameter."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    state: AdamState, params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """One Adam update, in place on ``params``.

    p -= lr * m_hat / (sqrt(v_hat) + eps) with m_hat, v_hat bias-corrected.
    """
    state.t += 1
    t = state.t
    for name, p in params.items():
        if name not in grads:
            raise ValueError(f"missing gradient for parameter {name!r}")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        _ensure_finite(g, f"gradient for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


# ---------------------------------------------------------------------------
# Gradient verification


@dataclass
class GradCheckReport:
    """Outcome of one finite-difference comparison."""

    max_rel_error: float
    worst_param: str
    per_param: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance


LossFn = Callable[[dict[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]]


def finite_diff_check(
    loss_fn: LossFn,
    params: dict[str, np.ndarray],
    tolerance: float = 1e-4,
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    ``loss_fn(params) -> (loss, grads)`` must be deterministic.  The error
    for each parameter tensor is max|analytic - numeric| normalised by the
    largest gradient magnitude seen in that tensor.  The denominator is
    floored at 1e-5: central differences carry cancellation noise of roughly
    eps * |loss| / step ~ 1e-11, so a structurally zero gradient (a gauge
    direction, an inactive hinge) must read as agreement, not as error
    against an arbitrarily small denominator.  Parameters are perturbed in
    place and restored.
    """
    loss0, grads = loss_fn(params)
    _ensure_finite(loss0, "loss")
    per_param: dict[str, float] = {}
    for name, theta in params.items():
        if name not in grads:
            raise ValueError(f"loss_fn returned no gradient for {name!r}")
        analytic = np.asarray(grads[name], dtype=np.float64)
        if analytic.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name!r}")
        numeric = np.zeros_like(theta)
        flat = theta.reshape(-1)
        num_flat = numeric.reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            plus = loss_fn(params)[0]
            flat[i] = original - step
            minus = loss_fn(params)[0]
            flat[i] = original
            num_flat[i] = (plus - minus) / (2.0 * step)
        _ensure_finite(numeric, f"numeric gradient for {name!r}")
        denom = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-5)
        per_param[name] = float(np.max(np.abs(analytic - numeric))) / denom
    worst = max(per_param, key=per_param.get)
    return GradCheckReport(
        max_rel_error=per_param[worst],
        worst_param=worst,
        per_param=per_param,
        tolerance=tolerance,
    )


# ---------------------------------------------------------------------------
# Checkpoints: line-delimited text, one JSON record per tensor


def save_checkpoint(sink, tensors: Mapping[str, np.ndarray], meta: Mapping[str, object]) -> None:
    """Write tensors plus metadata as diffable line-delimited JSON.

    The header line carries ``meta`` (and kind/format markers); each
    following line is one tensor, sorted by name so identical models always
    serialise to identical bytes.  Floats are written with ``repr`` and
    round-trip exactly.
    """
    header = {"kind": "checkpoint", "format_version": 1}
    for key, value in meta.items():
        if key in header:
            raise ValueError(f"meta key {key!r} is reserved")
        header[key] = value
    with _as_text(sink, "w") as handle:
        handle.write(json.dumps(header, separators=(", ", ": "), ensure_ascii=False) + "\n")
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype=np.float64)
            record = {
                "name": name,
                "shape": list(arr.shape),
                "values": [float(v) for v in arr.reshape(-1)],
            }
            handle.write(json.dumps(record, separators=(", ", ": ")) + "\n")


def load_checkpoint(source) -> tuple[dict, dict[str, np.ndarray]]:
    """Inverse of :func:`save_checkpoint`; returns (meta, tensors)."""
    with _as_text(source) as handle:
        first = handle.readline()
        if not first.strip():
            raise ValueError("empty checkpoint file")
        header = json.loads(first)
        if not isinstance(header, dict) or header.get("kind") != "checkpoint":
            raise ValueError("not a checkpoint file (bad header)")
        meta = {k: v for k, v in header.items() if k not in ("kind", "format_version")}
        tensors: dict[str, np.ndarray] = {}
        for raw in handle:
            if not raw.strip():
                continue
            record = json.loads(raw)
            arr = np.asarray(record["values"], dtype=np.float64).reshape(record["shape"])
            tensors[record["name"]] = arr
    return meta, tensors
