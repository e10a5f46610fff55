"""Feed-forward network with swish activation and hand-derived backprop.

The architecture is a plain MLP (affine -> optional batch norm -> swish per
hidden layer, final affine) trained with AdamW under a plateau-based
learning-rate schedule.  Everything is float64 numpy; gradients are exact and
checked against finite differences in the test suite.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


class TrainingDivergedError(RuntimeError):
    """Loss became NaN/Inf; surfaced to the harness as a divergence."""


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths (N_0, ..., N_L), batch-norm flag and init seed."""

    widths: tuple
    batch_norm: bool = True
    seed: int = 0

    def __post_init__(self):
        if len(self.widths) < 3:
            raise ValueError("need at least one hidden layer (L >= 2)")
        if any(w < 1 for w in self.widths):
            raise ValueError("widths must be positive")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1")

    @property
    def layers(self) -> int:
        return len(self.widths) - 1


def table1_spec(d: int, batch_norm: bool = True, seed: int = 0) -> NetworkSpec:
    """Width 4*d, depth 6 (five hidden layers), as in the experiments."""
    return NetworkSpec(widths=(d,) + (4 * d,) * 5 + (1,), batch_norm=batch_norm, seed=seed)


def param_count(spec: NetworkSpec) -> int:
    """Affine parameter count plus 4 batch-norm slots per hidden unit."""
    w = spec.widths
    total = sum(w[l] * w[l - 1] + w[l] for l in range(1, len(w)))
    if spec.batch_norm:
        total += 4 * sum(w[1:-1])
    return total


@dataclass
class NetworkParams:
    """All trainable tensors plus batch-norm running statistics."""

    spec: NetworkSpec
    weights: list  # L matrices (N_l x N_{l-1})
    biases: list  # L vectors
    bn_scale: list = field(default_factory=list)  # gamma, per hidden layer
    bn_shift: list = field(default_factory=list)  # beta
    bn_mean: list = field(default_factory=list)  # running mean
    bn_var: list = field(default_factory=list)  # running variance

    def trainable(self):
        """Yield (name, array) in a stable order; shared with the optimizer."""
        for l in range(self.spec.layers):
            yield f"W{l}", self.weights[l]
            yield f"b{l}", self.biases[l]
        if self.spec.batch_norm:
            for l in range(self.spec.layers - 1):
                yield f"gamma{l}", self.bn_scale[l]
                yield f"beta{l}", self.bn_shift[l]

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            spec=self.spec,
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            bn_scale=[g.copy() for g in self.bn_scale],
            bn_shift=[b.copy() for b in self.bn_shift],
            bn_mean=[m.copy() for m in self.bn_mean],
            bn_var=[v.copy() for v in self.bn_var],
        )


def xavier_init(spec: NetworkSpec) -> NetworkParams:
    """Uniform Xavier weights, zero biases, identity batch-norm state."""
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for l in range(spec.layers):
        fan_in, fan_out = spec.widths[l], spec.widths[l + 1]
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    params = NetworkParams(spec=spec, weights=weights, biases=biases)
    if spec.batch_norm:
        for l in range(spec.layers - 1):
            width = spec.widths[l + 1]
            params.bn_scale.append(np.ones(width))
            params.bn_shift.append(np.zeros(width))
            params.bn_mean.append(np.zeros(width))
            params.bn_var.append(np.ones(width))
    return params


# ---------------------------------------------------------------------------
# Activation
# ---------------------------------------------------------------------------

def sigmoid(x):
    """Overflow-safe logistic function."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def swish(x):
    """x * sigmoid(x)."""
    return np.asarray(x, dtype=np.float64) * sigmoid(x)


def swish_grad(x):
    """rho'(x) = sigmoid(x) * (1 + x * (1 - sigmoid(x)))."""
    sg = sigmoid(np.asarray(x, dtype=np.float64))
    return sg * (1.0 + x * (1.0 - sg))


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def forward(params: NetworkParams, x_batch: np.ndarray, mode: str = "train"):
    """Run the network; returns (predictions, cache).

    Train mode normalizes with batch statistics and updates the running
    statistics in place (momentum 0.9); eval mode is a pure function of the
    running statistics and returns cache None.
    """
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    spec = params.spec
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != spec.widths[0]:
        raise ValueError(f"expected (n, {spec.widths[0]}) inputs")
    train = mode == "train"
    if train and spec.batch_norm and x.shape[0] < 2:
        raise ValueError("batch norm in train mode needs a batch of at least 2")
    h = x
    layer_cache = []
    for l in range(spec.layers - 1):
        z = h @ params.weights[l].T + params.biases[l]
        if spec.batch_norm:
            if train:
                mu = z.mean(axis=0)
                zc = z - mu
                var = np.mean(zc * zc, axis=0)  # biased, matches the normalizer
                inv = 1.0 / np.sqrt(var + BN_EPS)
                xhat = zc * inv
                params.bn_mean[l] *= BN_MOMENTUM
                params.bn_mean[l] += (1.0 - BN_MOMENTUM) * mu
                params.bn_var[l] *= BN_MOMENTUM
                params.bn_var[l] += (1.0 - BN_MOMENTUM) * var
            else:
                inv = 1.0 / np.sqrt(params.bn_var[l] + BN_EPS)
                xhat = (z - params.bn_mean[l]) * inv
            y = params.bn_scale[l] * xhat + params.bn_shift[l]
        else:
            inv = xhat = None
            y = z
        sg = sigmoid(y)
        layer_cache.append((h, xhat, inv, y, sg))
        h = y * sg
    pred = (h @ params.weights[-1].T + params.biases[-1]).ravel()
    if not train:
        return pred, None
    return pred, {"layers": layer_cache, "last_hidden": h, "n": x.shape[0]}


def backward(params: NetworkParams, cache: dict, residuals: np.ndarray) -> dict:
    """Gradients of the empirical risk w.r.t. every trainable tensor.

    `residuals` are the raw (pred - y) values from a train-mode forward on
    the same params; the 2/n factor of the mean-squared loss is applied here.
    """
    spec = params.spec
    n = cache["n"]
    resid = np.asarray(residuals, dtype=np.float64)
    if resid.shape != (n,):
        raise ValueError("residuals do not match the cached batch")
    grads = {}
    dpred = (2.0 / n) * resid
    h_last = cache["last_hidden"]
    grads[f"W{spec.layers - 1}"] = (dpred @ h_last)[None, :]
    grads[f"b{spec.layers - 1}"] = np.array([dpred.sum()])
    dh = np.outer(dpred, params.weights[-1][0])
    for l in range(spec.layers - 2, -1, -1):
        h, xhat, inv, y, sg = cache["layers"][l]
        dy = dh * (sg * (1.0 + y * (1.0 - sg)))
        if spec.batch_norm:
            grads[f"gamma{l}"] = np.einsum("ij,ij->j", dy, xhat)
            grads[f"beta{l}"] = dy.sum(axis=0)
            dxhat = dy * params.bn_scale[l]
            # train-mode statistics chain rule (batch mean and variance both
            # depend on every sample)
            dz = inv * (
                dxhat
                - dxhat.mean(axis=0)
                - xhat * np.einsum("ij,ij->j", dxhat, xhat) / n
            )
        else:
            dz = dy
        grads[f"W{l}"] = dz.T @ h
        grads[f"b{l}"] = dz.sum(axis=0)
        if l > 0:
            dh = dz @ params.weights[l]
    return grads


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamHyper:
    lr: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass(frozen=True)
class PlateauSchedule:
    ratio: float = 0.4
    patience: int = 4000
    min_lr: float = 1e-6
    smoothing: float = 0.99
    threshold: float = 1e-8


@dataclass
class OptimizerState:
    """Adam moments plus the plateau tracker for the current learning rate."""

    m1: dict
    m2: dict
    step: int = 0
    lr: float = 1e-2
    best: float = math.inf
    wait: int = 0
    smoothed: float | None = None


def init_optimizer(params: NetworkParams, hyper: AdamHyper) -> OptimizerState:
    m1 = {name: np.zeros_like(t) for name, t in params.trainable()}
    m2 = {name: np.zeros_like(t) for name, t in params.trainable()}
    return OptimizerState(m1=m1, m2=m2, lr=hyper.lr)


def adamw_step(params: NetworkParams, grads: dict, state: OptimizerState,
               hyper: AdamHyper) -> None:
    """One decoupled-weight-decay Adam step, in place.

    Decay multiplies parameters by (1 - lr*wd) independently of the moment
    update; running batch-norm statistics are untouched.
    """
    state.step += 1
    t = state.step
    bc1 = 1.0 - hyper.beta1**t
    bc2 = 1.0 - hyper.beta2**t
    lr = state.lr
    for name, tensor in params.trainable():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m1 = state.m1[name]
        m2 = state.m2[name]
        m1 *= hyper.beta1
        m1 += (1.0 - hyper.beta1) * g
        m2 *= hyper.beta2
        m2 += (1.0 - hyper.beta2) * (g * g)
        tensor -= lr * hyper.weight_decay * tensor
        tensor -= (lr / bc1) * m1 / (np.sqrt(m2 / bc2) + hyper.eps)


def plateau_lr(state: OptimizerState, loss: float, schedule: PlateauSchedule) -> None:
    """Decay lr by `ratio` after `patience` iterations without improvement.

    Improvement is judged on an exponentially smoothed loss (fresh batches
    make the raw loss noisy); NaN loss raises TrainingDivergedError.
    """
    if not math.isfinite(loss):
        raise TrainingDivergedError(f"non-finite training loss: {loss}")
    if state.smoothed is None:
        state.smoothed = loss
    else:
        state.smoothed = schedule.smoothing * state.smoothed + (1.0 - schedule.smoothing) * loss
    if state.smoothed < state.best - schedule.threshold:
        state.best = state.smoothed
        state.wait = 0
    else:
        state.wait += 1
        if state.wait >= schedule.patience:
            state.lr = max(state.lr * schedule.ratio, schedule.min_lr)
            state.wait = 0
            state.best = state.smoothed


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"KRQ1"


def _tensor_sequence(params: NetworkParams):
    for l in range(params.spec.layers):
        yield params.weights[l]
        yield params.biases[l]
    if params.spec.batch_norm:
        for l in range(params.spec.layers - 1):
            yield params.bn_scale[l]
            yield params.bn_shift[l]
            yield params.bn_mean[l]
            yield params.bn_var[l]


def save_checkpoint(path, params: NetworkParams) -> None:
    """Flat binary: magic, u32 layer count, then (u32 rank, dims, f64 payload)
    per tensor, all little-endian; NetworkSpec goes to a JSON sidecar."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", params.spec.layers))
        for tensor in _tensor_sequence(params):
            fh.write(struct.pack("<I", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(tensor.astype("<f8").tobytes())
    sidecar = {
        "widths": list(params.spec.widths),
        "batch_norm": params.spec.batch_norm,
        "seed": params.spec.seed,
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def load_checkpoint(path) -> NetworkParams:
    path = Path(path)
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    spec = NetworkSpec(
        widths=tuple(sidecar["widths"]),
        batch_norm=sidecar["batch_norm"],
        seed=sidecar["seed"],
    )
    params = xavier_init(spec)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a KRQ1 checkpoint")
        (layers,) = struct.unpack("<I", fh.read(4))
        if layers != spec.layers:
            raise ValueError("checkpoint layer count disagrees with sidecar")
        tensors = []
        for _ in range(2 * layers + (4 * (layers - 1) if spec.batch_norm else 0)):
            (rank,) = struct.unpack("<I", fh.read(4))
            dims = struct.unpack(f"<{rank}I", fh.read(4 * rank))
            count = int(np.prod(dims)) if rank else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8").reshape(dims)
            tensors.append(data.astype(np.float64))
    it = iter(tensors)
    for l in range(layers):
        params.weights[l] = next(it)
        params.biases[l] = next(it)
    if spec.batch_norm:
        for l in range(layers - 1):
            params.bn_scale[l] = next(it)
            params.bn_shift[l] = next(it)
            params.bn_mean[l] = next(it)
            params.bn_var[l] = next(it)
    return params
