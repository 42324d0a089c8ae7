"""Compact CNN binary classifier, written against numpy only.

Architecture: repeated [3x3 conv (stride 1, same padding) -> ReLU ->
2x2 max-pool] blocks, one per entry of channels_per_block, then global
average pooling and a single sigmoid unit (optionally through one hidden
dense layer). Forward, analytic backprop, Adam, the training loop, and
the weight-file format all live here.

Parameters are stored in 32-bit floats; scalar reductions (losses) are
accumulated in 64-bit. Gradient-check tests run the whole stack in
64-bit via the dtype knob on build_model.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .datasets import AugmentConfig, augment
from .errors import (
    ConfigError,
    WeightCorruptionError,
    WeightFormatError,
    WeightShapeError,
)
from .imaging import Domain, ImageTensor, prepare, resize_bilinear

WEIGHT_MAGIC = b"WGFD"
WEIGHT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Architecture + init seed. input_side must be divisible by
    2^len(channels_per_block) so the pools come out even."""

    input_side: int = 64
    channels_per_block: tuple = (8, 16, 32)
    kernel_size: int = 3
    dense_hidden: int = 0
    seed: int = 0

    def validate(self) -> None:
        blocks = tuple(int(c) for c in self.channels_per_block)
        if len(blocks) < 1 or any(c < 1 for c in blocks):
            raise ConfigError(f"Bad channels_per_block {self.channels_per_block}")
        if self.kernel_size % 2 != 1 or self.kernel_size < 1:
            raise ConfigError(f"kernel_size must be odd, got {self.kernel_size}")
        divisor = 2 ** len(blocks)
        if self.input_side % divisor != 0 or self.input_side < divisor:
            raise ConfigError(
                f"input_side {self.input_side} not divisible by 2^"
                f"{len(blocks)} = {divisor}"
            )
        if self.dense_hidden < 0:
            raise ConfigError(f"dense_hidden must be >= 0, got {self.dense_hidden}")


@dataclass
class Model:
    config: ModelConfig
    params: dict
    dtype: type = np.float32


def _tensor_shapes(cfg: ModelConfig) -> list:
    """Ordered (name, shape) table for the architecture."""
    k = cfg.kernel_size
    shapes = []
    c_in = 3
    for i, c_out in enumerate(cfg.channels_per_block):
        shapes.append((f"block{i}.kernel", (k, k, c_in, int(c_out))))
        shapes.append((f"block{i}.bias", (int(c_out),)))
        c_in = int(c_out)
    feat = c_in
    if cfg.dense_hidden > 0:
        shapes.append(("dense.weight", (feat, int(cfg.dense_hidden))))
        shapes.append(("dense.bias", (int(cfg.dense_hidden),)))
        feat = int(cfg.dense_hidden)
    shapes.append(("head.weight", (feat,)))
    shapes.append(("head.bias", (1,)))
    return shapes


def param_count(cfg: ModelConfig) -> int:
    cfg.validate()
    return sum(int(np.prod(shape)) for _, shape in _tensor_shapes(cfg))


def build_model(cfg: ModelConfig, dtype=np.float32) -> Model:
    """Seeded init: uniform in +-sqrt(6/fan_in) for weights, zero biases."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    params = {}
    for name, shape in _tensor_shapes(cfg):
        if name.endswith(".bias"):
            params[name] = np.zeros(shape, dtype=dtype)
            continue
        if name.endswith(".kernel"):
            fan_in = shape[0] * shape[1] * shape[2]
        elif name == "dense.weight":
            fan_in = shape[0]
        else:  # head.weight
            fan_in = shape[0]
        bound = np.sqrt(6.0 / fan_in)
        params[name] = rng.uniform(-bound, bound, size=shape).astype(dtype)
    return Model(config=cfg, params=params, dtype=dtype)


def _conv_forward(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray):
    """Same-padding stride-1 correlation. x: (N,H,W,Cin)."""
    k = kernel.shape[0]
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    n, height, width = x.shape[0], x.shape[1], x.shape[2]
    out = np.broadcast_to(bias, (n, height, width, kernel.shape[3])).copy()
    for dy in range(k):
        for dx in range(k):
            out += xp[:, dy : dy + height, dx : dx + width, :] @ kernel[dy, dx]
    return out, xp


def _conv_backward(d_out: np.ndarray, xp: np.ndarray, kernel: np.ndarray):
    k = kernel.shape[0]
    pad = k // 2
    n, height, width, _ = d_out.shape
    d_kernel = np.empty_like(kernel)
    d_xp = np.zeros_like(xp)
    for dy in range(k):
        for dx in range(k):
            patch = xp[:, dy : dy + height, dx : dx + width, :]
            d_kernel[dy, dx] = np.tensordot(patch, d_out, axes=([0, 1, 2], [0, 1, 2]))
            d_xp[:, dy : dy + height, dx : dx + width, :] += d_out @ kernel[dy, dx].T
    d_bias = d_out.sum(axis=(0, 1, 2))
    d_x = d_xp[:, pad : pad + height, pad : pad + width, :]
    return d_x, d_kernel, d_bias


def _pool_forward(x: np.ndarray):
    """2x2 stride-2 max pool; caches argmax (first index wins ties)."""
    n, height, width, ch = x.shape
    xr = (
        x.reshape(n, height // 2, 2, width // 2, 2, ch)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, height // 2, width // 2, ch, 4)
    )
    idx = xr.argmax(axis=-1)
    out = np.take_along_axis(xr, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _pool_backward(d_out: np.ndarray, idx: np.ndarray, in_shape):
    n, height, width, ch = in_shape
    g = np.zeros((n, height // 2, width // 2, ch, 4), dtype=d_out.dtype)
    np.put_along_axis(g, idx[..., None], d_out[..., None], axis=-1)
    g = (
        g.reshape(n, height // 2, width // 2, ch, 2, 2)
        .transpose(0, 1, 4, 2, 5, 3)
        .reshape(n, height, width, ch)
    )
    return g


def _forward_logits(model: Model, batch: np.ndarray, want_cache: bool):
    cfg = model.config
    side = cfg.input_side
    if batch.ndim != 4 or batch.shape[1:] != (side, side, 3):
        raise ConfigError(
            f"Batch shape {batch.shape} does not match model input "
            f"({side}, {side}, 3)"
        )
    x = batch.astype(model.dtype, copy=False)
    caches = []
    for i in range(len(cfg.channels_per_block)):
        kernel = model.params[f"block{i}.kernel"]
        bias = model.params[f"block{i}.bias"]
        pre, xp = _conv_forward(x, kernel, bias)
        act = np.maximum(pre, 0)
        pooled, idx = _pool_forward(act)
        if want_cache:
            caches.append((xp, pre, act.shape, idx))
        x = pooled
    gap_in_shape = x.shape
    feats = x.mean(axis=(1, 2))  # (N, C)
    gap_feats = feats
    dense_pre = None
    if cfg.dense_hidden > 0:
        dense_pre = feats @ model.params["dense.weight"] + model.params["dense.bias"]
        feats = np.maximum(dense_pre, 0)
    z = feats @ model.params["head.weight"] + model.params["head.bias"][0]
    cache = None
    if want_cache:
        cache = (caches, gap_in_shape, gap_feats, dense_pre, feats)
    return z, cache


def forward(model: Model, batch: np.ndarray) -> np.ndarray:
    """Class-1 probabilities for a batch, float64 in (0, 1)."""
    z, _ = _forward_logits(model, batch, want_cache=False)
    p = 1.0 / (1.0 + np.exp(-z.astype(np.float64)))
    return np.clip(p, 1e-12, 1.0 - 1e-12)


def bce_loss(probs: np.ndarray, labels: np.ndarray) -> float:
    """Mean binary cross-entropy with the 1e-7 clamp."""
    p = np.clip(np.asarray(probs, dtype=np.float64), 1e-7, 1.0 - 1e-7)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape:
        raise ConfigError(f"probs/labels shape mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ConfigError("bce_loss needs at least one sample")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _loss_from_logits(z: np.ndarray, y: np.ndarray) -> float:
    """Numerically fused mean BCE computed from logits, in float64."""
    z64 = z.astype(np.float64)
    y64 = np.asarray(y, dtype=np.float64)
    return float(np.mean(np.logaddexp(0.0, z64) - y64 * z64))


def backward(model: Model, batch: np.ndarray, labels: np.ndarray) -> dict:
    """Analytic gradients of the mean BCE wrt every parameter."""
    loss, grads = _loss_and_grads(model, batch, labels)
    return grads


def _loss_and_grads(model: Model, batch: np.ndarray, labels: np.ndarray):
    cfg = model.config
    z, cache = _forward_logits(model, batch, want_cache=True)
    caches, gap_in_shape, gap_feats, dense_pre, feats = cache
    y = np.asarray(labels, dtype=model.dtype)
    if y.shape != z.shape:
        raise ConfigError(f"labels shape {y.shape} does not match batch {z.shape}")
    n = z.shape[0]
    loss = _loss_from_logits(z, y)
    sig = 1.0 / (1.0 + np.exp(-z.astype(np.float64)))
    dz = ((sig - y.astype(np.float64)) / n).astype(model.dtype)  # (N,)
    grads = {}
    grads["head.weight"] = feats.T @ dz
    grads["head.bias"] = np.array([dz.sum()], dtype=model.dtype)
    d_feats = np.outer(dz, model.params["head.weight"])
    if cfg.dense_hidden > 0:
        d_pre = d_feats * (dense_pre > 0)
        grads["dense.weight"] = gap_feats.T @ d_pre
        grads["dense.bias"] = d_pre.sum(axis=0)
        d_feats = d_pre @ model.params["dense.weight"].T
    # GAP backward: spread evenly over the spatial grid
    _, gh, gw, _ = gap_in_shape
    d_pool = np.broadcast_to(
        d_feats[:, None, None, :] / (gh * gw), gap_in_shape
    ).astype(model.dtype)
    for i in reversed(range(len(cfg.channels_per_block))):
        xp, pre, act_shape, idx = caches[i]
        d_act = _pool_backward(d_pool, idx, act_shape)
        d_pre = d_act * (pre > 0)
        d_x, d_kernel, d_bias = _conv_backward(
            d_pre, xp, model.params[f"block{i}.kernel"]
        )
        grads[f"block{i}.kernel"] = d_kernel
        grads[f"block{i}.bias"] = d_bias
        d_pool = d_x
    # Key order mirrors the parameter table for readability downstream.
    return loss, {name: grads[name] for name in model.params}


@dataclass
class AdamState:
    """Moment accumulators; step counts completed updates."""

    step: int
    m: dict
    v: dict
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_adam(params: dict, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    zeros = {k: np.zeros_like(p) for k, p in params.items()}
    zeros_v = {k: np.zeros_like(p) for k, p in params.items()}
    return AdamState(step=0, m=zeros, v=zeros_v, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: dict, grads: dict, lr: float):
    """One bias-corrected Adam update. Returns (new_state, new_params)."""
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_m, new_v, new_p = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1.0 - state.beta2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        new_p[name] = p - (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.dtype)
        new_m[name], new_v[name] = m, v
    return (
        AdamState(t, new_m, new_v, state.beta1, state.beta2, state.eps),
        new_p,
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    max_epochs: int = 50
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    early_stop_patience: int = 10
    plateau_patience: int = 5
    plateau_factor: float = 0.5
    min_lr: float = 1e-6
    min_improvement: float = 1e-4
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("learning_rate, batch_size, max_epochs must be positive")
        if not (0 < self.plateau_factor < 1):
            raise ConfigError(f"plateau_factor must be in (0,1), got {self.plateau_factor}")
        if self.early_stop_patience < 1 or self.plateau_patience < 1:
            raise ConfigError("patience values must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float
    lr: float
    checkpointed: bool


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)

    CSV_HEADER = "epoch,train_loss,val_loss,val_acc,lr,checkpointed"

    def best_epoch(self) -> int:
        losses = [r.val_loss for r in self.records]
        return int(np.argmin(losses)) + 1

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.records:
            lines.append(
                f"{r.epoch},{r.train_loss!r},{r.val_loss!r},{r.val_acc!r},"
                f"{r.lr!r},{int(r.checkpointed)}"
            )
        return "\n".join(lines) + "\n"


class FitSchedule:
    """Checkpoint / plateau-LR / early-stop bookkeeping.

    Checkpointing fires on any strictly lower validation loss; the two
    patience counters only reset on improvements of at least
    min_improvement, and both run from the same comparison.
    """

    def __init__(self, cfg: TrainConfig):
        self.cfg = cfg
        self.lr = cfg.learning_rate
        self.best_checkpoint = np.inf
        self.best_significant = np.inf
        self.plateau_counter = 0
        self.stop_counter = 0

    def observe(self, val_loss: float):
        """Returns (checkpointed, stop). self.lr is the rate for the NEXT
        epoch after this call."""
        checkpointed = val_loss < self.best_checkpoint
        if checkpointed:
            self.best_checkpoint = val_loss
        if val_loss <= self.best_significant - self.cfg.min_improvement:
            self.best_significant = val_loss
            self.plateau_counter = 0
            self.stop_counter = 0
        else:
            self.plateau_counter += 1
            self.stop_counter += 1
            if self.plateau_counter >= self.cfg.plateau_patience:
                self.lr = max(self.lr * self.cfg.plateau_factor, self.cfg.min_lr)
                self.plateau_counter = 0
        return checkpointed, self.stop_counter >= self.cfg.early_stop_patience


def _domain_batch(images, domain: Domain, side: int, dtype) -> np.ndarray:
    return np.stack([prepare(img, domain, side).data for img in images]).astype(dtype)


def train(
    model: Model,
    train_items,
    val_items,
    tcfg: TrainConfig,
    domain: Domain,
    loader: Callable,
    augment_cfg: Optional[AugmentConfig] = None,
    log: Optional[Callable[[str], None]] = None,
):
    """Mini-batch training with val-loss checkpointing.

    When augment_cfg is given, training items are re-warped every epoch
    (one affine draw each) before the domain transform; validation items
    are always prepared unaugmented. Returns (best_model, TrainHistory).
    Bit-identical given identical data, seeds, and config.
    """
    tcfg.validate()
    if len(train_items) == 0 or len(val_items) == 0:
        raise ConfigError("train() needs non-empty train and val item lists")
    side = model.config.input_side
    base_train = [resize_bilinear(loader(it), side, side) for it in train_items]
    y_train = np.array([it.label for it in train_items], dtype=np.float64)
    val_x = _domain_batch([loader(it) for it in val_items], domain, side, model.dtype)
    y_val = np.array([it.label for it in val_items], dtype=np.float64)

    rng = np.random.default_rng(tcfg.seed)
    schedule = FitSchedule(tcfg)
    opt = init_adam(model.params, tcfg.beta1, tcfg.beta2, tcfg.eps)
    params = model.params
    best_params = {k: v.copy() for k, v in params.items()}
    history = TrainHistory()
    n = len(base_train)

    for epoch in range(1, tcfg.max_epochs + 1):
        lr_epoch = schedule.lr
        perm = rng.permutation(n)
        loss_sum = 0.0
        work = Model(model.config, params, model.dtype)
        for start in range(0, n, tcfg.batch_size):
            chunk = perm[start : start + tcfg.batch_size]
            batch_imgs = []
            for i in chunk:
                img = base_train[i]
                if augment_cfg is not None:
                    img = augment(img, augment_cfg, rng)
                batch_imgs.append(prepare(img, domain, side).data)
            xb = np.stack(batch_imgs).astype(model.dtype)
            yb = y_train[chunk]
            work.params = params
            loss, grads = _loss_and_grads(work, xb, yb)
            opt, params = adam_step(opt, params, grads, lr_epoch)
            loss_sum += loss * len(chunk)
        train_loss = loss_sum / n

        work.params = params
        val_z = np.concatenate(
            [
                _forward_logits(work, val_x[s : s + 256], want_cache=False)[0]
                for s in range(0, len(val_x), 256)
            ]
        )
        val_loss = _loss_from_logits(val_z, y_val)
        val_acc = float(np.mean((val_z >= 0.0) == (y_val >= 0.5)))

        checkpointed, stop = schedule.observe(val_loss)
        if checkpointed:
            best_params = {k: v.copy() for k, v in params.items()}
        history.records.append(
            EpochRecord(epoch, train_loss, val_loss, val_acc, lr_epoch, checkpointed)
        )
        if log is not None:
            log(
                f"epoch {epoch:3d}  train {train_loss:.4f}  val {val_loss:.4f}"
                f"  acc {val_acc:.3f}  lr {lr_epoch:.2e}"
                + ("  *" if checkpointed else "")
            )
        if stop:
            break

    return Model(model.config, best_params, model.dtype), history


def predict(
    model: Model, items, domain: Domain, loader: Callable, batch_size: int = 64
) -> np.ndarray:
    """Probabilities for items in order, unaugmented."""
    side = model.config.input_side
    probs = []
    for start in range(0, len(items), batch_size):
        chunk = items[start : start + batch_size]
        xb = _domain_batch([loader(it) for it in chunk], domain, side, model.dtype)
        probs.append(forward(model, xb))
    if not probs:
        return np.zeros(0, dtype=np.float64)
    return np.concatenate(probs)


def save_model(model: Model, path, train_seed: Optional[int] = None) -> None:
    """Write the binary weight file.

    Layout: magic 'WGFD', version byte, u32 length-prefixed JSON metadata
    (architecture, tensor table, training seed), raw little-endian
    float32 tensor data in table order, trailing CRC32 of all preceding
    bytes.
    """
    cfg = model.config
    table = _tensor_shapes(cfg)
    meta = {
        "config": {
            "input_side": cfg.input_side,
            "channels_per_block": list(cfg.channels_per_block),
            "kernel_size": cfg.kernel_size,
            "dense_hidden": cfg.dense_hidden,
            "seed": cfg.seed,
        },
        "tensors": [{"name": name, "shape": list(shape)} for name, shape in table],
        "train_seed": train_seed,
    }
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    blob = bytearray()
    blob += WEIGHT_MAGIC
    blob += bytes([WEIGHT_VERSION])
    blob += struct.pack("<I", len(meta_bytes))
    blob += meta_bytes
    for name, shape in table:
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        if arr.shape != shape:
            raise WeightShapeError(
                f"Tensor {name} has shape {arr.shape}, table says {shape}"
            )
        blob += arr.tobytes()
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(path) -> Model:
    """Read a weight file back; every failure mode is a distinct error."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise WeightCorruptionError(
            f"cannot read weight file {path}: {exc.strerror or exc}"
        ) from exc
    if len(blob) < 13:
        raise WeightCorruptionError(f"Weight file truncated ({len(blob)} bytes)")
    if blob[:4] != WEIGHT_MAGIC:
        raise WeightFormatError(
            f"Bad magic {blob[:4]!r}; not a weight file of this format"
        )
    if blob[4] != WEIGHT_VERSION:
        raise WeightFormatError(
            f"Unsupported weight format version {blob[4]} (expected {WEIGHT_VERSION})"
        )
    (stored_crc,) = struct.unpack("<I", blob[-4:])
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise WeightCorruptionError("Weight file checksum mismatch")
    (meta_len,) = struct.unpack("<I", blob[5:9])
    meta_end = 9 + meta_len
    if meta_end > len(blob) - 4:
        raise WeightCorruptionError("Weight file metadata overruns the file")
    try:
        meta = json.loads(blob[9:meta_end].decode("utf-8"))
        cfg = ModelConfig(
            input_side=int(meta["config"]["input_side"]),
            channels_per_block=tuple(meta["config"]["channels_per_block"]),
            kernel_size=int(meta["config"]["kernel_size"]),
            dense_hidden=int(meta["config"]["dense_hidden"]),
            seed=int(meta["config"]["seed"]),
        )
        listed = [(t["name"], tuple(t["shape"])) for t in meta["tensors"]]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise WeightCorruptionError(f"Weight metadata unreadable: {exc}") from exc
    expected = [(name, shape) for name, shape in _tensor_shapes(cfg)]
    if listed != expected:
        raise WeightShapeError(
            f"Tensor table {listed} does not match architecture {expected}"
        )
    offset = meta_end
    params = {}
    for name, shape in expected:
        count = int(np.prod(shape))
        end = offset + 4 * count
        if end > len(blob) - 4:
            raise WeightCorruptionError(f"Weight data truncated at tensor {name}")
        params[name] = (
            np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).copy()
        )
        offset = end
    if offset != len(blob) - 4:
        raise WeightCorruptionError("Trailing bytes after tensor data")
    return Model(config=cfg, params=params, dtype=np.float32)
