"""Desk-scale trainable imputers: a dense autoencoder and a small self-attention model.

Both train with mini-batch gradient descent on a masked-reconstruction
objective: mean absolute error on artificially hidden entries, fresh random
masks every batch. Forward and backward passes are written out by hand in
numpy so runs are exactly reproducible and gradients can be checked against
finite differences.

Models operate in normalized space: callers are expected to z-score series
(see core.zscore_normalize) before training or querying.
"""
from __future__ import annotations

import base64
import json
import os
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .core import MaskedSeries, TimeSeries, apply_mask, derive_seed, random_missing_mask

__all__ = [
    "ImputerConfig",
    "TrainedImputer",
    "ParityReport",
    "DivergenceError",
    "train",
    "fine_tune",
    "evaluate_mae",
    "parity_check",
    "save_model",
    "load_model",
]

ARCHITECTURES = ("autoencoder", "attention")


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss or parameters; the model is not auditable."""


@dataclass(frozen=True)
class ImputerConfig:
    architecture: str = "autoencoder"
    # autoencoder: widths of the outer hidden layers and the bottleneck
    hidden: int = 32
    latent: int = 16
    # attention: embedding width, head count, feed-forward width, block count
    model_dim: int = 16
    heads: int = 2
    ff_dim: int = 32
    blocks: int = 1
    # shared training knobs
    epochs: int = 50
    batch_size: int = 16
    learning_rate: float = 0.05
    momentum: float = 0.0
    mask_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if min(self.hidden, self.latent, self.model_dim, self.heads, self.ff_dim, self.blocks) < 1:
            raise ValueError("layer widths, head count and block count must be positive")
        if self.model_dim % self.heads != 0:
            raise ValueError(f"model_dim {self.model_dim} must be divisible by heads {self.heads}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate < 0 or self.momentum < 0:
            raise ValueError("learning rate and momentum must be nonnegative")
        if not 0.0 < self.mask_fraction < 1.0:
            raise ValueError(f"mask_fraction must be in (0, 1), got {self.mask_fraction}")


def _unpack(flat: np.ndarray, shapes: list[tuple[str, tuple[int, ...]]]) -> dict[str, np.ndarray]:
    out = {}
    ofs = 0
    for name, shape in shapes:
        size = int(np.prod(shape))
        out[name] = flat[ofs : ofs + size].reshape(shape)
        ofs += size
    return out


def _fan_in_init(rng: np.random.Generator, shapes: list[tuple[str, tuple[int, ...]]]) -> np.ndarray:
    """Uniform init scaled by 1/sqrt(fan_in); biases start at zero."""
    chunks = []
    for _, shape in shapes:
        size = int(np.prod(shape))
        if len(shape) == 1:
            chunks.append(np.zeros(size))
        else:
            bound = 1.0 / np.sqrt(shape[0])
            chunks.append(rng.uniform(-bound, bound, size=size))
    return np.concatenate(chunks)


class _Autoencoder:
    """tanh MLP: flattened series -> hidden -> latent -> hidden -> series."""

    def __init__(self, n_steps: int, n_dims: int, cfg: ImputerConfig) -> None:
        flat = n_steps * n_dims
        sizes = [flat, cfg.hidden, cfg.latent, cfg.hidden, flat]
        self.shapes: list[tuple[str, tuple[int, ...]]] = []
        for layer, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
            self.shapes.append((f"W{layer}", (a, b)))
            self.shapes.append((f"b{layer}", (b,)))
        self.n_params = sum(int(np.prod(s)) for _, s in self.shapes)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return _fan_in_init(rng, self.shapes)

    def forward(self, params: np.ndarray, x: np.ndarray):
        p = _unpack(params, self.shapes)
        b, t, d = x.shape
        a0 = x.reshape(b, t * d)
        h1 = np.tanh(a0 @ p["W1"] + p["b1"])
        z = np.tanh(h1 @ p["W2"] + p["b2"])
        h2 = np.tanh(z @ p["W3"] + p["b3"])
        y = h2 @ p["W4"] + p["b4"]
        return y.reshape(b, t, d), (a0, h1, z, h2)

    def backward(self, params: np.ndarray, cache, dy: np.ndarray) -> np.ndarray:
        p = _unpack(params, self.shapes)
        a0, h1, z, h2 = cache
        b = dy.shape[0]
        dyf = dy.reshape(b, -1)
        grad = np.zeros_like(params)
        g = _unpack(grad, self.shapes)

        g["W4"][...] = h2.T @ dyf
        g["b4"][...] = dyf.sum(axis=0)
        dh2 = (dyf @ p["W4"].T) * (1.0 - h2 * h2)
        g["W3"][...] = z.T @ dh2
        g["b3"][...] = dh2.sum(axis=0)
        dz = (dh2 @ p["W3"].T) * (1.0 - z * z)
        g["W2"][...] = h1.T @ dz
        g["b2"][...] = dz.sum(axis=0)
        dh1 = (dz @ p["W2"].T) * (1.0 - h1 * h1)
        g["W1"][...] = a0.T @ dh1
        g["b1"][...] = dh1.sum(axis=0)
        return grad


def _sinusoid_table(n_steps: int, model_dim: int) -> np.ndarray:
    pos = np.arange(n_steps, dtype=np.float64)[:, None]
    idx = np.arange(model_dim, dtype=np.float64)[None, :]
    angles = pos / np.power(10000.0, 2.0 * (idx // 2) / model_dim)
    return np.where(idx % 2 == 0, np.sin(angles), np.cos(angles))


class _SelfAttentionImputer:
    """Per-step embedding + sinusoidal positions + residual attention blocks.

    Scaled way down from production imputers but mechanically the same:
    multi-head self-attention over the (partially masked) sequence, then a
    position-wise tanh feed-forward, each with a residual connection. No
    layer norm; fan-in init and small learning rates keep desk-scale training
    stable without it.
    """

    def __init__(self, n_steps: int, n_dims: int, cfg: ImputerConfig) -> None:
        dm, ff = cfg.model_dim, cfg.ff_dim
        self.heads = cfg.heads
        self.head_dim = dm // cfg.heads
        self.blocks = cfg.blocks
        self.positions = _sinusoid_table(n_steps, dm)
        self.shapes = [("We", (n_dims, dm)), ("be", (dm,))]
        for k in range(cfg.blocks):
            for gate in ("q", "k", "v", "o"):
                self.shapes.append((f"W{gate}{k}", (dm, dm)))
                self.shapes.append((f"b{gate}{k}", (dm,)))
            self.shapes.append((f"Wf1_{k}", (dm, ff)))
            self.shapes.append((f"bf1_{k}", (ff,)))
            self.shapes.append((f"Wf2_{k}", (ff, dm)))
            self.shapes.append((f"bf2_{k}", (dm,)))
        self.shapes.append(("Wout", (dm, n_dims)))
        self.shapes.append(("bout", (n_dims,)))
        self.n_params = sum(int(np.prod(s)) for _, s in self.shapes)

    def init(self, rng: np.random.Generator) -> np.ndarray:
        return _fan_in_init(rng, self.shapes)

    def _split_heads(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.head_dim).transpose(0, 2, 1, 3)

    def _merge_heads(self, x: np.ndarray) -> np.ndarray:
        b, h, t, hd = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * hd)

    def forward(self, params: np.ndarray, x: np.ndarray):
        p = _unpack(params, self.shapes)
        h = x @ p["We"] + p["be"] + self.positions
        block_caches = []
        scale = 1.0 / np.sqrt(self.head_dim)
        for k in range(self.blocks):
            q = self._split_heads(h @ p[f"Wq{k}"] + p[f"bq{k}"])
            key = self._split_heads(h @ p[f"Wk{k}"] + p[f"bk{k}"])
            v = self._split_heads(h @ p[f"Wv{k}"] + p[f"bv{k}"])
            logits = (q @ key.transpose(0, 1, 3, 2)) * scale
            logits -= logits.max(axis=-1, keepdims=True)  # softmax stability
            weights = np.exp(logits)
            weights /= weights.sum(axis=-1, keepdims=True)
            mixed = self._merge_heads(weights @ v)
            attended = h + mixed @ p[f"Wo{k}"] + p[f"bo{k}"]
            pre = attended @ p[f"Wf1_{k}"] + p[f"bf1_{k}"]
            act = np.tanh(pre)
            out = attended + act @ p[f"Wf2_{k}"] + p[f"bf2_{k}"]
            block_caches.append((h, q, key, v, weights, mixed, attended, act))
            h = out
        y = h @ p["Wout"] + p["bout"]
        return y, (x, h, block_caches)

    def backward(self, params: np.ndarray, cache, dy: np.ndarray) -> np.ndarray:
        p = _unpack(params, self.shapes)
        x, h_final, block_caches = cache
        grad = np.zeros_like(params)
        g = _unpack(grad, self.shapes)
        scale = 1.0 / np.sqrt(self.head_dim)

        g["Wout"][...] = np.einsum("btm,btd->md", h_final, dy)
        g["bout"][...] = dy.sum(axis=(0, 1))
        dh = dy @ p["Wout"].T

        for k in reversed(range(self.blocks)):
            h_in, q, key, v, weights, mixed, attended, act = block_caches[k]
            # feed-forward residual: out = attended + tanh(attended W1 + b1) W2 + b2
            g[f"Wf2_{k}"][...] = np.einsum("btf,btm->fm", act, dh)
            g[f"bf2_{k}"][...] = dh.sum(axis=(0, 1))
            dact = dh @ p[f"Wf2_{k}"].T
            dpre = dact * (1.0 - act * act)
            g[f"Wf1_{k}"][...] = np.einsum("btm,btf->mf", attended, dpre)
            g[f"bf1_{k}"][...] = dpre.sum(axis=(0, 1))
            dattended = dh + dpre @ p[f"Wf1_{k}"].T
            # attention residual: attended = h_in + merge(softmax(q k^T) v) Wo + bo
            g[f"Wo{k}"][...] = np.einsum("btm,btn->mn", mixed, dattended)
            g[f"bo{k}"][...] = dattended.sum(axis=(0, 1))
            dmixed = self._split_heads(dattended @ p[f"Wo{k}"].T)
            dweights = dmixed @ v.transpose(0, 1, 3, 2)
            dv = weights.transpose(0, 1, 3, 2) @ dmixed
            dlogits = weights * (dweights - (dweights * weights).sum(axis=-1, keepdims=True))
            dq = (dlogits @ key) * scale
            dkey = (dlogits.transpose(0, 1, 3, 2) @ q) * scale
            dh_in = dattended.copy()
            for name, dval in (("q", dq), ("k", dkey), ("v", dv)):
                dflat = self._merge_heads(dval)
                g[f"W{name}{k}"][...] = np.einsum("btm,btn->mn", h_in, dflat)
                g[f"b{name}{k}"][...] = dflat.sum(axis=(0, 1))
                dh_in += dflat @ p[f"W{name}{k}"].T
            dh = dh_in

        g["We"][...] = np.einsum("btd,btm->dm", x, dh)
        g["be"][...] = dh.sum(axis=(0, 1))
        return grad


def _build_net(n_steps: int, n_dims: int, cfg: ImputerConfig):
    if cfg.architecture == "autoencoder":
        return _Autoencoder(n_steps, n_dims, cfg)
    return _SelfAttentionImputer(n_steps, n_dims, cfg)


@dataclass(frozen=True, eq=False)
class TrainedImputer:
    """Immutable trained model; implements the black-box impute interface."""

    config: ImputerConfig
    n_steps: int
    n_dims: int
    params: np.ndarray
    history: tuple[float, ...]

    def __post_init__(self) -> None:
        params = np.asarray(self.params, dtype=np.float64)
        if params.ndim != 1:
            raise ValueError("parameters must be a flat vector")
        if not np.all(np.isfinite(params)):
            raise ValueError("parameters must be finite")
        expected = _build_net(self.n_steps, self.n_dims, self.config).n_params
        if params.shape[0] != expected:
            raise ValueError(f"expected {expected} parameters for this config, got {params.shape[0]}")
        params = params.copy()
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "history", tuple(float(v) for v in self.history))

    @cached_property
    def _net(self):
        return _build_net(self.n_steps, self.n_dims, self.config)

    def impute(self, x: MaskedSeries) -> TimeSeries:
        """Fill the masked entries; observed entries are copied through exactly."""
        if x.series.shape != (self.n_steps, self.n_dims):
            raise ValueError(f"expected shape ({self.n_steps}, {self.n_dims}), got {x.series.shape}")
        predicted, _ = self._net.forward(self.params, x.series.values[None])
        filled = np.where(x.mask.observed(), x.series.values, predicted[0])
        return TimeSeries(x.id, filled)


@dataclass(frozen=True)
class ParityReport:
    """Are the target and reference models of comparable skill on held-out data?"""

    mae_target: float
    mae_reference: float
    tolerance: float
    passed: bool

    @property
    def gap(self) -> float:
        return abs(self.mae_target - self.mae_reference)


def _stack(dataset: list[TimeSeries]) -> np.ndarray:
    if not dataset:
        raise ValueError("dataset must be nonempty")
    shape = dataset[0].shape
    for s in dataset:
        if s.shape != shape:
            raise ValueError(f"all series must share one shape; {s.id!r} is {s.shape}, expected {shape}")
    return np.stack([s.values for s in dataset])


def _batch_observed(rng: np.random.Generator, n: int, steps: int, dims: int, n_hidden: int) -> np.ndarray:
    """Per series, hide exactly n_hidden entries chosen uniformly."""
    scores = rng.random((n, steps * dims))
    hide = np.argpartition(scores, n_hidden - 1, axis=1)[:, :n_hidden]
    observed = np.ones((n, steps * dims), dtype=bool)
    observed[np.arange(n)[:, None], hide] = False
    return observed.reshape(n, steps, dims)


def _descend(net, params: np.ndarray, data: np.ndarray, cfg: ImputerConfig, rng: np.random.Generator):
    n, steps, dims = data.shape
    n_hidden = max(1, int(round(cfg.mask_fraction * steps * dims)))
    velocity = np.zeros_like(params)
    history = []
    # Overflow during a diverging run surfaces as DivergenceError below, not
    # as a stream of numpy warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(cfg.epochs):
            order = rng.permutation(n)
            abs_err = 0.0
            n_terms = 0
            for lo in range(0, n, cfg.batch_size):
                batch = data[order[lo : lo + cfg.batch_size]]
                observed = _batch_observed(rng, batch.shape[0], steps, dims, n_hidden)
                inputs = np.where(observed, batch, 0.0)
                predicted, cache = net.forward(params, inputs)
                residual = predicted - batch
                hidden = ~observed
                count = int(hidden.sum())
                dy = np.where(hidden, np.sign(residual), 0.0) / count
                gradient = net.backward(params, cache, dy)
                velocity = cfg.momentum * velocity + gradient
                params = params - cfg.learning_rate * velocity
                abs_err += float(np.abs(residual[hidden]).sum())
                n_terms += count
            epoch_loss = abs_err / n_terms
            if not np.isfinite(epoch_loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            history.append(epoch_loss)
    if not np.all(np.isfinite(params)):
        raise DivergenceError(f"non-finite parameters after epoch {cfg.epochs - 1}")
    return params, tuple(history)


def train(dataset: list[TimeSeries], cfg: ImputerConfig) -> TrainedImputer:
    """Train from scratch; deterministic given (seed, config, data)."""
    data = _stack(dataset)
    _, steps, dims = data.shape
    net = _build_net(steps, dims, cfg)
    rng = np.random.default_rng(cfg.seed)
    params = net.init(rng)
    params, history = _descend(net, params, data, cfg, rng)
    return TrainedImputer(config=cfg, n_steps=steps, n_dims=dims, params=params, history=history)


def fine_tune(base: TrainedImputer, private: list[TimeSeries], cfg: ImputerConfig) -> TrainedImputer:
    """Continue gradient descent from ``base`` on private data only; ``base`` is untouched."""
    for field in ("architecture", "hidden", "latent", "model_dim", "heads", "ff_dim", "blocks"):
        if getattr(cfg, field) != getattr(base.config, field):
            raise ValueError(f"fine-tune config changes architecture field {field!r}")
    data = _stack(private)
    _, steps, dims = data.shape
    if (steps, dims) != (base.n_steps, base.n_dims):
        raise ValueError(f"private data shape ({steps}, {dims}) incompatible with base ({base.n_steps}, {base.n_dims})")
    rng = np.random.default_rng(cfg.seed)
    params, history = _descend(base._net, base.params.copy(), data, cfg, rng)
    return TrainedImputer(config=cfg, n_steps=steps, n_dims=dims, params=params, history=history)


def evaluate_mae(model, data: list[TimeSeries], fraction: float, seed: int) -> float:
    """Hide ``fraction`` of each series, impute, and average |error| over hidden entries."""
    from .core import apply_mask, random_missing_mask

    if not data:
        raise ValueError("no series to evaluate")
    abs_err = 0.0
    count = 0
    for i, s in enumerate(data):
        mask = random_missing_mask(s.shape, fraction, derive_seed(seed, i))
        completed = model.impute(apply_mask(s, mask))
        hidden = mask.missing()
        abs_err += float(np.abs(completed.values[hidden] - s.values[hidden]).sum())
        count += int(hidden.sum())
    return abs_err / count


def parity_check(
    target,
    reference,
    test: list[TimeSeries],
    tolerance: float,
    fraction: float = 0.2,
    seed: int = 0,
) -> ParityReport:
    """Compare held-out MAE of the two models on identical masks.

    The harness refuses to run headline experiments when this fails; a
    reference model of different skill makes the loss ratio meaningless.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    mae_t = evaluate_mae(target, list(test), fraction, seed)
    mae_r = evaluate_mae(reference, list(test), fraction, seed)
    return ParityReport(
        mae_target=mae_t,
        mae_reference=mae_r,
        tolerance=tolerance,
        passed=abs(mae_t - mae_r) <= tolerance,
    )


MODEL_FORMAT = "imputeaudit-model-v1"


def save_model(model: TrainedImputer, path: str) -> None:
    """Self-describing JSON dump; the parameter round trip is bit-exact."""
    doc = {
        "format": MODEL_FORMAT,
        "config": asdict(model.config),
        "n_steps": model.n_steps,
        "n_dims": model.n_dims,
        "history": list(model.history),
        "params_b64": base64.b64encode(np.ascontiguousarray(model.params, dtype="<f8").tobytes()).decode("ascii"),
    }
    tmp = f"{path}.tmp-{os.getpid()}"
    with open(tmp, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def load_model(path: str) -> TrainedImputer:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
    params = np.frombuffer(base64.b64decode(doc["params_b64"]), dtype="<f8").astype(np.float64)
    return TrainedImputer(
        config=ImputerConfig(**doc["config"]),
        n_steps=int(doc["n_steps"]),
        n_dims=int(doc["n_dims"]),
        params=params,
        history=tuple(doc["history"]),
    )
