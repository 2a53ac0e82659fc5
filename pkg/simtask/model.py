"""Differentiable backbone: attributed event embedding, LSTM encoder, sigmoid output.

All parameters live in one flat float64 vector (a point in model space). Blocks,
in layout order::

    type_embedding         (n_event_types, d)
    categorical_embedding  (n_categorical, d)
    numeric_projection     (n_numeric, d)
    lstm_input             (4h, d)    gate rows: input, forget, output, candidate
    lstm_recurrent         (4h, h)
    lstm_bias              (4h,)
    output_weight          (h,)
    output_bias            (1,)

so ``L = d·(n_event_types + n_categorical + n_numeric) + 4h·(d + h + 1) + h + 1``.

An event embeds as ``type_embedding[type] + Σ categorical_embedding[c] +
value_n @ numeric_projection``. Episodes of different lengths are evaluated
together with explicit masks; a masked step carries the state through
unchanged, so batched results equal one-at-a-time evaluation.
"""

import base64
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .data import EpisodeSample, EventRecord
from .errors import CheckpointError, NonFiniteError, SimtaskError
from .schema import ModelConfig

PROB_EPS = 1e-7
PARAMS_FORMAT = "simtask-params/1"


# ── Parameter vectors ──


@dataclass(frozen=True)
class Block:
    name: str
    shape: tuple[int, ...]
    start: int
    stop: int


@dataclass(frozen=True)
class ParamLayout:
    """Named blocks mapped onto disjoint, contiguous index ranges covering [0, L)."""

    blocks: tuple[Block, ...]
    config_hash: str = ""

    def __post_init__(self):
        pos = 0
        for b in self.blocks:
            if b.start != pos or b.stop - b.start != math.prod(b.shape):
                raise SimtaskError(f"layout block '{b.name}' does not continue at index {pos}")
            pos = b.stop

    @classmethod
    def from_shapes(cls, shapes: Sequence[tuple[str, tuple[int, ...]]], config_hash: str = "") -> "ParamLayout":
        blocks = []
        pos = 0
        for name, shape in shapes:
            size = math.prod(shape)
            blocks.append(Block(name=name, shape=tuple(shape), start=pos, stop=pos + size))
            pos += size
        return cls(blocks=tuple(blocks), config_hash=config_hash)

    @property
    def size(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)

    def to_header(self) -> list[dict]:
        return [{"name": b.name, "shape": list(b.shape), "start": b.start, "stop": b.stop} for b in self.blocks]

    @classmethod
    def from_header(cls, header: list[dict], config_hash: str = "") -> "ParamLayout":
        blocks = tuple(Block(h["name"], tuple(h["shape"]), h["start"], h["stop"]) for h in header)
        return cls(blocks=blocks, config_hash=config_hash)


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat, read-only parameter state with its block layout."""

    values: np.ndarray
    layout: ParamLayout

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.shape[0] != self.layout.size:
            raise SimtaskError(f"parameter vector has {values.shape[0]} entries, layout expects {self.layout.size}")
        for b in self.layout.blocks:
            if not np.isfinite(values[b.start : b.stop]).all():
                raise NonFiniteError(b.name)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.shape[0]

    def block(self, name: str) -> np.ndarray:
        b = self.layout.block(name)
        return self.values[b.start : b.stop].reshape(b.shape)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values=values, layout=self.layout)

    def same_layout(self, other: "ParamVector") -> bool:
        return self.layout == other.layout

    def equals(self, other: "ParamVector") -> bool:
        return self.same_layout(other) and np.array_equal(self.values, other.values)


def zeros_like(params: ParamVector) -> ParamVector:
    return ParamVector(values=np.zeros(len(params)), layout=params.layout)


def param_layout(config: ModelConfig) -> ParamLayout:
    d, h = config.embed_dim, config.hidden_dim
    return ParamLayout.from_shapes(
        [
            ("type_embedding", (config.n_event_types, d)),
            ("categorical_embedding", (config.n_categorical, d)),
            ("numeric_projection", (config.n_numeric, d)),
            ("lstm_input", (4 * h, d)),
            ("lstm_recurrent", (4 * h, h)),
            ("lstm_bias", (4 * h,)),
            ("output_weight", (h,)),
            ("output_bias", (1,)),
        ],
        config_hash=config.config_hash(),
    )


def param_count(config: ModelConfig) -> int:
    d, h = config.embed_dim, config.hidden_dim
    return d * (config.n_event_types + config.n_categorical + config.n_numeric) + 4 * h * (d + h + 1) + h + 1


def init_params(config: ModelConfig, seed: int = 0) -> ParamVector:
    """Uniform(-σ, σ) initialization with the forget-gate bias offset added."""
    layout = param_layout(config)
    rng = np.random.default_rng(seed)
    values = rng.uniform(-config.init_scale, config.init_scale, size=layout.size)
    bias = layout.block("lstm_bias")
    h = config.hidden_dim
    values[bias.start + h : bias.start + 2 * h] += config.forget_bias
    return ParamVector(values=values, layout=layout)


# ── Evaluation ──


@dataclass(frozen=True)
class PredictionBatch:
    samples: tuple[EpisodeSample, ...]
    probabilities: tuple[float, ...]


@dataclass
class _Batch:
    types: np.ndarray  # (B, T) int
    cats: np.ndarray  # (B, T, n_categorical) counts
    numeric: np.ndarray  # (B, T, n_numeric)
    mask: np.ndarray  # (B, T) bool
    labels: np.ndarray  # (B,)


def _encode(params: ParamVector, samples: Sequence[EpisodeSample]) -> _Batch:
    n_types = params.layout.block("type_embedding").shape[0]
    n_cat = params.layout.block("categorical_embedding").shape[0]
    n_num = params.layout.block("numeric_projection").shape[0]
    B = len(samples)
    T = max(len(s.events) for s in samples)

    types = np.zeros((B, T), dtype=np.int64)
    cats = np.zeros((B, T, n_cat))
    numeric = np.zeros((B, T, n_num))
    mask = np.zeros((B, T), dtype=bool)
    labels = np.zeros(B)
    for b, sample in enumerate(samples):
        a = sample.arrays
        length = a.types.shape[0]
        if length == 0:
            raise SimtaskError("empty episode")
        if a.types.max() >= n_types:
            raise SimtaskError(f"event type index {int(a.types.max())} out of vocabulary range ({n_types})")
        if a.cat_index.size and a.cat_index.max() >= n_cat:
            raise SimtaskError(f"categorical index {int(a.cat_index.max())} out of vocabulary range ({n_cat})")
        if a.numeric.shape[1] != n_num:
            raise SimtaskError(f"episode has {a.numeric.shape[1]} numeric dims, model expects {n_num}")
        types[b, :length] = a.types
        numeric[b, :length] = a.numeric
        np.add.at(cats[b], (a.cat_event, a.cat_index), 1.0)
        mask[b, :length] = True
        labels[b] = sample.label
    return _Batch(types=types, cats=cats, numeric=numeric, mask=mask, labels=labels)


def embed_event(params: ParamVector, e: EventRecord) -> np.ndarray:
    """Embedding of a single event: type row + categorical rows + numeric projection."""
    type_emb = params.block("type_embedding")
    cat_emb = params.block("categorical_embedding")
    proj = params.block("numeric_projection")
    if not 0 <= e.event_type < type_emb.shape[0]:
        raise SimtaskError(f"event type index {e.event_type} out of vocabulary range ({type_emb.shape[0]})")
    for c in e.value_c:
        if not 0 <= c < cat_emb.shape[0]:
            raise SimtaskError(f"categorical index {c} out of vocabulary range ({cat_emb.shape[0]})")
    if len(e.value_n) != proj.shape[0]:
        raise SimtaskError(f"event has {len(e.value_n)} numeric values, model expects {proj.shape[0]}")

    cat_sum = np.zeros(type_emb.shape[1])
    for c in e.value_c:
        cat_sum = cat_sum + cat_emb[c]
    numeric_term = np.asarray(e.value_n, dtype=np.float64) @ proj if proj.shape[0] else np.zeros(type_emb.shape[1])
    return type_emb[e.event_type] + cat_sum + numeric_term


def _embed(params: ParamVector, batch: _Batch) -> np.ndarray:
    x = params.block("type_embedding")[batch.types]
    x = x + batch.cats @ params.block("categorical_embedding")
    x = x + batch.numeric @ params.block("numeric_projection")
    return x


def _run(params: ParamVector, batch: _Batch):
    """Forward pass keeping what backpropagation through time needs."""
    W = params.block("lstm_input")
    U = params.block("lstm_recurrent")
    bias = params.block("lstm_bias")
    H = U.shape[1]
    X = _embed(params, batch)
    B, T = batch.mask.shape

    h = np.zeros((B, H))
    c = np.zeros((B, H))
    steps = []
    for t in range(T):
        m = batch.mask[:, t : t + 1]
        z = X[:, t] @ W.T + h @ U.T + bias
        i = expit(z[:, :H])
        f = expit(z[:, H : 2 * H])
        o = expit(z[:, 2 * H : 3 * H])
        g = np.tanh(z[:, 3 * H :])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        steps.append((h, c, i, f, o, g, tc, m))
        c = np.where(m, c_new, c)
        h = np.where(m, o * tc, h)

    logits = h @ params.block("output_weight") + params.block("output_bias")[0]
    if not np.isfinite(logits).all():
        raise NonFiniteError("logits")
    return X, steps, h, logits


def _check_batch(batch: Sequence[EpisodeSample]):
    if len(batch) == 0:
        raise SimtaskError("empty batch")


def forward(params: ParamVector, x: EpisodeSample) -> float:
    """Predicted death probability for one episode (unclamped, strictly inside (0, 1))."""
    if len(x.events) == 0:
        raise SimtaskError("empty episode")
    _, _, _, logits = _run(params, _encode(params, [x]))
    return float(expit(logits[0]))


def predict(params: ParamVector, samples: Sequence[EpisodeSample]) -> PredictionBatch:
    _check_batch(samples)
    _, _, _, logits = _run(params, _encode(params, samples))
    return PredictionBatch(samples=tuple(samples), probabilities=tuple(float(p) for p in expit(logits)))


def _cross_entropy(p: np.ndarray, y: np.ndarray) -> float:
    pc = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.sum(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))


def loss(params: ParamVector, batch: Sequence[EpisodeSample]) -> float:
    """Summed cross entropy over the batch."""
    _check_batch(batch)
    enc = _encode(params, batch)
    _, _, _, logits = _run(params, enc)
    return _cross_entropy(expit(logits), enc.labels)


def loss_and_grad(params: ParamVector, batch: Sequence[EpisodeSample]) -> tuple[float, ParamVector]:
    """Summed cross entropy and its exact gradient by backpropagation through time.

    The gradient is that of the unclamped cross entropy (``p - y`` at the logit);
    the clamp only guards the reported loss value.
    """
    _check_batch(batch)
    enc = _encode(params, batch)
    X, steps, h_last, logits = _run(params, enc)
    p = expit(logits)
    total = _cross_entropy(p, enc.labels)

    W = params.block("lstm_input")
    U = params.block("lstm_recurrent")
    w_out = params.block("output_weight")
    H = U.shape[1]

    dlogits = p - enc.labels
    grads = {
        "output_weight": h_last.T @ dlogits,
        "output_bias": np.array([dlogits.sum()]),
    }
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * H)
    dX = np.zeros_like(X)

    dh = dlogits[:, None] * w_out[None, :]
    dc = np.zeros_like(dh)
    for t in range(len(steps) - 1, -1, -1):
        h_prev, c_prev, i, f, o, g, tc, m = steps[t]
        dh_step = np.where(m, dh, 0.0)
        dc_step = np.where(m, dc, 0.0) + dh_step * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc_step * g * i * (1.0 - i),
                dc_step * c_prev * f * (1.0 - f),
                dh_step * tc * o * (1.0 - o),
                dc_step * i * (1.0 - g * g),
            ],
            axis=1,
        )
        dW += dz.T @ X[:, t]
        dU += dz.T @ h_prev
        db += dz.sum(axis=0)
        dX[:, t] = dz @ W
        dh = dz @ U + np.where(m, 0.0, dh)
        dc = dc_step * f + np.where(m, 0.0, dc)

    d_type = np.zeros_like(params.block("type_embedding"))
    np.add.at(d_type, enc.types.reshape(-1), dX.reshape(-1, dX.shape[-1]))
    grads["type_embedding"] = d_type
    grads["categorical_embedding"] = np.einsum("btc,btd->cd", enc.cats, dX)
    grads["numeric_projection"] = np.einsum("btn,btd->nd", enc.numeric, dX)
    grads["lstm_input"] = dW
    grads["lstm_recurrent"] = dU
    grads["lstm_bias"] = db

    flat = np.empty(params.layout.size)
    for b in params.layout.blocks:
        block_grad = np.asarray(grads[b.name]).reshape(-1)
        if not np.isfinite(block_grad).all():
            raise NonFiniteError(b.name)
        flat[b.start : b.stop] = block_grad
    return total, ParamVector(values=flat, layout=params.layout)


def loss_grad(params: ParamVector, batch: Sequence[EpisodeSample]) -> ParamVector:
    return loss_and_grad(params, batch)[1]


class LSTMObjective:
    """The backbone's loss and gradient, as consumed by the meta-training loop."""

    loss = staticmethod(loss)
    loss_grad = staticmethod(loss_grad)
    loss_and_grad = staticmethod(loss_and_grad)

    def predict(self, params: ParamVector, samples: Sequence[EpisodeSample]) -> list[float]:
        return list(predict(params, samples).probabilities)


# ── Serialization ──


def encode_values(values: np.ndarray) -> str:
    return base64.b64encode(np.asarray(values, dtype="<f8").tobytes()).decode("ascii")


def decode_values(text: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(text.encode("ascii")), dtype="<f8").astype(np.float64)


def params_to_dict(params: ParamVector) -> dict:
    return {
        "format": PARAMS_FORMAT,
        "config_hash": params.layout.config_hash,
        "layout": params.layout.to_header(),
        "values": encode_values(params.values),
    }


def params_from_dict(data: dict, config: Optional[ModelConfig] = None) -> ParamVector:
    if data.get("format") != PARAMS_FORMAT:
        raise CheckpointError(f"unsupported parameter format: {data.get('format')!r}")
    layout = ParamLayout.from_header(data["layout"], data.get("config_hash", ""))
    if config is not None and layout.config_hash != config.config_hash():
        raise CheckpointError(
            f"parameter file was written for config {layout.config_hash}, current config is {config.config_hash()}"
        )
    return ParamVector(values=decode_values(data["values"]), layout=layout)


def save_params(params: ParamVector, path: Path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(params_to_dict(params), f, indent=1)
        f.write("\n")


def load_params(path: Path, config: Optional[ModelConfig] = None) -> ParamVector:
    """Load a parameter file; when a config is given its hash must match the file's."""
    if not Path(path).exists():
        raise CheckpointError(f"parameter file not found: {path}")
    with open(path, encoding="utf-8") as f:
        return params_from_dict(json.load(f), config)
