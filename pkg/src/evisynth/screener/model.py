"""Sentence classifier: embeddings, two stacked bidirectional LSTM layers,
mean pooling, and a two-layer dense head with dropout in between.

Everything here is written against plain numpy arrays, forward and backward
passes alike, so the arithmetic is inspectable and the analytic gradients
can be checked element by element against finite differences.

Gate layout inside each packed weight matrix is [input, forget, output,
candidate], each block of height h.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..embedkit import tokenize
from ..errors import UnknownModel

LABELS = ("P", "I", "C", "O", "S", "OTHER")
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}

UNK = "<unk>"

_MAGIC = b"SEQM"
_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 64
    hidden: int = 32
    dense_units: int = 32
    dropout: float = 0.3
    vocab_size: int = 2000

    def as_dict(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "hidden": self.hidden,
            "dense_units": self.dense_units,
            "dropout": self.dropout,
            "vocab_size": self.vocab_size,
        }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - np.max(z)
    ez = np.exp(shifted)
    return ez / np.sum(ez)


@dataclass
class _LstmTrace:
    """Per-step values cached by one directional pass for backprop."""

    inputs: np.ndarray  # (T, in_dim)
    hs: np.ndarray  # (T+1, h), hs[0] is the zero initial state
    cs: np.ndarray  # (T+1, h)
    gates: list  # per step (i, f, o, g, tanh_c)


def _lstm_forward(X: np.ndarray, W: np.ndarray, U: np.ndarray, b: np.ndarray) -> _LstmTrace:
    T = X.shape[0]
    h = U.shape[1]
    hs = np.zeros((T + 1, h))
    cs = np.zeros((T + 1, h))
    gates = []
    for t in range(T):
        z = W @ X[t] + U @ hs[t] + b
        i = _sigmoid(z[0:h])
        f = _sigmoid(z[h : 2 * h])
        o = _sigmoid(z[2 * h : 3 * h])
        g = np.tanh(z[3 * h : 4 * h])
        c = f * cs[t] + i * g
        tc = np.tanh(c)
        hs[t + 1] = o * tc
        cs[t + 1] = c
        gates.append((i, f, o, g, tc))
    return _LstmTrace(inputs=X, hs=hs, cs=cs, gates=gates)


def _lstm_backward(
    trace: _LstmTrace, W: np.ndarray, U: np.ndarray, dH: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """BPTT for one direction. dH holds upstream gradients on each step's
    output h_t. Returns (dX, dW, dU, db)."""
    X, hs, cs, gates = trace.inputs, trace.hs, trace.cs, trace.gates
    T = X.shape[0]
    h = U.shape[1]
    dW = np.zeros_like(W)
    dU = np.zeros_like(U)
    db = np.zeros(4 * h)
    dX = np.zeros_like(X)
    dh_next = np.zeros(h)
    dc_next = np.zeros(h)
    for t in range(T - 1, -1, -1):
        i, f, o, g, tc = gates[t]
        dh = dH[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        dc_next = dc * f
        dz = np.concatenate(
            [
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g * g),
            ]
        )
        dW += np.outer(dz, X[t])
        dU += np.outer(dz, hs[t])
        db += dz
        dX[t] = W.T @ dz
        dh_next = U.T @ dz
    return dX, dW, dU, db


@dataclass
class _Cache:
    token_ids: list[int]
    X0: np.ndarray
    l1f: _LstmTrace
    l1b: _LstmTrace
    l2f: _LstmTrace
    l2b: _LstmTrace
    H1: np.ndarray
    H2: np.ndarray
    pooled: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    mask: np.ndarray
    a1d: np.ndarray
    probs: np.ndarray


class SequenceModel:
    """Trained tagger over the six sentence labels."""

    def __init__(
        self, config: ModelConfig, vocab: dict[str, int], params: dict[str, np.ndarray]
    ) -> None:
        self.config = config
        self.vocab = vocab
        self.params = params

    # -- construction -----------------------------------------------------

    @classmethod
    def initialize(
        cls, config: ModelConfig, vocab: dict[str, int], rng: np.random.Generator
    ) -> "SequenceModel":
        d, h, g = config.embed_dim, config.hidden, config.dense_units
        V = max(vocab.values()) + 1 if vocab else 1

        def mat(rows: int, cols: int, fan_in: int, gain: float = 1.0) -> np.ndarray:
            scale = gain / np.sqrt(fan_in)
            return rng.uniform(-scale, scale, size=(rows, cols))

        # Wide embeddings and doubled input weights keep early activations
        # large enough for plain SGD to get traction; tighter scales stall
        # at the uniform-prediction plateau.
        params: dict[str, np.ndarray] = {"embed": rng.uniform(-0.5, 0.5, size=(V, d))}
        for name, in_dim in (("l1", d), ("l2", 2 * h)):
            for direction in ("f", "b"):
                key = f"{name}{direction}"
                params[f"{key}_W"] = mat(4 * h, in_dim, in_dim, gain=2.0)
                params[f"{key}_U"] = mat(4 * h, h, h)
                bias = np.zeros(4 * h)
                bias[h : 2 * h] = 1.0  # open forget gates at the start
                params[f"{key}_b"] = bias
        params["d1_W"] = mat(g, 2 * h, 2 * h)
        params["d1_b"] = np.zeros(g)
        params["d2_W"] = mat(len(LABELS), g, g)
        params["d2_b"] = np.zeros(len(LABELS))
        return cls(config, vocab, params)

    # -- inference ---------------------------------------------------------

    def token_ids(self, text: str) -> list[int]:
        tokens = tokenize(text)
        if not tokens:
            return [0]
        return [self.vocab.get(tok, 0) for tok in tokens]

    def forward(
        self,
        token_ids: Sequence[int],
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> _Cache:
        p = self.params
        h = self.config.hidden
        ids = list(token_ids)
        X0 = p["embed"][ids]
        l1f = _lstm_forward(X0, p["l1f_W"], p["l1f_U"], p["l1f_b"])
        l1b = _lstm_forward(X0[::-1], p["l1b_W"], p["l1b_U"], p["l1b_b"])
        H1 = np.concatenate([l1f.hs[1:], l1b.hs[1:][::-1]], axis=1)
        l2f = _lstm_forward(H1, p["l2f_W"], p["l2f_U"], p["l2f_b"])
        l2b = _lstm_forward(H1[::-1], p["l2b_W"], p["l2b_U"], p["l2b_b"])
        H2 = np.concatenate([l2f.hs[1:], l2b.hs[1:][::-1]], axis=1)
        pooled = H2.mean(axis=0)
        z1 = p["d1_W"] @ pooled + p["d1_b"]
        a1 = np.maximum(z1, 0.0)
        if train and self.config.dropout > 0.0:
            if rng is None:
                raise ValueError("training-mode forward needs an rng for dropout")
            keep = 1.0 - self.config.dropout
            mask = (rng.random(a1.shape[0]) < keep).astype(np.float64) / keep
        else:
            mask = np.ones(a1.shape[0])
        a1d = a1 * mask
        z2 = p["d2_W"] @ a1d + p["d2_b"]
        probs = _softmax(z2)
        return _Cache(
            token_ids=ids,
            X0=X0,
            l1f=l1f,
            l1b=l1b,
            l2f=l2f,
            l2b=l2b,
            H1=H1,
            H2=H2,
            pooled=pooled,
            z1=z1,
            a1=a1,
            mask=mask,
            a1d=a1d,
            probs=probs,
        )

    def predict_probs(self, text: str) -> np.ndarray:
        return self.forward(self.token_ids(text)).probs

    def predict(self, text: str) -> str:
        return LABELS[int(np.argmax(self.predict_probs(text)))]

    # -- loss and gradients -------------------------------------------------

    def example_loss_and_grads(
        self,
        token_ids: Sequence[int],
        label_index: int,
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        p = self.params
        h = self.config.hidden
        cache = self.forward(token_ids, train=train, rng=rng)
        T = cache.X0.shape[0]
        loss = -float(np.log(max(cache.probs[label_index], 1e-12)))

        grads = {name: np.zeros_like(arr) for name, arr in p.items()}
        dz2 = cache.probs.copy()
        dz2[label_index] -= 1.0
        grads["d2_W"] += np.outer(dz2, cache.a1d)
        grads["d2_b"] += dz2
        da1d = p["d2_W"].T @ dz2
        da1 = da1d * cache.mask
        dz1 = da1 * (cache.z1 > 0.0)
        grads["d1_W"] += np.outer(dz1, cache.pooled)
        grads["d1_b"] += dz1
        dpooled = p["d1_W"].T @ dz1
        dH2 = np.tile(dpooled / T, (T, 1))

        dH2f = dH2[:, :h]
        dH2b = dH2[:, h:]
        dH1_f, dW, dU, db = _lstm_backward(cache.l2f, p["l2f_W"], p["l2f_U"], dH2f)
        grads["l2f_W"] += dW
        grads["l2f_U"] += dU
        grads["l2f_b"] += db
        dH1_b_rev, dW, dU, db = _lstm_backward(
            cache.l2b, p["l2b_W"], p["l2b_U"], dH2b[::-1]
        )
        grads["l2b_W"] += dW
        grads["l2b_U"] += dU
        grads["l2b_b"] += db
        dH1 = dH1_f + dH1_b_rev[::-1]

        dH1f = dH1[:, :h]
        dH1b = dH1[:, h:]
        dX_f, dW, dU, db = _lstm_backward(cache.l1f, p["l1f_W"], p["l1f_U"], dH1f)
        grads["l1f_W"] += dW
        grads["l1f_U"] += dU
        grads["l1f_b"] += db
        dX_b_rev, dW, dU, db = _lstm_backward(
            cache.l1b, p["l1b_W"], p["l1b_U"], dH1b[::-1]
        )
        grads["l1b_W"] += dW
        grads["l1b_U"] += dU
        grads["l1b_b"] += db
        dX0 = dX_f + dX_b_rev[::-1]
        for t, token_id in enumerate(cache.token_ids):
            grads["embed"][token_id] += dX0[t]
        return loss, grads

    def batch_loss_and_grads(
        self,
        batch: Sequence[tuple[Sequence[int], int]],
        train: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        total = {name: np.zeros_like(arr) for name, arr in self.params.items()}
        loss_sum = 0.0
        for token_ids, label_index in batch:
            loss, grads = self.example_loss_and_grads(
                token_ids, label_index, train=train, rng=rng
            )
            loss_sum += loss
            for name in total:
                total[name] += grads[name]
        n = len(batch)
        for name in total:
            total[name] /= n
        return loss_sum / n, total

    # -- persistence ---------------------------------------------------------

    def _array_order(self) -> list[str]:
        return sorted(self.params)

    def save(self, path: str) -> None:
        header = {
            "config": self.config.as_dict(),
            "labels": list(LABELS),
            "vocab": sorted(self.vocab.items(), key=lambda kv: kv[1]),
            "arrays": [[name, list(self.params[name].shape)] for name in self._array_order()],
        }
        blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(struct.pack("<II", _VERSION, len(blob)))
            fh.write(blob)
            for name in self._array_order():
                fh.write(np.ascontiguousarray(self.params[name], dtype=np.float64).tobytes())

    @classmethod
    def load(cls, path: str) -> "SequenceModel":
        try:
            with open(path, "rb") as fh:
                raw = fh.read()
        except OSError as exc:
            raise UnknownModel(f"cannot read model file {path!r}: {exc}") from exc
        if raw[:4] != _MAGIC:
            raise UnknownModel(f"{path!r} is not a sequence model file")
        version, header_len = struct.unpack("<II", raw[4:12])
        if version != _VERSION:
            raise UnknownModel(f"unsupported model version {version}")
        header = json.loads(raw[12 : 12 + header_len].decode("utf-8"))
        config = ModelConfig(**header["config"])
        vocab = {tok: int(idx) for tok, idx in header["vocab"]}
        offset = 12 + header_len
        params: dict[str, np.ndarray] = {}
        for name, shape in header["arrays"]:
            size = int(np.prod(shape)) * 8
            arr = np.frombuffer(raw[offset : offset + size], dtype=np.float64)
            if arr.size * 8 != size:
                raise UnknownModel(f"model file {path!r} is truncated")
            params[name] = arr.reshape(shape).copy()
            offset += size
        return cls(config, vocab, params)


def build_vocab(sentences: Sequence[str], vocab_size: int) -> dict[str, int]:
    """Most frequent tokens get the low ids; id 0 is reserved for unknowns."""
    counts: dict[str, int] = {}
    for sentence in sentences:
        for token in tokenize(sentence):
            counts[token] = counts.get(token, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    vocab = {UNK: 0}
    for token, _ in ranked[: max(vocab_size - 1, 0)]:
        vocab[token] = len(vocab)
    return vocab
