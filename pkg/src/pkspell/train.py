"""Training loop: seeded split, augmentation of the training side, Adam."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np

from .augment import augment_corpus
from .corpus import LabeledPiece
from .errors import EmptyCorpus, InputError
from .model import Model, ModelConfig, decode, pad_batch, pad_labels
from .quantize import DEFAULT_K

log = logging.getLogger(__name__)

SEED_ENV = "PKSPELL_SEED"


@dataclass
class TrainConfig:
    epochs: int = 40
    lr: float = 0.01
    lr_drop_epoch: int = 20
    lr_drop_factor: float = 10.0
    batch_size: int = 32
    seed: int = 0
    split_fraction: float = 0.85
    augment: bool = True
    single_rnn: bool = False
    separate: bool = False
    no_durations: bool = False
    unidirectional: bool = False
    hidden: int = 300
    dropout: float = 0.3
    k: int = DEFAULT_K
    clip_norm: Optional[float] = None

    def model_config(self) -> ModelConfig:
        if self.single_rnn and self.separate:
            raise InputError("single_rnn and separate are mutually exclusive")
        arch = "single" if self.single_rnn else "separate" if self.separate else "two_stage"
        return ModelConfig(
            hidden=self.hidden,
            bidirectional=not self.unidirectional,
            architecture=arch,
            use_durations=not self.no_durations,
            n_duration_classes=self.k,
            dropout=self.dropout,
        )

    @classmethod
    def from_file(cls, path, **overrides) -> TrainConfig:
        """Read ``key = value`` lines (``#`` comments allowed)."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, raw = (s.strip() for s in line.partition("="))
                if not sep or key not in types:
                    raise InputError(f"{path}:{lineno}: unknown setting {key!r}")
                values[key] = _coerce(raw, types[key], f"{path}:{lineno}")
        values.update(overrides)
        return cls(**values)


def _coerce(raw, typ, where):
    typ = str(typ)
    try:
        if "bool" in typ:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if "Optional" in typ and raw.lower() in ("", "none"):
            return None
        if "int" in typ:
            return int(raw)
        return float(raw)
    except ValueError:
        raise InputError(f"{where}: cannot parse {raw!r} as {typ}") from None


def resolve_seed(seed: Optional[int]) -> int:
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    return int(env) if env else 0


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Learning rate for a 1-based epoch: one drop after ``lr_drop_epoch``."""
    if epoch <= config.lr_drop_epoch:
        return config.lr
    return config.lr / config.lr_drop_factor


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params, grads, state: AdamState, lr: float):
    """Bias-corrected Adam update, applied to ``params`` in place."""
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for name in sorted(params):
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def clip_gradients(grads, max_norm):
    norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class EncodedPiece:
    inputs: np.ndarray
    tpc_ids: np.ndarray
    ks_ids: np.ndarray


def encode_labeled(piece: LabeledPiece, model: Model) -> EncodedPiece:
    return EncodedPiece(
        model.encode(piece),
        np.array([t.index for t in piece.tpcs]),
        np.array([k.index for k in piece.kss]),
    )


def split_corpus(corpus, fraction, rng):
    """Seeded piece-level split; training side gets round(fraction * n) pieces."""
    n = len(corpus)
    n_train = min(n, max(1, int(round(fraction * n))))
    perm = rng.permutation(n)
    return [corpus[i] for i in perm[:n_train]], [corpus[i] for i in perm[n_train:]]


def _batch(items: List[EncodedPiece]):
    X, mask = pad_batch([e.inputs for e in items])
    T = X.shape[1]
    return X, mask, pad_labels([e.tpc_ids for e in items], T), pad_labels([e.ks_ids for e in items], T)


def accuracy(model: Model, items: List[EncodedPiece], batch_size: int = 32):
    """(tpc accuracy, ks accuracy) over all notes, inference mode."""
    if not items:
        return None, None
    right_t = right_k = total = 0
    for i in range(0, len(items), batch_size):
        X, mask, tpc, ks = _batch(items[i : i + batch_size])
        out, _ = model.forward_batch(X, mask)
        pt, pk = decode(out)
        right_t += int(((pt == tpc) * mask).sum())
        right_k += int(((pk == ks) * mask).sum())
        total += int(mask.sum())
    return right_t / total, right_k / total


@dataclass
class TrainResult:
    model: Model
    history: List[dict]
    train_ids: List[str]
    validation_ids: List[str]


def train(corpus: List[LabeledPiece], config: TrainConfig = TrainConfig(), progress=None) -> TrainResult:
    """Train from scratch; returns the final-epoch model and per-epoch history."""
    if not corpus:
        raise EmptyCorpus("cannot train on an empty corpus")
    rng = np.random.default_rng(config.seed)
    train_pieces, val_pieces = split_corpus(corpus, config.split_fraction, rng)
    if config.augment:
        train_pieces = augment_corpus(train_pieces)
    log.info("training on %d pieces (%d validation)", len(train_pieces), len(val_pieces))

    model = Model(config.model_config(), seed=config.seed)
    train_items = [encode_labeled(p, model) for p in train_pieces]
    val_items = [encode_labeled(p, model) for p in val_pieces]
    state = AdamState()
    history = []
    for epoch in range(1, config.epochs + 1):
        lr = lr_at(epoch, config)
        order = rng.permutation(len(train_items))
        loss_sum = right_t = right_k = seen = 0.0
        for start in range(0, len(order), config.batch_size):
            X, mask, tpc, ks = _batch([train_items[i] for i in order[start : start + config.batch_size]])
            value, grads, out = model.loss_and_grad(X, mask, tpc, ks, training=True, rng=rng)
            if config.clip_norm is not None:
                clip_gradients(grads, config.clip_norm)
            adam_step(model.params, grads, state, lr)
            n = mask.sum()
            pt, pk = decode(out)
            loss_sum += value * n
            right_t += ((pt == tpc) * mask).sum()
            right_k += ((pk == ks) * mask).sum()
            seen += n
        val_t, val_k = accuracy(model, val_items, config.batch_size)
        row = {
            "epoch": epoch,
            "lr": lr,
            "train_loss": float(loss_sum / seen),
            "train_tpc_acc": float(right_t / seen),
            "train_ks_acc": float(right_k / seen),
            "val_tpc_acc": val_t,
            "val_ks_acc": val_k,
        }
        history.append(row)
        if progress is not None:
            progress(row)
    return TrainResult(model, history, [p.id for p in train_pieces], [p.id for p in val_pieces])
