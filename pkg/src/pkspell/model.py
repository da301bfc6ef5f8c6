"""
Two-stage recurrent tagger written directly in numpy.

Stage 1 is a bidirectional GRU over the per-note inputs (one-hot pitch-class
followed by one-hot duration class); a linear head on its output gives
35-way spelling logits. Stage 2 is a second bidirectional GRU run on the
(dropped-out) stage-1 states, with a linear head giving 15-way key signature
logits. The loss is the per-note mean of the two cross-entropies.

GRU convention (reset gate applied after the recurrent product)::

    r  = sigmoid(x W_r + h U_r + b_r)
    z  = sigmoid(x W_z + h U_z + b_z)
    n  = tanh(x W_n + b_n + r * (h U_n + b_hn))
    h' = (1 - z) * n + z * h

Weights are stored row-major as ``x @ W`` with the three gates concatenated
in the order r, z, n. Everything runs in float64; gradients are exact
backpropagation through time and are checked against finite differences in
the test suite.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionMismatch, EmptySequence, SchemaError
from .quantize import DEFAULT_K, quantize_durations
from .tonal import ALL_TPCS, N_KS, N_PC, N_TPC, KeySignature, TonalPitchClass, pitch_class_of

ARCHITECTURES = ("two_stage", "single", "separate")
CONVENTION = "gru-reset-after/rzn/x@W"
_MAGIC = b"PKSW\x01\n"

# allowed spellings per pitch class, for the constrained decoder
_ENHARMONIC_MASK = np.zeros((N_PC, N_TPC), dtype=bool)
for _t in ALL_TPCS:
    _ENHARMONIC_MASK[pitch_class_of(_t), _t.index] = True


@dataclass(frozen=True)
class ModelConfig:
    hidden: int = 300  # per stage, summed over directions
    bidirectional: bool = True
    architecture: str = "two_stage"
    use_durations: bool = True
    n_duration_classes: int = DEFAULT_K
    dropout: float = 0.3

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.bidirectional and self.hidden % 2:
            raise ValueError("bidirectional hidden size must be even")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")

    @property
    def input_dim(self) -> int:
        return N_PC + (self.n_duration_classes if self.use_durations else 0)

    @property
    def directions(self) -> Tuple[str, ...]:
        return ("f", "b") if self.bidirectional else ("f",)

    @property
    def hidden_per_direction(self) -> int:
        return self.hidden // len(self.directions)

    def stages(self) -> Dict[str, int]:
        """Recurrent stage name -> its input size."""
        if self.architecture == "two_stage":
            return {"s1": self.input_dim, "s2": self.hidden}
        if self.architecture == "single":
            return {"s1": self.input_dim}
        return {"s1": self.input_dim, "s2": self.input_dim}

    def shapes(self) -> Dict[str, Tuple[int, ...]]:
        h = self.hidden_per_direction
        shapes = {}
        for stage, d_in in self.stages().items():
            for d in self.directions:
                shapes[f"{stage}.{d}.W"] = (d_in, 3 * h)
                shapes[f"{stage}.{d}.U"] = (h, 3 * h)
                shapes[f"{stage}.{d}.b"] = (3 * h,)
                shapes[f"{stage}.{d}.bhn"] = (h,)
        shapes["tpc.W"] = (self.hidden, N_TPC)
        shapes["tpc.b"] = (N_TPC,)
        shapes["ks.W"] = (self.hidden, N_KS)
        shapes["ks.b"] = (N_KS,)
        return shapes

    def n_params(self) -> int:
        return sum(int(np.prod(s)) for s in self.shapes().values())


@dataclass
class ModelOutput:
    tpc_logits: np.ndarray  # (..., T, 35)
    ks_logits: np.ndarray  # (..., T, 15)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def log_softmax(x):
    shifted = x - x.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(x):
    return np.exp(log_softmax(x))


# -- GRU -------------------------------------------------------------------


def _gru_step(gx, h, U, bhn):
    """One step given the precomputed input projection ``gx = x W + b``."""
    H = h.shape[-1]
    gh = h @ U
    r = sigmoid(gx[..., :H] + gh[..., :H])
    z = sigmoid(gx[..., H : 2 * H] + gh[..., H : 2 * H])
    hn = gh[..., 2 * H :] + bhn
    n = np.tanh(gx[..., 2 * H :] + r * hn)
    return (1.0 - z) * n + z * h, r, z, n, hn


def gru_cell(x, h_prev, W, U, b, bhn):
    """Next hidden state for input ``x`` and previous state ``h_prev``."""
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    H = h_prev.shape[-1]
    if W.shape != (x.shape[-1], 3 * H) or U.shape != (H, 3 * H) or b.shape != (3 * H,) or bhn.shape != (H,):
        raise DimensionMismatch(
            f"x {x.shape}, h {h_prev.shape} incompatible with W {W.shape}, U {U.shape}"
        )
    return _gru_step(x @ W + b, h_prev, U, bhn)[0]


def _reverse_index(lengths, T):
    """Per-row permutation reversing each sequence inside its own length."""
    t = np.arange(T)[None, :]
    L = np.asarray(lengths)[:, None]
    return np.where(t < L, L - 1 - t, t)


def _gru_forward(X, W, U, b, bhn):
    B, T, _ = X.shape
    H = U.shape[0]
    gx = (X.reshape(B * T, -1) @ W + b).reshape(B, T, 3 * H)
    hs = np.empty((B, T, H))
    r = np.empty((B, T, H))
    z = np.empty((B, T, H))
    n = np.empty((B, T, H))
    hn = np.empty((B, T, H))
    h = np.zeros((B, H))
    for t in range(T):
        h, r[:, t], z[:, t], n[:, t], hn[:, t] = _gru_step(gx[:, t], h, U, bhn)
        hs[:, t] = h
    h_prev = np.concatenate([np.zeros((B, 1, H)), hs[:, :-1]], axis=1)
    return hs, (X, h_prev, r, z, n, hn)


def _gru_backward(dhs, cache, W, U):
    X, h_prev, r, z, n, hn = cache
    B, T, H = dhs.shape
    da = np.empty((B, T, 3 * H))  # pre-activation grads w.r.t. x W + b
    dgh_n = np.empty((B, T, H))  # grads w.r.t. h U_n + b_hn
    U_T = U.T
    dh_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dhs[:, t] + dh_next
        rt, zt, nt, hnt = r[:, t], z[:, t], n[:, t], hn[:, t]
        dan = dh * (1.0 - zt) * (1.0 - nt * nt)
        dar = dan * hnt * rt * (1.0 - rt)
        daz = dh * (h_prev[:, t] - nt) * zt * (1.0 - zt)
        dhn = dan * rt
        da[:, t, :H] = dar
        da[:, t, H : 2 * H] = daz
        da[:, t, 2 * H :] = dan
        dgh_n[:, t] = dhn
        dgh = np.concatenate([dar, daz, dhn], axis=1)
        dh_next = dh * zt + dgh @ U_T
    dgh_all = np.concatenate([da[..., : 2 * H], dgh_n], axis=2).reshape(B * T, 3 * H)
    da2 = da.reshape(B * T, 3 * H)
    grads = {
        "W": X.reshape(B * T, -1).T @ da2,
        "U": h_prev.reshape(B * T, H).T @ dgh_all,
        "b": da2.sum(axis=0),
        "bhn": dgh_n.reshape(B * T, H).sum(axis=0),
    }
    dX = (da2 @ W.T).reshape(X.shape)
    return dX, grads


# -- model -----------------------------------------------------------------


def init_params(config: ModelConfig, seed: int = 0) -> Dict[str, np.ndarray]:
    """Uniform in +/- 1/sqrt(fan) with fan the receiving hidden size."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in config.shapes().items():
        fan = config.hidden if name.startswith(("tpc.", "ks.")) else config.hidden_per_direction
        bound = 1.0 / np.sqrt(fan)
        params[name] = rng.uniform(-bound, bound, size=shape)
    return params


def pad_batch(sequences: Sequence[np.ndarray]):
    """Stack variable-length (T_i, D) arrays into zero-padded (B, T, D) plus mask."""
    if not sequences:
        raise EmptySequence("empty batch")
    lengths = np.array([len(s) for s in sequences])
    if lengths.min() < 1:
        raise EmptySequence("sequence with no notes")
    B, T = len(sequences), int(lengths.max())
    X = np.zeros((B, T, sequences[0].shape[1]))
    mask = np.zeros((B, T))
    for i, s in enumerate(sequences):
        X[i, : len(s)] = s
        mask[i, : len(s)] = 1.0
    return X, mask


def pad_labels(labels: Sequence[Sequence[int]], T: int) -> np.ndarray:
    out = np.zeros((len(labels), T), dtype=np.int64)
    for i, seq in enumerate(labels):
        out[i, : len(seq)] = seq
    return out


class Model:
    """Parameters plus the forward and backward passes over padded batches."""

    def __init__(self, config: ModelConfig = ModelConfig(), params=None, seed: int = 0):
        self.config = config
        self.params = init_params(config, seed) if params is None else params
        expected = config.shapes()
        if set(self.params) != set(expected) or any(
            self.params[k].shape != s for k, s in expected.items()
        ):
            raise DimensionMismatch("parameter shapes do not match the configuration")

    # recurrent stages ------------------------------------------------------

    def _stage_forward(self, stage, X, mask, lengths):
        p = self.params
        outs, caches = [], []
        rev = _reverse_index(lengths, X.shape[1])
        rows = np.arange(X.shape[0])[:, None]
        for d in self.config.directions:
            Xd = X[rows, rev] if d == "b" else X
            hs, cache = _gru_forward(Xd, p[f"{stage}.{d}.W"], p[f"{stage}.{d}.U"],
                                     p[f"{stage}.{d}.b"], p[f"{stage}.{d}.bhn"])
            outs.append(hs[rows, rev] if d == "b" else hs)
            caches.append(cache)
        out = np.concatenate(outs, axis=2) * mask[..., None]
        return out, (caches, rev)

    def _stage_backward(self, stage, dout, mask, cache, grads):
        caches, rev = cache
        p = self.params
        dout = dout * mask[..., None]
        h = self.config.hidden_per_direction
        rows = np.arange(dout.shape[0])[:, None]
        dX = None
        for i, d in enumerate(self.config.directions):
            dh = dout[..., i * h : (i + 1) * h]
            if d == "b":
                dh = dh[rows, rev]
            dXd, g = _gru_backward(dh, caches[i], p[f"{stage}.{d}.W"], p[f"{stage}.{d}.U"])
            if d == "b":
                dXd = dXd[rows, rev]
            for k, v in g.items():
                grads[f"{stage}.{d}.{k}"] = v
            dX = dXd if dX is None else dX + dXd
        return dX

    # full model ------------------------------------------------------------

    def _dropout(self, shape, training, rng):
        p = self.config.dropout
        if not training or p == 0:
            return None
        if rng is None:
            raise ValueError("training forward pass needs an rng for dropout")
        return (rng.random(shape) >= p) / (1.0 - p)

    def forward_batch(self, X, mask, training=False, rng=None):
        """Logits for a padded batch; returns (ModelOutput, cache)."""
        cfg, p = self.config, self.params
        if X.ndim != 3 or X.shape[2] != cfg.input_dim or mask.shape != X.shape[:2]:
            raise DimensionMismatch(f"input {X.shape} / mask {mask.shape} vs input_dim {cfg.input_dim}")
        lengths = mask.sum(axis=1).astype(np.int64)
        if X.shape[1] == 0 or lengths.min() < 1:
            raise EmptySequence("cannot run the model on an empty sequence")
        cache = {"mask": mask, "lengths": lengths}

        h1, cache["s1"] = self._stage_forward("s1", X, mask, lengths)
        drop1 = self._dropout(h1.shape, training, rng)
        d1 = h1 if drop1 is None else h1 * drop1
        cache["drop1"], cache["d1"] = drop1, d1
        tpc = d1 @ p["tpc.W"] + p["tpc.b"]

        if cfg.architecture == "single":
            ks_in = d1
        else:
            stage2_in = d1 if cfg.architecture == "two_stage" else X
            h2, cache["s2"] = self._stage_forward("s2", stage2_in, mask, lengths)
            drop2 = self._dropout(h2.shape, training, rng) if cfg.architecture == "separate" else None
            ks_in = h2 if drop2 is None else h2 * drop2
            cache["drop2"] = drop2
        cache["ks_in"] = ks_in
        ks = ks_in @ p["ks.W"] + p["ks.b"]
        return ModelOutput(tpc, ks), cache

    def backward_batch(self, cache, dtpc, dks):
        """Parameter gradients given gradients of the two logit tensors."""
        cfg, p = self.config, self.params
        mask = cache["mask"]
        grads = {}
        d1, ks_in = cache["d1"], cache["ks_in"]
        hid = cfg.hidden
        grads["tpc.W"] = d1.reshape(-1, hid).T @ dtpc.reshape(-1, N_TPC)
        grads["tpc.b"] = dtpc.reshape(-1, N_TPC).sum(axis=0)
        grads["ks.W"] = ks_in.reshape(-1, hid).T @ dks.reshape(-1, N_KS)
        grads["ks.b"] = dks.reshape(-1, N_KS).sum(axis=0)

        dd1 = dtpc @ p["tpc.W"].T
        dks_in = dks @ p["ks.W"].T
        if cfg.architecture == "single":
            dd1 = dd1 + dks_in
        else:
            dh2 = dks_in if cache["drop2"] is None else dks_in * cache["drop2"]
            dstage2_in = self._stage_backward("s2", dh2, mask, cache["s2"], grads)
            if cfg.architecture == "two_stage":
                dd1 = dd1 + dstage2_in
        dh1 = dd1 if cache["drop1"] is None else dd1 * cache["drop1"]
        self._stage_backward("s1", dh1, mask, cache["s1"], grads)
        return grads

    def loss_and_grad(self, X, mask, tpc_ids, ks_ids, training=False, rng=None):
        out, cache = self.forward_batch(X, mask, training, rng)
        value, dtpc, dks = _loss_and_logit_grads(out, tpc_ids, ks_ids, mask)
        return value, self.backward_batch(cache, dtpc, dks), out

    def encode(self, piece, k: Optional[int] = None) -> np.ndarray:
        return encode_piece(piece, self.config.n_duration_classes if k is None else k,
                            self.config.use_durations)


def _loss_and_logit_grads(out: ModelOutput, tpc_ids, ks_ids, mask):
    mask = np.asarray(mask, dtype=np.float64)
    n_valid = mask.sum()
    if n_valid == 0:
        raise EmptySequence("all steps are masked")
    total = 0.0
    grads = []
    for logits, ids in ((out.tpc_logits, tpc_ids), (out.ks_logits, ks_ids)):
        if logits.shape[:-1] != mask.shape or np.shape(ids) != mask.shape:
            raise DimensionMismatch(f"logits {logits.shape}, labels {np.shape(ids)}, mask {mask.shape}")
        logp = log_softmax(logits)
        picked = np.take_along_axis(logp, np.asarray(ids)[..., None], axis=-1)[..., 0]
        total += -(picked * mask).sum()
        g = np.exp(logp)
        np.put_along_axis(g, np.asarray(ids)[..., None],
                          np.take_along_axis(g, np.asarray(ids)[..., None], axis=-1) - 1.0, axis=-1)
        grads.append(g * (mask / n_valid)[..., None])
    return total / n_valid, grads[0], grads[1]


def loss(output: ModelOutput, tpc_ids, ks_ids, mask=None) -> float:
    """Mean over unmasked steps of CE(spelling) + CE(key signature)."""
    if mask is None:
        mask = np.ones(output.tpc_logits.shape[:-1])
    return _loss_and_logit_grads(output, tpc_ids, ks_ids, mask)[0]


# -- single-sequence helpers -------------------------------------------------


def encode_piece(piece, k: int = DEFAULT_K, use_durations: bool = True) -> np.ndarray:
    """(T, 12 + k) one-hot inputs: pitch-class, then duration class."""
    T = len(piece.notes)
    if T == 0:
        raise EmptySequence(f"piece {piece.id!r} has no notes")
    X = np.zeros((T, N_PC + (k if use_durations else 0)))
    X[np.arange(T), [n.pitch_class for n in piece.notes]] = 1.0
    if use_durations:
        classes = quantize_durations([n.duration for n in piece.notes], k)
        X[np.arange(T), N_PC + np.asarray(classes)] = 1.0
    return X


def bidirectional_pass(seq, model: Model, stage: str = "s1") -> np.ndarray:
    """(T, hidden) states of one recurrent stage over a single sequence."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or len(seq) == 0:
        raise EmptySequence("bidirectional pass needs a non-empty (T, D) sequence")
    mask = np.ones((1, len(seq)))
    out, _ = model._stage_forward(stage, seq[None], mask, np.array([len(seq)]))
    return out[0]


def forward(inputs, model: Model, training: bool = False, rng=None) -> ModelOutput:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or len(inputs) == 0:
        raise EmptySequence("forward needs a non-empty (T, D) sequence")
    out, _ = model.forward_batch(inputs[None], np.ones((1, len(inputs))), training, rng)
    return ModelOutput(out.tpc_logits[0], out.ks_logits[0])


def backward(inputs, labels, mask, model: Model, training: bool = False, rng=None):
    """(loss, gradients) for one sequence; ``labels`` is (tpc ids, ks ids)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 2 or len(inputs) == 0:
        raise EmptySequence("backward needs a non-empty (T, D) sequence")
    mask = np.ones(len(inputs)) if mask is None else np.asarray(mask, dtype=np.float64)
    tpc_ids, ks_ids = (np.asarray(l)[None] for l in labels)
    value, grads, _ = model.loss_and_grad(inputs[None], mask[None], tpc_ids, ks_ids, training, rng)
    return value, grads


def decode(output: ModelOutput, pitch_classes=None):
    """Argmax class ids per step (lowest index on ties).

    With ``pitch_classes`` given, spelling is restricted to the enharmonic
    equivalents of each note's pitch-class.
    """
    tpc_logits = output.tpc_logits
    if pitch_classes is not None:
        allowed = _ENHARMONIC_MASK[np.asarray(pitch_classes)]
        tpc_logits = np.where(allowed, tpc_logits, -np.inf)
    return np.argmax(tpc_logits, axis=-1), np.argmax(output.ks_logits, axis=-1)


def predict(piece, model: Model, k: Optional[int] = None, constrained: bool = False):
    """Spelling and key signature for every note of ``piece``."""
    X = model.encode(piece, k)
    out = forward(X, model, training=False)
    pcs = [n.pitch_class for n in piece.notes] if constrained else None
    tpc_ids, ks_ids = decode(out, pcs)
    return ([TonalPitchClass.from_index(int(i)) for i in tpc_ids],
            [KeySignature.from_index(int(i)) for i in ks_ids])


# -- weight files ------------------------------------------------------------


def save_weights(model: Model, seed: Optional[int] = None) -> bytes:
    """Serialize to the weight container (see README for the layout)."""
    names = sorted(model.params)
    tensors, offset = [], 0
    for name in names:
        arr = model.params[name]
        tensors.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size * 8
    header = {
        "convention": CONVENTION,
        "config": asdict(model.config),
        "seed": seed,
        "dtype": "<f8",
        "tensors": tensors,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = b"".join(np.ascontiguousarray(model.params[n], dtype="<f8").tobytes() for n in names)
    return _MAGIC + struct.pack("<I", len(head)) + head + body


def load_weights(data: bytes) -> Tuple[Model, dict]:
    if not data.startswith(_MAGIC):
        raise SchemaError("not a weight file (bad magic)")
    (hlen,) = struct.unpack("<I", data[len(_MAGIC) : len(_MAGIC) + 4])
    start = len(_MAGIC) + 4
    header = json.loads(data[start : start + hlen].decode("utf-8"))
    if header.get("convention") != CONVENTION:
        raise SchemaError(f"unsupported weight convention {header.get('convention')!r}")
    body = data[start + hlen :]
    params = {}
    for t in header["tensors"]:
        size = int(np.prod(t["shape"])) if t["shape"] else 1
        chunk = body[t["offset"] : t["offset"] + 8 * size]
        if len(chunk) != 8 * size:
            raise SchemaError(f"tensor {t['name']} truncated")
        params[t["name"]] = np.frombuffer(chunk, dtype="<f8").reshape(t["shape"]).astype(np.float64)
    return Model(ModelConfig(**header["config"]), params), header
