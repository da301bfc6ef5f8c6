"""Synthetic labeled pieces and independent reference implementations."""

import itertools
import math

import numpy as np

from pkspell.corpus import LabeledPiece, Note
from pkspell.tonal import NATURAL_SEMITONES, KeySignature, TonalPitchClass


def spell_pitch(tpc, octave):
    return 12 * octave + NATURAL_SEMITONES[tpc.letter] + tpc.alter


def scale_piece(pid="c-major", ks=0, attributes=None):
    """One octave of the major scale for ``ks`` (C D E F G A B for ks=0)."""
    degrees = [TonalPitchClass.from_fifth_index(ks + f) for f in (0, 2, 4, -1, 1, 3, 5)]
    notes = [Note(float(i), 1.0, spell_pitch(t, 5) % 128) for i, t in enumerate(degrees)]
    return LabeledPiece(pid, notes, dict(attributes or {}), degrees, [KeySignature(ks)] * 7).sorted()


def random_piece(rng, n_notes, ks=None, pid="rand", chromatic=0.15, attributes=None):
    """Diatonic melody with occasional chords and chromatic alterations."""
    ks = int(rng.integers(-6, 7)) if ks is None else ks
    notes, tpcs = [], []
    t = 0.0
    while len(notes) < n_notes:
        size = 1 if rng.random() < 0.8 else int(rng.integers(2, 4))
        dur = float(rng.choice([0.125, 0.25, 0.5, 1.0, 1.5, 2.0]))
        for _ in range(min(size, n_notes - len(notes))):
            f = ks + int(rng.integers(-1, 6))
            if rng.random() < chromatic:
                f += 7 if rng.random() < 0.6 else -7
            f = max(-15, min(19, f))
            tpc = TonalPitchClass.from_fifth_index(f)
            pitch = max(0, min(127, spell_pitch(tpc, int(rng.integers(3, 7)))))
            if pitch % 12 != (NATURAL_SEMITONES[tpc.letter] + tpc.alter) % 12:
                pitch = spell_pitch(tpc, 5)
            notes.append(Note(t, dur, pitch))
            tpcs.append(tpc)
        t += dur
    piece = LabeledPiece(pid, notes, dict(attributes or {}), tpcs, [KeySignature(ks)] * len(notes))
    return piece.sorted()


def wide_piece(rng, n_notes, pid="wide"):
    """Spellings drawn from the whole line of fifths, one random key signature."""
    tpcs = [TonalPitchClass.from_fifth_index(int(f)) for f in rng.integers(-15, 20, n_notes)]
    notes = [Note(float(i), 1.0, spell_pitch(t, 5)) for i, t in enumerate(tpcs)]
    ks = KeySignature(int(rng.integers(-7, 8)))
    return LabeledPiece(pid, notes, {}, tpcs, [ks] * n_notes).sorted()


# -- reference implementations ----------------------------------------------


def brute_force_kmeans(durations, k):
    """Enumerate every contiguous partition of the sorted distinct values.

    Returns (total cost, last-index-of-each-cluster boundaries, class per input),
    keeping the lexicographically smallest boundaries among ties.
    """
    values = sorted(set(durations))
    u = len(values)
    m = min(k, u)
    best = None
    for cuts in itertools.combinations(range(u - 1), m - 1):
        ends = list(cuts) + [u - 1]
        start, parts = 0, []
        for end in ends:
            members = [d for d in durations if values[start] <= d <= values[end]]
            centre = math.fsum(members) / len(members)
            parts.append(math.fsum((d - centre) ** 2 for d in members))
            start = end + 1
        cost = math.fsum(parts)
        # combinations() yields boundaries in lexicographic order
        if best is None or cost < best[0] - 1e-12 * max(best[0], 1e-300):
            best = (cost, ends)
    cost, ends = best
    rank = {}
    start = 0
    for c, end in enumerate(ends):
        for v in values[start : end + 1]:
            rank[v] = c
        start = end + 1
    return cost, ends, [rank[d] for d in durations]


def brute_force_transposition(piece, chromatic):
    """Try every fifth shift in [-12, 12]; None when nothing is representable."""
    found = []
    for shift in range(-12, 13):
        if (7 * shift) % 12 != chromatic:
            continue
        try:
            tpcs = [TonalPitchClass.from_fifth_index(t.fifth_index + shift) for t in piece.tpcs]
            [KeySignature(k.fifths + shift) for k in piece.kss]
        except ValueError:
            continue
        found.append((sum(abs(t.alter) for t in tpcs), abs(shift), -shift, shift))
    return min(found)[3] if found else None


def gru_reference(x, h, W, U, b, bhn):
    """Scalar loop re-evaluation of the GRU equations, one unit at a time."""
    H = len(h)
    out = []
    for j in range(H):
        def pre(gate):
            col = gate * H + j
            return (sum(x[i] * W[i][col] for i in range(len(x)))
                    + sum(h[i] * U[i][col] for i in range(H)))
        r = 1.0 / (1.0 + math.exp(-(pre(0) + b[j])))
        z = 1.0 / (1.0 + math.exp(-(pre(1) + b[H + j])))
        xn = sum(x[i] * W[i][2 * H + j] for i in range(len(x))) + b[2 * H + j]
        hn = sum(h[i] * U[i][2 * H + j] for i in range(H)) + bhn[j]
        n = math.tanh(xn + r * hn)
        out.append((1 - z) * n + z * h[j])
    return np.array(out)


def reference_logits(inputs, model):
    """Whole two-stage model (inference mode) built from gru_reference only."""
    p = model.params
    cfg = model.config
    H = cfg.hidden_per_direction

    def run(stage, seq):
        outs = []
        for d in cfg.directions:
            order = range(len(seq)) if d == "f" else range(len(seq) - 1, -1, -1)
            h = np.zeros(H)
            states = [None] * len(seq)
            for t in order:
                h = gru_reference(seq[t], h, p[f"{stage}.{d}.W"], p[f"{stage}.{d}.U"],
                                  p[f"{stage}.{d}.b"], p[f"{stage}.{d}.bhn"])
                states[t] = h
            outs.append(np.array(states))
        return np.concatenate(outs, axis=1)

    h1 = run("s1", inputs)
    tpc = h1 @ p["tpc.W"] + p["tpc.b"]
    if cfg.architecture == "single":
        h2 = h1
    else:
        h2 = run("s2", h1 if cfg.architecture == "two_stage" else inputs)
    ks = h2 @ p["ks.W"] + p["ks.b"]
    return tpc, ks


def random_inputs(rng, T, k=4, use_durations=True):
    X = np.zeros((T, 12 + (k if use_durations else 0)))
    X[np.arange(T), rng.integers(0, 12, T)] = 1.0
    if use_durations:
        X[np.arange(T), 12 + rng.integers(0, k, T)] = 1.0
    return X


def gradient_check(model, X, mask, tpc_ids, ks_ids, rng, n_random=24, step=1e-5, floor=1e-6):
    """Max relative error of backward() against central differences.

    Checks every tensor at one random coordinate, ``n_random`` further random
    coordinates, and one random direction through all parameters at once.
    The relative error is |a - b| / max(|a|, |b|, floor); the floor keeps
    gradients that are zero up to rounding from dividing noise by noise.
    """
    _, grads, _ = model.loss_and_grad(X, mask, tpc_ids, ks_ids)
    params = model.params
    names = sorted(params)

    def loss_at():
        return model.loss_and_grad(X, mask, tpc_ids, ks_ids)[0]

    coords = [(n, tuple(int(rng.integers(s)) for s in params[n].shape)) for n in names]
    sizes = np.array([params[n].size for n in names], dtype=float)
    for _ in range(n_random):
        n = names[rng.choice(len(names), p=sizes / sizes.sum())]
        coords.append((n, tuple(int(rng.integers(s)) for s in params[n].shape)))

    worst = 0.0
    for name, idx in coords:
        old = params[name][idx]
        params[name][idx] = old + step
        up = loss_at()
        params[name][idx] = old - step
        down = loss_at()
        params[name][idx] = old
        numeric = (up - down) / (2 * step)
        analytic = grads[name][idx]
        worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor))

    direction = {n: rng.standard_normal(params[n].shape) for n in names}
    norm = math.sqrt(sum(float((d * d).sum()) for d in direction.values()))
    saved = {n: params[n].copy() for n in names}
    values = []
    for sign in (1, -1):
        for n in names:
            params[n][...] = saved[n] + sign * step * direction[n] / norm
        values.append(loss_at())
    for n in names:
        params[n][...] = saved[n]
    numeric = (values[0] - values[1]) / (2 * step)
    analytic = sum(float((grads[n] * direction[n]).sum()) for n in names) / norm
    worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), floor))
    return worst


def random_batch(rng, config, max_T=6, batch=2):
    """Padded random inputs, labels and mask for ``config``."""
    from pkspell.model import pad_batch, pad_labels

    lengths = rng.integers(1, max_T + 1, batch)
    seqs = [random_inputs(rng, int(L), config.n_duration_classes, config.use_durations) for L in lengths]
    X, mask = pad_batch(seqs)
    T = X.shape[1]
    tpc = pad_labels([rng.integers(0, 35, L) for L in lengths], T)
    ks = pad_labels([rng.integers(0, 15, L) for L in lengths], T)
    return X, mask, tpc, ks
