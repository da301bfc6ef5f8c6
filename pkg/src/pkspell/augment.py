"""
Transposition-based data augmentation.

A chromatic transposition by ``c`` semitones can be spelled as any fifth
shift ``f`` with ``7 f = c (mod 12)``. For each piece and each ``c`` in 1..11
we keep exactly one spelling: the one whose transposed labels stay within
double accidentals and +/-7 key signatures and that uses the fewest
accidentals over all note occurrences (double accidentals count 2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List

from .corpus import LabeledPiece, Note
from .errors import NoValidTransposition
from .tonal import (
    MAX_FIFTH,
    MAX_KS_FIFTHS,
    MIN_FIFTH,
    KeySignature,
    TonalPitchClass,
    chromatic_of,
)

SHIFT_WINDOW = 12


@dataclass(frozen=True)
class TranspositionChoice:
    chromatic: int
    fifth_shift: int
    accidental_total: int


def candidate_shifts(chromatic: int) -> List[int]:
    """Fifth shifts in [-12, 12] realising ``chromatic``, nearest the origin first."""
    if not 1 <= chromatic <= 11:
        raise ValueError(f"chromatic interval must be in [1, 11], got {chromatic}")
    shifts = [f for f in range(-SHIFT_WINDOW, SHIFT_WINDOW + 1) if chromatic_of(f) == chromatic]
    return sorted(shifts, key=lambda f: (abs(f), f < 0))


def _accidentals_after(piece: LabeledPiece, shift: int):
    """Accidental total after shifting, or None if any label leaves the valid range."""
    fifths = [t.fifth_index + shift for t in piece.tpcs]
    if fifths and (min(fifths) < MIN_FIFTH or max(fifths) > MAX_FIFTH):
        return None
    if any(abs(k.fifths + shift) > MAX_KS_FIFTHS for k in piece.kss):
        return None
    # alteration of a line-of-fifths position: floor((fifth + 1) / 7)
    return sum(abs((f + 1) // 7) for f in fifths)


def choose_transposition(piece: LabeledPiece, chromatic: int) -> TranspositionChoice:
    best = None
    for shift in candidate_shifts(chromatic):
        total = _accidentals_after(piece, shift)
        # candidates arrive in tie-break order, so strict < keeps the first
        if total is not None and (best is None or total < best.accidental_total):
            best = TranspositionChoice(chromatic, shift, total)
    if best is None:
        raise NoValidTransposition(
            f"piece {piece.id!r}: every spelling of +{chromatic} semitones overflows"
        )
    return best


def transpose_piece(piece: LabeledPiece, chromatic: int, shift: int) -> LabeledPiece:
    """Shift labels by ``shift`` fifths and pitches up by ``chromatic`` semitones.

    Pitches that would exceed 127 are taken an octave lower; only the pitch
    class matters to the model.
    """
    if chromatic_of(shift) != chromatic % 12:
        raise ValueError(f"fifth shift {shift} does not realise {chromatic} semitones")
    notes = []
    for n in piece.notes:
        p = n.pitch + chromatic
        if p > 127:
            p -= 12
        notes.append(Note(n.onset, n.duration, p))
    tpcs = [TonalPitchClass.from_fifth_index(t.fifth_index + shift) for t in piece.tpcs]
    kss = [KeySignature(k.fifths + shift) for k in piece.kss]
    # wrapping a pitch down an octave can reorder a chord
    return replace(piece, id=f"{piece.id}+{chromatic}", notes=notes, tpcs=tpcs, kss=kss).sorted()


def augment(piece: LabeledPiece) -> List[LabeledPiece]:
    """Up to 11 transposed variants of ``piece`` (the original is not included)."""
    variants = []
    for chromatic in range(1, 12):
        try:
            choice = choose_transposition(piece, chromatic)
        except NoValidTransposition:
            continue
        variants.append(transpose_piece(piece, chromatic, choice.fifth_shift))
    return variants


def augment_corpus(pieces: List[LabeledPiece]) -> List[LabeledPiece]:
    """Each original followed by its variants."""
    out = []
    for piece in pieces:
        out.append(piece)
        out.extend(augment(piece))
    return out
