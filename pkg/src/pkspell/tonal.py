"""
Tonal arithmetic on the line of fifths.

A tonal-pitch-class (tpc) is a letter plus an alteration in [-2, 2]. Placed on
the line of fifths (F=-1, C=0, G=1, ...), every sharp adds 7 and every flat
subtracts 7, so the 35 representable spellings occupy indices -15 (Fbb) to
19 (B##). Transposition is integer addition on that line, and so is
transposition of key signatures, which are stored as a signed count of fifths.

Class indices used by the model are the line-of-fifths position shifted to
start at zero: tpc index = fifth_index + 15, key signature index = fifths + 7.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

from .errors import OutOfRange

LETTERS = "FCGDAEB"
NATURAL_SEMITONES = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
ACCIDENTALS = {-2: "bb", -1: "b", 0: "", 1: "#", 2: "##"}
_ACCIDENTAL_ALTER = {v: k for k, v in ACCIDENTALS.items()}

MIN_FIFTH, MAX_FIFTH = -15, 19
MAX_KS_FIFTHS = 7
N_TPC = MAX_FIFTH - MIN_FIFTH + 1
N_KS = 2 * MAX_KS_FIFTHS + 1
N_PC = 12


@dataclass(frozen=True, order=True)
class TonalPitchClass:
    letter: str
    alter: int = 0

    def __post_init__(self):
        if self.letter not in NATURAL_SEMITONES:
            raise ValueError(f"invalid letter {self.letter!r}")
        if self.alter not in ACCIDENTALS:
            raise OutOfRange(f"alteration {self.alter} not representable")

    @property
    def fifth_index(self) -> int:
        return LETTERS.index(self.letter) - 1 + 7 * self.alter

    @property
    def index(self) -> int:
        """Class index in [0, 35), ordered along the line of fifths."""
        return self.fifth_index - MIN_FIFTH

    @classmethod
    def from_fifth_index(cls, fifth_index: int) -> TonalPitchClass:
        if not MIN_FIFTH <= fifth_index <= MAX_FIFTH:
            raise OutOfRange(f"fifth index {fifth_index} outside [{MIN_FIFTH}, {MAX_FIFTH}]")
        alter, pos = divmod(fifth_index + 1, 7)
        return cls(LETTERS[pos], alter)

    @classmethod
    def from_index(cls, index: int) -> TonalPitchClass:
        return cls.from_fifth_index(index + MIN_FIFTH)

    @classmethod
    def parse(cls, name: str) -> TonalPitchClass:
        """Inverse of :func:`spelled_name`, e.g. ``"F##"`` or ``"Db"``."""
        if not name or name[0] not in NATURAL_SEMITONES or name[1:] not in _ACCIDENTAL_ALTER:
            raise ValueError(f"cannot parse tonal pitch class {name!r}")
        return cls(name[0], _ACCIDENTAL_ALTER[name[1:]])

    def __str__(self):
        return spelled_name(self)


@dataclass(frozen=True, order=True)
class KeySignature:
    """Signed number of accidentals: negative for flats, positive for sharps."""

    fifths: int = 0

    def __post_init__(self):
        if not -MAX_KS_FIFTHS <= self.fifths <= MAX_KS_FIFTHS:
            raise OutOfRange(f"key signature {self.fifths} outside [-7, 7]")

    @property
    def index(self) -> int:
        return self.fifths + MAX_KS_FIFTHS

    @classmethod
    def from_index(cls, index: int) -> KeySignature:
        return cls(index - MAX_KS_FIFTHS)


ALL_TPCS: List[TonalPitchClass] = [TonalPitchClass.from_index(i) for i in range(N_TPC)]
ALL_KEY_SIGNATURES: List[KeySignature] = [KeySignature.from_index(i) for i in range(N_KS)]


def pitch_class_of(tpc: TonalPitchClass) -> int:
    return (NATURAL_SEMITONES[tpc.letter] + tpc.alter) % 12


def enharmonics_of(pc: int) -> set:
    """All spellings among the 35 whose pitch-class is ``pc``."""
    if not 0 <= pc < 12:
        raise ValueError(f"pitch class {pc} outside [0, 11]")
    return {t for t in ALL_TPCS if pitch_class_of(t) == pc}


def chromatic_of(shift: int) -> int:
    """Semitones (mod 12) covered by moving ``shift`` steps along the line of fifths."""
    return (7 * shift) % 12


def transpose_tpc(tpc: TonalPitchClass, shift: int) -> TonalPitchClass:
    return TonalPitchClass.from_fifth_index(tpc.fifth_index + shift)


def transpose_ks(ks: KeySignature, shift: int) -> KeySignature:
    return KeySignature(ks.fifths + shift)


def accidental_cost(tpc: TonalPitchClass) -> int:
    return abs(tpc.alter)


def spelled_name(tpc: TonalPitchClass) -> str:
    return tpc.letter + ACCIDENTALS[tpc.alter]


def parse_tpc(name: str) -> TonalPitchClass:
    return TonalPitchClass.parse(name)
