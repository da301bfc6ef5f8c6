"""
Note sequences and the two line-delimited JSON formats.

Corpus (training / evaluation data), one piece per line::

    {"id": "bach-01", "composer": "Bach", "notes": [
        {"onset": 0.0, "duration": 0.5, "pitch": 61, "tpc": "C#", "ks": 7}, ...]}

Any top-level key other than ``id`` and ``notes`` is a free-text piece
attribute (used e.g. for grouping evaluation results by composer).

Predictions, one piece per line, keys always in this order::

    {"id": "...", "notes": [{"onset": 0.0, "pitch": 61, "tpc": "C#", "ks": 7}],
     "global_ks": 7}

``global_ks`` is omitted for a piece without notes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

from .errors import ConsistencyError, LengthMismatch, SchemaError
from .tonal import KeySignature, TonalPitchClass, pitch_class_of, spelled_name

log = logging.getLogger(__name__)

_NOTE_KEYS = ("onset", "duration", "pitch", "tpc", "ks")


@dataclass(frozen=True)
class Note:
    onset: float
    duration: float
    pitch: int

    @property
    def pitch_class(self) -> int:
        return self.pitch % 12


def _order(notes: Sequence[Note]) -> List[int]:
    return sorted(range(len(notes)), key=lambda i: (notes[i].onset, notes[i].pitch))


@dataclass
class Piece:
    id: str
    notes: List[Note]
    attributes: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.notes)

    def sorted(self) -> Piece:
        """Onset order, simultaneous notes from low to high (stable otherwise)."""
        return replace(self, notes=[self.notes[i] for i in _order(self.notes)])


@dataclass
class LabeledPiece(Piece):
    tpcs: List[TonalPitchClass] = field(default_factory=list)
    kss: List[KeySignature] = field(default_factory=list)

    def sorted(self) -> LabeledPiece:
        idx = _order(self.notes)
        return replace(
            self,
            notes=[self.notes[i] for i in idx],
            tpcs=[self.tpcs[i] for i in idx],
            kss=[self.kss[i] for i in idx],
        )

    def validate(self) -> None:
        if not len(self.tpcs) == len(self.kss) == len(self.notes):
            raise ConsistencyError(
                f"piece {self.id!r}: {len(self.notes)} notes but "
                f"{len(self.tpcs)} tpc and {len(self.kss)} ks labels"
            )
        for i, (note, tpc) in enumerate(zip(self.notes, self.tpcs)):
            if pitch_class_of(tpc) != note.pitch_class:
                raise ConsistencyError(
                    f"piece {self.id!r}, note {i}: {spelled_name(tpc)} does not "
                    f"spell pitch {note.pitch}"
                )


def _require(cond, message, line):
    if not cond:
        raise SchemaError(message, line)


def _parse_note(rec, lineno):
    _require(isinstance(rec, dict), "note must be an object", lineno)
    missing = [k for k in _NOTE_KEYS if k not in rec]
    _require(not missing, f"note missing {missing}", lineno)
    onset, duration, pitch, tpc, ks = (rec[k] for k in _NOTE_KEYS)
    for name, val in (("onset", onset), ("duration", duration)):
        _require(isinstance(val, (int, float)) and not isinstance(val, bool),
                 f"{name} must be a number", lineno)
    _require(onset >= 0, "onset must be >= 0", lineno)
    _require(duration >= 0, "duration must be >= 0", lineno)
    _require(isinstance(pitch, int) and 0 <= pitch <= 127, "pitch must be an int in [0, 127]", lineno)
    _require(isinstance(ks, int) and -7 <= ks <= 7, "ks must be an int in [-7, 7]", lineno)
    try:
        tpc = TonalPitchClass.parse(tpc)
    except (ValueError, TypeError):
        raise SchemaError(f"bad tpc {tpc!r}", lineno) from None
    return Note(float(onset), float(duration), pitch), tpc, KeySignature(ks)


def parse_corpus_line(line: str, lineno: Optional[int] = None) -> LabeledPiece:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", lineno) from None
    _require(isinstance(rec, dict), "piece must be an object", lineno)
    _require(isinstance(rec.get("id"), str), "piece needs a string id", lineno)
    _require(isinstance(rec.get("notes"), list), "piece needs a notes array", lineno)
    attrs = {k: v for k, v in rec.items() if k not in ("id", "notes")}
    _require(all(isinstance(v, str) for v in attrs.values()),
             "piece attributes must be strings", lineno)
    parsed = [_parse_note(n, lineno) for n in rec["notes"]]
    piece = LabeledPiece(
        id=rec["id"],
        notes=[p[0] for p in parsed],
        attributes=attrs,
        tpcs=[p[1] for p in parsed],
        kss=[p[2] for p in parsed],
    )
    piece.validate()
    return piece.sorted()


def loads_corpus(text: str) -> List[LabeledPiece]:
    pieces = [parse_corpus_line(line, i) for i, line in enumerate(text.splitlines(), 1) if line.strip()]
    if not pieces:
        log.warning("corpus is empty")
    return pieces


def read_corpus(path) -> List[LabeledPiece]:
    return loads_corpus(Path(path).read_text(encoding="utf-8"))


def dumps_piece(piece: LabeledPiece) -> str:
    rec = {"id": piece.id}
    rec.update(sorted(piece.attributes.items()))
    rec["notes"] = [
        {"onset": n.onset, "duration": n.duration, "pitch": n.pitch,
         "tpc": spelled_name(t), "ks": k.fifths}
        for n, t, k in zip(piece.notes, piece.tpcs, piece.kss)
    ]
    return json.dumps(rec, ensure_ascii=False)


def dumps_corpus(pieces: Iterable[LabeledPiece]) -> str:
    return "".join(dumps_piece(p) + "\n" for p in pieces)


def write_corpus(pieces: Iterable[LabeledPiece], path) -> None:
    Path(path).write_text(dumps_corpus(pieces), encoding="utf-8")


@dataclass(frozen=True)
class PredictedNote:
    onset: float
    pitch: int
    tpc: TonalPitchClass
    ks: KeySignature


@dataclass
class Prediction:
    id: str
    notes: List[PredictedNote]
    global_ks: Optional[KeySignature] = None


def write_predictions(piece: Piece, tpcs, kss, global_ks=None) -> bytes:
    """Serialize predictions for one piece as a single UTF-8 JSON line."""
    if not len(tpcs) == len(kss) == len(piece.notes):
        raise LengthMismatch(
            f"{len(piece.notes)} notes, {len(tpcs)} tpcs, {len(kss)} key signatures"
        )
    rec = {
        "id": piece.id,
        "notes": [
            {"onset": n.onset, "pitch": n.pitch, "tpc": spelled_name(t), "ks": k.fifths}
            for n, t, k in zip(piece.notes, tpcs, kss)
        ],
    }
    if piece.notes and global_ks is not None:
        rec["global_ks"] = global_ks.fifths
    return (json.dumps(rec, ensure_ascii=False) + "\n").encode("utf-8")


def read_predictions(data) -> List[Prediction]:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    out = []
    for lineno, line in enumerate(data.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            notes = [
                PredictedNote(float(n["onset"]), int(n["pitch"]),
                              TonalPitchClass.parse(n["tpc"]), KeySignature(int(n["ks"])))
                for n in rec["notes"]
            ]
            gks = KeySignature(int(rec["global_ks"])) if "global_ks" in rec else None
            out.append(Prediction(str(rec["id"]), notes, gks))
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"bad prediction record: {e}", lineno) from None
    return out
