"""Error counts per group of pieces, in the style of per-composer tables."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .corpus import LabeledPiece
from .errors import EmptyCorpus, EmptyInput, LengthMismatch
from .model import predict
from .tonal import KeySignature

ALL_GROUP = "all"
MISSING_GROUP = "(none)"


def global_key_signature(kss: Sequence[KeySignature], weights: Optional[Sequence[float]] = None) -> KeySignature:
    """Majority vote; ties go to fewer accidentals, then to the flat side."""
    if not kss:
        raise EmptyInput("no key signatures to aggregate")
    votes = Counter()
    for i, ks in enumerate(kss):
        votes[ks.fifths] += 1.0 if weights is None else float(weights[i])
    fifths = min(votes, key=lambda f: (-votes[f], abs(f), f))
    return KeySignature(fifths)


@dataclass
class GroupStats:
    pieces: int = 0
    notes: int = 0
    tpc_errors: int = 0
    ks_errors: int = 0
    global_ks_correct: int = 0

    def add(self, other: GroupStats) -> None:
        self.pieces += other.pieces
        self.notes += other.notes
        self.tpc_errors += other.tpc_errors
        self.ks_errors += other.ks_errors
        self.global_ks_correct += other.global_ks_correct

    @property
    def tpc_error_rate(self) -> float:
        return self.tpc_errors / self.notes if self.notes else 0.0

    @property
    def tpc_accuracy(self) -> float:
        return 1.0 - self.tpc_error_rate

    @property
    def ks_accuracy(self) -> float:
        return 1.0 - self.ks_errors / self.notes if self.notes else 0.0

    @property
    def global_ks_accuracy(self) -> float:
        return self.global_ks_correct / self.pieces if self.pieces else 0.0


TSV_COLUMNS = (
    "group", "pieces", "notes", "tpc_errors", "tpc_error_rate",
    "ks_errors", "ks_accuracy", "global_ks_accuracy",
)


@dataclass
class EvalReport:
    groups: Dict[str, GroupStats] = field(default_factory=dict)

    @property
    def total(self) -> GroupStats:
        out = GroupStats()
        for g in self.groups.values():
            out.add(g)
        return out

    def rows(self) -> List[Tuple]:
        out = []
        for name, g in sorted(self.groups.items()) + [("total", self.total)]:
            out.append((name, g.pieces, g.notes, g.tpc_errors, g.tpc_error_rate,
                        g.ks_errors, g.ks_accuracy, g.global_ks_accuracy))
        return out

    def to_tsv(self) -> str:
        lines = ["\t".join(TSV_COLUMNS)]
        for row in self.rows():
            name, pieces, notes, te, ter, ke, ka, ga = row
            lines.append(f"{name}\t{pieces}\t{notes}\t{te}\t{ter:.4%}\t{ke}\t{ka:.4%}\t{ga:.4%}")
        return "\n".join(lines) + "\n"


def score(corpus: Sequence[LabeledPiece], predictions, group_by: Optional[str] = None,
          weighted_global: bool = False) -> EvalReport:
    """Compare ``predictions`` (one ``(tpcs, kss)`` pair per piece) with the labels."""
    if not corpus:
        raise EmptyCorpus("nothing to evaluate")
    if len(predictions) != len(corpus):
        raise LengthMismatch(f"{len(corpus)} pieces but {len(predictions)} predictions")
    report = EvalReport()
    for piece, (tpcs, kss) in zip(corpus, predictions):
        if not len(tpcs) == len(kss) == len(piece.notes):
            raise LengthMismatch(f"piece {piece.id!r}: prediction length differs from note count")
        group = ALL_GROUP if group_by is None else piece.attributes.get(group_by, MISSING_GROUP)
        stats = report.groups.setdefault(group, GroupStats())
        stats.pieces += 1
        stats.notes += len(piece.notes)
        stats.tpc_errors += sum(p != t for p, t in zip(tpcs, piece.tpcs))
        stats.ks_errors += sum(p != t for p, t in zip(kss, piece.kss))
        if piece.notes:
            w = [n.duration for n in piece.notes] if weighted_global else None
            stats.global_ks_correct += int(global_key_signature(kss, w) == global_key_signature(piece.kss, w))
    return report


def evaluate(corpus: Sequence[LabeledPiece], model, group_by: Optional[str] = None,
             constrained: bool = False, weighted_global: bool = False) -> EvalReport:
    if not corpus:
        raise EmptyCorpus("nothing to evaluate")
    predictions = [predict(p, model, constrained=constrained) if p.notes else ([], [])
                   for p in corpus]
    return score(corpus, predictions, group_by, weighted_global)
