"""Regenerate the files in this directory: ``python tests/fixtures/make_fixtures.py``.

The two conformance MIDI files are assembled byte by byte so they do not
depend on the library's own writer.
"""

import struct
import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE.parent))

from helpers import random_piece  # noqa: E402

from pkspell.corpus import dumps_corpus, write_predictions  # noqa: E402
from pkspell.midi import write_midi  # noqa: E402
from pkspell.tonal import TonalPitchClass  # noqa: E402


def chunk(kind, body):
    return kind + struct.pack(">I", len(body)) + bytes(body)


def tempo(us):
    return [0xFF, 0x51, 0x03, (us >> 16) & 0xFF, (us >> 8) & 0xFF, us & 0xFF]


END = [0x00, 0xFF, 0x2F, 0x00]


def tempo_chords(scale=1):
    """Format 1, 480 ticks/quarter; tempo halves (faster) at tick 960.

    expected (onset s, pitch): (0, 60) (0.5, 60) (0.5, 64) (0.5, 67)
    (0.75, 72) (1.0, 62) (1.125, 65), times multiplied by ``scale``
    """
    conductor = [0x00] + tempo(500000 * scale) + [0x87, 0x40] + tempo(250000 * scale) + END
    notes = [
        0x00, 0x90, 60, 80,
        0x83, 0x60, 0x80, 60, 0,  # +480
        0x00, 0x90, 64, 80,
        0x00, 0x90, 60, 80,
        0x00, 0x90, 67, 80,
        0x81, 0x70, 0x90, 72, 80,  # +240 -> 720
        0x81, 0x70, 0x80, 64, 0,  # +240 -> 960
        0x00, 0x80, 60, 0,
        0x00, 0x80, 67, 0,
        0x00, 0x90, 62, 80,
        0x81, 0x70, 0x80, 72, 0,  # 1200
        0x00, 0x90, 65, 80,
        0x81, 0x70, 0x80, 62, 0,  # 1440
        0x83, 0x60, 0x80, 65, 0,  # 1920
    ] + END
    header = chunk(b"MThd", struct.pack(">HHH", 1, 2, 480))
    return header + chunk(b"MTrk", conductor) + chunk(b"MTrk", notes)


def format0_running_status(scale=1):
    """Format 0, 96 ticks/quarter, running status, velocity-0 note-offs,
    percussion, a tempo change at tick 96 and a note left open at the end.

    expected (onset s, duration s, pitch): (0, 0.6, 60) (0, 0.6, 64)
    (0.6, 1.2, 67) (1.8, 0.6, 71), times multiplied by ``scale``
    """
    body = (
        [0x00] + tempo(600000 * scale)
        + [0x00, 0x90, 60, 64, 0x00, 64, 64]  # running status second note-on
        + [0x00, 0x99, 36, 100]  # percussion channel
        + [0x30, 0x89, 36, 0]  # +48
        + [0x30, 0x90, 60, 0, 0x00, 64, 0]  # +48 -> 96, velocity-0 offs
        + [0x00] + tempo(1200000 * scale)
        + [0x00, 0x90, 67, 64]
        + [0x60, 0x80, 67, 64]  # 192
        + [0x00, 0x90, 71, 64]  # never released
        + [0x30, 0xFF, 0x2F, 0x00]  # end of track at 240
    )
    header = chunk(b"MThd", struct.pack(">HHH", 0, 1, 96))
    return header + chunk(b"MTrk", body)


def melody(scale=1, seed=7):
    rng = np.random.default_rng(seed)
    piece = random_piece(rng, 60, ks=-2)
    notes = [(int(n.onset * 480), int((n.onset + n.duration) * 480), n.pitch) for n in piece.notes]
    return write_midi(notes, 480, tempos=[(0, 450000 * scale), (960 * 4, 700000 * scale)])


def corpora():
    rng = np.random.default_rng(2024)
    small = []
    for i in range(8):
        composer = "Alpha" if i % 2 else "Beta"
        small.append(random_piece(rng, int(rng.integers(30, 50)), pid=f"piece{i:02d}",
                                  attributes={"composer": composer}))
    (HERE / "corpus_small.jsonl").write_text(dumps_corpus(small), encoding="utf-8")

    # 1000 notes: Alpha 600 (3 pieces), Beta 400 (2 pieces); one planted error
    planted = []
    for i, n in enumerate([200, 200, 200, 250, 150]):
        composer = "Alpha" if i < 3 else "Beta"
        planted.append(random_piece(rng, n, pid=f"planted{i}", attributes={"composer": composer}))
    (HERE / "planted_corpus.jsonl").write_text(dumps_corpus(planted), encoding="utf-8")
    out = b""
    for i, piece in enumerate(planted):
        tpcs = list(piece.tpcs)
        if i == 1:
            # enharmonic respelling: same pitch-class, wrong name
            f = tpcs[17].fifth_index
            tpcs[17] = TonalPitchClass.from_fifth_index(f + 12 if f + 12 <= 19 else f - 12)
        out += write_predictions(piece, tpcs, piece.kss, piece.kss[0])
    (HERE / "planted_predictions.jsonl").write_bytes(out)


def main():
    (HERE / "tempo_chords.mid").write_bytes(tempo_chords())
    (HERE / "tempo_chords_x2.mid").write_bytes(tempo_chords(2))
    (HERE / "format0_running_status.mid").write_bytes(format0_running_status())
    (HERE / "format0_running_status_x2.mid").write_bytes(format0_running_status(2))
    (HERE / "melody.mid").write_bytes(melody())
    (HERE / "melody_x2.mid").write_bytes(melody(2))
    corpora()


if __name__ == "__main__":
    main()
