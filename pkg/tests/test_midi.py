import struct

import pytest

from pkspell.errors import MalformedFile
from pkspell.midi import read_midi, write_midi


def read(fixtures_dir, name):
    return read_midi((fixtures_dir / name).read_bytes())


def test_tempo_change_and_chords(fixtures_dir):
    piece = read(fixtures_dir, "tempo_chords.mid")
    assert [(n.onset, n.pitch) for n in piece.notes] == [
        (0.0, 60), (0.5, 60), (0.5, 64), (0.5, 67), (0.75, 72), (1.0, 62), (1.125, 65),
    ]
    # 72 straddles the tempo change: 240 ticks at 0.5 s/q plus 240 ticks at 0.25 s/q
    assert [n.duration for n in piece.notes] == [0.5, 0.5, 0.5, 0.5, 0.375, 0.25, 0.375]
    assert piece.notes[0].pitch_class == 0


def test_format0_running_status_percussion_unterminated(fixtures_dir, caplog):
    piece = read(fixtures_dir, "format0_running_status.mid")
    assert [(n.onset, n.duration, n.pitch) for n in piece.notes] == [
        (0.0, 0.6, 60), (0.0, 0.6, 64), (0.6, 1.2, 67), (1.8, 0.6, 71),
    ]
    assert "unterminated" in caplog.text


def test_default_tempo_half_second_per_beat():
    data = write_midi([(0, 480, 60), (480, 960, 62)], division=480)
    piece = read_midi(data)
    assert [n.onset for n in piece.notes] == [0.0, 0.5]
    assert [n.duration for n in piece.notes] == [0.5, 0.5]


def test_simultaneous_notes_low_to_high():
    data = write_midi([(0, 100, 64), (0, 100, 60)], division=96, fmt=0)
    assert [n.pitch for n in read_midi(data).notes] == [60, 64]


def test_overlapping_same_pitch_first_in_first_matched():
    # two note-ons for 60 before any note-off
    track = bytes([0x00, 0x90, 60, 64, 0x10, 0x90, 60, 64, 0x10, 0x80, 60, 0, 0x10, 0x80, 60, 0,
                   0x00, 0xFF, 0x2F, 0x00])
    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 16) + b"MTrk" + struct.pack(">I", len(track)) + track
    piece = read_midi(data)
    # tempo 0.5 s per 16 ticks
    assert [(n.onset, n.duration) for n in piece.notes] == [(0.0, 1.0), (0.5, 1.0)]


def test_duplicate_notes_from_two_tracks_kept():
    t1 = bytes([0x00, 0x90, 60, 64, 0x60, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00])
    t2 = bytes([0x00, 0x91, 60, 64, 0x60, 0x81, 60, 0, 0x00, 0xFF, 0x2F, 0x00])
    data = b"MThd" + struct.pack(">IHHH", 6, 1, 2, 96)
    for t in (t1, t2):
        data += b"MTrk" + struct.pack(">I", len(t)) + t
    assert [n.pitch for n in read_midi(data).notes] == [60, 60]


def test_write_read_round_trip_with_tempo_map():
    notes = [(0, 480, 60), (480, 1440, 67), (960, 1200, 64)]
    data = write_midi(notes, division=480, tempos=[(0, 400000), (960, 800000)])
    piece = read_midi(data)
    assert [(n.onset, n.duration, n.pitch) for n in piece.notes] == [
        (0.0, 0.4, 60), (0.4, 1.2, 67), (0.8, 0.4, 64),
    ]


@pytest.mark.parametrize(
    "data, offset",
    [
        (b"RIFF" + b"\x00" * 10, 0),
        (b"MThd" + struct.pack(">IHHH", 6, 2, 1, 96), 8),
        (b"MThd" + struct.pack(">IHHH", 6, 0, 1, 0), 12),
        (b"MThd" + struct.pack(">I", 20) + b"\x00" * 6, 0),
    ],
)
def test_malformed_headers(data, offset):
    with pytest.raises(MalformedFile) as err:
        read_midi(data)
    assert err.value.offset == offset
    assert "byte" in str(err.value)


def test_malformed_track_reports_offset():
    track = bytes([0x00, 0x3C, 0x40])  # data byte with no running status
    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 96) + b"MTrk" + struct.pack(">I", len(track)) + track
    with pytest.raises(MalformedFile) as err:
        read_midi(data)
    assert err.value.offset == 14 + 8 + 1


def test_truncated_message():
    track = bytes([0x00, 0x90, 0x3C])
    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, 96) + b"MTrk" + struct.pack(">I", len(track)) + track
    with pytest.raises(MalformedFile):
        read_midi(data)


def test_smpte_division():
    # 25 fps x 40 subframes = 1000 ticks per second
    division = ((256 - 25) << 8) | 40
    track = bytes([0x00, 0x90, 60, 64, 0x83, 0x74, 0x80, 60, 0, 0x00, 0xFF, 0x2F, 0x00])
    data = b"MThd" + struct.pack(">IHHH", 6, 0, 1, division) + b"MTrk" + struct.pack(">I", len(track)) + track
    [note] = read_midi(data).notes
    assert note.duration == 0.5
