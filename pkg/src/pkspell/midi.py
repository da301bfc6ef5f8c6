"""
Standard MIDI File (format 0 and 1) to note sequence.

Only what pitch spelling needs is decoded: note on/off pairs and the tempo
map. Times are accumulated as exact integers (ticks x microseconds per
quarter) and divided once at the end, so scaling every tempo by a constant
scales every onset and duration by exactly that constant.
"""

from __future__ import annotations

import logging
import struct
from collections import defaultdict, deque
from typing import List, Optional, Sequence, Tuple

from .corpus import Note, Piece
from .errors import MalformedFile

log = logging.getLogger(__name__)

DEFAULT_TEMPO = 500000  # microseconds per quarter note
PERCUSSION_CHANNEL = 9  # "channel 10" counting from one


def _read_varlen(data, pos):
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise MalformedFile("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MalformedFile("variable-length quantity longer than 4 bytes", pos)


def _chunks(data):
    pos = 0
    while pos < len(data):
        if pos + 8 > len(data):
            raise MalformedFile("truncated chunk header", pos)
        kind, length = struct.unpack(">4sI", data[pos : pos + 8])
        if pos + 8 + length > len(data):
            raise MalformedFile(f"chunk {kind!r} overruns end of file", pos)
        yield kind, pos + 8, data[pos + 8 : pos + 8 + length]
        pos += 8 + length


def _parse_track(chunk, base):
    """Yield (tick, kind, payload) with kind in {'on', 'off', 'tempo', 'end'}."""
    pos, tick, status = 0, 0, None
    n = len(chunk)
    while pos < n:
        delta, pos = _read_varlen(chunk, pos)
        tick += delta
        if pos >= n:
            raise MalformedFile("event missing after delta time", base + pos)
        byte = chunk[pos]
        if byte == 0xFF:
            if pos + 1 >= n:
                raise MalformedFile("truncated meta event", base + pos)
            meta = chunk[pos + 1]
            length, pos = _read_varlen(chunk, pos + 2)
            payload = chunk[pos : pos + length]
            if len(payload) < length:
                raise MalformedFile("truncated meta event", base + pos)
            pos += length
            if meta == 0x51:
                if length != 3:
                    raise MalformedFile("set-tempo event must carry 3 bytes", base + pos)
                yield tick, "tempo", int.from_bytes(payload, "big")
            elif meta == 0x2F:
                yield tick, "end", None
                return
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_varlen(chunk, pos + 1)
            pos += length
            status = None
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MalformedFile("running status without a previous status byte", base + pos)
        kind = status & 0xF0
        size = 1 if kind in (0xC0, 0xD0) else 2
        if pos + size > n:
            raise MalformedFile("truncated channel message", base + pos)
        args = chunk[pos : pos + size]
        pos += size
        channel = status & 0x0F
        if kind == 0x90 and args[1] > 0:
            yield tick, "on", (channel, args[0])
        elif kind == 0x80 or kind == 0x90:
            yield tick, "off", (channel, args[0])
    yield tick, "end", None


class _TempoMap:
    def __init__(self, changes):
        # changes: [(tick, tempo)] in file order; later entries at the same tick win
        self.ticks = [0]
        self.tempos = [DEFAULT_TEMPO]
        self.acc = [0]
        for tick, tempo in sorted(changes, key=lambda c: c[0]):
            if tick == self.ticks[-1]:
                self.tempos[-1] = tempo
                continue
            self.acc.append(self.acc[-1] + (tick - self.ticks[-1]) * self.tempos[-1])
            self.ticks.append(tick)
            self.tempos.append(tempo)

    def micros_x_division(self, tick):
        # bisect by hand keeps the exact-integer path obvious
        lo, hi = 0, len(self.ticks) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self.ticks[mid] <= tick:
                lo = mid
            else:
                hi = mid - 1
        return self.acc[lo] + (tick - self.ticks[lo]) * self.tempos[lo]


def read_midi(data: bytes, piece_id: str = "") -> Piece:
    """Decode an SMF into a :class:`Piece` sorted by onset, then pitch."""
    data = bytes(data)
    if data[:4] != b"MThd":
        raise MalformedFile("missing MThd header", 0)
    chunks = list(_chunks(data))
    if chunks[0][0] != b"MThd":
        raise MalformedFile("missing MThd header", 0)
    _, hpos, header = chunks[0]
    if len(header) < 6:
        raise MalformedFile("header chunk shorter than 6 bytes", hpos)
    fmt, ntracks, division = struct.unpack(">HHH", header[:6])
    if fmt not in (0, 1):
        raise MalformedFile(f"unsupported SMF format {fmt}", hpos)
    smpte = None
    if division & 0x8000:
        fps = 256 - (division >> 8)
        smpte = fps * (division & 0xFF)
        if smpte == 0:
            raise MalformedFile("invalid SMPTE division", hpos + 4)
    elif division == 0:
        raise MalformedFile("zero ticks per quarter note", hpos + 4)

    tracks = [(pos, c) for kind, pos, c in chunks[1:] if kind == b"MTrk"]
    if len(tracks) != ntracks:
        log.warning("header announces %d tracks, found %d", ntracks, len(tracks))

    tempo_changes = []
    raw = []  # (on_tick, off_tick, pitch, channel, track, seq)
    for track_no, (base, chunk) in enumerate(tracks):
        open_notes = defaultdict(deque)
        seq = 0
        end_tick = 0
        for tick, kind, payload in _parse_track(chunk, base):
            end_tick = tick
            if kind == "tempo":
                tempo_changes.append((tick, payload))
            elif kind == "on":
                open_notes[payload].append((tick, seq))
                seq += 1
            elif kind == "off":
                queue = open_notes.get(payload)
                if queue:
                    start, s = queue.popleft()
                    raw.append((start, tick, payload[1], payload[0], track_no, s))
        for (channel, pitch), queue in open_notes.items():
            for start, s in queue:
                log.warning("unterminated note %d on channel %d, closing at end of track", pitch, channel + 1)
                raw.append((start, end_tick, pitch, channel, track_no, s))

    # exact integer time numerators over a common denominator
    if smpte is not None:
        numerator, denominator = (lambda tick: tick), float(smpte)
    else:
        numerator = _TempoMap(tempo_changes).micros_x_division
        denominator = 1e6 * division

    raw = [r for r in raw if r[3] != PERCUSSION_CHANNEL]
    raw.sort(key=lambda r: (r[0], r[2], r[4], r[5]))
    notes = []
    for start, stop, pitch, _, _, _ in raw:
        a, b = numerator(start), numerator(stop)
        notes.append(Note(a / denominator, (b - a) / denominator, pitch))
    return Piece(id=piece_id, notes=notes)


# -- writing, used for fixtures and tests ---------------------------------


def _varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append((value & 0x7F) | 0x80)
        value >>= 7
    return bytes(reversed(out))


def _track(events):
    body = bytearray()
    last = 0
    for tick, raw in sorted(events, key=lambda e: e[0]):
        body += _varlen(tick - last) + raw
        last = tick
    body += _varlen(0) + b"\xff\x2f\x00"
    return b"MTrk" + struct.pack(">I", len(body)) + bytes(body)


def write_midi(
    notes: Sequence[Tuple[int, int, int]],
    division: int = 480,
    tempos: Optional[Sequence[Tuple[int, int]]] = None,
    channel: int = 0,
    fmt: int = 1,
) -> bytes:
    """Build a minimal SMF from ``(start_tick, end_tick, pitch)`` triples.

    Note-offs are emitted before note-ons at the same tick so repeated pitches
    pair up as written.
    """
    tempo_events = [
        (tick, b"\xff\x51\x03" + tempo.to_bytes(3, "big")) for tick, tempo in (tempos or [])
    ]
    note_events: List[Tuple[int, bytes]] = []
    for start, end, pitch in notes:
        note_events.append((end, bytes([0x80 | channel, pitch, 0])))
    for start, end, pitch in notes:
        note_events.append((start, bytes([0x90 | channel, pitch, 64])))
    # stable sort keeps every off ahead of any on at the same tick
    if fmt == 0:
        tracks = [_track(tempo_events + note_events)]
    else:
        tracks = [_track(tempo_events), _track(note_events)]
    header = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    return header + b"".join(tracks)
