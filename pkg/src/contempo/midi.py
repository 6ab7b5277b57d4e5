"""Standard MIDI File reader/writer for rendered performances.

The writer emits format 1 at 480 ticks per quarter with a fixed tempo of
500000 us per quarter (120 BPM), so one second is exactly 960 ticks:
track 0 carries the tempo meta, track 1 the note events. The reader
accepts format 0 and 1, running status, and note-on velocity 0 as note-off;
it uses the first tempo meta it sees (default 500000).
"""

import struct
from dataclasses import dataclass

PPQ = 480
TEMPO_US = 500000
TICKS_PER_SECOND = PPQ * 1_000_000 // TEMPO_US  # 960


class MidiError(ValueError):
    """Corrupt or unsupported SMF input; message includes the byte offset."""


def _varlen(value: int) -> bytes:
    if value < 0:
        raise ValueError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def seconds_to_ticks(seconds: float) -> int:
    return int(round(seconds * TICKS_PER_SECOND))


def write_midi(performance) -> bytes:
    """Serialize a Performance to SMF bytes (deterministic)."""
    events = []  # (tick, order, status, data1, data2)
    for note in performance.notes:
        on = seconds_to_ticks(note.onset_sec)
        off = max(on + 1, seconds_to_ticks(note.onset_sec + note.duration_sec))
        events.append((on, 1, 0x90, note.pitch, note.velocity))
        events.append((off, 0, 0x80, note.pitch, 0))
    events.sort(key=lambda e: (e[0], e[1], e[3]))

    track = bytearray()
    tick = 0
    for when, _, status, d1, d2 in events:
        track += _varlen(when - tick)
        track += bytes((status, d1, d2))
        tick = when
    track += b"\x00\xff\x2f\x00"

    tempo_track = b"\x00\xff\x51\x03" + TEMPO_US.to_bytes(3, "big") + b"\x00\xff\x2f\x00"

    out = bytearray()
    out += b"MThd" + struct.pack(">IHHH", 6, 1, 2, PPQ)
    out += b"MTrk" + struct.pack(">I", len(tempo_track)) + tempo_track
    out += b"MTrk" + struct.pack(">I", len(track)) + track
    return bytes(out)


@dataclass
class _Reader:
    data: bytes
    pos: int = 0

    def need(self, n: int):
        if self.pos + n > len(self.data):
            raise MidiError(f"truncated file at byte {self.pos}")

    def bytes(self, n: int) -> bytes:
        self.need(n)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.bytes(1)[0]

    def u16(self) -> int:
        return struct.unpack(">H", self.bytes(2))[0]

    def u32(self) -> int:
        return struct.unpack(">I", self.bytes(4))[0]

    def varlen(self) -> int:
        value = 0
        for _ in range(4):
            byte = self.u8()
            value = (value << 7) | (byte & 0x7F)
            if not byte & 0x80:
                return value
        raise MidiError(f"unterminated variable-length value at byte {self.pos}")


_CHANNEL_DATA_LEN = {0x80: 2, 0x90: 2, 0xA0: 2, 0xB0: 2, 0xC0: 1, 0xD0: 1, 0xE0: 2}


def read_midi(data: bytes):
    """Parse SMF bytes into a Performance.

    Note-ons pair with the oldest open note-off of the same channel and
    pitch, so equal-pitch notes that overlap in time (which the byte format
    cannot disambiguate) may trade durations; everything else round-trips.
    Raises :class:`MidiError` with the byte offset on corrupt headers or
    chunk lengths.
    """
    from .perf import PerformedNote, Performance

    r = _Reader(bytes(data))
    if r.bytes(4) != b"MThd":
        raise MidiError("missing MThd magic at byte 0")
    header_len = r.u32()
    if header_len < 6:
        raise MidiError(f"header chunk too short at byte {r.pos - 4}")
    fmt = r.u16()
    ntrks = r.u16()
    division = r.u16()
    r.bytes(header_len - 6)
    if fmt not in (0, 1):
        raise MidiError(f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise MidiError("SMPTE time division is not supported")
    if division == 0:
        raise MidiError("zero time division")

    tempo = None
    raw_events = []  # (tick, status, d1, d2)
    for _ in range(ntrks):
        if r.bytes(4) != b"MTrk":
            raise MidiError(f"missing MTrk magic at byte {r.pos - 4}")
        length = r.u32()
        end = r.pos + length
        if end > len(r.data):
            raise MidiError(f"track length overruns file at byte {r.pos - 4}")
        tick = 0
        running = None
        while r.pos < end:
            tick += r.varlen()
            status = r.u8()
            if status < 0x80:
                if running is None:
                    raise MidiError(f"data byte without running status at byte {r.pos - 1}")
                r.pos -= 1
                status = running
            if status == 0xFF:
                meta = r.u8()
                mlen = r.varlen()
                payload = r.bytes(mlen)
                if meta == 0x51 and tempo is None and mlen == 3:
                    tempo = int.from_bytes(payload, "big")
            elif status in (0xF0, 0xF7):
                r.bytes(r.varlen())
                running = None
            else:
                kind = status & 0xF0
                if kind not in _CHANNEL_DATA_LEN:
                    raise MidiError(f"unexpected status byte 0x{status:02x} at byte {r.pos - 1}")
                payload = r.bytes(_CHANNEL_DATA_LEN[kind])
                running = status
                if kind in (0x80, 0x90):
                    raw_events.append((tick, status, payload[0], payload[1]))
        if r.pos != end:
            raise MidiError(f"track events overran chunk at byte {r.pos}")

    tempo = tempo or TEMPO_US
    seconds_per_tick = tempo / (division * 1_000_000)

    open_notes: dict[tuple[int, int], list[tuple[int, int]]] = {}
    closed = []  # (on_tick, off_tick, pitch, velocity)
    raw_events.sort(key=lambda e: e[0])
    last_tick = 0
    for tick, status, pitch, velocity in raw_events:
        last_tick = max(last_tick, tick)
        channel = status & 0x0F
        is_on = (status & 0xF0) == 0x90 and velocity > 0
        key = (channel, pitch)
        if is_on:
            open_notes.setdefault(key, []).append((tick, velocity))
        else:
            pending = open_notes.get(key)
            if pending:
                on_tick, vel = pending.pop(0)
                closed.append((on_tick, max(tick, on_tick + 1), pitch, vel))
    for (channel, pitch), pending in open_notes.items():
        for on_tick, vel in pending:
            closed.append((on_tick, max(last_tick, on_tick + 1), pitch, vel))

    if not closed:
        raise MidiError("file contains no notes")
    notes = [
        PerformedNote(
            pitch=pitch,
            onset_sec=on * seconds_per_tick,
            duration_sec=(off - on) * seconds_per_tick,
            velocity=vel,
        )
        for on, off, pitch, vel in closed
    ]
    return Performance(tuple(notes))
