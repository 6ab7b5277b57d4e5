/** Minimal Standard MIDI File reader, enough for playback of the files the
 * rendering service emits (format 0/1, note on/off, first tempo meta,
 * running status). */

export interface MidiNote {
    pitch: number;
    velocity: number;
    onsetTicks: number;
    durationTicks: number;
    onsetSec: number;
    durationSec: number;
}

export interface MidiFile {
    division: number;
    tempoUsPerQuarter: number;
    notes: MidiNote[];
}

class Reader {
    pos = 0;
    constructor(private data: Uint8Array) {}

    need(n: number): void {
        if (this.pos + n > this.data.length) {
            throw new Error(`truncated MIDI file at byte ${this.pos}`);
        }
    }

    u8(): number {
        this.need(1);
        return this.data[this.pos++];
    }

    u16(): number {
        return (this.u8() << 8) | this.u8();
    }

    u32(): number {
        return this.u16() * 0x10000 + this.u16();
    }

    bytes(n: number): Uint8Array {
        this.need(n);
        const out = this.data.subarray(this.pos, this.pos + n);
        this.pos += n;
        return out;
    }

    varlen(): number {
        let value = 0;
        for (let i = 0; i < 4; i++) {
            const b = this.u8();
            value = (value << 7) | (b & 0x7f);
            if ((b & 0x80) === 0) return value;
        }
        throw new Error(`unterminated variable-length value at byte ${this.pos}`);
    }

    ascii(n: number): string {
        return String.fromCharCode(...this.bytes(n));
    }
}

const CHANNEL_DATA_LEN: Record<number, number> = {
    0x80: 2, 0x90: 2, 0xa0: 2, 0xb0: 2, 0xc0: 1, 0xd0: 1, 0xe0: 2,
};

export function parseMidi(data: Uint8Array): MidiFile {
    const r = new Reader(data);
    if (r.ascii(4) !== "MThd") throw new Error("missing MThd magic");
    const headerLen = r.u32();
    const format = r.u16();
    const ntrks = r.u16();
    const division = r.u16();
    r.bytes(headerLen - 6);
    if (format !== 0 && format !== 1) throw new Error(`unsupported SMF format ${format}`);
    if (division & 0x8000) throw new Error("SMPTE division unsupported");

    let tempo: number | null = null;
    const events: { tick: number; on: boolean; pitch: number; velocity: number; channel: number }[] = [];

    for (let track = 0; track < ntrks; track++) {
        if (r.ascii(4) !== "MTrk") throw new Error(`missing MTrk magic at byte ${r.pos - 4}`);
        const length = r.u32();
        const end = r.pos + length;
        let tick = 0;
        let running: number | null = null;
        while (r.pos < end) {
            tick += r.varlen();
            let status = r.u8();
            if (status < 0x80) {
                if (running === null) throw new Error(`dangling data byte at ${r.pos - 1}`);
                r.pos -= 1;
                status = running;
            }
            if (status === 0xff) {
                const meta = r.u8();
                const len = r.varlen();
                const payload = r.bytes(len);
                if (meta === 0x51 && len === 3 && tempo === null) {
                    tempo = (payload[0] << 16) | (payload[1] << 8) | payload[2];
                }
            } else if (status === 0xf0 || status === 0xf7) {
                r.bytes(r.varlen());
                running = null;
            } else {
                const kind = status & 0xf0;
                const dataLen = CHANNEL_DATA_LEN[kind];
                if (dataLen === undefined) throw new Error(`unexpected status 0x${status.toString(16)}`);
                const payload = r.bytes(dataLen);
                running = status;
                if (kind === 0x90 || kind === 0x80) {
                    events.push({
                        tick,
                        on: kind === 0x90 && payload[1] > 0,
                        pitch: payload[0],
                        velocity: payload[1],
                        channel: status & 0x0f,
                    });
                }
            }
        }
    }

    const tempoUs = tempo ?? 500000;
    const secPerTick = tempoUs / (division * 1e6);
    events.sort((a, b) => a.tick - b.tick);
    const open = new Map<number, { tick: number; velocity: number }[]>();
    const notes: MidiNote[] = [];
    let lastTick = 0;
    for (const ev of events) {
        lastTick = Math.max(lastTick, ev.tick);
        const key = ev.channel * 128 + ev.pitch;
        if (ev.on) {
            const queue = open.get(key) ?? [];
            queue.push({ tick: ev.tick, velocity: ev.velocity });
            open.set(key, queue);
        } else {
            const queue = open.get(key);
            const started = queue?.shift();
            if (started) {
                const duration = Math.max(1, ev.tick - started.tick);
                notes.push({
                    pitch: ev.pitch,
                    velocity: started.velocity,
                    onsetTicks: started.tick,
                    durationTicks: duration,
                    onsetSec: started.tick * secPerTick,
                    durationSec: duration * secPerTick,
                });
            }
        }
    }
    for (const [key, queue] of open) {
        for (const started of queue) {
            const duration = Math.max(1, lastTick - started.tick);
            notes.push({
                pitch: key % 128,
                velocity: started.velocity,
                onsetTicks: started.tick,
                durationTicks: duration,
                onsetSec: started.tick * secPerTick,
                durationSec: duration * secPerTick,
            });
        }
    }
    notes.sort((a, b) => a.onsetTicks - b.onsetTicks || a.pitch - b.pitch);
    return { division, tempoUsPerQuarter: tempoUs, notes };
}
