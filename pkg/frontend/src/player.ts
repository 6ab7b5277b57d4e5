/** Client-side playback of a parsed MIDI file with a moving playhead.
 * Each note is a short sine voice with a decay envelope; playback always
 * uses the snapshot loaded at play() time, so slider changes take effect
 * only on the next play. */

import { MidiNote } from "./midi.js";

export class Player {
    private ctx: AudioContext | null = null;
    private startedAt = 0;
    private raf: number | null = null;
    private stopTimer: ReturnType<typeof setTimeout> | null = null;
    private notes: MidiNote[] = [];
    playing = false;

    constructor(
        private readonly onPlayhead: (seconds: number | null) => void = () => undefined,
        private readonly createContext: () => AudioContext | null = defaultContext,
    ) {}

    get available(): boolean {
        return typeof AudioContext !== "undefined" || this.ctx !== null;
    }

    /** The deterministic note event list of the loaded snapshot. */
    get eventList(): readonly MidiNote[] {
        return this.notes;
    }

    load(notes: MidiNote[]): void {
        this.stop();
        this.notes = [...notes];
    }

    play(): void {
        if (this.notes.length === 0) return;
        this.stop();
        this.ctx = this.ctx ?? this.createContext();
        if (!this.ctx) return;
        const ctx = this.ctx;
        const t0 = ctx.currentTime + 0.05;
        let end = 0;
        for (const note of this.notes) {
            const osc = ctx.createOscillator();
            const gain = ctx.createGain();
            osc.type = "sine";
            osc.frequency.value = 440 * Math.pow(2, (note.pitch - 69) / 12);
            const vel = note.velocity / 127;
            const start = t0 + note.onsetSec;
            const stop = start + Math.max(0.05, note.durationSec);
            gain.gain.setValueAtTime(0, start);
            gain.gain.linearRampToValueAtTime(0.25 * vel, start + 0.01);
            gain.gain.setTargetAtTime(0, stop - 0.04, 0.02);
            osc.connect(gain).connect(ctx.destination);
            osc.start(start);
            osc.stop(stop + 0.1);
            end = Math.max(end, note.onsetSec + note.durationSec);
        }
        this.playing = true;
        this.startedAt = t0;
        const tick = () => {
            if (!this.playing || !this.ctx) return;
            this.onPlayhead(Math.max(0, this.ctx.currentTime - this.startedAt));
            this.raf = requestAnimationFrame(tick);
        };
        this.raf = requestAnimationFrame(tick);
        this.stopTimer = setTimeout(() => this.stop(), (end + 0.3) * 1000);
    }

    stop(): void {
        if (this.stopTimer) {
            clearTimeout(this.stopTimer);
            this.stopTimer = null;
        }
        if (this.raf !== null && typeof cancelAnimationFrame !== "undefined") {
            cancelAnimationFrame(this.raf);
            this.raf = null;
        }
        if (this.playing && this.ctx) {
            this.ctx.close().catch(() => undefined);
            this.ctx = null;
        }
        this.playing = false;
        this.onPlayhead(null);
    }
}

function defaultContext(): AudioContext | null {
    if (typeof AudioContext === "undefined") return null;
    return new AudioContext();
}
