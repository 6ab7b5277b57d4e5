/** Piano roll colored by note velocity, with a playback cursor. */

import { NoteParam } from "./api.js";

export class PianoRoll {
    notes: NoteParam[] = [];
    playheadSec: number | null = null;

    constructor(private readonly canvas: HTMLCanvasElement | null = null) {}

    setNotes(notes: NoteParam[]): void {
        this.notes = [...notes];
        this.draw();
    }

    setPlayhead(seconds: number | null): void {
        this.playheadSec = seconds;
        this.draw();
    }

    get totalSeconds(): number {
        return this.notes.reduce((m, n) => Math.max(m, n.onset_sec + n.duration_sec), 0);
    }

    draw(): void {
        if (!this.canvas) return;
        const ctx = this.canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = this.canvas;
        ctx.clearRect(0, 0, width, height);
        ctx.fillStyle = "#fafafa";
        ctx.fillRect(0, 0, width, height);
        if (this.notes.length === 0) return;

        const total = this.totalSeconds || 1;
        const pitches = this.notes.map((n) => n.pitch);
        const lo = Math.min(...pitches) - 2;
        const hi = Math.max(...pitches) + 2;
        const rowH = height / (hi - lo + 1);

        for (const note of this.notes) {
            const x = (note.onset_sec / total) * width;
            const w = Math.max(2, (note.duration_sec / total) * width);
            const y = height - (note.pitch - lo + 1) * rowH;
            // velocity 1..127 -> cold to hot
            const heat = Math.round((note.velocity / 127) * 255);
            ctx.fillStyle = `rgb(${heat}, 70, ${255 - heat})`;
            ctx.fillRect(x, y, w, Math.max(2, rowH - 1));
        }

        if (this.playheadSec !== null) {
            const x = (this.playheadSec / total) * width;
            ctx.strokeStyle = "#111";
            ctx.lineWidth = 1;
            ctx.beginPath();
            ctx.moveTo(x, 0);
            ctx.lineTo(x, height);
            ctx.stroke();
        }
    }
}
