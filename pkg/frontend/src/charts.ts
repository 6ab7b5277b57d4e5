/** Canvas line chart. Data lives apart from drawing so that what the chart
 * holds is exactly what the server sent (the drawing only maps to pixels). */

export class LineChart {
    positions: number[] = [];
    values: number[] = [];

    constructor(
        private readonly canvas: HTMLCanvasElement | null = null,
        private readonly color: string = "#2e7bd6",
        private readonly label: string = "",
    ) {}

    setData(positions: number[], values: number[]): void {
        this.positions = [...positions];
        this.values = [...values];
        this.draw();
    }

    draw(): void {
        if (!this.canvas) return;
        const ctx = this.canvas.getContext("2d");
        if (!ctx) return;
        const { width, height } = this.canvas;
        ctx.clearRect(0, 0, width, height);
        ctx.strokeStyle = "#ccc";
        ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
        if (this.values.length === 0) return;

        const lo = Math.min(...this.values);
        const hi = Math.max(...this.values);
        const span = hi - lo || 1;
        const xLo = this.positions[0];
        const xHi = this.positions[this.positions.length - 1];
        const xSpan = xHi - xLo || 1;
        const pad = 8;

        ctx.beginPath();
        this.values.forEach((v, i) => {
            const x = pad + ((this.positions[i] - xLo) / xSpan) * (width - 2 * pad);
            const y = height - pad - ((v - lo) / span) * (height - 2 * pad);
            if (i === 0) ctx.moveTo(x, y);
            else ctx.lineTo(x, y);
        });
        ctx.strokeStyle = this.color;
        ctx.lineWidth = 1.5;
        ctx.stroke();

        ctx.fillStyle = "#555";
        ctx.font = "11px sans-serif";
        ctx.fillText(`${this.label}  [${lo.toFixed(3)}, ${hi.toFixed(3)}]`, pad, 14);
    }
}
