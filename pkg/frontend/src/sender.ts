/** Throttled controls dispatcher.
 *
 * Slider movements arrive much faster than we want to hit the server, so
 * updates are coalesced: at most one POST per window (150 ms), always with
 * the latest body. Each dispatched request carries a sequence number and a
 * response is applied only if no newer response has been applied yet, so
 * out-of-order arrivals can never roll the UI backwards.
 */

export const DEBOUNCE_MS = 150;

export class ControlsSender<B, R> {
    private timer: ReturnType<typeof setTimeout> | undefined;
    private pendingBody: B | undefined;
    private sentSeq = 0;
    private appliedSeq = 0;

    constructor(
        private readonly send: (body: B) => Promise<R>,
        private readonly apply: (response: R) => void,
        private readonly onError: (err: unknown) => void = () => undefined,
        private readonly waitMs: number = DEBOUNCE_MS,
    ) {}

    /** Queue the latest controls body; earlier queued bodies are dropped. */
    update(body: B): void {
        this.pendingBody = body;
        if (this.timer === undefined) {
            this.timer = setTimeout(() => this.fire(), this.waitMs);
        }
    }

    /** Drop any responses still in flight (e.g. when loading a new piece). */
    invalidate(): void {
        this.appliedSeq = this.sentSeq;
        if (this.timer !== undefined) {
            clearTimeout(this.timer);
            this.timer = undefined;
        }
        this.pendingBody = undefined;
    }

    private fire(): void {
        this.timer = undefined;
        if (this.pendingBody === undefined) return;
        const body = this.pendingBody;
        this.pendingBody = undefined;
        const seq = ++this.sentSeq;
        this.send(body).then(
            (response) => {
                if (seq > this.appliedSeq) {
                    this.appliedSeq = seq;
                    this.apply(response);
                }
            },
            (err) => {
                if (seq > this.appliedSeq) this.appliedSeq = seq;
                this.onError(err);
            },
        );
    }
}
