/** Typed client for the rendering service. All numbers shown anywhere in
 * the UI come out of these responses; the client never computes model math. */

export type Stream = "vt" | "lbpr" | "vd" | "tim" | "art";

export const STREAMS: Stream[] = ["vt", "lbpr", "vd", "tim", "art"];

export interface PieceInfo {
    piece_id: string;
    T: number;
    N: number;
    feature_names: string[];
}

export interface NoteParam {
    id: string;
    pitch: number;
    onset_sec: number;
    duration_sec: number;
    velocity: number;
}

export interface CurvesResponse {
    curves: Record<Stream, number[]>;
    onsets: number[];
    note_params: NoteParam[];
}

export interface ControlsBody {
    weights?: Partial<Record<Stream, number[]>>;
    c?: Partial<Record<Stream, number>>;
    mu?: Partial<Record<Stream, number>>;
    sigma?: Partial<Record<Stream, number>>;
    beat_period?: number;
}

export class ApiError extends Error {
    constructor(readonly status: number, detail: string) {
        super(detail);
    }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function expectJson<T>(response: Response): Promise<T> {
    if (!response.ok) {
        let detail = `${response.status}`;
        try {
            const body = await response.json();
            if (body && typeof body.detail === "string") detail = body.detail;
        } catch {
            /* non-JSON error body */
        }
        throw new ApiError(response.status, detail);
    }
    return response.json() as Promise<T>;
}

export class ApiClient {
    private fetchFn: FetchLike;

    constructor(readonly baseUrl: string = "", fetchFn?: FetchLike) {
        this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
    }

    uploadPiece(body: string | Uint8Array): Promise<PieceInfo> {
        return this.fetchFn(`${this.baseUrl}/api/pieces`, {
            method: "POST",
            body: body as BodyInit,
        }).then((r) => expectJson<PieceInfo>(r));
    }

    getCurves(pieceId: string): Promise<CurvesResponse> {
        return this.fetchFn(`${this.baseUrl}/api/pieces/${pieceId}/curves`).then((r) =>
            expectJson<CurvesResponse>(r),
        );
    }

    postControls(pieceId: string, controls: ControlsBody): Promise<CurvesResponse> {
        return this.fetchFn(`${this.baseUrl}/api/pieces/${pieceId}/controls`, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(controls),
        }).then((r) => expectJson<CurvesResponse>(r));
    }

    async fetchMidi(pieceId: string): Promise<Uint8Array> {
        const response = await this.fetchFn(`${this.baseUrl}/api/pieces/${pieceId}/render.mid`);
        if (!response.ok) throw new ApiError(response.status, `render failed: ${response.status}`);
        return new Uint8Array(await response.arrayBuffer());
    }

    listPieces(): Promise<{ pieces: { piece_id: string; title: string }[] }> {
        return this.fetchFn(`${this.baseUrl}/api/pieces`).then((r) => expectJson(r));
    }
}
