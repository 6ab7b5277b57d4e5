/** UI state: one weight vector per stream plus shaping controls.
 * Slider values are bounded to [-2, 3]; the server accepts any finite
 * weight, the bound is purely a UI affordance around the neutral 1.0. */

import { ControlsBody, CurvesResponse, PieceInfo, STREAMS, Stream } from "./api.js";

export const SLIDER_MIN = -2;
export const SLIDER_MAX = 3;
export const SLIDER_DEFAULT = 1;

export interface UiState {
    pieceId: string;
    featureNames: string[];
    weights: Record<Stream, number[]>;
    constants: Record<Stream, number>;
    mu: Record<Stream, number>;
    sigma: Record<Stream, number>;
    beatPeriod: number;
    curves: CurvesResponse | null;
    playing: boolean;
}

function perStream<T>(value: () => T): Record<Stream, T> {
    return Object.fromEntries(STREAMS.map((s) => [s, value()])) as Record<Stream, T>;
}

export function initialState(info: PieceInfo): UiState {
    return {
        pieceId: info.piece_id,
        featureNames: [...info.feature_names],
        weights: perStream(() => info.feature_names.map(() => SLIDER_DEFAULT)),
        constants: perStream(() => 0),
        mu: perStream(() => 0),
        sigma: perStream(() => 1),
        beatPeriod: 0.5,
        curves: null,
        playing: false,
    };
}

export function clampSlider(value: number): number {
    if (!Number.isFinite(value)) return SLIDER_DEFAULT;
    return Math.min(SLIDER_MAX, Math.max(SLIDER_MIN, value));
}

export function setWeight(state: UiState, stream: Stream, index: number, value: number): void {
    state.weights[stream][index] = clampSlider(value);
}

/** Full controls body for the server; the POST replaces session state. */
export function controlsBody(state: UiState): ControlsBody {
    return {
        weights: Object.fromEntries(STREAMS.map((s) => [s, [...state.weights[s]]])),
        c: { ...state.constants },
        mu: { ...state.mu },
        sigma: { ...state.sigma },
        beat_period: state.beatPeriod,
    };
}
