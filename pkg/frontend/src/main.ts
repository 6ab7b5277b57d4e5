/** DOM wiring: file upload, stream selector, grouped sliders, curve charts,
 * piano roll and playback. Everything displayed comes from the server. */

import { ApiClient, CurvesResponse, STREAMS, Stream } from "./api.js";
import { LineChart } from "./charts.js";
import { groupFeatures } from "./groups.js";
import { parseMidi } from "./midi.js";
import { PianoRoll } from "./pianoroll.js";
import { Player } from "./player.js";
import { ControlsSender } from "./sender.js";
import { SLIDER_MAX, SLIDER_MIN, UiState, controlsBody, initialState, setWeight } from "./state.js";

const api = new ApiClient("");

let state: UiState | null = null;
let sender: ControlsSender<object, CurvesResponse> | null = null;

const el = <T extends HTMLElement>(id: string): T => {
    const node = document.getElementById(id);
    if (!node) throw new Error(`missing element #${id}`);
    return node as T;
};

const velocityChart = new LineChart(el<HTMLCanvasElement>("chart-vt"), "#c0392b", "velocity trend");
const tempoChart = new LineChart(el<HTMLCanvasElement>("chart-lbpr"), "#2e7bd6", "log beat period ratio");
const roll = new PianoRoll(el<HTMLCanvasElement>("pianoroll"));
const player = new Player((seconds) => roll.setPlayhead(seconds));
const banner = el<HTMLDivElement>("banner");

function showError(message: string): void {
    banner.textContent = message;
    banner.hidden = false;
}

function clearError(): void {
    banner.hidden = true;
}

function applyCurves(response: CurvesResponse): void {
    if (!state) return;
    state.curves = response;
    velocityChart.setData(response.onsets, response.curves.vt);
    tempoChart.setData(response.onsets, response.curves.lbpr);
    roll.setNotes(response.note_params);
}

function pushControls(): void {
    if (!state || !sender) return;
    sender.update(controlsBody(state));
}

function renderSliders(): void {
    if (!state) return;
    const container = el<HTMLDivElement>("sliders");
    container.textContent = "";
    const stream = el<HTMLSelectElement>("stream-select").value as Stream;
    for (const group of groupFeatures(state.featureNames)) {
        const box = document.createElement("fieldset");
        const legend = document.createElement("legend");
        legend.textContent = group.label;
        box.appendChild(legend);
        for (const index of group.indices) {
            const row = document.createElement("label");
            row.className = "slider-row";
            const name = document.createElement("span");
            name.textContent = state.featureNames[index];
            const value = document.createElement("output");
            value.textContent = state.weights[stream][index].toFixed(2);
            const input = document.createElement("input");
            input.type = "range";
            input.min = String(SLIDER_MIN);
            input.max = String(SLIDER_MAX);
            input.step = "0.05";
            input.value = String(state.weights[stream][index]);
            input.addEventListener("input", () => {
                if (!state) return;
                setWeight(state, stream, index, Number(input.value));
                value.textContent = state.weights[stream][index].toFixed(2);
                pushControls();
            });
            row.append(name, input, value);
            box.appendChild(row);
        }
        container.appendChild(box);
    }
}

function renderShaping(): void {
    if (!state) return;
    const stream = el<HTMLSelectElement>("stream-select").value as Stream;
    const mu = el<HTMLInputElement>("mu");
    const sigma = el<HTMLInputElement>("sigma");
    const c = el<HTMLInputElement>("constant");
    mu.value = String(state.mu[stream]);
    sigma.value = String(state.sigma[stream]);
    c.value = String(state.constants[stream]);
}

async function loadPiece(body: string | Uint8Array): Promise<void> {
    clearError();
    try {
        const info = await api.uploadPiece(body);
        state = initialState(info);
        sender?.invalidate();
        sender = new ControlsSender(
            (controls) => api.postControls(info.piece_id, controls),
            (response) => applyCurves(response),
            (err) => showError(String(err)),
        );
        el<HTMLSpanElement>("piece-info").textContent =
            `piece ${info.piece_id}: ${info.T} onsets, ${info.N} notes`;
        renderSliders();
        renderShaping();
        applyCurves(await api.getCurves(info.piece_id));
    } catch (err) {
        showError(String(err));
    }
}

function wire(): void {
    el<HTMLInputElement>("score-file").addEventListener("change", async (event) => {
        const input = event.target as HTMLInputElement;
        const file = input.files?.[0];
        if (!file) return;
        await loadPiece(new Uint8Array(await file.arrayBuffer()));
    });

    el<HTMLSelectElement>("stream-select").addEventListener("change", () => {
        renderSliders();
        renderShaping();
    });

    for (const id of ["mu", "sigma", "constant", "beat-period"] as const) {
        el<HTMLInputElement>(id).addEventListener("input", () => {
            if (!state) return;
            const stream = el<HTMLSelectElement>("stream-select").value as Stream;
            const value = Number(el<HTMLInputElement>(id).value);
            if (!Number.isFinite(value)) return;
            if (id === "mu") state.mu[stream] = value;
            else if (id === "sigma") state.sigma[stream] = Math.max(0, value);
            else if (id === "constant") state.constants[stream] = value;
            else state.beatPeriod = Math.max(0.05, value);
            pushControls();
        });
    }

    el<HTMLButtonElement>("reset").addEventListener("click", () => {
        if (!state) return;
        for (const stream of STREAMS) {
            state.weights[stream] = state.featureNames.map(() => 1);
            state.constants[stream] = 0;
            state.mu[stream] = 0;
            state.sigma[stream] = 1;
        }
        state.beatPeriod = 0.5;
        renderSliders();
        renderShaping();
        pushControls();
    });

    const playButton = el<HTMLButtonElement>("play");
    if (!player.available) {
        playButton.disabled = true;
        playButton.title = "Web Audio is not available in this browser";
    }
    playButton.addEventListener("click", async () => {
        if (!state) return;
        try {
            const midi = parseMidi(await api.fetchMidi(state.pieceId));
            player.load([...midi.notes]);
            player.play();
        } catch (err) {
            showError(String(err));
        }
    });
    el<HTMLButtonElement>("stop").addEventListener("click", () => player.stop());
}

wire();
