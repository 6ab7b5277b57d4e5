"""Model bundle persistence.

A rendering model is a pair of trained networks (onset-wise: vt, lbpr;
note-wise: vd, tim, art) together with the corpus feature statistics and
the feature-set version they were trained against. Stored as a single
diffable JSON file with shape-tagged flat weight arrays.
"""

import json
from dataclasses import dataclass

import numpy as np

from .basis import FEATURE_SPEC, FeatureStats
from .neural import PARAM_KEYS, NetworkConfig, NetworkParams
from .perf import NOTE_STREAMS, ONSET_STREAMS


class ModelError(ValueError):
    pass


@dataclass
class PerformanceModel:
    onset_net: NetworkParams
    note_net: NetworkParams
    feature_stats: FeatureStats
    feature_version: str = FEATURE_SPEC.version

    def __post_init__(self):
        if self.onset_net.config.output_size != len(ONSET_STREAMS):
            raise ModelError("onset network must have 2 outputs (vt, lbpr)")
        if self.note_net.config.output_size != len(NOTE_STREAMS):
            raise ModelError("note network must have 3 outputs (vd, tim, art)")
        if self.onset_net.config.input_size != self.note_net.config.input_size:
            raise ModelError("networks disagree on feature count")

    @property
    def input_size(self) -> int:
        return self.onset_net.config.input_size


def _params_to_doc(params: NetworkParams) -> dict:
    cfg = params.config
    return {
        "config": {
            "input_size": cfg.input_size,
            "output_size": cfg.output_size,
            "hidden_size": cfg.hidden_size,
            "cell": cfg.cell,
            "seed": cfg.seed,
        },
        "params": {
            k: {"shape": list(v.shape), "data": [float(x) for x in v.ravel()]}
            for k, v in params.arrays.items()
        },
    }


def _params_from_doc(doc: dict) -> NetworkParams:
    try:
        cfg = NetworkConfig(**doc["config"])
        arrays = {}
        for k in PARAM_KEYS:
            entry = doc["params"][k]
            arrays[k] = np.array(entry["data"], dtype=float).reshape(entry["shape"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed network section: {exc}") from exc
    return NetworkParams(cfg, arrays)


def model_to_json(model: PerformanceModel) -> str:
    doc = {
        "feature_version": model.feature_version,
        "feature_stats": {
            "mean": [float(x) for x in model.feature_stats.mean],
            "std": [float(x) for x in model.feature_stats.std],
        },
        "onset_net": _params_to_doc(model.onset_net),
        "note_net": _params_to_doc(model.note_net),
    }
    return json.dumps(doc, indent=2)


def model_from_json(text: str | bytes) -> PerformanceModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"malformed model JSON: {exc}") from exc
    try:
        stats = FeatureStats(
            np.array(doc["feature_stats"]["mean"], dtype=float),
            np.array(doc["feature_stats"]["std"], dtype=float),
        )
        version = doc["feature_version"]
        onset_net = _params_from_doc(doc["onset_net"])
        note_net = _params_from_doc(doc["note_net"])
    except KeyError as exc:
        raise ModelError(f"model file missing section {exc}") from exc
    return PerformanceModel(onset_net, note_net, stats, version)


def save_model(model: PerformanceModel, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))


def load_model(path) -> PerformanceModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_json(fh.read())
