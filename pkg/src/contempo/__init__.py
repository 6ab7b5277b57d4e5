"""contempo: expressive piano performance rendering with per-feature steering."""

from .basis import (
    FEATURE_NAMES,
    FEATURE_SPEC,
    BasisMatrix,
    FeatureSpec,
    FeatureStats,
    OnsetBasisMatrix,
    apply_feature_stats,
    fit_feature_stats,
    note_basis,
    onset_basis,
)
from .linearize import (
    ContributionMatrix,
    RenderControls,
    analyze_piece,
    apply_weights,
    contributions,
    reference_point,
    render,
    shape_mean_std,
)
from .midi import MidiError, read_midi, write_midi
from .models import PerformanceModel, load_model, save_model
from .neural import (
    NetworkConfig,
    NetworkParams,
    TrainingConfig,
    forward,
    init,
    input_jacobian,
    loss_and_grads,
    train,
)
from .perf import (
    Alignment,
    DecodeControls,
    ExpressiveParams,
    Performance,
    PerformedNote,
    decode,
    encode,
    read_alignment,
    standardize,
)
from .score import (
    Marking,
    OnsetIndex,
    Score,
    ScoreError,
    ScoreNote,
    TimeSignature,
    build_onset_index,
    parse_musicxml,
    parse_score_json,
    serialize_score,
)

__version__ = "0.1.0"
