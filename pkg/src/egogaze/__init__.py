"""egogaze: gaze-prediction toolkit for egocentric video.

Spatial-bias baselines, bottom-up saliency and motion cues, least-squares
cue-fusion regression, a stacked-GRU fixation predictor, task-specific cue
maps, NSS/AUC evaluation, and an experiment harness, all over a shared
(k, k) grid-map currency.
"""

__version__ = "0.1.0"

from .baselines import AverageFixationMap, central_gaussian, fixation_oracle_maps
from .bottomup import (
    CueStack,
    FlowField,
    build_cue_stack,
    flow_magnitude_map,
    gbvs_lite,
    horn_schunck,
    itti_lite,
    spectral_residual,
)
from .core import (
    DEFAULT_GRID_SIZE,
    FeatureMatrix,
    FixationRecord,
    FixationTrace,
    build_targets,
    builtin_descriptor,
    fixation_cell,
    fixation_cells,
    gaussian_kernel,
    max_normalize,
    normalize_sum,
    rasterize_fixation,
    smooth_map,
    standardize_features,
)
from .cues import (
    HandMask,
    PointAnnotation,
    augment,
    click_agreement,
    complement,
    hand_category,
    point_to_map,
)
from .errors import (
    ConvergenceError,
    CoordinateError,
    DimensionError,
    EgogazeError,
    FrameGapError,
    ParseError,
)
from .experiments import (
    ConfusionMatrix,
    LinearSvm,
    WindowFeature,
    activity_curves,
    frame_ablation,
    subject_ablation,
    transfer_matrix,
    window_features,
)
from .io import (
    load_feature_matrix,
    load_fixation_log,
    load_map,
    load_matrix,
    save_feature_matrix,
    save_fixation_log,
    save_map,
    save_matrix,
)
from .metrics import ScoreReport, auc, evaluate, map_correlation, nss, zscore_map
from .recurrent import (
    GruGazePredictor,
    GruLayerParams,
    GruParams,
    cross_entropy,
    forward_sequence,
    gradient_check,
    gru_cell_forward,
    init_gru_params,
)
from .regression import LinearGazeRegressor, combine_cues
