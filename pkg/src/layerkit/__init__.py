"""Ice-layer label processing, layer reconstruction, thickness scoring and a toy FCN."""
from .core import (
    BACKGROUND,
    MISSING,
    NUM_CLASSES,
    CropBox,
    LabelSchema,
    LayerMap,
    Radargram,
    SemanticMap,
    Violation,
    is_complete,
    validate_layer_map,
)
from .labelproc import (
    ConsecutiveSet,
    CropResult,
    consecutive_sets,
    crop,
    crop_box,
    preprocess,
    remove_incomplete,
    semantic_fill,
)
from .layerize import ThicknessReport, mean_thickness, semantic_to_layers, strip_duplicates, thickness_cm
from .metrics import (
    ConfusionCounts,
    EvalReport,
    accuracy,
    aggregate,
    confusion,
    evaluate,
    evaluate_corpus,
    filter_by_layer_count,
    mean_iou,
    restrict_top_n,
    thickness_mae,
)
from .sched import SchedulePoint, onecycle, poly, tabulate
from .synth import SynthConfig, generate, generate_corpus

__version__ = "0.1.0"
