"""Choice-leakage membership inference for subset-selection pipelines."""

from choiceleak.errors import InputError, IntegrityError
from choiceleak.data import (
    Dataset,
    GroundTruth,
    Sample,
    Surface,
    SurfaceLabels,
    Tag,
    generate_synthetic,
    partition_supply_chain,
    surface_labels,
)
from choiceleak.selectors import SelectorSpec, select, selection_count
from choiceleak.windows import WindowPlan, build_window_plan, exposure_count
from choiceleak.side import (
    EvidenceLedger,
    ScoreTable,
    run_side_attack,
    score_side,
    score_side_general,
)
from choiceleak.black import kmeans, run_black_attack, score_black
from choiceleak.evaluation import RocReport, assemble_report, roc_auc, tpr_at_fpr

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "EvidenceLedger",
    "GroundTruth",
    "InputError",
    "IntegrityError",
    "RocReport",
    "Sample",
    "ScoreTable",
    "SelectorSpec",
    "Surface",
    "SurfaceLabels",
    "Tag",
    "WindowPlan",
    "assemble_report",
    "build_window_plan",
    "exposure_count",
    "generate_synthetic",
    "kmeans",
    "partition_supply_chain",
    "roc_auc",
    "run_black_attack",
    "run_side_attack",
    "score_black",
    "score_side",
    "score_side_general",
    "select",
    "selection_count",
    "surface_labels",
    "tpr_at_fpr",
]
