"""Experiment orchestration: chunking and soft voting, cross-validation,
threat-model sweeps, overlap simulation and metrics."""
from .cv import (ExperimentSpec, chance_interval, fit_fold, permute_labels, predict_profiles,
                 run_cv, run_tm1, run_tm2, run_tm3, stratified_folds, tm1_classes)
from .features import (AggregateFeatures, ImageFeatures, NgramFeatures, RawChunks,
                       REPRESENTATIONS, TfidfFeatures, make_representation, representation_from_state)
from .metrics import (MetricsReport, compute_metrics, confusion_matrix, read_reports_csv,
                      write_confusion_csv, write_reports_csv, write_reports_json)
from .overlap import (longest_common_run, mean_signal_overlap, parent_derived_overlap,
                      signal_overlap, simulate_overlap)
from .voting import DROP, PAD_EDGE, ChunkSpec, chunk, soft_vote
