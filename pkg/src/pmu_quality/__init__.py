"""Online detection of low-quality synchrophasor data from cross-channel similarity."""

from pmu_quality.detector import (
    DetectionReport,
    DetectorConfig,
    StreamingDetector,
    detect_window,
    run_stream,
)
from pmu_quality.lof import LofConfig, lof_feature, lof_scores, run_lof
from pmu_quality.signals import SignalMatrix
from pmu_quality.similarity import (
    PairIndices,
    SimilarityConfig,
    WindowView,
    pair_similarity,
    similarity_degree,
    spectrum,
)

__all__ = [
    "DetectionReport",
    "DetectorConfig",
    "LofConfig",
    "PairIndices",
    "SignalMatrix",
    "SimilarityConfig",
    "StreamingDetector",
    "WindowView",
    "detect_window",
    "lof_feature",
    "lof_scores",
    "pair_similarity",
    "run_lof",
    "run_stream",
    "similarity_degree",
    "spectrum",
]
