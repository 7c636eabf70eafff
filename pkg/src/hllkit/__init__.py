"""HyperLogLog sketches with bias-free cardinality estimation.

The package is organized around small, composable modules:

- :mod:`hllkit.core_sketch` -- the sketch data structure: insertion,
  merging, lossless compression, and register multiplicity extraction.
- :mod:`hllkit.special_functions` -- the scalar helper functions the
  estimators are built from.
- :mod:`hllkit.estimation` -- cardinality estimators for a single sketch.
- :mod:`hllkit.joint_estimation` -- joint estimation of intersection and
  set-difference cardinalities from a pair of sketches.
- :mod:`hllkit.quasi_newton` -- a dense BFGS maximizer used by the joint
  estimator.
- :mod:`hllkit.simulation_harness` -- reproducible simulations that
  measure estimator error over cardinality grids, plus CSV reporting.
"""

__version__ = "0.1.0"

from hllkit.core_sketch import (
    HllSketch,
    MultiplicityVector,
    SketchConfig,
    TrackedSketch,
    compress,
    extract_counts,
    merge,
    new_sketch,
)
from hllkit.estimation import (
    CorrectionDomainExceededError,
    MlBounds,
    MlOptions,
    UnboundedEstimateError,
    improved_raw_estimate,
    ml_bounds,
    ml_estimate,
    original_estimate,
)
from hllkit.joint_estimation import (
    EstimateTriple,
    JointStatistic,
    PhiPoint,
    estimate_joint,
    extract_joint_statistic,
    inclusion_exclusion_estimates,
    joint_log_likelihood,
)

__all__ = [
    "__version__",
    "SketchConfig",
    "HllSketch",
    "TrackedSketch",
    "MultiplicityVector",
    "new_sketch",
    "merge",
    "compress",
    "extract_counts",
    "MlOptions",
    "MlBounds",
    "CorrectionDomainExceededError",
    "UnboundedEstimateError",
    "original_estimate",
    "improved_raw_estimate",
    "ml_bounds",
    "ml_estimate",
    "JointStatistic",
    "EstimateTriple",
    "PhiPoint",
    "extract_joint_statistic",
    "joint_log_likelihood",
    "inclusion_exclusion_estimates",
    "estimate_joint",
]
