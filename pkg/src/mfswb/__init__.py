"""Sliced Wasserstein barycenters with marginal-fairness objectives."""

__version__ = "0.1.0"

from .evaluation import exact_w_pp, f_metric, subsample_for_eval, w_metric
from .measures import (
    DiscreteMeasure,
    ProjectedMeasure,
    dual_potential_1d,
    project,
    sorted_matching,
    wasserstein1d_pp,
)
from .objectives import (
    GradientEstimate,
    Method,
    es_mfswb_grad,
    estimate,
    mfswb_dual_grad,
    s_mfswb_grad,
    swb_grad,
    us_mfswb_grad,
)
from .optimizer import BarycenterConfig, MetricsRecord, RunTrace, run_fixed_support, run_free_support
from .slicing import ProjectionSet, energy_weights, sample_uniform_sphere

__all__ = [
    "BarycenterConfig",
    "DiscreteMeasure",
    "GradientEstimate",
    "Method",
    "MetricsRecord",
    "ProjectedMeasure",
    "ProjectionSet",
    "RunTrace",
    "dual_potential_1d",
    "energy_weights",
    "es_mfswb_grad",
    "estimate",
    "exact_w_pp",
    "f_metric",
    "mfswb_dual_grad",
    "project",
    "run_fixed_support",
    "run_free_support",
    "s_mfswb_grad",
    "sample_uniform_sphere",
    "sorted_matching",
    "subsample_for_eval",
    "swb_grad",
    "us_mfswb_grad",
    "w_metric",
    "wasserstein1d_pp",
]
