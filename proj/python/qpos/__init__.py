"""Strict q-positivity of Hermitian forms, Riesz projectors and metric synthesis."""

from ._qpos import (
    QposError,
    eigenvalues_wrt,
    geometry_pipeline,
    h_x,
    inertia,
    max_subspace_trace,
    oracle_projector,
    pair_metric,
    q_min_sum,
    riesz_projector,
    sphere_eigenvalue,
    spectrum_wrt,
    strictly_q_positive,
    synthesize_single,
    synthesize_subbundle,
    weight_bump,
)

__all__ = [
    "QposError",
    "eigenvalues_wrt",
    "geometry_pipeline",
    "h_x",
    "inertia",
    "max_subspace_trace",
    "oracle_projector",
    "pair_metric",
    "q_min_sum",
    "riesz_projector",
    "sphere_eigenvalue",
    "spectrum_wrt",
    "strictly_q_positive",
    "synthesize_single",
    "synthesize_subbundle",
    "weight_bump",
]
