"""Coupled CP tensor decomposition via structure-adapted proximal gradient solvers."""

from ._core import (
    __version__,
    fold,
    gen_synthetic,
    khatri_rao,
    kruskal_reconstruct,
    metric_fms,
    metric_hsr,
    metric_relerr,
    mttkrp,
    prox_l1_offset,
    solve,
    unfold,
)

__all__ = [
    "__version__",
    "fold",
    "gen_synthetic",
    "khatri_rao",
    "kruskal_reconstruct",
    "metric_fms",
    "metric_hsr",
    "metric_relerr",
    "mttkrp",
    "prox_l1_offset",
    "solve",
    "unfold",
]
