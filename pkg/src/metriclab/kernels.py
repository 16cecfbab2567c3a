"""Backend dispatch for the loss accumulation kernels.

The active implementation is chosen once, at first import, from the
METRICLAB_BACKEND environment variable (see metriclab.backend). Every
caller goes through the names re-exported here so the whole process uses
one backend consistently.
"""

from . import backend as _backend

if _backend.active_backend() == "numba":
    from ._kernels_numba import neg_terms, pos_terms, triplet_terms
else:
    from ._kernels_numpy import neg_terms, pos_terms, triplet_terms

__all__ = ["pos_terms", "neg_terms", "triplet_terms"]
