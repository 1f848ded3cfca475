"""Protein interface maps as dense prediction over a pairwise residue tensor."""

import os

# PAIRDENSE_THREADS caps BLAS threads; must be set before numpy loads its BLAS
_threads = os.environ.get("PAIRDENSE_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

from .kernels import BACKEND  # noqa: E402

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
