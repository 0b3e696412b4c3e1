"""Matrix-vector kernels for 0/1 mask matrices.

Two interchangeable implementations:

``PackedKernel``
    Compiled extension (``pmlsv._kernels``); rows and columns are bit-packed and
    products use per-byte lookup tables.
``DenseKernel``
    Pure numpy fallback; a dense 0/1 float64 matrix multiplied through BLAS.

The default is chosen at import: the compiled kernel when the extension was
built, unless ``PMLSV_BACKEND=python`` is set. Both compute ``scale * (B @ x)``
and agree to rounding, but not bit for bit, so the backend name belongs in a
run's provenance.
"""

import os

import numpy as np

try:
    from ._kernels import packed_matvec
except ImportError:  # extension not built
    packed_matvec = None

__all__ = ["BACKEND", "DenseKernel", "PackedKernel", "available_backends", "make_kernel"]


class DenseKernel:
    name = "python"

    def __init__(self, weights):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)

    def matvec(self, x, scale):
        return (self.weights @ x) * scale

    def rmatvec(self, w, scale):
        return (w @ self.weights) * scale


class PackedKernel:
    name = "compiled"

    def __init__(self, support):
        if packed_matvec is None:
            raise ImportError("pmlsv._kernels is not built; reinstall with a C compiler and Cython")
        support = np.asarray(support, dtype=bool)
        self.rows = np.packbits(support, axis=1, bitorder="little")
        self.cols = np.packbits(np.ascontiguousarray(support.T), axis=1, bitorder="little")

    def matvec(self, x, scale):
        return packed_matvec(self.rows, np.ascontiguousarray(x, dtype=np.float64), scale)

    def rmatvec(self, w, scale):
        return packed_matvec(self.cols, np.ascontiguousarray(w, dtype=np.float64), scale)


_KERNELS = {"python": DenseKernel, "compiled": PackedKernel}


def available_backends():
    return ["compiled", "python"] if packed_matvec is not None else ["python"]


def _default_backend():
    requested = os.environ.get("PMLSV_BACKEND", "").strip().lower()
    if requested == "python" or packed_matvec is None:
        return "python"
    return "compiled"


BACKEND = _default_backend()


def make_kernel(support, backend=None):
    backend = backend or BACKEND
    if backend not in _KERNELS:
        raise ValueError(f"unknown backend {backend!r}; choose from {sorted(_KERNELS)}")
    return _KERNELS[backend](support)
