"""RK4 Lindblad stepper backends.

Two interchangeable steppers advance the density matrix in place with
identical update formulas, so results agree to float round-off:

* ``cython`` - compiled kernel, wins at small dimensions where per-step
  Python overhead dominates (measured ~4-7x at dim <= 16);
* ``numpy`` - always available; its matmul reaches the threaded BLAS and
  takes over for larger matrices.

``make_stepper`` picks per system size (compiled at or below
``COMPILED_DIM_THRESHOLD``); set ``ANHARME_KERNEL=numpy`` (or ``cython``)
to force one.
"""

import os

import numpy as np

from . import numpy_backend

try:
    from . import _cykernel
except ImportError:
    _cykernel = None

__all__ = [
    "COMPILED_DIM_THRESHOLD",
    "available_backends",
    "choose_backend",
    "default_backend",
    "make_stepper",
    "prepare_drift",
]

# Crossover (total Hilbert dimension) between the compiled kernel and the
# threaded-BLAS numpy path; see benchmarks/bench_kernels.py.
COMPILED_DIM_THRESHOLD = 32


def available_backends() -> list:
    out = ["numpy"]
    if _cykernel is not None:
        out.insert(0, "cython")
    return out


def _forced_backend():
    forced = os.environ.get("ANHARME_KERNEL")
    if forced and forced not in available_backends():
        raise RuntimeError(f"requested kernel backend {forced!r} is unavailable")
    return forced or None


def default_backend() -> str:
    return _forced_backend() or available_backends()[0]


def choose_backend(dim: int) -> str:
    forced = _forced_backend()
    if forced:
        return forced
    if _cykernel is not None and dim <= COMPILED_DIM_THRESHOLD:
        return "cython"
    return "numpy"


def prepare_drift(hamiltonian: np.ndarray, collapse_pairs) -> tuple:
    """Fold rates and anti-commutators into (P, [A_j]).

    ``collapse_pairs`` holds (rate, operator matrix) with rate the full
    coefficient of the dissipator.  Returns the non-Hermitian drift
    P = -iH - (1/2) sum_j A_j† A_j and jump operators A_j = sqrt(rate_j) C_j.
    """
    h = np.asarray(hamiltonian, dtype=complex)
    p = -1j * h
    a_ops = []
    for rate, c in collapse_pairs:
        if rate < 0:
            raise ValueError("negative rate")
        if rate == 0:
            continue
        a = np.sqrt(rate) * np.asarray(c, dtype=complex)
        p = p - 0.5 * (a.conj().T @ a)
        a_ops.append(a)
    return np.ascontiguousarray(p), a_ops


def make_stepper(hamiltonian, collapse_pairs, backend=None):
    """Build an RK4 stepper with ``advance(rho, dt, n_steps)`` in-place.

    Without an explicit ``backend`` the choice follows the system size.
    """
    p, a_ops = prepare_drift(hamiltonian, collapse_pairs)
    name = backend or choose_backend(p.shape[0])
    if name == "cython":
        if _cykernel is None:
            raise RuntimeError("compiled kernel not available")
        return _cykernel.CythonStepper(p, a_ops)
    if name == "numpy":
        return numpy_backend.NumpyStepper(p, a_ops)
    raise ValueError(f"unknown backend {name!r}")
