"""Pure-numpy fixed-step RK4 Lindblad stepper.

Interface-compatible fallback for the compiled kernel: the right-hand side
is evaluated as P rho + rho P† + sum_j A_j rho A_j† with the rates already
folded into the jump operators (A_j = sqrt(2 kappa_j) C_j) and the
anti-commutator absorbed into the drift P = -iH - (1/2) sum_j A_j† A_j.
"""

import numpy as np


class NumpyStepper:
    backend = "numpy"

    def __init__(self, p: np.ndarray, a_ops):
        self.dim = p.shape[0]
        self.p = np.ascontiguousarray(p, dtype=complex)
        self.p_dag = np.ascontiguousarray(self.p.conj().T)
        self.a_ops = [np.ascontiguousarray(a, dtype=complex) for a in a_ops]
        self.a_dags = [np.ascontiguousarray(a.conj().T) for a in self.a_ops]
        shape = (self.dim, self.dim)
        self._k = np.empty(shape, dtype=complex)
        self._stage = np.empty(shape, dtype=complex)
        self._acc = np.empty(shape, dtype=complex)
        self._t1 = np.empty(shape, dtype=complex)
        self._t2 = np.empty(shape, dtype=complex)

    def _rhs(self, rho, out):
        np.matmul(self.p, rho, out=out)
        np.matmul(rho, self.p_dag, out=self._t1)
        out += self._t1
        for a, adag in zip(self.a_ops, self.a_dags):
            np.matmul(a, rho, out=self._t1)
            np.matmul(self._t1, adag, out=self._t2)
            out += self._t2

    def advance(self, rho: np.ndarray, dt: float, n_steps: int) -> None:
        """Advance rho in place by n_steps of classic RK4."""
        k, stage, acc = self._k, self._stage, self._acc
        for _ in range(n_steps):
            self._rhs(rho, k)
            acc[...] = k
            np.multiply(k, 0.5 * dt, out=stage)
            stage += rho
            self._rhs(stage, k)
            acc += k
            acc += k
            np.multiply(k, 0.5 * dt, out=stage)
            stage += rho
            self._rhs(stage, k)
            acc += k
            acc += k
            np.multiply(k, dt, out=stage)
            stage += rho
            self._rhs(stage, k)
            acc += k
            acc *= dt / 6.0
            rho += acc
