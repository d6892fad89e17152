# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-step RK4 Lindblad stepper.

Same semantics as the numpy fallback, with all matrix products routed
through BLAS zgemm and the stage/accumulator updates fused into flat loops,
so one call advances many steps without touching the Python layer.
"""

import numpy as np

from scipy.linalg.cython_blas cimport zgemm

ctypedef double complex zcomplex


cdef void _gemm(zcomplex* a, zcomplex* b, zcomplex* out,
                int d, zcomplex alpha, zcomplex beta) noexcept nogil:
    # C-ordered matrices: column-major zgemm computes out^T = b^T a^T,
    # so swapping the operands yields out = alpha * a @ b + beta * out.
    zgemm(b"N", b"N", &d, &d, &d, &alpha, b, &d, a, &d, &beta, out, &d)


cdef class CythonStepper:
    backend = "cython"

    cdef int d, m
    cdef object _keep
    cdef zcomplex[:, ::1] p, p_dag
    cdef zcomplex[:, :, ::1] a_ops, a_dags
    cdef zcomplex[:, ::1] k, stage, acc, t1

    def __init__(self, p, a_ops):
        p = np.ascontiguousarray(p, dtype=complex)
        self.d = p.shape[0]
        self.m = len(a_ops)
        stack = np.ascontiguousarray(
            np.stack(a_ops) if a_ops else np.zeros((0, self.d, self.d)), dtype=complex
        )
        p_dag = np.ascontiguousarray(p.conj().T)
        dstack = np.ascontiguousarray(stack.conj().transpose(0, 2, 1))
        k = np.empty((self.d, self.d), dtype=complex)
        stage = np.empty_like(k)
        acc = np.empty_like(k)
        t1 = np.empty_like(k)
        # hold references so the memoryviews stay valid
        self._keep = (p, p_dag, stack, dstack, k, stage, acc, t1)
        self.p = p
        self.p_dag = p_dag
        self.a_ops = stack
        self.a_dags = dstack
        self.k = k
        self.stage = stage
        self.acc = acc
        self.t1 = t1

    @property
    def dim(self):
        return self.d

    cdef void _rhs(self, zcomplex* rho, zcomplex* out) noexcept nogil:
        cdef int j
        cdef zcomplex one = 1.0, zero = 0.0
        _gemm(&self.p[0, 0], rho, out, self.d, one, zero)
        _gemm(rho, &self.p_dag[0, 0], out, self.d, one, one)
        for j in range(self.m):
            _gemm(&self.a_ops[j, 0, 0], rho, &self.t1[0, 0], self.d, one, zero)
            _gemm(&self.t1[0, 0], &self.a_dags[j, 0, 0], out, self.d, one, one)

    def advance(self, zcomplex[:, ::1] rho, double dt, int n_steps):
        """Advance rho in place by n_steps of classic RK4."""
        if rho.shape[0] != self.d or rho.shape[1] != self.d:
            raise ValueError("state dimension does not match the stepper")
        cdef int n2 = self.d * self.d
        cdef int step, i
        cdef double half_dt = 0.5 * dt, sixth_dt = dt / 6.0
        cdef zcomplex* r = &rho[0, 0]
        cdef zcomplex* k = &self.k[0, 0]
        cdef zcomplex* stage = &self.stage[0, 0]
        cdef zcomplex* acc = &self.acc[0, 0]
        with nogil:
            for step in range(n_steps):
                self._rhs(r, k)
                for i in range(n2):
                    acc[i] = k[i]
                    stage[i] = r[i] + half_dt * k[i]
                self._rhs(stage, k)
                for i in range(n2):
                    acc[i] = acc[i] + 2.0 * k[i]
                    stage[i] = r[i] + half_dt * k[i]
                self._rhs(stage, k)
                for i in range(n2):
                    acc[i] = acc[i] + 2.0 * k[i]
                    stage[i] = r[i] + dt * k[i]
                self._rhs(stage, k)
                for i in range(n2):
                    r[i] = r[i] + sixth_dt * (acc[i] + k[i])
