#!/usr/bin/env python3
"""Benchmark the compiled RK4 Lindblad kernel against the numpy fallback.

Runs a damped Kerr oscillator (single-photon plus three-photon channels) at
a range of truncation dimensions and reports steps per second for each
backend.  The crossover observed here sets COMPILED_DIM_THRESHOLD in
anharme._kernels.
"""

import argparse
import time

import numpy as np

from anharme import _kernels


def build_system(dim: int):
    n = np.diag(np.arange(dim, dtype=float)).astype(complex)
    h = n - 0.025 * n @ n
    a = np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)
    pairs = [(0.08, a), (1e-5, a @ a @ a)]
    rng = np.random.default_rng(0)
    m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = m @ m.conj().T
    return h, pairs, np.ascontiguousarray(rho / np.trace(rho))


def run(dim: int, seconds: float) -> dict:
    h, pairs, rho0 = build_system(dim)
    dt = (2 * np.pi) / 400
    out = {}
    for backend in _kernels.available_backends():
        stepper = _kernels.make_stepper(h, pairs, backend=backend)
        rho = rho0.copy()
        stepper.advance(rho, dt, 10)  # warm up
        steps = 0
        block = max(10, 4000 // dim)
        start = time.perf_counter()
        while time.perf_counter() - start < seconds:
            stepper.advance(rho, dt, block)
            steps += block
        out[backend] = steps / (time.perf_counter() - start)
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dims", type=int, nargs="+", default=[8, 12, 16, 24, 32, 48, 64, 96, 128])
    parser.add_argument("--seconds", type=float, default=0.5, help="time budget per cell")
    args = parser.parse_args()

    backends = _kernels.available_backends()
    if "cython" not in backends:
        print("note: compiled kernel not built; benchmarking numpy only")
    header = f"{'dim':>5} " + "".join(f"{b + ' steps/s':>16}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>9}{'chosen':>9}"
    print(header)
    for dim in args.dims:
        rates = run(dim, args.seconds)
        line = f"{dim:>5} " + "".join(f"{rates[b]:>16.0f}" for b in backends)
        if len(backends) == 2:
            line += f"{rates['cython'] / rates['numpy']:>9.2f}"
            line += f"{_kernels.choose_backend(dim):>9}"
        print(line)


if __name__ == "__main__":
    main()
