"""Dense truncated-Fock-space Lindblad integration and validation checks.

The integrator is fixed-step RK4 for reproducibility (golden files must be
byte-stable); the stepping itself happens in a kernel backend selected at
import time (compiled extension when built, numpy otherwise).

For the effective flavor the initial state and the measured observables are
mapped through the first-order frame transform, so expectation values are
taken consistently in the transformed frame at all times.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .algebra import Context, mode_letter
from .generator import transform_state_first_order
from .models import EffectiveModel, Flavor

__all__ = [
    "FockTruncation",
    "FockSuperposition",
    "Occupation",
    "PhaseSpace",
    "ProductState",
    "QuadratureX",
    "QuadratureY",
    "SimulationConfig",
    "SimulationResult",
    "TruncationLeak",
    "Vacuum",
    "compare_flavors",
    "evolve",
    "quadrature_eom_check",
    "random_density_matrix",
]

TRUNCATION_LEAK_TOL = 1e-6


class TruncationLeak(RuntimeError):
    """Population reached the top of the truncated Fock space."""


@dataclass(frozen=True)
class FockTruncation:
    """Per-mode Fock-space dimensions; the product is capped."""

    dims: tuple
    cap: int = 4096

    def __init__(self, dims, cap: int = 4096):
        if isinstance(dims, int):
            dims = (dims,)
        dims = tuple(int(d) for d in dims)
        if any(d < 2 for d in dims):
            raise ValueError("each mode needs at least two levels")
        if math.prod(dims) > cap:
            raise ValueError(f"total dimension {math.prod(dims)} exceeds cap {cap}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "cap", cap)

    @property
    def total(self) -> int:
        return math.prod(self.dims)

    def mode_level_populations(self, rho: np.ndarray, mode: int) -> np.ndarray:
        """Populations of each Fock level of one mode (partial trace of the
        diagonal)."""
        diag = np.real(np.diagonal(rho)).reshape(self.dims)
        axes = tuple(k for k in range(len(self.dims)) if k != mode)
        return diag.sum(axis=axes) if axes else diag


# -- initial states ---------------------------------------------------------


@dataclass(frozen=True)
class Vacuum:
    def statevector(self, trunc: FockTruncation) -> np.ndarray:
        psi = np.zeros(trunc.total, dtype=complex)
        psi[0] = 1.0
        return psi


@dataclass(frozen=True)
class FockSuperposition:
    """Superposition over Fock levels of one mode, other modes in vacuum."""

    amplitudes: tuple
    mode: int = 0

    def __init__(self, amplitudes: Sequence, mode: int = 0):
        object.__setattr__(self, "amplitudes", tuple(complex(a) for a in amplitudes))
        object.__setattr__(self, "mode", int(mode))

    def statevector(self, trunc: FockTruncation) -> np.ndarray:
        factors = []
        for k, d in enumerate(trunc.dims):
            vec = np.zeros(d, dtype=complex)
            if k == self.mode:
                if len(self.amplitudes) > d:
                    raise ValueError("initial state does not fit the truncation")
                vec[: len(self.amplitudes)] = self.amplitudes
            else:
                vec[0] = 1.0
            factors.append(vec)
        psi = factors[0]
        for vec in factors[1:]:
            psi = np.kron(psi, vec)
        return psi / np.linalg.norm(psi)


@dataclass(frozen=True)
class ProductState:
    """Tensor product of per-mode Fock superpositions."""

    factors: tuple

    def __init__(self, factors: Sequence[Sequence]):
        object.__setattr__(
            self, "factors", tuple(tuple(complex(a) for a in f) for f in factors)
        )

    def statevector(self, trunc: FockTruncation) -> np.ndarray:
        if len(self.factors) != len(trunc.dims):
            raise ValueError("one amplitude list per mode required")
        psi = np.ones(1, dtype=complex)
        for amps, d in zip(self.factors, trunc.dims):
            if len(amps) > d:
                raise ValueError("initial state does not fit the truncation")
            vec = np.zeros(d, dtype=complex)
            vec[: len(amps)] = amps
            psi = np.kron(psi, vec)
        return psi / np.linalg.norm(psi)


# -- observables -------------------------------------------------------------


@dataclass(frozen=True)
class Occupation:
    mode: int = 0

    @property
    def name(self) -> str:
        return f"n_{mode_letter(self.mode)}"

    def polynomial(self, context: Context):
        return context.number(self.mode)


@dataclass(frozen=True)
class QuadratureX:
    mode: int = 0

    @property
    def name(self) -> str:
        return f"x_{mode_letter(self.mode)}"

    def polynomial(self, context: Context):
        return context.x(self.mode)


@dataclass(frozen=True)
class QuadratureY:
    mode: int = 0

    @property
    def name(self) -> str:
        return f"y_{mode_letter(self.mode)}"

    def polynomial(self, context: Context):
        return context.y(self.mode)


@dataclass(frozen=True)
class PhaseSpace:
    """Convenience pair: expands to the X and Y quadratures of a mode."""

    mode: int = 0

    def expand(self) -> tuple:
        return (QuadratureX(self.mode), QuadratureY(self.mode))


def _expand_observables(observables) -> list:
    out = []
    for obs in observables:
        if isinstance(obs, PhaseSpace):
            out.extend(obs.expand())
        else:
            out.append(obs)
    return out


@dataclass
class SimulationConfig:
    t_final: float
    dt: Optional[float] = None
    record_every: int = 1
    observables: tuple = (Occupation(0),)
    initial_state: object = Vacuum()
    apply_frame_transform: bool = True
    positivity_check_every: int = 0
    backend: Optional[str] = None

    def __post_init__(self):
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.dt is not None and self.t_final < self.dt:
            raise ValueError("t_final must be at least one step")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass
class SimulationResult:
    times: np.ndarray
    columns: dict
    stats: dict
    final_rho: np.ndarray = field(repr=False, default=None)

    def series(self, name: str) -> np.ndarray:
        return self.columns[name]


def _default_dt(model: EffectiveModel) -> float:
    freqs = [
        abs(float(c))
        for powers, c in model.hamiltonian.terms.items()
        if sum(powers) == 1
    ]
    w_max = max(freqs, default=1.0)
    return (2.0 * math.pi / w_max) / 200.0


def _transformed_frame(model: EffectiveModel, config: SimulationConfig) -> bool:
    return (
        config.apply_frame_transform
        and model.flavor is Flavor.EFFECTIVE
        and model.generator is not None
    )


def evolve(
    model: EffectiveModel, trunc: FockTruncation, config: SimulationConfig
) -> SimulationResult:
    """Integrate the master equation and record observables.

    Raises :class:`TruncationLeak` as soon as the top two Fock levels of any
    mode accumulate more than 1e-6 population at a record point.
    """
    if not isinstance(trunc, FockTruncation):
        trunc = FockTruncation(trunc)
    dims = trunc.dims
    if len(dims) != model.n_modes:
        raise ValueError("truncation must give one dimension per mode")

    h = model.hamiltonian_matrix(dims)
    pairs = model.collapse_matrices(dims)
    stepper = _kernels.make_stepper(h, pairs, backend=config.backend)

    psi = config.initial_state.statevector(trunc)
    rho = np.outer(psi, psi.conj())
    rho = np.ascontiguousarray(rho, dtype=complex)

    obs_list = _expand_observables(config.observables)
    obs_ctx = Context(n_modes=model.n_modes, exact=False)
    obs_mats = {o.name: o.polynomial(obs_ctx).to_matrix(dims) for o in obs_list}

    if _transformed_frame(model, config):
        g4 = model.generator_matrix(dims)
        eps = float(model.generator.epsilon)
        rho = transform_state_first_order(rho, g4, eps)
        rho = np.ascontiguousarray(rho, dtype=complex)
        obs_mats = {
            name: mat + eps * (mat @ g4 - g4 @ mat) for name, mat in obs_mats.items()
        }

    dt = config.dt if config.dt is not None else _default_dt(model)
    n_steps = max(1, int(round(config.t_final / dt)))
    record_every = config.record_every

    times = [0.0]
    columns = {name: [] for name in obs_mats}
    trace_drift = 0.0
    herm_drift = 0.0
    min_eig = np.inf
    records = 0

    def record(step: int):
        nonlocal trace_drift, herm_drift, min_eig, records
        records += 1
        drift = float(np.max(np.abs(rho - rho.conj().T)))
        herm_drift = max(herm_drift, drift)
        rho[...] = 0.5 * (rho + rho.conj().T)
        trace_drift = max(trace_drift, abs(float(np.trace(rho).real) - 1.0))
        for mode in range(model.n_modes):
            pops = trunc.mode_level_populations(rho, mode)
            if pops[-2:].sum() > TRUNCATION_LEAK_TOL:
                raise TruncationLeak(
                    f"mode {mode} top-level population {pops[-2:].sum():.2e} at "
                    f"step {step}; increase the truncation"
                )
        if config.positivity_check_every and records % config.positivity_check_every == 0:
            lowest = float(np.linalg.eigvalsh(rho)[0])
            min_eig = min(min_eig, lowest)
            if lowest < -1e-8:
                warnings.warn(
                    f"density matrix developed eigenvalue {lowest:.2e} "
                    "(first-order master equations are not exactly CP)",
                    stacklevel=2,
                )
        for name, mat in obs_mats.items():
            columns[name].append(float(np.trace(rho @ mat).real))

    record(0)
    done = 0
    while done < n_steps:
        chunk = min(record_every, n_steps - done)
        stepper.advance(rho, dt, chunk)
        done += chunk
        times.append(done * dt)
        record(done)

    stats = {
        "dt": dt,
        "n_steps": n_steps,
        "trace_drift": trace_drift,
        "hermiticity_drift": herm_drift,
        "backend": stepper.backend,
    }
    if math.isfinite(min_eig):
        stats["min_eigenvalue"] = min_eig
    return SimulationResult(
        times=np.asarray(times),
        columns={k: np.asarray(v) for k, v in columns.items()},
        stats=stats,
        final_rho=rho,
    )


def compare_flavors(
    models: dict, trunc: FockTruncation, config: SimulationConfig
) -> dict:
    """Run several flavors of the same model under one shared configuration.

    ``models`` maps flavor name to EffectiveModel.  Each evolution starts
    from the identically prepared state; the effective flavor additionally
    applies the frame transform when enabled.  An unset time step is bound
    once for all flavors (their default steps differ because the corrected
    frequencies differ), keeping the series aligned.
    """
    if config.dt is None:
        dt = min(_default_dt(model) for model in models.values())
        config = replace(config, dt=dt)
    results = {}
    for name, model in models.items():
        results[name] = evolve(model, trunc, config)
    times = [r.times for r in results.values()]
    for t in times[1:]:
        if t.shape != times[0].shape or not np.allclose(t, times[0]):
            raise RuntimeError("flavor series are not aligned")
    return results


# -- validation helpers ------------------------------------------------------


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Full-rank random density matrix (Wishart construction)."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def quadrature_eom_check(
    epsilon: float,
    omega_a: float,
    kappa_a: float,
    trunc: FockTruncation,
    rho_samples: Sequence[np.ndarray],
) -> float:
    """Check the analytic quadrature equations of motion against the
    single-photon effective master equation.

    For each sampled state the instantaneous d<X>/dt and d<Y>/dt computed
    from the Lindblad right-hand side are compared with

        d<X>/dt = -kappa <X + (eps/8){H, X}> + omega <Y - (eps/8){H, Y}>
        d<Y>/dt = -kappa <Y + (eps/8){H, Y}> - omega <X - (eps/8){H, X}>

    The master equation here is the order-eps one: its dissipator is the
    bilinear expansion of D[(1 + (eps/8)(1 + n)) a] with the eps^2 block
    dropped, which is the accuracy at which the equation was derived and
    makes the identity exact.  Operators are built on an internally padded
    space so the truncation boundary never enters; returns the maximum
    absolute residual.
    """
    if not isinstance(trunc, FockTruncation):
        trunc = FockTruncation(trunc)
    if len(trunc.dims) != 1:
        raise ValueError("single-mode check")
    d = trunc.dims[0]
    pad = d + 4  # identity involves operators of degree <= 4

    a = np.diag(np.sqrt(np.arange(1, pad, dtype=float)), k=1).astype(complex)
    adag = a.conj().T
    n = adag @ a
    eye = np.eye(pad, dtype=complex)
    h_osc = n + 0.5 * eye
    x = a + adag
    y = -1j * (a - adag)

    h_eff = omega_a * (h_osc - (epsilon / 8.0) * h_osc @ h_osc)
    lam = epsilon / 16.0
    k_op = h_osc @ a + a @ h_osc  # {H, a} = 2 (1 + n) a
    rate = 2.0 * kappa_a

    def dissipator_first_order(rho):
        out = a @ rho @ adag - 0.5 * (n @ rho + rho @ n)
        cross = (
            a @ rho @ k_op.conj().T
            + k_op @ rho @ adag
            - 0.5 * ((k_op.conj().T @ a + adag @ k_op) @ rho)
            - 0.5 * (rho @ (k_op.conj().T @ a + adag @ k_op))
        )
        return rate * (out + lam * cross)

    def anticomm(p, q):
        return p @ q + q @ p

    x_plus = x + (epsilon / 8.0) * anticomm(h_osc, x)
    x_minus = x - (epsilon / 8.0) * anticomm(h_osc, x)
    y_plus = y + (epsilon / 8.0) * anticomm(h_osc, y)
    y_minus = y - (epsilon / 8.0) * anticomm(h_osc, y)

    worst = 0.0
    for rho_small in rho_samples:
        rho = np.zeros((pad, pad), dtype=complex)
        rho[:d, :d] = rho_small
        rhs = -1j * (h_eff @ rho - rho @ h_eff) + dissipator_first_order(rho)
        lhs_x = float(np.trace(x @ rhs).real)
        lhs_y = float(np.trace(y @ rhs).real)
        rhs_x = -kappa_a * np.trace(x_plus @ rho).real + omega_a * np.trace(
            y_minus @ rho
        ).real
        rhs_y = -kappa_a * np.trace(y_plus @ rho).real - omega_a * np.trace(
            x_minus @ rho
        ).real
        worst = max(worst, abs(lhs_x - rhs_x), abs(lhs_y - rhs_y))
    return worst
