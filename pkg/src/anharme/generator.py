"""Hierarchical solution of the frame-transformation generator.

The anti-Hermitian generator G = eps*G4 + eps^2*G6 removes the
number-non-conserving (non-secular) part of the anharmonicity order by
order.  Because the commutator of the harmonic Hamiltonian with a
normal-ordered monomial is proportional to that monomial,

    [H2, (a†)^m a^n (c†)^l c^p] = [(m-n) w_a + (l-p) w_c] * monomial,

each generator order is solved term by term: every monomial of the known
non-secular source reappears with its coefficient divided by the frequency
mismatch.  The same machinery transforms arbitrary system operators to first
order, which is what renormalizes the collapse operators downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .algebra import (
    Context,
    Monomial,
    OperatorPolynomial,
    commutator,
)

__all__ = [
    "EffectiveHamiltonian",
    "Generator",
    "QuadraticSpectrum",
    "ResonantDenominator",
    "anharmonic_series_term",
    "quadrature_sum",
    "solve_generator4",
    "solve_generator6",
    "transform_first_order",
    "transform_state_first_order",
]

RESONANCE_RTOL = 1e-9


class ResonantDenominator(ArithmeticError):
    """A monomial's frequency mismatch vanished; the generator is singular."""

    def __init__(self, monomial: Monomial, delta):
        self.monomial = monomial
        self.delta = delta
        super().__init__(
            f"resonant denominator {delta} for monomial {tuple(monomial)}; "
            "normal-mode frequencies are (nearly) commensurate"
        )


@dataclass(frozen=True)
class QuadraticSpectrum:
    """Positive normal-mode frequencies, one per mode id in order."""

    frequencies: tuple

    def __init__(self, frequencies: Sequence):
        object.__setattr__(self, "frequencies", tuple(frequencies))
        if any(not (w > 0) for w in self.frequencies):
            raise ValueError("all frequencies must be positive")

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    def h2(self, context: Context) -> OperatorPolynomial:
        """Harmonic Hamiltonian sum_k w_k (n_k + 1/2)."""
        half = Fraction(1, 2) if context.exact else 0.5
        out = context.zero()
        for mode, w in enumerate(self.frequencies):
            out = out + (context.number(mode) + context.scalar(half)) * w
        return out

    def mismatch(self, monomial: Monomial):
        """Frequency mismatch sum_k (m_k - n_k) w_k of a monomial."""
        total = 0
        for (m, n), w in zip(monomial, self.frequencies):
            total += (m - n) * w
        return total


def solve_generator4(
    spectrum: QuadraticSpectrum, nonsecular: OperatorPolynomial
) -> OperatorPolynomial:
    """Solve [H2, G4] = nonsecular term by term.

    Every monomial of ``nonsecular`` must be non-secular; its coefficient is
    divided by the frequency mismatch.  Raises :class:`ResonantDenominator`
    when a mismatch is zero (exact mode) or below ``RESONANCE_RTOL`` times
    the largest frequency (float mode).
    """
    ctx = nonsecular.context
    if spectrum.n_modes != ctx.n_modes:
        raise ValueError("spectrum and polynomial mode counts differ")
    tol = RESONANCE_RTOL * max(float(w) for w in spectrum.frequencies)
    terms = {}
    for mono, c in nonsecular.terms.items():
        if mono.is_secular():
            raise ValueError(f"monomial {tuple(mono)} is secular and cannot be removed")
        delta = spectrum.mismatch(mono)
        if abs(float(delta)) < tol:
            raise ResonantDenominator(mono, delta)
        terms[mono] = c / delta
    return OperatorPolynomial(ctx, terms)


def solve_generator6(
    spectrum: QuadraticSpectrum,
    s4: OperatorPolynomial,
    n4: OperatorPolynomial,
    g4: OperatorPolynomial,
    n6: OperatorPolynomial,
    s6: OperatorPolynomial,
    epsilon,
) -> tuple:
    """Second-order step of the hierarchy.

    With the first-order generator known, the remaining non-secular content
    at second order is N6 - [S4, G4] - (1/2) Nonsec([N4, G4]); G6 cancels it.
    Returns ``(g6, h_eff2)`` where the second-order effective Hamiltonian is
    H2 - eps*S4 + eps^2*(S6 - (1/2) Sec([N4, G4])), diagonal in the number
    basis.
    """
    ctx = g4.context
    half = Fraction(1, 2) if ctx.exact else 0.5
    cross = commutator(n4, g4)
    cross_sec, cross_nonsec = cross.split_secular()
    source = commutator(s4, g4) + cross_nonsec * half - n6
    g6 = solve_generator4(spectrum, source)

    eps = _as_epsilon(ctx, epsilon)
    h_second = (s6 - cross_sec * half) * (eps * eps)
    h_poly = spectrum.h2(ctx) - s4 * eps + h_second
    return g6, EffectiveHamiltonian.from_secular(h_poly)


def _as_epsilon(context: Context, epsilon):
    if context.exact:
        if isinstance(epsilon, float):
            raise TypeError("pass epsilon as a Fraction/int in exact mode")
        return Fraction(epsilon)
    return float(epsilon)


def transform_first_order(
    op: OperatorPolynomial, g4: OperatorPolynomial, epsilon
) -> OperatorPolynomial:
    """First-order frame transform of a system operator: op + eps*[op, G4]."""
    eps = _as_epsilon(op.context, epsilon)
    return op + commutator(op, g4) * eps


def transform_state_first_order(
    rho: np.ndarray, g4_matrix: np.ndarray, epsilon: float
) -> np.ndarray:
    """First-order frame transform of a density matrix.

    Returns rho + eps*[rho, G4], renormalized to unit trace.  The commutator
    is traceless, so the renormalization only absorbs float round-off; it is
    kept because the first-order map is not exactly positivity-preserving.
    """
    rho = np.asarray(rho)
    g4_matrix = np.asarray(g4_matrix)
    if rho.shape != g4_matrix.shape or rho.shape[0] != rho.shape[1]:
        raise ValueError("rho and G4 must be square matrices of equal dimension")
    out = rho + epsilon * (rho @ g4_matrix - g4_matrix @ rho)
    return out / np.trace(out).real


@dataclass(frozen=True)
class Generator:
    """Frame-transformation generator: per-order polynomials plus the bound
    expansion parameter."""

    order4: OperatorPolynomial
    epsilon: object
    order6: Optional[OperatorPolynomial] = None

    def validate(self) -> None:
        """Check the defining structure: anti-Hermitian and purely non-secular."""
        for poly in filter(None, (self.order4, self.order6)):
            if poly.dagger() != -poly:
                raise ValueError("generator order is not anti-Hermitian")
            if not poly.secular_part().is_zero():
                raise ValueError("generator order contains secular terms")

    def combined(self) -> OperatorPolynomial:
        """eps*G4 (+ eps^2*G6): the full generator at its bound epsilon."""
        eps = _as_epsilon(self.order4.context, self.epsilon)
        out = self.order4 * eps
        if self.order6 is not None:
            out = out + self.order6 * (eps * eps)
        return out


@lru_cache(maxsize=None)
def _falling_factorial_coeffs(k: int) -> tuple:
    """Integer coefficients of x(x-1)...(x-k+1) by ascending power of x."""
    coeffs = [1]
    for i in range(k):
        shifted = [0] + coeffs
        coeffs = [s - i * c for s, c in zip(shifted, coeffs + [0])]
    return tuple(coeffs)


class EffectiveHamiltonian:
    """Diagonal Hamiltonian as a real polynomial in the mode number operators.

    Stored as {per-mode powers of n: coefficient}.  The constant (identity)
    term is retained in the data; matrix builders skip it by default since it
    is a global phase.
    """

    __slots__ = ("n_modes", "terms")

    def __init__(self, n_modes: int, terms: dict):
        self.n_modes = n_modes
        self.terms = {
            tuple(int(p) for p in powers): c
            for powers, c in terms.items()
            if c != 0
        }

    @classmethod
    def from_secular(cls, poly: OperatorPolynomial) -> "EffectiveHamiltonian":
        """Convert a secular polynomial, rewriting a†^k a^k per mode as the
        falling factorial n(n-1)...(n-k+1)."""
        if not poly.nonsecular_part().is_zero():
            raise ValueError("polynomial has non-secular terms")
        n_modes = poly.context.n_modes
        acc: dict = {}
        for mono, c in poly.terms.items():
            c_real = _real_coefficient(poly.context, c)
            expansions = [_falling_factorial_coeffs(m) for m, _ in mono]
            _accumulate_products(acc, expansions, c_real)
        return cls(n_modes, acc)

    def coefficient(self, powers):
        return self.terms.get(tuple(powers), 0)

    def energy(self, levels: Sequence[int]) -> float:
        """Eigenvalue at the Fock occupation ``levels`` (constant included)."""
        total = 0.0
        for powers, c in self.terms.items():
            term = float(c)
            for lv, p in zip(levels, powers):
                term *= lv**p
            total += term
        return total

    def to_matrix(self, dims, include_constant: bool = False) -> np.ndarray:
        """Diagonal matrix over the truncated Fock product basis (mode 0
        slowest index)."""
        if isinstance(dims, int):
            dims = (dims,)
        if len(dims) != self.n_modes:
            raise ValueError("one dimension per mode required")
        grids = np.meshgrid(*[np.arange(d) for d in dims], indexing="ij")
        diag = np.zeros(tuple(dims), dtype=float)
        for powers, c in self.terms.items():
            if not include_constant and all(p == 0 for p in powers):
                continue
            term = float(c) * np.ones_like(diag)
            for grid, p in zip(grids, powers):
                if p:
                    term = term * grid.astype(float) ** p
            diag += term
        return np.diag(diag.reshape(-1)).astype(complex)

    def transition_energy(self, upper: Sequence[int], lower: Sequence[int]) -> float:
        return self.energy(upper) - self.energy(lower)

    def sorted_terms(self) -> list:
        return sorted(self.terms.items())

    def to_json_list(self) -> list:
        out = []
        for powers, c in self.sorted_terms():
            val = str(c) if isinstance(c, (Fraction, int)) else float(c)
            out.append({"powers": list(powers), "coefficient": val})
        return out

    def __eq__(self, other):
        if not isinstance(other, EffectiveHamiltonian):
            return NotImplemented
        return self.n_modes == other.n_modes and self.terms == other.terms

    def __repr__(self):
        bits = []
        for powers, c in self.sorted_terms():
            mono = " ".join(
                f"n{k}^{p}" if p > 1 else f"n{k}" for k, p in enumerate(powers) if p
            )
            bits.append(f"({c})·{mono or '1'}")
        return " + ".join(bits) or "EffectiveHamiltonian(0)"


def _real_coefficient(context: Context, c):
    if context.exact:
        if c.im != 0:
            raise ValueError("effective Hamiltonian coefficient is not real")
        return c.re
    if abs(c.imag) > 1e-12 * max(1.0, abs(c.real)):
        raise ValueError("effective Hamiltonian coefficient is not real")
    return c.real


def _accumulate_products(acc: dict, expansions: list, scale) -> None:
    """acc += scale * prod_k (sum_j expansions[k][j] n_k^j), expanded."""
    stack = [(scale, ())]
    for coeffs in expansions:
        stack = [
            (value * coeff, powers + (j,))
            for value, powers in stack
            for j, coeff in enumerate(coeffs)
            if coeff != 0
        ]
    for value, powers in stack:
        acc[powers] = acc.get(powers, 0) + value


def quadrature_sum(context: Context, weights: Sequence) -> OperatorPolynomial:
    """Weighted sum of mode X quadratures: sum_k w_k (a_k + a_k†)."""
    out = context.zero()
    for mode, w in enumerate(weights):
        out = out + context.x(mode) * w
    return out


def anharmonic_series_term(
    context: Context, weights: Sequence, order: int, omega_bar
) -> OperatorPolynomial:
    """Magnitude of the 2*order-degree term of the cosine-series potential.

    The potential expands as (omega_bar/2) * sum_{k>=2} (-eps)^(k-1)
    Q^(2k) / (2k)!, with Q the weighted quadrature sum; this returns
    (omega_bar/2) * Q^(2*order) / (2*order)! and leaves the alternating sign
    and epsilon powers to the caller.  order=2 gives the quartic term with
    prefactor omega_bar/48, order=3 the sextic with omega_bar/1440.
    """
    if order < 2:
        raise ValueError("series starts at the quartic term (order 2)")
    q = quadrature_sum(context, weights)
    power = q ** (2 * order)
    if context.exact:
        scale = Fraction(omega_bar) / (2 * math.factorial(2 * order))
    else:
        scale = float(omega_bar) / (2.0 * math.factorial(2 * order))
    return power * scale
