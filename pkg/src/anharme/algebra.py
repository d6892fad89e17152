"""Exact symbolic algebra over normal-ordered multi-mode bosonic polynomials.

Every operator is stored as a map from normal-ordered monomials
``(a†_0)^m0 a_0^n0 (a†_1)^m1 a_1^n1 ...`` to coefficients.  Coefficients are
either exact complex rationals (``ExactComplex``, pairs of
:class:`fractions.Fraction`) or plain ``complex``; the choice is fixed per
:class:`Context`.  Products are re-normal-ordered with the commutation rule
``[a, a†] = 1`` applied exhaustively, so the normal-ordered map is the one
canonical form: equal operators always have identical maps.

All values are immutable after construction and operations are pure
functions, so they can be shared freely across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "Context",
    "DegreeCapExceeded",
    "DimensionCapExceeded",
    "ExactComplex",
    "ModeMismatchError",
    "Monomial",
    "OperatorPolynomial",
    "commutator",
    "ladder_matrix",
    "poly_from_json",
    "poly_to_json",
    "quadrature_power_census",
]


class ModeMismatchError(ValueError):
    """Two polynomials from different algebra contexts were combined."""


class DegreeCapExceeded(ValueError):
    """A product would exceed the context degree cap (runaway expansion guard)."""


class DimensionCapExceeded(ValueError):
    """A matrix representation would exceed the context dimension cap."""


@dataclass(frozen=True)
class ExactComplex:
    """Complex number with exact rational real and imaginary parts."""

    re: Fraction
    im: Fraction

    @staticmethod
    def of(value) -> "ExactComplex":
        """Coerce an int, Fraction, (re, im) pair or ExactComplex.

        Floats are rejected on purpose: exact mode performs no rounding.
        """
        if isinstance(value, ExactComplex):
            return value
        if isinstance(value, (int, Fraction)):
            return ExactComplex(Fraction(value), Fraction(0))
        if isinstance(value, tuple) and len(value) == 2:
            return ExactComplex(Fraction(value[0]), Fraction(value[1]))
        raise TypeError(f"cannot use {value!r} as an exact coefficient")

    def __add__(self, other: "ExactComplex") -> "ExactComplex":
        return ExactComplex(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ExactComplex") -> "ExactComplex":
        return ExactComplex(self.re - other.re, self.im - other.im)

    def __mul__(self, other) -> "ExactComplex":
        if isinstance(other, ExactComplex):
            return ExactComplex(
                self.re * other.re - self.im * other.im,
                self.re * other.im + self.im * other.re,
            )
        if isinstance(other, (int, Fraction)):
            return ExactComplex(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ExactComplex":
        if isinstance(other, (int, Fraction)):
            return ExactComplex(self.re / other, self.im / other)
        if isinstance(other, ExactComplex):
            den = other.re * other.re + other.im * other.im
            return ExactComplex(
                (self.re * other.re + self.im * other.im) / den,
                (self.im * other.re - self.re * other.im) / den,
            )
        return NotImplemented

    def __neg__(self) -> "ExactComplex":
        return ExactComplex(-self.re, -self.im)

    def conjugate(self) -> "ExactComplex":
        return ExactComplex(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"({self.re})+({self.im})i"


EXACT_ZERO = ExactComplex(Fraction(0), Fraction(0))

# Relative magnitude below which float-mode coefficients are treated as
# cancellation round-off and dropped.
FLOAT_CHOP = 1e-14


class Monomial(tuple):
    """Normal-ordered monomial: per-mode pairs ``(dag_power, low_power)``.

    The tuple has one ``(m, n)`` entry per mode of the owning context, mode
    ids in ascending order.  A monomial is secular iff ``m == n`` for every
    mode.
    """

    __slots__ = ()

    def __new__(cls, exponents: Iterable[tuple]):
        pairs = tuple((int(m), int(n)) for m, n in exponents)
        if any(m < 0 or n < 0 for m, n in pairs):
            raise ValueError("exponents must be non-negative")
        return super().__new__(cls, pairs)

    @property
    def degree(self) -> int:
        return sum(m + n for m, n in self)

    def is_secular(self) -> bool:
        return all(m == n for m, n in self)

    def dagger(self) -> "Monomial":
        # (a†^m a^n)† = a†^n a^m: still normal-ordered, no re-sorting needed.
        return Monomial((n, m) for m, n in self)


def _identity_monomial(n_modes: int) -> Monomial:
    return Monomial(((0, 0),) * n_modes)


def mode_letter(mode: int) -> str:
    """Display letter per mode: 0 is the qubit-like 'a', 1 the cavity-like 'c'."""
    return {0: "a", 1: "c"}.get(mode, f"m{mode}")


@lru_cache(maxsize=None)
def _mode_product(d1: int, l1: int, d2: int, l2: int) -> tuple:
    """Single-mode normal ordering of (a†^d1 a^l1)(a†^d2 a^l2).

    a^l a†^d = sum_k k! C(l,k) C(d,k) a†^(d-k) a^(l-k), hence the product
    expands into the returned tuple of (integer factor, dag_power, low_power).
    """
    terms = []
    for k in range(min(l1, d2) + 1):
        factor = math.comb(l1, k) * math.comb(d2, k) * math.factorial(k)
        terms.append((factor, d1 + d2 - k, l1 + l2 - k))
    return tuple(terms)


@dataclass(frozen=True)
class Context:
    """Algebra context: mode count, coefficient arithmetic, safety caps."""

    n_modes: int
    exact: bool = True
    degree_cap: int = 8
    matrix_dim_cap: int = 4096

    def __post_init__(self):
        if self.n_modes < 1:
            raise ValueError("need at least one mode")

    # -- coefficient helpers -------------------------------------------------

    def coeff(self, value):
        if self.exact:
            return ExactComplex.of(value)
        if isinstance(value, ExactComplex):
            return complex(value)
        return complex(value)

    def _zero_coeff(self):
        return EXACT_ZERO if self.exact else 0j

    # -- constructors --------------------------------------------------------

    def zero(self) -> "OperatorPolynomial":
        return OperatorPolynomial(self, {})

    def one(self) -> "OperatorPolynomial":
        return self.scalar(1)

    def scalar(self, value) -> "OperatorPolynomial":
        c = self.coeff(value)
        return OperatorPolynomial(self, {_identity_monomial(self.n_modes): c})

    def polynomial(self, terms: Mapping) -> "OperatorPolynomial":
        """Build from {exponent tuple: coefficient}; input must be the
        normal-ordered exponents (the canonical storage form)."""
        out = {}
        for exps, value in terms.items():
            mono = exps if isinstance(exps, Monomial) else Monomial(exps)
            if len(mono) != self.n_modes:
                raise ModeMismatchError(
                    f"monomial has {len(mono)} modes, context has {self.n_modes}"
                )
            c = self.coeff(value)
            if mono in out:
                c = out[mono] + c
            out[mono] = c
        return OperatorPolynomial(self, out)

    def _single(self, mode: int, m: int, n: int) -> "OperatorPolynomial":
        if not 0 <= mode < self.n_modes:
            raise ModeMismatchError(f"mode {mode} outside context of {self.n_modes} modes")
        exps = [(0, 0)] * self.n_modes
        exps[mode] = (m, n)
        return self.polynomial({tuple(exps): 1})

    def lowering(self, mode: int = 0) -> "OperatorPolynomial":
        return self._single(mode, 0, 1)

    def raising(self, mode: int = 0) -> "OperatorPolynomial":
        return self._single(mode, 1, 0)

    def number(self, mode: int = 0) -> "OperatorPolynomial":
        return self._single(mode, 1, 1)

    def x(self, mode: int = 0) -> "OperatorPolynomial":
        """Quadrature X = a + a†."""
        return self.lowering(mode) + self.raising(mode)

    def y(self, mode: int = 0) -> "OperatorPolynomial":
        """Quadrature Y = -i (a - a†)."""
        minus_i = (0, -1) if self.exact else -1j
        plus_i = (0, 1) if self.exact else 1j
        return self.lowering(mode) * minus_i + self.raising(mode) * plus_i


class OperatorPolynomial:
    """Sum of normal-ordered bosonic monomials with exact or float coefficients.

    Instances are immutable; arithmetic returns new objects.  Zero
    coefficients are dropped on construction so equal operators compare equal
    through their term maps.  Float mode additionally chops coefficients
    below ``FLOAT_CHOP`` relative to the largest magnitude in the polynomial
    (cancellation dust from re-normal-ordering); exact mode never rounds.
    """

    __slots__ = ("context", "_terms")

    def __init__(self, context: Context, terms: dict):
        self.context = context
        if context.exact:
            cleaned = {m: c for m, c in terms.items() if not c.is_zero()}
        else:
            scale = max((abs(c) for c in terms.values()), default=0.0)
            floor = scale * FLOAT_CHOP
            cleaned = {m: c for m, c in terms.items() if c != 0 and abs(c) > floor}
        self._terms = cleaned

    # -- basic queries ---------------------------------------------------

    @property
    def terms(self) -> dict:
        """Monomial -> coefficient map (treat as read-only)."""
        return self._terms

    def sorted_terms(self) -> list:
        """Deterministic canonical ordering of (monomial, coefficient)."""
        return sorted(self._terms.items(), key=lambda kv: kv[0])

    def is_zero(self) -> bool:
        return not self._terms

    @property
    def degree(self) -> int:
        return max((m.degree for m in self._terms), default=0)

    def coefficient(self, exponents):
        mono = exponents if isinstance(exponents, Monomial) else Monomial(exponents)
        return self._terms.get(mono, self.context._zero_coeff())

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self.context == other.context and self._terms == other._terms

    def __hash__(self):
        return hash((self.context, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        if self.is_zero():
            return "OperatorPolynomial(0)"
        bits = []
        for mono, c in self.sorted_terms():
            ops = []
            for mode, (m, n) in enumerate(mono):
                name = mode_letter(mode)
                if m:
                    ops.append(f"{name}†^{m}" if m > 1 else f"{name}†")
                if n:
                    ops.append(f"{name}^{n}" if n > 1 else name)
            bits.append(f"({c})·{' '.join(ops) or '1'}")
        return " + ".join(bits)

    def _check_context(self, other: "OperatorPolynomial"):
        if self.context != other.context:
            raise ModeMismatchError("operands come from different algebra contexts")

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        self._check_context(other)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out[mono] + c if mono in out else c
        return OperatorPolynomial(self.context, out)

    def __sub__(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        return self + (-other)

    def __neg__(self) -> "OperatorPolynomial":
        return OperatorPolynomial(self.context, {m: -c for m, c in self._terms.items()})

    def __mul__(self, other) -> "OperatorPolynomial":
        if isinstance(other, OperatorPolynomial):
            return self._mul_poly(other)
        c = self.context.coeff(other)
        return OperatorPolynomial(self.context, {m: v * c for m, v in self._terms.items()})

    def __rmul__(self, other) -> "OperatorPolynomial":
        return self.__mul__(other)

    def __pow__(self, exponent: int) -> "OperatorPolynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("only non-negative integer powers")
        out = self.context.one()
        for _ in range(exponent):
            out = out * self
        return out

    def _mul_poly(self, other: "OperatorPolynomial") -> "OperatorPolynomial":
        self._check_context(other)
        cap = self.context.degree_cap
        if self.degree + other.degree > cap:
            raise DegreeCapExceeded(
                f"product degree {self.degree + other.degree} exceeds cap {cap}"
            )
        n_modes = self.context.n_modes
        acc: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                base = c1 * c2
                # Per-mode expansions are independent; combine them.
                per_mode = [
                    _mode_product(m1[k][0], m1[k][1], m2[k][0], m2[k][1])
                    for k in range(n_modes)
                ]
                for combo in _cartesian_terms(per_mode):
                    factor, exps = combo
                    mono = Monomial(exps)
                    c = base * factor
                    acc[mono] = acc[mono] + c if mono in acc else c
        return OperatorPolynomial(self.context, acc)

    def dagger(self) -> "OperatorPolynomial":
        """Hermitian conjugate (coefficients conjugated, exponents swapped)."""
        return OperatorPolynomial(
            self.context,
            {m.dagger(): c.conjugate() for m, c in self._terms.items()},
        )

    def is_hermitian(self) -> bool:
        return self.dagger() == self

    # -- secular structure ---------------------------------------------------

    def split_secular(self) -> tuple:
        """(secular, nonsecular): secular keeps exactly the m == n monomials."""
        sec, nonsec = {}, {}
        for mono, c in self._terms.items():
            (sec if mono.is_secular() else nonsec)[mono] = c
        return (
            OperatorPolynomial(self.context, sec),
            OperatorPolynomial(self.context, nonsec),
        )

    def secular_part(self) -> "OperatorPolynomial":
        return self.split_secular()[0]

    def nonsecular_part(self) -> "OperatorPolynomial":
        return self.split_secular()[1]

    # -- matrix representation -------------------------------------------

    def to_matrix(self, dims) -> np.ndarray:
        """Dense matrix in the tensor-product Fock basis, mode 0 slowest.

        ``dims`` gives the per-mode truncation (an int for one mode, else a
        sequence).  Lowering operators are truncated to the standard ladder
        matrix of the given dimension.
        """
        if isinstance(dims, int):
            dims = (dims,)
        dims = tuple(int(d) for d in dims)
        if len(dims) != self.context.n_modes:
            raise ModeMismatchError("one truncation dimension required per mode")
        if any(d < 1 for d in dims):
            raise ValueError("truncation dims must be >= 1")
        total = math.prod(dims)
        if total > self.context.matrix_dim_cap:
            raise DimensionCapExceeded(
                f"total dimension {total} exceeds cap {self.context.matrix_dim_cap}"
            )
        out = np.zeros((total, total), dtype=complex)
        for mono, c in self._terms.items():
            mat = np.eye(1, dtype=complex)
            for (m, n), d in zip(mono, dims):
                mat = np.kron(mat, _ladder_power(d, m, n))
            out += complex(c) * mat
        return out

    # -- serialization --------------------------------------------------------

    def to_json(self) -> list:
        """Stable JSON form: list of {exponents, re, im}.

        Exact coefficients serialize as "p/q" strings (lossless round-trip);
        float coefficients as JSON numbers (repr round-trip).
        """
        out = []
        for mono, c in self.sorted_terms():
            entry = {"exponents": [[m, n] for m, n in mono]}
            if self.context.exact:
                entry["re"] = str(c.re)
                entry["im"] = str(c.im)
            else:
                entry["re"] = c.real
                entry["im"] = c.imag
            out.append(entry)
        return out


def _cartesian_terms(per_mode):
    """Combine per-mode (factor, m, n) expansions into full-monomial terms."""
    stack = [(1, ())]
    for options in per_mode:
        stack = [
            (f * g, exps + ((m, n),))
            for f, exps in stack
            for g, m, n in options
        ]
    return stack


def poly_to_json(p: OperatorPolynomial) -> list:
    return p.to_json()


def poly_from_json(context: Context, data: list) -> OperatorPolynomial:
    terms = {}
    for entry in data:
        mono = Monomial(tuple(e) for e in entry["exponents"])
        if context.exact:
            c = ExactComplex(Fraction(entry["re"]), Fraction(entry["im"]))
        else:
            c = complex(float(entry["re"]), float(entry["im"]))
        terms[mono] = c
    return OperatorPolynomial(context, terms)


def commutator(p: OperatorPolynomial, q: OperatorPolynomial) -> OperatorPolynomial:
    """[p, q] = pq - qp, normal-ordered."""
    return p * q - q * p


def ladder_matrix(dim: int) -> np.ndarray:
    """Standard truncated lowering matrix: <n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), k=1).astype(complex)


@lru_cache(maxsize=None)
def _ladder_power_cached(dim: int, m: int, n: int):
    a = ladder_matrix(dim)
    adag = a.conj().T
    mat = np.linalg.matrix_power(adag, m) @ np.linalg.matrix_power(a, n)
    mat.setflags(write=False)
    return mat


def _ladder_power(dim: int, m: int, n: int) -> np.ndarray:
    return _ladder_power_cached(dim, m, n)


def quadrature_power_census(n_modes: int, power: int) -> tuple:
    """Classify the raw operator strings of (sum_i (a_i + a_i†))^power.

    Expanding the power termwise (before any normal-ordering collection)
    gives ``(2 * n_modes) ** power`` operator strings; a string is secular
    iff it contains equally many raising and lowering letters for every
    mode.  Returns (total, secular, nonsecular) counts.
    """
    from itertools import product

    letters = [(mode, dag) for mode in range(n_modes) for dag in (0, 1)]
    total = secular = 0
    for string in product(letters, repeat=power):
        total += 1
        balance = [0] * n_modes
        for mode, dag in string:
            balance[mode] += 1 if dag else -1
        if all(b == 0 for b in balance):
            secular += 1
    return total, secular, total - secular
