"""Assembly of the linear, Kerr and effective master equations.

Two shipped setups:

* case "flux_bath": a single anharmonic mode whose X quadrature couples to a
  bath (pure relaxation);
* case "purcell": the anharmonic mode hybridized with one lossy resonator
  mode, the bath coupling entering through the bare resonator Y quadrature.

The effective flavor transforms the coupling quadrature to first order in
the anharmonicity, groups the resulting lowering monomials by their harmonic
Bohr frequency, and emits one collapse channel per group with rate S(omega)
evaluated at the group frequency (flat within O(epsilon) neighborhoods).
The Kerr flavor keeps the corrected Hamiltonian but the unrenormalized
dissipators; the linear flavor corrects neither.

Rate bookkeeping: ``CollapseTerm.rate`` always stores the full coefficient
multiplying the dissipator D[.], i.e. the "2*kappa = S(omega)" combination,
so no factor-two convention can drift between builders and the simulator.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .algebra import (
    Context,
    OperatorPolynomial,
    mode_letter,
    poly_from_json,
    poly_to_json,
)
from .generator import (
    EffectiveHamiltonian,
    Generator,
    QuadraticSpectrum,
    anharmonic_series_term,
    solve_generator4,
    solve_generator6,
    transform_first_order,
)
from .hybridize import BareModel, HybridizationResult, hybridize

__all__ = [
    "BathSpec",
    "CollapseTerm",
    "EffectiveModel",
    "FlatBath",
    "Flavor",
    "Representation",
    "ResonantNormalModes",
    "TabulatedBath",
    "TransitionCollapse",
    "build_case1",
    "build_case1_number_basis",
    "build_case2",
    "correction_signs",
    "model_from_json_dict",
    "transition_spectrum",
]


class Flavor(enum.Enum):
    LINEAR = "linear"
    KERR = "kerr"
    EFFECTIVE = "effective"


class Representation(enum.Enum):
    COMPACT = "compact"
    NUMBER_BASIS = "number_basis"


@dataclass(frozen=True)
class FlatBath:
    """Frequency-independent bath spectral density S(omega) = s0, T = 0."""

    s0: float

    def __post_init__(self):
        if self.s0 < 0:
            raise ValueError("spectral density must be non-negative")

    def spectral_density(self, omega: float) -> float:
        if omega <= 0:
            raise ValueError(f"spectral density queried at omega = {omega} <= 0")
        return self.s0


@dataclass(frozen=True)
class TabulatedBath:
    """Piecewise-linear S(omega) over a fixed table; queries outside the
    tabulated range are an error, not an extrapolation."""

    points: tuple

    def __post_init__(self):
        pts = tuple(sorted((float(w), float(s)) for w, s in self.points))
        if len(pts) < 2:
            raise ValueError("need at least two table points")
        if any(s < 0 for _, s in pts):
            raise ValueError("spectral density must be non-negative")
        object.__setattr__(self, "points", pts)

    def spectral_density(self, omega: float) -> float:
        ws = [w for w, _ in self.points]
        if omega < ws[0] or omega > ws[-1]:
            raise ValueError(
                f"omega = {omega} outside tabulated range [{ws[0]}, {ws[-1]}]"
            )
        return float(np.interp(omega, ws, [s for _, s in self.points]))


BathSpec = Union[FlatBath, TabulatedBath]


def _monomial_label(mono) -> str:
    bits = []
    for mode, (m, n) in enumerate(mono):
        name = mode_letter(mode)
        if m:
            bits.append(f"{name}†" + (f"^{m}" if m > 1 else ""))
        if n:
            bits.append(name + (f"^{n}" if n > 1 else ""))
    return " ".join(bits) or "1"


@dataclass(frozen=True)
class CollapseTerm:
    """Compact-form collapse channel: rate is the full D[.] coefficient
    (the 2*kappa = S(omega) combination), operator lowers the excitation."""

    label: str
    rate: float
    operator: OperatorPolynomial
    frequency: float = 0.0
    correction: Optional[OperatorPolynomial] = None

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        for mono in self.operator.terms:
            lowered = sum(n for _, n in mono)
            raised = sum(m for m, _ in mono)
            if lowered <= raised:
                raise ValueError(
                    f"collapse operator term {_monomial_label(mono)} does not "
                    "lower the total excitation"
                )

    def to_matrix(self, dims) -> np.ndarray:
        return self.operator.to_matrix(dims)

    def to_json_dict(self) -> dict:
        out = {
            "kind": "compact",
            "label": self.label,
            "rate": self.rate,
            "frequency": self.frequency,
            "operator": poly_to_json(self.operator),
        }
        if self.correction is not None:
            out["epsilon_correction"] = poly_to_json(self.correction)
        return out


@dataclass(frozen=True)
class TransitionCollapse:
    """Number-basis collapse channel |lower><upper| on a single mode."""

    label: str
    rate: float
    upper: int
    lower: int
    frequency: float = 0.0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("rate must be non-negative")
        if not 0 <= self.lower < self.upper:
            raise ValueError("transition must lower the excitation")

    def to_matrix(self, dims) -> np.ndarray:
        if isinstance(dims, int):
            dims = (dims,)
        if len(dims) != 1:
            raise ValueError("number-basis terms are single-mode")
        d = dims[0]
        mat = np.zeros((d, d), dtype=complex)
        if self.upper < d:
            mat[self.lower, self.upper] = 1.0
        return mat

    def to_json_dict(self) -> dict:
        return {
            "kind": "transition",
            "label": self.label,
            "rate": self.rate,
            "frequency": self.frequency,
            "upper": self.upper,
            "lower": self.lower,
        }


@dataclass
class EffectiveModel:
    """A master equation ready for simulation or serialization."""

    case: str
    flavor: Flavor
    representation: Representation
    context: Context
    hamiltonian: EffectiveHamiltonian
    collapse_terms: list
    generator: Optional[Generator] = None
    parameters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def n_modes(self) -> int:
        return self.context.n_modes

    def hamiltonian_matrix(self, dims) -> np.ndarray:
        return self.hamiltonian.to_matrix(dims)

    def collapse_matrices(self, dims) -> list:
        return [(term.rate, term.to_matrix(dims)) for term in self.collapse_terms]

    def generator_matrix(self, dims) -> Optional[np.ndarray]:
        if self.generator is None:
            return None
        return self.generator.order4.to_matrix(dims)

    def to_json_dict(self) -> dict:
        out = {
            "format": "anharme-effective-model",
            "version": 1,
            "case": self.case,
            "flavor": self.flavor.value,
            "representation": self.representation.value,
            "n_modes": self.context.n_modes,
            "exact": self.context.exact,
            "hamiltonian": self.hamiltonian.to_json_list(),
            "collapse_terms": [t.to_json_dict() for t in self.collapse_terms],
            "parameters": _jsonable(self.parameters),
            "metadata": _jsonable(self.metadata),
        }
        if self.generator is not None:
            out["generator_order4"] = poly_to_json(self.generator.order4)
            out["generator_epsilon"] = _jsonable(self.generator.epsilon)
            if self.generator.order6 is not None:
                out["generator_order6"] = poly_to_json(self.generator.order6)
        return out


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def as_fraction(value) -> Fraction:
    """Exact rational from user input; floats go through their shortest
    decimal repr, so 0.2 means 1/5."""
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


def _group_lowering_channels(
    transformed: OperatorPolynomial,
    spectrum: QuadraticSpectrum,
    bath: BathSpec,
    correction: Optional[OperatorPolynomial] = None,
) -> list:
    """Split a transformed coupling quadrature into collapse channels.

    Monomials are grouped by their harmonic Bohr frequency; each
    energy-lowering group becomes a channel with rate S(group frequency).
    The raising groups are the Hermitian partners and are dropped (T = 0
    bath).  Energy-lowering groups that do not also lower the excitation
    count (possible only at extreme detunings) are skipped to keep every
    collapse operator excitation-lowering.
    """
    ctx = transformed.context
    tol = 1e-9 * max(float(w) for w in spectrum.frequencies)
    groups: dict = {}
    for mono, c in transformed.terms.items():
        delta = float(spectrum.mismatch(mono))
        if delta >= -tol:
            continue
        freq = -delta
        for key in groups:
            if abs(key - freq) <= tol:
                freq = key
                break
        groups.setdefault(freq, {})[mono] = c

    channels = []
    for freq in sorted(groups):
        terms = groups[freq]
        if any(sum(n for _, n in mono) <= sum(m for m, _ in mono) for mono in terms):
            continue
        op = OperatorPolynomial(ctx, terms)
        corr = None
        if correction is not None:
            corr_terms = {m: c for m, c in correction.terms.items() if m in terms}
            corr = OperatorPolynomial(ctx, corr_terms)
        label = " + ".join(_monomial_label(m) for m in sorted(terms))
        channels.append(
            CollapseTerm(
                label=label,
                rate=bath.spectral_density(freq),
                operator=op,
                frequency=freq,
                correction=corr,
            )
        )
    return channels


def build_case1(
    epsilon, omega_a, bath: BathSpec, flavor: Flavor, order: int = 1
) -> EffectiveModel:
    """Master equation for the directly damped anharmonic mode.

    Exact-coefficient algebra throughout; the effective flavor carries the
    excitation-dependent single-photon channel and the three-photon channel,
    with rates S(omega_a) and S(3*omega_a).  ``order=2`` upgrades the
    Hamiltonian (and the stored generator) to second order in epsilon;
    collapse operators stay first order.
    """
    flavor = Flavor(flavor)
    eps = as_fraction(epsilon)
    if eps < 0:
        raise ValueError("epsilon must be non-negative")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    w = as_fraction(omega_a)
    ctx = Context(n_modes=1, exact=True)
    spectrum = QuadraticSpectrum([w])

    h2 = spectrum.h2(ctx)
    h4 = anharmonic_series_term(ctx, [1], 2, w)
    s4, n4 = h4.split_secular()
    g4 = solve_generator4(spectrum, n4)

    g6 = None
    if order == 2 and eps:
        h6 = anharmonic_series_term(ctx, [1], 3, w)
        s6, n6 = h6.split_secular()
        g6, h_eff = solve_generator6(spectrum, s4, n4, g4, n6, s6, eps)
    else:
        h_eff = EffectiveHamiltonian.from_secular(h2 - s4 * eps)
    h_lin = EffectiveHamiltonian.from_secular(h2)
    linear_channel = CollapseTerm(
        label="a",
        rate=bath.spectral_density(float(w)),
        operator=ctx.lowering(0),
        frequency=float(w),
    )

    params = {"case": "flux_bath", "epsilon": eps, "omega_a": w, "order": order}
    if flavor is Flavor.LINEAR:
        return EffectiveModel(
            "flux_bath", flavor, Representation.COMPACT, ctx, h_lin, [linear_channel],
            parameters=params,
        )
    if flavor is Flavor.KERR:
        return EffectiveModel(
            "flux_bath", flavor, Representation.COMPACT, ctx, h_eff, [linear_channel],
            parameters=params,
        )

    x = ctx.x(0)
    correction = transform_first_order(x, g4, 1) - x if eps else None
    transformed = transform_first_order(x, g4, eps)
    channels = _group_lowering_channels(transformed, spectrum, bath, correction)
    return EffectiveModel(
        "flux_bath",
        flavor,
        Representation.COMPACT,
        ctx,
        h_eff,
        channels,
        generator=Generator(order4=g4, epsilon=eps, order6=g6) if eps else None,
        parameters=params,
    )


def build_case1_number_basis(
    epsilon, omega_a, bath: BathSpec, n_levels: int
) -> EffectiveModel:
    """Number-basis (per-transition-rate) form of the flux-bath EME.

    Rates come from projecting the compact collapse operators onto the
    eigenbasis of the effective Hamiltonian: for each retained level n the
    single-photon rate is S(E_n - E_{n-1}) * n * (1 + eps*n/8)^2 and the
    three-photon rate is S(E_n - E_{n-3}) * (eps/48)^2 * n (n-1) (n-2), the
    spectral density now evaluated at the true anharmonic transition
    frequency.
    """
    if n_levels < 2:
        raise ValueError("need at least two levels")
    compact = build_case1(epsilon, omega_a, bath, Flavor.EFFECTIVE)
    h_eff = compact.hamiltonian
    terms = []
    for channel in compact.collapse_terms:
        mat = channel.operator.to_matrix(n_levels)
        # all monomials of one channel share the same net excitation drop
        mono = next(iter(channel.operator.terms))
        drop = sum(n - m for m, n in mono)
        for upper in range(drop, n_levels):
            lower = upper - drop
            amp = mat[lower, upper]
            if amp == 0:
                continue
            freq = h_eff.transition_energy((upper,), (lower,))
            terms.append(
                TransitionCollapse(
                    label=f"|{lower}><{upper}|",
                    rate=bath.spectral_density(freq) * abs(amp) ** 2,
                    upper=upper,
                    lower=lower,
                    frequency=freq,
                )
            )
    return EffectiveModel(
        "flux_bath",
        Flavor.EFFECTIVE,
        Representation.NUMBER_BASIS,
        compact.context,
        h_eff,
        terms,
        parameters=dict(compact.parameters, n_levels=n_levels),
    )


def build_case2(
    bare: BareModel,
    hyb: Optional[HybridizationResult],
    bath: BathSpec,
    flavor: Flavor,
    include_three_photon: bool = False,
    order: int = 1,
) -> EffectiveModel:
    """Master equation for the hybridized qubit-resonator pair.

    The bare resonator quadrature v_cc*Y_c + v_ca*Y_a couples to the bath;
    its first-order frame transform supplies the renormalized qubit-like and
    cavity-like single-photon channels, plus the three-photon channels when
    requested.  Float coefficients (the hybridization factors are
    irrational).
    """
    flavor = Flavor(flavor)
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if hyb is None:
        hyb = hybridize(bare)
    eps = float(bare.epsilon)
    wa, wc = hyb.omega_a, hyb.omega_c
    ctx = Context(n_modes=2, exact=False)
    spectrum = QuadraticSpectrum([wa, wc])

    h2 = spectrum.h2(ctx)
    h4 = anharmonic_series_term(ctx, [hyb.u_aa, hyb.u_ac], 2, bare.omega_bar_a)
    s4, n4 = h4.split_secular()
    g4 = solve_generator4(spectrum, n4)

    g6 = None
    if order == 2 and eps:
        h6 = anharmonic_series_term(ctx, [hyb.u_aa, hyb.u_ac], 3, bare.omega_bar_a)
        s6, n6 = h6.split_secular()
        g6, h_eff = solve_generator6(spectrum, s4, n4, g4, n6, s6, eps)
    else:
        h_eff = EffectiveHamiltonian.from_secular(h2 - s4 * eps)
    h_lin = EffectiveHamiltonian.from_secular(h2)
    # bare coupling quadrature in normal-mode coordinates; grouping it without
    # the transform yields the hybridized linear channels (Purcell rates)
    coupling = ctx.y(1) * hyb.v_cc + ctx.y(0) * hyb.v_ca
    linear_channels = _group_lowering_channels(coupling, spectrum, bath)
    params = {
        "case": "purcell",
        "epsilon": eps,
        "omega_bar_a": bare.omega_bar_a,
        "omega_bar_c": bare.omega_bar_c,
        "g": bare.g,
        "order": order,
    }
    meta = {"hybridization": hyb.to_json_dict()}
    if flavor is Flavor.LINEAR:
        return EffectiveModel(
            "purcell", flavor, Representation.COMPACT, ctx, h_lin, linear_channels,
            parameters=params, metadata=meta,
        )
    if flavor is Flavor.KERR:
        return EffectiveModel(
            "purcell", flavor, Representation.COMPACT, ctx, h_eff, linear_channels,
            parameters=params, metadata=meta,
        )

    correction = transform_first_order(coupling, g4, 1.0) - coupling if eps else None
    transformed = transform_first_order(coupling, g4, eps)
    channels = _group_lowering_channels(transformed, spectrum, bath, correction)
    if not include_three_photon:
        tol = 1e-9 * max(wa, wc)
        channels = [
            ch for ch in channels
            if abs(ch.frequency - wa) <= tol or abs(ch.frequency - wc) <= tol
        ]
    return EffectiveModel(
        "purcell",
        flavor,
        Representation.COMPACT,
        ctx,
        h_eff,
        channels,
        generator=Generator(order4=g4, epsilon=eps, order6=g6) if eps else None,
        parameters=params,
        metadata=meta,
    )


class ResonantNormalModes(ArithmeticError):
    def __init__(self, wa, wc):
        super().__init__(f"normal modes are resonant: omega_a = {wa}, omega_c = {wc}")


def correction_signs(bare: BareModel, hyb: Optional[HybridizationResult] = None) -> tuple:
    """Closed-form zero-occupation dissipator corrections (r_a, r_c).

    Positive r_a means the qubit-like single-photon relaxation is reduced in
    magnitude relative to the linear theory when v_ca < 0 (and vice versa);
    the signs track the detuning order.
    """
    if hyb is None:
        hyb = hybridize(bare)
    eps = float(bare.epsilon)
    wa, wc = hyb.omega_a, hyb.omega_c
    wbar = bare.omega_bar_a
    if abs(wa - wc) <= 1e-9 * max(wa, wc):
        raise ResonantNormalModes(wa, wc)
    usq = hyb.u_aa**2 + hyb.u_ac**2
    r_a = -(
        eps / 8 * (wbar / wa) * hyb.v_ca * hyb.u_aa**2
        + eps / 2 * (wbar * wa / (wa**2 - wc**2)) * hyb.v_cc * hyb.u_ac * hyb.u_aa
    ) * usq
    r_c = -(
        eps / 8 * (wbar / wc) * hyb.v_cc * hyb.u_ac**2
        + eps / 2 * (wbar * wc / (wc**2 - wa**2)) * hyb.v_ca * hyb.u_aa * hyb.u_ac
    ) * usq
    return r_a, r_c


def transition_spectrum(model: EffectiveModel, dims) -> list:
    """Enumerate the per-transition content of a compact-form model.

    Diagnostic counterpart of the single-mode number-basis builder for any
    mode count: every collapse channel is projected onto the Fock product
    basis of the given truncation, giving one entry per non-zero matrix
    element with the anharmonic transition frequency and the projector rate
    S-weight * |matrix element|^2.  Entries are sorted by frequency.
    """
    if model.representation is not Representation.COMPACT:
        raise ValueError("transition enumeration expects a compact-form model")
    if isinstance(dims, int):
        dims = (dims,)
    levels = list(np.ndindex(*dims))
    out = []
    for channel in model.collapse_terms:
        mat = channel.operator.to_matrix(dims)
        for i, upper in enumerate(levels):
            for j, lower in enumerate(levels):
                amp = mat[j, i]
                if amp == 0:
                    continue
                out.append(
                    {
                        "channel": channel.label,
                        "upper": tuple(int(x) for x in upper),
                        "lower": tuple(int(x) for x in lower),
                        "frequency": model.hamiltonian.transition_energy(upper, lower),
                        "rate": channel.rate * float(abs(amp) ** 2),
                    }
                )
    out.sort(key=lambda e: (e["frequency"], e["upper"], e["lower"]))
    return out


def model_from_json_dict(data: dict) -> EffectiveModel:
    """Rebuild an EffectiveModel from its JSON dictionary."""
    if data.get("format") != "anharme-effective-model":
        raise ValueError("not an effective-model JSON document")
    ctx = Context(n_modes=int(data["n_modes"]), exact=bool(data["exact"]))
    ham_terms = {}
    for entry in data["hamiltonian"]:
        c = Fraction(entry["coefficient"]) if ctx.exact else float(entry["coefficient"])
        ham_terms[tuple(entry["powers"])] = c
    hamiltonian = EffectiveHamiltonian(ctx.n_modes, ham_terms)
    terms = []
    for t in data["collapse_terms"]:
        if t["kind"] == "transition":
            terms.append(
                TransitionCollapse(
                    label=t["label"],
                    rate=t["rate"],
                    upper=t["upper"],
                    lower=t["lower"],
                    frequency=t.get("frequency", 0.0),
                )
            )
        else:
            corr = t.get("epsilon_correction")
            terms.append(
                CollapseTerm(
                    label=t["label"],
                    rate=t["rate"],
                    operator=poly_from_json(ctx, t["operator"]),
                    frequency=t.get("frequency", 0.0),
                    correction=poly_from_json(ctx, corr) if corr else None,
                )
            )
    generator = None
    if "generator_order4" in data:
        eps_raw = data["generator_epsilon"]
        eps = Fraction(eps_raw) if isinstance(eps_raw, str) else float(eps_raw)
        order6 = data.get("generator_order6")
        generator = Generator(
            order4=poly_from_json(ctx, data["generator_order4"]),
            epsilon=eps,
            order6=poly_from_json(ctx, order6) if order6 else None,
        )
    return EffectiveModel(
        case=data["case"],
        flavor=Flavor(data["flavor"]),
        representation=Representation(data["representation"]),
        context=ctx,
        hamiltonian=hamiltonian,
        collapse_terms=terms,
        generator=generator,
        parameters=data.get("parameters", {}),
        metadata=data.get("metadata", {}),
    )
