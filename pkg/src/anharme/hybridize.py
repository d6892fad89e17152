"""Normal-mode diagonalization of the coupled qubit-cavity quadratic model.

The quadratic two-mode Hamiltonian is brought to diagonal form by a
scale-rotate-scale sequence.  The composite map yields the 2x2 coefficient
matrices ``u`` (X quadratures) and ``v`` (Y quadratures) relating bare and
normal-mode coordinates, together with the normal-mode frequencies.

Mode labels follow adiabatic continuity: the "a-like" normal mode is the one
connected to the bare qubit as the coupling goes to zero, not the lower
frequency.  This is achieved by folding the rotation angle into
``2*theta in (-pi/2, pi/2]``, which also resolves the equal-bare-frequency
case to ``theta = pi/4`` without dividing by zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BareModel",
    "DegenerateBare",
    "HybridizationResult",
    "ModeCollapse",
    "hybridize",
    "sign_table",
]


class ModeCollapse(ValueError):
    """A normal-mode frequency radicand dropped to zero or below."""


class DegenerateBare(ValueError):
    """Bare frequencies are equal where a detuning order is required."""


@dataclass(frozen=True)
class BareModel:
    """Bare circuit parameters, frequencies in units of the caller's choice.

    ``epsilon`` is the dimensionless anharmonicity sqrt(2 E_c / E_j); the
    perturbative treatment assumes it is small (warn above 0.3).
    """

    omega_bar_a: float
    omega_bar_c: float
    g: float
    epsilon: float = 0.0

    def __post_init__(self):
        if self.omega_bar_a <= 0 or self.omega_bar_c <= 0:
            raise ValueError("bare frequencies must be positive")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.epsilon > 0.3:
            warnings.warn(
                f"epsilon = {self.epsilon} is outside the comfortable perturbative range",
                stacklevel=2,
            )


@dataclass(frozen=True)
class HybridizationResult:
    """Normal-mode frequencies plus the u/v coefficient matrices.

    ``u`` maps normal-mode X quadratures to bare ones (bare = u @ normal),
    ``v`` does the same for Y quadratures.  Canonical commutators are
    preserved, so ``u @ v.T`` is the identity to float round-off.
    """

    omega_a: float
    omega_c: float
    theta: float
    s1: float
    s2: float
    s3: float
    u: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)

    @property
    def u_aa(self) -> float:
        return float(self.u[0, 0])

    @property
    def u_ac(self) -> float:
        return float(self.u[0, 1])

    @property
    def u_ca(self) -> float:
        return float(self.u[1, 0])

    @property
    def u_cc(self) -> float:
        return float(self.u[1, 1])

    @property
    def v_aa(self) -> float:
        return float(self.v[0, 0])

    @property
    def v_ac(self) -> float:
        return float(self.v[0, 1])

    @property
    def v_ca(self) -> float:
        return float(self.v[1, 0])

    @property
    def v_cc(self) -> float:
        return float(self.v[1, 1])

    def to_json_dict(self) -> dict:
        return {
            "omega_a": self.omega_a,
            "omega_c": self.omega_c,
            "theta": self.theta,
            "s1": self.s1,
            "s2": self.s2,
            "s3": self.s3,
            "u": [[self.u_aa, self.u_ac], [self.u_ca, self.u_cc]],
            "v": [[self.v_aa, self.v_ac], [self.v_ca, self.v_cc]],
        }


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, s], [-s, c]])


def hybridize(model: BareModel) -> HybridizationResult:
    """Diagonalize the quadratic Hamiltonian; raise ModeCollapse past the
    instability where the lower normal-mode frequency reaches zero."""
    wa, wc, g = model.omega_bar_a, model.omega_bar_c, model.g

    root = math.sqrt(wa * wc)
    # tan(2 theta) = 4 g sqrt(wa wc) / (wc^2 - wa^2); fold the atan2 branch
    # into 2 theta in (-pi/2, pi/2] so theta -> 0 as g -> 0 and the mode
    # labels stay adiabatically connected to the bare modes.
    two_theta = math.atan2(4.0 * g * root, wc * wc - wa * wa)
    if two_theta > math.pi / 2:
        two_theta -= math.pi
    elif two_theta <= -math.pi / 2:
        two_theta += math.pi
    theta = 0.5 * two_theta

    cos2, sin2 = math.cos(theta) ** 2, math.sin(theta) ** 2
    cross = 2.0 * g * root * math.sin(2.0 * theta)
    rad_a = wa * wa * cos2 + wc * wc * sin2 - cross
    rad_c = wc * wc * cos2 + wa * wa * sin2 + cross
    if rad_a <= 0 or rad_c <= 0:
        raise ModeCollapse(
            f"normal-mode radicands ({rad_a:.3e}, {rad_c:.3e}) not positive; "
            "coupling too strong for these bare frequencies"
        )
    omega_a = math.sqrt(rad_a)
    omega_c = math.sqrt(rad_c)

    s1 = (wc / wa) ** 0.25
    s2 = (rad_a / (wa * wc)) ** 0.25
    s3 = (rad_c / (wa * wc)) ** 0.25

    rot = _rotation(theta)
    u = np.diag([s1, 1.0 / s1]) @ rot @ np.diag([s2, s3])
    v = np.diag([1.0 / s1, s1]) @ rot @ np.diag([1.0 / s2, 1.0 / s3])
    return HybridizationResult(
        omega_a=omega_a,
        omega_c=omega_c,
        theta=theta,
        s1=s1,
        s2=s2,
        s3=s3,
        u=u,
        v=v,
    )


def _sign(x: float, tol: float = 1e-14) -> int:
    if abs(x) <= tol:
        return 0
    return 1 if x > 0 else -1


def sign_table(model: BareModel) -> dict:
    """Signs of the eight hybridization coefficients (+1, -1 or 0).

    The off-diagonal sign pattern depends on the detuning order, so equal
    bare frequencies are rejected.
    """
    if model.omega_bar_a == model.omega_bar_c and model.g != 0:
        raise DegenerateBare("sign pattern undefined for equal bare frequencies")
    h = hybridize(model)
    return {
        "u_aa": _sign(h.u_aa),
        "u_ac": _sign(h.u_ac),
        "u_ca": _sign(h.u_ca),
        "u_cc": _sign(h.u_cc),
        "v_aa": _sign(h.v_aa),
        "v_ac": _sign(h.v_ac),
        "v_ca": _sign(h.v_ca),
        "v_cc": _sign(h.v_cc),
    }
