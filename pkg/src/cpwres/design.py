"""Quarter-wave CPW resonator design on a two-layer Si / SiGe wafer.

Public inputs and outputs use lab units (um, GHz, uH/m, nF/m, Ohm/m);
everything is converted to SI internally.
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .constants import CODATA
from .numerics import ellip_k

UM = 1e-6
GHZ = 1e9

# relative-permittivity slope of Si(1-x)Ge(x) in the Ge mole fraction
SIGE_EPS_SLOPE = 4.5


@dataclass(frozen=True)
class WaferStack:
    d_si_um: float
    d_sige_um: float
    eps_si: float = 11.7
    ge_fraction: float = 0.3

    def __post_init__(self):
        if not self.d_si_um > 0:
            raise ValueError(f"d_si_um must be > 0, got {self.d_si_um}")
        if not self.d_sige_um >= 0:
            raise ValueError(f"d_sige_um must be >= 0, got {self.d_sige_um}")
        if not 0.0 <= self.ge_fraction <= 1.0:
            raise ValueError(f"ge_fraction must lie in [0, 1], got {self.ge_fraction}")
        if not self.eps_si > 1.0:
            raise ValueError(f"eps_si must be > 1, got {self.eps_si}")

    @property
    def eps_sige(self):
        return self.eps_si + SIGE_EPS_SLOPE * self.ge_fraction

    @property
    def thickness_um(self):
        return self.d_si_um + self.d_sige_um


@dataclass(frozen=True)
class CpwGeometry:
    w_um: float
    g_um: float
    length_um: float
    d_um: float

    def __post_init__(self):
        for name in ("w_um", "g_um", "length_um", "d_um"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value}")

    @classmethod
    def on_stack(cls, stack: WaferStack, w_um, g_um, length_um):
        return cls(w_um, g_um, length_um, stack.thickness_um)

    @property
    def k(self):
        return self.w_um / (self.w_um + 2.0 * self.g_um)


@dataclass(frozen=True)
class ConformalMapFactors:
    k: float
    k_prime: float
    k3: float
    k3_prime: float
    k_tilde: float


@dataclass(frozen=True)
class TransmissionLineParams:
    eps_sub: float
    eps_eff: float
    lg: float                       # uH/m
    cg: float                       # nF/m
    f_design: float                 # GHz
    length_um: float
    lk: Optional[float] = None      # uH/m
    z_eff: Optional[float] = None   # Ohm
    r: Optional[float] = None       # Ohm/m
    f_measured: Optional[float] = None  # GHz
    qi: Optional[float] = None

    def as_record(self):
        """Flat record with unit-suffixed keys; absent fields are None."""
        d = asdict(self)
        return {
            "eps_sub": d["eps_sub"],
            "eps_eff": d["eps_eff"],
            "lg_uh_per_m": d["lg"],
            "cg_nf_per_m": d["cg"],
            "lk_uh_per_m": d["lk"],
            "z_eff_ohm": d["z_eff"],
            "r_ohm_per_m": d["r"],
            "f_design_ghz": d["f_design"],
            "f_measured_ghz": d["f_measured"],
            "qi": d["qi"],
            "length_um": d["length_um"],
        }


def substrate_permittivity(stack: WaferStack) -> float:
    """Thickness-weighted average permittivity of the Si + SiGe stack."""
    return ((stack.d_si_um * stack.eps_si + stack.d_sige_um * stack.eps_sige)
            / (stack.d_si_um + stack.d_sige_um))


def conformal_factors(geom: CpwGeometry) -> ConformalMapFactors:
    w, g, d = geom.w_um, geom.g_um, geom.d_um
    k = w / (w + 2.0 * g)
    k3 = math.tanh(w * math.pi / (4.0 * d)) / math.tanh((w + 2.0 * g) * math.pi / (4.0 * d))
    k_prime = math.sqrt((1.0 - k) * (1.0 + k))
    k3_prime = math.sqrt((1.0 - k3) * (1.0 + k3))
    k_tilde = (ellip_k(k_prime) * ellip_k(k3)) / (ellip_k(k) * ellip_k(k3_prime))
    return ConformalMapFactors(k, k_prime, k3, k3_prime, k_tilde)


def effective_permittivity(eps_sub: float, factors: ConformalMapFactors) -> float:
    if not eps_sub > 1.0:
        raise ValueError(f"eps_sub must be > 1, got {eps_sub}")
    kt = factors.k_tilde
    return (1.0 + eps_sub * kt) / (1.0 + kt)


def geometric_line_params(factors: ConformalMapFactors, eps_eff: float):
    """Geometric inductance (uH/m) and capacitance (nF/m) per unit length."""
    ratio = ellip_k(factors.k_prime) / ellip_k(factors.k)
    lg = CODATA.mu0 * ratio / 4.0
    cg = 4.0 * CODATA.eps0 * eps_eff / ratio
    return lg / UM, cg / 1e-9


def design_frequency(length_um: float, eps_eff: float) -> float:
    """Quarter-wave resonance frequency in GHz."""
    if not length_um > 0:
        raise ValueError(f"length must be > 0, got {length_um}")
    return CODATA.c / (math.sqrt(eps_eff) * 4.0 * length_um * UM) / GHZ


def extract_kinetic_inductance(f_design: float, f_measured: float, lg: float) -> float:
    """Kinetic inductance per length (units of ``lg``) from the frequency drop.

    Phase velocity scales as 1/sqrt((Lg + Lk) Cg), so
    ``Lk = Lg * ((f_design / f_measured)**2 - 1)``.
    """
    if not f_measured > 0:
        raise ValueError(f"f_measured must be > 0, got {f_measured}")
    if f_measured > f_design:
        raise ValueError(
            f"f_measured ({f_measured}) above f_design ({f_design}) implies negative kinetic inductance")
    return lg * ((f_design / f_measured) ** 2 - 1.0)


def characteristic_impedance(lk: float, lg: float, cg: float) -> float:
    """Z_eff in Ohm from inductances in uH/m and capacitance in nF/m."""
    if not (lk + lg > 0 and cg > 0):
        raise ValueError("need lk + lg > 0 and cg > 0")
    return math.sqrt((lk + lg) * UM / (cg * 1e-9))


def extract_resistance(z_eff: float, qi: float, length_um: float) -> float:
    """Distributed resistance in Ohm/m, R = Z_eff / (Qi * L)."""
    if not (qi > 0 and length_um > 0):
        raise ValueError("need qi > 0 and length > 0")
    return z_eff / (qi * length_um * UM)


def design_report(stack: WaferStack, geom: CpwGeometry,
                  f_measured: Optional[float] = None,
                  qi: Optional[float] = None,
                  lg_ref: Optional[float] = None,
                  cg_ref: Optional[float] = None) -> TransmissionLineParams:
    """One full design row: permittivities, line constants, design frequency
    and, when the measured frequency (GHz) and Qi are given, Lk, Z_eff and R.

    ``lg_ref`` / ``cg_ref`` (uH/m, nF/m) replace the computed line constants
    in the Lk / Z_eff / R extraction only, for matching results that were
    built from rounded line constants.  The reported ``lg`` and
    ``cg`` are always the computed values.
    """
    if abs(geom.d_um - stack.thickness_um) > 1e-9 * stack.thickness_um:
        raise ValueError(f"geometry thickness {geom.d_um} um does not match the stack ({stack.thickness_um} um)")
    eps_sub = substrate_permittivity(stack)
    factors = conformal_factors(geom)
    eps_eff = effective_permittivity(eps_sub, factors)
    lg, cg = geometric_line_params(factors, eps_eff)
    f_design = design_frequency(geom.length_um, eps_eff)

    lk = z_eff = r = None
    if f_measured is not None:
        lg_x = lg if lg_ref is None else lg_ref
        cg_x = cg if cg_ref is None else cg_ref
        lk = extract_kinetic_inductance(f_design, f_measured, lg_x)
        z_eff = characteristic_impedance(lk, lg_x, cg_x)
        if qi is not None:
            r = extract_resistance(z_eff, qi, geom.length_um)
    return TransmissionLineParams(eps_sub, eps_eff, lg, cg, f_design, geom.length_um,
                                  lk, z_eff, r, f_measured, qi)
