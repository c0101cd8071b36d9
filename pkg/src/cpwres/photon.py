"""Input-power bookkeeping and average intra-resonator photon number."""

import math
from dataclasses import dataclass

from .constants import CODATA
from .errors import UnphysicalParameterError


@dataclass(frozen=True)
class PowerContext:
    p_vna: float   # dBm
    p_att: float   # dB, negative for attenuation

    @property
    def p_in_dbm(self):
        return self.p_vna + self.p_att

    @property
    def p_in_watts(self):
        return 10.0 ** ((self.p_in_dbm - 30.0) / 10.0)

    def as_record(self):
        return {"p_vna_dbm": self.p_vna, "p_att_db": self.p_att,
                "p_in_dbm": self.p_in_dbm, "p_in_w": self.p_in_watts}


@dataclass(frozen=True)
class PhotonCalc:
    s21_res_power_ratio: float
    s11_res_power_ratio: float
    p_loss: float   # W
    n_ph: float

    def as_record(self):
        return {"s21_res_power_ratio": self.s21_res_power_ratio,
                "s11_res_power_ratio": self.s11_res_power_ratio,
                "p_loss_w": self.p_loss, "n_ph": self.n_ph}


def input_power(p_vna_dbm: float, p_att_db: float) -> PowerContext:
    return PowerContext(float(p_vna_dbm), float(p_att_db))


def photon_number(ql: float, qc_mag: float, qi: float, fr: float, p_in: float) -> PhotonCalc:
    """Average photon number for a notch resonator driven with ``p_in`` watts.

    On resonance the transmitted and reflected power fractions are
    ``(1 - Ql/|Qc|)**2`` and ``(Ql/|Qc|)**2``; the remainder is dissipated,
    and ``n = Qi * P_loss / (hbar * omega**2)``.  With 1/Ql = 1/Qi + 1/|Qc|
    this equals ``2 Ql**2 P_in / (hbar omega**2 |Qc|)``.
    """
    if not (ql > 0 and qc_mag > 0 and qi > 0):
        raise ValueError("quality factors must be positive")
    if not fr > 0:
        raise ValueError(f"fr must be positive, got {fr}")
    if not p_in >= 0:
        raise ValueError(f"p_in must be >= 0, got {p_in}")
    d = ql / qc_mag
    if d > 1.0:
        raise UnphysicalParameterError(
            f"Ql/|Qc| = {d:.4g} > 1 gives negative dissipated power")
    one_minus_d = (qc_mag - ql) / qc_mag    # qc - ql is exact when they are close
    s21 = one_minus_d ** 2
    s11 = d * d
    # 1 - s21 - s11 expanded as 2d(1 - d): no cancellation at either coupling extreme
    p_loss = p_in * 2.0 * d * one_minus_d
    omega = 2.0 * math.pi * fr
    return PhotonCalc(s21, s11, p_loss, qi * p_loss / (CODATA.hbar * omega ** 2))
