"""CODATA physical constants (SI), taken from ``scipy.constants``."""

from dataclasses import dataclass

import scipy.constants as _sc


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = _sc.c
    mu0: float = _sc.mu_0
    eps0: float = _sc.epsilon_0
    h: float = _sc.h
    hbar: float = _sc.hbar
    k_b: float = _sc.k


CODATA = PhysicalConstants()
