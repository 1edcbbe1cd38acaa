"""Hartree atomic units and the handful of conversions the scenarios need.

Everything inside the package is in atomic units (hbar = m_e = e = 1).
"""

import math

BOHR_ANGSTROM = 0.529177210903
AU_TIME_FS = 0.02418884326585747
AU_VELOCITY_MPS = 2.18769126364e6
HARTREE_EV = 27.211386245988

_LENGTH = {"bohr": 1.0, "au": 1.0, "angstrom": 1.0 / BOHR_ANGSTROM}
_TIME = {"au": 1.0, "fs": 1.0 / AU_TIME_FS}
_ENERGY = {"hartree": 1.0, "au": 1.0, "ev": 1.0 / HARTREE_EV}


def _factor(table, unit, what):
    try:
        return table[unit.lower()]
    except KeyError:
        raise ValueError(f"unknown {what} unit {unit!r}; expected one of {sorted(table)}") from None


def length_to_au(value, unit="bohr"):
    return value * _factor(_LENGTH, unit, "length")


def length_from_au(value, unit="bohr"):
    return value / _factor(_LENGTH, unit, "length")


def wavenumber_to_au(value, unit="bohr"):
    """Inverse-length quantity given per `unit` (e.g. 1/angstrom) to 1/bohr."""
    return value / _factor(_LENGTH, unit, "length")


def time_to_au(value, unit="au"):
    return value * _factor(_TIME, unit, "time")


def time_from_au(value, unit="au"):
    return value / _factor(_TIME, unit, "time")


def energy_to_au(value, unit="hartree"):
    return value * _factor(_ENERGY, unit, "energy")


def velocity_mps_to_au(v):
    return v / AU_VELOCITY_MPS


def de_broglie_wavelength(k):
    """lambda = 2 pi / |k| (same length unit as 1/k)."""
    return 2.0 * math.pi / abs(k)
