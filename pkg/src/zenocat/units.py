"""Unit conventions.

Internally everything is angular: rates and frequencies in rad/us, times in
us.  Configuration files and device tables quote ordinary frequencies
f = omega / 2pi in MHz, so the only conversion the package ever performs is
the factor 2pi (1 MHz ordinary = 2pi rad/us angular).
"""

from __future__ import annotations

import math

TWO_PI = 2.0 * math.pi


def mhz_to_angular(f_mhz: float) -> float:
    """Ordinary frequency in MHz -> angular rate in rad/us."""
    return TWO_PI * f_mhz


def angular_to_mhz(omega: float) -> float:
    """Angular rate in rad/us -> ordinary frequency in MHz."""
    return omega / TWO_PI
