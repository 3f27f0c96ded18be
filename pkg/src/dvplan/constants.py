"""Canonical units and physical constants.

Internally everything is heliocentric AU / day / AU^3 day^-2; delta-V values
cross module boundaries in m/s.
"""

import math

# IAU 2012 astronomical unit, exact.
AU_M = 149_597_870_700.0

DAY_S = 86_400.0

# 1 AU/day expressed in m/s (= 1731456.8368055555).
AU_PER_DAY_MS = AU_M / DAY_S

# Sun gravitational parameter in AU^3/day^2 (square of the Gaussian
# gravitational constant k = 0.01720209895). Overridable per catalog.
SUN_MU = 2.9591220828559093e-4

TWO_PI = 2.0 * math.pi
