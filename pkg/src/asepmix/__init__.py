"""Laboratory for the Metropolis biased card shuffling (multi-species ASEP).

Subpackages group by role:

- :mod:`asepmix.configs` -- permutations, 0/1 configurations, height functions
- :mod:`asepmix.mallows` -- exact Mallows / projected measures and samplers
- :mod:`asepmix.hecke` -- exact Hecke-algebra engine and shuffle/Mallows elements
- :mod:`asepmix.clocks` -- seeded Poisson clock streams (basic coupling substrate)
- :mod:`asepmix.simulate` -- coupled exclusion-process simulators and stopping times
- :mod:`asepmix.mixing` -- total-variation mixing and cutoff-profile experiments
- :mod:`asepmix.tracywidom` -- Tracy-Widom GOE distribution via Painleve II
- :mod:`asepmix.cli` -- experiment runner with CSV/JSON output
"""

__version__ = "0.1.0"

from asepmix.errors import (
    AsepmixError,
    ConfigurationError,
    InvalidInputError,
    NumericalFailureError,
    UnsupportedRangeError,
    UnsupportedSizeError,
    UnsupportedWindowError,
)

__all__ = [
    "AsepmixError",
    "ConfigurationError",
    "InvalidInputError",
    "NumericalFailureError",
    "UnsupportedRangeError",
    "UnsupportedSizeError",
    "UnsupportedWindowError",
    "__version__",
]
