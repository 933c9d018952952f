"""Watermark embedding and detection under a false-positive exponent constraint.

Submodules:

- ``empirical``: types, empirical information measures, type-class enumeration
- ``detect_discrete``: attack-free decision regions and the optimal discrete embedder
- ``gaussian``: embedders and detectors for Gaussian covertexts
- ``exponents``: analytic false-negative exponents
- ``attacks``: memoryless and worst-case exchangeable attacks
- ``simkit``: Monte Carlo harness
"""

from .decision import Decision
from .errors import CapExceeded, DomainError, InfeasibleError, WatermarkError

__version__ = "0.1.0"

__all__ = ["Decision", "CapExceeded", "DomainError", "InfeasibleError", "WatermarkError", "__version__"]
