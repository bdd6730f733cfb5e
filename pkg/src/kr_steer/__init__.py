"""Kumpera-Ruiz normal forms for the car with n trailers.

Subpackages and modules:

* ``field_algebra``: exact polynomial and symbolic trigonometric vector fields
* ``kr_forms``: KR words, prolongations and derived-flag ranks
* ``nilpotency``: bracket closure, lower central series, ad-nilpotency
* ``trailer_model``: n-trailer kinematics and singular-locus classification
* ``conversion``: coordinate change and feedback into KR form
* ``planner``: polynomial-control steering in KR coordinates
* ``sim_verify``: RK4 closed-loop verification and bundled scenarios
"""

from .errors import KRSteerError

__version__ = "0.1.0"

__all__ = ["KRSteerError", "__version__"]
