"""Trade Design.

Information design for bilateral trade with interdependent values: payoff
regions, seller floors, incentive-compatible distributions and certified
equilibrium constructions.
"""

__version__ = "1.0.0"
__author__ = "Wolfgang Schoenberger"

from .config import Settings, load_settings
from .environment import load_environment, load_environment_file, surplus
from .equilibrium import payoffs, verify_sequential, verify_wpbe
from .geometry import region_all, region_fb, region_negative, region_us
from .icd import affine_p_star, icd_decompose, is_icd
from .models import (
    Belief,
    Environment,
    InformationStructure,
    PayoffPoint,
    PayoffRegion,
    StrategyProfile,
    VerificationReport,
)

__all__ = [
    "Environment",
    "Belief",
    "PayoffPoint",
    "PayoffRegion",
    "InformationStructure",
    "StrategyProfile",
    "VerificationReport",
    "Settings",
    "load_settings",
    "load_environment",
    "load_environment_file",
    "surplus",
    "region_all",
    "region_us",
    "region_fb",
    "region_negative",
    "icd_decompose",
    "is_icd",
    "affine_p_star",
    "payoffs",
    "verify_wpbe",
    "verify_sequential",
]
