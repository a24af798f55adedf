"""Density evolution, achievable rates and GEXIT curves for (spatially-coupled) LDPC codes with BICM."""

__version__ = "0.1.0"

from .channel import ChannelSpec, EntropyCurve, Fading, ebn0_to_sigma, sigma_to_ebn0
from .constellation import ConfigurationError, Constellation, build_constellation
from .de_coupled import ScEnsemble, sc_bp_threshold, sc_converges, sc_design_rate
from .de_flat import DeSchedule, bp_threshold, de_converges
from .demapper import DemapperKind, DemapperSampler, bit_llr
from .density import DEFAULT_GRID, DegreeProfile, Grid, LlrDensity
from .gexit import GexitCurve, area_threshold, bp_gexit_curve
from .gmi import cm_mutual_info, gmi, i_curve, noise_threshold

__all__ = [
    "ChannelSpec",
    "ConfigurationError",
    "Constellation",
    "DEFAULT_GRID",
    "DeSchedule",
    "DegreeProfile",
    "DemapperKind",
    "DemapperSampler",
    "EntropyCurve",
    "Fading",
    "GexitCurve",
    "Grid",
    "LlrDensity",
    "ScEnsemble",
    "area_threshold",
    "bit_llr",
    "bp_gexit_curve",
    "bp_threshold",
    "build_constellation",
    "cm_mutual_info",
    "de_converges",
    "ebn0_to_sigma",
    "gmi",
    "i_curve",
    "noise_threshold",
    "sc_bp_threshold",
    "sc_converges",
    "sc_design_rate",
    "sigma_to_ebn0",
    "__version__",
]
