"""Exact symbolic toolkit for formal families of Dirac structures, their
tight families of star products, parallel transport and disk holonomy."""

from .exactalg import H, ParseError, Poly, RatFunc, parse
from .geom import MixedMultivector, d_B, mc_residual_L, schouten
from .dirac import GenSection, courant, is_dirac, lemma1_equivalence, pairing, sigma_to_graph
from .star import PolyDiffOp, StarProduct, kontsevich2, moyal
from .family import TightFamily, gauge_family, mc4_check, quantize_family
from .holonomy import DiskB, PathB, disk_holonomy, transport
from .algebroid import CrossSection, FoliatedChart, SectionHomotopy, hom_build, hom_identify

__version__ = "0.1.0"

__all__ = [
    "H", "ParseError", "Poly", "RatFunc", "parse",
    "MixedMultivector", "d_B", "mc_residual_L", "schouten",
    "GenSection", "courant", "is_dirac", "lemma1_equivalence", "pairing", "sigma_to_graph",
    "PolyDiffOp", "StarProduct", "kontsevich2", "moyal",
    "TightFamily", "gauge_family", "mc4_check", "quantize_family",
    "DiskB", "PathB", "disk_holonomy", "transport",
    "CrossSection", "FoliatedChart", "SectionHomotopy", "hom_build", "hom_identify",
]
