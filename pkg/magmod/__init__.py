"""Workbench for magnetic modular forms."""
from __future__ import annotations

from .catalog import Catalog, default_catalog, load_catalog
from .config import Config, load_config
from .evaluator import EvalContext, Evaluator
from .groups import CongruenceSubgroup, GroupElement
from .magnetic import check_depth, max_depth
from .operators import SlashEngine, atkin_lehner, hecke
from .periods import cocycle, magnetic_period_test, omega_split
from .qseries import FourierExpansion
from .real_analytic import RealAnalyticForm
from .residues import residue_table, residue_vector
from .scalars import MagmodError, QuadScalar
from .search import SearchProblem, search

__version__ = "0.1.0"

__all__ = [
    "Catalog",
    "CongruenceSubgroup",
    "Config",
    "EvalContext",
    "Evaluator",
    "FourierExpansion",
    "GroupElement",
    "MagmodError",
    "QuadScalar",
    "RealAnalyticForm",
    "SearchProblem",
    "SlashEngine",
    "atkin_lehner",
    "check_depth",
    "cocycle",
    "default_catalog",
    "hecke",
    "load_catalog",
    "load_config",
    "magnetic_period_test",
    "max_depth",
    "omega_split",
    "residue_table",
    "residue_vector",
    "search",
]
