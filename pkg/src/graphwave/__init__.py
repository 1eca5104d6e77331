"""Standing waves of the focusing NLS equation on a star graph with delta-prime coupling."""
from .errors import FixedPointDivergence, NoRoot, PreconditionError, Unresolved
from .graph_core import (FormMatrices, GraphField, Grid, ModelParams, assemble_forms,
                         lp_norm, make_grid, quadratic_form_F_beta)

__all__ = ["FixedPointDivergence", "NoRoot", "PreconditionError", "Unresolved", "FormMatrices",
           "GraphField", "Grid", "ModelParams", "assemble_forms", "lp_norm", "make_grid",
           "quadratic_form_F_beta"]
__version__ = "0.1.0"
