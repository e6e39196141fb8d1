"""GLRT-based metric learning: hypothesis-test similarity scores on differential embeddings."""
from .errors import GlrtmlError, NumericalError
from .glrt_gmm import GmmModel, em_fit, gmm_score
from .glrt_mg import MgModel, fit_mg_model, mg_score

__version__ = "0.1.0"
__all__ = ["GlrtmlError", "NumericalError", "GmmModel", "em_fit", "gmm_score",
           "MgModel", "fit_mg_model", "mg_score"]
