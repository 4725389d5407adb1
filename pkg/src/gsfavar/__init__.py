"""Factor-augmented VARs with grouped sparse autoencoder factors.

Submodules:

- ``numeric``: seeded streams, Cholesky, Wishart sampling, OLS, PCA
- ``data``: quarterly panel loading, transforms, synthetic panels
- ``autoencoder``: grouped sparse autoencoder, ELBO, Adam training
- ``factors``: PCA factors, slow-moving adjustment, loading Gibbs sampler
- ``var_tiv`` / ``var_tvp``: constant and time-varying Bayesian VARs
- ``forecast``: predictive simulation and expanding-window evaluation
- ``irf``: recursively identified impulse responses
"""

from __future__ import annotations

from ._kernels import BACKEND
from .errors import ConfigError, DataError, GsFavarError, NumericalError
from .numeric import RngStream

__version__ = "0.1.0"

__all__ = ["BACKEND", "ConfigError", "DataError", "GsFavarError", "NumericalError", "RngStream", "__version__"]
