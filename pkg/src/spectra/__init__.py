"""Random symmetric Toeplitz matrices: circulant embedding, Stieltjes identities,
spectral averaging bounds and Monte Carlo density estimates."""

__version__ = "0.1.0"
