"""Subprocess oracle adapter speaking the latent-query wire protocol."""

__version__ = "0.1.0"
