"""Outage and BER analysis for multi-hop hybrid FSO/RF relay links."""

from .analytic import (
    ber_asymptotic,
    ber_closed_ne,
    ber_quadrature,
    ber_series_exact,
    pout_closed_form,
)
from .channels import GammaGammaPE, NegExp
from .montecarlo import simulate_ber, simulate_e2e_samples, simulate_pout
from .system import SystemConfig

__version__ = "0.1.0"

__all__ = [
    "GammaGammaPE",
    "NegExp",
    "SystemConfig",
    "pout_closed_form",
    "ber_quadrature",
    "ber_series_exact",
    "ber_asymptotic",
    "ber_closed_ne",
    "simulate_pout",
    "simulate_ber",
    "simulate_e2e_samples",
    "__version__",
]
