"""Embedded GOE ensembles with k-body interactions: spectra, moments, quench dynamics."""

__version__ = "0.1.0"

from .analytics import (  # noqa: E402
    MomentSet,
    SystemParams,
    bessel_j1,
    bessel_survival,
    binom,
    ed_gaussian_density,
    fourth_moment_V,
    gamma2_asymptotic,
    gamma2_finite,
    gaussian_survival,
    hermite_He,
    semicircle_density,
    sigma0_sq,
    variance_H0,
    variance_V,
)
from .dynamics import SurvivalCurve, averaged_survival  # noqa: E402
from .ensemble import EnsembleConfig, assemble_H, draw_coefficients, member_stream  # noqa: E402
from .fock import build_H0_matrix, build_V_matrix, enumerate_basis, sp_energies  # noqa: E402
from .spectral import Spectrum, eigendecompose, normalize_spectrum, sample_moments  # noqa: E402

__all__ = [
    "MomentSet",
    "SystemParams",
    "bessel_j1",
    "bessel_survival",
    "binom",
    "ed_gaussian_density",
    "fourth_moment_V",
    "gamma2_asymptotic",
    "gamma2_finite",
    "gaussian_survival",
    "hermite_He",
    "semicircle_density",
    "sigma0_sq",
    "variance_H0",
    "variance_V",
    "SurvivalCurve",
    "averaged_survival",
    "EnsembleConfig",
    "assemble_H",
    "draw_coefficients",
    "member_stream",
    "build_H0_matrix",
    "build_V_matrix",
    "enumerate_basis",
    "sp_energies",
    "Spectrum",
    "eigendecompose",
    "normalize_spectrum",
    "sample_moments",
]
