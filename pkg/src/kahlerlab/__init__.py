"""Numerical laboratory for weighted Bergman kernels and Kahler geodesics.

Subpackages cover weights and domains, Bergman kernels on disks and
polydisks, the log-kernel Hessian decomposition, toric Mabuchi functionals
on CP^1 and discrete gap energies.
"""
from .bergman import KernelBundle, beta_m, build_kernel, dbar_t_kernel, kernel_eval, rescaled_density
from .domains import DomainFamily, Polydisk, disk, make_parallelogram
from .errors import KahlerLabError
from .gamma import GammaSolution, solve_gamma
from .gap_energy import GridFunction, degenerate_locus_energy, dirichlet_energy, gap_verdict, refinement_scan
from .hessian import HessianDecomposition, blowup_extract, decompose, gamma_split_check, kappa, orth_residual
from .toric import SymplecticPotential, ToricPath, convexity_scan, geodesic_defect, mabuchi, toric_geodesic, truncated_mabuchi
from .weights import PolynomialWeight, WeightFamily, preset_weight, random_psh_quadratic

__version__ = "0.1.0"

__all__ = [
    "DomainFamily", "GammaSolution", "GridFunction", "HessianDecomposition", "KahlerLabError", "KernelBundle",
    "Polydisk", "PolynomialWeight", "SymplecticPotential", "ToricPath", "WeightFamily", "beta_m", "blowup_extract",
    "build_kernel", "convexity_scan", "dbar_t_kernel", "decompose", "degenerate_locus_energy", "dirichlet_energy",
    "disk", "gamma_split_check", "gap_verdict", "geodesic_defect", "kappa", "kernel_eval", "mabuchi",
    "make_parallelogram", "orth_residual", "preset_weight", "random_psh_quadratic", "refinement_scan",
    "rescaled_density", "solve_gamma", "toric_geodesic", "truncated_mabuchi",
]
