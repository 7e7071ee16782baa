"""Numerical laboratory for Lorentz-Wente estimates on degenerating annuli."""
from .grid import (AnnulusSpec, Field, LogPolarGrid, angular_radial_split, annulus_grid,
                   dirichlet_energy, disk_grid, gradient, integrate, restrict_extend, sample,
                   from_polar)
from .lorentz import (LorentzNorm, StepRearrangement, duality_pairing, l21_levelset,
                      lorentz_norm, rearrange)
from .harmonic import HarmonicAnnulusFunction, fit_harmonic, harmonic_sweep
from .wente import (BoundaryCondition, WenteReport, hodge_decompose, jacobian, poisson_solve,
                    wente_solve, wente_sweep)
from .quantization import (BubbleTree, angular_quantization_check, build_bubble_tree,
                           dyadic_profile, radii_partition, weak_l2_check)
from .spheremaps import RationalMap, bubble

__version__ = "0.1.0"
