"""
vmspod

Proper orthogonal decomposition reduced-order models for convection-dominated
convection-diffusion problems: a finite element truth solver, POD-Galerkin and
variational multiscale POD (VMS-POD) models, and the error studies around them.
"""

__version__ = "0.1.0"
__author__ = "vmspod developers"
__license__ = "MIT"
