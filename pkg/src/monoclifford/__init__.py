"""Clifford-valued volume potentials, the monotone operator ``B = D P T`` and a magnetostatics solver."""

from .algebra import Multivector, Paravector
from .grid import Field, GridDomain, make_domain
from .kernels import KernelParams
from .operators import OperatorContext

__all__ = ["Field", "GridDomain", "KernelParams", "Multivector", "OperatorContext", "Paravector", "make_domain"]
