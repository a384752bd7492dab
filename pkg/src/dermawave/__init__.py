"""Layered-skin dielectric model and intrabody sub-THz/THz path-loss simulator."""
from .dielectrics import (
    ComplexPermittivity,
    DebyeBranch,
    DebyeParameters,
    MixtureComposition,
    RefractiveIndex,
    debye_permittivity,
    maxwell_garnett,
    mixture_permittivity,
    refractive_index,
)
from .materials import Catalog, builtin_catalog, dump_catalog, load_catalog

__version__ = "0.1.0"
