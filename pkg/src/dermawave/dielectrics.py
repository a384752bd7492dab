"""Complex permittivity of tissue components and their mixtures.

Sign convention throughout: ``eps = eps' - j eps''`` and ``n = n' - j n''``,
with the loss parts ``eps''`` and ``n''`` stored as non-negative magnitudes.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

from .errors import CompositionError, DomainError, FrequencyRangeWarning, SingularityError

VALID_BAND = (1e11, 1e12)

BRANCH_LABELS = ("alpha", "beta", "gamma")


@dataclass(frozen=True)
class ComplexPermittivity:
    eps_real: float
    eps_imag: float

    @classmethod
    def from_complex(cls, value: complex) -> "ComplexPermittivity":
        """Build from a Python complex written as ``eps' - j eps''``."""
        return cls(float(value.real), float(-value.imag))

    def to_complex(self) -> complex:
        return complex(self.eps_real, -self.eps_imag)


@dataclass(frozen=True)
class RefractiveIndex:
    n_real: float
    n_imag: float

    def to_complex(self) -> complex:
        return complex(self.n_real, -self.n_imag)


@dataclass(frozen=True)
class DebyeBranch:
    delta_eps: float
    tau: float  # seconds

    def __post_init__(self):
        if not self.delta_eps >= 0:
            raise DomainError(f"relaxation strength must be >= 0, got {self.delta_eps}")
        if not self.tau > 0:
            raise DomainError(f"relaxation time must be > 0, got {self.tau}")


@dataclass(frozen=True)
class DebyeParameters:
    """High-frequency permittivity plus up to three relaxation branches.

    A branch that does not exist for a component is ``None``; it is never
    encoded as a zero relaxation time.
    """

    eps_inf: float
    alpha: Optional[DebyeBranch] = None
    beta: Optional[DebyeBranch] = None
    gamma: Optional[DebyeBranch] = None

    def __post_init__(self):
        if not self.eps_inf >= 1:
            raise DomainError(f"eps_inf must be >= 1, got {self.eps_inf}")

    @property
    def branches(self) -> Tuple[DebyeBranch, ...]:
        return tuple(b for b in (self.alpha, self.beta, self.gamma) if b is not None)

    def branch(self, label: str) -> Optional[DebyeBranch]:
        if label not in BRANCH_LABELS:
            raise KeyError(label)
        return getattr(self, label)

    def delta_eps(self, label: str) -> float:
        b = self.branch(label)
        return 0.0 if b is None else b.delta_eps


@dataclass(frozen=True)
class MixtureComposition:
    """Water host with dispersed inclusions given by volume fraction.

    The host fraction is implied, ``1 - sum(fractions)``.
    """

    inclusions: Tuple[Tuple[str, float], ...] = ()
    host_component: str = "water"

    def __post_init__(self):
        object.__setattr__(self, "inclusions", tuple((str(c), float(p)) for c, p in self.inclusions))
        for comp, phi in self.inclusions:
            if not (0.0 <= phi <= 1.0):
                raise CompositionError(f"volume fraction of {comp!r} must lie in [0, 1], got {phi}")
        if not self.host_fraction > 0:
            raise CompositionError(
                f"inclusion fractions sum to {1 - self.host_fraction:.6g}; the host needs a positive share"
            )

    @property
    def host_fraction(self) -> float:
        return 1.0 - math.fsum(phi for _, phi in self.inclusions)

    def fraction(self, component: str) -> float:
        if component == self.host_component:
            return self.host_fraction
        return math.fsum(phi for c, phi in self.inclusions if c == component)


def _check_frequency(f: float) -> None:
    if not (math.isfinite(f) and f > 0):
        raise DomainError(f"frequency must be positive and finite, got {f}")
    if not (VALID_BAND[0] <= f <= VALID_BAND[1]):
        warnings.warn(
            f"{f:.4g} Hz lies outside the 100 GHz - 1 THz parameter validity band",
            FrequencyRangeWarning,
            stacklevel=3,
        )


def debye_complex(params: DebyeParameters, f: float) -> complex:
    """Multi-Debye sum as a Python complex (``eps' - j eps''``), no range checks."""
    w = 2.0 * math.pi * f
    total = complex(params.eps_inf, 0.0)
    for b in params.branches:
        total += b.delta_eps / complex(1.0, w * b.tau)
    return total


def debye_permittivity(params: DebyeParameters, f: float) -> ComplexPermittivity:
    """Evaluate ``eps_inf + sum_k delta_k / (1 + j w tau_k)`` at frequency ``f`` (Hz)."""
    _check_frequency(f)
    return ComplexPermittivity.from_complex(debye_complex(params, f))


def maxwell_garnett_complex(host: complex, inclusions: Iterable[Tuple[complex, float]]) -> complex:
    s = 0j
    total_phi = 0.0
    for eps_n, phi in inclusions:
        if phi < 0:
            raise CompositionError(f"negative volume fraction {phi}")
        total_phi += phi
        if phi == 0:
            continue
        denom = eps_n + 2.0 * host
        if denom == 0:
            raise SingularityError("inclusion permittivity equals -2 x host permittivity")
        s += phi * (eps_n - host) / denom
    if total_phi >= 1.0:
        raise CompositionError(f"inclusion fractions sum to {total_phi} (must be < 1)")
    if s == 1:
        raise SingularityError("Maxwell-Garnett denominator vanished")
    return host + 3.0 * host * s / (1.0 - s)


def maxwell_garnett(
    host: ComplexPermittivity,
    inclusions: Sequence[Tuple[ComplexPermittivity, float]],
) -> ComplexPermittivity:
    """Effective permittivity of spherical inclusions dispersed in a host.

    Parameters
    ----------
    host : ComplexPermittivity
        Permittivity of the continuous phase.
    inclusions : sequence of (ComplexPermittivity, float)
        Inclusion permittivity and its volume fraction. Fractions must be
        non-negative and sum to less than one.
    """
    value = maxwell_garnett_complex(
        host.to_complex(), [(e.to_complex(), float(phi)) for e, phi in inclusions]
    )
    return ComplexPermittivity.from_complex(value)


def refractive_index(eps: ComplexPermittivity) -> RefractiveIndex:
    # principal root: n' >= 0, and eps'' >= 0 gives n'' >= 0
    n = cmath.sqrt(complex(eps.eps_real, -eps.eps_imag if eps.eps_imag else -0.0))
    return RefractiveIndex(n.real, -n.imag)


def mixture_permittivity(comp: MixtureComposition, f: float, catalog) -> ComplexPermittivity:
    """Permittivity of a composition: Debye for each component, then Maxwell-Garnett.

    ``catalog`` is anything with a ``component_params(id)`` method, normally a
    :class:`dermawave.materials.Catalog`.
    """
    _check_frequency(f)
    host = debye_complex(catalog.component_params(comp.host_component), f)
    inc = [(debye_complex(catalog.component_params(c), f), phi) for c, phi in comp.inclusions]
    return ComplexPermittivity.from_complex(maxwell_garnett_complex(host, inc))
