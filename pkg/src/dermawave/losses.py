"""Intrabody path loss: spreading, molecular absorption and scattering.

Loss factors are fractions of power kept (``<= 1`` for a lossy path); every
dB figure is a positive loss, ``-10 log10(factor)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

from .dielectrics import RefractiveIndex
from .errors import DomainError, SingularityError

C0 = 299_792_458.0  # m/s

DB_PER_NEPER = 10.0 / math.log(10.0)  # power dB per unit optical depth

# Below this argument both efficiencies are summed from their Taylor series;
# the closed forms lose ~5 digits to cancellation near 1e-3.
SERIES_SWITCH = 1.0
_SERIES_TERMS = 24
# Q_ext = sum_k 4 (-1)^(k+1) (2k+1) / (2k+2)! p^(2k)
_QEXT_COEFFS = tuple(
    4.0 * (-1) ** (k + 1) * (2 * k + 1) / math.factorial(2 * k + 2) for k in range(1, _SERIES_TERMS)
)
# Q_abs = sum_k 2 (-1)^(k+1) (k+1) / (k+2)! b^k
_QABS_COEFFS = tuple(
    2.0 * (-1) ** (k + 1) * (k + 1) / math.factorial(k + 2) for k in range(1, _SERIES_TERMS)
)


def _horner(coeffs, x):
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


@dataclass(frozen=True)
class PropagationConfig:
    frequency: float
    distance: float
    directivity: float = 1.0
    medium_index: RefractiveIndex = RefractiveIndex(1.0, 0.0)

    def __post_init__(self):
        if not self.frequency > 0:
            raise DomainError(f"frequency must be > 0, got {self.frequency}")
        if not self.distance >= 0:
            raise DomainError(f"distance must be >= 0, got {self.distance}")
        if not self.directivity >= 1:
            raise DomainError(f"directivity must be >= 1, got {self.directivity}")

    @property
    def wavelength(self) -> float:
        return C0 / self.frequency

    @property
    def guided_wavelength(self) -> float:
        return guided_wavelength(self.frequency, self.medium_index.n_real)


def guided_wavelength(f: float, n_real: float) -> float:
    """Wavelength inside a medium of real index ``n_real``."""
    return C0 / (f * n_real)


def size_parameter(radius: float, f: float, n_real_medium: float) -> float:
    return 2.0 * math.pi * radius / guided_wavelength(f, n_real_medium)


def to_db(factor: float) -> float:
    return -10.0 * math.log10(factor)


@dataclass(frozen=True)
class LossTerm:
    factor: float
    db: float

    @classmethod
    def from_db(cls, db: float) -> "LossTerm":
        return cls(10.0 ** (-db / 10.0), db)

    @classmethod
    def from_optical_depth(cls, tau: float) -> "LossTerm":
        # factor may underflow to 0 for very thick paths; the dB value stays exact
        return cls(math.exp(-tau), DB_PER_NEPER * tau)


@dataclass(frozen=True)
class LossBreakdown:
    spreading: LossTerm
    absorption: LossTerm
    scattering: LossTerm
    total: LossTerm

    @classmethod
    def combine(cls, spreading: LossTerm, absorption: LossTerm, scattering: LossTerm) -> "LossBreakdown":
        total = LossTerm(
            spreading.factor * absorption.factor * scattering.factor,
            spreading.db + absorption.db + scattering.db,
        )
        return cls(spreading, absorption, scattering, total)


# -- spreading ---------------------------------------------------------------


def spreading_db(cfg: PropagationConfig) -> float:
    if cfg.distance == 0:
        return 0.0
    return 20.0 * math.log10(4.0 * math.pi * cfg.distance / cfg.guided_wavelength) - 10.0 * math.log10(
        cfg.directivity
    )


def spreading_loss(cfg: PropagationConfig) -> float:
    """Spreading factor ``D (lambda_g / (4 pi d))^2``.

    A zero distance is defined to give a factor of 1 (0 dB). For distances
    shorter than ``lambda_g / (4 pi)`` the expression exceeds one; it is
    returned as is.
    """
    if cfg.distance == 0:
        return 1.0
    ratio = cfg.guided_wavelength / (4.0 * math.pi * cfg.distance)
    return cfg.directivity * ratio * ratio  # inf rather than OverflowError for vanishing d


# -- absorption --------------------------------------------------------------


def absorption_coefficient(n: RefractiveIndex, f: float) -> float:
    """Molecular absorption coefficient ``4 pi n'' / lambda_g`` in 1/m."""
    return 4.0 * math.pi * n.n_imag / guided_wavelength(f, n.n_real)


def absorption_loss(mu_abs: float, d: float) -> float:
    if mu_abs < 0 or d < 0:
        raise DomainError("absorption coefficient and distance must be non-negative")
    return math.exp(-mu_abs * d)


# -- scattering --------------------------------------------------------------


def extinction_efficiency(p: float) -> float:
    """Anomalous-diffraction extinction efficiency for phase delay ``p``.

    ``Q_ext`` is even in ``p``, so a negative delay (particle optically
    thinner than its surroundings) gives the same value as ``|p|``.
    """
    p = abs(p)
    if p < SERIES_SWITCH:
        p2 = p * p
        return p2 * _horner(_QEXT_COEFFS, p2)
    return 2.0 - (4.0 / p) * math.sin(p) + (4.0 / (p * p)) * (1.0 - math.cos(p))


def absorption_efficiency(b: float) -> float:
    """Anomalous-diffraction absorption efficiency for absorption thickness ``b = 4 psi n''``."""
    if b < 0:
        raise DomainError(f"absorption thickness must be >= 0, got {b}")
    if b < SERIES_SWITCH:
        q = b * _horner(_QABS_COEFFS, b)
    else:
        e = math.exp(-b)
        q = 1.0 + (2.0 / b) * e + (2.0 / (b * b)) * (e - 1.0)
    return min(max(q, 0.0), 1.0)


def rayleigh_efficiency(psi: float, n) -> float:
    """Small-sphere scattering efficiency ``(8/3) psi^4 [Re((n^2-1)/(n^2+2))]^2``.

    ``n`` is the particle index relative to its surroundings, either a
    :class:`RefractiveIndex` or a complex ``n' - j n''``.
    """
    if psi < 0:
        raise DomainError(f"size parameter must be >= 0, got {psi}")
    m = n.to_complex() if isinstance(n, RefractiveIndex) else complex(n)
    m2 = m * m
    if m2 + 2 == 0:
        raise SingularityError("n^2 + 2 vanished")
    k = ((m2 - 1) / (m2 + 2)).real
    return max((8.0 / 3.0) * psi**4 * k * k, 0.0)


@dataclass(frozen=True)
class ScattererPopulation:
    """One species of spherical scatterers in a background medium.

    ``index`` is the particle index relative to the medium; ``medium_n_real``
    sets the in-medium wavelength used for the size parameter.
    """

    species: str
    radius: float
    number_density: float
    index: RefractiveIndex
    medium_n_real: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise DomainError(f"{self.species}: radius must be > 0")
        if not self.number_density >= 0:
            raise DomainError(f"{self.species}: number density must be >= 0")

    def size_parameter(self, f: float) -> float:
        return size_parameter(self.radius, f, self.medium_n_real)

    def regime(self, f: float) -> str:
        return "large" if self.size_parameter(f) >= 1.0 else "small"

    def efficiency(self, f: float) -> float:
        psi = self.size_parameter(f)
        if psi < 1.0:
            return rayleigh_efficiency(psi, self.index)
        p = 2.0 * (self.index.n_real - 1.0) * psi
        b = 4.0 * psi * self.index.n_imag
        return max(extinction_efficiency(p) - absorption_efficiency(b), 0.0)

    def coefficient(self, f: float) -> float:
        """Scattering coefficient ``rho Q pi r^2`` in 1/m."""
        return self.number_density * self.efficiency(f) * math.pi * self.radius**2


def scattering_coefficients(pops: Iterable[ScattererPopulation], f: float) -> Tuple[float, float]:
    small = large = 0.0
    for pop in pops:
        mu = pop.coefficient(f)
        if pop.regime(f) == "large":
            large += mu
        else:
            small += mu
    return small, large


def scattering_loss(mu_small: float, mu_large: float, d: float) -> float:
    if mu_small < 0 or mu_large < 0 or d < 0:
        raise DomainError("scattering coefficients and distance must be non-negative")
    return math.exp(-(mu_small + mu_large) * d)


def total_loss(
    cfg: PropagationConfig, mu_abs: float, pops: Sequence[ScattererPopulation] = ()
) -> LossBreakdown:
    """Spreading x absorption x scattering over a homogeneous path of length ``cfg.distance``."""
    mu_small, mu_large = scattering_coefficients(pops, cfg.frequency)
    return path_loss(cfg, mu_abs * cfg.distance, (mu_small + mu_large) * cfg.distance)


def path_loss(cfg: PropagationConfig, abs_depth: float, sca_depth: float) -> LossBreakdown:
    """Assemble a breakdown from integrated absorption and scattering optical depths."""
    if abs_depth < 0 or sca_depth < 0:
        raise DomainError("optical depths must be non-negative")
    spr = LossTerm(spreading_loss(cfg), spreading_db(cfg))
    return LossBreakdown.combine(
        spr, LossTerm.from_optical_depth(abs_depth), LossTerm.from_optical_depth(sca_depth)
    )
