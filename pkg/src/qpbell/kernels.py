"""Closed-form s-parameterized quasiprobability functions.

Two state families have analytic two-mode quasiprobabilities: the
single-photon entangled state (|0,1> + |1,0>)/sqrt(2) and the two-mode
squeezed vacuum sech(r) sum_n tanh(r)^n |n,n>.  Everything else goes
through a truncated Fock density matrix (``GenericFock``) and the
brute-force trace in :mod:`qpbell.fock`.

The kernels broadcast over numpy arrays of phase points; ``s`` and ``r``
are always scalars.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

import numpy as np

if TYPE_CHECKING:
    from qpbell.fock import FockDensityMatrix

PI = math.pi


class DomainError(ValueError):
    """An argument lies outside the domain where a formula is defined."""


def check_s(s: float) -> float:
    s = float(s)
    if not math.isfinite(s):
        raise DomainError(f"s must be finite, got {s}")
    if s > 0:
        raise DomainError(f"s must be non-positive, got s={s}")
    return s


def check_r(r: float) -> float:
    r = float(r)
    if not (math.isfinite(r) and r > 0):
        raise DomainError(f"squeezing r must be > 0, got r={r}")
    return r


def check_point(z) -> complex:
    z = complex(z)
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DomainError(f"phase-space point must be finite, got {z}")
    return z


# -- state models ------------------------------------------------------------


@dataclass(frozen=True)
class SinglePhotonEntangled:
    """(|0,1> + |1,0>)/sqrt(2)."""

    label = "single-photon"


@dataclass(frozen=True)
class Tmss:
    """Two-mode squeezed vacuum with squeezing ``r`` > 0."""

    r: float

    label = "tmss"

    def __post_init__(self):
        check_r(self.r)


@dataclass(frozen=True, eq=False)
class GenericFock:
    """Any two-mode state given as a truncated Fock density matrix."""

    rho: "FockDensityMatrix"

    label = "fock"


StateModel = Union[SinglePhotonEntangled, Tmss, GenericFock]


@dataclass(frozen=True)
class GaussianFactors:
    R: float
    S: float


def gaussian_factors(s: float, r: float) -> GaussianFactors:
    """R(s) = s^2 - 2 s cosh 2r + 1 and S(s) = cosh 2r - s."""
    c = math.cosh(2.0 * r)
    return GaussianFactors(R=s * s - 2.0 * s * c + 1.0, S=c - s)


# -- analytic kernels --------------------------------------------------------


def w_single_photon_pair(alpha, beta, s: float):
    s = check_s(s)
    a = 1.0 - s
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    bracket = -(1.0 + s) / a + 2.0 * np.abs(alpha + beta) ** 2 / a**2
    envelope = np.exp(-2.0 * (np.abs(alpha) ** 2 + np.abs(beta) ** 2) / a)
    return 4.0 / (PI**2 * a**2) * bracket * envelope


def w_single_photon_marginal(alpha, s: float):
    """Single-mode marginal of the single-photon pair function.

    The reduced state is the equal mixture of vacuum and one photon, so
    this is ideal in ``s``; detector efficiency enters only through
    :func:`qpbell.bell.effective_s`.
    """
    s = check_s(s)
    a = 1.0 - s
    x = np.abs(np.asarray(alpha, dtype=complex)) ** 2
    return (-2.0 * s / a + 4.0 * x / a**2) * np.exp(-2.0 * x / a) / (PI * a)


def w_tmss_pair(alpha, beta, s: float, r: float):
    s = check_s(s)
    r = check_r(r)
    g = gaussian_factors(s, r)
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    cross = 2.0 * np.real(alpha * beta)  # alpha*beta + conj(alpha*beta)
    quad = g.S * (np.abs(alpha) ** 2 + np.abs(beta) ** 2) - math.sinh(2.0 * r) * cross
    return 4.0 / (PI**2 * g.R) * np.exp(-2.0 * quad / g.R)


def w_tmss_marginal(alpha, s: float, r: float):
    s = check_s(s)
    r = check_r(r)
    S = gaussian_factors(s, r).S
    x = np.abs(np.asarray(alpha, dtype=complex)) ** 2
    return 2.0 / (PI * S) * np.exp(-2.0 * x / S)


def w_pair(state: StateModel, alpha, beta, s: float):
    """Two-mode quasiprobability W(alpha, beta; s) for any state model."""
    if isinstance(state, SinglePhotonEntangled):
        return w_single_photon_pair(alpha, beta, s)
    if isinstance(state, Tmss):
        return w_tmss_pair(alpha, beta, s, state.r)
    if isinstance(state, GenericFock):
        from qpbell.fock import w_pair_oracle

        return w_pair_oracle(state.rho, alpha, beta, s)
    raise TypeError(f"unknown state model {state!r}")


def w_marginal(state: StateModel, alpha, s: float, mode: str = "a"):
    """Single-mode marginal of ``state`` on mode ``"a"`` (Alice) or ``"b"``."""
    if isinstance(state, SinglePhotonEntangled):
        return w_single_photon_marginal(alpha, s)
    if isinstance(state, Tmss):
        return w_tmss_marginal(alpha, s, state.r)
    if isinstance(state, GenericFock):
        from qpbell.fock import w_single_oracle

        return w_single_oracle(state.rho.reduced(mode), alpha, s)
    raise TypeError(f"unknown state model {state!r}")


def lo_displacement(xi, T: float) -> complex:
    """Displacement produced by a beam splitter of transmissivity ``T``
    mixing the signal with a strong coherent field ``xi``."""
    T = float(T)
    if not 0.0 < T < 1.0:
        raise DomainError(f"transmissivity must lie in (0, 1), got T={T}")
    return check_point(xi) * math.sqrt((1.0 - T) / T)
