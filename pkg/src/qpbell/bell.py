"""The s-parameterized CHSH-type Bell test under finite detector efficiency.

Local observables are O(alpha; s) = (1-s) Pi(alpha; s) + s for -1 < s <= 0
and 2 Pi(alpha; s) - 1 for s <= -1; both have outcomes in [-1, 1], so the
combination C11 + C12 + C21 - C22 is bounded by 2 in any local-realistic
model.  A detector of overall efficiency eta turns a measurement of the
target parameter s into one of s' = -(1 - s - eta)/eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qpbell import fock
from qpbell.kernels import PI, GenericFock, StateModel, check_point, check_s, w_marginal, w_pair

LR_BOUND = 2.0
# Settings at infinity give |B| = 2 exactly; rounding there must not count.
VIOLATION_TOL = 1e-9


def eigenvalue(n: int, s: float) -> float:
    s = check_s(s)
    if n < 0:
        raise ValueError("n must be non-negative")
    t = fock.series_ratio(s) ** n
    if s > -1.0:
        return (1.0 - s) * t + s
    return 2.0 * t - 1.0


def effective_s(s: float, eta: float) -> float:
    s = check_s(s)
    eta = fock.check_eta(eta)
    if eta == 1.0:
        return s
    return -(1.0 - s - eta) / eta


def thermal_s_shift(gamma_tau: float, n_bar: float) -> float:
    """s(tau) = (1 - e^(gamma tau)) (1 + 2 n_bar) for a state under thermal damping.

    Informational only.  The local-realistic bound assumes s is fixed by
    the measurement, so a time-dependent s does not yield a Bell test.
    """
    if gamma_tau < 0 or n_bar < 0:
        raise ValueError("gamma_tau and n_bar must be non-negative")
    return -math.expm1(gamma_tau) * (1.0 + 2.0 * n_bar)


@dataclass(frozen=True)
class MeasurementSettings:
    alpha1: complex
    alpha2: complex
    beta1: complex
    beta2: complex

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "beta1", "beta2"):
            object.__setattr__(self, name, check_point(getattr(self, name)))

    @classmethod
    def zeros(cls):
        return cls(0, 0, 0, 0)

    @classmethod
    def from_vector(cls, x):
        """From 4 reals (real axis) or 8 reals (re, im pairs)."""
        x = np.asarray(x, dtype=float)
        if x.size == 4:
            return cls(*x)
        if x.size == 8:
            return cls(*(x[0::2] + 1j * x[1::2]))
        raise ValueError(f"settings vector must have 4 or 8 entries, got {x.size}")

    def to_vector(self, complex_settings: bool = True) -> np.ndarray:
        z = np.array(self.as_tuple())
        if not complex_settings:
            return z.real.copy()
        out = np.empty(8)
        out[0::2], out[1::2] = z.real, z.imag
        return out

    def as_tuple(self):
        return (self.alpha1, self.alpha2, self.beta1, self.beta2)

    def radius(self) -> float:
        return max(abs(z) for z in self.as_tuple())


@dataclass(frozen=True)
class BellContext:
    s: float
    eta: float = 1.0

    def __post_init__(self):
        check_s(self.s)
        fock.check_eta(self.eta)

    @property
    def s_eff(self) -> float:
        return effective_s(self.s, self.eta)


@dataclass(frozen=True)
class BellValue:
    value: float

    @property
    def magnitude(self) -> float:
        return abs(self.value)

    @property
    def violated(self) -> bool:
        return self.magnitude > LR_BOUND + VIOLATION_TOL


def _branch(s: float, branch: str | None) -> str:
    if branch is None:
        return "wigner" if s > -1.0 else "q"
    if branch not in ("wigner", "q"):
        raise ValueError("branch must be 'wigner' (-1 < s <= 0) or 'q' (s <= -1)")
    return branch


def bell_coefficients(s: float, eta: float = 1.0, branch: str | None = None):
    """(pair, marginal, constant) weights of the measured Bell value.

    ``branch`` forces a coefficient set; by default -1 < s <= 0 uses the
    (1-s) Pi + s observable and s <= -1 uses 2 Pi - 1.  At s = -1 the two
    coincide.
    """
    s = check_s(s)
    eta = fock.check_eta(eta)
    if _branch(s, branch) == "wigner":
        return PI**2 * (1 - s) ** 4 / (4 * eta**2), PI * s * (1 - s) ** 2 / eta, 2 * s * s
    return PI**2 * (1 - s) ** 2 / eta**2, -2 * PI * (1 - s) / eta, 2.0


def bell_value(state: StateModel, settings: MeasurementSettings, ctx: BellContext,
               branch: str | None = None) -> BellValue:
    a1, a2, b1, b2 = settings.as_tuple()
    sp = ctx.s_eff
    c_pair, c_marg, c0 = bell_coefficients(ctx.s, ctx.eta, branch)
    if isinstance(state, GenericFock):
        return BellValue(_fock_bell(state.rho, settings, sp, c_pair, c_marg, c0))
    w = w_pair(state, np.array([a1, a1, a2, a2]), np.array([b1, b2, b1, b2]), sp)
    chsh = w[0] + w[1] + w[2] - w[3]
    marg = w_marginal(state, a1, sp, "a") + w_marginal(state, b1, sp, "b")
    return BellValue(float(c_pair * chsh + c_marg * marg + c0))


def _fock_bell(rho, settings, sp, c_pair, c_marg, c0) -> float:
    """Same combination as the closed-form path, with each Pi built once."""
    rho_a, rho_b = rho.reduced("a"), rho.reduced("b")
    a1, a2, b1, b2 = settings.as_tuple()
    pa = [fock.pi_on_support(z, sp, rho_a) for z in (a1, a2)]
    pb = [fock.pi_on_support(z, sp, rho_b) for z in (b1, b2)]
    k2 = 4.0 / (PI**2 * (1.0 - sp) ** 2)
    k1 = 2.0 / (PI * (1.0 - sp))
    w = [k2 * rho.expectation(pa[i], pb[j]).real for i, j in ((0, 0), (0, 1), (1, 0), (1, 1))]
    marg = k1 * (np.trace(rho_a @ pa[0]).real + np.trace(rho_b @ pb[0]).real)
    return float(c_pair * (w[0] + w[1] + w[2] - w[3]) + c_marg * marg + c0)


def observable_matrix(alpha, s: float, cutoff: int, s_measured: float | None = None,
                      terms: int | None = None) -> np.ndarray:
    """Matrix of O(alpha; s) on the first ``cutoff + 1`` Fock states.

    With ``s_measured`` the projector sum is taken at that parameter while
    the affine coefficients stay those of ``s``: this is the observable a
    lossy detector actually records when the target is ``s``.
    """
    s = check_s(s)
    pi = fock.pi_matrix(alpha, s if s_measured is None else s_measured, cutoff, terms)
    eye = np.eye(cutoff + 1)
    if s > -1.0:
        return (1.0 - s) * pi + s * eye
    return 2.0 * pi - eye


def bell_value_via_operator(state: StateModel, settings: MeasurementSettings, ctx: BellContext,
                            cutoff: int | None = None) -> BellValue:
    """Bell value from explicit operator traces in a truncated Fock space."""
    sp = ctx.s_eff
    if cutoff is None:
        cutoff = fock.cutoff_for(state, settings.radius(), sp)
    rho = fock.build_density(state, cutoff)
    a1, a2, b1, b2 = settings.as_tuple()
    obs = {}
    for key, z, mode in (("a1", a1, "a"), ("a2", a2, "a"), ("b1", b1, "b"), ("b2", b2, "b")):
        # projector sum at s', affine coefficients at the target s
        pi = fock.pi_on_support(z, sp, rho.reduced(mode), cutoff)
        eye = np.eye(len(pi))
        obs[key] = (1.0 - ctx.s) * pi + ctx.s * eye if ctx.s > -1.0 else 2.0 * pi - eye

    def corr(a, b):
        val = rho.expectation(obs[a], obs[b])
        if abs(val.imag) > fock.IMAG_TOL:
            raise ArithmeticError(f"correlator has imaginary residue {val.imag:.3e}")
        return val.real

    value = corr("a1", "b1") + corr("a1", "b2") + corr("a2", "b1") - corr("a2", "b2")
    return BellValue(float(value))
