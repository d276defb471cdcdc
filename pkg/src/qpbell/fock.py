"""Brute-force quasiprobabilities in a truncated two-mode Fock space.

This is the independent check on :mod:`qpbell.kernels`: it never uses the
closed forms, only displacement matrix elements, the weighted projector
sum Pi(alpha; s) = sum_n t^n D(alpha)|n><n|D(alpha)^dagger with
t = (s+1)/(s-1), and traces against explicit density matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from scipy import special, stats

from qpbell.kernels import (
    PI,
    DomainError,
    GenericFock,
    SinglePhotonEntangled,
    StateModel,
    Tmss,
    check_point,
    check_s,
)

TAIL_TOL = 1e-12  # discarded state weight
TRACE_TOL = 1e-10  # bound on the discarded part of a Pi-series trace
IMAG_TOL = 1e-10
MIN_CUTOFF = 40


class InadequateCutoff(RuntimeError):
    """The Fock truncation is too small for the requested accuracy."""


def series_ratio(s: float) -> float:
    """t = (s+1)/(s-1), the geometric weight of the n-th displaced projector."""
    return (s + 1.0) / (s - 1.0)


# -- displacement operator ---------------------------------------------------


def displacement_element(m: int, n: int, alpha) -> complex:
    """<m|D(alpha)|n> from the associated-Laguerre closed form.

    The Laguerre polynomial is carried in the scaled form
    h_j = x^(k/2) e^(-x/2) sqrt(j!/(j+k)!) L_j^(k)(x), which stays O(1)
    where the bare polynomial and factorial ratio would over/underflow.
    """
    if m < 0 or n < 0:
        raise DomainError("Fock indices must be non-negative")
    alpha = check_point(alpha)
    if m >= n:
        k, j, phase = m - n, n, np.exp(1j * (m - n) * np.angle(alpha))
    else:
        k, j = n - m, m
        phase = (-1) ** k * np.exp(-1j * k * np.angle(alpha))
    x = abs(alpha) ** 2
    if x == 0.0:
        return complex(k == 0)
    h_prev, h = 0.0, math.exp(0.5 * k * math.log(x) - 0.5 * x - 0.5 * math.lgamma(k + 1))
    for i in range(j):
        h_prev, h = h, ((2 * i + 1 + k - x) * h - math.sqrt(i * (i + k)) * h_prev) / math.sqrt(
            (i + 1) * (i + 1 + k)
        )
    return complex(h * phase)


@lru_cache(maxsize=16)
def _recurrence_coefficients(size: int):
    i = np.arange(size, dtype=float)[:, None]
    k = np.arange(size, dtype=float)[None, :]
    a = 2.0 * i + 1.0 + k
    b = np.sqrt(i * (i + k))
    c = 1.0 / np.sqrt((i + 1.0) * (i + 1.0 + k))
    half_log_fact = 0.5 * special.gammaln(k[0] + 1.0)
    return a, b, c, k[0], half_log_fact


def _scaled_laguerre_table(x: float, size: int) -> np.ndarray:
    """H[j, k] = h_j^(k)(x) for 0 <= j, k < size."""
    H = np.zeros((size, size))
    if x == 0.0:
        H[:, 0] = 1.0
        return H
    a, b, c, k, half_log_fact = _recurrence_coefficients(size)
    with np.errstate(under="ignore"):
        H[0] = np.exp(0.5 * k * math.log(x) - 0.5 * x - half_log_fact)
        if size > 1:
            H[1] = (a[0] - x) * H[0] * c[0]
        for i in range(1, size - 1):
            H[i + 1] = ((a[i] - x) * H[i] - b[i] * H[i - 1]) * c[i]
    return H


@lru_cache(maxsize=32)
def _index_grid(rows: int, cols: int):
    m = np.arange(rows)[:, None]
    n = np.arange(cols)[None, :]
    k = np.abs(m - n)
    sign = np.where((m < n) & (k % 2 == 1), -1.0, 1.0)
    return np.minimum(m, n), k, m >= n, sign


def displacement_matrix(alpha, rows: int, cols: int | None = None) -> np.ndarray:
    """Block <m|D(alpha)|n> for m < rows, n < cols (exact, not a truncated expm)."""
    alpha = check_point(alpha)
    cols = rows if cols is None else cols
    size = max(rows, cols)
    H = _scaled_laguerre_table(abs(alpha) ** 2, size)
    j, k, lower, sign = _index_grid(rows, cols)
    # lower triangle carries e^{ik theta}, upper (-1)^k e^{-ik theta}
    rot = np.exp(1j * np.angle(alpha) * np.arange(size))
    phase = np.where(lower, rot[k], rot[k].conj())
    return sign * H[j, k] * phase


def pi_matrix(alpha, s: float, cutoff: int, terms: int | None = None) -> np.ndarray:
    """Pi(alpha; s) restricted to the first ``cutoff + 1`` Fock states.

    The projector sum runs over n <= ``terms`` (default ``cutoff``); only the
    outer projection is truncated, the displaced number states themselves
    are exact.
    """
    s = check_s(s)
    if cutoff < 1:
        raise DomainError(f"cutoff must be >= 1, got {cutoff}")
    terms = cutoff if terms is None else max(terms, cutoff)
    D = displacement_matrix(alpha, cutoff + 1, terms + 1)
    weights = series_ratio(s) ** np.arange(terms + 1)
    return (D * weights) @ D.conj().T


# -- density matrices --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    """Two-mode density matrix kept as a weighted sum of pure components.

    ``amplitudes[i]`` is the dim_a x dim_b coefficient matrix C of the
    i-th component |psi_i> = sum C[n_a, n_b] |n_a, n_b>.  The full
    (dim_a*dim_b)^2 matrix, mode-A-major, is only built on demand.
    """

    dim_a: int
    dim_b: int
    weights: np.ndarray
    amplitudes: np.ndarray
    tail_weight: float = 0.0
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_vector(cls, psi, dim_a: int | None = None, dim_b: int | None = None, **kw):
        psi = np.asarray(psi, dtype=complex)
        if psi.ndim == 1:
            psi = psi.reshape(dim_a, dim_b)
        return cls(psi.shape[0], psi.shape[1], np.ones(1), psi[None].copy(), **kw)

    @classmethod
    def from_matrix(cls, entries, dim_a: int, dim_b: int, **kw):
        rho = np.asarray(entries, dtype=complex)
        d = dim_a * dim_b
        if rho.shape != (d, d):
            raise DomainError(f"expected a {d}x{d} matrix, got {rho.shape}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise DomainError("density matrix is not Hermitian")
        w, v = np.linalg.eigh(rho)
        if w[0] < -1e-10:
            raise DomainError(f"density matrix is not positive semidefinite (min eig {w[0]:.3e})")
        keep = w > 1e-15 * max(w[-1], 1e-300)
        amps = v[:, keep].T.reshape(-1, dim_a, dim_b)
        return cls(dim_a, dim_b, w[keep].copy(), amps, **kw)

    @classmethod
    def product(cls, rho_a, rho_b, **kw):
        """rho_a (x) rho_b from two single-mode density matrices."""
        rho_a = np.asarray(rho_a, dtype=complex)
        rho_b = np.asarray(rho_b, dtype=complex)
        wa, va = np.linalg.eigh(rho_a)
        wb, vb = np.linalg.eigh(rho_b)
        ws, amps = [], []
        for i in np.flatnonzero(wa > 1e-15):
            for j in np.flatnonzero(wb > 1e-15):
                ws.append(wa[i] * wb[j])
                amps.append(np.outer(va[:, i], vb[:, j]))
        return cls(len(rho_a), len(rho_b), np.array(ws), np.array(amps), **kw)

    def padded(self, dim_a: int, dim_b: int | None = None) -> "FockDensityMatrix":
        """The same state embedded in a larger Fock space (zero amplitudes)."""
        dim_b = dim_a if dim_b is None else dim_b
        if dim_a < self.dim_a or dim_b < self.dim_b:
            raise DomainError("padding cannot shrink the Fock space")
        amps = np.zeros((len(self.weights), dim_a, dim_b), dtype=complex)
        amps[:, : self.dim_a, : self.dim_b] = self.amplitudes
        return FockDensityMatrix(dim_a, dim_b, self.weights, amps, self.tail_weight, dict(self.meta))

    @property
    def entries(self) -> np.ndarray:
        flat = self.amplitudes.reshape(len(self.weights), -1)
        return (flat.T * self.weights) @ flat.conj()

    def trace(self) -> float:
        return float(np.sum(self.weights * np.sum(np.abs(self.amplitudes) ** 2, axis=(1, 2))))

    @cached_property
    def _reduced(self):
        C = self.amplitudes
        return {
            "a": np.einsum("i,iab,icb->ac", self.weights, C, C.conj(), optimize=True),
            "b": np.einsum("i,iab,iac->bc", self.weights, C, C.conj(), optimize=True),
        }

    def reduced(self, mode: str = "a") -> np.ndarray:
        """Reduced single-mode density matrix of mode ``"a"`` or ``"b"``."""
        if mode not in ("a", "b"):
            raise ValueError(f"mode must be 'a' or 'b', got {mode!r}")
        return self._reduced[mode]

    def expectation(self, A: np.ndarray, B: np.ndarray) -> complex:
        """Tr[rho (A (x) B)], accumulated component by component."""
        C = self.amplitudes
        # Tr(C^dagger A C B^T) for each component
        vals = np.sum(C.conj() * (A @ C @ B.T), axis=(1, 2))
        return complex(np.sum(self.weights * vals))


def tmss_min_cutoff(r: float, tail_tol: float = TAIL_TOL) -> int:
    """Smallest n_max whose discarded TMSS weight tanh(r)^(2(n_max+1)) <= tail_tol."""
    return max(1, math.ceil(math.log(tail_tol) / (2.0 * math.log(math.tanh(r)))) - 1)


def build_density(state: StateModel, cutoff: int, tail_tol: float = TAIL_TOL) -> FockDensityMatrix:
    if isinstance(state, GenericFock):
        return state.rho
    if cutoff < 1:
        raise InadequateCutoff(f"cutoff must be >= 1, got {cutoff}")
    dim = cutoff + 1
    C = np.zeros((dim, dim), dtype=complex)
    if isinstance(state, SinglePhotonEntangled):
        C[0, 1] = C[1, 0] = 1.0 / math.sqrt(2.0)
        return FockDensityMatrix.from_vector(C)
    if isinstance(state, Tmss):
        tau = math.tanh(state.r)
        tail = tau ** (2 * dim)
        if tail > tail_tol:
            raise InadequateCutoff(
                f"TMSS r={state.r} at cutoff {cutoff} discards weight {tail:.3e} > {tail_tol:.1e}; "
                f"need cutoff >= {tmss_min_cutoff(state.r, tail_tol)}"
            )
        n = np.arange(dim)
        C[n, n] = tau**n / math.cosh(state.r)
        return FockDensityMatrix.from_vector(C, tail_weight=tail)
    raise TypeError(f"unknown state model {state!r}")


# -- oracle traces -----------------------------------------------------------


def pi_on_support(alpha, s: float, rho1, terms: int | None = None, trace_tol: float = TRACE_TOL,
                  limit: int = 4000):
    """Pi(alpha; s) on the support of ``rho1``, flagging a truncated series.

    The weights q_n = <alpha, n|rho1|alpha, n> sum to Tr rho1, so the
    discarded part of Tr[rho1 Pi] is at most |t|^(N+1) (Tr rho1 - sum q_n).
    Without ``terms`` the series length N starts at the support size and
    doubles until that bound meets ``trace_tol``;
    with ``terms`` it is fixed and :class:`InadequateCutoff` is raised
    instead.
    """
    dim = len(rho1)
    grow = terms is None
    terms = max(dim - 1, 1 if grow else terms)
    t = series_ratio(s)
    trace = np.trace(rho1).real
    while True:
        D = displacement_matrix(alpha, dim, terms + 1)
        q = np.sum(D.conj() * (rho1 @ D), axis=0).real
        tail = abs(t) ** (terms + 1) * max(trace - q.sum(), 0.0)
        if tail <= trace_tol:
            return (D * t ** np.arange(terms + 1)) @ D.conj().T
        if not grow or terms >= limit:
            raise InadequateCutoff(
                f"Pi series beyond n={terms} may carry {tail:.3e} > {trace_tol:.1e} "
                f"at alpha={alpha}, s={s}"
            )
        terms = min(2 * terms, limit)


def w_pair_oracle(rho: FockDensityMatrix, alpha, beta, s: float, terms: int | None = None,
                  trace_tol: float = TRACE_TOL):
    """(4 / (pi^2 (1-s)^2)) Tr[rho Pi(alpha; s) (x) Pi(beta; s)]."""
    s = check_s(s)
    if np.ndim(alpha) or np.ndim(beta):
        a, b = np.broadcast_arrays(np.asarray(alpha, complex), np.asarray(beta, complex))
        out = [w_pair_oracle(rho, x, y, s, terms, trace_tol) for x, y in zip(a.ravel(), b.ravel())]
        return np.array(out).reshape(a.shape)
    pa = pi_on_support(alpha, s, rho.reduced("a"), terms, trace_tol)
    pb = pi_on_support(beta, s, rho.reduced("b"), terms, trace_tol)
    val = rho.expectation(pa, pb)
    if abs(val.imag) > IMAG_TOL:
        raise ArithmeticError(f"trace has imaginary residue {val.imag:.3e}")
    return 4.0 / (PI**2 * (1.0 - s) ** 2) * val.real


def w_single_oracle(rho1, alpha, s: float, terms: int | None = None, trace_tol: float = TRACE_TOL):
    """(2 / (pi (1-s))) Tr[rho1 Pi(alpha; s)] for a single-mode density matrix."""
    s = check_s(s)
    rho1 = np.asarray(rho1, dtype=complex)
    if np.ndim(alpha):
        a = np.asarray(alpha, complex)
        return np.array([w_single_oracle(rho1, x, s, terms, trace_tol) for x in a.ravel()]).reshape(a.shape)
    val = np.trace(rho1 @ pi_on_support(alpha, s, rho1, terms, trace_tol))
    if abs(val.imag) > IMAG_TOL:
        raise ArithmeticError(f"trace has imaginary residue {val.imag:.3e}")
    return 2.0 / (PI * (1.0 - s)) * val.real


# -- photon statistics and loss ----------------------------------------------


def photon_distribution(rho_single_mode) -> np.ndarray:
    p = np.real(np.diagonal(np.asarray(rho_single_mode)))
    return np.clip(p, 0.0, None)


def check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"efficiency must lie in (0, 1], got eta={eta}")
    return eta


def loss_matrix(eta: float, size: int) -> np.ndarray:
    """L[m, n] = C(n, m) eta^m (1-eta)^(n-m), the binomial photon-loss map."""
    eta = check_eta(eta)
    n = np.arange(size)
    return stats.binom.pmf(n[:, None], n[None, :], eta)


def apply_loss(p, eta: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return loss_matrix(eta, len(p)) @ p


def measured_w_origin(p, s: float, eta: float) -> float:
    """Quasiprobability at the origin as recorded by a detector of efficiency eta."""
    s = check_s(s)
    p_eta = apply_loss(p, eta)
    t = series_ratio(s)
    return 2.0 / (PI * (1.0 - s)) * float(np.sum(t ** np.arange(len(p_eta)) * p_eta))


# -- truncation --------------------------------------------------------------


def _mode_weights(state: StateModel, tail_tol: float):
    if isinstance(state, SinglePhotonEntangled):
        return [np.array([0.5, 0.5])]
    if isinstance(state, Tmss):
        n = np.arange(tmss_min_cutoff(state.r, tail_tol) + 1)
        tau2 = math.tanh(state.r) ** 2
        return [(1.0 - tau2) * tau2**n]
    if isinstance(state, GenericFock):
        return [photon_distribution(state.rho.reduced(m)) for m in ("a", "b")]
    raise TypeError(f"unknown state model {state!r}")


def cutoff_for(state: StateModel, settings_radius: float, s_min: float, floor: int = MIN_CUTOFF,
               tail_tol: float = TAIL_TOL, trace_tol: float = TRACE_TOL, limit: int = 4000) -> int:
    """Fock cutoff adequate for traces with |alpha|, |beta| <= settings_radius.

    The damping |t|^n is evaluated at ``s_min``; pass the s of the range
    with the largest |(s+1)/(s-1)|.  The displaced photon-number tail of
    each populated level k is bounded by a Poisson law of mean
    (sqrt(k) + radius)^2.
    """
    if settings_radius < 0:
        raise DomainError("settings_radius must be >= 0")
    t = abs(series_ratio(check_s(s_min)))
    weights = _mode_weights(state, tail_tol)
    n_state = max(len(w) - 1 for w in weights)
    candidates = np.arange(max(floor, n_state), limit + 1)
    worst = np.zeros(len(candidates))
    for w in weights:
        lam = (np.sqrt(np.arange(len(w))) + settings_radius) ** 2
        tails = stats.poisson.sf(candidates[:, None] - 1, lam[None, :]) @ w
        worst = np.maximum(worst, tails)
    with np.errstate(under="ignore"):
        est = t ** candidates.astype(float) * worst
    ok = np.flatnonzero(est <= trace_tol)
    if len(ok) == 0:
        raise InadequateCutoff(f"no cutoff up to {limit} meets the trace tolerance")
    return int(candidates[ok[0]])
