import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special
from scipy.linalg import expm

from qpbell import fock, kernels
from qpbell.fock import FockDensityMatrix, InadequateCutoff
from qpbell.kernels import DomainError, GenericFock, SinglePhotonEntangled, Tmss

PI = math.pi


def expm_displacement(alpha, size):
    """Independent oracle: exp(alpha a^dag - conj(alpha) a), truncated well above size."""
    big = size + 60
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)[:size, :size]


def kraus_loss(rho, eta):
    """rho -> sum_k K_k rho K_k^dag with K_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|."""
    dim = len(rho)
    out = np.zeros_like(rho, dtype=complex)
    for k in range(dim):
        K = np.zeros((dim, dim))
        for n in range(k, dim):
            K[n - k, n] = math.sqrt(special.comb(n, k) * eta ** (n - k) * (1 - eta) ** k)
        out += K @ rho @ K.T
    return out


def vacuum_state(dim=2):
    C = np.zeros((dim, dim))
    C[0, 0] = 1
    return FockDensityMatrix.from_vector(C)


# -- displacement ------------------------------------------------------------


def test_displacement_element_examples():
    assert fock.displacement_element(3, 3, 0) == 1
    assert fock.displacement_element(1, 0, 0.5) == pytest.approx(0.5 * math.exp(-0.125), abs=1e-15)
    E = expm_displacement(0.3j, 5)
    assert abs(fock.displacement_element(0, 2, 0.3j) - E[0, 2]) < 1e-12
    assert abs(fock.displacement_element(0, 2, 0.3j) - np.conj(fock.displacement_element(2, 0, 0.3j))) < 1e-12


@pytest.mark.parametrize("alpha", [0.0, 0.5, -1.2j, 1.3 - 0.4j, 2.5 + 1.5j])
def test_displacement_matrix_matches_expm(alpha):
    D = fock.displacement_matrix(alpha, 30, 35)
    assert np.abs(D - expm_displacement(alpha, 35)[:30, :35]).max() < 1e-12
    for m, n in [(0, 0), (4, 1), (2, 7), (29, 34)]:
        assert abs(D[m, n] - fock.displacement_element(m, n, alpha)) < 1e-13


def test_displacement_unitary_at_high_photon_number():
    # rows of a large block stay orthonormal where the truncation is harmless
    D = fock.displacement_matrix(3.0 + 1.0j, 200, 400)
    G = D @ D.conj().T
    assert np.abs(G - np.eye(200)).max() < 1e-10


# -- projector sums ----------------------------------------------------------


def test_pi_matrix_examples():
    assert np.allclose(fock.pi_matrix(0, 0.0, 4), np.diag([1, -1, 1, -1, 1]), atol=1e-15)
    assert np.allclose(fock.pi_matrix(0, -1.0, 4), np.diag([1, 0, 0, 0, 0]), atol=1e-15)
    s, alpha = -0.5, 0.4
    pi = fock.pi_matrix(alpha, s, 40)
    w_vac = 2 / (PI * (1 - s)) * math.exp(-2 * abs(alpha) ** 2 / (1 - s))
    assert pi[0, 0].real == pytest.approx(PI * (1 - s) / 2 * w_vac, abs=1e-12)


@pytest.mark.parametrize("s", [0.0, -0.3, -1.0, -2.0])
def test_pi_matrix_spectrum_and_hermiticity(s):
    pi = fock.pi_matrix(0.7 - 0.2j, s, 40)
    assert np.abs(pi - pi.conj().T).max() < 1e-12
    ev = np.linalg.eigvalsh(pi)
    assert ev.min() >= -1 - 1e-10 and ev.max() <= 1 + 1e-10
    # the displaced vacuum is the n = 0 eigenvector with eigenvalue 1
    coh = fock.displacement_matrix(0.7 - 0.2j, 41, 1)[:, 0]
    assert np.vdot(coh, pi @ coh).real == pytest.approx(1.0, abs=1e-10)


def test_pi_on_support_flags_fixed_truncation():
    with pytest.raises(InadequateCutoff):
        fock.pi_on_support(1.5, -0.1, np.eye(3) / 3, terms=2)


def test_pi_on_support_grows_series_for_small_support():
    # vacuum on a two-level support, displaced far from the origin
    rho1 = np.diag([1.0, 0.0])
    pi = fock.pi_on_support(2.0, -0.2, rho1)
    expected = math.exp(-2 * 4.0 / 1.2)  # pi(1-s)/2 * vacuum W
    assert pi[0, 0].real == pytest.approx(expected, abs=1e-10)


# -- density matrices --------------------------------------------------------


def test_build_density_single_photon():
    rho = fock.build_density(SinglePhotonEntangled(), 1)
    E = rho.entries
    assert np.linalg.matrix_rank(E) == 1
    # |0,1> is index 1 and |1,0> index 2 in mode-A-major order
    expected = np.zeros((4, 4))
    expected[np.ix_([1, 2], [1, 2])] = 0.5
    assert np.allclose(E, expected, atol=1e-15)


def test_build_density_tmss_weights():
    r = 0.4
    rho = fock.build_density(Tmss(r), 20)
    n = np.arange(21)
    expected = np.cosh(r) ** -2 * np.tanh(r) ** (2 * n)
    assert np.allclose(np.diagonal(rho.reduced("a")).real, expected, atol=1e-15)
    assert np.abs(rho.entries - rho.entries.conj().T).max() < 1e-12


def test_tmss_min_cutoff():
    r = 1.2
    N = fock.tmss_min_cutoff(r)
    assert N == math.ceil(math.log(1e-12) / (2 * math.log(math.tanh(r)))) - 1
    tau2 = math.tanh(r) ** 2
    tail = lambda n: 1 - (1 - tau2) * sum(tau2**k for k in range(n + 1))
    assert tail(N) <= 1.0001e-12 < tail(N - 1)
    fock.build_density(Tmss(r), N)
    with pytest.raises(InadequateCutoff):
        fock.build_density(Tmss(r), N - 2)


def test_from_matrix_validation():
    with pytest.raises(DomainError):
        FockDensityMatrix.from_matrix(np.array([[0.5, 0.1], [0.2, 0.5]]), 1, 2)
    with pytest.raises(DomainError):
        FockDensityMatrix.from_matrix(np.diag([1.5, -0.5]), 1, 2)
    rho = FockDensityMatrix.from_matrix(np.diag([0.25, 0.75]), 1, 2)
    assert rho.trace() == pytest.approx(1.0)


def test_product_state_partial_traces():
    ra = np.diag([0.7, 0.3])
    rb = np.array([[0.5, 0.2], [0.2, 0.5]])
    rho = FockDensityMatrix.product(ra, rb)
    assert np.allclose(rho.reduced("a"), ra)
    assert np.allclose(rho.reduced("b"), rb)
    assert np.allclose(rho.entries, np.kron(ra, rb))


def test_padding_preserves_values():
    rho = fock.build_density(SinglePhotonEntangled(), 1)
    big = rho.padded(10)
    for s in (0.0, -0.8):
        assert fock.w_pair_oracle(rho, 0.3, 0.1j, s, terms=40) == pytest.approx(
            fock.w_pair_oracle(big, 0.3, 0.1j, s, terms=40), abs=1e-14)


# -- oracle traces -----------------------------------------------------------


def test_w_pair_oracle_examples():
    assert fock.w_pair_oracle(vacuum_state(), 0, 0, 0.0) == pytest.approx(4 / PI**2, abs=1e-15)
    spe = fock.build_density(SinglePhotonEntangled(), 1)
    assert fock.w_pair_oracle(spe, 0, 0, 0.0) == pytest.approx(-4 / PI**2, abs=1e-15)
    tm = fock.build_density(Tmss(0.6), fock.cutoff_for(Tmss(0.6), 0.2, -0.8))
    assert abs(fock.w_pair_oracle(tm, 0.2, -0.1, -0.8) - kernels.w_tmss_pair(0.2, -0.1, -0.8, 0.6)) < 1e-8


@pytest.mark.parametrize("state,radius,s", [
    (SinglePhotonEntangled(), 1.5, -2.0),
    (SinglePhotonEntangled(), 1.5, 0.0),
    (Tmss(0.4), 1.5, -1.0),
    (Tmss(1.0), 1.5, -0.5),
])
def test_doubling_stability(state, radius, s):
    N = fock.cutoff_for(state, radius, s)
    small, large = fock.build_density(state, N), fock.build_density(state, 2 * N)
    for a, b in [(0.0, 0.0), (radius, -radius * 1j), (0.6 + 0.3j, -0.9)]:
        w1 = fock.w_pair_oracle(small, a, b, s, N)
        w2 = fock.w_pair_oracle(large, a, b, s, 2 * N)
        assert abs(w1 - w2) < 1e-9


# -- photon statistics and loss ----------------------------------------------


def test_photon_distribution_examples():
    assert np.allclose(fock.photon_distribution(vacuum_state().reduced("a")), [1, 0])
    spe = fock.build_density(SinglePhotonEntangled(), 3)
    assert np.allclose(fock.photon_distribution(spe.reduced("a")), [0.5, 0.5, 0, 0])
    r = 0.4
    p = fock.photon_distribution(fock.build_density(Tmss(r), 20).reduced("b"))
    assert np.allclose(p, np.cosh(r) ** -2 * np.tanh(r) ** (2 * np.arange(21)))


def test_apply_loss_examples():
    assert np.allclose(fock.apply_loss([0, 1], 0.5), [0.5, 0.5])
    p = np.array([0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(fock.apply_loss(p, 1.0), p)
    assert np.allclose(fock.apply_loss([0, 0, 1], 0.8), [0.04, 0.32, 0.64], atol=1e-15)


@pytest.mark.parametrize("eta", [0.0, -0.1, 1.01])
def test_efficiency_domain(eta):
    with pytest.raises(DomainError):
        fock.apply_loss([1.0], eta)


distributions = st.lists(st.floats(0, 1), min_size=1, max_size=30).filter(lambda v: sum(v) > 0)
etas = st.floats(0.01, 1.0)


@given(distributions, etas)
def test_apply_loss_stochastic(p, eta):
    out = fock.apply_loss(p, eta)
    assert out.min() >= 0
    assert abs(out.sum() - sum(p)) < 1e-12


@given(distributions, etas, etas)
def test_apply_loss_composition(p, eta1, eta2):
    lhs = fock.apply_loss(fock.apply_loss(p, eta1), eta2)
    rhs = fock.apply_loss(p, eta1 * eta2)
    assert np.abs(lhs - rhs).max() < 1e-12


def test_loss_matches_kraus_channel():
    rho = fock.build_density(Tmss(0.7), 30).reduced("a")
    lossy = kraus_loss(rho, 0.65)
    assert np.trace(lossy).real == pytest.approx(np.trace(rho).real, abs=1e-12)
    assert np.allclose(np.diagonal(lossy).real, fock.apply_loss(fock.photon_distribution(rho), 0.65), atol=1e-13)


def test_measured_w_origin_examples():
    for s in (0.0, -0.7, -2.0):
        for eta in (1.0, 0.4):
            assert fock.measured_w_origin([1.0], s, eta) == pytest.approx(2 / (PI * (1 - s)))
    assert fock.measured_w_origin([0, 1], 0.0, 1.0) == pytest.approx(-2 / PI)
    assert fock.measured_w_origin([0, 1], 0.0, 0.7) == pytest.approx(2 / PI * (-0.4))


@pytest.mark.parametrize("alpha", [0.0, 0.4 - 0.3j, 1.1j])
@pytest.mark.parametrize("eta", [0.6, 0.8, 1.0])
def test_lossy_detection_at_displaced_points(alpha, eta):
    """Binomial loss applied after displacement reproduces W at the remapped s."""
    from qpbell.bell import effective_s

    rho = fock.build_density(Tmss(0.5), 40).reduced("a")
    D = fock.displacement_matrix(alpha, 41, 121)
    rho_disp = D.conj().T @ rho @ D  # D(alpha)^dag rho D(alpha)
    p = fock.photon_distribution(kraus_loss(rho_disp, eta))
    for s in (0.0, -0.5, -1.0):
        measured = fock.measured_w_origin(p, s, 1.0)
        expected = kernels.w_tmss_marginal(alpha, effective_s(s, eta), 0.5) / eta
        assert abs(measured - expected) < 1e-8


# -- truncation --------------------------------------------------------------


def test_cutoff_for_examples():
    assert fock.cutoff_for(SinglePhotonEntangled(), 1.5, -2.0) == 40
    assert fock.cutoff_for(Tmss(0.4), 1.5, -1.0) == 40
    n = fock.cutoff_for(Tmss(2.0), 2.0, -0.1)
    assert n > 40
    state = Tmss(2.0)
    small, large = fock.build_density(state, n), fock.build_density(state, 2 * n)
    w1 = fock.w_pair_oracle(small, 2.0, -2.0, -0.1, n)
    w2 = fock.w_pair_oracle(large, 2.0, -2.0, -0.1, 2 * n)
    assert abs(w1 - w2) < 1e-9
    assert abs(w1 - kernels.w_tmss_pair(2.0, -2.0, -0.1, 2.0)) < 1e-8


def test_cutoff_for_generic_state():
    rho = fock.build_density(SinglePhotonEntangled(), 1)
    assert fock.cutoff_for(GenericFock(rho), 1.0, -1.0) == 40
    with pytest.raises(DomainError):
        fock.cutoff_for(GenericFock(rho), -1.0, -1.0)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.95, -0.05), st.floats(0.1, 0.8))  # full entries are N^4
def test_constructed_matrices_hermitian(s, r):
    rho = fock.build_density(Tmss(r), fock.tmss_min_cutoff(r))
    for M in (rho.entries, rho.reduced("a"), fock.pi_matrix(0.3 + 0.2j, s, 30)):
        assert np.abs(M - M.conj().T).max() < 1e-12
