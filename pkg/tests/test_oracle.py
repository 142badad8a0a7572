from functools import reduce

import numpy as np
import pytest
import scipy.linalg as sla

from toric_memory.bound import magnetization_bound, site_term
from toric_memory.model import CouplingModel, build_uniform, flip_site
from toric_memory.oracle import (
    DenseChain,
    ResourceError,
    UndefinedPhaseError,
    dense_hamiltonian,
    exact_magnetization,
    exact_sample,
    format_samples,
    ghz_sector_phase,
    ghz_state,
)

X = np.array([[0.0, 1.0], [1.0, 0.0]])
Z = np.diag([1.0, -1.0])


def op_at(op, site, n):
    return reduce(np.kron, [op if k == site else np.eye(2) for k in range(1, n + 1)])


def pauli_hamiltonian(model):
    n = model.n_sites
    h = np.zeros((2**n, 2**n))
    for k in range(1, n + 1):
        nxt = k % n + 1
        h -= model.couplings[k - 1] * op_at(Z, k, n) @ op_at(Z, nxt, n)
        h += model.fields[k - 1] * op_at(X, k, n)
    return h


def test_two_site_unperturbed():
    h = dense_hamiltonian(build_uniform(2, 1, 0))
    np.testing.assert_array_equal(h, np.diag([-2.0, 2.0, 2.0, -2.0]))


@pytest.mark.parametrize(
    "model",
    [build_uniform(3, 1, 0.5), CouplingModel(5, [1, 0.6, 0.8, 1.3, 0.9], [0.2, -0.1, 0.4, 0.0, 0.3])],
)
def test_matches_pauli_tensor_sum(model):
    h = dense_hamiltonian(model)
    np.testing.assert_allclose(h, pauli_hamiltonian(model), atol=1e-14)
    np.testing.assert_array_equal(h, h.T)


def test_flip_site_is_z_conjugation():
    m = CouplingModel(4, [1, 0.6, 0.8, 1.3], [0.2, -0.1, 0.4, 0.3])
    for n in range(1, 5):
        zn = op_at(Z, n, 4)
        np.testing.assert_allclose(dense_hamiltonian(flip_site(m, n)), zn @ dense_hamiltonian(m) @ zn, atol=1e-14)


def test_state_matches_expm():
    m = CouplingModel(6, [1, 0.6, 0.8, 1.3, 0.9, 1.0], [0.2, -0.1, 0.4, 0.0, 0.3, 0.25])
    psi0 = np.zeros(64)
    psi0[0] = 1
    for t in (0.5, 4.0, 31.0):
        np.testing.assert_allclose(DenseChain(m).state(t), sla.expm(-1j * t * dense_hamiltonian(m)) @ psi0, atol=1e-10)


def test_magnetization_trivial_cases():
    m = CouplingModel(6, [1, 0.6, 0.8, 1.3, 0.9, 1.0], [0.2, -0.1, 0.4, 0.0, 0.3, 0.25])
    assert exact_magnetization(m, 0.0) == pytest.approx(1.0)
    np.testing.assert_allclose(exact_magnetization(build_uniform(7, 1, 0), [0.0, 3.0, 100.0]), 1.0, atol=1e-12)


def test_unitarity_parity_and_time_reversal():
    m = build_uniform(8, 1.0, 0.3)
    chain = DenseChain(m)
    for t in (0.7, 5.0, 50.0):
        assert np.linalg.norm(chain.state(t)) == pytest.approx(1.0, abs=1e-10)
        assert chain.x_parity(t) == pytest.approx(chain.x_parity(0.0), abs=1e-10)
        assert chain.magnetization(t) == pytest.approx(chain.magnetization(-t), abs=1e-12)


def test_exact_below_bound():
    m = build_uniform(8, 1.0, 0.3)
    for t in np.linspace(0, 20, 21):
        assert exact_magnetization(m, t) <= magnetization_bound(m, t) + 1e-8


def test_bound_term_is_ghz_overlap():
    # the per-site term equals |<GHZ+| e^{i Z_n H Z_n t} e^{-iHt} |GHZ+>|
    m = CouplingModel(6, [1, 0.6, 0.8, 1.3, 0.9, 1.0], [0.2, -0.1, 0.4, 0.05, 0.3, 0.25])
    h = dense_hamiltonian(m)
    ghz = ghz_state(6, 1)
    for n in (1, 4):
        hn = dense_hamiltonian(flip_site(m, n))
        for t in (0.8, 6.0):
            exact = abs(ghz @ sla.expm(1j * t * hn) @ sla.expm(-1j * t * h) @ ghz)
            assert site_term(m, n, t) == pytest.approx(exact, abs=1e-10)


def test_ghz_phase_trivial():
    m = build_uniform(6, 1.0, 0.3)
    assert ghz_sector_phase(m, 0.0) == pytest.approx(0.0, abs=1e-14)
    assert ghz_sector_phase(build_uniform(6, 1.0, 0.0), 7.3) == pytest.approx(0.0, abs=1e-12)


def test_ghz_phase_grows_continuously():
    m = build_uniform(8, 1.0, 0.3)
    ts = np.linspace(0, 0.5, 26)
    theta = np.array([ghz_sector_phase(m, t, flips=0) for t in ts])
    assert theta[0] == 0.0
    assert np.all(np.abs(np.diff(theta)) < 0.05)
    assert np.all(np.diff(np.abs(theta[1:])) > 0)
    flipped = [ghz_sector_phase(m, t, flips=[1, 0, 0, 0, 0, 0, 0, 0]) for t in ts[5:]]
    assert np.all(np.abs(np.diff(flipped)) < 0.1)


def test_ghz_phase_vanishing_overlap():
    with pytest.raises(UndefinedPhaseError):
        ghz_sector_phase(build_uniform(6, 1.0, 0.3), 0.0, flips=0b000001)


def test_ghz_phase_matches_dense_definition():
    m = build_uniform(6, 1.0, 0.3)
    t, mask = 0.9, 0b100000
    u = sla.expm(-1j * t * dense_hamiltonian(m))
    q = op_at(X, 1, 6)
    plus, minus = ghz_state(6, 1), ghz_state(6, -1)
    expected = np.angle((plus @ q @ u @ plus) / (minus @ q @ u @ minus))
    assert ghz_sector_phase(m, t, flips=mask) == pytest.approx(expected, abs=1e-10)


def test_samples_at_zero_time():
    bits = exact_sample(build_uniform(5, 1, 0.3), 0.0, 200, seed=1)
    assert bits.shape == (200, 5) and not bits.any()
    assert format_samples(bits[:2]) == "00000\n00000\n"


def test_samples_match_probabilities():
    m = build_uniform(2, 1.0, 0.2)
    shots, t = 10**5, 3.0
    bits = exact_sample(m, t, shots, seed=7)
    index = bits[:, 0] * 2 + bits[:, 1]
    counts = np.bincount(index, minlength=4)
    p = DenseChain(m).probabilities(t)
    sigma = np.sqrt(shots * p * (1 - p))
    assert np.all(np.abs(counts - shots * p) <= 4 * sigma + 1e-9)


def test_samples_deterministic():
    m = build_uniform(6, 1.0, 0.3)
    np.testing.assert_array_equal(exact_sample(m, 2.0, 100, 3), exact_sample(m, 2.0, 100, 3))


def test_resource_cap():
    with pytest.raises(ResourceError):
        dense_hamiltonian(build_uniform(15, 1, 0.1))
    with pytest.raises(ResourceError):
        exact_magnetization(build_uniform(15, 1, 0.1), 1.0)
