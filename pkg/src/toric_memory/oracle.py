"""Brute-force state-vector reference for small rings (N <= 14).

Basis states are integers s in [0, 2^N); site n (1-based) is bit N - n, so
site 1 is the most significant bit, as in a left-to-right Kronecker product.
H_I commutes with X_L = X^{(x)N}; the evolution is diagonalized separately in
the two X_L sectors, spanned by (|r> +/- |~r>)/sqrt(2) with r < 2^(N-1).
"""

from __future__ import annotations

from functools import cached_property, reduce
from typing import Iterable, Union

import numpy as np
import scipy.linalg as sla

from .model import CouplingModel

MAX_QUBITS = 14


class ResourceError(RuntimeError):
    """Requested dense computation exceeds the oracle's qubit cap."""


class UndefinedPhaseError(ArithmeticError):
    """A sector overlap vanished, so its phase is not defined."""


def _check_size(n: int) -> None:
    if n > MAX_QUBITS:
        raise ResourceError(f"dense oracle is capped at {MAX_QUBITS} qubits, got {n}")


def _bit(n_sites: int, site: int) -> int:
    return 1 << (n_sites - site)


def _z_values(n_sites: int, states: np.ndarray) -> np.ndarray:
    """(len(states), N) array of Z eigenvalues, column j = site j+1."""
    shifts = n_sites - 1 - np.arange(n_sites)
    return 1 - 2 * ((states[:, None] >> shifts) & 1)


def _diagonal(model: CouplingModel, states: np.ndarray) -> np.ndarray:
    z = _z_values(model.n_sites, states)
    return -(z * np.roll(z, -1, axis=1)) @ model.couplings


def dense_hamiltonian(model: CouplingModel) -> np.ndarray:
    """H_I = -sum Delta_n Z_n Z_{n+1} + sum delta_n X_n as a real 2^N x 2^N array."""
    n = model.n_sites
    _check_size(n)
    states = np.arange(2**n)
    h = np.diag(_diagonal(model, states))
    for site in range(1, n + 1):
        h[states, states ^ _bit(n, site)] += model.fields[site - 1]
    return h


def _sector_hamiltonian(model: CouplingModel, parity: int) -> np.ndarray:
    n = model.n_sites
    half = 2 ** (n - 1)
    mask = 2**n - 1
    reps = np.arange(half)
    h = np.diag(_diagonal(model, reps))
    for site in range(1, n + 1):
        target = reps ^ _bit(n, site)
        wrapped = target >= half
        col = np.where(wrapped, target ^ mask, target)
        sign = np.where(wrapped, float(parity), 1.0)
        np.add.at(h, (reps, col), model.fields[site - 1] * sign)
    return h


class DenseChain:
    """Exact dynamics of one ring, diagonalized once per X_L sector."""

    def __init__(self, model: CouplingModel):
        _check_size(model.n_sites)
        self.model = model
        self.n = model.n_sites
        self.half = 2 ** (self.n - 1)
        self.mask = 2**self.n - 1

    @cached_property
    def _sectors(self):
        out = {}
        for parity in (1, -1):
            energies, vecs = sla.eigh(_sector_hamiltonian(self.model, parity))
            out[parity] = (energies, vecs)
        return out

    def sector_evolve(self, parity: int, t: float, rep: int = 0) -> np.ndarray:
        """Sector amplitudes of exp(-iHt)|rep, parity>."""
        energies, vecs = self._sectors[parity]
        return vecs @ (np.exp(-1j * energies * t) * vecs[rep])

    def state(self, t: float) -> np.ndarray:
        """exp(-iHt)|0...0> in the computational basis."""
        plus = self.sector_evolve(1, t)
        minus = self.sector_evolve(-1, t)
        psi = np.empty(2**self.n, dtype=complex)
        reps = np.arange(self.half)
        psi[reps] = 0.5 * (plus + minus)
        psi[reps ^ self.mask] = 0.5 * (plus - minus)
        return psi

    def probabilities(self, t: float) -> np.ndarray:
        p = np.abs(self.state(t)) ** 2
        return p / p.sum()

    @cached_property
    def weights(self) -> np.ndarray:
        """Hamming weight (number of flipped sites) of every basis state."""
        return _popcount(np.arange(2**self.n))

    def magnetization(self, t: float) -> float:
        p = self.probabilities(t)
        return float(np.dot(p, 1 - 2 * self.weights / self.n))

    def x_parity(self, t: float) -> float:
        """<X_L> in exp(-iHt)|0...0>."""
        psi = self.state(t)
        return float(np.real(np.vdot(psi, psi[np.arange(2**self.n) ^ self.mask])))


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x >>= 1
    return count


def exact_magnetization(model: CouplingModel, t: Union[float, Iterable[float]]):
    """<0|e^{iHt} (1/N) sum_n Z_n e^{-iHt}|0>; scalar or array in, same out."""
    chain = DenseChain(model)
    if np.ndim(t) == 0:
        return chain.magnetization(float(t))
    return np.array([chain.magnetization(float(x)) for x in t])


def _flip_mask(n_sites: int, flips) -> int:
    if isinstance(flips, (int, np.integer)):
        mask = int(flips)
    else:
        arr = np.asarray(flips, dtype=int).ravel()
        if arr.size != n_sites or np.any((arr != 0) & (arr != 1)):
            raise ValueError("flip pattern must be an int mask or a length-N 0/1 sequence")
        mask = sum(_bit(n_sites, i + 1) for i, b in enumerate(arr) if b)
    if not 0 <= mask < 2**n_sites:
        raise ValueError("flip pattern out of range")
    return mask


def ghz_sector_phase(model: CouplingModel, t: float, flips=0, tol: float = 1e-12) -> float:
    """Arg of <GHZ+|Q e^{-iHt}|GHZ+> / <GHZ-|Q e^{-iHt}|GHZ->, Q = prod of X over ``flips``.

    ``flips`` is an integer bit mask (site 1 = most significant bit) or a
    length-N 0/1 sequence.
    """
    chain = DenseChain(model)
    q = _flip_mask(model.n_sites, flips)
    rep = q if q < chain.half else q ^ chain.mask
    sign_minus = 1.0 if q < chain.half else -1.0
    plus = chain.sector_evolve(1, t)[rep]
    minus = sign_minus * chain.sector_evolve(-1, t)[rep]
    if abs(plus) < tol or abs(minus) < tol:
        raise UndefinedPhaseError(f"sector overlap vanished (|+|={abs(plus):.2e}, |-|={abs(minus):.2e})")
    return float(np.angle(plus / minus))


def exact_sample(model: CouplingModel, t: float, shots: int, seed: int) -> np.ndarray:
    """(shots, N) uint8 Z-basis outcomes of exp(-iHt)|0...0>; column j = site j+1."""
    chain = DenseChain(model)
    rng = np.random.default_rng(seed)
    outcomes = rng.choice(2**chain.n, size=int(shots), p=chain.probabilities(t))
    shifts = chain.n - 1 - np.arange(chain.n)
    return ((outcomes[:, None] >> shifts) & 1).astype(np.uint8)


def format_samples(bits: np.ndarray) -> str:
    return "".join("".join(map(str, row)) + "\n" for row in bits)


# ---------------------------------------------------------------------------
# Majorana operators and Gaussian states on the full Hilbert space

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Y = np.array([[0.0, -1j], [1j, 0.0]])
_Z = np.diag([1.0, -1.0])
_I = np.eye(2)


def majoranas(n_sites: int) -> list[np.ndarray]:
    """Hermitian c_{2n-1} = (prod_{m<n} X_m) Z_n, c_{2n} = (prod_{m<n} X_m) Y_n."""
    _check_size(n_sites)
    ops = []
    for n in range(n_sites):
        for p in (_Z, _Y):
            factors = [_X] * n + [p] + [_I] * (n_sites - n - 1)
            ops.append(reduce(np.kron, factors).astype(complex))
    return ops


def covariance_of_state(psi: np.ndarray, ops: list[np.ndarray] | None = None) -> np.ndarray:
    """M_jk = i <psi| c_j c_k |psi> for j != k."""
    n = int(round(np.log2(psi.size)))
    ops = majoranas(n) if ops is None else ops
    vecs = [c @ psi for c in ops]
    dim = len(ops)
    m = np.zeros((dim, dim))
    for j in range(dim):
        for k in range(j + 1, dim):
            val = 1j * np.vdot(vecs[j], vecs[k])
            m[j, k] = val.real
            m[k, j] = -val.real
    return m


def gaussian_unitary(generator: np.ndarray, ops: list[np.ndarray]) -> np.ndarray:
    """exp(-iH) with H = (i/4) sum_jk A_jk c_j c_k, A real antisymmetric."""
    dim = generator.shape[0]
    h = sum(generator[j, k] * ops[j] @ ops[k] for j in range(dim) for k in range(dim) if generator[j, k] != 0)
    return sla.expm(-1j * (0.25j * h))


def random_gaussian_state(n_sites: int, rng: np.random.Generator, ops: list[np.ndarray] | None = None) -> np.ndarray:
    """Random pure Gaussian state: a random Gaussian unitary applied to |+...+>."""
    ops = majoranas(n_sites) if ops is None else ops
    a = rng.normal(size=(2 * n_sites, 2 * n_sites))
    a = a - a.T
    plus = reduce(np.kron, [np.array([1.0, 1.0]) / np.sqrt(2)] * n_sites).astype(complex)
    return gaussian_unitary(a, ops) @ plus


def ghz_state(n_sites: int, parity: int = 1) -> np.ndarray:
    psi = np.zeros(2**n_sites)
    psi[0] = 1 / np.sqrt(2)
    psi[-1] = parity / np.sqrt(2)
    return psi
