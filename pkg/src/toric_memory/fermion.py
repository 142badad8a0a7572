"""Single-particle Majorana matrices of the transverse Ising ring.

With Majoranas c_{2n-1} = (prod_{m<n} X_m) Z_n and c_{2n} = (prod_{m<n} X_m) Y_n
the chain Hamiltonian is (i/2) sum_{jk} h_{jk} c_j c_k with the real
antisymmetric 2N x 2N matrix

    h[2n-1, 2n]   = +delta_n        (on-site field)
    h[2n,   2n+1] = -Delta_n        (bond n -> n+1, index 2N+1 == 1)

and Majoranas evolve as c(t) = exp(2ht) c. Indices above are 1-based; arrays
are 0-based. ``boundary=-1`` negates the wrap-around bond (2N, 1); the two
boundary conventions describe the two parity sectors of the ring.

h only couples odd to even Majoranas, so h = [[0, A], [-A^T, 0]] after a
permutation and one N x N SVD of A diagonalizes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import CouplingModel, build_uniform


class NumericalError(RuntimeError):
    """A linear-algebra step failed or produced out-of-tolerance residue."""


def build_h(model: CouplingModel, boundary: int = 1) -> np.ndarray:
    n = model.n_sites
    h = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    h[2 * idx, 2 * idx + 1] = model.fields
    bond = -model.couplings.copy()
    bond[-1] *= boundary
    nxt = (2 * idx + 2) % (2 * n)
    h[2 * idx + 1, nxt] = bond
    h -= h.T.copy()
    return h


def reference_covariance(n_sites: int, boundary: int = 1) -> np.ndarray:
    """h with delta_n = 0 and Delta_n = 1; the covariance of the GHZ_+ state."""
    return build_h(build_uniform(n_sites, 1.0, 0.0), boundary)


def _coupling_block(h: np.ndarray) -> np.ndarray:
    if h.ndim != 2 or h.shape[0] != h.shape[1] or h.shape[0] % 2:
        raise ValueError(f"expected an even square matrix, got shape {h.shape}")
    if not np.allclose(h, -h.T, rtol=0, atol=1e-15):
        raise ValueError("matrix is not antisymmetric")
    if np.any(h[0::2, 0::2]) or np.any(h[1::2, 1::2]):
        raise ValueError("matrix couples Majoranas of equal parity; not a chain matrix")
    return h[0::2, 1::2]


@dataclass(frozen=True)
class SpectralData:
    """h = O [[0, diag(phases)], [-diag(phases), 0]] O^T with O = blockdiag(U, W).

    O acts on the (odd, even) split of the Majorana indices. Eigenvalues of h
    are +/- i * phases.
    """

    phases: np.ndarray
    U: np.ndarray
    W: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.phases.size

    @property
    def orthogonal(self) -> np.ndarray:
        """O in the interleaved Majorana order; columns (U-part, W-part)."""
        n = self.phases.size
        o = np.zeros((2 * n, 2 * n))
        o[0::2, :n] = self.U
        o[1::2, n:] = self.W
        return o

    @property
    def basis(self) -> np.ndarray:
        """Unitary whose columns diagonalize i*h with eigenvalues (+phases, -phases)."""
        n = self.phases.size
        v = np.zeros((2 * n, 2 * n), dtype=complex)
        v[0::2, :n] = self.U
        v[1::2, :n] = -1j * self.W
        v[0::2, n:] = self.U
        v[1::2, n:] = 1j * self.W
        return v / np.sqrt(2)

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of i*h matching the columns of ``basis``."""
        return np.concatenate([self.phases, -self.phases])


def spectral(h: np.ndarray) -> SpectralData:
    a = _coupling_block(np.asarray(h, dtype=float))
    try:
        u, s, vt = np.linalg.svd(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed: dim={h.shape[0]}, max|h|={np.abs(h).max():.3e}, finite={np.all(np.isfinite(h))}"
        ) from exc
    order = np.argsort(s, kind="stable")
    return SpectralData(phases=s[order], U=u[:, order], W=vt.T[:, order])


def _rotation(s: SpectralData, t: float):
    return np.cos(2 * s.phases * t), np.sin(2 * s.phases * t)


def propagator(s: SpectralData, t: float) -> np.ndarray:
    """exp(2ht) as a real 2N x 2N matrix."""
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    c, sn = _rotation(s, t)
    U, W = s.U, s.W
    n = s.phases.size
    out = np.empty((2 * n, 2 * n))
    out[0::2, 0::2] = (U * c) @ U.T
    out[0::2, 1::2] = (U * sn) @ W.T
    out[1::2, 0::2] = -(W * sn) @ U.T
    out[1::2, 1::2] = (W * c) @ W.T
    return out


def _interleave(oo, oe, eo, ee):
    n = oo.shape[0]
    out = np.empty((2 * n, 2 * n))
    out[0::2, 0::2] = oo
    out[0::2, 1::2] = oe
    out[1::2, 0::2] = eo
    out[1::2, 1::2] = ee
    return out


class ConjugationKernel:
    """Evaluates G(t) = exp(-2ht) gamma exp(2ht) on a time grid.

    gamma is rotated into the eigenbasis of h once, so each time point costs
    O(N^2) elementwise work plus six N x N products.
    """

    def __init__(self, h: np.ndarray, gamma: np.ndarray, spec: SpectralData | None = None):
        self.spec = spec if spec is not None else spectral(h)
        U, W = self.spec.U, self.spec.W
        self.k11 = U.T @ gamma[0::2, 0::2] @ U
        self.k12 = U.T @ gamma[0::2, 1::2] @ W
        self.k22 = W.T @ gamma[1::2, 1::2] @ W

    def __call__(self, t: float) -> np.ndarray:
        c, s = _rotation(self.spec, t)
        k11, k12, k22 = self.k11, self.k12, self.k22
        k21 = -k12.T
        # X = R(t)^T K R(t), R(t) = [[C, S], [-S, C]]
        m11 = c[:, None] * k11 - s[:, None] * k21
        m12 = c[:, None] * k12 - s[:, None] * k22
        m21 = s[:, None] * k11 + c[:, None] * k21
        m22 = s[:, None] * k12 + c[:, None] * k22
        x11 = m11 * c - m12 * s
        x12 = m11 * s + m12 * c
        x22 = m21 * s + m22 * c
        U, W = self.spec.U, self.spec.W
        g_oo = U @ x11 @ U.T
        g_oe = U @ x12 @ W.T
        g_ee = W @ x22 @ W.T
        return _interleave(g_oo, g_oe, -g_oe.T, g_ee)


class BlochKernel:
    """G(t) = exp(-2ht) gamma exp(2ht) for a uniform ring, built from 2x2 Bloch blocks.

    Both h and gamma = reference_covariance(n, boundary) commute with the
    one-site translation whose wrap carries the sign ``boundary``; momenta
    satisfy exp(ikN) = boundary. Each time point costs O(N log N) for the
    blocks plus O(N^2) to expand them densely.
    """

    def __init__(self, n_sites: int, coupling: float, field: float, boundary: int = 1):
        self.n = n = n_sites
        self.boundary = boundary
        shift = 0.0 if boundary == 1 else np.pi
        self.k = (2 * np.pi * np.arange(n) + shift) / n
        e = np.exp(1j * self.k)
        hk = np.zeros((n, 2, 2), dtype=complex)
        hk[:, 0, 1] = field + coupling * np.conj(e)
        hk[:, 1, 0] = -field - coupling * e
        gk = np.zeros((n, 2, 2), dtype=complex)
        gk[:, 0, 1] = np.conj(e)
        gk[:, 1, 0] = -e
        self.hk, self.gk = hk, gk
        # traceless anti-Hermitian 2x2: hk^2 = -eps^2
        self.eps = np.sqrt(np.abs(hk[:, 0, 1]) ** 2)
        m = np.arange(n)
        diff = m[:, None] - m[None, :]
        self._index = diff % n
        self._sign = np.where(diff < 0, float(boundary), 1.0)

    def _expm(self, t: float) -> np.ndarray:
        x = 2 * t * self.eps
        c = np.cos(x)
        sinc = np.where(self.eps > 0, np.sin(x) / np.where(self.eps > 0, self.eps, 1.0), 2 * t)
        return c[:, None, None] * np.eye(2) + sinc[:, None, None] * self.hk

    def blocks(self, t: float) -> np.ndarray:
        """f[d] = 2x2 block (m, m') of G(t) for m - m' = d in 0..N-1."""
        fk = self._expm(-t) @ self.gk @ self._expm(t)
        n = self.n
        # f[d] = (1/N) sum_k exp(ikd) F(k) with k = (2 pi j + shift)/N
        twist = np.exp(1j * (self.k[0]) * np.arange(n))
        f = np.fft.ifft(fk, axis=0) * twist[:, None, None]
        return f.real

    def __call__(self, t: float) -> np.ndarray:
        f = self.blocks(t)
        n = self.n
        dense = f[self._index] * self._sign[:, :, None, None]
        return dense.transpose(0, 2, 1, 3).reshape(2 * n, 2 * n)


def ring_distance(n_sites: int) -> np.ndarray:
    """Site distance between Majorana indices i, j: sites floor(i/2), floor(j/2) on the ring."""
    site = np.arange(2 * n_sites) // 2
    d = np.abs(site[:, None] - site[None, :])
    return np.minimum(d, n_sites - d)


def lightcone_profile(model: CouplingModel, t: float, spec: SpectralData | None = None) -> np.ndarray:
    """max |exp(2ht)_{ij}| over Majorana pairs at each ring distance d = 0..N//2."""
    if spec is None:
        spec = spectral(build_h(model))
    p = np.abs(propagator(spec, t))
    dist = ring_distance(model.n_sites)
    out = np.zeros(model.n_sites // 2 + 1)
    np.maximum.at(out, dist.ravel(), p.ravel())
    return out


def front_radius(profile: np.ndarray, eps: float = 1e-3) -> float:
    """Distance at which the profile last falls through ``eps`` (log-linear interpolation)."""
    above = np.nonzero(profile >= eps)[0]
    if above.size == 0:
        return 0.0
    d = int(above[-1])
    if d + 1 >= profile.size:
        return float(d)
    hi, lo = profile[d], profile[d + 1]
    if lo <= 0:
        return float(d)
    frac = np.log(hi / eps) / np.log(hi / lo)
    return d + float(frac)


def tail_decay_rate(profile: np.ndarray, start: int, floor: float = 1e-300) -> tuple[float, float]:
    """Least-squares slope of ln(profile[d]) for d >= start; returns (rate, r_squared)."""
    d = np.arange(start, profile.size)
    y = np.log(np.maximum(profile[start:], floor))
    slope, intercept = np.polyfit(d, y, 1)
    resid = y - (slope * d + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1 - np.sum(resid**2) / ss_tot if ss_tot > 0 else 1.0
    return -float(slope), float(r2)
