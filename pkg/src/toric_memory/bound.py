"""Upper bound on the row magnetization of a quenched toric-code memory.

For each site n the bound term is |det((B_n - 1)/2)|^(1/4) with

    B_n = e^{2ht} e^{-2h_n t} h0 e^{2h_n t} e^{-2ht} h0,

h_n being h with delta_n negated and h0 the covariance of GHZ_+. The term
equals |<GHZ_+| e^{i Z_n H Z_n t} e^{-iHt} |GHZ_+>| exactly, and the bound
on <M> is its average over sites.

Fast route
----------
Let D_n = diag(+1 for Majorana index < 2n-1 (0-based), -1 otherwise). Then
D_n h_n D_n equals h with its wrap-around bond negated (``h~``, independent of
n) and D_n h0 D_n = h0~. With G(t) = e^{-2ht} h0 e^{2ht} and
G~(t) = e^{-2h~t} h0~ e^{2h~t} one gets

    det(1 - B_n) = det(G~(t) + D_n G(t) D_n),
    Tr(B_n)      = -sum_ij s_i s_j G_ij G~_ij.

So one pair of spectral decompositions serves every site and every time,
and each (site, time) costs one LU factorization in the log domain.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .fermion import (
    BlochKernel,
    ConjugationKernel,
    NumericalError,
    build_h,
    propagator,
    reference_covariance,
    spectral,
)
from .model import CouplingModel, flip_site

SNAP_TOL = 1e-9
FULL_SITE_LIMIT = 256
SUBSAMPLE_SITES = 64
_BATCH_BYTES = 64 * 2**20


class SingularCovarianceError(ValueError):
    pass


# ---------------------------------------------------------------------------
# direct route: explicit B_n and its eigenphases


def compute_Bn(model: CouplingModel, site: int, t: float) -> np.ndarray:
    """B_n assembled literally as the ordered product of propagators."""
    h = build_h(model)
    hn = build_h(flip_site(model, site))
    h0 = reference_covariance(model.n_sites)
    u = propagator(spectral(h), t)
    un = propagator(spectral(hn), t)
    b = u @ un.T @ h0 @ un @ u.T @ h0
    err = np.abs(b.T @ b - np.eye(b.shape[0])).max()
    if err > SNAP_TOL:
        raise NumericalError(f"B_n lost orthogonality: max|B^T B - 1| = {err:.2e}")
    return b


def eigenphases(b: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Phases theta_i in [0, pi], one per eigenvalue pair e^{+-i theta_i}, ascending."""
    b = np.asarray(b, dtype=float)
    dim = b.shape[0]
    if b.shape != (dim, dim) or dim % 2:
        raise ValueError(f"expected an even square matrix, got {b.shape}")
    err = np.abs(b.T @ b - np.eye(dim)).max()
    if err > tol:
        raise ValueError(f"matrix is not orthogonal (max|B^T B - 1| = {err:.2e})")
    ev = np.linalg.eigvals(b)
    theta = np.abs(np.angle(ev))
    theta[np.abs(ev - 1) < SNAP_TOL] = 0.0
    theta[np.abs(ev + 1) < SNAP_TOL] = np.pi
    theta.sort()
    return theta[0::2].copy()


def det_quarter_term(thetas: Sequence[float]) -> float:
    """|det((B - 1)/2)|^(1/4) = prod_i |sin(theta_i / 2)|^(1/2), in the log domain."""
    half = np.abs(np.sin(0.5 * np.asarray(thetas, dtype=float)))
    if np.any(half == 0):
        return 0.0
    return float(np.exp(0.5 * np.sum(np.log(half))))


def trace_envelope(trace_b: float, n_sites: int) -> float:
    return float(min(1.0, max(0.0, math.exp(-(trace_b + 2 * n_sites) / 16))))


# ---------------------------------------------------------------------------
# fast route


def default_sites(model: CouplingModel) -> np.ndarray:
    """1-based sites to average over: one for uniform rings, all up to 256, else a 64-site stride."""
    n = model.n_sites
    if model.is_uniform:
        return np.array([1])
    if n <= FULL_SITE_LIMIT:
        return np.arange(1, n + 1)
    return 1 + (np.arange(SUBSAMPLE_SITES) * n) // SUBSAMPLE_SITES


@dataclass(frozen=True)
class BoundPoint:
    mean: float
    stderr: float
    terms: np.ndarray
    trace_terms: Optional[np.ndarray] = None

    @property
    def trace_mean(self) -> Optional[float]:
        return None if self.trace_terms is None else float(np.mean(self.trace_terms))


class BoundEvaluator:
    """Reusable evaluator for one chain; spectral work is done once in the constructor."""

    def __init__(self, model: CouplingModel, sites: Optional[Iterable[int]] = None):
        self.model = model
        n = model.n_sites
        self.sites = default_sites(model) if sites is None else np.asarray(list(sites), dtype=int)
        if self.sites.size == 0 or self.sites.min() < 1 or self.sites.max() > n:
            raise IndexError(f"sites must lie in 1..{n}")
        self.exhaustive = model.is_uniform or self.sites.size == n
        self._gather = None
        if model.is_uniform:
            c, f = float(model.couplings[0]), float(model.fields[0])
            self._g = BlochKernel(n, c, f, boundary=1)
            self._gt = BlochKernel(n, c, f, boundary=-1)
            if self.sites.tolist() == [1]:
                self._gather = _uniform_gather_index(n)
        else:
            self._g = ConjugationKernel(build_h(model, 1), reference_covariance(n, 1))
            self._gt = ConjugationKernel(build_h(model, -1), reference_covariance(n, -1))

    def _signs(self, site: int) -> np.ndarray:
        s = np.ones(2 * self.model.n_sites)
        s[2 * site - 1 :] = -1.0
        return s

    def _uniform_site1(self, t: float) -> float:
        # G~ + D_1 G D_1 = (G~ + G) with row/column 0 of G negated
        f, ft = self._g.blocks(t), self._gt.blocks(t)
        table = np.concatenate([f + ft, f - ft]).ravel()
        mat = table[self._gather]
        g_row = f[self._g._index[0], 0, :] * self._g._sign[0][:, None]
        g_col = f[self._g._index[:, 0], :, 0]
        mat[0, :] -= 2 * g_row.ravel()
        mat[:, 0] -= 2 * g_col.ravel()
        lu, _ = sla.lu_factor(mat, overwrite_a=True, check_finite=False)
        diag = np.abs(np.diag(lu))
        if np.any(diag == 0):
            return -np.inf
        dim = mat.shape[0]
        return 0.25 * (float(np.sum(np.log(diag))) - dim * np.log(2.0))

    def log_terms(self, t: float, with_trace: bool = False):
        """ln of the per-site bound terms (and Tr B_n if requested) at time t."""
        n = self.model.n_sites
        if self._gather is not None and not with_trace:
            return np.array([self._uniform_site1(t)]), None
        g, gt = self._g(t), self._gt(t)
        dim = 2 * n
        batch = max(1, _BATCH_BYTES // (8 * dim * dim))
        logs = np.empty(self.sites.size)
        traces = np.empty(self.sites.size) if with_trace else None
        for start in range(0, self.sites.size, batch):
            chunk = self.sites[start : start + batch]
            signs = np.stack([self._signs(int(s)) for s in chunk])
            flipped = signs[:, :, None] * g[None] * signs[:, None, :]
            stack = gt[None] + flipped
            sign, logdet = np.linalg.slogdet(stack)
            logs[start : start + chunk.size] = np.where(sign == 0, -np.inf, 0.25 * (logdet - dim * np.log(2.0)))
            if with_trace:
                traces[start : start + chunk.size] = -np.einsum("kij,ij->k", flipped, gt)
        if not np.all(np.isfinite(logs) | (logs == -np.inf)):
            raise NumericalError(f"non-finite log-determinant at t={t}")
        return logs, traces

    def evaluate(self, t: float, with_trace: bool = False) -> BoundPoint:
        logs, traces = self.log_terms(t, with_trace)
        terms = np.minimum(np.exp(logs), 1.0)
        mean = float(math.fsum(terms) / terms.size)
        if self.exhaustive or terms.size < 2:
            stderr = 0.0
        else:
            stderr = float(np.std(terms, ddof=1) / math.sqrt(terms.size))
        tr = None
        if with_trace:
            tr = np.array([trace_envelope(x, self.model.n_sites) for x in traces])
        return BoundPoint(mean, stderr, terms, tr)

    def trace_values(self, t: float) -> np.ndarray:
        """Raw Tr(B_n) for the evaluator's sites."""
        return self.log_terms(t, with_trace=True)[1]


def _uniform_gather_index(n: int) -> np.ndarray:
    """Flat indices into concat([f + f~, f - f~]) (shape (2N, 2, 2)) giving G~ + G densely."""
    m = np.arange(n)
    diff = m[:, None] - m[None, :]
    block = np.where(diff >= 0, diff, diff + 2 * n)
    a = np.arange(2)
    idx = ((block[:, None, :, None] * 2 + a[None, :, None, None]) * 2 + a[None, None, None, :])
    return idx.reshape(2 * n, 2 * n)


def magnetization_bound(
    model: CouplingModel,
    t: float,
    sites: Optional[Iterable[int]] = None,
    method: str = "fast",
) -> float:
    """Site average of |det((B_n - 1)/2)|^(1/4); an upper bound on <M(t)>.

    ``method="eigen"`` builds every B_n explicitly and goes through its
    eigenphases; it is O(N) times slower and meant for cross-checks.
    """
    if method == "fast":
        return BoundEvaluator(model, sites).evaluate(t).mean
    if method == "eigen":
        chosen = default_sites(model) if sites is None else list(sites)
        vals = [det_quarter_term(eigenphases(compute_Bn(model, int(n), t))) for n in chosen]
        return float(math.fsum(vals) / len(vals))
    raise ValueError(f"unknown method {method!r}")


def trace_bound_term(model: CouplingModel, site: int, t: float) -> float:
    """exp(-(Tr B_n + 2N)/16), clamped to [0, 1]."""
    tr = BoundEvaluator(model, [site]).trace_values(t)[0]
    return trace_envelope(tr, model.n_sites)


def site_term(model: CouplingModel, site: int, t: float) -> float:
    return float(BoundEvaluator(model, [site]).evaluate(t).terms[0])


# ---------------------------------------------------------------------------
# Gaussian overlap


def gaussian_overlap(m1: np.ndarray, m2: np.ndarray) -> float:
    """Tr(rho1 rho2) for fermionic Gaussian states with covariances m1, m2.

    Covariances follow M_jk = i Tr(rho c_j c_k) (j != k) with Hermitian
    Majoranas. In that convention the overlap is
    2^-N sqrt(det(M1) det(M1^-1 - M2)) = 2^-N sqrt(det(1 - M1 M2));
    reading the middle factor as det(M2 + M1^-1) would flip the sign of M2
    and give zero for any pure state against itself.
    """
    m1 = np.asarray(m1, dtype=float)
    m2 = np.asarray(m2, dtype=float)
    dim = m1.shape[0]
    if m1.shape != (dim, dim) or m2.shape != (dim, dim) or dim % 2:
        raise ValueError("covariances must be equal-size even square matrices")
    sign1, log1 = np.linalg.slogdet(m1)
    if sign1 == 0 or np.linalg.cond(m1) > 1e12:
        raise SingularCovarianceError("M1 is singular: det(M1) = 0, so M1^-1 does not exist")
    sign2, log2 = np.linalg.slogdet(np.linalg.inv(m1) - m2)
    if sign2 == 0:
        return 0.0
    value = 0.5 * (log1 + log2) - (dim // 2) * np.log(2.0)
    return float(np.exp(value))


# ---------------------------------------------------------------------------
# bound curves


@dataclass
class BoundCurve:
    times: np.ndarray
    det_bound: np.ndarray
    trace_bound: Optional[np.ndarray] = None
    stderr: Optional[np.ndarray] = None
    model: dict = field(default_factory=dict)
    time_unit: str = "absolute"

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.det_bound = np.asarray(self.det_bound, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.det_bound)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.trace_bound is not None:
            self.trace_bound = np.asarray(self.trace_bound, dtype=float)
        if self.times.shape != self.det_bound.shape:
            raise ValueError("times and det_bound differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly ascending")

    def __len__(self):
        return self.times.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "det_bound", "trace_bound", "stderr"])
        tb = self.trace_bound if self.trace_bound is not None else [None] * len(self)
        for t, d, tr, se in zip(self.times, self.det_bound, tb, self.stderr):
            w.writerow([f"{t:.17g}", f"{d:.17g}", "" if tr is None else f"{tr:.17g}", f"{se:.17g}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, model: Optional[dict] = None) -> "BoundCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        trace = None
        if rows and all(r["trace_bound"] != "" for r in rows):
            trace = [float(r["trace_bound"]) for r in rows]
        return cls(
            times=[float(r["time"]) for r in rows],
            det_bound=[float(r["det_bound"]) for r in rows],
            trace_bound=trace,
            stderr=[float(r["stderr"]) for r in rows],
            model=model or {},
        )

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "time_unit": self.time_unit,
            "times": self.times.tolist(),
            "det_bound": self.det_bound.tolist(),
            "trace_bound": None if self.trace_bound is None else self.trace_bound.tolist(),
            "stderr": self.stderr.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "BoundCurve":
        return cls(
            times=data["times"],
            det_bound=data["det_bound"],
            trace_bound=data.get("trace_bound"),
            stderr=data.get("stderr"),
            model=data.get("model", {}),
            time_unit=data.get("time_unit", "absolute"),
        )
