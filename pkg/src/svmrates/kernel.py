"""Gaussian RBF kernels, finite kernel expansions and the approximation witness.

The kernel is parametrised as ``k(x, x') = exp(-sigma**2 * |x - x'|**2)``:
``sigma`` is an *inverse* width, so a large ``sigma`` means a narrow kernel.
It is not the bandwidth ``h`` of ``exp(-|x - x'|**2 / (2 h**2))``; the two
are related by ``sigma = 1 / (sqrt(2) h)``, and scikit-learn's ``gamma``
equals ``sigma**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import ndtr
from scipy.stats import chi2, ncx2

from .distributions import Separated, SyntheticDistribution, as_points, ball_volume

__all__ = [
    "GaussianKernel",
    "KernelExpansion",
    "Clipped",
    "ApproxWitness",
    "kernel_eval",
    "gram",
    "evaluate",
    "rkhs_norm",
    "clip",
    "eta_hat",
    "approx_witness",
    "v_sigma_grid",
]

_CHUNK = 4096


@dataclass(frozen=True)
class GaussianKernel:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
        return np.exp(-(self.sigma**2) * cdist(a, b, "sqeuclidean"))


def kernel_eval(kernel: GaussianKernel, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return float(np.exp(-(kernel.sigma**2) * np.sum((x - x2) ** 2)))


def gram(kernel: GaussianKernel, points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    return kernel.matrix(p, p)


@dataclass(frozen=True, eq=False)
class KernelExpansion:
    """``x -> sum_i c_i k(x_i, x) + offset``."""

    kernel: GaussianKernel
    centers: np.ndarray
    coefficients: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers.reshape(-1, 1)
        coef = np.asarray(self.coefficients, dtype=float).ravel()
        if centers.shape[0] != coef.shape[0]:
            raise ValueError(
                f"{centers.shape[0]} centers but {coef.shape[0]} coefficients"
            )
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def d(self) -> int:
        return int(self.centers.shape[1])

    @property
    def sigma(self) -> float:
        return self.kernel.sigma

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.d)
        out = np.empty(x.shape[0])
        for s in range(0, x.shape[0], _CHUNK):
            out[s : s + _CHUNK] = self.kernel.matrix(x[s : s + _CHUNK], self.centers) @ self.coefficients
        return out + self.offset

    def without_offset(self) -> KernelExpansion:
        return KernelExpansion(self.kernel, self.centers, self.coefficients, 0.0)

    def rkhs_norm_sq(self) -> float:
        c = self.coefficients
        if c.size == 0:
            return 0.0
        return max(float(c @ gram(self.kernel, self.centers) @ c), 0.0)

    def rkhs_norm(self) -> float:
        return math.sqrt(self.rkhs_norm_sq())


def evaluate(expansion: KernelExpansion, x) -> np.ndarray:
    return expansion(x)


def rkhs_norm(expansion: KernelExpansion) -> float:
    """``sqrt(c^T K c)``; the offset is not penalised and not included."""
    return expansion.rkhs_norm()


@dataclass(frozen=True)
class Clipped:
    """Pointwise truncation of a decision function to [-1, 1]."""

    f: object

    def __call__(self, x) -> np.ndarray:
        return np.clip(self.f(x), -1.0, 1.0)


def clip(f) -> Clipped:
    return Clipped(f)


# ---------------------------------------------------------------------------
# constructive approximation witness


def eta_hat(dist: SyntheticDistribution, y) -> np.ndarray:
    """Radial extension of eta to the ball of radius 3: ``eta(y / |y|)`` off X."""
    y = as_points(y, dist.d)
    r = np.linalg.norm(y, axis=1)
    if np.any(r > 3.0 + 1e-12):
        raise ValueError("eta_hat is only defined on the ball of radius 3")
    scale = np.where(r > 1.0, 1.0 / np.where(r > 0, r, 1.0), 1.0)
    return dist.eta(y * scale[:, None])


def _extended_target(dist, y):
    """+1 / -1 / 0 on the extended classes of 3X, 0 outside 3X."""
    y = as_points(y, dist.d)
    r = np.linalg.norm(y, axis=1)
    out = np.zeros(y.shape[0])
    inside = r <= 3.0
    if inside.any():
        out[inside] = np.sign(2.0 * eta_hat(dist, y[inside]) - 1.0)
    return out


def _halfspace_v(x: np.ndarray, sigma: float, tol: float) -> np.ndarray:
    """V_sigma g for f'_P = sign(y_1) on the ball of radius 3.

    The smoothing kernel is the N(x, I / (4 sigma^2)) density, so the value is
    ``E[sign(Y_1) 1{|Y| <= 3}]`` for ``Y ~ N(x, s^2 I)`` with ``s = 1/(2 sigma)``.
    """
    m, d = x.shape
    s = 0.5 / sigma
    if d == 1:
        t = x[:, 0]
        pos = ndtr((3.0 - t) / s) - ndtr(-t / s)
        neg = ndtr(-t / s) - ndtr((-3.0 - t) / s)
        return pos - neg
    rest = x[:, 1:]
    rest_sq = np.sum(rest * rest, axis=1)

    def q_inside(y1, row):
        # P(|Z| <= sqrt(9 - y1^2)) for Z ~ N(x_rest, s^2 I_{d-1})
        r2 = np.clip(9.0 - y1 * y1, 0.0, None)
        if d == 2:
            c = rest[row, 0][:, None]
            r = np.sqrt(r2)
            return ndtr((r - c) / s) - ndtr((-r - c) / s)
        nc = (rest_sq[row] / s**2)[:, None]
        z = r2 / s**2
        with np.errstate(all="ignore"):
            val = np.where(nc > 0, ncx2.cdf(z, d - 1, np.where(nc > 0, nc, 1.0)), chi2.cdf(z, d - 1))
        return val

    x1 = x[:, 0]
    half = 12.0 * s
    lo = np.maximum(x1 - half, -3.0)
    hi = np.minimum(x1 + half, 3.0)
    pieces = [(lo, np.minimum(hi, 0.0), -1.0), (np.maximum(lo, 0.0), hi, 1.0)]
    rows = np.arange(m)

    def quad(n_nodes):
        nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
        total = np.zeros(m)
        for a, b, sgn in pieces:
            width = np.clip(b - a, 0.0, None)
            mid = 0.5 * (a + b)
            y1 = mid[:, None] + 0.5 * width[:, None] * nodes[None, :]
            dens = np.exp(-0.5 * ((y1 - x1[:, None]) / s) ** 2) / (s * math.sqrt(2 * math.pi))
            vals = dens * q_inside(y1, rows)
            total += sgn * 0.5 * width * (vals @ weights)
        return total

    n_nodes = 32
    prev = quad(n_nodes)
    while True:
        n_nodes *= 2
        cur = quad(n_nodes)
        if np.max(np.abs(cur - prev)) < tol or n_nodes >= 4096:
            err = float(np.max(np.abs(cur - prev)))
            if err >= tol:
                from .quadrature import QuadratureError

                raise QuadratureError("V_sigma g quadrature did not converge", float(np.mean(cur)), err)
            return cur
        prev = cur


def v_sigma_grid(dist: SyntheticDistribution, sigma: float, x, n_nodes: int = 200) -> np.ndarray:
    """V_sigma g by tensor Gauss-Legendre over the cube [-3, 3]^d (d <= 2).

    Uses only the extended target built from eta_hat; independent of the
    half-space shortcut and therefore usable to cross-check it.
    """
    x = as_points(x, dist.d)
    d = dist.d
    if d > 2:
        raise ValueError("grid route supports d <= 2")
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    # split every axis at 0 so that the sign change of the target is a panel edge
    ax = np.concatenate([-1.5 + 1.5 * nodes, 1.5 + 1.5 * nodes])
    wt = np.concatenate([1.5 * weights, 1.5 * weights])
    if d == 1:
        ys = ax.reshape(-1, 1)
        ws = wt
    else:
        g1, g2 = np.meshgrid(ax, ax, indexing="ij")
        ys = np.column_stack([g1.ravel(), g2.ravel()])
        ws = np.outer(wt, wt).ravel()
    target = _extended_target(dist, ys) * ws
    coef = (2.0 * sigma**2 / math.pi) ** (d / 2)
    out = np.empty(x.shape[0])
    for s in range(0, x.shape[0], 256):
        sq = cdist(x[s : s + 256], ys, "sqeuclidean")
        out[s : s + 256] = coef * (np.exp(-2.0 * sigma**2 * sq) @ target)
    return out


@dataclass(frozen=True)
class ApproxWitness:
    """The function ``V_sigma g`` with ``g = (sigma^2/pi)^(d/4) f'_P``.

    ``f'_P`` is +1 on the extended class X_1, -1 on X_{-1} and 0 elsewhere on
    ``3X``; since V_sigma is an isometry onto the RKHS, ``g_norm_sq`` is also
    the squared RKHS norm of the witness.
    """

    dist: SyntheticDistribution
    sigma: float
    g_norm_sq: float
    tol: float = 1e-9

    @property
    def d(self) -> int:
        return self.dist.d

    def extended_target(self, y) -> np.ndarray:
        return _extended_target(self.dist, y)

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.d)
        if _is_halfspace(self.dist):
            return _halfspace_v(x, self.sigma, self.tol)
        return v_sigma_grid(self.dist, self.sigma, x)


def _is_halfspace(dist) -> bool:
    # every built-in family splits X along x_1 = 0
    return dist.d == 1 or isinstance(dist, Separated)


def approx_witness(dist: SyntheticDistribution, sigma: float, tol: float = 1e-9) -> ApproxWitness:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    d = dist.d
    # the class boundary has measure zero, so X^_1 u X^_-1 has the volume of 3X
    g_norm_sq = (sigma**2 / math.pi) ** (d / 2) * 3.0**d * ball_volume(d)
    return ApproxWitness(dist=dist, sigma=float(sigma), g_norm_sq=g_norm_sq, tol=tol)
