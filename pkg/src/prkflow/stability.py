"""Absolute stability of product IMEX-RK tableaux via the additive embedding.

On the three-parameter test equation u' = (lambda0 + lambda1 + lambda2) u,
with lambda0 stiff (implicit) and lambda1, lambda2 non-stiff (explicit), the
product scheme reduces to an (s+1)-stage additive IMEX-RK method.  The
amplification factor

    R(z0, z1, z2) = 1 + (z0 bh + z1 b1 + z2 b2)^T (I - z0 Ah - z1 A1 - z2 A2)^{-1} 1

defines the stability function; the explicit-part region S_alpha collects the
(z1, z2) for which |R| <= 1 whenever z0 lies in the wedge A_alpha, reduced to
its boundary rays z0 = -|y|/tan(alpha) + iy by the maximum-modulus principle.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "AdditiveEmbedding",
    "RegionWindow",
    "RegionSample",
    "SingularSystemError",
    "embed",
    "stability_function",
    "default_y_samples",
    "default_z0_samples",
    "sample_region",
]


class SingularSystemError(ArithmeticError):
    """Stage matrix singular (by pivot magnitude) at the given (z0, z1, z2)."""

    def __init__(self, z0, z1, z2):
        super().__init__(f"singular stage matrix at z0={z0}, z1={z1}, z2={z2}")
        self.z_triple = (z0, z1, z2)


@dataclass(frozen=True)
class AdditiveEmbedding:
    """(s+1)-stage additive tableaux of the embedded IMEX-RK scheme.

    a_hat carries the stiff coupling A*D2 acting on current stages
    (zero first row and first column); a1, a2 carry A*D1, A*D2 acting on
    lagged stages (zero first row and last column).
    """

    a_hat: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    b_hat: np.ndarray
    b1: np.ndarray
    b2: np.ndarray


def embed(t):
    """Additive IMEX embedding of a product tableau (stiff averaging = D2)."""
    s = t.s
    n = s + 1
    a_hat = np.zeros((n, n))
    a_hat[1:, 1:] = t.A @ t.D2
    a1 = np.zeros((n, n))
    a1[1:, :s] = t.A @ t.D1
    a2 = np.zeros((n, n))
    a2[1:, :s] = t.A @ t.D2
    b_hat = np.concatenate([[0.0], t.D2.T @ t.b])
    b1 = np.concatenate([t.D1.T @ t.b, [0.0]])
    b2 = np.concatenate([t.D2.T @ t.b, [0.0]])
    return AdditiveEmbedding(a_hat, a1, a2, b_hat, b1, b2)


def _embedding_of(t_or_emb):
    if isinstance(t_or_emb, AdditiveEmbedding):
        return t_or_emb
    return embed(t_or_emb)


def stability_function(t, z0, z1=0.0, z2=0.0, singular_tol=1e-14):
    """Evaluate R(z0, z1, z2) by a dense complex solve with pivot check."""
    e = _embedding_of(t)
    n = e.a_hat.shape[0]
    M = np.eye(n, dtype=complex) - z0 * e.a_hat - z1 * e.a1 - z2 * e.a2
    with warnings.catch_warnings():
        # exact singularity is detected below via the pivot magnitudes
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    scale = max(1.0, np.abs(M).max())
    if np.abs(np.diag(lu)).min() <= singular_tol * scale:
        raise SingularSystemError(z0, z1, z2)
    w = scipy.linalg.lu_solve((lu, piv), np.ones(n, dtype=complex), check_finite=False)
    weights = z0 * e.b_hat + z1 * e.b1 + z2 * e.b2
    return 1.0 + complex(weights @ w)


def default_y_samples(n=129, lo=1e-3, hi=1e3):
    """Logarithmically spaced boundary-ray ordinates, both signs."""
    mags = np.logspace(math.log10(lo), math.log10(hi), n)
    return np.concatenate([-mags[::-1], mags])


def default_z0_samples(alpha, y_samples, rho=1e6):
    """Stiff samples on the wedge boundary rays plus the z0 -> -inf limit (-rho)."""
    y = np.asarray(y_samples, dtype=float)
    if y.size == 0:
        raise ValueError("y_samples must be nonempty")
    if abs(alpha - math.pi / 2) < 1e-14:
        z0 = 1j * y
    else:
        z0 = -np.abs(y) / math.tan(alpha) + 1j * y
    return np.concatenate([z0, [complex(-rho)]])


@dataclass(frozen=True)
class RegionWindow:
    re_min: float
    re_max: float
    im_min: float
    im_max: float
    nx: int
    ny: int

    def grid(self):
        re = np.linspace(self.re_min, self.re_max, self.nx)
        im = np.linspace(self.im_min, self.im_max, self.ny)
        return re, im


@dataclass(frozen=True)
class RegionSample:
    window: RegionWindow
    alpha: float
    y_samples: np.ndarray
    mask: np.ndarray        # (nx, ny) bool, True = inside S_alpha
    max_abs_r: np.ndarray   # (nx, ny) max |R| over the sampled z0 rays
    flagged: np.ndarray     # (nx, ny) bool, singular solve encountered


def _lower_triangular(m, tol=0.0):
    return np.all(np.abs(np.triu(m, k=1)) <= tol)


def _sweep_lower_triangular(e, z0, Z1, Z2, singular_tol):
    """|R| for one stiff sample over flattened explicit-plane points.

    The embedded stage matrix of a diagonally implicit tableau is lower
    triangular, so forward substitution vectorizes over the plane.
    Returns (absR, singular_mask).
    """
    n = e.a_hat.shape[0]
    npts = Z1.shape[0]
    w = np.empty((n, npts), dtype=complex)
    singular = np.zeros(npts, dtype=bool)
    for i in range(n):
        rhs = np.ones(npts, dtype=complex)
        for j in range(i):
            mij = -(z0 * e.a_hat[i, j] + Z1 * e.a1[i, j] + Z2 * e.a2[i, j])
            rhs -= mij * w[j]
        mii = 1.0 - (z0 * e.a_hat[i, i] + Z1 * e.a1[i, i] + Z2 * e.a2[i, i])
        scale = max(1.0, abs(z0) * abs(e.a_hat[i, i]))
        bad = np.abs(mii) <= singular_tol * scale
        singular |= bad
        w[i] = np.where(bad, 0.0, rhs / np.where(bad, 1.0, mii))
    R = 1.0 + z0 * (e.b_hat @ w) + Z1 * (e.b1 @ w) + Z2 * (e.b2 @ w)
    return np.abs(R), singular


def sample_region(t, window, alpha=math.pi / 2, y_samples=None, slice_fn=None,
                  rho=1e6, tol=1e-12, singular_tol=1e-14):
    """Sample the explicit-part stability region over a rectangular window.

    Each grid point maps through ``slice_fn`` (default z1 = point, z2 = 0)
    and is inside iff |R(z0, z1, z2)| <= 1 + tol for every stiff boundary
    sample z0.  Singular solves mark the point outside and flagged.
    """
    if y_samples is None:
        y_samples = default_y_samples()
    y_samples = np.asarray(y_samples, dtype=float)
    z0s = default_z0_samples(alpha, y_samples, rho=rho)
    e = _embedding_of(t)
    re, im = window.grid()
    Z = (re[:, None] + 1j * im[None, :]).reshape(-1)
    if slice_fn is None:
        Z1, Z2 = Z, np.zeros_like(Z)
    else:
        Z1, Z2 = slice_fn(Z)
        Z1 = np.broadcast_to(np.asarray(Z1, dtype=complex), Z.shape).copy()
        Z2 = np.broadcast_to(np.asarray(Z2, dtype=complex), Z.shape).copy()

    max_abs = np.zeros(Z.shape[0])
    flagged = np.zeros(Z.shape[0], dtype=bool)
    triangular = all(_lower_triangular(m) for m in (e.a_hat, e.a1, e.a2))
    for z0 in z0s:
        if triangular:
            absr, singular = _sweep_lower_triangular(e, z0, Z1, Z2, singular_tol)
        else:
            absr = np.empty(Z.shape[0])
            singular = np.zeros(Z.shape[0], dtype=bool)
            for idx in range(Z.shape[0]):
                try:
                    absr[idx] = abs(stability_function(e, z0, Z1[idx], Z2[idx],
                                                       singular_tol=singular_tol))
                except SingularSystemError:
                    absr[idx] = np.inf
                    singular[idx] = True
        flagged |= singular
        absr = np.where(singular, np.inf, absr)
        np.maximum(max_abs, absr, out=max_abs)

    inside = (max_abs <= 1.0 + tol) & ~flagged
    shape = (window.nx, window.ny)
    return RegionSample(window, alpha, y_samples, inside.reshape(shape),
                        max_abs.reshape(shape), flagged.reshape(shape))
