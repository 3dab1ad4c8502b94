"""Quadrature grids and spectral calculus on the round sphere model.

All integrals are taken against the unit-volume base measure.  In the affine
chart z the base volume form pushes down to du dtheta/(2 pi) in the
compactified radial coordinate u = |z|^2/(1+|z|^2), so the radial direction
uses Gauss-Legendre nodes on (0, 1) and the angle a uniform periodic rule.
Radial fields are differentiated spectrally through the barycentric
differentiation matrix of the Gauss-Legendre nodes; angular derivatives use
the FFT.  Fields with odd angular frequency carry half-integer powers of the
radial coordinate, so their pointwise derivatives near the pole u = 1 are
only approximate (the vanishing local coefficient keeps all weighted
integrals accurate); invariant and even-frequency fields resolve to
roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "RadialGrid",
    "Full2DGrid",
    "build_grid",
    "gauss_legendre_01",
    "barycentric_weights",
    "diff_matrix",
    "interp_matrix",
]

MIN_RESOLUTION = 8


class GridError(ValueError):
    pass


def gauss_legendre_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def barycentric_weights(x: np.ndarray) -> np.ndarray:
    """Barycentric weights of the nodes x, capacity-scaled for stability."""
    n = len(x)
    # 4/(b-a) capacity scaling keeps the pairwise products in double range.
    scale = 4.0 / (x.max() - x.min())
    w = np.ones(n)
    for i in range(n):
        d = scale * (x[i] - x)
        d[i] = 1.0
        w[i] = 1.0 / np.prod(d)
    return w / np.abs(w).max()


def diff_matrix(x: np.ndarray, w: np.ndarray | None = None) -> np.ndarray:
    """Spectral differentiation matrix on arbitrary nodes x."""
    if w is None:
        w = barycentric_weights(x)
    n = len(x)
    D = np.zeros((n, n))
    for i in range(n):
        d = x[i] - x
        d[i] = np.inf
        D[i, :] = (w / w[i]) / d
        D[i, i] = -D[i, :].sum()
    return D


def interp_matrix(x: np.ndarray, w: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Barycentric interpolation matrix sending values at x to values at targets."""
    P = np.zeros((len(targets), len(x)))
    for i, t in enumerate(targets):
        d = t - x
        hit = np.nonzero(d == 0.0)[0]
        if hit.size:
            P[i, hit[0]] = 1.0
            continue
        c = w / d
        P[i, :] = c / c.sum()
    return P


@dataclass(frozen=True)
class RadialGrid:
    """Radial fast path for circle-invariant data.

    Fields live on the compactified radial coordinate u in (0, 1); rho = |z|^2
    is u/(1-u).  ``weights`` integrate against the base volume form, which is
    exactly du on the u-interval.
    """

    u: np.ndarray
    weights: np.ndarray
    resolution: int

    mode = "radial"

    @cached_property
    def rho(self) -> np.ndarray:
        return self.u / (1.0 - self.u)

    @cached_property
    def bary(self) -> np.ndarray:
        return barycentric_weights(self.u)

    @cached_property
    def D(self) -> np.ndarray:
        return diff_matrix(self.u, self.bary)

    def integrate(self, values: np.ndarray, weights: np.ndarray | None = None) -> float:
        w = self.weights if weights is None else weights
        return float(np.dot(w, values))

    def d_du(self, values: np.ndarray) -> np.ndarray:
        return self.D @ values

    def d_drho(self, values: np.ndarray) -> np.ndarray:
        return (1.0 - self.u) ** 2 * (self.D @ values)

    def ddbar(self, values: np.ndarray) -> np.ndarray:
        """Mixed chart derivative d_z d_zbar of a radial field: (rho f')'."""
        f_rho = self.d_drho(values)
        return self.d_drho(self.rho * f_rho)

    def grad_sq_half(self, values: np.ndarray) -> np.ndarray:
        """|d_z f|^2 = rho (df/drho)^2 for a radial real field."""
        f_rho = self.d_drho(values)
        return self.rho * f_rho**2

    def sample(self, values: np.ndarray, u_targets: np.ndarray) -> np.ndarray:
        """Evaluate a nodal field at off-grid u points (barycentric)."""
        return interp_matrix(self.u, self.bary, u_targets) @ values


@dataclass(frozen=True)
class Full2DGrid:
    """Product grid Gauss-Legendre (radial) x uniform periodic (angle).

    Nodes are z = sqrt(rho) e^{i theta}; one affine chart covers the model up
    to a point of measure zero, which quadrature never sees.
    """

    u: np.ndarray
    wu: np.ndarray
    theta: np.ndarray
    resolution: int
    n_theta: int

    mode = "full2d"

    @cached_property
    def rho(self) -> np.ndarray:
        return self.u / (1.0 - self.u)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.repeat(self.wu[:, None] / self.n_theta, self.n_theta, axis=1)

    @cached_property
    def nodes(self) -> np.ndarray:
        r = np.sqrt(self.rho)
        return r[:, None] * np.exp(1j * self.theta[None, :])

    @cached_property
    def bary(self) -> np.ndarray:
        return barycentric_weights(self.u)

    @cached_property
    def D(self) -> np.ndarray:
        return diff_matrix(self.u, self.bary)

    @cached_property
    def _m(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_theta, d=1.0 / self.n_theta)

    def integrate(self, values: np.ndarray, weights: np.ndarray | None = None) -> float:
        w = self.weights if weights is None else weights
        return float(np.sum(w * values))

    def d_drho(self, values: np.ndarray) -> np.ndarray:
        return ((1.0 - self.u) ** 2)[:, None] * (self.D @ values)

    def d_dtheta(self, values: np.ndarray) -> np.ndarray:
        spec = np.fft.fft(values, axis=1)
        return np.real(np.fft.ifft(1j * self._m[None, :] * spec, axis=1))

    def ddbar(self, values: np.ndarray) -> np.ndarray:
        """d_z d_zbar f = (rho f_rho)_rho + f_theta_theta / (4 rho)."""
        spec = np.fft.fft(values, axis=1)
        radial = self._d_drho_spec(self.rho[:, None] * self._d_drho_spec(spec))
        angular = -(self._m[None, :] ** 2) * spec / (4.0 * self.rho[:, None])
        return np.real(np.fft.ifft(radial + angular, axis=1))

    def _d_drho_spec(self, spec: np.ndarray) -> np.ndarray:
        return ((1.0 - self.u) ** 2)[:, None] * (self.D @ spec)

    def grad_sq_half(self, values: np.ndarray) -> np.ndarray:
        """|d_z f|^2 = rho f_rho^2 + f_theta^2/(4 rho) for a real field."""
        f_rho = self.d_drho(values)
        f_th = self.d_dtheta(values)
        return self.rho[:, None] * f_rho**2 + f_th**2 / (4.0 * self.rho[:, None])


def build_grid(mode: str, resolution: int, n_theta: int = 64):
    """Build a quadrature grid.

    Parameters
    ----------
    mode : "radial" or "full2d"
    resolution : number of radial Gauss-Legendre nodes, at least 8.
    n_theta : angular nodes for the full2d mode (power of two recommended).
    """
    if resolution < MIN_RESOLUTION:
        raise GridError(f"resolution {resolution} below minimum {MIN_RESOLUTION}")
    u, w = gauss_legendre_01(resolution)
    if mode == "radial":
        return RadialGrid(u=u, weights=w, resolution=resolution)
    if mode in ("full2d", "full-2d", "2d"):
        if n_theta < 8:
            raise GridError(f"n_theta {n_theta} below minimum 8")
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        return Full2DGrid(u=u, wu=w, theta=theta, resolution=resolution, n_theta=n_theta)
    raise GridError(f"unknown grid mode {mode!r}")
