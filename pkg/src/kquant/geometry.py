"""Potential calculus on the round sphere model with fixed conventions.

Convention sheet.  The base form is omega_0 = (i/2pi) ddbar log(1+|z|^2),
normalized so the total volume is exactly 1 and the scalar curvature of the
base metric is the constant 2.  A potential phi deforms the metric through
omega_phi = omega_0 + (i/2pi) ddbar phi; writing omega_phi =
(i/2pi) A_phi dz wedge dzbar, the local coefficient is

    A_phi = (1+rho)^{-2} + d_z d_zbar phi,     rho = |z|^2,

and in the compactified coordinate u = rho/(1+rho)

    A_phi = (1-u)^2 * (1 + d/du[ u (1-u) phi_u ]).

The complex Laplacian is Delta_phi = -(1/A_phi) d_z d_zbar, the scalar
curvature S(phi) = Delta_phi log A_phi, and the volume form d mu_phi has
density A_phi/A_0 against the base measure.  The base contribution to
log A_phi is differentiated in closed form so that S(0) == 2 holds to
machine precision; only the potential part is touched by spectral
differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import Full2DGrid, RadialGrid, build_grid

__all__ = [
    "SBAR",
    "VOLUME",
    "sections_dim",
    "KQuantError",
    "NonKahlerError",
    "Potential",
    "zero_potential",
    "potential_from_radial_coeffs",
    "potential_from_values",
    "load_potential",
    "save_potential",
    "MetricData",
    "metric_data",
    "VectorFieldSpec",
    "rotation_field",
    "holomorphy_potential",
    "AutomorphismLift",
    "identity_lift",
    "sigma_lift",
    "TWIST_RATE_DEFAULT",
]

VOLUME = 1.0
SBAR = 2.0

# Calibrated time normalization of the degree-k twist flow: sigma_k(t) is the
# flow of -(c0/k) V at time t.  With the rotation-moment normalization used
# here the exponent is -c0 t/(2 pi k), i.e. a chart dilation by e^{t/(4k)}.
TWIST_RATE_DEFAULT = -np.pi / 2.0


def sections_dim(k: int) -> int:
    """Dimension of the degree-k section space: k + 1."""
    return k + 1


class KQuantError(ValueError):
    pass


class NonKahlerError(KQuantError):
    """Raised when a potential fails pointwise positivity of its form."""


@dataclass(frozen=True)
class Potential:
    """A Kahler potential sampled on a quadrature grid.

    ``values`` has shape (n_u,) on a radial grid and (n_u, n_theta) on the
    full 2D grid.  ``invariant`` marks circle-invariant data (always true in
    radial mode).  ``profile`` optionally carries the exact u-polynomial
    (constant, degree-1-and-up coefficients) the values were sampled from;
    derived metric quantities then use exact polynomial derivatives instead
    of spectral differentiation, which matters for sup-norm tests near the
    pole u = 1.
    """

    grid: RadialGrid | Full2DGrid
    values: np.ndarray
    invariant: bool = True
    profile: tuple[float, tuple[float, ...]] | None = None

    def __post_init__(self):
        expect = (self.grid.resolution,) if self.grid.mode == "radial" else (
            self.grid.resolution,
            self.grid.n_theta,
        )
        if self.values.shape != expect:
            raise KQuantError(
                f"potential values shape {self.values.shape} does not match grid {expect}"
            )

    def with_values(self, values: np.ndarray, invariant: bool | None = None) -> "Potential":
        inv = self.invariant if invariant is None else invariant
        return Potential(self.grid, values, inv)

    def scaled(self, t: float) -> "Potential":
        prof = None
        if self.profile is not None:
            c0, cs = self.profile
            prof = (t * c0, tuple(t * c for c in cs))
        return Potential(self.grid, t * self.values, self.invariant, prof)

    def shifted(self, c: float) -> "Potential":
        """Add a constant; the metric is unchanged, the Gram form rescales."""
        prof = None
        if self.profile is not None:
            c0, cs = self.profile
            prof = (c0 + c, cs)
        return Potential(self.grid, self.values + c, self.invariant, prof)

    def mean_normalized(self) -> "Potential":
        """Subtract the base-measure mean; fixes additive gauge."""
        return self.shifted(-self.grid.integrate(self.values))

    def combine(self, other: "Potential", a: float = 1.0, b: float = 1.0) -> "Potential":
        """a * self + b * other, preserving exact profiles when both carry one."""
        prof = None
        if self.profile is not None and other.profile is not None:
            c0a, csa = self.profile
            c0b, csb = other.profile
            n = max(len(csa), len(csb))
            cs = tuple(
                a * (csa[i] if i < len(csa) else 0.0) + b * (csb[i] if i < len(csb) else 0.0)
                for i in range(n)
            )
            prof = (a * c0a + b * c0b, cs)
        return Potential(
            self.grid,
            a * self.values + b * other.values,
            self.invariant and other.invariant,
            prof,
        )


def zero_potential(grid) -> Potential:
    shape = (grid.resolution,) if grid.mode == "radial" else (grid.resolution, grid.n_theta)
    return Potential(grid, np.zeros(shape), profile=(0.0, ()))


def potential_from_radial_coeffs(grid, coeffs) -> Potential:
    """phi = sum_m c_m u^m with u = rho/(1+rho); invariant by construction."""
    coeffs = np.asarray(coeffs, dtype=float)
    vals = np.zeros_like(grid.u)
    for m, c in enumerate(coeffs, start=1):
        vals = vals + c * grid.u**m
    prof = (0.0, tuple(float(c) for c in coeffs))
    if grid.mode == "radial":
        return Potential(grid, vals, profile=prof)
    return Potential(
        grid, np.repeat(vals[:, None], grid.n_theta, axis=1), invariant=True, profile=prof
    )


def potential_from_values(grid, values, invariant: bool | None = None) -> Potential:
    values = np.asarray(values, dtype=float)
    if invariant is None:
        invariant = grid.mode == "radial" or bool(
            np.allclose(values, values.mean(axis=-1, keepdims=True))
        )
    return Potential(grid, values, invariant)


def save_potential(path, pot: Potential) -> None:
    lines = [f"mode: {pot.grid.mode}", f"resolution: {pot.grid.resolution}"]
    if pot.grid.mode == "full2d":
        lines.append(f"n_theta: {pot.grid.n_theta}")
    lines.append("values: " + " ".join(f"{v:.17g}" for v in np.ravel(pot.values)))
    Path(path).write_text("\n".join(lines) + "\n")


def load_potential(path, grid=None) -> Potential:
    """Load a potential from the text format.

    Two layouts are accepted: radial coefficients ``coeffs: c1 c2 ...`` for
    phi = sum c_m u^m, or raw node samples with a grid header (mode,
    resolution, optional n_theta, then a ``values:`` line).
    """
    text = Path(path).read_text()
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(":")
        fields[key.strip().lower()] = rest.strip()
    if "coeffs" in fields:
        if grid is None:
            raise KQuantError("coefficient potentials need a target grid")
        return potential_from_radial_coeffs(grid, [float(t) for t in fields["coeffs"].split()])
    try:
        mode = fields["mode"]
        resolution = int(fields["resolution"])
        raw = np.array([float(t) for t in fields["values"].split()])
    except KeyError as missing:
        raise KQuantError(f"potential file missing field {missing}") from None
    if grid is None:
        n_theta = int(fields.get("n_theta", 64))
        grid = build_grid(mode, resolution, n_theta)
    if grid.mode != mode or grid.resolution != resolution:
        raise KQuantError("potential file header does not match the supplied grid")
    shape = (resolution,) if mode == "radial" else (resolution, grid.n_theta)
    return Potential(grid, raw.reshape(shape))


# ---------------------------------------------------------------------------
# Metric data


def _base_coeff(grid) -> np.ndarray:
    a0 = (1.0 - grid.u) ** 2
    return a0 if grid.mode == "radial" else np.repeat(a0[:, None], grid.n_theta, axis=1)


def _density_field(pot: Potential) -> np.ndarray:
    """Density A_phi / A_0 of d mu_phi against the base measure."""
    grid = pot.grid
    if grid.mode == "radial":
        if pot.profile is not None:
            return _profile_metric(grid.u, pot.profile)[0]
        inner = grid.u * (1.0 - grid.u) * (grid.D @ pot.values)
        return 1.0 + grid.D @ inner
    return 1.0 + grid.ddbar(pot.values) / _base_coeff(grid)


def _profile_metric(u: np.ndarray, profile) -> tuple[np.ndarray, np.ndarray]:
    """Exact density and scalar curvature of a u-polynomial potential.

    With g1 = u(1-u) phi_u the density is 1 + g1' and the curvature is
    (2 dens^2 - W' dens + W dens') / dens^3 for W = u(1-u) dens', all exact
    polynomial arithmetic.
    """
    from numpy.polynomial import polynomial as P

    c0, cs = profile
    phi = np.concatenate(([c0], np.asarray(cs, dtype=float)))
    uu = np.array([0.0, 1.0, -1.0])  # u(1-u)
    g1 = P.polymul(uu, P.polyder(phi)) if len(phi) > 1 else np.array([0.0])
    dens_c = P.polyadd(np.array([1.0]), P.polyder(g1))
    ddens_c = P.polyder(dens_c)
    W = P.polymul(uu, ddens_c)
    dW = P.polyder(W)
    dens = P.polyval(u, dens_c)
    ddens = P.polyval(u, ddens_c)
    Wv = P.polyval(u, W)
    dWv = P.polyval(u, dW)
    scalar = (2.0 * dens**2 - dWv * dens + Wv * ddens) / dens**3
    return dens, scalar


@dataclass(frozen=True)
class MetricData:
    """Derived metric quantities of an admissible potential.

    ``a`` is the local coefficient A_phi, ``volume_weights`` are quadrature
    weights for d mu_phi, ``scalar`` the scalar curvature field, and ``sbar``
    the model constant 2.  The Laplacian and gradient pairing close over the
    same coefficient so the integration-by-parts identities hold exactly at
    the discrete level up to quadrature error.
    """

    potential: Potential
    a: np.ndarray
    density: np.ndarray
    volume_weights: np.ndarray
    scalar: np.ndarray
    sbar: float = SBAR

    @property
    def grid(self):
        return self.potential.grid

    def laplace(self, values: np.ndarray) -> np.ndarray:
        """Delta_phi f = -(d_z d_zbar f) / A_phi.

        In radial mode the base factor (1-u)^2 cancels analytically between
        the mixed derivative and A_phi, which keeps the operator accurate at
        the outermost nodes.
        """
        grid = self.grid
        if grid.mode == "radial":
            inner = grid.u * (1.0 - grid.u) * (grid.D @ values)
            return -(grid.D @ inner) / self.density
        return -grid.ddbar(values) / self.a

    def inner_grad(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        """(nabla f, nabla g) with norm |nabla f|^2 = |d_z f|^2 / A_phi."""
        grid = self.grid
        if grid.mode == "radial":
            return grid.u * (1.0 - grid.u) * (grid.D @ f) * (grid.D @ g) / self.density
        fr, gr = grid.d_drho(f), grid.d_drho(g)
        ft, gt = grid.d_dtheta(f), grid.d_dtheta(g)
        return (grid.rho[:, None] * fr * gr + ft * gt / (4.0 * grid.rho[:, None])) / self.a

    def grad_norm_sq(self, f: np.ndarray) -> np.ndarray:
        """Riemannian |df|^2 = 2 |d_z f|^2 / A_phi."""
        return 2.0 * self.inner_grad(f, f)

    def integrate(self, values: np.ndarray) -> float:
        return self.grid.integrate(values, self.volume_weights)


def metric_data(pot: Potential) -> MetricData:
    """Assemble MetricData; rejects non-Kahler input (A_phi <= 0 anywhere)."""
    grid = pot.grid
    density = _density_field(pot)
    if np.min(density) <= 0.0:
        raise NonKahlerError(
            f"potential not Kahler: min density {np.min(density):.3e} <= 0"
        )
    a0 = _base_coeff(grid)
    a = a0 * density
    weights = grid.weights * density
    # log A = log A0 + log(density); the base part has the closed-form mixed
    # derivative -2 A0, so S(0) == 2 exactly.
    if grid.mode == "radial":
        if pot.profile is not None:
            scalar = _profile_metric(grid.u, pot.profile)[1]
        else:
            bump = np.log(density)
            inner = grid.u * (1.0 - grid.u) * (grid.D @ bump)
            scalar = (2.0 - grid.D @ inner) / density
    else:
        bump = np.log(density)
        scalar = (2.0 * a0 - grid.ddbar(bump)) / a
    return MetricData(potential=pot, a=a, density=density, volume_weights=weights, scalar=scalar)


# ---------------------------------------------------------------------------
# Holomorphic vector fields and their potentials


@dataclass(frozen=True)
class VectorFieldSpec:
    """A gradient holomorphic field of the model.

    ``strength`` scales the standard generator: the gradient of the rotation
    moment (u - 1/2)/(2 pi), whose chart flow is the real dilation
    z -> e^{strength t/(2 pi)} z.  ``moment_values`` optionally carries a
    custom radial moment profile; holomorphy of its gradient is then checked
    rather than assumed.
    """

    strength: float = 1.0
    moment_values: np.ndarray | None = None

    @property
    def is_zero(self) -> bool:
        return self.strength == 0.0 and self.moment_values is None

    def killing_potential(self, grid) -> np.ndarray:
        if self.moment_values is not None:
            vals = self.moment_values - grid.integrate(self.moment_values)
            return vals
        vals = (grid.u - 0.5) / (2.0 * np.pi) * self.strength
        return vals

    def flow_scale(self, time: float) -> float:
        """Chart dilation factor of the time-``time`` flow of the field."""
        if self.moment_values is not None:
            raise KQuantError("custom moment profiles have no closed-form flow")
        return float(np.exp(self.strength * time / (2.0 * np.pi)))


def rotation_field(strength: float = 1.0) -> VectorFieldSpec:
    return VectorFieldSpec(strength=strength)


def holomorphy_potential(
    V: VectorFieldSpec, pot: Potential, tol: float = 1e-6
) -> np.ndarray:
    """Mean-zero potential theta with g_phi(V, .) = d theta.

    For the standard generator theta(phi) = strength * [rho F'/(2 pi) - mean]
    with F = log(1+rho) + phi.  A custom moment profile is accepted only if
    its gradient field is holomorphic for the model, which pins the profile
    to a multiple of the rotation moment; otherwise the residual of the
    defining equation is reported through an exception.
    """
    grid = pot.grid
    if grid.mode != "radial" and not pot.invariant:
        raise KQuantError("holomorphy potentials need circle-invariant input")
    md = metric_data(pot)
    a = md.a if grid.mode == "radial" else md.a[:, 0]
    u = grid.u
    if V.moment_values is not None:
        # d theta = strength * A_phi/(2 pi) d rho is forced by holomorphy;
        # fit the strength and insist the residual is small.
        mu = V.killing_potential(grid)
        mu_rho = grid.d_drho(mu)
        target = a / (2.0 * np.pi)
        c = float(np.dot(mu_rho, target) / np.dot(target, target))
        resid = float(np.max(np.abs(mu_rho - c * target)) / max(np.max(np.abs(target)), 1e-300))
        if resid > tol:
            raise KQuantError(
                f"moment profile does not generate a holomorphic gradient field "
                f"(relative residual {resid:.3e})"
            )
        strength = c
    else:
        strength = V.strength
    if strength == 0.0:
        return np.zeros_like(pot.values)
    if pot.profile is not None:
        from numpy.polynomial import polynomial as P

        c0, cs = pot.profile
        phi_c = np.concatenate(([c0], np.asarray(cs, dtype=float)))
        g1 = (
            P.polymul(np.array([0.0, 1.0, -1.0]), P.polyder(phi_c))
            if len(phi_c) > 1
            else np.array([0.0])
        )
        rho_fprime = u + P.polyval(u, g1)
    else:
        phi_vals = pot.values if grid.mode == "radial" else pot.values[:, 0]
        rho_fprime = u + u * (1.0 - u) * (grid.D @ phi_vals)
    theta = strength * rho_fprime / (2.0 * np.pi)
    mdw = md.volume_weights if grid.mode == "radial" else md.volume_weights[:, 0] * grid.n_theta
    theta = theta - float(np.dot(mdw, theta))
    if grid.mode == "radial":
        return theta
    return np.repeat(theta[:, None], grid.n_theta, axis=1)


# ---------------------------------------------------------------------------
# Automorphism lifts


@dataclass(frozen=True)
class AutomorphismLift:
    """A linear automorphism z -> scale * z with its degree-k section action.

    The section action on the monomial basis is diag(scale^j); composing
    lifts multiplies the scales, so the one-parameter group law is exact.
    ``base_potential`` is the closed-form c with sigma^* omega_0 = omega_0
    + (i/2pi) ddbar c.
    """

    scale: complex
    degree: int

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0

    @property
    def section_matrix(self) -> np.ndarray:
        j = np.arange(self.degree + 1)
        return np.diag(np.asarray(self.scale, dtype=complex) ** j)

    def inverse(self) -> "AutomorphismLift":
        return AutomorphismLift(scale=1.0 / self.scale, degree=self.degree)

    def compose(self, other: "AutomorphismLift") -> "AutomorphismLift":
        if self.degree != other.degree:
            raise KQuantError("cannot compose lifts of different degrees")
        return AutomorphismLift(scale=self.scale * other.scale, degree=self.degree)

    def map_points(self, z: np.ndarray) -> np.ndarray:
        return self.scale * z

    def pulled_u(self, grid) -> np.ndarray:
        """u-coordinate of sigma(z) at the grid nodes."""
        lam2 = abs(self.scale) ** 2
        return lam2 * grid.u / (1.0 - grid.u + lam2 * grid.u)

    def base_potential(self, grid) -> np.ndarray:
        """c_sigma = log((1 + |scale|^2 rho)/(1 + rho)), in closed form."""
        lam2 = abs(self.scale) ** 2
        vals = np.log1p((lam2 - 1.0) * grid.u)
        if grid.mode == "radial":
            return vals
        return np.repeat(vals[:, None], grid.n_theta, axis=1)

    def compose_potential(self, pot: Potential) -> np.ndarray:
        """Values of phi(sigma(z)) at the grid nodes."""
        grid = pot.grid
        u_t = self.pulled_u(grid)
        if grid.mode == "radial":
            return grid.sample(pot.values, u_t)
        from .grids import interp_matrix

        P = interp_matrix(grid.u, grid.bary, u_t)
        vals = P @ pot.values
        beta = float(np.angle(self.scale))
        if beta != 0.0:
            spec = np.fft.fft(vals, axis=1)
            m = np.fft.fftfreq(grid.n_theta, d=1.0 / grid.n_theta)
            vals = np.real(np.fft.ifft(spec * np.exp(1j * m * beta)[None, :], axis=1))
        return vals

    def pullback_potential(self, pot: Potential, normalize: bool = False) -> Potential:
        """Potential of sigma^* omega_phi: c_sigma + phi o sigma."""
        vals = self.base_potential(pot.grid) + self.compose_potential(pot)
        out = pot.with_values(vals)
        return out.mean_normalized() if normalize else out


def identity_lift(k: int) -> AutomorphismLift:
    return AutomorphismLift(scale=1.0, degree=k)


def sigma_lift(
    V: VectorFieldSpec, k: int, t: float = 1.0, rate_constant: float = TWIST_RATE_DEFAULT
) -> AutomorphismLift:
    """Degree-k twist automorphism: the flow of -(c0/k) V at time t.

    For the standard generator the point map is the dilation
    z -> exp(-c0 strength t / (2 pi k)) z.  ``rate_constant`` is the
    calibrated c0 (default -pi/2, which makes k psi_k converge to
    (theta + 2)/2; see quantize.psi_potential).
    """
    if k < 1:
        raise KQuantError("degree k must be at least 1")
    if V.is_zero:
        return identity_lift(k)
    lam = V.flow_scale(-rate_constant * t / k)
    return AutomorphismLift(scale=lam, degree=k)
