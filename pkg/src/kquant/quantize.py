"""Section spaces, the Gram and projective-embedding maps, and balanced data.

Degree-k sections are the monomials s_j = z^j, j = 0..k, with base pointwise
norms |s_j|^2 = rho^j/(1+rho)^k = u^j (1-u)^{k-j}.  The Gram map sends a
potential to the L^2 form H_{ab} = int (s_a, s_b) e^{-k phi} d mu_phi; the
embedding map sends a positive form H back to the potential
(1/k) log[(1/N) sum |s_a|^2_H] built from any H-orthonormal basis.  Their
composition obeys the pointwise identity

    fs(hilb(phi)) = phi + (1/k) log(rho_k(phi)/N_k)

with rho_k the density of states, which is the workhorse checked by the
tests.  The twist potential psi of an automorphism sigma solves
sigma^* omega_phi - omega_phi = i ddbar psi with the normalization
int e^psi d mu_phi = N_k / k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import (
    AutomorphismLift,
    KQuantError,
    MetricData,
    NonKahlerError,
    Potential,
    identity_lift,
    metric_data,
    sections_dim,
)

__all__ = [
    "SectionBasis",
    "section_basis",
    "HermForm",
    "NotPositiveDefiniteError",
    "hilb",
    "fs",
    "BergmanField",
    "bergman",
    "PsiField",
    "psi_potential",
    "balanced_residual",
    "IterationLog",
    "sigma_balanced_iterate",
    "save_herm_form",
    "load_herm_form",
]


class NotPositiveDefiniteError(KQuantError):
    pass


@dataclass(frozen=True)
class SectionBasis:
    """Monomial basis of the degree-k section space with pointwise tables.

    ``log_norms`` holds log |s_j|^2 at the radial nodes, shape (n_u, k+1);
    the full pairing (s_a, s_b)(z) is recovered with the angular phase
    e^{i(a-b)theta}, kept implicit until Gram assembly.
    """

    grid: object
    degree: int

    @property
    def dimension(self) -> int:
        return sections_dim(self.degree)

    @property
    def log_norms(self) -> np.ndarray:
        u = self.grid.u
        j = np.arange(self.degree + 1)
        return j[None, :] * np.log(u)[:, None] + (self.degree - j)[None, :] * np.log1p(
            -u
        )[:, None]

    @property
    def norms(self) -> np.ndarray:
        return np.exp(self.log_norms)

    def pairing_at_origin(self) -> np.ndarray:
        out = np.zeros((self.dimension, self.dimension))
        out[0, 0] = 1.0
        return out


def section_basis(grid, k: int) -> SectionBasis:
    if k < 1:
        raise KQuantError("degree k must be at least 1")
    return SectionBasis(grid=grid, degree=k)


@dataclass(frozen=True)
class HermForm:
    """Positive definite Hermitian form on the degree-k section space."""

    entries: np.ndarray
    degree: int

    def __post_init__(self):
        n = sections_dim(self.degree)
        if self.entries.shape != (n, n):
            raise KQuantError(f"form shape {self.entries.shape} does not match degree {self.degree}")

    @property
    def dimension(self) -> int:
        return sections_dim(self.degree)

    def hermitian_defect(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T)).min())

    def cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(0.5 * (self.entries + self.entries.conj().T))
        except np.linalg.LinAlgError:
            raise NotPositiveDefiniteError("form is not positive definite") from None

    def scaled(self, c: float) -> "HermForm":
        return HermForm(entries=c * self.entries, degree=self.degree)


def save_herm_form(path, form: HermForm) -> None:
    lines = [f"degree: {form.degree}"]
    for row in form.entries:
        lines.append(" ".join(f"{v.real:.17g} {v.imag:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_herm_form(path) -> HermForm:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines[0].lower().startswith("degree:"):
        raise KQuantError("herm form file must start with a degree header")
    k = int(lines[0].split(":")[1])
    n = sections_dim(k)
    if len(lines) != n + 1:
        raise KQuantError(f"expected {n} matrix rows, found {len(lines) - 1}")
    rows = []
    for ln in lines[1:]:
        toks = [float(t) for t in ln.split()]
        rows.append([complex(toks[2 * i], toks[2 * i + 1]) for i in range(n)])
    return HermForm(entries=np.array(rows, dtype=complex), degree=k)


# ---------------------------------------------------------------------------
# Gram and embedding maps


def _scaled_sections(grid, k: int) -> np.ndarray:
    """s_j(z) weighted by the base half-norm: z^j (1+rho)^{-k/2}, flattened.

    Magnitudes are u^{j/2} (1-u)^{(k-j)/2} <= 1, so the table stays in range
    for any degree.
    """
    j = np.arange(k + 1)
    logmag = 0.5 * (
        j[None, :] * np.log(grid.u)[:, None]
        + (k - j)[None, :] * np.log1p(-grid.u)[:, None]
    )
    mag = np.exp(logmag)  # (n_u, k+1)
    phase = np.exp(1j * grid.theta[:, None] * j[None, :])  # (n_theta, k+1)
    return (mag[:, None, :] * phase[None, :, :]).reshape(-1, k + 1)


def hilb(pot: Potential, k: int, md: MetricData | None = None) -> HermForm:
    """L^2 Gram form of the degree-k sections against e^{-k phi} d mu_phi.

    Circle-invariant input gives a diagonal form in the monomial basis; the
    full 2D path assembles the Gram matrix as P^dagger P so the result is
    Hermitian positive semidefinite by construction.
    """
    grid = pot.grid
    md = metric_data(pot) if md is None else md
    basis = section_basis(grid, k)
    if grid.mode == "radial":
        integrand = basis.norms * (np.exp(-k * pot.values) * md.volume_weights)[:, None]
        return HermForm(entries=np.diag(integrand.sum(axis=0)).astype(complex), degree=k)
    wt = (md.volume_weights * np.exp(-k * pot.values)).ravel()
    P = _scaled_sections(grid, k) * np.sqrt(wt)[:, None]
    return HermForm(entries=P.conj().T @ P, degree=k)


def _inverse_contraction(form: HermForm, basis: SectionBasis) -> np.ndarray:
    """sum_{ab} (H^{-1})_{ba} (s_a, s_b)(z) at the grid nodes (radial or 2D)."""
    grid = basis.grid
    Linv = np.linalg.inv(form.cholesky())
    Hinv = Linv.conj().T @ Linv
    if grid.mode == "radial":
        off = Hinv - np.diag(np.diag(Hinv))
        if np.max(np.abs(off)) > 1e-11 * np.max(np.abs(np.diag(Hinv))):
            raise KQuantError(
                "non-diagonal form contracted against a radial grid; "
                "use the full 2D grid for non-invariant data"
            )
        return basis.norms @ np.real(np.diag(Hinv))
    B = _scaled_sections(grid, form.degree) @ Linv.conj().T
    return np.sum(np.abs(B) ** 2, axis=1).reshape(grid.nodes.shape)


def _eigh_contraction(form: HermForm, basis: SectionBasis) -> np.ndarray:
    """Same density through an eigendecomposition orthonormalization."""
    grid = basis.grid
    H = 0.5 * (form.entries + form.entries.conj().T)
    vals, vecs = np.linalg.eigh(H)
    if vals.min() <= 0.0:
        raise NotPositiveDefiniteError("form is not positive definite")
    C = vecs / np.sqrt(vals)[None, :]  # columns: H-orthonormal coefficients
    if grid.mode == "radial":
        Hinv = C @ C.conj().T
        return basis.norms @ np.real(np.diag(Hinv))
    B = _scaled_sections(grid, form.degree) @ C
    return np.sum(np.abs(B) ** 2, axis=1).reshape(grid.nodes.shape)


def fs(form: HermForm, grid) -> Potential:
    """Embedding potential of a positive form: (1/k) log[(1/N) sum |s_a|^2].

    The sum over an H-orthonormal basis equals the contraction of the
    pointwise pairing table with H^{-1}, so the result does not depend on
    which orthonormal basis a factorization produces.
    """
    basis = section_basis(grid, form.degree)
    dens = _inverse_contraction(form, basis)
    vals = np.log(dens / basis.dimension) / form.degree
    if grid.mode == "radial":
        return Potential(grid, vals, invariant=True)
    invariant = bool(np.allclose(vals, vals.mean(axis=1, keepdims=True), atol=1e-13))
    return Potential(grid, vals, invariant=invariant)


@dataclass(frozen=True)
class BergmanField:
    """Density of states rho_k(phi) at the grid nodes."""

    values: np.ndarray
    degree: int

    def min(self) -> float:
        return float(np.min(self.values))


def bergman(pot: Potential, k: int, md: MetricData | None = None, form: HermForm | None = None) -> BergmanField:
    """rho_k(phi) = e^{-k phi} * contraction of the base pairing with H^{-1}."""
    grid = pot.grid
    form = hilb(pot, k, md=md) if form is None else form
    basis = section_basis(grid, k)
    dens = _inverse_contraction(form, basis)
    return BergmanField(values=dens * np.exp(-k * pot.values), degree=k)


# ---------------------------------------------------------------------------
# Twist potential


@dataclass(frozen=True)
class PsiField:
    """Normalized potential of the pullback defect sigma^* omega_phi - omega_phi."""

    values: np.ndarray
    degree: int
    scale: complex  # point map of the automorphism it belongs to

    def exp(self) -> np.ndarray:
        return np.exp(self.values)


def psi_potential(lift: AutomorphismLift, pot: Potential, md: MetricData | None = None) -> PsiField:
    """Twist potential psi with i ddbar psi = sigma^* omega_phi - omega_phi.

    Constructed from the exact pullback potential: 2 pi psi = c_sigma +
    phi o sigma - phi up to the constant fixed by int e^psi d mu_phi =
    N_k/k.  For the identity the field is the constant log((k+1)/k).
    """
    md = metric_data(pot) if md is None else md
    k = lift.degree
    nu = sections_dim(k) / k
    if lift.is_identity:
        return PsiField(values=np.full_like(pot.values, np.log(nu)), degree=k, scale=1.0)
    w = lift.base_potential(pot.grid) + lift.compose_potential(pot) - pot.values
    raw = w / (2.0 * np.pi)
    mass = md.integrate(np.exp(raw))
    if not np.isfinite(mass) or mass <= 0.0:
        raise KQuantError("twist potential normalization integral is not finite")
    return PsiField(values=raw + np.log(nu / mass), degree=k, scale=lift.scale)


def balanced_residual(
    pot: Potential, k: int, lift: AutomorphismLift | None = None, md: MetricData | None = None
) -> float:
    """Sup-norm of rho_k(phi) - k e^{psi_k(phi)}; zero at normalized balance."""
    lift = identity_lift(k) if lift is None else lift
    md = metric_data(pot) if md is None else md
    rho = bergman(pot, k, md=md)
    psi = psi_potential(lift, pot, md=md)
    return float(np.max(np.abs(rho.values - k * psi.exp())))


# ---------------------------------------------------------------------------
# Fixed-point iteration toward sigma-balanced potentials


@dataclass
class IterationLog:
    converged: bool
    iterations: int
    residuals: list[float] = field(default_factory=list)
    min_eigenvalues: list[float] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    message: str = ""

    def write_csv(self, path) -> None:
        lines = ["iter,residual,min_eigenvalue,energy"]
        for i, (r, m, e) in enumerate(zip(self.residuals, self.min_eigenvalues, self.energies)):
            lines.append(f"{i},{r:.17g},{m:.17g},{e:.17g}")
        Path(path).write_text("\n".join(lines) + "\n")


def sigma_balanced_iterate(
    pot: Potential,
    k: int,
    lift: AutomorphismLift | None = None,
    max_iter: int = 200,
    tol: float = 1e-8,
    track_energy: bool = False,
) -> tuple[Potential, IterationLog]:
    """Iterate phi -> mean-normalized pullback of fs(hilb(phi)) by sigma^{-1}.

    At the identity twist this is the classical Gram fixed-point iteration
    whose fixed points have constant density of states.  Non-convergence
    within ``max_iter`` is reported through the log, never raised; loss of
    positivity aborts with diagnostics.
    """
    lift = identity_lift(k) if lift is None else lift
    inv = lift.inverse()
    log = IterationLog(converged=False, iterations=0)
    current = pot.mean_normalized()
    for it in range(max_iter + 1):
        try:
            md = metric_data(current)
        except NonKahlerError as err:
            log.message = f"iteration left the Kahler cone at step {it}: {err}"
            return current, log
        form = hilb(current, k, md=md)
        res = balanced_residual(current, k, lift=lift, md=md)
        log.residuals.append(res)
        log.min_eigenvalues.append(form.min_eigenvalue())
        if track_energy:
            from .functionals import l_sigma_k

            log.energies.append(l_sigma_k(current, k, lift))
        else:
            log.energies.append(np.nan)
        log.iterations = it
        if res <= tol:
            log.converged = True
            return current, log
        if it == max_iter:
            break
        projected = fs(form, current.grid)
        current = inv.pullback_potential(projected, normalize=True)
    log.message = f"no convergence after {max_iter} iterations (residual {log.residuals[-1]:.3e})"
    return current, log
