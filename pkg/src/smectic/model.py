"""Physical parameters, the Ginzburg-Landau potential and energy functionals."""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np


def potential_F(n) -> np.ndarray:
    """F(n) = (|n|^2 - 1)^2 / 4, vectorized over leading axes."""
    n = np.asarray(n, dtype=float)
    s = np.einsum("...i,...i->...", n, n)
    return 0.25 * (s - 1.0) ** 2


def potential_f(n) -> np.ndarray:
    """Gradient of F: (|n|^2 - 1) n."""
    n = np.asarray(n, dtype=float)
    s = np.einsum("...i,...i->...", n, n)
    return (s - 1.0)[..., None] * n


def potential_f_jacobian(n) -> np.ndarray:
    """f'(n) = (|n|^2 - 1) I + 2 n n^T."""
    n = np.asarray(n, dtype=float)
    s = np.einsum("...i,...i->...", n, n)
    return (s - 1.0)[..., None, None] * np.eye(2) + 2.0 * n[..., :, None] * n[..., None, :]


def fk_od2(b, a) -> np.ndarray:
    """Second-order linear approximation of f at the midpoint.

    ``(a.b) a + |a|^2 (b - a)/2 - (b + a)/2`` with ``a`` the old and ``b``
    the new gradient; identical to ``f(a) + f'(a)(b - a)/2``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ab = np.einsum("...i,...i->...", a, b)[..., None]
    aa = np.einsum("...i,...i->...", a, a)[..., None]
    return ab * a + aa * (b - a) / 2.0 - (b + a) / 2.0


def fk_mp(b, a) -> np.ndarray:
    """Midpoint-secant approximation ``((|a|^2 + |b|^2)/2 - 1) (a + b)/2``.

    Writing ``F(n) = (|n|^2 - 1)^2 / 4`` as ``g(|n|^2)`` with
    ``g(s) = (s - 1)^2 / 4``, the difference quotient of ``g`` between
    ``|a|^2`` and ``|b|^2`` is ``((|a|^2 + |b|^2)/2 - 1) / 2`` and
    ``|b|^2 - |a|^2 = (a + b).(b - a)``, so ``fk_mp(b, a).(b - a)`` equals
    ``F(b) - F(a)`` exactly: the approximation adds no numerical dissipation.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = 0.5 * (np.einsum("...i,...i->...", a, a) + np.einsum("...i,...i->...", b, b)) - 1.0
    return s[..., None] * (a + b) / 2.0


def fk_explicit(b, a) -> np.ndarray:
    """First-order explicit ``f(a)``; kept as a negative control for order studies."""
    return potential_f(a) + 0.0 * np.asarray(b, dtype=float)


@dataclass(frozen=True)
class PotentialApproximation:
    """How ``f^k(b, a)`` enters the linear system.

    ``linearize(a, b_frozen)`` returns ``(T, r)`` with ``f^k ~= T b + r`` at
    each quadrature point; exact for linear approximations.
    """

    name: str
    fk: object
    linearize: object
    linear: bool


def _lin_od2(a, b_frozen):
    J = potential_f_jacobian(a)
    T = 0.5 * J
    r = potential_f(a) - np.einsum("...ij,...j->...i", T, a)
    return T, r


def _lin_mp(a, b_frozen):
    # Newton linearization in b about the frozen iterate; the fixed point is
    # the exact secant, and convergence is quadratic instead of the slow
    # contraction of freezing the scalar factor alone.
    b0 = b_frozen
    s = 0.5 * (np.einsum("...i,...i->...", a, a) + np.einsum("...i,...i->...", b0, b0)) - 1.0
    T = 0.5 * (s[..., None, None] * np.eye(2) + (a + b0)[..., :, None] * b0[..., None, :])
    r = fk_mp(b0, a) - np.einsum("...ij,...j->...i", T, b0)
    return T, r


def _lin_explicit(a, b_frozen):
    return np.zeros(a.shape + (2,)), potential_f(a)


POTENTIALS = {
    "od2": PotentialApproximation("od2", fk_od2, _lin_od2, linear=True),
    "mp": PotentialApproximation("mp", fk_mp, _lin_mp, linear=False),
}
# Not selectable from configuration; registered on demand by order tests.
EXPLICIT = PotentialApproximation("explicit", fk_explicit, _lin_explicit, linear=True)


def register_potential(approx: PotentialApproximation):
    POTENTIALS[approx.name] = approx


def solvability_bound(epsilon: float, gamma: float) -> float:
    """Largest admissible step ``2 eps^2 / gamma`` for the OD2 scheme.

    Evaluated in exact rational arithmetic from the decimal inputs so that
    e.g. eps = 0.05, gamma = 1 gives exactly 0.005.
    """
    eps = Fraction(repr(float(epsilon)))
    g = Fraction(repr(float(gamma)))
    return float(2 * eps * eps / g)


class ParamsError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SolvabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Params:
    mu1: float = 1.0
    mu4: float = 1.0
    mu5: float = 1.0
    lam: float = 1.0
    gamma: float = 1.0
    epsilon: float = 0.05
    dt: float = 1e-5
    t_end: float = 0.086
    nx: int = 32
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)
    scheme: str = "od2"
    tol_picard: float = 1e-9
    max_picard: int = 50
    tol_lin: float = 1e-10
    out_every: int = 100
    quad_degree: int = 6

    def errors(self, check_solvability: bool = True) -> list[str]:
        out = []
        for name in ("mu4", "lam", "gamma", "epsilon", "dt", "tol_picard", "tol_lin"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                out.append(f"{name} must be positive, got {v!r}")
        for name in ("mu1", "mu5"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                out.append(f"{name} must be non-negative, got {v!r}")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            out.append(f"t_end must be positive, got {self.t_end!r}")
        if int(self.nx) != self.nx or self.nx < 1:
            out.append(f"nx must be a positive integer, got {self.nx!r}")
        if self.max_picard < 1:
            out.append(f"max_picard must be at least 1, got {self.max_picard!r}")
        if self.out_every < 0:
            out.append(f"out_every must be non-negative, got {self.out_every!r}")
        x0, x1, y0, y1 = self.bounds
        if not (x1 > x0 and y1 > y0):
            out.append(f"bounds must satisfy x_min < x_max and y_min < y_max, got {self.bounds!r}")
        if self.scheme not in POTENTIALS:
            out.append(f"scheme must be one of {sorted(POTENTIALS)}, got {self.scheme!r}")
        if check_solvability and not out and self.solvability_violated:
            out.append(self.solvability_message)
        return out

    @property
    def solvability_limit(self) -> float:
        return solvability_bound(self.epsilon, self.gamma)

    @property
    def solvability_violated(self) -> bool:
        return self.scheme == "od2" and self.dt >= self.solvability_limit

    @property
    def solvability_message(self) -> str:
        return (f"dt={self.dt!r} violates the OD2 solvability constraint "
                f"dt < 2*epsilon^2/gamma = {self.solvability_limit!r}")

    def validate(self) -> "Params":
        """Raise ``ParamsError`` on invalid values; warn on a solvability violation."""
        errs = self.errors(check_solvability=False)
        if errs:
            raise ParamsError(errs)
        if self.solvability_violated:
            warnings.warn(self.solvability_message, SolvabilityWarning, stacklevel=2)
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def replace(self, **changes) -> "Params":
        return dataclasses.replace(self, **changes)


@dataclass
class State:
    """One time level. ``prev_u``/``prev_phi`` hold the level before it."""

    t: float
    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    step: int = 0
    prev_u: np.ndarray | None = None
    prev_phi: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def copy(self) -> "State":
        def c(a):
            return None if a is None else a.copy()
        return State(self.t, self.u.copy(), self.p.copy(), self.phi.copy(), self.psi.copy(),
                     self.step, c(self.prev_u), c(self.prev_phi), dict(self.meta))


def velocity_at_quad(disc, u):
    """Velocity (nt, nq, 2) and its gradient (nt, nq, 2, 2) [component, d/dx_k]."""
    n2 = disc.p2.n_dofs
    from .spaces import evaluate
    vx, gx = evaluate(disc.data, disc.p2, u[:n2])
    vy, gy = evaluate(disc.data, disc.p2, u[n2:])
    return np.stack([vx, vy], axis=-1), np.stack([gx, gy], axis=-2)


def energies(state: State, disc, params: Params):
    """Kinetic, elastic, penalty and total energies of a state.

    Returns ``(e_kin, e_ela, e_pen, e_tot)`` with
    ``e_tot = e_kin + lam * (e_ela + e_pen)``.
    """
    from .spaces import evaluate
    jw = disc.data.jw
    uq, _ = velocity_at_quad(disc, state.u)
    e_kin = 0.5 * float(np.sum(jw * np.einsum("tqi,tqi->tq", uq, uq)))
    psq, _ = evaluate(disc.data, disc.p1, state.psi)
    e_ela = 0.5 * float(np.sum(jw * psq ** 2))
    _, gphi = evaluate(disc.data, disc.p1, state.phi)
    e_pen = float(np.sum(jw * potential_F(gphi))) / params.epsilon ** 2
    return e_kin, e_ela, e_pen, e_kin + params.lam * (e_ela + e_pen)
