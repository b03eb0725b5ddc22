"""Per-step energy bookkeeping, conservation checks and convergence studies."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .model import POTENTIALS, Params, State, energies, potential_F, velocity_at_quad
from .sparse import spmv
from .spaces import evaluate

CSV_FIELDS = ("step", "t", "e_kin", "e_ela", "e_pen", "e_tot", "visc_diss", "phi_diss",
              "nd_phobic", "energy_residual", "mass_phi", "div_res", "picard_iters", "lin_res")


@dataclass(frozen=True)
class EnergyReport:
    step: int
    t: float
    e_kin: float
    e_ela: float
    e_pen: float
    e_tot: float
    visc_diss: float
    phi_diss: float
    nd_phobic: float
    energy_residual: float
    mass_phi: float
    div_res: float
    picard_iters: int
    lin_res: float
    # Not serialized: the time derivative of e_tot and the largest identity term.
    dt_e_tot: float = 0.0

    def as_row(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in CSV_FIELDS}

    @property
    def identity_scale(self) -> float:
        return max(abs(self.dt_e_tot), abs(self.visc_diss), abs(self.phi_diss), 1e-30)

    @property
    def relative_residual(self) -> float:
        return abs(self.energy_residual) / self.identity_scale


def dissipation_density(Du, n, params: Params):
    """sigma^d(D, n) : D pointwise, D of shape (..., 2, 2) and n of shape (..., 2)."""
    Dn = np.einsum("...ij,...j->...i", Du, n)
    nDn = np.einsum("...i,...i->...", Dn, n)
    return (params.mu1 * nDn ** 2 + params.mu4 * np.einsum("...ij,...ij->...", Du, Du)
            + 2.0 * params.mu5 * np.einsum("...i,...i->...", Dn, Dn))


def _mass_inverse(disc):
    lu = getattr(disc, "_m1_lu", None)
    if lu is None:
        lu = spla.splu(disc.M1.to_scipy().tocsc())
        disc._m1_lu = lu
    return lu


def divergence_residual(disc, u) -> float:
    """sup over pressure functions q of |(div u, q)| / ||q||, including constants."""
    r = spmv(disc.B, u)
    return float(math.sqrt(max(r @ _mass_inverse(disc).solve(r), 0.0)))


def energy_report(prev: State, new: State, ext, params: Params, disc,
                  picard_iters: int = 1, lin_res: float = 0.0) -> EnergyReport:
    """Energies of ``new`` and every term of the discrete energy identity.

    ``ext`` holds the extrapolants the step was solved with.  All integrals
    use the assembly quadrature, so the identity residual reflects only the
    linear/nonlinear solver error.
    """
    if len(prev.phi) != len(new.phi) or len(prev.u) != len(new.u):
        raise ValueError("states come from different discretizations")
    k = params.dt
    jw = disc.data.jw
    e_kin, e_ela, e_pen, e_tot = energies(new, disc, params)
    e_tot_prev = energies(prev, disc, params)[3]

    u_half = 0.5 * (new.u + prev.u)
    uq, gu = velocity_at_quad(disc, u_half)
    Du = 0.5 * (gu + np.swapaxes(gu, -1, -2))
    n_t = disc.grad_p1(ext.phi)
    visc = float(np.sum(jw * dissipation_density(Du, n_t, params)))

    dphi, _ = evaluate(disc.data, disc.p1, (new.phi - prev.phi) / k)
    transport = dphi + np.einsum("tqi,tqi->tq", uq, n_t)
    phi_diss = params.lam / params.gamma * float(np.sum(jw * transport ** 2))

    a = disc.grad_p1(prev.phi)
    b = disc.grad_p1(new.phi)
    fk = POTENTIALS[params.scheme].fk(b, a)
    work = float(np.sum(jw * np.einsum("tqi,tqi->tq", fk, b - a)))
    dF = float(np.sum(jw * (potential_F(b) - potential_F(a))))
    nd = (work - dF) / k

    dt_e = (e_tot - e_tot_prev) / k
    residual = dt_e + visc + phi_diss + params.lam / params.epsilon ** 2 * nd
    return EnergyReport(
        step=new.step, t=new.t, e_kin=e_kin, e_ela=e_ela, e_pen=e_pen, e_tot=e_tot,
        visc_diss=visc, phi_diss=phi_diss, nd_phobic=nd, energy_residual=residual,
        mass_phi=float(disc.m @ new.phi), div_res=divergence_residual(disc, u_half),
        picard_iters=int(picard_iters), lin_res=float(lin_res), dt_e_tot=dt_e)


def initial_report(state: State, params: Params, disc) -> EnergyReport:
    """Step-0 report: energies only, all dissipation terms zero."""
    e_kin, e_ela, e_pen, e_tot = energies(state, disc, params)
    return EnergyReport(state.step, state.t, e_kin, e_ela, e_pen, e_tot, 0.0, 0.0, 0.0, 0.0,
                        float(disc.m @ state.phi), divergence_residual(disc, state.u), 0, 0.0)


def steady_state_monitor(reports) -> tuple[float, float]:
    """Time of peak kinetic energy and ``e_kin(end) / e_kin(peak)``.

    The ratio is 0 when the kinetic energy vanishes identically.
    """
    reports = list(reports)
    if len(reports) < 2:
        raise ValueError("need at least two reports")
    ek = np.array([r.e_kin for r in reports])
    i = int(np.argmax(ek))
    if ek[i] == 0.0:
        return reports[i].t, 0.0
    return reports[i].t, float(ek[-1] / ek[i])


def observed_order(diff_coarse: float, diff_mid: float) -> float:
    """Order p from ``|x_k - x_{k/4}|`` and ``|x_{k/2} - x_{k/4}|``.

    With e(k) = C k^p the ratio of the two differences is ``2^p + 1``.
    Returns ``inf`` when both vanish (scheme exact on the problem).
    """
    if diff_mid == 0.0:
        return math.inf if diff_coarse == 0.0 else math.nan
    ratio = diff_coarse / diff_mid
    if ratio <= 1.0:
        return math.nan
    return math.log2(ratio - 1.0)


def temporal_order_study(base_params: Params, n_levels: int = 3, horizon_steps: int = 20,
                         initial_phi: str = "paper", disc=None) -> dict:
    """Self-convergence study in the time step.

    Runs to ``T = horizon_steps * dt`` with ``dt / 2**j``, ``j < n_levels``,
    and estimates the order of ``phi`` and ``u`` in L2 from the three finest
    levels (plus every consecutive triple, under ``"history"``).
    """
    from .assembly import Discretization
    from .mesh import build_structured_rect
    from .timestepping import run

    if n_levels < 3:
        raise ValueError("temporal order study needs at least three levels")
    if disc is None:
        disc = Discretization(build_structured_rect(base_params.nx, base_params.bounds),
                              base_params.quad_degree)
    horizon = horizon_steps * base_params.dt
    finals = []
    for j in range(n_levels):
        dt = base_params.dt / 2 ** j
        p = base_params.replace(dt=dt, t_end=horizon)
        finals.append(run(p, initial_phi=initial_phi, disc=disc, override_solvability=True))

    def l2(field, x):
        M = disc.M_u if field == "u" else disc.M1
        return math.sqrt(max(x @ spmv(M, x), 0.0))

    out = {"history": {"phi": [], "u": []}, "dts": [base_params.dt / 2 ** j for j in range(n_levels)]}
    for field in ("phi", "u"):
        vals = [getattr(s, field) for s in finals]
        for j in range(n_levels - 2):
            c, m, f = vals[j], vals[j + 1], vals[j + 2]
            out["history"][field].append(observed_order(l2(field, c - f), l2(field, m - f)))
        out[field] = out["history"][field][-1]
    return out
