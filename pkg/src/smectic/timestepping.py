"""Time integration: initial data, Crank-Nicolson start-up, BDF2 steps, driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import Discretization, Extrapolants, assemble_step_system, project_initial_psi
from .diagnostics import EnergyReport, energy_report, initial_report
from .mesh import build_structured_rect
from .model import POTENTIALS, Params, ParamsError, State
from .sparse import LaggedLU

log = logging.getLogger(__name__)

INITIAL_FIELDS = {
    "paper": lambda x, y: np.sin(x) * np.cos(y) ** 2,
    "zero": lambda x, y: np.zeros_like(x),
    # Constant layer variable: grad phi = 0 is a critical point of F, so with
    # u = 0 this is an exact steady state.
    "constant": lambda x, y: np.full_like(x, 0.5),
}


ROUNDOFF_FLOOR = 1e4


class PicardError(RuntimeError):
    def __init__(self, history, message=None):
        self.history = list(history)
        super().__init__(message or f"Picard iteration did not converge; "
                                    f"relative changes {['%.2e' % h for h in self.history]}")


class StepError(RuntimeError):
    def __init__(self, step, t, cause):
        self.step, self.t = step, t
        super().__init__(f"step {step} (t={t:.6g}) failed: {cause}")


class SolvabilityError(ValueError):
    pass


@dataclass
class StepInfo:
    ext: Extrapolants
    picard_iters: int
    lin_res: float
    history: list = field(default_factory=list)


class Stepper:
    """Owns the discretization and the linear solver for a run.

    ``n_assemblies`` and ``n_solves`` count calls to the monolithic assembly
    and the linear solver.
    """

    def __init__(self, disc: Discretization, params: Params, solver=None):
        self.disc = disc
        self.params = params
        self.solver = solver or LaggedLU(rtol=params.tol_lin)
        self.n_assemblies = 0
        self.n_solves = 0

    def _solve(self, state, ext, phi_frozen):
        A, b = assemble_step_system(state, ext, self.params, self.disc, phi_frozen)
        self.n_assemblies += 1
        x = self.solver.solve(A, b)
        self.n_solves += 1
        u, p, phi, psi, _ = self.disc.layout.split(x)
        u = u.copy()
        u[self.disc.u_boundary] = 0.0  # identity rows; drop refinement round-off
        return (u, p.copy(), phi.copy(), psi.copy()), self.solver.last_residual

    def _advance(self, state: State, extrapolate, fixed_ext: bool):
        prm = self.params
        approx = POTENTIALS[prm.scheme]
        it_u, it_phi = state.u, state.phi
        history = []
        iterate = not (fixed_ext and approx.linear)
        max_it = prm.max_picard if iterate else 1
        for it in range(1, max_it + 1):
            ext = extrapolate(it_u, it_phi)
            (u, p, phi, psi), res = self._solve(state, ext, it_phi)
            if not iterate:
                break
            change = max(_rel_change(u, it_u), _rel_change(phi, it_phi))
            history.append(change)
            it_u, it_phi = u, phi
            if change <= prm.tol_picard or _stagnated(history, prm.tol_picard):
                break
        else:
            raise PicardError(history)
        new = State(state.t + prm.dt, u, p, phi, psi, state.step + 1,
                    prev_u=state.u.copy(), prev_phi=state.phi.copy())
        return new, StepInfo(ext, it, res, history)

    def bootstrap_step_cn(self, state: State):
        """One step with u~ = (u^{n+1} + u^n)/2, n~ = (n^{n+1} + n^n)/2, by Picard."""
        def ext(u1, phi1):
            return Extrapolants(0.5 * (u1 + state.u), 0.5 * (phi1 + state.phi))
        return self._advance(state, ext, fixed_ext=False)

    def step_bdf2(self, state: State):
        """One step with u~ = (3u^n - u^{n-1})/2 and likewise for phi."""
        if state.prev_u is None or state.prev_phi is None:
            raise ValueError("BDF2 step needs the previous time level")
        fixed = Extrapolants(1.5 * state.u - 0.5 * state.prev_u,
                             1.5 * state.phi - 0.5 * state.prev_phi)
        return self._advance(state, lambda u1, phi1: fixed, fixed_ext=True)

    def step(self, state: State):
        return self.bootstrap_step_cn(state) if state.prev_u is None else self.step_bdf2(state)


def _stagnated(history, tol) -> bool:
    # Round-off floor: a near-zero field (u at start-up) cannot resolve
    # relative changes below ~1e-12, so accept a stalled iteration close to tol.
    return (len(history) >= 3 and history[-1] <= ROUNDOFF_FLOOR * max(tol, 1e-14)
            and history[-1] > 0.5 * history[-2])


def _rel_change(new, old) -> float:
    d = np.linalg.norm(new - old)
    n = np.linalg.norm(new)
    if d == 0.0:
        return 0.0
    return d / n if n > 0 else np.inf


def init_state(disc: Discretization, params: Params, initial_phi: str = "paper") -> State:
    """u = 0, p = 0, phi = nodal interpolant of the named field, psi its weak -Laplacian."""
    try:
        func = INITIAL_FIELDS[initial_phi]
    except KeyError:
        raise ValueError(f"unknown initial field {initial_phi!r}; "
                         f"choose from {sorted(INITIAL_FIELDS)}") from None
    phi = disc.p1.interpolate(func)
    psi = project_initial_psi(phi, disc)
    return State(0.0, np.zeros(2 * disc.p2.n_dofs), np.zeros(disc.p1.n_dofs), phi, psi)


def bootstrap_step_cn(state: State, params: Params, disc: Discretization) -> State:
    return Stepper(disc, params).bootstrap_step_cn(state)[0]


def step_bdf2(state: State, params: Params, disc: Discretization) -> State:
    return Stepper(disc, params).step_bdf2(state)[0]


class Sink:
    """Receives run output; subclasses override what they need."""

    def start(self, disc, state, report):
        pass

    def report(self, report: EnergyReport):
        pass

    def snapshot(self, disc, state):
        pass

    def finish(self, disc, state):
        pass


class ReportCollector(Sink):
    def __init__(self):
        self.initial = None
        self.reports: list[EnergyReport] = []

    def start(self, disc, state, report):
        self.initial = report

    def report(self, report):
        self.reports.append(report)

    @property
    def all_reports(self):
        return ([self.initial] if self.initial is not None else []) + self.reports


def run(params: Params, sinks=(), initial_phi: str = "paper", disc: Discretization | None = None,
        override_solvability: bool = False, stepper: Stepper | None = None) -> State:
    """Initialize, take one Crank-Nicolson step, then BDF2 steps up to ``t_end``.

    Every step emits an ``EnergyReport`` to each sink; snapshots go out every
    ``out_every`` steps (and at the start and end) when ``out_every > 0``.
    """
    errs = params.errors(check_solvability=False)
    if errs:
        raise ParamsError(errs)
    if params.solvability_violated:
        if not override_solvability:
            raise SolvabilityError(params.solvability_message)
        log.warning("%s (overridden)", params.solvability_message)

    if disc is None:
        disc = Discretization(build_structured_rect(params.nx, params.bounds), params.quad_degree)
    stepper = stepper or Stepper(disc, params)
    state = init_state(disc, params, initial_phi)
    rep0 = initial_report(state, params, disc)
    for s in sinks:
        s.start(disc, state, rep0)
        if params.out_every:
            s.snapshot(disc, state)

    n_steps = params.n_steps
    for n in range(n_steps):
        try:
            new, info = stepper.step(state)
        except Exception as exc:
            raise StepError(state.step + 1, state.t + params.dt, exc) from exc
        rep = energy_report(state, new, info.ext, params, disc, info.picard_iters, info.lin_res)
        state = new
        for s in sinks:
            s.report(rep)
            if params.out_every and (state.step % params.out_every == 0 or n == n_steps - 1):
                s.snapshot(disc, state)
        if state.step % 500 == 0:
            log.info("step %d t=%.5g e_tot=%.6g e_kin=%.3e", state.step, state.t, rep.e_tot, rep.e_kin)
    for s in sinks:
        s.finish(disc, state)
    return state
