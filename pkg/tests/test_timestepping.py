import math

import numpy as np
import pytest

from smectic.model import Params, ParamsError
from smectic.sparse import LaggedLU
from smectic.timestepping import (PicardError, ReportCollector, SolvabilityError, StepError,
                                  Stepper, init_state, run)

from conftest import get_disc


def test_init_paper_field_exact_at_nodes(disc4):
    s = init_state(disc4, Params(nx=4))
    x, y = disc4.p1.dof_coords.T
    assert s.phi.tolist() == (np.sin(x) * np.cos(y) ** 2).tolist()
    assert s.t == 0.0 and s.step == 0
    assert not s.u.any() and not s.p.any()


def test_init_unknown_field(disc4):
    with pytest.raises(ValueError, match="unknown initial field"):
        init_state(disc4, Params(nx=4), "checkerboard")


def test_cn_step_picard_converges_quickly():
    disc, p = get_disc(8), Params(nx=8)
    new, info = Stepper(disc, p).bootstrap_step_cn(init_state(disc, p))
    assert info.picard_iters <= 10
    assert info.history[-1] <= p.tol_picard
    assert new.t == p.dt and new.step == 1
    assert new.prev_phi is not None


def test_cn_step_fixed_point_for_equilibrium(disc4):
    p = Params(nx=4)
    s = init_state(disc4, p, "constant")
    new, _ = Stepper(disc4, p).bootstrap_step_cn(s)
    assert np.abs(new.u).max() <= 1e-12
    np.testing.assert_allclose(new.phi, s.phi, atol=1e-12)


def test_cn_first_step_change_scales_with_k():
    disc = get_disc(8)
    changes = []
    for dt in (2e-6, 1e-6):
        p = Params(nx=8, dt=dt)
        s = init_state(disc, p)
        new, _ = Stepper(disc, p).bootstrap_step_cn(s)
        changes.append(np.linalg.norm(new.phi - s.phi))
    # Halving k halves the change to leading order.
    assert changes[0] / changes[1] == pytest.approx(2.0, rel=0.1)


def test_bdf2_od2_single_solve_per_step():
    disc, p = get_disc(4), Params(nx=4)
    st = Stepper(disc, p)
    s1, _ = st.bootstrap_step_cn(init_state(disc, p))
    before = (st.n_assemblies, st.n_solves)
    s2, info = st.step_bdf2(s1)
    assert (st.n_assemblies - before[0], st.n_solves - before[1]) == (1, 1)
    assert info.picard_iters == 1
    np.testing.assert_array_equal(s2.prev_phi, s1.phi)


def test_bdf2_mp_iterates():
    disc, p = get_disc(4), Params(nx=4, scheme="mp")
    st = Stepper(disc, p)
    s1, _ = st.bootstrap_step_cn(init_state(disc, p))
    _, info = st.step_bdf2(s1)
    assert 2 <= info.picard_iters <= 10


def test_bdf2_requires_history(disc4):
    with pytest.raises(ValueError):
        Stepper(disc4, Params(nx=4)).step_bdf2(init_state(disc4, Params(nx=4)))


def test_zero_data_stays_zero(disc4):
    c = ReportCollector()
    s = run(Params(nx=4, dt=1e-4, t_end=5e-4), [c], initial_phi="zero", disc=disc4)
    assert s.step == 5
    assert not s.u.any() and not s.phi.any() and not s.psi.any()
    assert all(r.e_tot == c.initial.e_tot for r in c.reports)


def test_single_step_run(disc4):
    c = ReportCollector()
    s = run(Params(nx=4, dt=1e-5, t_end=1e-5), [c], disc=disc4)
    assert s.step == 1 and len(c.reports) == 1
    assert c.reports[0].picard_iters > 1  # the CN bootstrap step


def test_run_refuses_solvability_violation(disc4):
    with pytest.raises(SolvabilityError, match="0.005"):
        run(Params(nx=4, dt=0.01, t_end=0.01), disc=disc4)


def test_run_with_override(disc4):
    s = run(Params(nx=4, dt=0.01, t_end=0.02, max_picard=200), disc=disc4,
            override_solvability=True, initial_phi="constant")
    assert s.step == 2


def test_run_rejects_invalid_params(disc4):
    with pytest.raises(ParamsError):
        run(Params(nx=4, epsilon=-1.0), disc=disc4)


def test_picard_failure_reports_history(disc4):
    p = Params(nx=4, max_picard=2, tol_picard=1e-15)
    with pytest.raises(StepError) as exc:
        run(p, disc=disc4)
    assert exc.value.step == 1
    cause = exc.value.__cause__
    assert isinstance(cause, PicardError) and len(cause.history) == 2


def test_mp_steps_dissipate(disc4):
    c = ReportCollector()
    run(Params(nx=4, scheme="mp", t_end=2e-4), [c], disc=disc4)
    e = [r.e_tot for r in c.all_reports]
    assert all(b <= a + 1e-12 * e[0] for a, b in zip(e, e[1:]))
    assert max(abs(r.nd_phobic) for r in c.reports) <= 1e-10


def test_run_is_deterministic(disc4):
    out = []
    for _ in range(2):
        c = ReportCollector()
        run(Params(nx=4, t_end=1e-4), [c], disc=disc4, stepper=Stepper(disc4, Params(nx=4, t_end=1e-4)))
        out.append([tuple(r.as_row().values()) for r in c.reports])
    assert out[0] == out[1]


def test_lagged_solver_matches_fresh_factorizations(disc4):
    p = Params(nx=4, t_end=1e-4)
    a = run(p, disc=disc4, stepper=Stepper(disc4, p))
    b = run(p, disc=disc4, stepper=Stepper(disc4, p, LaggedLU(reuse=False)))
    scale = np.abs(a.phi).max()
    assert np.abs(a.phi - b.phi).max() <= 1e-12 * scale


def test_snapshots_cadence(disc4):
    class Count(ReportCollector):
        def __init__(self):
            super().__init__()
            self.steps = []

        def snapshot(self, disc, state):
            self.steps.append(state.step)

    c = Count()
    run(Params(nx=4, t_end=7e-5, out_every=3), [c], disc=disc4)
    assert c.steps == [0, 3, 6, 7]
