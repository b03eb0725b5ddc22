"""Finite element assembly for the mixed smectic-A system.

Unknown ordering of the monolithic system (``BlockLayout``)::

    [ u_x (P2) | u_y (P2) | p (P1) | phi (P1) | psi (P1) | mean multiplier ]

The velocity is stored component-major: ``u = [u_x, u_y]``.  Element-level
vector velocity bases are numbered ``a = c * 6 + s`` (component ``c``,
scalar P2 basis ``s``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Mesh
from .model import POTENTIALS, Params, State, velocity_at_quad
from .sparse import CooBuilder, CsrMatrix, SparsityPattern, solve_direct
from .spaces import DofMap, ElementData, build_dofmap, evaluate, tabulate


@dataclass(frozen=True)
class BlockLayout:
    n_u: int  # P2 dofs per velocity component
    n_p: int  # P1 dofs

    @property
    def ux(self) -> int:
        return 0

    @property
    def uy(self) -> int:
        return self.n_u

    @property
    def p(self) -> int:
        return 2 * self.n_u

    @property
    def phi(self) -> int:
        return 2 * self.n_u + self.n_p

    @property
    def psi(self) -> int:
        return 2 * self.n_u + 2 * self.n_p

    @property
    def mult(self) -> int:
        return 2 * self.n_u + 3 * self.n_p

    @property
    def size(self) -> int:
        return self.mult + 1

    def offsets(self) -> dict:
        return {"ux": self.ux, "uy": self.uy, "p": self.p, "phi": self.phi,
                "psi": self.psi, "mult": self.mult, "total": self.size}

    def split(self, x):
        """Split a solution vector into ``(u, p, phi, psi, multiplier)``."""
        if len(x) != self.size:
            raise ValueError(f"vector of length {len(x)} does not match layout size {self.size}")
        return (x[:self.p], x[self.p:self.phi], x[self.phi:self.psi],
                x[self.psi:self.mult], x[self.mult])


def _scatter_local(local, rdofs, cdofs, x, n):
    """Residual contribution sum_t local[t] @ x[cdofs[t]] scattered into rdofs."""
    y = np.einsum("tab,tb->ta", local, x[cdofs])
    return np.bincount(rdofs.ravel(), weights=y.ravel(), minlength=n)


def _triplets(rdofs, cdofs):
    nt, na = rdofs.shape
    nb = cdofs.shape[1]
    r = np.broadcast_to(rdofs[:, :, None], (nt, na, nb)).ravel()
    c = np.broadcast_to(cdofs[:, None, :], (nt, na, nb)).ravel()
    return r, c


def _gram(jw, X, Y):
    """Element matrices sum_q jw[t, q] X[t, q, a, ...] . Y[t, q, b, ...]."""
    T, nq, A = X.shape[:3]
    B = Y.shape[2]
    w = jw.reshape((T, nq) + (1,) * (X.ndim - 2))
    Xw = np.moveaxis(X * w, 2, 1).reshape(T, A, -1)
    Yr = np.moveaxis(np.broadcast_to(Y, (T,) + Y.shape[1:]), 2, 1).reshape(T, B, -1)
    return Xw @ np.swapaxes(Yr, 1, 2)


def _assemble(local, rdofs, cdofs, shape) -> CsrMatrix:
    b = CooBuilder(*shape)
    b.add_block(rdofs, cdofs, local)
    return b.finalize()


class Discretization:
    """Mesh, Taylor-Hood / P1-P1 dof maps, tabulated elements and fixed blocks."""

    def __init__(self, mesh: Mesh, quad_degree: int = 6):
        self.mesh = mesh
        self.p1 = build_dofmap(mesh, "P1")
        self.p2 = build_dofmap(mesh, "P2")
        self.data: ElementData = tabulate(mesh, quad_degree)
        self.layout = BlockLayout(self.p2.n_dofs, self.p1.n_dofs)
        n2 = self.p2.n_dofs
        self.u_dofs = np.hstack([self.p2.element_dofs, n2 + self.p2.element_dofs])
        self.u_boundary = np.concatenate([self.p2.boundary_dofs, n2 + self.p2.boundary_dofs])

        d = self.data
        jw = d.jw
        N2, N1 = d.values["P2"], d.values["P1"]
        G2, G1 = d.grads["P2"], d.grads["P1"]

        # Vector P2 basis values (nq, 12, 2) and gradients (nt, nq, 12, 2, 2).
        V = np.zeros((len(N2), 12, 2))
        V[:, :6, 0] = N2
        V[:, 6:, 1] = N2
        GV = np.zeros(G2.shape[:2] + (12, 2, 2))
        GV[:, :, :6, 0, :] = G2
        GV[:, :, 6:, 1, :] = G2
        self.V = V
        self.DV = 0.5 * (GV + np.swapaxes(GV, -1, -2))
        self.divV = np.concatenate([G2[..., 0], G2[..., 1]], axis=2)  # (nt, nq, 12)

        self.korn_loc = _gram(jw, self.DV, self.DV)
        m2 = np.einsum("tq,qa,qb->tab", jw, N2, N2)
        self.Mu_loc = np.zeros((len(jw), 12, 12))
        self.Mu_loc[:, :6, :6] = m2
        self.Mu_loc[:, 6:, 6:] = m2
        self.M1_loc = np.einsum("tq,qa,qb->tab", jw, N1, N1)
        self.K1_loc = np.einsum("tq,tqad,tqbd->tab", jw, G1, G1)
        self.B_loc = np.einsum("tq,qi,tqb->tib", jw, N1, self.divV)  # rows p, cols u
        self.m_loc = np.einsum("tq,qi->ti", jw, N1)

        n1 = self.p1.n_dofs
        P1d = self.p1.element_dofs
        self.M_u = _assemble(self.Mu_loc, self.u_dofs, self.u_dofs, (2 * n2, 2 * n2))
        self.M1 = _assemble(self.M1_loc, P1d, P1d, (n1, n1))
        self.K1 = _assemble(self.K1_loc, P1d, P1d, (n1, n1))
        self.B = _assemble(self.B_loc, P1d, self.u_dofs, (n1, 2 * n2))
        self.m = np.bincount(P1d.ravel(), weights=self.m_loc.ravel(), minlength=n1)
        self._build_pattern()

    # -- monolithic sparsity -------------------------------------------------
    def _build_pattern(self):
        L = self.layout
        U = self.u_dofs
        P = self.p1.element_dofs
        nt = len(U)
        mult = np.full((nt, 1), L.mult)
        blocks = [
            ("uu", U, U),
            ("up", U, L.p + P),
            ("uphi", U, L.phi + P),
            ("pu", L.p + P, U),
            ("pm", L.p + P, mult),
            ("mp", mult, L.p + P),
            ("phiu", L.phi + P, U),
            ("phiphi", L.phi + P, L.phi + P),
            ("phipsi", L.phi + P, L.psi + P),
            ("psiphi", L.psi + P, L.phi + P),
            ("psipsi", L.psi + P, L.psi + P),
        ]
        rows, cols, self._block_slices = [], [], {}
        start = 0
        for name, r, c in blocks:
            rr, cc = _triplets(r, c)
            rows.append(rr)
            cols.append(cc)
            self._block_slices[name] = slice(start, start + len(rr))
            start += len(rr)
        rows.append(self.u_boundary)
        cols.append(self.u_boundary)
        self._n_block_triplets = start
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        self.pattern = SparsityPattern(rows, cols, (L.size, L.size))
        is_bnd = np.zeros(L.size, dtype=bool)
        is_bnd[self.u_boundary] = True
        self._keep = ~is_bnd[rows[:start]]

    # -- evaluation helpers --------------------------------------------------
    def velocity(self, u):
        return velocity_at_quad(self, u)

    def grad_p1(self, coeffs):
        return evaluate(self.data, self.p1, coeffs)[1]


def assemble_mass(dofmap: DofMap, data: ElementData) -> CsrMatrix:
    N = data.values[dofmap.kind]
    local = np.einsum("tq,qa,qb->tab", data.jw, N, N)
    return _assemble(local, dofmap.element_dofs, dofmap.element_dofs,
                     (dofmap.n_dofs, dofmap.n_dofs))


def assemble_stiffness(dofmap: DofMap, data: ElementData) -> CsrMatrix:
    G = data.grads[dofmap.kind]
    local = np.einsum("tq,tqad,tqbd->tab", data.jw, G, G)
    return _assemble(local, dofmap.element_dofs, dofmap.element_dofs,
                     (dofmap.n_dofs, dofmap.n_dofs))


# -- velocity-dependent element blocks ----------------------------------------

def convection_local(disc: Discretization, u_tilde) -> np.ndarray:
    """Element matrices of c(u~, v, w) = ((u~.grad) v, w) + (div u~ v, w)/2.

    Rows are test functions ``w``, columns trial functions ``v``.
    """
    uq, gu = velocity_at_quad(disc, u_tilde)
    div = gu[..., 0, 0] + gu[..., 1, 1]
    N2 = disc.data.values["P2"]
    G2 = disc.data.grads["P2"]
    trial = np.einsum("tqd,tqbd->tqb", uq, G2) + 0.5 * div[..., None] * N2
    s = _gram(disc.data.jw, np.broadcast_to(N2, trial.shape), trial)
    local = np.zeros((len(s), 12, 12))
    local[:, :6, :6] = s
    local[:, 6:, 6:] = s
    return local


def sigma_d_local(disc: Discretization, grad_phi_tilde_q, params: Params) -> np.ndarray:
    """Element matrices of (sigma^d(D(v), n), D(w)) with n = grad phi~ at quadrature."""
    n = grad_phi_tilde_q
    jw = disc.data.jw
    local = params.mu4 * disc.korn_loc
    if params.mu1 or params.mu5:
        Dn = np.einsum("tqaij,tqj->tqai", disc.DV, n)
        if params.mu1:
            nDn = np.einsum("tqai,tqi->tqa", Dn, n)
            local = local + params.mu1 * _gram(jw, nDn, nDn)
        if params.mu5:
            local = local + 2.0 * params.mu5 * _gram(jw, Dn, Dn)
    return local


def coupling_locals(disc: Discretization, grad_phi_tilde_q):
    """(W, Q): W[a, b] = ((v_b.n)(v_a.n)), Q[a, j] = (phi_j n, v_a)."""
    un = np.einsum("qai,tqi->tqa", disc.V, grad_phi_tilde_q)
    jw = disc.data.jw
    W = _gram(jw, un, un)
    Q = _gram(jw, un, disc.data.values["P1"][None])
    return W, Q


def potential_locals(disc: Discretization, T, r):
    """phi-phi element matrices (T grad phi_j, grad phi_i) and load (r, grad phi_i)."""
    G1 = disc.data.grads["P1"]
    jw = disc.data.jw
    TG = np.einsum("tqde,tqje->tqjd", T, G1)
    L = _gram(jw, G1, TG)
    load = np.einsum("tq,tqd,tqid->ti", jw, r, G1)
    return L, load


def assemble_convection(u_tilde, disc: Discretization) -> CsrMatrix:
    n = 2 * disc.p2.n_dofs
    return _assemble(convection_local(disc, u_tilde), disc.u_dofs, disc.u_dofs, (n, n))


def assemble_sigma_d(grad_phi_tilde, params: Params, disc: Discretization) -> CsrMatrix:
    """``grad_phi_tilde`` is either P1 coefficients of phi~ or (nt, nq, 2) gradient values."""
    g = np.asarray(grad_phi_tilde, dtype=float)
    if g.ndim == 1:
        g = disc.grad_p1(g)
    n = 2 * disc.p2.n_dofs
    return _assemble(sigma_d_local(disc, g, params), disc.u_dofs, disc.u_dofs, (n, n))


def assemble_korn(disc: Discretization) -> CsrMatrix:
    """(D(v), D(w)), the symmetric-gradient form."""
    n = 2 * disc.p2.n_dofs
    local = disc.korn_loc
    return _assemble(local, disc.u_dofs, disc.u_dofs, (n, n))


@dataclass
class Extrapolants:
    """Coefficient vectors of u~ and phi~ (the latter's gradient is n~)."""

    u: np.ndarray
    phi: np.ndarray


def assemble_step_system(state: State, ext: Extrapolants, params: Params,
                         disc: Discretization, phi_frozen=None):
    """Monolithic matrix and right-hand side for one step from ``state``.

    ``phi_frozen`` is the iterate at which a nonlinear potential
    approximation is frozen (defaults to ``state.phi``).
    """
    L = disc.layout
    if len(state.u) != 2 * L.n_u or len(state.phi) != L.n_p or len(ext.u) != 2 * L.n_u \
            or len(ext.phi) != L.n_p or len(state.psi) != L.n_p or len(state.p) != L.n_p:
        raise ValueError("state/extrapolant vector lengths do not match the block layout")
    k = params.dt
    lg = params.lam / params.gamma
    ie2 = 1.0 / params.epsilon ** 2
    approx = POTENTIALS[params.scheme]

    n_t = disc.grad_p1(ext.phi)
    a = disc.grad_p1(state.phi)
    b_star = a if phi_frozen is None else disc.grad_p1(phi_frozen)
    T, r = approx.linearize(a, b_star)

    C = convection_local(disc, ext.u)
    A = sigma_d_local(disc, n_t, params)
    W, Q = coupling_locals(disc, n_t)
    Lpot, load = potential_locals(disc, T, r)
    visc = C + A + lg * W

    blocks = {
        "uu": disc.Mu_loc / k + 0.5 * visc,
        "up": -np.swapaxes(disc.B_loc, 1, 2),
        "uphi": (lg / k) * Q,
        "pu": disc.B_loc,
        "pm": disc.m_loc[:, :, None],
        "mp": disc.m_loc[:, None, :],
        "phiu": (0.5 / params.gamma) * np.swapaxes(Q, 1, 2),
        "phiphi": disc.M1_loc / (params.gamma * k) + ie2 * Lpot,
        "phipsi": 0.5 * disc.K1_loc,
        "psiphi": -disc.K1_loc,
        "psipsi": disc.M1_loc,
    }
    vals = np.empty(disc.pattern.n_triplets)
    for name, sl in disc._block_slices.items():
        vals[sl] = blocks[name].ravel()
    vals[:disc._n_block_triplets] *= disc._keep
    vals[disc._n_block_triplets:] = 1.0
    matrix = disc.pattern.assemble(vals)

    U = disc.u_dofs
    P = disc.p1.element_dofs
    nu, n1 = 2 * L.n_u, L.n_p
    rhs = np.zeros(L.size)
    u_n, phi_n, psi_n = state.u, state.phi, state.psi
    rhs[:nu] = (_scatter_local(disc.Mu_loc / k - 0.5 * visc, U, U, u_n, nu)
                + _scatter_local((lg / k) * Q, U, P, phi_n, nu))
    rhs[L.p:L.phi] = -_scatter_local(disc.B_loc, P, U, u_n, n1)
    rhs[L.phi:L.psi] = (_scatter_local(disc.M1_loc / (params.gamma * k), P, P, phi_n, n1)
                        - _scatter_local((0.5 / params.gamma) * np.swapaxes(Q, 1, 2), P, U, u_n, n1)
                        - _scatter_local(0.5 * disc.K1_loc, P, P, psi_n, n1)
                        - ie2 * np.bincount(P.ravel(), weights=load.ravel(), minlength=n1))
    rhs[disc.u_boundary] = 0.0
    return matrix, rhs


def project_initial_psi(phi0, disc: Discretization, rtol: float = 1e-12) -> np.ndarray:
    """Weak -Laplacian of phi0 in P1: solve M psi = K phi0."""
    from .sparse import spmv
    return solve_direct(disc.M1, spmv(disc.K1, np.asarray(phi0, dtype=float)), rtol=rtol)
