"""Godunov splitting time loop: ODE step, PDE step, and the v-update.

The geometry is static, so the PDE operator is assembled and factored
once (PdeContext); each step only rebuilds the right-hand side from the
coupling datum g = v*, the optional bulk sources, and the boundary
values at the current time. The membrane model is either Hodgkin-Huxley
(the physiological mode) or a manufactured linear system driven by
closed-form sources (the verification mode).
"""

import numpy as np

from .assembly import (EmiParams, assemble_multi_dim, assemble_single_dim,
                       assemble_surface_mass, build_bulk_quadrature,
                       build_surface_quadrature, bulk_eval_matrix,
                       surface_eval_matrix)
from .levelset import build_cut_topology
from .linalg import factorize
from .membrane import (HHParams, MembraneState, SurfaceOde, initialize_state,
                       ode_step, weak_euler_update)
from .mesh import (TAG_EXTRACELLULAR, TAG_INTERFACE, TAG_INTRACELLULAR,
                   active_mesh, build_cartesian_mesh)
from .spaces import (P0_DISCONTINUOUS, Q1_CONTINUOUS, build_space, eval_basis,
                     interpolate)

__all__ = [
    "EmiConfig", "PdeSolution", "PdeContext", "ManufacturedProblem",
    "CoupledState", "SimulationResult", "build_spaces",
    "pde_step", "update_v", "run_simulation",
]


def _zero_field(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


class PdeSolution:
    """Coefficient vectors of one PDE step.

    I_m is the multiplier solution for the multi-dimensional formulation
    and the P0 reconstruction (C_m/dt)(u_i - u_e - g) cell-averaged over
    Gamma for the single-dimensional one.
    """

    def __init__(self, u_i, u_e, I_m):
        self.u_i = np.asarray(u_i, dtype=float)
        self.u_e = np.asarray(u_e, dtype=float)
        self.I_m = np.asarray(I_m, dtype=float)


class ManufacturedProblem:
    """Closed-form data of the coupled verification run.

    All fields are vectorized callables (x, y, t). The membrane ODEs are
    v_t = (I_m - P1 + s)/C_m and s_t = v + P2, so P1 - s plays the role
    of the ionic current and v + P2 that of the gating dynamics; the
    I_m term is never integrated explicitly, the PDE step applies it
    through the jump condition. u_i/u_e/v/s/I_m are the exact fields
    used for initial data and error measurement, f_i/f_e the bulk
    sources, u_bc the boundary values of u_e.
    """

    def __init__(self, u_i, u_e, v, s, I_m, f_i, f_e, u_bc, P1, P2):
        self.u_i = u_i
        self.u_e = u_e
        self.v = v
        self.s = s
        self.I_m = I_m
        self.f_i = f_i
        self.f_e = f_e
        self.u_bc = u_bc
        self.P1 = P1
        self.P2 = P2


class CoupledState:
    """(v, s) surface coefficient pair of the manufactured membrane model."""

    def __init__(self, v, s, t=0.0):
        self.v = np.asarray(v, dtype=float)
        self.s = np.asarray(s, dtype=float)
        self.t = float(t)

    def copy(self):
        return CoupledState(self.v.copy(), self.s.copy(), self.t)


class EmiConfig:
    """Everything one simulation needs; validates the basic invariants.

    geometry is a LevelSet; hh drives the physiological mode and
    manufactured the verification mode (exactly one of them is active;
    hh defaults to the standard parameter table when both are None).
    probes is a list of (kind, x, y) with kind in {v, u_i, u_e};
    snapshot_steps lists step indices whose full fields are kept.
    """

    def __init__(self, geometry, bounds, N, T_end, dt, formulation="multi",
                 ode_stab="s1", emi=None, hh=None, manufactured=None,
                 probes=(), snapshot_steps=(), quad_order=2,
                 ode_dofwise=False, use_im_update=False,
                 ode_init="interpolate"):
        if not dt > 0:
            raise ValueError("dt must be > 0")
        if T_end < dt:
            raise ValueError("T_end must be >= dt")
        if N < 4:
            raise ValueError("N must be >= 4")
        if formulation not in ("single", "multi"):
            raise ValueError("formulation must be single or multi")
        if ode_stab not in ("s1", "s2"):
            raise ValueError("ode_stab must be s1 or s2")
        self.geometry = geometry
        self.bounds = tuple(float(b) for b in bounds)
        self.N = int(N)
        self.T_end = float(T_end)
        self.dt = float(dt)
        self.formulation = formulation
        self.ode_stab = ode_stab
        if emi is None:
            emi = EmiParams(sigma_i=0.7, sigma_e=0.3, C_m=2e-5, dt=dt)
        if emi.dt != float(dt):
            raise ValueError("emi.dt and dt disagree")
        self.emi = emi
        self.manufactured = manufactured
        self.hh = hh if (hh is not None or manufactured is not None) else HHParams()
        if self.hh is not None and manufactured is not None:
            raise ValueError("configure either hh or manufactured, not both")
        self.probes = list(probes)
        self.snapshot_steps = sorted(set(int(s) for s in snapshot_steps))
        self.quad_order = int(quad_order)
        self.ode_dofwise = bool(ode_dofwise)
        self.use_im_update = bool(use_im_update)
        self.ode_init = ode_init

    @property
    def n_steps(self):
        return int(round(self.T_end / self.dt))


def build_spaces(topo, dirichlet=None):
    """(V_i, V_e, Q_multiplier, Q_ode) on the topology's active meshes.

    dirichlet (constant or callable) constrains V_e on the outer box
    boundary; V_i never touches it for the geometries used here.
    """
    mesh = topo.mesh
    v_i = build_space(active_mesh(mesh, topo, TAG_INTRACELLULAR), Q1_CONTINUOUS)
    v_e = build_space(active_mesh(mesh, topo, TAG_EXTRACELLULAR), Q1_CONTINUOUS,
                      dirichlet=dirichlet)
    interface = active_mesh(mesh, topo, TAG_INTERFACE)
    q_mult = build_space(interface, P0_DISCONTINUOUS)
    q_ode = build_space(interface, Q1_CONTINUOUS)
    return v_i, v_e, q_mult, q_ode


class PdeContext:
    """Assembled-and-factored PDE step of one formulation.

    f_i/f_e are optional bulk sources (x, y, t); u_bc optional boundary
    values (x, y, t) re-evaluated each step (defaults to the static
    values recorded on V_e). Per-step work is a few sparse matvecs and
    one triangular solve.
    """

    def __init__(self, topo, v_i, v_e, q_space, params, formulation="multi",
                 order=2, f_i=None, f_e=None, u_bc=None):
        if formulation not in ("single", "multi"):
            raise ValueError("formulation must be single or multi")
        self.topo = topo
        self.v_i = v_i
        self.v_e = v_e
        self.q_space = q_space
        self.params = params
        self.formulation = formulation
        self.f_i = f_i
        self.f_e = f_e
        self.u_bc = u_bc

        if formulation == "multi":
            self.system = assemble_multi_dim((v_i, v_e), q_space, topo, params,
                                             _zero_field, order=order)
        else:
            self.system = assemble_single_dim((v_i, v_e), topo, params,
                                              _zero_field, order=order)
        a_ff, _ = self.system.reduced()
        self.solver = factorize(a_ff)

        self.sq = build_surface_quadrature(topo, order)
        self.e_i = surface_eval_matrix(v_i, self.sq)
        self.e_e = surface_eval_matrix(v_e, self.sq)
        self.e_q = surface_eval_matrix(q_space, self.sq)
        # per-multiplier-cell interface length, for the P0 reconstruction
        self.gamma_len = self.e_q.transpose() @ self.sq.weights

        self._bulk = {}
        for name, space, f in (("u_i", v_i, f_i), ("u_e", v_e, f_e)):
            if f is None:
                continue
            bq = build_bulk_quadrature(topo, name[-1], space.active.cells, order)
            self._bulk[name] = (f, bq, bulk_eval_matrix(space, bq))

        lay = self.system.dof_layout
        coords = np.zeros((len(lay.constrained), 2))
        for k, full_idx in enumerate(lay.constrained):
            block = np.searchsorted(lay.offsets, full_idx, side="right") - 1
            sp = lay.blocks[block][1]
            coords[k] = sp.dof_coords[full_idx - lay.offsets[block]]
        self._constrained_coords = coords

    def boundary_values(self, t):
        if self.u_bc is None:
            return self.system.dof_layout.constrained_values
        x, y = self._constrained_coords[:, 0], self._constrained_coords[:, 1]
        vals = np.asarray(self.u_bc(x, y, t), dtype=float)
        return vals + np.zeros(len(x))

    def _g_values(self, g):
        if callable(g):
            vals = np.asarray(g(self.sq.points[:, 0], self.sq.points[:, 1]),
                              dtype=float)
            return vals + np.zeros(len(self.sq))
        return np.asarray(g, dtype=float)

    def step(self, g, t=0.0):
        """Solve one PDE step with coupling datum g (callable or values)."""
        lay = self.system.dof_layout
        gv = self._g_values(g)
        b = np.zeros(lay.n_full)
        wg = self.sq.weights * gv
        ratio = self.params.C_m / self.params.dt
        if self.formulation == "single":
            b[lay.block_slice("u_i")] += ratio * (self.e_i.transpose() @ wg)
            b[lay.block_slice("u_e")] -= ratio * (self.e_e.transpose() @ wg)
        else:
            b[lay.block_slice("I_m")] += self.e_q.transpose() @ wg
        for name, (f, bq, ev) in self._bulk.items():
            vals = np.asarray(f(bq.points[:, 0], bq.points[:, 1], t), dtype=float)
            b[lay.block_slice(name)] += ev.transpose() @ (bq.weights * vals)

        vals_c = self.boundary_values(t)
        x = self.solver.solve(self.system.reduced_rhs(b, vals_c))
        full = self.system.expand(x, vals_c)
        u_i = lay.extract(full, "u_i").copy()
        u_e = lay.extract(full, "u_e").copy()
        if self.formulation == "multi":
            i_m = lay.extract(full, "I_m").copy()
        else:
            jump = self.e_i @ u_i - self.e_e @ u_e
            num = self.e_q.transpose() @ (self.sq.weights * (jump - gv)) * ratio
            i_m = np.where(self.gamma_len > 0, num,
                           0.0) / np.where(self.gamma_len > 0, self.gamma_len, 1.0)
        return PdeSolution(u_i, u_e, i_m)

    def jump_values(self, sol):
        """(u_i - u_e) at the surface quadrature points."""
        return self.e_i @ sol.u_i - self.e_e @ sol.u_e

    def current_values(self, sol):
        """I_m at the surface quadrature points."""
        return self.e_q @ sol.I_m


def pde_step(g, ctx, t=0.0):
    """One PDE solve with coupling datum g; see PdeContext.step."""
    return ctx.step(g, t)


def update_v(sol, ctx, ode, g_values=None, use_im=False):
    """v^m as the stabilized projection of the trace jump (u_i - u_e).

    With use_im the multiplier variant (dt/C_m) I_m + g is projected
    instead; both agree discretely up to the scheme's consistency error.
    """
    if use_im:
        if g_values is None:
            raise ValueError("the I_m-based update needs g at quadrature points")
        vals = (ctx.params.dt / ctx.params.C_m) * ctx.current_values(sol) + g_values
    else:
        vals = ctx.jump_values(sol)
    return ode.solver.solve(ode.load(vals))


# ---------------------------------------------------------------------------
# probes and results

class _Probe:
    """One trace column: evaluates a named field at a fixed location."""

    def __init__(self, kind, x, y, payload):
        self.kind = kind
        self.x = x
        self.y = y
        self.payload = payload

    def label(self, index):
        return "%s_p%d" % (self.kind, index)


def _setup_probes(probes, topo, v_i, v_e, sq):
    mesh = topo.mesh
    out = []
    for kind, x, y in probes:
        if kind == "v":
            if len(sq) == 0:
                raise ValueError("no interface present for a v probe")
            d2 = (sq.points[:, 0] - x) ** 2 + (sq.points[:, 1] - y) ** 2
            out.append(_Probe(kind, x, y, int(np.argmin(d2))))
            continue
        if kind not in ("u_i", "u_e"):
            raise ValueError("unknown probe kind %r" % (kind,))
        phi = float(topo.levelset.evaluate(x, y))
        space = v_i if kind == "u_i" else v_e
        if (kind == "u_i") != (phi < 0):
            raise ValueError("probe (%g, %g) lies outside the %s domain"
                             % (x, y, kind))
        cell = mesh.locate(x, y)
        vals, _ = eval_basis(space, cell, (x, y))
        out.append(_Probe(kind, x, y, (vals, space.cell_dofs(cell))))
    return out


def _probe_value(probe, sol, v_points):
    if probe.kind == "v":
        return float(v_points[probe.payload])
    vals, dofs = probe.payload
    field = sol.u_i if probe.kind == "u_i" else sol.u_e
    return float(vals @ field[dofs])


class SimulationResult:
    """Traces, snapshots, and the final state of one run.

    times covers the recorded steps m = 1..M; traces maps probe labels
    to arrays over those steps; snapshots is a list of
    (step, time, state, solution).
    """

    def __init__(self, times, traces, snapshots, state, context, ode):
        self.times = times
        self.traces = traces
        self.snapshots = snapshots
        self.state = state
        self.context = context
        self.ode = ode


def run_simulation(cfg, on_step=None):
    """Alg.-1 time loop over [0, T_end]; see EmiConfig for the knobs.

    on_step(m, t, state, sol) is called after every completed step with
    the freshly updated membrane state (its v is v^m).
    """
    mesh = build_cartesian_mesh(cfg.N, cfg.N, cfg.bounds)
    topo = build_cut_topology(cfg.geometry, mesh)
    man = cfg.manufactured
    if man is not None:
        dirichlet = lambda x, y: man.u_bc(x, y, 0.0)
    else:
        dirichlet = 0.0
    v_i, v_e, q_mult, q_ode = build_spaces(topo, dirichlet=dirichlet)

    m_stab = assemble_surface_mass(q_ode, topo, cfg.emi, stab=cfg.ode_stab,
                                   order=cfg.quad_order)
    m_plain = assemble_surface_mass(q_ode, topo, cfg.emi, stab="none",
                                    order=cfg.quad_order)
    ode = SurfaceOde(q_ode, topo, m_stab, m_plain, order=cfg.quad_order)
    ctx = PdeContext(topo, v_i, v_e, q_mult, cfg.emi,
                     formulation=cfg.formulation, order=cfg.quad_order,
                     f_i=None if man is None else man.f_i,
                     f_e=None if man is None else man.f_e,
                     u_bc=None if man is None else man.u_bc)

    probes = _setup_probes(cfg.probes, topo, v_i, v_e, ctx.sq)
    n_steps = cfg.n_steps
    times = cfg.dt * np.arange(1, n_steps + 1)
    traces = {p.label(k): np.zeros(n_steps) for k, p in enumerate(probes)}
    snapshots = []
    snap_set = set(cfg.snapshot_steps)

    if man is None:
        state = initialize_state(q_ode, cfg.hh, method=cfg.ode_init,
                                 topo=topo, m_stab=m_stab)
        stepper = _HHStepper(cfg, ode, ctx)
    else:
        state = CoupledState(
            interpolate(q_ode, lambda x, y: man.v(x, y, 0.0)),
            interpolate(q_ode, lambda x, y: man.s(x, y, 0.0)))
        stepper = _ManufacturedStepper(cfg, ode, ctx, man)

    for m in range(1, n_steps + 1):
        t = m * cfg.dt
        try:
            state, sol = stepper.advance(state, t)
        except Exception as exc:
            raise RuntimeError("step %d (t = %g) failed: %s" % (m, t, exc)) from exc
        v_pts = ode.point_values(state.v)
        for k, p in enumerate(probes):
            traces[p.label(k)][m - 1] = _probe_value(p, sol, v_pts)
        if m in snap_set:
            snapshots.append((m, t, state.copy(), sol))
        if on_step is not None:
            on_step(m, t, state, sol)
    return SimulationResult(times, traces, snapshots, state, ctx, ode)


class _HHStepper:
    def __init__(self, cfg, ode, ctx):
        self.cfg = cfg
        self.ode = ode
        self.ctx = ctx

    def advance(self, state, t):
        cfg = self.cfg
        star = ode_step(state, cfg.dt, self.ode, cfg.hh, dofwise=cfg.ode_dofwise)
        g = self.ode.point_values(star.v)
        sol = self.ctx.step(g, t)
        v_new = update_v(sol, self.ctx, self.ode,
                         g_values=g, use_im=cfg.use_im_update)
        return MembraneState(v_new, star.m, star.h, star.n, t), sol


class _ManufacturedStepper:
    """Verification mode: v_t = (I_m - P1 + s)/C_m, s_t = v + P2.

    The explicit ODE step integrates only the ionic analog P1 - s and
    the gating analog v + P2; the (dt/C_m) I_m part of the v update
    comes out of the PDE step's jump condition, exactly as for the
    physiological model.
    """

    def __init__(self, cfg, ode, ctx, man):
        self.cfg = cfg
        self.ode = ode
        self.ctx = ctx
        self.man = man

    def advance(self, state, t):
        cfg, ode, man = self.cfg, self.ode, self.man
        t_prev = t - cfg.dt
        xs, ys = ode.points[:, 0], ode.points[:, 1]
        v_pts = ode.point_values(state.v)
        s_pts = ode.point_values(state.s)
        dv = (s_pts - man.P1(xs, ys, t_prev)) / cfg.emi.C_m
        ds = v_pts + man.P2(xs, ys, t_prev)
        v_star = weak_euler_update(ode, state.v, cfg.dt * dv)
        s_new = weak_euler_update(ode, state.s, cfg.dt * ds)

        g = ode.point_values(v_star)
        sol = self.ctx.step(g, t)
        v_new = update_v(sol, self.ctx, ode,
                         g_values=g, use_im=cfg.use_im_update)
        return CoupledState(v_new, s_new, t), sol
