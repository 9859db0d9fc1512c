"""Tests for the split time loop: config validation, the PDE step
context, the two v-update variants, probes, and full-run invariants."""

import numpy as np
import pytest

from cutemi.assembly import EmiParams, assemble_surface_mass
from cutemi.driver import (CoupledState, EmiConfig, ManufacturedProblem,
                           PdeContext, build_spaces, pde_step, run_simulation,
                           update_v)
from cutemi.levelset import build_cut_topology, make_circle
from cutemi.membrane import HHParams, SurfaceOde
from cutemi.mesh import build_cartesian_mesh

BOUNDS = (-2.0, -2.0, 2.0, 2.0)
PARAMS = EmiParams(sigma_i=1.5, sigma_e=1.0, C_m=1.0, dt=0.2)


def make_context(N=16, formulation="multi", stab="s1"):
    mesh = build_cartesian_mesh(N, N, BOUNDS)
    topo = build_cut_topology(make_circle(1.0), mesh)
    v_i, v_e, q_mult, q_ode = build_spaces(topo, dirichlet=0.0)
    ctx = PdeContext(topo, v_i, v_e, q_mult, PARAMS, formulation=formulation)
    m_stab = assemble_surface_mass(q_ode, topo, PARAMS, stab=stab)
    m_plain = assemble_surface_mass(q_ode, topo, PARAMS, stab="none")
    return ctx, SurfaceOde(q_ode, topo, m_stab, m_plain)


def zero_field(x, y, t):
    return np.zeros_like(np.asarray(x, dtype=float))


class TestEmiConfig:

    def make(self, **kw):
        args = dict(geometry=make_circle(1.0), bounds=BOUNDS, N=16,
                    T_end=1.0, dt=0.1)
        args.update(kw)
        return EmiConfig(**args)

    def test_defaults(self):
        cfg = self.make()
        assert cfg.formulation == "multi"
        assert cfg.ode_stab == "s1"
        assert isinstance(cfg.hh, HHParams)
        assert cfg.manufactured is None
        assert cfg.emi.dt == cfg.dt
        assert cfg.n_steps == 10

    def test_n_steps_rounds(self):
        # 0.3 / 0.1 is 2.9999... in floats; round, don't truncate
        assert self.make(T_end=0.3, dt=0.1).n_steps == 3

    def test_snapshot_steps_sorted_unique(self):
        cfg = self.make(snapshot_steps=(5, 2, 5, 9))
        assert cfg.snapshot_steps == [2, 5, 9]

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError, match="dt must be > 0"):
            self.make(dt=0.0)

    def test_rejects_short_horizon(self):
        with pytest.raises(ValueError, match="T_end"):
            self.make(T_end=0.05, dt=0.1)

    def test_rejects_small_mesh(self):
        with pytest.raises(ValueError, match="N must be >= 4"):
            self.make(N=3)

    def test_rejects_unknown_formulation(self):
        with pytest.raises(ValueError, match="formulation"):
            self.make(formulation="mixed")

    def test_rejects_unknown_stabilization(self):
        with pytest.raises(ValueError, match="ode_stab"):
            self.make(ode_stab="s3")

    def test_rejects_mismatched_emi_dt(self):
        emi = EmiParams(sigma_i=0.7, sigma_e=0.3, C_m=2e-5, dt=0.2)
        with pytest.raises(ValueError, match="emi.dt and dt disagree"):
            self.make(emi=emi, dt=0.1)

    def test_rejects_both_membrane_models(self):
        man = ManufacturedProblem(*[zero_field] * 10)
        with pytest.raises(ValueError, match="not both"):
            self.make(hh=HHParams(), manufactured=man)

    def test_manufactured_alone_disables_hh(self):
        man = ManufacturedProblem(*[zero_field] * 10)
        cfg = self.make(manufactured=man)
        assert cfg.hh is None
        assert cfg.manufactured is man


class TestPdeContext:

    @pytest.mark.parametrize("formulation", ["single", "multi"])
    def test_constant_datum_reproduced(self, formulation):
        # g constant, homogeneous Dirichlet: u_e = 0, u_i = g, I_m = 0
        ctx, _ = make_context(formulation=formulation)
        sol = ctx.step(0.75)
        assert ctx.jump_values(sol) == pytest.approx(0.75, abs=1e-10)
        assert np.max(np.abs(sol.u_i - 0.75)) < 1e-10
        assert np.max(np.abs(sol.u_e)) < 1e-10
        assert np.max(np.abs(sol.I_m)) < 1e-10

    def test_callable_and_array_data_agree(self):
        ctx, _ = make_context()
        g = lambda x, y: np.sin(2.5 * x)
        gv = g(ctx.sq.points[:, 0], ctx.sq.points[:, 1])
        sol_f = ctx.step(g)
        sol_v = ctx.step(gv)
        assert np.array_equal(sol_f.u_i, sol_v.u_i)
        assert np.array_equal(sol_f.u_e, sol_v.u_e)
        assert np.array_equal(sol_f.I_m, sol_v.I_m)

    def test_factorization_reused_deterministically(self):
        ctx, _ = make_context()
        sol1 = ctx.step(lambda x, y: x * y)
        sol2 = ctx.step(lambda x, y: x * y)
        assert np.array_equal(sol1.u_i, sol2.u_i)
        assert np.array_equal(sol1.u_e, sol2.u_e)
        assert np.array_equal(sol1.I_m, sol2.I_m)

    def test_rejects_unknown_formulation(self):
        mesh = build_cartesian_mesh(8, 8, BOUNDS)
        topo = build_cut_topology(make_circle(1.0), mesh)
        v_i, v_e, q_mult, _ = build_spaces(topo, dirichlet=0.0)
        with pytest.raises(ValueError, match="single or multi"):
            PdeContext(topo, v_i, v_e, q_mult, PARAMS, formulation="dual")

    def test_pde_step_delegates_to_context(self):
        ctx, _ = make_context()
        sol_a = pde_step(0.5, ctx)
        sol_b = ctx.step(0.5)
        assert np.array_equal(sol_a.u_i, sol_b.u_i)


class TestUpdateVariants:
    """The jump-based and I_m-based updates agree up to consistency error."""

    @pytest.mark.parametrize("formulation,cap16,cap32",
                             [("multi", 0.2, 0.05), ("single", 0.02, 0.007)])
    def test_variants_converge_together(self, formulation, cap16, cap32):
        g = lambda x, y: np.sin(2.5 * x)
        rel = {}
        for N in (16, 32):
            ctx, ode = make_context(N=N, formulation=formulation)
            sol = ctx.step(g)
            gv = g(ctx.sq.points[:, 0], ctx.sq.points[:, 1])
            v_jump = update_v(sol, ctx, ode)
            v_im = update_v(sol, ctx, ode, g_values=gv, use_im=True)
            rel[N] = (np.linalg.norm(v_im - v_jump)
                      / np.linalg.norm(v_jump))
        assert rel[16] < cap16
        assert rel[32] < cap32
        assert rel[32] < rel[16] / 1.5

    def test_im_variant_requires_g(self):
        ctx, ode = make_context()
        sol = ctx.step(0.5)
        with pytest.raises(ValueError, match="needs g"):
            update_v(sol, ctx, ode, use_im=True)


class TestRunSimulation:

    def zero_dynamics_config(self, **kw):
        # no conductances, no stimulus: the membrane never moves
        hh = HHParams(g_Na_bar=0.0, g_K_bar=0.0, g_L_bar=0.0, g_stim=0.0,
                      v0=-60.0, m0=0.2, h0=0.5, n0=0.3)
        args = dict(geometry=make_circle(1.0), bounds=BOUNDS, N=16,
                    T_end=0.25, dt=0.05, hh=hh)
        args.update(kw)
        return EmiConfig(**args)

    def test_zero_dynamics_is_a_fixed_point(self):
        cfg = self.zero_dynamics_config(
            probes=[("v", 0.9, 0.1), ("u_i", 0.0, 0.0), ("u_e", 1.5, 1.5)],
            snapshot_steps=(2, 4))
        res = run_simulation(cfg)
        assert res.times == pytest.approx(0.05 * np.arange(1, 6))
        assert np.max(np.abs(res.state.v + 60.0)) < 1e-7
        # u_e is pinned to zero at the box, u_i carries the whole jump
        assert res.traces["v_p0"] == pytest.approx(-60.0, abs=1e-7)
        assert res.traces["u_i_p1"] == pytest.approx(-60.0, abs=1e-6)
        assert res.traces["u_e_p2"] == pytest.approx(0.0, abs=1e-10)
        for field in (res.state.m, res.state.h, res.state.n):
            assert np.all((field >= 0.0) & (field <= 1.0))

    def test_snapshots_record_requested_steps(self):
        cfg = self.zero_dynamics_config(snapshot_steps=(2, 4))
        res = run_simulation(cfg)
        assert [(s[0], s[1]) for s in res.snapshots] == [(2, 0.1), (4, 0.2)]
        step, t, state, sol = res.snapshots[0]
        assert state.v == pytest.approx(-60.0, abs=1e-7)
        assert state.t == pytest.approx(t)
        # snapshots hold copies, not views of the evolving state
        assert state.v is not res.state.v

    def test_traces_shape_and_probe_snapping(self):
        cfg = EmiConfig(make_circle(1.0), BOUNDS, 16, 0.2, 0.05,
                        probes=[("v", 0.9, 0.1)])
        res = run_simulation(cfg)
        assert set(res.traces) == {"v_p0"}
        assert len(res.traces["v_p0"]) == cfg.n_steps
        sq = res.context.sq
        d2 = (sq.points[:, 0] - 0.9) ** 2 + (sq.points[:, 1] - 0.1) ** 2
        idx = int(np.argmin(d2))
        v_pts = res.ode.point_values(res.state.v)
        assert res.traces["v_p0"][-1] == pytest.approx(v_pts[idx], rel=1e-12)

    def test_on_step_callback_sees_every_step(self):
        seen = []
        cfg = self.zero_dynamics_config()
        run_simulation(cfg, on_step=lambda m, t, state, sol: seen.append((m, t)))
        assert [m for m, _ in seen] == [1, 2, 3, 4, 5]
        assert seen[-1][1] == pytest.approx(0.25)

    def test_probe_outside_its_domain_rejected(self):
        cfg = self.zero_dynamics_config(probes=[("u_i", 1.5, 1.5)])
        with pytest.raises(ValueError, match="outside the u_i domain"):
            run_simulation(cfg)

    def test_unknown_probe_kind_rejected(self):
        cfg = self.zero_dynamics_config(probes=[("w", 0.0, 0.0)])
        with pytest.raises(ValueError, match="unknown probe kind"):
            run_simulation(cfg)

    def test_step_failure_is_reported_with_step_and_time(self):
        def boom(x, y, t):
            raise ValueError("synthetic source failure")

        man = ManufacturedProblem(zero_field, zero_field, zero_field,
                                  zero_field, zero_field, zero_field,
                                  zero_field, zero_field, boom, zero_field)
        cfg = EmiConfig(make_circle(1.0), BOUNDS, 16, 0.2, 0.05,
                        manufactured=man)
        with pytest.raises(RuntimeError,
                           match=r"step 1 \(t = 0\.05\) failed"):
            run_simulation(cfg)

    def test_manufactured_zero_data_stays_zero(self):
        man = ManufacturedProblem(*[zero_field] * 10)
        cfg = EmiConfig(make_circle(1.0), BOUNDS, 16, 0.2, 0.05,
                        manufactured=man)
        res = run_simulation(cfg)
        assert np.max(np.abs(res.state.v)) < 1e-12
        assert np.max(np.abs(res.state.s)) < 1e-12
        assert isinstance(res.state, CoupledState)
