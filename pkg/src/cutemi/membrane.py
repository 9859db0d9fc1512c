"""Hodgkin-Huxley membrane kernel and the unfitted surface ODE step.

The membrane state (v, m, h, n) lives in the continuous Q1 space on the
interface active mesh. Explicit-Euler updates are posed weakly: the new
coefficients solve the stabilized surface mass system whose right-hand
side carries the previous state through the same stabilized operator
plus the increment integrated by surface quadrature, so a zero
right-hand side reproduces the state exactly. Gate coefficients are
clamped to [0, 1] after every update (explicit Euler can overshoot; the
model is only meaningful for probabilities).

Units: mV, ms, uS/um^2, nF/um^2, so currents are in uA/um^2 and
rates in 1/ms.
"""

import numpy as np

from .assembly import build_surface_quadrature, surface_eval_matrix
from .linalg import factorize
from .spaces import interpolate

__all__ = [
    "HHParams", "MembraneState", "SurfaceOde",
    "gating_rates", "steady_gates", "ionic_current",
    "project_surface", "weak_euler_update", "ode_step", "initialize_state",
]


class HHParams:
    """Hodgkin-Huxley constants, defaulting to the standard parameter table.

    stim_region is a vectorized predicate (x, y) -> bool selecting the
    stimulated membrane patch D (None disables the stimulus); the
    stimulus current g_stim is applied while t lies in stim_window.
    Initial data v0/m0/h0/n0 may be constants or callables (x, y).
    """

    def __init__(self, g_Na_bar=1.2e-3, g_K_bar=3.6e-4, g_L_bar=3e-6,
                 g_stim=7e-3, E_Na=50.0, E_K=-77.0, E_L=-54.5,
                 v_rest=-65.0, v0=-67.7, m0=0.0379, h0=0.688, n0=0.276,
                 C_m=2e-5, stim_region=None, stim_window=(0.0, 0.5)):
        for name, g in (("g_Na_bar", g_Na_bar), ("g_K_bar", g_K_bar),
                        ("g_L_bar", g_L_bar), ("g_stim", g_stim)):
            if float(g) < 0:
                raise ValueError("%s must be >= 0" % name)
        for name, p in (("m0", m0), ("h0", h0), ("n0", n0)):
            if not callable(p) and not (0.0 <= float(p) <= 1.0):
                raise ValueError("%s must lie in [0, 1]" % name)
        if float(C_m) <= 0:
            raise ValueError("C_m must be > 0")
        self.g_Na_bar = float(g_Na_bar)
        self.g_K_bar = float(g_K_bar)
        self.g_L_bar = float(g_L_bar)
        self.g_stim = float(g_stim)
        self.E_Na = float(E_Na)
        self.E_K = float(E_K)
        self.E_L = float(E_L)
        self.v_rest = float(v_rest)
        self.v0 = v0
        self.m0 = m0
        self.h0 = h0
        self.n0 = n0
        self.C_m = float(C_m)
        self.stim_region = stim_region
        self.stim_window = (float(stim_window[0]), float(stim_window[1]))


class MembraneState:
    """Coefficient vectors of (v, m, h, n) in Q_ode plus the current time."""

    def __init__(self, v, m, h, n, t=0.0):
        self.v = np.asarray(v, dtype=float)
        self.m = np.asarray(m, dtype=float)
        self.h = np.asarray(h, dtype=float)
        self.n = np.asarray(n, dtype=float)
        if not (len(self.v) == len(self.m) == len(self.h) == len(self.n)):
            raise ValueError("state vectors must share the DOF count")
        self.t = float(t)

    def copy(self):
        return MembraneState(self.v.copy(), self.m.copy(),
                             self.h.copy(), self.n.copy(), self.t)


def _gexp(x):
    """x / (exp(x) - 1), with the removable singularity filled by series."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x, safe / np.expm1(safe))


def gating_rates(v, v_rest):
    """The six rate functions (alpha_m, beta_m, ..., beta_n) at v (1/ms)."""
    vm = np.asarray(v, dtype=float) - v_rest
    alpha_m = _gexp((25.0 - vm) / 10.0)
    beta_m = 4.0 * np.exp(-vm / 18.0)
    alpha_h = 0.07 * np.exp(-vm / 20.0)
    beta_h = 1.0 / (np.exp((30.0 - vm) / 10.0) + 1.0)
    alpha_n = 0.1 * _gexp((10.0 - vm) / 10.0)
    beta_n = 0.125 * np.exp(-vm / 80.0)
    return alpha_m, beta_m, alpha_h, beta_h, alpha_n, beta_n


def steady_gates(v, v_rest):
    """Steady-state gate values (m_inf, h_inf, n_inf) at potential v."""
    am, bm, ah, bh, an, bn = gating_rates(v, v_rest)
    return am / (am + bm), ah / (ah + bh), an / (an + bn)


def ionic_current(v, m, h, n, x, y, t, params):
    """Hodgkin-Huxley ionic current density, stimulus included.

    The applied stimulus enters with a minus sign and is active only for
    points inside params.stim_region while t lies in stim_window.
    """
    v = np.asarray(v, dtype=float)
    cur = (params.g_Na_bar * m ** 3 * h * (v - params.E_Na)
           + params.g_K_bar * n ** 4 * (v - params.E_K)
           + params.g_L_bar * (v - params.E_L))
    t1, t2 = params.stim_window
    if params.stim_region is not None and t1 <= t <= t2:
        mask = np.asarray(params.stim_region(np.asarray(x, dtype=float),
                                             np.asarray(y, dtype=float)))
        cur = cur - params.g_stim * mask.astype(float)
    return cur


class SurfaceOde:
    """Precomputed context of the surface ODE solves on one geometry.

    Bundles the Q_ode space, its interface quadrature, the evaluation
    operator coefficient -> point values, the (stabilized, plain) mass
    pair, and the factorization of the stabilized one.
    """

    def __init__(self, space, topo, m_stab, m_plain, order=2):
        self.space = space
        self.sq = build_surface_quadrature(topo, order)
        self.eval = surface_eval_matrix(space, self.sq)
        self.m_stab = m_stab
        self.m_plain = m_plain
        self.solver = factorize(m_stab)

    @property
    def points(self):
        return self.sq.points

    def point_values(self, coeffs):
        return self.eval @ coeffs

    def load(self, point_values):
        """(f, w)_Gamma for f given by values at the quadrature points."""
        return self.eval.transpose() @ (self.sq.weights * point_values)


def weak_euler_update(ode, coeffs, increment_values):
    """Solve M_stab u = M_stab coeffs + (increment, w)_Gamma.

    increment_values holds dt * rhs at the surface quadrature points;
    passing zeros reproduces coeffs up to solver roundoff because the
    previous state enters through the operator being inverted.
    """
    rhs = ode.m_stab @ coeffs + ode.load(increment_values)
    return ode.solver.solve(rhs)


def _dofwise_euler_update(ode, coeffs, increment_dofs):
    # cheap variant: nonlinearity at DOFs, integrated via the plain mass
    rhs = ode.m_stab @ coeffs + ode.m_plain @ increment_dofs
    return ode.solver.solve(rhs)


def project_surface(space, topo, m_stab, f, order=2):
    """Stabilized L2-projection of a surface field onto Q_ode.

    f is a vectorized callable (x, y) -> values or an array of values at
    the surface quadrature points of the given order.
    """
    sq = build_surface_quadrature(topo, order)
    ev = surface_eval_matrix(space, sq)
    if callable(f):
        vals = np.asarray(f(sq.points[:, 0], sq.points[:, 1]), dtype=float)
        vals = vals + np.zeros(len(sq))
    else:
        vals = np.asarray(f, dtype=float)
    rhs = ev.transpose() @ (sq.weights * vals)
    return factorize(m_stab).solve(rhs)


def ode_step(state, dt, ode, params, dofwise=False):
    """One explicit-Euler membrane update (the ODE half of the splitting).

    Computes v* = v - (dt/C_m) I_ion(v, s) and the gate updates
    p += dt (alpha_p(v)(1-p) - beta_p(v) p) in weak form, evaluating the
    nonlinearities at quadrature points of the interpolated fields (or
    at DOFs when dofwise). Returns the new state; time is not advanced
    here, and the returned state's v is v* (the driver overwrites it
    with the PDE-corrected value).
    """
    if dofwise:
        xs, ys = ode.space.dof_coords[:, 0], ode.space.dof_coords[:, 1]
        v, m, h, n = state.v, state.m, state.h, state.n
    else:
        xs, ys = ode.points[:, 0], ode.points[:, 1]
        v = ode.point_values(state.v)
        m = ode.point_values(state.m)
        h = ode.point_values(state.h)
        n = ode.point_values(state.n)

    cur = ionic_current(v, m, h, n, xs, ys, state.t, params)
    am, bm, ah, bh, an, bn = gating_rates(v, params.v_rest)
    increments = [-(dt / params.C_m) * cur,
                  dt * (am * (1.0 - m) - bm * m),
                  dt * (ah * (1.0 - h) - bh * h),
                  dt * (an * (1.0 - n) - bn * n)]
    coeffs = [state.v, state.m, state.h, state.n]
    if dofwise:
        new = [_dofwise_euler_update(ode, c, inc)
               for c, inc in zip(coeffs, increments)]
    else:
        new = [weak_euler_update(ode, c, inc)
               for c, inc in zip(coeffs, increments)]
    return MembraneState(new[0], np.clip(new[1], 0.0, 1.0),
                         np.clip(new[2], 0.0, 1.0), np.clip(new[3], 0.0, 1.0),
                         state.t)


def _as_callable(value):
    if callable(value):
        return value
    return lambda x, y: np.full_like(np.asarray(x, dtype=float), float(value))


def initialize_state(space, params, method="interpolate", topo=None, m_stab=None):
    """Initial membrane state from params (v0, m0, h0, n0).

    method "interpolate" evaluates the data at the Q_ode vertices;
    "project" runs the stabilized L2-projection instead (needs topo and
    a stabilized mass matrix). Both agree for constant data.
    """
    fields = [_as_callable(p) for p in (params.v0, params.m0, params.h0, params.n0)]
    if method == "interpolate":
        vecs = [interpolate(space, f) for f in fields]
    elif method == "project":
        if topo is None or m_stab is None:
            raise ValueError("projection initialization needs topo and m_stab")
        vecs = [project_surface(space, topo, m_stab, f) for f in fields]
    else:
        raise ValueError("unknown initialization method %r" % (method,))
    v, m, h, n = vecs
    return MembraneState(v, np.clip(m, 0.0, 1.0), np.clip(h, 0.0, 1.0),
                         np.clip(n, 0.0, 1.0), t=0.0)
