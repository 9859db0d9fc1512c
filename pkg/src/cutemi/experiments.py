"""Study drivers and the command-line front end.

Six studies: a manufactured-solution ladder for the PDE step
(conv-multi), condition-number sweeps over cut positions for the PDE
operator (sens-pde) and the surface mass matrix (sens-ode), a surface
ODE ladder (conv-ode), a coupled splitting ladder run with both
formulations (conv-coupled), and the Hodgkin-Huxley action-potential
demo (hh-demo).

Determinism contract: a re-run with the same config writes byte
identical CSV files. All numbers are printed with a fixed format, wall
time goes to run_info.txt instead of the tables, and sweep results are
collected by index so --threads never changes the output.
"""

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .assembly import (EmiParams, assemble_multi_dim, assemble_surface_mass,
                       build_bulk_quadrature, build_surface_quadrature,
                       bulk_eval_matrix, surface_eval_matrix)
from .driver import EmiConfig, ManufacturedProblem, PdeContext, build_spaces, \
    run_simulation
from .levelset import (build_cut_topology, make_ellipse, make_levelset1,
                       make_two_lobes, translated_circle)
from .linalg import condition_number_2
from .membrane import HHParams, SurfaceOde, weak_euler_update
from .mesh import TAG_INTERFACE, active_mesh, build_cartesian_mesh
from .spaces import Q1_CONTINUOUS, build_space, interpolate

__all__ = [
    "StudyReport", "run_conv_multi", "run_sens_pde", "run_sens_ode",
    "run_conv_ode", "run_conv_coupled", "run_hh_demo",
    "eoc_steps", "write_csv", "load_config_file", "main",
]

CSV_FLOAT_FMT = "%.12e"

# default box and ladder of the PDE-step convergence study
OMEGA1_BOUNDS = (-1.8, -2.05, 1.8, 1.55)
CONV_MULTI_LEVELS = (16, 32, 64, 128, 256)

# ellipse semi-axes shared by the ODE and coupled ladders
ODE_ELLIPSE = (0.64, 0.8)
UNIT_BOUNDS = (-1.0, -1.0, 1.0, 1.0)

# coupled-ladder time-step counts (N = 4M per level)
CONV_COUPLED_STEPS = (4, 6, 8, 12, 16)

# demo configuration: two-lobe cell, stimulus on the right lobe tip
HH_BOUNDS = (-30.0, -30.0, 30.0, 30.0)
HH_LEVELS = (32, 64, 128)
HH_STIM_X = 12.0
HH_STIM_WINDOW = (0.5, 1.0)
HH_PROBES = (("v", -15.6, 6.5), ("u_i", -15.0, 4.0), ("u_e", -17.0, 8.0))


def _zero(x, y):
    return np.zeros_like(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# error norms and EOC

class BulkNorm:
    """L2 and H1-seminorm error integrals on one bulk side.

    The quadrature pack and evaluation operators are built once; each
    call is a couple of sparse matvecs, so per-step error measurement
    inside time loops stays cheap.
    """

    def __init__(self, space, topo, side, order=4):
        bq = build_bulk_quadrature(topo, side, space.active.cells, order)
        self.x = bq.points[:, 0]
        self.y = bq.points[:, 1]
        self.w = bq.weights
        self.ev = bulk_eval_matrix(space, bq)
        self.gx = bulk_eval_matrix(space, bq, derivative=0)
        self.gy = bulk_eval_matrix(space, bq, derivative=1)

    def l2(self, coeffs, exact=None):
        d = self.ev @ coeffs
        if exact is not None:
            d = d - exact(self.x, self.y)
        return math.sqrt(float(np.sum(self.w * d * d)))

    def h1(self, coeffs, exact_dx=None, exact_dy=None):
        dx = self.gx @ coeffs
        dy = self.gy @ coeffs
        if exact_dx is not None:
            dx = dx - exact_dx(self.x, self.y)
            dy = dy - exact_dy(self.x, self.y)
        return math.sqrt(float(np.sum(self.w * (dx * dx + dy * dy))))


class SurfaceNorm:
    """L2(Gamma) error integral for interface fields (Q1 or P0)."""

    def __init__(self, space, topo, order=4):
        sq = build_surface_quadrature(topo, order)
        self.points = sq.points
        self.w = sq.weights
        self.normals = sq.normals
        self.ev = surface_eval_matrix(space, sq)

    def l2(self, coeffs, exact_values=None):
        d = self.ev @ coeffs
        if exact_values is not None:
            d = d - exact_values
        return math.sqrt(float(np.sum(self.w * d * d)))


def eoc_steps(errors, hs):
    """Observed convergence orders between consecutive ladder levels.

    Entry k is log(E_{k-1}/E_k) / log(h_{k-1}/h_k); the first entry is
    None (printed as an empty cell), and degenerate error pairs give
    nan.
    """
    out = [None]
    for k in range(1, len(errors)):
        e0, e1 = errors[k - 1], errors[k]
        if e0 <= 0.0 or e1 <= 0.0:
            out.append(float("nan"))
        else:
            out.append(math.log(e0 / e1) / math.log(hs[k - 1] / hs[k]))
    return out


def _interleave(columns):
    """Zip error/EOC column pairs into per-level row fragments."""
    return [tuple(col[k] for col in columns) for k in range(len(columns[0]))]


# ---------------------------------------------------------------------------
# artifact writers

def _fmt_cell(value):
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isinf(value):
        return "singular"
    if math.isnan(value):
        return "nan"
    return CSV_FLOAT_FMT % value


def write_csv(path, header, rows):
    """Plain comma-separated table with fixed number formatting."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt_cell(c) for c in row) + "\n")


def _echo_value(value):
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return json.dumps(list(value))
    return str(value)


def write_config_echo(out_dir, study, config):
    """Echo the effective configuration plus its SHA-256 digest."""
    lines = ["study=%s" % study]
    lines += ["%s=%s" % (k, _echo_value(v)) for k, v in config.items()]
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(os.path.join(out_dir, "config_echo.txt"), "w") as fh:
        fh.write(body)
        fh.write("config_sha256=%s\n" % digest)
    return digest


def write_run_info(out_dir, seconds, digest):
    # wall time lives here, never in the CSV tables (byte determinism)
    with open(os.path.join(out_dir, "run_info.txt"), "w") as fh:
        fh.write("wall_seconds=%.3f\nconfig_sha256=%s\n" % (seconds, digest))


def _cell_samples(space, coeffs):
    """Per-background-cell samples of a field (vertex mean for Q1)."""
    out = np.zeros(space.mesh.n_cells)
    out[space.active.cells] = coeffs[space.cell_dof_table].mean(axis=1)
    return out


def write_vtk_rectilinear(path, mesh, fields, title="cutemi fields"):
    """Legacy ASCII rectilinear-grid file with cell-data arrays.

    fields is a list of (name, values) with one value per background
    cell in lexicographic (x fastest) order, which is also VTK's.
    """
    xs = mesh.bounds[0] + mesh.hx * np.arange(mesh.nx + 1)
    ys = mesh.bounds[1] + mesh.hy * np.arange(mesh.ny + 1)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n%s\nASCII\n" % title)
        fh.write("DATASET RECTILINEAR_GRID\n")
        fh.write("DIMENSIONS %d %d 1\n" % (mesh.nx + 1, mesh.ny + 1))
        fh.write("X_COORDINATES %d double\n" % (mesh.nx + 1))
        fh.write(" ".join("%.9g" % v for v in xs) + "\n")
        fh.write("Y_COORDINATES %d double\n" % (mesh.ny + 1))
        fh.write(" ".join("%.9g" % v for v in ys) + "\n")
        fh.write("Z_COORDINATES 1 double\n0\n")
        fh.write("CELL_DATA %d\n" % mesh.n_cells)
        for name, values in fields:
            fh.write("SCALARS %s double 1\nLOOKUP_TABLE default\n" % name)
            fh.write("\n".join("%.9g" % v for v in values) + "\n")


def _write_side_fields(out_dir, prefix, topo, samples):
    """One VTK file per side so cut cells keep both samples."""
    mask = topo.location.astype(float)
    for suffix, values in samples:
        path = os.path.join(out_dir, "%s_%s.vtk" % (prefix, suffix))
        write_vtk_rectilinear(path, topo.mesh,
                              [(suffix, values), ("subdomain", mask)])


# ---------------------------------------------------------------------------
# reports and checks

class StudyReport:
    """Table, effective config, and pass/fail checks of one study."""

    def __init__(self, name, header, rows, config, checks):
        self.name = name
        self.header = header
        self.rows = rows
        self.config = config
        self.checks = checks

    @property
    def ok(self):
        return all(ok for _, ok, _ in self.checks)


def _check_window(label, value, lo, hi):
    ok = lo <= value <= hi
    return (label, bool(ok), "%.3e in [%.1e, %.1e]" % (value, lo, hi))


def _parallel_map(fn, items, threads):
    """Order-preserving map, optionally on a thread pool.

    Results are keyed by position, so the rows (and the CSV bytes) do
    not depend on the thread count.
    """
    items = list(items)
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _normals_e(ls, x, y):
    """Unit normal pointing out of the extracellular side (into Omega_i)."""
    gx, gy = ls.gradient(x, y)
    r = np.hypot(gx, gy)
    return -gx / r, -gy / r


# ---------------------------------------------------------------------------
# study 1: PDE-step convergence, multi-dimensional formulation

def run_conv_multi(levels=CONV_MULTI_LEVELS, gamma=0.1, order=2, out_dir=None):
    """Manufactured-solution ladder for the multi-dimensional PDE step.

    The exact potentials are w/sigma_j with w = sin(pi x/2) cos(pi y/2)
    on the levelset1 geometry; the current is the normal derivative of
    w. Writes finest-level VTK fields when out_dir is given.
    """
    ls = make_levelset1()
    sig_i, sig_e, c_m, dt = 1.5, 1.0, 1.0, 0.2
    dsig = 1.0 / sig_i - 1.0 / sig_e
    params = EmiParams(sig_i, sig_e, c_m, dt, gamma=gamma)

    def w(x, y):
        return np.sin(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)

    def w_dx(x, y):
        return 0.5 * np.pi * np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y)

    def w_dy(x, y):
        return -0.5 * np.pi * np.sin(0.5 * np.pi * x) * np.sin(0.5 * np.pi * y)

    def im_exact(x, y):
        nx, ny = _normals_e(ls, x, y)
        return w_dx(x, y) * nx + w_dy(x, y) * ny

    def g_fn(x, y):
        return dsig * w(x, y) - (dt / c_m) * im_exact(x, y)

    def u_bc(x, y):
        return w(x, y) / sig_e

    def source(x, y, t):
        return 0.5 * np.pi ** 2 * w(x, y)

    u_exact = {"i": (lambda x, y: w(x, y) / sig_i,
                     lambda x, y: w_dx(x, y) / sig_i,
                     lambda x, y: w_dy(x, y) / sig_i),
               "e": (lambda x, y: w(x, y) / sig_e,
                     lambda x, y: w_dx(x, y) / sig_e,
                     lambda x, y: w_dy(x, y) / sig_e)}

    hs, err_l2, err_h1, err_im = [], [], [], []
    finest = None
    for N in levels:
        mesh = build_cartesian_mesh(N, N, OMEGA1_BOUNDS)
        topo = build_cut_topology(ls, mesh)
        v_i, v_e, q_mult, _ = build_spaces(topo, dirichlet=u_bc)
        ctx = PdeContext(topo, v_i, v_e, q_mult, params, formulation="multi",
                         order=order, f_i=source, f_e=source)
        sol = ctx.step(g_fn)

        parts_l2, parts_h1 = [], []
        for side, space, coeffs in (("i", v_i, sol.u_i), ("e", v_e, sol.u_e)):
            bn = BulkNorm(space, topo, side)
            val, dx, dy = u_exact[side]
            parts_l2.append(bn.l2(coeffs, val))
            parts_h1.append(bn.h1(coeffs, dx, dy))
        sn = SurfaceNorm(q_mult, topo)
        hs.append(mesh.h)
        err_l2.append(math.hypot(*parts_l2))
        err_h1.append(math.hypot(*parts_h1))
        err_im.append(sn.l2(sol.I_m,
                            im_exact(sn.points[:, 0], sn.points[:, 1])))
        finest = (topo, v_i, v_e, sol)

    eoc_l2 = eoc_steps(err_l2, hs)
    eoc_h1 = eoc_steps(err_h1, hs)
    eoc_im = eoc_steps(err_im, hs)
    rows = [(N,) + frag for N, frag in zip(levels, _interleave(
        [hs, err_l2, eoc_l2, err_h1, eoc_h1, err_im, eoc_im]))]

    checks = []
    levels = list(levels)
    if 16 in levels:
        checks.append(_check_window("u L2 error at N=16 within 2x of 3.42e-02",
                                    err_l2[levels.index(16)],
                                    3.42e-02 / 2, 3.42e-02 * 2))
    if 256 in levels:
        checks.append(_check_window("u L2 error at N=256 within 2x of 1.36e-04",
                                    err_l2[levels.index(256)],
                                    1.36e-04 / 2, 1.36e-04 * 2))
    if len(levels) >= 2:
        checks.append(_check_window("final EOC of u in L2", eoc_l2[-1], 1.9, 2.1))
        checks.append(_check_window("final EOC of u in H1", eoc_h1[-1], 0.95, 1.1))
        checks.append(_check_window("final EOC of I_m on Gamma",
                                    eoc_im[-1], 0.9, 1.3))

    if out_dir is not None and finest is not None:
        topo, v_i, v_e, sol = finest
        _write_side_fields(out_dir, "conv_multi", topo,
                           [("u_i", _cell_samples(v_i, sol.u_i)),
                            ("u_e", _cell_samples(v_e, sol.u_e))])

    config = {"levels": levels, "bounds": OMEGA1_BOUNDS, "geometry": "levelset1",
              "sigma_i": sig_i, "sigma_e": sig_e, "C_m": c_m, "dt": dt,
              "gamma": gamma, "quad_order": order}
    header = ["N", "h", "err_u_L2", "eoc_u_L2", "err_u_H1", "eoc_u_H1",
              "err_Im_L2G", "eoc_Im_L2G"]
    return StudyReport("conv_multi", header, rows, config, checks)


# ---------------------------------------------------------------------------
# study 2: PDE operator conditioning over cut positions

def run_sens_pde(N=32, m_delta=100, dt=0.5, gamma=0.1, threads=1, order=2):
    """Condition numbers of the reduced PDE operator as the cut moves.

    A circle of radius 0.5 is shifted by delta*(1/N, 1/N) for
    delta = m/m_delta, m = 0..m_delta; each position is assembled with
    and without the stabilization terms.
    """
    if m_delta < 1:
        raise ValueError("m_delta must be >= 1")
    params = EmiParams(1.0, 2.0, 1.0, dt, gamma=gamma)
    mesh = build_cartesian_mesh(N, N, UNIT_BOUNDS)

    def one(m):
        ls = translated_circle(0.5, N=N, M_delta=m_delta, m=m)
        topo = build_cut_topology(ls, mesh)
        v_i, v_e, q_mult, _ = build_spaces(topo, dirichlet=0.0)
        kappas = []
        for stabilized in (True, False):
            system = assemble_multi_dim((v_i, v_e), q_mult, topo, params,
                                        _zero, stabilized=stabilized,
                                        order=order)
            a_ff, _ = system.reduced()
            kappas.append(condition_number_2(a_ff))
        return kappas

    results = _parallel_map(one, range(m_delta + 1), threads)
    k_stab = np.array([r[0] for r in results])
    k_none = np.array([r[1] for r in results])
    rows = [(m, m / m_delta, k_stab[m], k_none[m]) for m in range(m_delta + 1)]

    spread = float(np.max(k_stab) / np.min(k_stab))
    factor_ok = bool(np.max(k_none) >= 100.0 * np.max(k_stab))
    checks = [
        ("stabilized kappa spread max/min < 10", spread < 10.0,
         "spread %.3e" % spread),
        ("unstabilized max kappa >= 100x stabilized max", factor_ok,
         "max %.3e vs %.3e" % (np.max(k_none), np.max(k_stab))),
    ]
    config = {"N": N, "m_delta": m_delta, "dt": dt, "sigma_i": 1.0,
              "sigma_e": 2.0, "C_m": 1.0, "gamma": gamma, "radius": 0.5,
              "bounds": UNIT_BOUNDS, "quad_order": order}
    header = ["m", "delta", "kappa_stab", "kappa_nostab"]
    return StudyReport("sens_pde", header, rows, config, checks)


# ---------------------------------------------------------------------------
# study 3: surface mass-matrix conditioning over cut positions

def run_sens_ode(N=32, m_delta=100, gamma_b=0.1, threads=1, order=2):
    """Condition numbers of the projection mass matrix as the cut moves.

    Sweeps the same moving circle and assembles the plain, s1- and
    s2-stabilized mass matrices on the interface cells. Singular sweeps
    are encoded as the string "singular" in the CSV.
    """
    if m_delta < 1:
        raise ValueError("m_delta must be >= 1")
    params = EmiParams(1.0, 1.0, 1.0, 1.0, gamma_b=gamma_b)
    mesh = build_cartesian_mesh(N, N, UNIT_BOUNDS)

    def one(m):
        ls = translated_circle(0.5, N=N, M_delta=m_delta, m=m)
        topo = build_cut_topology(ls, mesh)
        q_ode = build_space(active_mesh(mesh, topo, TAG_INTERFACE),
                            Q1_CONTINUOUS)
        return [condition_number_2(
            assemble_surface_mass(q_ode, topo, params, stab=stab, order=order))
            for stab in ("none", "s1", "s2")]

    results = _parallel_map(one, range(m_delta + 1), threads)
    k_none = np.array([r[0] for r in results])
    k_s1 = np.array([r[1] for r in results])
    k_s2 = np.array([r[2] for r in results])
    rows = [(m, m / m_delta, k_none[m], k_s1[m], k_s2[m])
            for m in range(m_delta + 1)]

    checks = [
        ("unstabilized sweep reaches kappa >= 1e6 or singular",
         bool(np.max(k_none) >= 1e6), "max %.3e" % np.max(k_none)),
        _check_window("s1 sweep max within one order of 1e4",
                      float(np.max(k_s1)), 1e3, 1e5),
        _check_window("s2 sweep max within one order of 1e2",
                      float(np.max(k_s2)), 1e1, 1e3),
    ]
    config = {"N": N, "m_delta": m_delta, "gamma_b": gamma_b, "radius": 0.5,
              "bounds": UNIT_BOUNDS, "quad_order": order}
    header = ["m", "delta", "kappa_none", "kappa_s1", "kappa_s2"]
    return StudyReport("sens_ode", header, rows, config, checks)


# ---------------------------------------------------------------------------
# study 4: surface ODE convergence

def run_conv_ode(n_levels=5, stab="s1", gamma_b=0.1, order=2):
    """Ladder for the stabilized surface ODE solver alone.

    Integrates v_t = -s, s_t = v on an unfitted ellipse with exact
    solution (x^2 + y^3)(cos t, sin t) over [0, 2], with N = 4M so the
    time step and mesh refine together.
    """
    ls = make_ellipse(*ODE_ELLIPSE)
    t_end = 2.0
    steps = [2 ** (k + 1) for k in range(n_levels)]

    def exact(x, y, t):
        return (x ** 2 + y ** 3) * np.cos(t), (x ** 2 + y ** 3) * np.sin(t)

    hs = []
    errs = {"v_linf": [], "v_l2": [], "s_linf": [], "s_l2": []}
    for M in steps:
        N = 4 * M
        dt = t_end / M
        mesh = build_cartesian_mesh(N, N, UNIT_BOUNDS)
        topo = build_cut_topology(ls, mesh)
        q_ode = build_space(active_mesh(mesh, topo, TAG_INTERFACE),
                            Q1_CONTINUOUS)
        params = EmiParams(1.0, 1.0, 1.0, dt, gamma_b=gamma_b)
        m_stab = assemble_surface_mass(q_ode, topo, params, stab=stab,
                                       order=order)
        m_plain = assemble_surface_mass(q_ode, topo, params, stab="none",
                                        order=order)
        ode = SurfaceOde(q_ode, topo, m_stab, m_plain, order=order)
        norm = SurfaceNorm(q_ode, topo)
        xs, ys = norm.points[:, 0], norm.points[:, 1]

        v_c = interpolate(q_ode, lambda x, y: exact(x, y, 0.0)[0])
        s_c = interpolate(q_ode, lambda x, y: exact(x, y, 0.0)[1])
        ev, es = [], []
        for m in range(1, M + 1):
            v_pts = ode.point_values(v_c)
            s_pts = ode.point_values(s_c)
            v_c = weak_euler_update(ode, v_c, -dt * s_pts)
            s_c = weak_euler_update(ode, s_c, dt * v_pts)
            v_ex, s_ex = exact(xs, ys, m * dt)
            ev.append(norm.l2(v_c, v_ex))
            es.append(norm.l2(s_c, s_ex))
        hs.append(mesh.h)
        errs["v_linf"].append(max(ev))
        errs["v_l2"].append(math.sqrt(float(np.mean(np.square(ev)))))
        errs["s_linf"].append(max(es))
        errs["s_l2"].append(math.sqrt(float(np.mean(np.square(es)))))

    eocs = {k: eoc_steps(v, hs) for k, v in errs.items()}
    rows = [(M, 4 * M) + frag for M, frag in zip(steps, _interleave(
        [hs, errs["v_linf"], eocs["v_linf"], errs["v_l2"], eocs["v_l2"],
         errs["s_linf"], eocs["s_linf"], errs["s_l2"], eocs["s_l2"]]))]

    checks = []
    if n_levels >= 2:
        for key, label in (("v_linf", "v in LinfL2"), ("v_l2", "v in L2L2"),
                           ("s_linf", "s in LinfL2"), ("s_l2", "s in L2L2")):
            val = eocs[key][-1]
            checks.append(("final EOC of %s >= 0.85" % label, val >= 0.85,
                           "eoc %.3f" % val))

    config = {"levels": steps, "t_end": t_end, "stab": stab,
              "gamma_b": gamma_b, "ellipse": ODE_ELLIPSE,
              "bounds": UNIT_BOUNDS, "quad_order": order}
    header = ["M", "N", "h",
              "err_v_LinfL2", "eoc_v_LinfL2", "err_v_L2L2", "eoc_v_L2L2",
              "err_s_LinfL2", "eoc_s_LinfL2", "err_s_L2L2", "eoc_s_L2L2"]
    return StudyReport("conv_ode", header, rows, config, checks)


# ---------------------------------------------------------------------------
# study 5: coupled splitting convergence, both formulations

def coupled_problem(ls, sig_i, sig_e, c_m):
    """Closed-form coupled verification fields on the given geometry.

    Built from w = sin(pi x) cos(pi y) exp(-t/2): potentials w/sigma_j,
    jump v = (1/sigma_i - 1/sigma_e) w, and s = I_m = dw/dn_e. P1/P2
    are the membrane sources that make (v, s) solve the split ODEs.
    """
    dsig = 1.0 / sig_i - 1.0 / sig_e

    def w(x, y, t):
        return np.sin(np.pi * x) * np.cos(np.pi * y) * np.exp(-0.5 * t)

    def w_dx(x, y, t):
        return np.pi * np.cos(np.pi * x) * np.cos(np.pi * y) * np.exp(-0.5 * t)

    def w_dy(x, y, t):
        return -np.pi * np.sin(np.pi * x) * np.sin(np.pi * y) * np.exp(-0.5 * t)

    def im(x, y, t):
        nx, ny = _normals_e(ls, x, y)
        return w_dx(x, y, t) * nx + w_dy(x, y, t) * ny

    return ManufacturedProblem(
        u_i=lambda x, y, t: w(x, y, t) / sig_i,
        u_e=lambda x, y, t: w(x, y, t) / sig_e,
        v=lambda x, y, t: dsig * w(x, y, t),
        s=im,
        I_m=im,
        f_i=lambda x, y, t: 2.0 * np.pi ** 2 * w(x, y, t),
        f_e=lambda x, y, t: 2.0 * np.pi ** 2 * w(x, y, t),
        u_bc=lambda x, y, t: w(x, y, t) / sig_e,
        P1=lambda x, y, t: 2.0 * im(x, y, t) + 0.5 * c_m * dsig * w(x, y, t),
        P2=lambda x, y, t: -0.5 * im(x, y, t) - dsig * w(x, y, t),
    ), w, (w_dx, w_dy)


class _StepRecorder:
    """Collects (t, solution, v, s) copies from the time loop."""

    def __init__(self):
        self.steps = []

    def __call__(self, m, t, state, sol):
        self.steps.append((t, sol, state.v.copy(), state.s.copy()))


def run_conv_coupled(steps=CONV_COUPLED_STEPS, formulations=("single", "multi"),
                     stab="s1", gamma=0.1, gamma_b=0.1, order=2):
    """Ladder for the full splitting scheme, run for both formulations.

    dt = 1/M with N = 4M, so first-order splitting dominates the finer
    levels. The I_m columns are reported for the multi-dimensional
    formulation, whose multiplier is the discrete current. The
    cross-formulation column holds the largest L2 distance between the
    two potentials over the steps of a level.
    """
    ls = make_ellipse(*ODE_ELLIPSE)
    sig_i, sig_e, c_m, t_end = 1.5, 1.0, 1.0, 1.0
    man, w, (w_dx, w_dy) = coupled_problem(ls, sig_i, sig_e, c_m)

    keys = ("u_linf_l2", "u_l2_l2", "u_linf_h1", "u_l2_h1",
            "v_linf", "v_l2", "s_linf", "s_l2", "im_linf", "im_l2")
    errs = {form: {k: [] for k in keys} for form in formulations}
    xform = []
    hs = []

    for M in steps:
        N = 4 * M
        dt = t_end / M
        u_history = {}
        norms = None
        for form in formulations:
            emi = EmiParams(sig_i, sig_e, c_m, dt, gamma=gamma,
                            gamma_b=gamma_b)
            cfg = EmiConfig(ls, UNIT_BOUNDS, N, t_end, dt, formulation=form,
                            ode_stab=stab, emi=emi, manufactured=man,
                            quad_order=order)
            rec = _StepRecorder()
            result = run_simulation(cfg, on_step=rec)
            ctx = result.context

            # identical topology and dof order for both formulations,
            # so the norm packs can be shared across them
            if norms is None:
                norms = (BulkNorm(ctx.v_i, ctx.topo, "i"),
                         BulkNorm(ctx.v_e, ctx.topo, "e"),
                         SurfaceNorm(result.ode.space, ctx.topo),
                         SurfaceNorm(ctx.q_space, ctx.topo))
            bn_i, bn_e, sn_ode, sn_q = norms
            xs, ys = sn_ode.points[:, 0], sn_ode.points[:, 1]

            eu_l2, eu_h1, ev, es, eim = [], [], [], [], []
            for t, sol, v_c, s_c in rec.steps:
                eu_l2.append(math.hypot(
                    bn_i.l2(sol.u_i, lambda x, y: man.u_i(x, y, t)),
                    bn_e.l2(sol.u_e, lambda x, y: man.u_e(x, y, t))))
                eu_h1.append(math.hypot(
                    bn_i.h1(sol.u_i,
                            lambda x, y: w_dx(x, y, t) / sig_i,
                            lambda x, y: w_dy(x, y, t) / sig_i),
                    bn_e.h1(sol.u_e,
                            lambda x, y: w_dx(x, y, t) / sig_e,
                            lambda x, y: w_dy(x, y, t) / sig_e)))
                ev.append(sn_ode.l2(v_c, man.v(xs, ys, t)))
                es.append(sn_ode.l2(s_c, man.s(xs, ys, t)))
                eim.append(sn_q.l2(sol.I_m, man.I_m(
                    sn_q.points[:, 0], sn_q.points[:, 1], t)))
            u_history[form] = [(sol.u_i.copy(), sol.u_e.copy())
                               for _, sol, _, _ in rec.steps]

            dest = errs[form]
            dest["u_linf_l2"].append(max(eu_l2))
            dest["u_l2_l2"].append(math.sqrt(float(np.mean(np.square(eu_l2)))))
            dest["u_linf_h1"].append(max(eu_h1))
            dest["u_l2_h1"].append(math.sqrt(float(np.mean(np.square(eu_h1)))))
            dest["v_linf"].append(max(ev))
            dest["v_l2"].append(math.sqrt(float(np.mean(np.square(ev)))))
            dest["s_linf"].append(max(es))
            dest["s_l2"].append(math.sqrt(float(np.mean(np.square(es)))))
            dest["im_linf"].append(max(eim))
            dest["im_l2"].append(math.sqrt(float(np.mean(np.square(eim)))))

        hs.append(2.0 / N)
        if len(formulations) == 2:
            bn_i, bn_e, _, _ = norms
            diffs = [math.hypot(bn_i.l2(ui_a - ui_b), bn_e.l2(ue_a - ue_b))
                     for (ui_a, ue_a), (ui_b, ue_b)
                     in zip(u_history[formulations[0]],
                            u_history[formulations[1]])]
            xform.append(max(diffs))
        else:
            xform.append(None)

    eocs = {form: {k: eoc_steps(v, hs) for k, v in errs[form].items()}
            for form in formulations}

    header = ["M", "N", "h", "form",
              "err_u_LinfL2", "eoc_u_LinfL2", "err_u_L2L2", "eoc_u_L2L2",
              "err_u_LinfH1", "eoc_u_LinfH1", "err_u_L2H1", "eoc_u_L2H1",
              "err_v_LinfL2", "eoc_v_LinfL2", "err_v_L2L2", "eoc_v_L2L2",
              "err_s_LinfL2", "eoc_s_LinfL2", "err_s_L2L2", "eoc_s_L2L2",
              "err_Im_LinfL2", "eoc_Im_LinfL2", "err_Im_L2L2", "eoc_Im_L2L2",
              "u_xform_LinfL2"]
    rows = []
    for k, M in enumerate(steps):
        for form in formulations:
            row = [M, 4 * M, hs[k], form]
            for key in keys:
                if key.startswith("im") and form == "single":
                    row += [None, None]
                else:
                    row += [errs[form][key][k], eocs[form][key][k]]
            row.append(xform[k])
            rows.append(tuple(row))

    checks = []
    for form in formulations:
        for key in keys:
            if key.startswith("im") and form == "single":
                continue
            for k in range(1, len(steps)):
                val = eocs[form][key][k]
                checks.append(("EOC %s/%s level %d in [0.8, 1.5]"
                               % (form, key, k),
                               0.8 <= val <= 1.5, "eoc %.3f" % val))
    if len(formulations) == 2:
        for k in range(len(steps)):
            bound = min(errs[f]["u_linf_l2"][k] for f in formulations)
            checks.append(("cross-formulation u gap below error, level %d" % k,
                           xform[k] < bound,
                           "%.3e vs %.3e" % (xform[k], bound)))

    config = {"steps": list(steps), "formulations": list(formulations),
              "t_end": t_end, "sigma_i": sig_i, "sigma_e": sig_e, "C_m": c_m,
              "stab": stab, "gamma": gamma, "gamma_b": gamma_b,
              "ellipse": ODE_ELLIPSE, "bounds": UNIT_BOUNDS,
              "quad_order": order}
    return StudyReport("conv_coupled", header, rows, config, checks)


# ---------------------------------------------------------------------------
# study 6: Hodgkin-Huxley action-potential demo

def run_hh_demo(levels=HH_LEVELS, dt=0.01, t_end=15.0, stab="s1",
                formulation="multi", gamma=0.1, gamma_b=0.1, order=2,
                out_dir=None, snapshot_times=(1.0, 3.0, 15.0)):
    """Two-lobe cell with a stimulated right tip, refined over levels.

    The stimulus is applied on the membrane patch x > 12 during
    [0.5, 1.0] ms; probes sit on the far (left) lobe. Per-level traces
    and VTK snapshots go to out_dir; the summary table carries spike
    metrics and the L-infinity distance between successive traces.
    """
    ls = make_two_lobes()
    hh = HHParams(stim_region=lambda x, y: x > HH_STIM_X,
                  stim_window=HH_STIM_WINDOW)
    onset = HH_STIM_WINDOW[0]
    snap_steps = sorted(int(round(ts / dt)) for ts in snapshot_times
                        if ts <= t_end + 1e-12)

    rows = []
    checks = []
    v_traces = []
    for N in levels:
        emi = EmiParams(0.7, 0.3, 2e-5, dt, gamma=gamma, gamma_b=gamma_b)
        cfg = EmiConfig(ls, HH_BOUNDS, N, t_end, dt, formulation=formulation,
                        ode_stab=stab, emi=emi, hh=hh, probes=HH_PROBES,
                        snapshot_steps=snap_steps, quad_order=order)
        result = run_simulation(cfg)
        times = result.times
        v = result.traces["v_p0"]

        if out_dir is not None:
            labels = ["v_p0", "u_i_p1", "u_e_p2"]
            write_csv(os.path.join(out_dir, "hh_demo_trace_N%d.csv" % N),
                      ["t"] + labels,
                      [(t,) + tuple(result.traces[lb][k] for lb in labels)
                       for k, t in enumerate(times)])
            topo = result.context.topo
            for m, t, state, sol in result.snapshots:
                prefix = "hh_demo_N%d_t%g" % (N, t)
                _write_side_fields(out_dir, prefix, topo,
                                   [("u_i", _cell_samples(result.context.v_i,
                                                          sol.u_i)),
                                    ("u_e", _cell_samples(result.context.v_e,
                                                          sol.u_e)),
                                    ("v", _cell_samples(result.ode.space,
                                                        state.v))])

        pre = v[times < onset]
        drift = float(np.max(pre) - np.min(pre)) if len(pre) else 0.0
        above = np.nonzero(v > 0.0)[0]
        t_spike = float(times[above[0]]) if len(above) else float("nan")
        v_max = float(np.max(v))
        v_end = float(v[-1])
        rows.append([N, drift, t_spike, v_max, v_end,
                     None if not v_traces else
                     float(np.max(np.abs(v - v_traces[-1][1])))])
        v_traces.append((N, v))

        checks.append(("N=%d pre-stimulus drift < 1 mV" % N, drift < 1.0,
                       "drift %.3f mV" % drift))
        checks.append(("N=%d spike within 2 ms of onset" % N,
                       bool(t_spike <= onset + 2.0),
                       "first v > 0 at t = %.3f" % t_spike))
        checks.append(("N=%d repolarized below -60 mV at end" % N,
                       v_end < -60.0, "v(T) = %.2f mV" % v_end))

    if len(levels) >= 3:
        diffs = [row[5] for row in rows[1:]]
        mono = all(b < a for a, b in zip(diffs, diffs[1:]))
        checks.append(("refinement trace differences decrease", mono,
                       "diffs " + ", ".join("%.3e" % d for d in diffs)))

    config = {"levels": list(levels), "dt": dt, "t_end": t_end,
              "formulation": formulation, "stab": stab, "gamma": gamma,
              "gamma_b": gamma_b, "sigma_i": 0.7, "sigma_e": 0.3,
              "C_m": 2e-5, "stim_x": HH_STIM_X, "stim_window": HH_STIM_WINDOW,
              "probes": [list(p) for p in HH_PROBES],
              "snapshot_times": list(snapshot_times), "bounds": HH_BOUNDS,
              "quad_order": order}
    header = ["N", "drift_mV", "t_spike", "v_max", "v_end", "trace_diff_prev"]
    return StudyReport("hh_demo", header, rows, config, checks)


# ---------------------------------------------------------------------------
# command line

def load_config_file(path):
    """Flat key = value file; values are JSON literals or bare strings."""
    out = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError("bad config line %r" % raw.strip())
            key, value = line.split("=", 1)
            value = value.strip()
            try:
                out[key.strip().replace("-", "_")] = json.loads(value)
            except ValueError:
                out[key.strip().replace("-", "_")] = value
    return out


def _resolve(args, cfg, key, default):
    value = getattr(args, key, None)
    if value is None:
        value = cfg.get(key, default)
    return value


def cmd_conv_multi(args, cfg, out_dir):
    n = int(_resolve(args, cfg, "n", len(CONV_MULTI_LEVELS)))
    levels = list(CONV_MULTI_LEVELS[:max(1, n)])
    return run_conv_multi(levels=levels,
                          gamma=float(_resolve(args, cfg, "gamma", 0.1)),
                          out_dir=out_dir)


def cmd_sens_pde(args, cfg, out_dir):
    return run_sens_pde(N=int(_resolve(args, cfg, "n", 32)),
                        m_delta=int(_resolve(args, cfg, "mdelta", 100)),
                        dt=float(_resolve(args, cfg, "dt", 0.5)),
                        gamma=float(_resolve(args, cfg, "gamma", 0.1)),
                        threads=int(_resolve(args, cfg, "threads", 1)))


def cmd_sens_ode(args, cfg, out_dir):
    return run_sens_ode(N=int(_resolve(args, cfg, "n", 32)),
                        m_delta=int(_resolve(args, cfg, "mdelta", 100)),
                        gamma_b=float(_resolve(args, cfg, "gamma_b", 0.1)),
                        threads=int(_resolve(args, cfg, "threads", 1)))


def cmd_conv_ode(args, cfg, out_dir):
    return run_conv_ode(n_levels=int(_resolve(args, cfg, "n", 5)),
                        stab=_resolve(args, cfg, "stab", "s1"),
                        gamma_b=float(_resolve(args, cfg, "gamma_b", 0.1)))


def cmd_conv_coupled(args, cfg, out_dir):
    n = int(_resolve(args, cfg, "n", len(CONV_COUPLED_STEPS)))
    form = _resolve(args, cfg, "formulation", None)
    formulations = ("single", "multi") if form is None else (form,)
    return run_conv_coupled(steps=CONV_COUPLED_STEPS[:max(2, n)],
                            formulations=formulations,
                            stab=_resolve(args, cfg, "stab", "s1"),
                            gamma=float(_resolve(args, cfg, "gamma", 0.1)),
                            gamma_b=float(_resolve(args, cfg, "gamma_b", 0.1)))


def cmd_hh_demo(args, cfg, out_dir):
    n = int(_resolve(args, cfg, "n", len(HH_LEVELS)))
    snaps = cfg.get("snapshot_times", (1.0, 3.0, 15.0))
    return run_hh_demo(levels=HH_LEVELS[:max(1, n)],
                       dt=float(_resolve(args, cfg, "dt", 0.01)),
                       t_end=float(cfg.get("t_end", 15.0)),
                       stab=_resolve(args, cfg, "stab", "s1"),
                       formulation=_resolve(args, cfg, "formulation", "multi"),
                       gamma=float(_resolve(args, cfg, "gamma", 0.1)),
                       gamma_b=float(_resolve(args, cfg, "gamma_b", 0.1)),
                       out_dir=out_dir, snapshot_times=snaps)


COMMANDS = {
    "conv-multi": cmd_conv_multi,
    "sens-pde": cmd_sens_pde,
    "sens-ode": cmd_sens_ode,
    "conv-ode": cmd_conv_ode,
    "conv-coupled": cmd_conv_coupled,
    "hh-demo": cmd_hh_demo,
}

STUDY_HELP = {
    "conv-multi": "PDE-step manufactured-solution ladder (--n = level count)",
    "sens-pde": "PDE operator conditioning sweep (--n = mesh cells per axis)",
    "sens-ode": "surface mass conditioning sweep (--n = mesh cells per axis)",
    "conv-ode": "surface ODE ladder (--n = level count)",
    "conv-coupled": "coupled splitting ladder (--n = level count)",
    "hh-demo": "Hodgkin-Huxley two-lobe demo (--n = refinement levels)",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cutemi",
        description="cut finite element studies for the cell-by-cell "
                    "electrophysiology model")
    sub = parser.add_subparsers(dest="study", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=STUDY_HELP[name])
        sp.add_argument("--n", type=int, default=None,
                        help="ladder level count or mesh size, per study")
        sp.add_argument("--mdelta", type=int, default=None,
                        help="translation steps of the sensitivity sweeps "
                             "(default 100; 500 matches the finer sweep)")
        sp.add_argument("--dt", type=float, default=None, help="time step")
        sp.add_argument("--formulation", choices=("single", "multi"),
                        default=None)
        sp.add_argument("--stab", choices=("none", "s1", "s2"), default=None,
                        help="surface mass stabilization")
        sp.add_argument("--gamma", type=float, default=None,
                        help="ghost-penalty parameter")
        sp.add_argument("--gamma-b", dest="gamma_b", type=float, default=None,
                        help="surface stabilization parameter")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None,
                        help="worker threads for the sweeps")
        sp.add_argument("--config", default=None,
                        help="key = value file; flags override it")
        sp.add_argument("--check", action="store_true",
                        help="exit 2 when a study check fails")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    cfg = load_config_file(args.config) if args.config else {}
    out_dir = _resolve(args, cfg, "out",
                       os.path.join("out", args.study.replace("-", "_")))
    os.makedirs(out_dir, exist_ok=True)

    start = time.perf_counter()
    try:
        report = COMMANDS[args.study](args, cfg, out_dir)
    except Exception as exc:
        print("error: %s" % (exc,), file=sys.stderr)
        return 1

    csv_path = os.path.join(out_dir, report.name + ".csv")
    write_csv(csv_path, report.header, report.rows)
    digest = write_config_echo(out_dir, args.study, report.config)
    write_run_info(out_dir, time.perf_counter() - start, digest)

    print("wrote %s" % csv_path)
    for label, ok, detail in report.checks:
        print("check %s: %s (%s)" % (label, "PASS" if ok else "FAIL", detail))
    if args.check and not report.ok:
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
