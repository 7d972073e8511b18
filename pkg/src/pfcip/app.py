"""Experiment drivers: single runs with CSV/VTK artifacts and the
mesh-refinement convergence study."""

import math
import os
from dataclasses import dataclass

import numpy as np

from . import diagnostics, forms, icfields, io, stepper
from .config import ConfigError, RunConfig
from .mesh import build_rect_mesh
from .operators import Operators, build_operators

OUTPUT_ROOT_ENV = "PFCIP_OUTPUT_ROOT"


def make_ic(config: RunConfig) -> icfields.ScalarField:
    if config.ic_preset == "constant":
        return icfields.constant_field(config.ic_constant)
    if config.ic_preset == "benchmark":
        return icfields.ic_benchmark()
    if config.ic_preset == "grain_growth":
        return icfields.ic_grain_growth(
            [(c, r, a) for c, r, a in config.ic_crystallites],
            background=config.ic_background,
            amplitude=config.ic_amplitude,
            wavenumber=config.ic_wavenumber,
            ramp_width=config.ic_ramp_width)
    raise ConfigError(f"unknown ic_preset {config.ic_preset!r}")


def setup(config: RunConfig):
    """(operators, scheme params, projected initial coefficients)."""
    config.validate()
    mesh = build_rect_mesh(config.lx, config.ly, config.nx, config.ny)
    ops = build_operators(mesh, config.alpha,
                          cell_degree=config.quadrature_degree,
                          edge_degree=config.edge_quadrature_degree)
    params = stepper.SchemeParams(
        tau=config.resolved_tau(), eps=config.eps, alpha=config.alpha,
        newton_tol_rel=config.newton_tol_rel,
        newton_tol_abs=config.newton_tol_abs,
        newton_max_iter=config.newton_max_iter)
    ic = make_ic(config)
    if config.ic_projection == "interpolate":
        phi0 = forms.interpolate(ops.Z, ic.value)
    else:
        phi0 = stepper.ritz_project_initial(ic, ops, params)
    return ops, params, phi0


def output_dir(config: RunConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV, "")
    return os.path.join(root, config.output_dir) if root else config.output_dir


def n_steps(config: RunConfig) -> int:
    return max(1, round(config.t_final / config.resolved_tau()))


def run_experiment(config: RunConfig) -> dict:
    """Run one simulation, writing a config copy, a per-step CSV and VTK
    snapshots. Returns a summary dict; raises on solver failures or
    invariant violations."""
    outdir = output_dir(config)
    os.makedirs(outdir, exist_ok=True)
    ops, params, phi0 = setup(config)
    with open(os.path.join(outdir, "config.json"), "w") as f:
        f.write(config.to_json())

    steps = n_steps(config)
    rec0 = diagnostics.energy_F(phi0, ops, params.eps, step=0, time=0.0)
    io.write_vtk(os.path.join(outdir, "snapshot_000000.vtk"),
                 ops.Z, ops.V, phi0, np.zeros(ops.V.n_dofs))

    f = io.open_timeseries(os.path.join(outdir, "timeseries.csv"))
    io.write_timeseries_row(f, 0, 0.0, rec0, None)
    try:
        def on_step(state, stats):
            rec = diagnostics.energy_F(state.phi, ops, params.eps,
                                       step=state.step, time=state.time)
            io.write_timeseries_row(f, state.step, state.time, rec, stats)
            if config.snapshot_every and state.step % config.snapshot_every == 0:
                io.write_vtk(
                    os.path.join(outdir, f"snapshot_{state.step:06d}.vtk"),
                    ops.Z, ops.V, state.phi, state.mu,
                    title=f"t={state.time:.6g}")

        history = stepper.run(ops, params, phi0, steps, on_step=on_step)
    finally:
        f.close()

    final_state, final_stats = history[-1]
    io.write_vtk(os.path.join(outdir, f"snapshot_{final_state.step:06d}.vtk"),
                 ops.Z, ops.V, final_state.phi, final_state.mu,
                 title=f"t={final_state.time:.6g}")
    return {"steps": steps, "final_time": final_state.time,
            "final_energy": final_stats.energy_after,
            "final_mass": final_stats.mass, "output_dir": outdir,
            "state": final_state, "ops": ops}


@dataclass
class RateTable:
    rows: list  # (h, err_phi_2h, rate_phi, err_mu_H1, rate_mu)

    def __str__(self):
        return io.format_rate_table(self.rows)

    @property
    def phi_rates(self):
        return [r[2] for r in self.rows if r[2] is not None]

    @property
    def mu_rates(self):
        return [r[4] for r in self.rows if r[4] is not None]


def _final_state(config: RunConfig):
    ops, params, phi0 = setup(config)
    history = stepper.run(ops, params, phi0, n_steps(config))
    return ops, history[-1][0]


def run_convergence_study(config: RunConfig, levels) -> RateTable:
    """Table-1 style rate study: solve each level plus a twice-finer
    reference with tau scaled by the mesh size, then measure errors of
    each level against the reference on the reference mesh."""
    levels = list(levels)
    if levels != sorted(levels) or len(set(levels)) != len(levels):
        raise ConfigError("levels must be strictly increasing")
    ref_level = 2 * max(levels)
    for n in levels:
        if ref_level % n:
            raise ConfigError(f"level {n} does not divide reference "
                              f"{ref_level}")
    if config.tau_factor is None:
        raise ConfigError("convergence study requires tau_factor scaling")

    def level_config(n):
        import copy
        cfg = copy.deepcopy(config)
        cfg.nx = cfg.ny = n
        cfg.tau = None
        return cfg

    ref_ops, ref_state = _final_state(level_config(ref_level))
    rows = []
    prev = None
    for n in levels:
        ops, state = _final_state(level_config(n))
        e2h, _, _ = diagnostics.error_norms(ops.Z, state.phi, ref_ops.Z,
                                            ref_state.phi, ref_ops)
        _, _, eh1 = diagnostics.error_norms(ops.V, state.mu, ref_ops.V,
                                            ref_state.mu, ref_ops)
        if prev is None:
            rows.append((config.lx / n, e2h, None, eh1, None))
        else:
            rate_phi = math.log2(prev[0] / e2h)
            rate_mu = math.log2(prev[1] / eh1)
            rows.append((config.lx / n, e2h, rate_phi, eh1, rate_mu))
        prev = (e2h, eh1)
    return RateTable(rows=rows)
