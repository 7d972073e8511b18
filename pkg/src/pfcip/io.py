"""On-disk outputs: RFC-4180 CSV time series and legacy ASCII VTK
snapshots. Numeric CSV columns carry 17 significant digits so reruns
are byte-comparable."""

import numpy as np

CSV_SCHEMA = ("# pfcip-timeseries-v1: step,time,mass,F_total,term_quartic,"
              "term_quadratic,term_gradient,term_aip_half,newton_iters,"
              "final_residual,energy_law_residual")

CSV_HEADER = ("step,time,mass,F_total,term_quartic,term_quadratic,"
              "term_gradient,term_aip_half,newton_iters,final_residual,"
              "energy_law_residual")


def fmt(x) -> str:
    return f"{x:.17g}"


def open_timeseries(path):
    f = open(path, "w", newline="")
    f.write(CSV_SCHEMA + "\r\n")
    f.write(CSV_HEADER + "\r\n")
    return f


def write_timeseries_row(f, step, time, rec, stats):
    cols = [str(step), fmt(time), fmt(rec.mass), fmt(rec.F_total),
            fmt(rec.term_quartic), fmt(rec.term_quadratic),
            fmt(rec.term_gradient), fmt(rec.term_aip_half)]
    if stats is None:
        cols += ["0", fmt(0.0), fmt(0.0)]
    else:
        cols += [str(stats.newton_iters), fmt(stats.final_residual),
                 fmt(stats.energy_law_residual)]
    f.write(",".join(cols) + "\r\n")


def write_rate_table_csv(path, rows):
    """rows: (h, err_phi_2h, rate_phi, err_mu_H1, rate_mu); rates are None
    on the first row."""
    with open(path, "w", newline="") as f:
        f.write("# pfcip-ratetable-v1: h,err_phi_2h,rate_phi,err_mu_H1,rate_mu\r\n")
        f.write("h,err_phi_2h,rate_phi,err_mu_H1,rate_mu\r\n")
        for h, e1, r1, e2, r2 in rows:
            f.write(",".join([fmt(h), fmt(e1),
                              "" if r1 is None else fmt(r1), fmt(e2),
                              "" if r2 is None else fmt(r2)]) + "\r\n")


def format_rate_table(rows) -> str:
    out = [f"{'h':>12} {'err_phi_2h':>14} {'rate':>8} {'err_mu_H1':>14} {'rate':>8}"]
    for h, e1, r1, e2, r2 in rows:
        out.append(f"{h:12.6g} {e1:14.6e} "
                   f"{'N/A' if r1 is None else format(r1, '8.4f'):>8} "
                   f"{e2:14.6e} "
                   f"{'N/A' if r2 is None else format(r2, '8.4f'):>8}")
    return "\n".join(out)


def write_vtk(path, Z, V, phi, mu, title="pfcip snapshot"):
    """Legacy ASCII unstructured-grid snapshot.

    Each P2 triangle is split into 4 linear sub-triangles through its
    midpoint dofs, which renders the quadratic nodal values losslessly.
    The P1 potential is interpolated linearly to the midpoints.
    """
    mesh = Z.mesh
    pts = Z.dof_coords
    cd = Z.cell_dofs
    # sub-triangles (v0,m01,m20), (v1,m12,m01), (v2,m20,m12), (m01,m12,m20)
    subs = np.vstack([
        cd[:, [0, 3, 5]], cd[:, [1, 4, 3]], cd[:, [2, 5, 4]],
        cd[:, [3, 4, 5]]])
    mu_pts = np.empty(len(pts))
    mu_pts[:mesh.n_vertices] = mu
    ev = mesh.edge_vertices
    mu_pts[mesh.n_vertices:] = 0.5 * (mu[ev[:, 0]] + mu[ev[:, 1]])

    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(title + "\n")
        f.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {len(pts)} double\n")
        for p in pts:
            f.write(f"{p[0]:.17g} {p[1]:.17g} 0\n")
        f.write(f"CELLS {len(subs)} {4 * len(subs)}\n")
        for t in subs:
            f.write(f"3 {t[0]} {t[1]} {t[2]}\n")
        f.write(f"CELL_TYPES {len(subs)}\n")
        f.write("\n".join(["5"] * len(subs)) + "\n")
        f.write(f"POINT_DATA {len(pts)}\n")
        f.write("SCALARS phi double 1\nLOOKUP_TABLE default\n")
        for v in phi:
            f.write(f"{v:.17g}\n")
        f.write("SCALARS mu double 1\nLOOKUP_TABLE default\n")
        for v in mu_pts:
            f.write(f"{v:.17g}\n")
