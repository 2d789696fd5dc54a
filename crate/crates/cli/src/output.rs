//! Report tables and legacy VTK snapshots.

use std::io::Write;

use bdf_core::adapt::{LevelOutput, LevelRecord, RefinementMode};

/// Column order of `report.csv` and `study.csv`. Never reorder.
pub const CSV_HEADER: [&str; 12] =
    ["mode", "level", "n_tri", "stu", "iters", "term_reason", "eta_L", "eta_D", "e_total", "err", "ei", "wall_s"];

/// 17 significant digits, enough to round-trip an `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn optional(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub fn csv_row(mode: RefinementMode, r: &LevelRecord) -> [String; 12] {
    [
        mode.as_str().to_string(),
        r.level.to_string(),
        r.n_triangles.to_string(),
        r.stu.to_string(),
        r.iterations.to_string(),
        r.reason.as_str().to_string(),
        format_float(r.eta_l),
        format_float(r.eta_d),
        format_float(r.e_total),
        optional(r.err),
        optional(r.ei),
        format_float(r.wall_s),
    ]
}

pub fn write_csv<W: Write>(out: W, groups: &[(RefinementMode, &[LevelRecord])]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for (mode, records) in groups {
        for r in records.iter() {
            w.write_record(csv_row(*mode, r))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Legacy ASCII unstructured grid with the vertex velocity and pressure and
/// the per-cell indicators of the final iterate.
pub fn write_vtk<W: Write>(mut out: W, level: &LevelOutput) -> std::io::Result<()> {
    let problem = level.problem;
    let mesh = &problem.mesh;
    let layout = &problem.layout;
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let velocity = problem.total_velocity(&level.state.w);

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "bdf-adapt level {}", level.record.level)?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1])?;
    }
    writeln!(out, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "5")?;
    }

    writeln!(out, "POINT_DATA {nv}")?;
    writeln!(out, "VECTORS velocity double")?;
    for v in 0..nv {
        let ux = velocity[layout.velocity_dof(0, v)];
        let uy = velocity[layout.velocity_dof(1, v)];
        writeln!(out, "{ux:.16e} {uy:.16e} 0")?;
    }
    writeln!(out, "SCALARS pressure double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for p in &level.state.p {
        writeln!(out, "{p:.16e}")?;
    }

    writeln!(out, "CELL_DATA {nt}")?;
    let zeros = vec![0.0; nt];
    let (eta_d, eta_l) = match level.indicators {
        Some(f) => (&f.eta_d, &f.eta_l),
        None => (&zeros, &zeros),
    };
    for (name, values) in [("eta_D", eta_d), ("eta_L", eta_l)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for v in values.iter() {
            writeln!(out, "{v:.16e}")?;
        }
    }
    out.flush()
}
