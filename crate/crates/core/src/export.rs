//! CSV / legacy-VTK field export and a triplet dump for matrices.
//!
//! Numbers are written with 17 significant digits so that reruns of a
//! deterministic computation produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;
use crate::fem::SparseMatrix;
use crate::mesh::Mesh;

/// Fixed float formatting used in every exported file.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a CSV file with a header row and fixed column order.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Per-vertex fields as CSV: `x,y,<name1>,<name2>,...`.
pub fn write_point_fields_csv(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut header = vec!["x", "y"];
    header.extend(fields.iter().map(|(name, _)| *name));
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for i in 0..mesh.n_vertices() {
        let p = mesh.vertex(i);
        let mut row = vec![fmt_float(p.x), fmt_float(p.y)];
        for (_, values) in fields {
            row.push(fmt_float(values[i]));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Legacy-VTK unstructured grid with point data, one SCALARS block per field.
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "asdec field export")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for i in 0..mesh.n_vertices() {
        let p = mesh.vertex(i);
        writeln!(out, "{} {} 0", fmt_float(p.x), fmt_float(p.y))?;
    }
    writeln!(out, "CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle(t);
        writeln!(out, "3 {a} {b} {c}")?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.n_triangles())?;
    for _ in 0..mesh.n_triangles() {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
    for (name, values) in fields {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for &v in values.iter() {
            writeln!(out, "{}", fmt_float(v))?;
        }
    }
    Ok(())
}

/// Debug dump: one `row col value` triplet per line.
pub fn write_matrix_triplets(path: &Path, matrix: &SparseMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {} {} {}", matrix.n(), matrix.n(), matrix.nnz())?;
    for i in 0..matrix.n() {
        for (j, v) in matrix.row(i) {
            writeln!(out, "{} {} {}", i, j, fmt_float(v))?;
        }
    }
    Ok(())
}
