//! Legacy ASCII VTK export of tetrahedral meshes with per-element scalars.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::TetMesh;
use crate::error::{Error, Result};

const VTK_TETRA: u8 = 10;

/// Writes `mesh` as an unstructured grid. Each entry of `cell_data` becomes a
/// `SCALARS` section and must hold one value per element.
pub fn write_vtk<W: Write>(mut w: W, mesh: &TetMesh, title: &str, cell_data: &[(&str, &[f64])]) -> io::Result<()> {
    let n = mesh.num_tets();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.num_vertices())?;
    for v in mesh.vertices() {
        writeln!(w, "{} {} {}", v.x, v.y, v.z)?;
    }
    writeln!(w, "CELLS {} {}", n, 5 * n)?;
    for t in mesh.tets() {
        let [a, b, c, d] = t.vertices;
        writeln!(w, "4 {a} {b} {c} {d}")?;
    }
    writeln!(w, "CELL_TYPES {n}")?;
    for _ in 0..n {
        writeln!(w, "{VTK_TETRA}")?;
    }
    if !cell_data.is_empty() {
        writeln!(w, "CELL_DATA {n}")?;
        for (name, values) in cell_data {
            if values.len() != n {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidInput,
                    format!("cell data '{name}' has {} values for {n} cells", values.len()),
                ));
            }
            writeln!(w, "SCALARS {} double 1", name.replace(char::is_whitespace, "_"))?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in values.iter() {
                writeln!(w, "{v:e}")?;
            }
        }
    }
    w.flush()
}

pub fn write_vtk_file(path: &Path, mesh: &TetMesh, title: &str, cell_data: &[(&str, &[f64])]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_vtk(BufWriter::new(file), mesh, title, cell_data).map_err(|e| Error::io(path, e))
}
