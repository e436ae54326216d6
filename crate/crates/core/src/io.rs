//! Field files and whole-file atomic writes.
//!
//! Velocity files hold the nodal (P1) part only, `node_id,ux,uy`; pressure
//! files hold `node_id,p`. Bubble coefficients stay internal.

use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::{PressureField, VelocityField};
use crate::mesh::Mesh;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

impl Mesh {
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, |w| Ok(w.write_all(self.to_text().as_bytes())?))
    }
}

pub fn write_velocity(path: &Path, u: &VelocityField) -> Result<()> {
    let n = u.layout().num_nodes;
    write_atomic(path, |w| {
        writeln!(w, "node_id,ux,uy")?;
        for i in 0..n {
            let [x, y] = u.nodal(i);
            writeln!(w, "{i},{x:?},{y:?}")?;
        }
        Ok(())
    })
}

pub fn write_pressure(path: &Path, p: &PressureField) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "node_id,p")?;
        for (i, v) in p.coefficients().iter().enumerate() {
            writeln!(w, "{i},{v:?}")?;
        }
        Ok(())
    })
}

/// Reads `columns` values per node; every node id of the mesh must appear
/// exactly once.
fn read_nodal(path: &Path, mesh: &Mesh, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::Reader::from_path(path)?;
    let found: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if found != header {
        return Err(perr(1, format!("expected header `{}`, found `{}`", header.join(","), found.join(","))));
    }
    let n = mesh.num_nodes();
    let mut out: Vec<Option<Vec<f64>>> = vec![None; n];
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec?;
        let id: usize = rec[0].trim().parse().map_err(|e| perr(line, format!("bad node_id: {e}")))?;
        if id >= n {
            return Err(perr(line, format!("node_id {id} outside mesh with {n} nodes")));
        }
        if out[id].is_some() {
            return Err(perr(line, format!("duplicate node_id {id}")));
        }
        let vals = (1..header.len())
            .map(|c| {
                let v: f64 = rec[c].trim().parse().map_err(|e| perr(line, format!("bad {}: {e}", header[c])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(perr(line, format!("non-finite {}", header[c])))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        out[id] = Some(vals);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or_else(|| perr(0, format!("missing node_id {i}"))))
        .collect()
}

pub fn read_velocity(path: &Path, mesh: &Mesh) -> Result<VelocityField> {
    let rows = read_nodal(path, mesh, &["node_id", "ux", "uy"])?;
    let values: Vec<[f64; 2]> = rows.into_iter().map(|r| [r[0], r[1]]).collect();
    VelocityField::from_nodal(mesh, &values)
}

pub fn read_pressure(path: &Path, mesh: &Mesh) -> Result<PressureField> {
    let rows = read_nodal(path, mesh, &["node_id", "p"])?;
    PressureField::from_coefficients(mesh, rows.into_iter().map(|r| r[0]).collect())
}
