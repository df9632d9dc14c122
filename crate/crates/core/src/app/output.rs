use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::EnergyRecord;
use crate::error::{Error, Result};
use crate::fespace::FeSpace;

pub const TIMESERIES_SCHEMA: &str = "# pfc-c0ip timeseries v1";
pub const RATES_SCHEMA: &str = "# pfc-c0ip rates v1";

pub const TIMESERIES_COLUMNS: [&str; 11] = [
    "step",
    "time",
    "mass",
    "energy",
    "quartic",
    "quadratic",
    "gradient",
    "aip_half",
    "newton_iters",
    "newton_residual",
    "energy_law_residual",
];

/// 17 significant digits in exponent notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// One row of the per-step time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    pub energy: EnergyRecord,
    pub newton_iters: usize,
    pub newton_residual: f64,
    pub energy_law_residual: f64,
}

pub struct TimeseriesWriter<W: Write> {
    csv: csv::Writer<W>,
}

impl TimeseriesWriter<BufWriter<File>> {
    pub fn create(path: &Path) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?))
    }
}

impl<W: Write> TimeseriesWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        out.write_all(TIMESERIES_SCHEMA.as_bytes())?;
        out.write_all(b"\r\n")?;
        let mut csv = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
        csv.write_record(TIMESERIES_COLUMNS).map_err(csv_error)?;
        Ok(Self { csv })
    }

    pub fn write(&mut self, row: &StepRow) -> Result<()> {
        let e = &row.energy;
        self.csv
            .write_record([
                e.step.to_string(),
                fmt_f64(e.time),
                fmt_f64(e.mass),
                fmt_f64(e.total),
                fmt_f64(e.quartic),
                fmt_f64(e.quadratic),
                fmt_f64(e.gradient),
                fmt_f64(e.aip_half),
                row.newton_iters.to_string(),
                fmt_f64(row.newton_residual),
                fmt_f64(row.energy_law_residual),
            ])
            .map_err(csv_error)
    }

    pub fn flush(&mut self) -> Result<()> {
        self.csv.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.csv.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RateRow {
    pub n: usize,
    pub h: f64,
    pub err_phi_2h: f64,
    pub rate_phi: Option<f64>,
    pub err_mu_h1: f64,
    pub rate_mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, serde::Serialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

impl RateTable {
    /// Build from `(n, h, err_phi, err_mu)` with successive halvings of `h`.
    pub fn from_errors(errors: &[(usize, f64, f64, f64)]) -> Self {
        let mut rows: Vec<RateRow> = Vec::with_capacity(errors.len());
        for (i, &(n, h, ep, em)) in errors.iter().enumerate() {
            let (rate_phi, rate_mu) = match i.checked_sub(1).map(|j| errors[j]) {
                Some((_, hc, epc, emc)) => {
                    let r = (hc / h).log2();
                    (Some((epc / ep).log2() / r), Some((emc / em).log2() / r))
                }
                None => (None, None),
            };
            rows.push(RateRow { n, h, err_phi_2h: ep, rate_phi, err_mu_h1: em, rate_mu });
        }
        Self { rows }
    }

    pub fn phi_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_phi).collect()
    }

    pub fn mu_rates(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.rate_mu).collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        buf.extend_from_slice(RATES_SCHEMA.as_bytes());
        buf.extend_from_slice(b"\r\n");
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(buf);
        w.write_record(["n", "h", "err_phi_2h", "rate_phi", "err_mu_h1", "rate_mu"]).map_err(csv_error)?;
        let opt = |r: Option<f64>| r.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                fmt_f64(r.h),
                fmt_f64(r.err_phi_2h),
                opt(r.rate_phi),
                fmt_f64(r.err_mu_h1),
                opt(r.rate_mu),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("ascii output"))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>12} {:>12} {:>8} {:>12} {:>8}", "n", "h", "|e_phi|_2h", "rate", "|e_mu|_H1", "rate");
        let opt = |r: Option<f64>| r.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>6} {:>12.6} {:>12.5e} {:>8} {:>12.5e} {:>8}",
                r.n,
                r.h,
                r.err_phi_2h,
                opt(r.rate_phi),
                r.err_mu_h1,
                opt(r.rate_mu)
            );
        }
        s
    }
}

/// Legacy ASCII VTK of a P2 field `phi` and a P1 field `mu`.
///
/// Points are the P2 nodes; each triangle is split into four through its
/// edge midpoints. `mu` is extended linearly to the midpoints.
pub fn write_vtk(out: &mut impl Write, z: &FeSpace, v: &FeSpace, phi: &[f64], mu: &[f64], title: &str) -> Result<()> {
    if phi.len() != z.n_dofs {
        return Err(Error::SizeMismatch { expected: z.n_dofs, got: phi.len() });
    }
    if mu.len() != v.n_dofs {
        return Err(Error::SizeMismatch { expected: v.n_dofs, got: mu.len() });
    }
    let mesh = &z.mesh;
    let nv = mesh.n_vertices();
    let mut mu_nodes = mu.to_vec();
    mu_nodes.extend(mesh.edges.iter().map(|e| 0.5 * (mu[e.endpoints[0]] + mu[e.endpoints[1]])));

    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or("pfc"))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", z.n_dofs)?;
    for p in &z.dof_coords {
        writeln!(out, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]))?;
    }
    let nc = 4 * mesh.n_cells();
    writeln!(out, "CELLS {} {}", nc, 4 * nc)?;
    for cell in 0..mesh.n_cells() {
        let d = z.cell_dofs(cell);
        debug_assert!(d[..3].iter().all(|&i| i < nv));
        // Local edge k joins local vertices k and k + 1.
        let (v0, v1, v2, m01, m12, m20) = (d[0], d[1], d[2], d[3], d[4], d[5]);
        for t in [[v0, m01, m20], [m01, v1, m12], [m20, m12, v2], [m01, m12, m20]] {
            writeln!(out, "3 {} {} {}", t[0], t[1], t[2])?;
        }
    }
    writeln!(out, "CELL_TYPES {nc}")?;
    for _ in 0..nc {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", z.n_dofs)?;
    for (name, data) in [("phi", phi), ("mu", &mu_nodes[..])] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for x in data {
            writeln!(out, "{}", fmt_f64(*x))?;
        }
    }
    Ok(())
}

pub fn write_vtk_file(path: &Path, z: &FeSpace, v: &FeSpace, phi: &[f64], mu: &[f64], title: &str) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_vtk(&mut w, z, v, phi, mu, title)?;
    w.flush()?;
    Ok(())
}
