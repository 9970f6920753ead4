//! File formats: CSV writers for trajectories, spectra, statistics and
//! ladders; the flat-binary eigenvector store with its text sidecar; JSON
//! summaries; and the spectrum ingestion path with checksum verification.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use steposc_core::dynamics::Trajectory;
use steposc_core::eigen::Spectrum;
use steposc_core::grid::Grid2D;
use steposc_core::stats::{Histogram, ReferenceLaw, SpacingSample};
use steposc_core::wavefn::{ConcentrationReport, WavefunctionField};

use crate::manifest::RunManifest;

pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,q1,q2,p1,p2,event")?;
    for s in &traj.samples {
        writeln!(w, "{},{},{},{},{},{}", s.t, s.q1, s.q2, s.p1, s.p2, s.event.label())?;
    }
    w.flush()
}

/// Angle-coordinate image of a trajectory: the cross-surface point and its
/// folded L-billiard image per sample.
pub fn write_angles_csv(
    path: &Path,
    rows: &[(f64, f64, f64, f64, f64)], // (t, theta1, theta2, x, y)
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,theta1,theta2,x,y")?;
    for (t, t1, t2, x, y) in rows {
        writeln!(w, "{t},{t1},{t2},{x},{y}")?;
    }
    w.flush()
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "index,eigenvalue,residual")?;
    for (i, (e, r)) in spectrum.eigenvalues.iter().zip(spectrum.residuals.iter()).enumerate() {
        writeln!(w, "{},{e},{r}", spectrum.first_index + i)?;
    }
    w.flush()
}

/// Read "index,eigenvalue[,residual]" CSV. Returns sorted eigenvalues.
pub fn read_spectrum_csv(path: &Path) -> std::io::Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("index") {
            continue;
        }
        let mut parts = line.split(',');
        let _idx = parts.next();
        let e: f64 = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad_data(format!("{}:{}: expected index,eigenvalue", path.display(), ln + 1)))?;
        out.push(e);
    }
    if out.is_empty() {
        return Err(bad_data(format!("{}: no levels found", path.display())));
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn bad_data(msg: String) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg)
}

/// Ingest a spectrum: either a bundle directory (manifest checksums are
/// verified and a failure is an error) or a bare third-party CSV file.
pub fn ingest_spectrum(path: &Path) -> std::io::Result<Vec<f64>> {
    if path.is_dir() {
        let manifest = RunManifest::load(path).map_err(|e| {
            bad_data(format!("{}: bundle has no readable manifest: {e}", path.display()))
        })?;
        if let Err(msg) = manifest.verify(path)? {
            return Err(bad_data(format!("{}: {msg}", path.display())));
        }
        if !manifest.files.iter().any(|f| f.path == "spectrum.csv") {
            return Err(bad_data(format!(
                "{}: bundle manifest lists no spectrum.csv",
                path.display()
            )));
        }
        read_spectrum_csv(&path.join("spectrum.csv"))
    } else {
        read_spectrum_csv(path)
    }
}

// ---------------------------------------------------------------------------
// eigenvector store: flat binary of f64 (little endian) + text sidecar
// ---------------------------------------------------------------------------

pub fn write_field_store(
    dir: &Path,
    stem: &str,
    grid: &Grid2D,
    first_index: usize,
    energies: &[f64],
    fields: &[Vec<f64>],
) -> std::io::Result<()> {
    let bin_path = dir.join(format!("{stem}.bin"));
    let mut w = BufWriter::new(File::create(&bin_path)?);
    for f in fields {
        for v in f {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    let mut meta = String::new();
    meta.push_str(&format!("format = f64le\nlayout = row-major\nn1 = {}\nn2 = {}\n", grid.n[0], grid.n[1]));
    meta.push_str(&format!(
        "h1 = {}\nh2 = {}\nq1_lo = {}\nq1_hi = {}\nq2_lo = {}\nq2_hi = {}\n",
        grid.h[0], grid.h[1], grid.extents[0][0], grid.extents[0][1], grid.extents[1][0], grid.extents[1][1]
    ));
    meta.push_str(&format!("count = {}\nfirst_index = {first_index}\n", fields.len()));
    meta.push_str("energies = ");
    for (i, e) in energies.iter().enumerate() {
        if i > 0 {
            meta.push(' ');
        }
        meta.push_str(&format!("{e}"));
    }
    meta.push('\n');
    fs::write(dir.join(format!("{stem}.meta")), meta)
}

pub struct FieldStore {
    pub grid: Grid2D,
    pub first_index: usize,
    pub energies: Vec<f64>,
    pub fields: Vec<Vec<f64>>,
}

pub fn read_field_store(dir: &Path, stem: &str) -> std::io::Result<FieldStore> {
    let meta = fs::read_to_string(dir.join(format!("{stem}.meta")))?;
    let mut n1 = 0usize;
    let mut n2 = 0usize;
    let mut h = [0.0f64; 2];
    let mut extents = [[0.0f64; 2]; 2];
    let mut count = 0usize;
    let mut first_index = 0usize;
    let mut energies = Vec::new();
    for line in meta.lines() {
        let Some((key, value)) = line.split_once('=') else { continue };
        let key = key.trim();
        let value = value.trim();
        match key {
            "n1" => n1 = value.parse().map_err(|e| bad_data(format!("n1: {e}")))?,
            "n2" => n2 = value.parse().map_err(|e| bad_data(format!("n2: {e}")))?,
            "h1" => h[0] = value.parse().map_err(|e| bad_data(format!("h1: {e}")))?,
            "h2" => h[1] = value.parse().map_err(|e| bad_data(format!("h2: {e}")))?,
            "q1_lo" => extents[0][0] = value.parse().map_err(|e| bad_data(format!("q1_lo: {e}")))?,
            "q1_hi" => extents[0][1] = value.parse().map_err(|e| bad_data(format!("q1_hi: {e}")))?,
            "q2_lo" => extents[1][0] = value.parse().map_err(|e| bad_data(format!("q2_lo: {e}")))?,
            "q2_hi" => extents[1][1] = value.parse().map_err(|e| bad_data(format!("q2_hi: {e}")))?,
            "count" => count = value.parse().map_err(|e| bad_data(format!("count: {e}")))?,
            "first_index" => {
                first_index = value.parse().map_err(|e| bad_data(format!("first_index: {e}")))?
            }
            "energies" => {
                for tok in value.split_whitespace() {
                    energies.push(tok.parse().map_err(|e| bad_data(format!("energies: {e}")))?);
                }
            }
            _ => {}
        }
    }
    let grid = Grid2D { extents, n: [n1, n2], h };
    let nodes = grid.len();
    let mut bytes = Vec::new();
    File::open(dir.join(format!("{stem}.bin")))?.read_to_end(&mut bytes)?;
    if bytes.len() != count * nodes * 8 {
        return Err(bad_data(format!(
            "{stem}.bin: expected {} bytes for {count} fields of {nodes} nodes, found {}",
            count * nodes * 8,
            bytes.len()
        )));
    }
    let mut fields = Vec::with_capacity(count);
    for c in 0..count {
        let mut f = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let off = (c * nodes + i) * 8;
            f.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
        }
        fields.push(f);
    }
    Ok(FieldStore { grid, first_index, energies, fields })
}

pub fn write_field_csv(path: &Path, grid: &Grid2D, values: &[f64]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q1,q2,value")?;
    for i1 in 0..grid.n[0] {
        for i2 in 0..grid.n[1] {
            writeln!(
                w,
                "{},{},{}",
                grid.coord(0, i1),
                grid.coord(1, i2),
                values[grid.index(i1, i2)]
            )?;
        }
    }
    w.flush()
}

// ---------------------------------------------------------------------------
// statistics outputs
// ---------------------------------------------------------------------------

pub fn write_spacing_cdf_csv(path: &Path, sample: &SpacingSample) -> std::io::Result<()> {
    let mut sorted = sample.spacings.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "s,cdf_emp,cdf_poisson,cdf_sp,cdf_goe")?;
    for (i, s) in sorted.iter().enumerate() {
        writeln!(
            w,
            "{s},{},{},{},{}",
            (i as f64 + 1.0) / n,
            ReferenceLaw::Poisson.cdf(*s).unwrap_or(f64::NAN),
            ReferenceLaw::SemiPoisson.cdf(*s).unwrap_or(f64::NAN),
            ReferenceLaw::GoeWigner.cdf(*s).unwrap_or(f64::NAN),
        )?;
    }
    w.flush()
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "s,pdf_emp,pdf_poisson,pdf_sp,pdf_goe")?;
    let width = (hist.hi - hist.lo) / hist.density.len() as f64;
    for (i, d) in hist.density.iter().enumerate() {
        let s = hist.lo + (i as f64 + 0.5) * width;
        writeln!(
            w,
            "{s},{d},{},{},{}",
            ReferenceLaw::Poisson.pdf(s).unwrap_or(f64::NAN),
            ReferenceLaw::SemiPoisson.pdf(s).unwrap_or(f64::NAN),
            ReferenceLaw::GoeWigner.pdf(s).unwrap_or(f64::NAN),
        )?;
    }
    w.flush()
}

pub fn write_weyl_csv(path: &Path, rows: &[(f64, f64, f64)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "E,N_emp,N_weyl,ratio")?;
    for (e, n_emp, n_weyl) in rows {
        let ratio = if *n_weyl > 0.0 { n_emp / n_weyl } else { f64::NAN };
        writeln!(w, "{e},{n_emp},{n_weyl},{ratio}")?;
    }
    w.flush()
}

pub fn write_ladder_csv(path: &Path, rows: &[(u32, f64)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "k,E_pred")?;
    for (k, e) in rows {
        writeln!(w, "{k},{e}")?;
    }
    w.flush()
}

pub fn write_census_jsonl(
    path: &Path,
    first_index: usize,
    reports: &[ConcentrationReport],
) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (i, r) in reports.iter().enumerate() {
        let label = if r.concentrated { "concentrated" } else { "delocalized" };
        writeln!(
            w,
            "{{\"n\": {}, \"E\": {}, \"e_tilde\": {}, \"argmax_q1\": {}, \"argmax_q2\": {}, \"label\": \"{}\"}}",
            first_index + i,
            r.energy,
            r.e_tilde,
            r.argmax_q1,
            r.argmax_q2,
            label
        )?;
    }
    w.flush()
}

pub fn write_mixing_csv(path: &Path, rows: &[(f64, f64, f64, usize, f64, f64)]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x_scaled,P,T,N,eps1,eps2")?;
    for (x, p, t, n, e1, e2) in rows {
        writeln!(w, "{x},{p},{t},{n},{e1},{e2}")?;
    }
    w.flush()
}

/// A wavefunction field reassembled from a store entry.
pub fn field_from_store(store: &FieldStore, idx: usize) -> WavefunctionField {
    WavefunctionField {
        grid: store.grid.clone(),
        values: store.fields[idx].clone(),
        energy: store.energies[idx],
    }
}
