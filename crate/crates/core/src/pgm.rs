//! 16-bit PGM (P5) output with a sidecar recording the affine value map.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::grid::Field2D;

/// Write `f` as a 16-bit P5 PGM, mapping [vmin, vmax] linearly onto
/// [0, 65535], plus a `<path>.txt` sidecar with the inverse map.
pub fn write_pgm16(path: &Path, f: &Field2D, vmin: f64, vmax: f64) -> Result<()> {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    let span = if vmax > vmin { vmax - vmin } else { 1.0 };
    let mut out = Vec::with_capacity(64 + nx * ny * 2);
    out.extend_from_slice(format!("P5\n{nx} {ny}\n65535\n").as_bytes());
    for &v in &f.data {
        let t = ((v - vmin) / span).clamp(0.0, 1.0);
        let g = (t * 65535.0).round() as u16;
        // PGM 16-bit samples are big-endian
        out.extend_from_slice(&g.to_be_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;

    let sidecar = path.with_extension("txt");
    fs::write(
        sidecar,
        format!("vmin {vmin}\nvmax {vmax}\nvalue = vmin + gray/65535 * (vmax - vmin)\n"),
    )?;
    Ok(())
}

/// Min and max of a field, for choosing a display range.
pub fn value_range(f: &Field2D) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in &f.data {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}
