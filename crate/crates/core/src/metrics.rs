//! Image-quality and gradient-fidelity metrics: MSE, PSNR, SSIM, MSGE, GSNR.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_same_shape, BoundaryKind, Field2D, Problem};
use crate::stencils::{self, DerivativeMode};

/// Maximum possible solution magnitude span, used by PSNR and GSNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicRange {
    pub max_i: f64,
}

impl DynamicRange {
    /// Both benchmark problems span a range of 2 (Allen-Cahn [-1, 1],
    /// Eriksson-Johnson [0, 2]).
    pub fn for_problem(_problem: Problem) -> Self {
        Self { max_i: 2.0 }
    }
}

/// All metrics for one (ground truth, prediction) pair. PSNR and GSNR are
/// +inf when the corresponding error vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub msge: f64,
    pub gsnr_db: f64,
}

/// Mean squared error over all pixels.
pub fn mse(a: &Field2D, b: &Field2D) -> Result<f64> {
    check_same_shape(a, b)?;
    let n = a.data.len() as f64;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// 10*log10(range^2 / mse); +inf when the fields coincide.
pub fn psnr(a: &Field2D, b: &Field2D, range: f64) -> Result<f64> {
    if !(range > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dynamic range must be positive, got {range}"
        )));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (range * range / m).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [[f64; SSIM_WINDOW]; SSIM_WINDOW] {
    let mut w = [[0.0; SSIM_WINDOW]; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, row) in w.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let di = i as f64 - c;
            let dj = j as f64 - c;
            *v = (-(di * di + dj * dj) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            sum += *v;
        }
    }
    for row in &mut w {
        for v in row {
            *v /= sum;
        }
    }
    w
}

#[inline]
fn ssim_term(mu_a: f64, mu_b: f64, va: f64, vb: f64, cov: f64, c1: f64, c2: f64) -> f64 {
    ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2))
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5, K1 = 0.01,
/// K2 = 0.03), evaluated at every position where the window fits. Grids
/// smaller than the window fall back to one global uniform window.
pub fn ssim(a: &Field2D, b: &Field2D, range: f64) -> Result<f64> {
    check_same_shape(a, b)?;
    if !(range > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dynamic range must be positive, got {range}"
        )));
    }
    let c1 = (SSIM_K1 * range) * (SSIM_K1 * range);
    let c2 = (SSIM_K2 * range) * (SSIM_K2 * range);
    let (nx, ny) = (a.grid.nx, a.grid.ny);
    if nx < SSIM_WINDOW || ny < SSIM_WINDOW {
        // global window with uniform weights
        let n = a.data.len() as f64;
        let mu_a = a.data.iter().sum::<f64>() / n;
        let mu_b = b.data.iter().sum::<f64>() / n;
        let mut va = 0.0;
        let mut vb = 0.0;
        let mut cov = 0.0;
        for p in 0..a.data.len() {
            va += (a.data[p] - mu_a) * (a.data[p] - mu_a);
            vb += (b.data[p] - mu_b) * (b.data[p] - mu_b);
            cov += (a.data[p] - mu_a) * (b.data[p] - mu_b);
        }
        va /= n;
        vb /= n;
        cov /= n;
        return Ok(ssim_term(mu_a, mu_b, va, vb, cov, c1, c2));
    }
    let w = gaussian_window();
    let half = SSIM_WINDOW / 2;
    let mut acc = 0.0;
    let mut count = 0usize;
    for ci in half..ny - half {
        for cj in half..nx - half {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            let mut saa = 0.0;
            let mut sbb = 0.0;
            let mut sab = 0.0;
            for (wi, row) in w.iter().enumerate() {
                let i = ci + wi - half;
                for (wj, &wv) in row.iter().enumerate() {
                    let j = cj + wj - half;
                    let av = a.at(i, j);
                    let bv = b.at(i, j);
                    mu_a += wv * av;
                    mu_b += wv * bv;
                    saa += wv * av * av;
                    sbb += wv * bv * bv;
                    sab += wv * av * bv;
                }
            }
            let va = saa - mu_a * mu_a;
            let vb = sbb - mu_b * mu_b;
            let cov = sab - mu_a * mu_b;
            acc += ssim_term(mu_a, mu_b, va, vb, cov, c1, c2);
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Mean squared gradient error over interior pixels:
/// the squared Euclidean norm of the per-pixel gradient difference, with
/// derivatives computed under the requested mode.
pub fn msge(u_gt: &Field2D, u_sr: &Field2D, mode: DerivativeMode, bc: BoundaryKind) -> Result<f64> {
    check_same_shape(u_gt, u_sr)?;
    let pad_gt = (bc == BoundaryKind::Dirichlet).then_some(u_gt);
    let pad_sr = (bc == BoundaryKind::Dirichlet).then_some(u_sr);
    let gx_gt = stencils::ddx(u_gt, mode, bc, pad_gt)?;
    let gy_gt = stencils::ddy(u_gt, mode, bc, pad_gt)?;
    let gx_sr = stencils::ddx(u_sr, mode, bc, pad_sr)?;
    let gy_sr = stencils::ddy(u_sr, mode, bc, pad_sr)?;
    let (nx, ny) = (u_gt.grid.nx, u_gt.grid.ny);
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 1..ny - 1 {
        for j in 1..nx - 1 {
            let ex = gx_gt.at(i, j) - gx_sr.at(i, j);
            let ey = gy_gt.at(i, j) - gy_sr.at(i, j);
            acc += ex * ex + ey * ey;
            count += 1;
        }
    }
    Ok(acc / count as f64)
}

/// Gradient signal-to-noise ratio:
/// `10*log10(MAXG / MSGE)` with `MAXG = (max_i / h)^2`; +inf when the
/// gradients coincide.
pub fn gsnr(
    u_gt: &Field2D,
    u_sr: &Field2D,
    range: DynamicRange,
    h: f64,
    mode: DerivativeMode,
    bc: BoundaryKind,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid spacing must be positive, got {h}"
        )));
    }
    let m = msge(u_gt, u_sr, mode, bc)?;
    let maxg = (range.max_i / h) * (range.max_i / h);
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (maxg / m).log10())
}

/// Convenience bundle; requires hx == hy (GSNR is direction-agnostic on
/// square grids only).
pub fn evaluate_all(
    u_gt: &Field2D,
    u_sr: &Field2D,
    range: DynamicRange,
    mode: DerivativeMode,
    bc: BoundaryKind,
) -> Result<MetricReport> {
    let g = u_gt.grid;
    if (g.hx - g.hy).abs() > 1e-15 * g.hx.max(1.0) {
        return Err(Error::AnisotropicGrid { hx: g.hx, hy: g.hy });
    }
    Ok(MetricReport {
        mse: mse(u_gt, u_sr)?,
        psnr_db: psnr(u_gt, u_sr, range.max_i)?,
        ssim: ssim(u_gt, u_sr, range.max_i)?,
        msge: msge(u_gt, u_sr, mode, bc)?,
        gsnr_db: gsnr(u_gt, u_sr, range, g.hx, mode, bc)?,
    })
}
