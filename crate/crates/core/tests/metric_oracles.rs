//! Independent direct-formula oracles for the quality metrics.
//!
//! Every oracle below re-implements its metric from the definition with
//! plain per-window/per-pixel loops, sharing no code with the library path.

use pc_resolve::grid::{BoundaryKind, Field2D, GridSpec};
use pc_resolve::metrics::{gsnr, mse, msge, psnr, ssim, DynamicRange};
use pc_resolve::stencils::DerivativeMode;

fn pseudo_random(n: usize, seed: u64, amp: f64) -> Field2D {
    let g = GridSpec::unit_square(n).unwrap();
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
    let data = (0..g.len())
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            amp * (2.0 * (state >> 11) as f64 / (1u64 << 53) as f64 - 1.0)
        })
        .collect();
    Field2D::new(g, data).unwrap()
}

fn oracle_mse(a: &Field2D, b: &Field2D) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.ny() {
        for j in 0..a.nx() {
            let d = a.at(i, j) - b.at(i, j);
            acc += d * d;
        }
    }
    acc / (a.nx() * a.ny()) as f64
}

fn oracle_psnr(a: &Field2D, b: &Field2D, range: f64) -> f64 {
    10.0 * (range * range / oracle_mse(a, b)).log10()
}

/// Naive windowed SSIM: explicit Gaussian weights, one window at a time.
fn oracle_ssim(a: &Field2D, b: &Field2D, range: f64) -> f64 {
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let n = a.nx();
    if n >= 11 {
        let mut weights = vec![vec![0.0f64; 11]; 11];
        let mut total = 0.0;
        for (wi, row) in weights.iter_mut().enumerate() {
            for (wj, w) in row.iter_mut().enumerate() {
                let di = wi as f64 - 5.0;
                let dj = wj as f64 - 5.0;
                *w = (-(di * di + dj * dj) / 4.5).exp();
                total += *w;
            }
        }
        for row in &mut weights {
            for w in row {
                *w /= total;
            }
        }
        let mut acc = 0.0;
        let mut windows = 0usize;
        for ci in 5..a.ny() - 5 {
            for cj in 5..n - 5 {
                let mut ma = 0.0;
                let mut mb = 0.0;
                for wi in 0..11 {
                    for wj in 0..11 {
                        ma += weights[wi][wj] * a.at(ci + wi - 5, cj + wj - 5);
                        mb += weights[wi][wj] * b.at(ci + wi - 5, cj + wj - 5);
                    }
                }
                let mut va = 0.0;
                let mut vb = 0.0;
                let mut cov = 0.0;
                for wi in 0..11 {
                    for wj in 0..11 {
                        let da = a.at(ci + wi - 5, cj + wj - 5) - ma;
                        let db = b.at(ci + wi - 5, cj + wj - 5) - mb;
                        va += weights[wi][wj] * da * da;
                        vb += weights[wi][wj] * db * db;
                        cov += weights[wi][wj] * da * db;
                    }
                }
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                windows += 1;
            }
        }
        acc / windows as f64
    } else {
        let count = (a.nx() * a.ny()) as f64;
        let ma = a.data.iter().sum::<f64>() / count;
        let mb = b.data.iter().sum::<f64>() / count;
        let mut va = 0.0;
        let mut vb = 0.0;
        let mut cov = 0.0;
        for p in 0..a.data.len() {
            va += (a.data[p] - ma).powi(2);
            vb += (b.data[p] - mb).powi(2);
            cov += (a.data[p] - ma) * (b.data[p] - mb);
        }
        va /= count;
        vb /= count;
        cov /= count;
        ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
    }
}

/// Naive MSGE with explicit periodic central differences over the interior.
fn oracle_msge(gt: &Field2D, sr: &Field2D) -> f64 {
    let n = gt.nx();
    let h = gt.grid.hx;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 1..gt.ny() - 1 {
        for j in 1..n - 1 {
            let dgx = (gt.at(i, j + 1) - gt.at(i, j - 1)) / (2.0 * h);
            let dsx = (sr.at(i, j + 1) - sr.at(i, j - 1)) / (2.0 * h);
            let dgy = (gt.at(i - 1, j) - gt.at(i + 1, j)) / (2.0 * h);
            let dsy = (sr.at(i - 1, j) - sr.at(i + 1, j)) / (2.0 * h);
            acc += (dgx - dsx).powi(2) + (dgy - dsy).powi(2);
            count += 1;
        }
    }
    acc / count as f64
}

#[test]
fn metrics_agree_with_oracles_on_random_pairs() {
    for seed in 0..8u64 {
        let a = pseudo_random(16, 2 * seed + 1, 0.9);
        let b = pseudo_random(16, 2 * seed + 2, 0.9);

        let rel = |x: f64, y: f64| (x - y).abs() / y.abs().max(1e-30);
        assert!(rel(mse(&a, &b).unwrap(), oracle_mse(&a, &b)) < 1e-9);
        assert!(rel(psnr(&a, &b, 2.0).unwrap(), oracle_psnr(&a, &b, 2.0)) < 1e-9);
        assert!(
            rel(ssim(&a, &b, 2.0).unwrap(), oracle_ssim(&a, &b, 2.0)) < 1e-9,
            "ssim mismatch at seed {seed}"
        );
        assert!(
            rel(
                msge(&a, &b, DerivativeMode::StandardFD, BoundaryKind::Periodic).unwrap(),
                oracle_msge(&a, &b)
            ) < 1e-9
        );
    }
}

#[test]
fn ssim_windowed_path_matches_oracle() {
    let a = pseudo_random(24, 91, 0.8);
    let b = pseudo_random(24, 92, 0.8);
    let lib = ssim(&a, &b, 2.0).unwrap();
    let ora = oracle_ssim(&a, &b, 2.0);
    assert!(
        (lib - ora).abs() / ora.abs().max(1e-30) < 1e-9,
        "{lib} vs {ora}"
    );
}

#[test]
fn gsnr_decomposition_identity() {
    let a = pseudo_random(16, 5, 0.7);
    let b = pseudo_random(16, 6, 0.7);
    let range = DynamicRange { max_i: 2.0 };
    let h = a.grid.hx;
    let g = gsnr(
        &a,
        &b,
        range,
        h,
        DerivativeMode::StandardFD,
        BoundaryKind::Periodic,
    )
    .unwrap();
    let m = msge(&a, &b, DerivativeMode::StandardFD, BoundaryKind::Periodic).unwrap();
    let maxg = (range.max_i / h) * (range.max_i / h);
    assert!((g - (10.0 * maxg.log10() - 10.0 * m.log10())).abs() <= 1e-12);
}
