//! Pixel loss, physics inner loss, physics boundary loss, and the composite
//! weighting restricted to its non-adversarial terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_same_shape, BoundaryKind, Field2D, Problem, ProblemSpec, Side};
use crate::integrators::{self, Scheme};
use crate::stencils::DerivativeMode;

/// Weights of the composite loss. `w2` and `w3` (content and adversarial
/// terms) are carried for completeness but never used here: both require
/// networks that are out of scope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
    pub w4: f64,
    pub w5: f64,
}

impl LossWeights {
    /// Reference weights for Allen-Cahn runs.
    pub fn allen_cahn() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            w3: 1e-3,
            w4: 1e-8,
            w5: 5.0,
        }
    }

    /// Reference weights for Eriksson-Johnson runs.
    pub fn eriksson_johnson() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            w3: 1e-3,
            w4: 1e-2,
            w5: 100.0,
        }
    }

    pub fn for_problem(problem: Problem) -> Self {
        match problem {
            Problem::AllenCahn => Self::allen_cahn(),
            Problem::ErikssonJohnson => Self::eriksson_johnson(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1 < 0.0 || self.w4 < 0.0 || self.w5 < 0.0 {
            return Err(Error::InvalidArgument(
                "loss weights must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-term loss values before weighting, plus the weighted composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub pixel: f64,
    pub inner: f64,
    pub boundary: f64,
    pub composite: f64,
}

/// Mean over all pixels of (u_sr - u_gt)^2.
pub fn pixel_loss(u_sr: &Field2D, u_gt: &Field2D) -> Result<f64> {
    check_same_shape(u_sr, u_gt)?;
    let n = u_sr.data.len() as f64;
    Ok(u_sr
        .data
        .iter()
        .zip(&u_gt.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / n)
}

/// Mean over interior pixels (one-pixel border excluded) of the squared
/// residual of the chosen scheme. `history` is ground truth, newest-first.
pub fn physics_inner_loss(
    u_sr_n: &Field2D,
    history: &[&Field2D],
    tau: f64,
    spec: &ProblemSpec,
    scheme: Scheme,
    mode: DerivativeMode,
) -> Result<f64> {
    let r = integrators::residual(scheme, u_sr_n, history, tau, spec, mode)?;
    Ok(integrators::interior_mean_square(&r))
}

fn mse_vec(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n
}

/// Boundary-condition violation, reduced by MSE over each boundary vector.
///
/// Dirichlet compares every side of `u_sr` against `u_gt`; Periodic compares
/// opposite sides of `u_sr` with each other; Neumann compares each side of
/// `u_sr` with the pixels one cell inward. Corner pixels belong to two sides
/// and are counted once per side.
pub fn physics_boundary_loss(
    u_sr: &Field2D,
    u_gt: Option<&Field2D>,
    bc: BoundaryKind,
) -> Result<f64> {
    match bc {
        BoundaryKind::Dirichlet => {
            let gt = u_gt.ok_or(Error::InvalidArgument(
                "Dirichlet boundary loss needs the reference field".into(),
            ))?;
            check_same_shape(u_sr, gt)?;
            let mut acc = 0.0;
            for side in Side::ALL {
                acc += mse_vec(&u_sr.boundary(side, 0)?, &gt.boundary(side, 0)?);
            }
            Ok(acc)
        }
        BoundaryKind::Periodic => {
            let lr = mse_vec(
                &u_sr.boundary(Side::Left, 0)?,
                &u_sr.boundary(Side::Right, 0)?,
            );
            let tb = mse_vec(
                &u_sr.boundary(Side::Top, 0)?,
                &u_sr.boundary(Side::Bottom, 0)?,
            );
            Ok(lr + tb)
        }
        BoundaryKind::Neumann => {
            let mut acc = 0.0;
            for side in Side::ALL {
                acc += mse_vec(&u_sr.boundary(side, 0)?, &u_sr.boundary(side, 1)?);
            }
            Ok(acc)
        }
    }
}

/// Evaluate all terms and the weighted composite
/// `w1*pixel + w4*inner + w5*boundary`.
#[allow(clippy::too_many_arguments)]
pub fn composite_loss(
    u_sr: &Field2D,
    u_gt: &Field2D,
    history: &[&Field2D],
    tau: f64,
    spec: &ProblemSpec,
    scheme: Scheme,
    weights: &LossWeights,
    mode: DerivativeMode,
) -> Result<LossReport> {
    weights.validate()?;
    let pixel = pixel_loss(u_sr, u_gt)?;
    let inner = physics_inner_loss(u_sr, history, tau, spec, scheme, mode)?;
    let gt_for_bc = (spec.boundary == BoundaryKind::Dirichlet).then_some(u_gt);
    let boundary = physics_boundary_loss(u_sr, gt_for_bc, spec.boundary)?;
    Ok(LossReport {
        pixel,
        inner,
        boundary,
        composite: weights.w1 * pixel + weights.w4 * inner + weights.w5 * boundary,
    })
}
