//! 3x3 convolution with boundary-aware padding, derivative kernels, and the
//! least-squares coefficient calibration procedure.
//!
//! Convention: `apply_kernel` computes a discrete cross-correlation (no
//! kernel flip). The fixed derivative kernels are symmetric or antisymmetric,
//! so only sign-sensitive tests depend on this choice.

use crate::error::{Error, Result};
use crate::grid::{check_same_shape, BoundaryKind, Field2D, GridSpec};

/// 3x3 weight pattern with a scalar multiplier applied to the result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel3x3 {
    pub k: [[f64; 3]; 3],
    pub scale: f64,
}

impl Kernel3x3 {
    pub fn new(k: [[f64; 3]; 3], scale: f64) -> Self {
        Self { k, scale }
    }

    pub fn entry_sum(&self) -> f64 {
        self.k.iter().flatten().sum()
    }

    /// 180-degree rotation; the adjoint of cross-correlation with zero padding.
    pub fn rotated(&self) -> Kernel3x3 {
        let mut k = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                k[i][j] = self.k[2 - i][2 - j];
            }
        }
        Kernel3x3 {
            k,
            scale: self.scale,
        }
    }
}

/// How spatial derivatives are discretised.
///
/// `Calibrated64` uses the fixed empirical 3x3 kernels calibrated for 64x64
/// grids and refuses other sizes. `StandardFD` uses textbook central
/// differences scaled by the grid spacing and works on any grid; the solver
/// and all oracle checks use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    Calibrated64,
    StandardFD,
}

impl DerivativeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DerivativeMode::Calibrated64 => "calibrated-64",
            DerivativeMode::StandardFD => "standard-fd",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "calibrated-64" => Ok(DerivativeMode::Calibrated64),
            "standard-fd" => Ok(DerivativeMode::StandardFD),
            other => Err(Error::InvalidArgument(format!(
                "unknown derivative mode '{other}'"
            ))),
        }
    }
}

/// Empirical Laplacian kernel for 64x64 grids.
pub fn calibrated_laplacian_kernel() -> Kernel3x3 {
    Kernel3x3::new([[0.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 0.0]], 9.894)
}

/// Empirical x-derivative kernel for 64x64 grids.
pub fn calibrated_ddx_kernel() -> Kernel3x3 {
    Kernel3x3::new(
        [[1.0, 0.0, -1.0], [3.5887, 0.0, -3.5887], [1.0, 0.0, -1.0]],
        -5.645,
    )
}

/// Empirical y-derivative kernel for 64x64 grids (y increasing upward).
pub fn calibrated_ddy_kernel() -> Kernel3x3 {
    Kernel3x3::new(
        [[1.0, 3.5887, 1.0], [0.0, 0.0, 0.0], [-1.0, -3.5887, -1.0]],
        -5.645,
    )
}

fn standard_laplacian_kernel(h: f64) -> Kernel3x3 {
    Kernel3x3::new(
        [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]],
        1.0 / (h * h),
    )
}

fn standard_ddx_kernel(hx: f64) -> Kernel3x3 {
    Kernel3x3::new(
        [[0.0, 0.0, 0.0], [-1.0, 0.0, 1.0], [0.0, 0.0, 0.0]],
        1.0 / (2.0 * hx),
    )
}

/// Central difference in y. Row i-1 lies above row i, so it carries the +1.
fn standard_ddy_kernel(hy: f64) -> Kernel3x3 {
    Kernel3x3::new(
        [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [0.0, -1.0, 0.0]],
        1.0 / (2.0 * hy),
    )
}

/// Resolve the padded value at (i, j) where either index may be one cell
/// outside the grid.
#[inline]
fn padded_value(f: &Field2D, pad: Option<&Field2D>, bc: BoundaryKind, i: isize, j: isize) -> f64 {
    let nx = f.grid.nx as isize;
    let ny = f.grid.ny as isize;
    let inside = i >= 0 && i < ny && j >= 0 && j < nx;
    if inside {
        return f.at(i as usize, j as usize);
    }
    match bc {
        BoundaryKind::Periodic => {
            let ii = i.rem_euclid(ny) as usize;
            let jj = j.rem_euclid(nx) as usize;
            f.at(ii, jj)
        }
        BoundaryKind::Neumann => {
            // mirror about the boundary node: ghost(-1) = f(1)
            let ii = if i < 0 {
                (-i) as usize
            } else if i >= ny {
                (2 * (ny - 1) - i) as usize
            } else {
                i as usize
            };
            let jj = if j < 0 {
                (-j) as usize
            } else if j >= nx {
                (2 * (nx - 1) - j) as usize
            } else {
                j as usize
            };
            f.at(ii, jj)
        }
        BoundaryKind::Dirichlet => {
            // ghost cells replicate the prescribed boundary trace
            let p = pad.expect("checked before dispatch");
            let ii = i.clamp(0, ny - 1) as usize;
            let jj = j.clamp(0, nx - 1) as usize;
            p.at(ii, jj)
        }
    }
}

/// Cross-correlate `f` with a 3x3 kernel under the given boundary padding.
///
/// Dirichlet padding takes ghost values from the edge of `dirichlet_pad`
/// (one-cell halo, zeroth-order extrapolation of the prescribed trace).
pub fn apply_kernel(
    f: &Field2D,
    kern: &Kernel3x3,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    if nx < 3 || ny < 3 {
        return Err(Error::FieldTooSmall { need: 3, nx, ny });
    }
    if bc == BoundaryKind::Dirichlet {
        match dirichlet_pad {
            None => return Err(Error::MissingDirichletPad),
            Some(p) => check_same_shape(f, p)?,
        }
    }
    let mut out = vec![0.0; nx * ny];
    // interior: no padding lookups
    for i in 1..ny - 1 {
        for j in 1..nx - 1 {
            let mut acc = 0.0;
            for di in 0..3 {
                let row = (i + di - 1) * nx;
                let krow = &kern.k[di];
                acc += krow[0] * f.data[row + j - 1]
                    + krow[1] * f.data[row + j]
                    + krow[2] * f.data[row + j + 1];
            }
            out[i * nx + j] = kern.scale * acc;
        }
    }
    // border rows/columns go through the padding rules
    let edge = |i: usize, j: usize, out: &mut Vec<f64>| {
        let mut acc = 0.0;
        for di in -1..=1isize {
            for dj in -1..=1isize {
                let w = kern.k[(di + 1) as usize][(dj + 1) as usize];
                if w != 0.0 {
                    acc += w * padded_value(f, dirichlet_pad, bc, i as isize + di, j as isize + dj);
                }
            }
        }
        out[i * nx + j] = kern.scale * acc;
    };
    for j in 0..nx {
        edge(0, j, &mut out);
        edge(ny - 1, j, &mut out);
    }
    for i in 1..ny - 1 {
        edge(i, 0, &mut out);
        edge(i, nx - 1, &mut out);
    }
    Ok(Field2D {
        grid: f.grid,
        data: out,
    })
}

/// Cross-correlation with zero ghost values everywhere outside the grid.
///
/// This is the building block of operator adjoints: correlating an
/// interior-masked field with `kern.rotated()` under zero padding applies
/// the transpose of the interior stencil map.
pub fn apply_kernel_zero_pad(f: &Field2D, kern: &Kernel3x3) -> Result<Field2D> {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    if nx < 3 || ny < 3 {
        return Err(Error::FieldTooSmall { need: 3, nx, ny });
    }
    let mut out = vec![0.0; nx * ny];
    for i in 0..ny {
        for j in 0..nx {
            let mut acc = 0.0;
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let ii = i as isize + di;
                    let jj = j as isize + dj;
                    if ii >= 0 && ii < ny as isize && jj >= 0 && jj < nx as isize {
                        acc += kern.k[(di + 1) as usize][(dj + 1) as usize]
                            * f.data[ii as usize * nx + jj as usize];
                    }
                }
            }
            out[i * nx + j] = kern.scale * acc;
        }
    }
    Ok(Field2D {
        grid: f.grid,
        data: out,
    })
}

fn require_square_spacing(grid: &GridSpec) -> Result<f64> {
    if (grid.hx - grid.hy).abs() > 1e-15 * grid.hx.abs().max(1.0) {
        return Err(Error::AnisotropicGrid {
            hx: grid.hx,
            hy: grid.hy,
        });
    }
    Ok(grid.hx)
}

fn require_calibrated_grid(grid: &GridSpec) -> Result<()> {
    if grid.nx != 64 || grid.ny != 64 {
        return Err(Error::CalibratedKernelGridSize {
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    Ok(())
}

/// 5-point Laplacian (N+S+E+W-4C)/h^2; requires hx == hy.
pub fn standard_laplacian(
    f: &Field2D,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    let h = require_square_spacing(&f.grid)?;
    apply_kernel(f, &standard_laplacian_kernel(h), bc, dirichlet_pad)
}

/// Laplacian under the requested derivative mode.
pub fn laplacian(
    f: &Field2D,
    mode: DerivativeMode,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    match mode {
        DerivativeMode::StandardFD => standard_laplacian(f, bc, dirichlet_pad),
        DerivativeMode::Calibrated64 => {
            require_calibrated_grid(&f.grid)?;
            apply_kernel(f, &calibrated_laplacian_kernel(), bc, dirichlet_pad)
        }
    }
}

/// d/dx under the requested derivative mode.
pub fn ddx(
    f: &Field2D,
    mode: DerivativeMode,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    match mode {
        DerivativeMode::StandardFD => {
            apply_kernel(f, &standard_ddx_kernel(f.grid.hx), bc, dirichlet_pad)
        }
        DerivativeMode::Calibrated64 => {
            require_calibrated_grid(&f.grid)?;
            apply_kernel(f, &calibrated_ddx_kernel(), bc, dirichlet_pad)
        }
    }
}

/// d/dy under the requested derivative mode.
pub fn ddy(
    f: &Field2D,
    mode: DerivativeMode,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    match mode {
        DerivativeMode::StandardFD => {
            apply_kernel(f, &standard_ddy_kernel(f.grid.hy), bc, dirichlet_pad)
        }
        DerivativeMode::Calibrated64 => {
            require_calibrated_grid(&f.grid)?;
            apply_kernel(f, &calibrated_ddy_kernel(), bc, dirichlet_pad)
        }
    }
}

/// The kernels the given mode uses for (laplacian, ddx, ddy) on this grid.
pub fn mode_kernels(
    grid: &GridSpec,
    mode: DerivativeMode,
) -> Result<(Kernel3x3, Kernel3x3, Kernel3x3)> {
    match mode {
        DerivativeMode::StandardFD => {
            let h = require_square_spacing(grid)?;
            Ok((
                standard_laplacian_kernel(h),
                standard_ddx_kernel(grid.hx),
                standard_ddy_kernel(grid.hy),
            ))
        }
        DerivativeMode::Calibrated64 => {
            require_calibrated_grid(grid)?;
            Ok((
                calibrated_laplacian_kernel(),
                calibrated_ddx_kernel(),
                calibrated_ddy_kernel(),
            ))
        }
    }
}

/// One (input field, target operator values) pair used by
/// [`calibrate_coefficient`].
pub type CalibrationSample = (Field2D, Field2D);

/// Least-squares scalar `c` minimising
/// sum over samples and interior pixels of `(c*conv(kern0, f) - target(f))^2`.
///
/// Evaluated on interior pixels only, so no padding rule is involved. The fit
/// is deterministic; an identically-zero convolution output is rejected.
pub fn calibrate_coefficient(kern0: &Kernel3x3, samples: &[CalibrationSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "calibration needs at least one sample".into(),
        ));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (field, target) in samples {
        check_same_shape(field, target)?;
        let (nx, ny) = (field.grid.nx, field.grid.ny);
        if nx < 8 || ny < 8 {
            return Err(Error::FieldTooSmall { need: 8, nx, ny });
        }
        // interior cross-correlation; padding never enters
        let conv = apply_kernel(field, kern0, BoundaryKind::Periodic, None)?;
        for i in 1..ny - 1 {
            for j in 1..nx - 1 {
                let c = conv.at(i, j);
                let t = target.at(i, j);
                num += c * t;
                den += c * c;
            }
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateFit);
    }
    Ok(num / den)
}
