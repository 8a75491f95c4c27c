//! Fundamental grid and field types shared by every other module.
//!
//! Storage convention: fields are row-major with index `(i, j)` where `i` is
//! the row counted from the top and `j` the column counted from the left.
//! Pixel `(i, j)` sits at the physical point
//! `(x0 + j*hx, y0 + (ny-1-i)*hy)`, i.e. the image convention with the
//! y-axis pointing up. All arithmetic is 64-bit; 32-bit floats appear only
//! at file I/O boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regular 2-D grid: dimensions, spacing, and lower-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of columns.
    pub nx: usize,
    /// Number of rows.
    pub ny: usize,
    /// Grid spacing in x (domain units).
    pub hx: f64,
    /// Grid spacing in y.
    pub hy: f64,
    /// Physical x of the leftmost column.
    pub x0: f64,
    /// Physical y of the bottom row.
    pub y0: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64, x0: f64, y0: f64) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3x3 points, got {nx}x{ny}"
            )));
        }
        if !(hx > 0.0) || !(hy > 0.0) || !hx.is_finite() || !hy.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "spacings must be finite and positive, got hx={hx} hy={hy}"
            )));
        }
        Ok(Self {
            nx,
            ny,
            hx,
            hy,
            x0,
            y0,
        })
    }

    /// Square nxn grid with spacing 1/n on the unit square.
    pub fn unit_square(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0 / n as f64, 1.0 / n as f64, 0.0, 0.0)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Physical coordinates of pixel (i, j).
    pub fn xy(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.x0 + j as f64 * self.hx,
            self.y0 + (self.ny - 1 - i) as f64 * self.hy,
        )
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// Which side of the grid a boundary vector is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Top, Side::Bottom];
}

/// Boundary condition kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
    Periodic,
}

impl BoundaryKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryKind::Dirichlet => "dirichlet",
            BoundaryKind::Neumann => "neumann",
            BoundaryKind::Periodic => "periodic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(BoundaryKind::Dirichlet),
            "neumann" => Ok(BoundaryKind::Neumann),
            "periodic" => Ok(BoundaryKind::Periodic),
            other => Err(Error::InvalidArgument(format!(
                "unknown boundary kind '{other}'"
            ))),
        }
    }
}

/// Single-channel scalar field on a regular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D {
    pub grid: GridSpec,
    /// Row-major values, length nx*ny.
    pub data: Vec<f64>,
}

impl Field2D {
    pub fn new(grid: GridSpec, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "data length {} does not match {}x{} grid",
                data.len(),
                grid.nx,
                grid.ny
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self { grid, data })
    }

    /// Field with every entry equal to `c`.
    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            data: vec![c; grid.len()],
        }
    }

    /// Field sampled from a function of physical coordinates.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for i in 0..grid.ny {
            for j in 0..grid.nx {
                let (x, y) = grid.xy(i, j);
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.grid.nx + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.grid.nx + j]
    }

    pub fn nx(&self) -> usize {
        self.grid.nx
    }

    pub fn ny(&self) -> usize {
        self.grid.ny
    }

    /// Max over pixels of |a - b|.
    pub fn linf_diff(&self, other: &Field2D) -> Result<f64> {
        check_same_shape(self, other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Root-mean-square difference over all pixels.
    pub fn rms_diff(&self, other: &Field2D) -> Result<f64> {
        check_same_shape(self, other)?;
        let n = self.data.len() as f64;
        let ss: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        Ok((ss / n).sqrt())
    }

    /// Boundary vector at `offset` pixels inward from `side`.
    ///
    /// Ordering is fixed: top-to-bottom for left/right, left-to-right for
    /// top/bottom. `offset` must stay below min(nx, ny)/2.
    pub fn boundary(&self, side: Side, offset: usize) -> Result<Vec<f64>> {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        if offset >= nx.min(ny) / 2 {
            return Err(Error::OffsetOutOfRange { offset, nx, ny });
        }
        let v = match side {
            Side::Left => (0..ny).map(|i| self.at(i, offset)).collect(),
            Side::Right => (0..ny).map(|i| self.at(i, nx - 1 - offset)).collect(),
            Side::Top => (0..nx).map(|j| self.at(offset, j)).collect(),
            Side::Bottom => (0..nx).map(|j| self.at(ny - 1 - offset, j)).collect(),
        };
        Ok(v)
    }

    /// Pointwise in-place combination: self[i] = f(self[i], other[i]).
    pub fn zip_apply(&mut self, other: &Field2D, f: impl Fn(f64, f64) -> f64) -> Result<()> {
        check_same_shape(self, other)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = f(*a, *b);
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            grid: self.grid,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn clamp_values(&mut self, lo: f64, hi: f64) {
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
    }
}

pub fn check_same_shape(a: &Field2D, b: &Field2D) -> Result<()> {
    if !a.grid.same_shape(&b.grid) {
        return Err(Error::ShapeMismatch(
            a.grid.nx, a.grid.ny, b.grid.nx, b.grid.ny,
        ));
    }
    Ok(())
}

/// Physical extents of the rectangular domain a grid discretises.
///
/// An n-point axis spans `[origin, origin + extent)` with spacing
/// `extent / n`, so periodic grids tile the domain exactly and coarse grids
/// obtained by integer subsampling stay node-aligned with fine ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainExtent {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
}

impl DomainExtent {
    pub fn grid(&self, nx: usize, ny: usize) -> Result<GridSpec> {
        GridSpec::new(
            nx,
            ny,
            self.width / nx as f64,
            self.height / ny as f64,
            self.x0,
            self.y0,
        )
    }
}

/// Which PDE a dataset or loss evaluation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    AllenCahn,
    ErikssonJohnson,
}

impl Problem {
    pub fn as_str(&self) -> &'static str {
        match self {
            Problem::AllenCahn => "allen-cahn",
            Problem::ErikssonJohnson => "eriksson-johnson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "allen-cahn" => Ok(Problem::AllenCahn),
            "eriksson-johnson" => Ok(Problem::ErikssonJohnson),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }

    /// Canonical physical domain of each benchmark.
    pub fn default_domain(&self) -> DomainExtent {
        match self {
            Problem::AllenCahn => DomainExtent {
                x0: 0.0,
                y0: 0.0,
                width: 1.0,
                height: 1.0,
            },
            Problem::ErikssonJohnson => DomainExtent {
                x0: -1.0,
                y0: -0.5,
                width: 1.0,
                height: 1.0,
            },
        }
    }
}

/// Which PDE plus its physical parameters, boundary kind, and domain.
///
/// `theta` is the advection direction (radians) for Eriksson-Johnson and the
/// temperature factor multiplying the logarithmic reaction term for
/// Allen-Cahn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub problem: Problem,
    pub epsilon: f64,
    pub k: f64,
    /// Advection speed (Eriksson-Johnson only; ignored for Allen-Cahn).
    pub r: f64,
    pub theta: f64,
    pub boundary: BoundaryKind,
    pub domain: DomainExtent,
}

impl ProblemSpec {
    pub fn new(
        problem: Problem,
        epsilon: f64,
        k: f64,
        r: f64,
        theta: f64,
        boundary: BoundaryKind,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        match problem {
            Problem::AllenCahn => {
                if boundary == BoundaryKind::Dirichlet {
                    return Err(Error::InvalidArgument(
                        "Allen-Cahn supports Neumann or Periodic boundaries only".into(),
                    ));
                }
            }
            Problem::ErikssonJohnson => {
                if boundary != BoundaryKind::Dirichlet {
                    return Err(Error::InvalidArgument(
                        "Eriksson-Johnson requires Dirichlet boundaries".into(),
                    ));
                }
            }
        }
        Ok(Self {
            problem,
            epsilon,
            k,
            r,
            theta,
            boundary,
            domain: problem.default_domain(),
        })
    }

    /// Grid of n x n points covering this problem's domain.
    pub fn grid(&self, n: usize) -> Result<GridSpec> {
        self.domain.grid(n, n)
    }
}
