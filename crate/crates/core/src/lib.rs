//! Physics-consistent super-resolution toolkit for transient PDE simulations.
//!
//! The crate couples a finite-difference solver for two model problems
//! (Allen-Cahn phase field, Eriksson-Johnson convection-diffusion-reaction)
//! with the machinery needed to score and reconstruct super-resolved
//! solution fields:
//!
//! - [`grid`] — scalar fields on regular 2-D grids and elementary field algebra.
//! - [`stencils`] — 3x3 convolution with boundary-aware padding, derivative
//!   kernels, and least-squares coefficient calibration.
//! - [`physics`] — the spatial operators of both problems plus the analytic
//!   Eriksson-Johnson initial/boundary data.
//! - [`integrators`] — multistep residual forms (BDF2, Crank-Nicolson,
//!   explicit Euler), characteristic-polynomial analysis, and the implicit
//!   BDF2 time stepper.
//! - [`datagen`] — paired coarse/fine time-series generation, a binary
//!   snapshot format, and the dataset manifest.
//! - [`losses`] — pixel, physics-inner, and physics-boundary losses with
//!   composite weighting.
//! - [`metrics`] — MSE/PSNR/SSIM plus gradient-fidelity metrics (MSGE, GSNR).
//! - [`sr`] — variational super-resolution by direct optimization with
//!   analytic gradients.
//! - [`surrogate`] — the solver-restart experiment comparing upsampling
//!   strategies as surrogate initializers.

pub mod datagen;
pub mod error;
pub mod grid;
pub mod integrators;
pub mod losses;
pub mod metrics;
pub mod pgm;
pub mod physics;
pub mod sr;
pub mod stencils;
pub mod surrogate;

pub use error::{Error, Result};
pub use grid::{BoundaryKind, DomainExtent, Field2D, GridSpec, Problem, ProblemSpec, Side};
