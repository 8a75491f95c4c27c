//! Spatial operators of the two model problems, the interface constant, the
//! Helmholtz free-energy derivative, and the analytic Eriksson-Johnson
//! initial/boundary data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Field2D, GridSpec, Problem, ProblemSpec};
use crate::stencils::{self, DerivativeMode};

/// Which closed form of the interface constant to evaluate.
///
/// The two circulating forms differ in whether the 0.9 argument goes
/// through tanh or its inverse; the inverse-tanh form is the default
/// everywhere because it matches the interface-width derivation (the
/// transition layer from -0.9 to 0.9 spans m grid cells).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfaceVariant {
    Tanh,
    Atanh,
}

/// Interface constant of the Allen-Cahn reaction term; always positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfaceConstant {
    pub value: f64,
}

impl InterfaceConstant {
    pub fn from_variant(variant: InterfaceVariant) -> Self {
        Self {
            value: interface_constant(variant),
        }
    }
}

impl Default for InterfaceConstant {
    fn default() -> Self {
        Self::from_variant(InterfaceVariant::Atanh)
    }
}

/// Evaluate the interface constant: (h*m) / (2*sqrt(2)*g(0.9)) with h = 1/64,
/// m = 1, and g per the variant.
pub fn interface_constant(variant: InterfaceVariant) -> f64 {
    let h = 1.0 / 64.0;
    let g = match variant {
        InterfaceVariant::Tanh => 0.9f64.tanh(),
        InterfaceVariant::Atanh => 0.9f64.atanh(),
    };
    h / (2.0 * 2.0f64.sqrt() * g)
}

fn check_log_domain(u: &Field2D) -> Result<()> {
    if u.data.iter().any(|&v| v.abs() >= 1.0) {
        return Err(Error::Domain(
            "Allen-Cahn reaction needs |u| < 1 everywhere (log singularity)".into(),
        ));
    }
    Ok(())
}

/// Allen-Cahn spatial operator:
/// `-eps*L(u) + (0.5/E^2)*k*theta*ln((1+u)/(1-u)) - 1.2*u`
/// with `L` the Laplacian of the chosen derivative mode.
pub fn f_allen_cahn(
    u: &Field2D,
    eps: f64,
    k: f64,
    theta: f64,
    iface: InterfaceConstant,
    mode: DerivativeMode,
    bc: BoundaryKind,
) -> Result<Field2D> {
    if bc == BoundaryKind::Dirichlet {
        return Err(Error::InvalidArgument(
            "Allen-Cahn operator takes Neumann or Periodic boundaries".into(),
        ));
    }
    check_log_domain(u)?;
    let lap = stencils::laplacian(u, mode, bc, None)?;
    let c = 0.5 / (iface.value * iface.value) * k * theta;
    let mut out = lap.map(|v| -eps * v);
    out.zip_apply(u, |acc, uv| {
        acc + c * ((1.0 + uv) / (1.0 - uv)).ln() - 1.2 * uv
    })?;
    Ok(out)
}

/// Pointwise derivative of the Allen-Cahn reaction part with respect to u:
/// `(0.5/E^2)*k*theta*2/(1-u^2) - 1.2`.
pub fn allen_cahn_reaction_derivative(
    u: &Field2D,
    k: f64,
    theta: f64,
    iface: InterfaceConstant,
) -> Field2D {
    let c = 0.5 / (iface.value * iface.value) * k * theta;
    u.map(|v| c * 2.0 / (1.0 - v * v) - 1.2)
}

/// Eriksson-Johnson spatial operator:
/// `-eps*L(u) + r*cos(theta)*Dx(u) + r*sin(theta)*Dy(u) + k*u*(u-1)`.
///
/// Under Dirichlet boundaries a padding field must supply ghost values.
pub fn f_eriksson_johnson(
    u: &Field2D,
    eps: f64,
    k: f64,
    r: f64,
    theta: f64,
    mode: DerivativeMode,
    bc: BoundaryKind,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    if bc == BoundaryKind::Dirichlet && dirichlet_pad.is_none() {
        return Err(Error::MissingDirichletPad);
    }
    let lap = stencils::laplacian(u, mode, bc, dirichlet_pad)?;
    let dx = stencils::ddx(u, mode, bc, dirichlet_pad)?;
    let dy = stencils::ddy(u, mode, bc, dirichlet_pad)?;
    let (ct, st) = (theta.cos(), theta.sin());
    let mut out = Field2D::constant(u.grid, 0.0);
    for p in 0..out.data.len() {
        let uv = u.data[p];
        out.data[p] =
            -eps * lap.data[p] + r * ct * dx.data[p] + r * st * dy.data[p] + k * uv * (uv - 1.0);
    }
    Ok(out)
}

/// Pointwise derivative of the Eriksson-Johnson reaction with respect to u:
/// `k*(2u - 1)`.
pub fn eriksson_johnson_reaction_derivative(u: &Field2D, k: f64) -> Field2D {
    u.map(|v| k * (2.0 * v - 1.0))
}

/// Dispatch the spatial operator named by a ProblemSpec.
///
/// For Dirichlet problems the residual is only meaningful on interior pixels;
/// when no explicit pad is supplied the field itself provides ghost values.
pub fn spatial_operator(
    u: &Field2D,
    spec: &ProblemSpec,
    mode: DerivativeMode,
    dirichlet_pad: Option<&Field2D>,
) -> Result<Field2D> {
    match spec.problem {
        Problem::AllenCahn => f_allen_cahn(
            u,
            spec.epsilon,
            spec.k,
            spec.theta,
            InterfaceConstant::default(),
            mode,
            spec.boundary,
        ),
        Problem::ErikssonJohnson => f_eriksson_johnson(
            u,
            spec.epsilon,
            spec.k,
            spec.r,
            spec.theta,
            mode,
            spec.boundary,
            dirichlet_pad.or(Some(u)),
        ),
    }
}

/// Pointwise derivative of the reaction part of the dispatched operator.
pub fn reaction_derivative(u: &Field2D, spec: &ProblemSpec) -> Field2D {
    match spec.problem {
        Problem::AllenCahn => {
            allen_cahn_reaction_derivative(u, spec.k, spec.theta, InterfaceConstant::default())
        }
        Problem::ErikssonJohnson => eriksson_johnson_reaction_derivative(u, spec.k),
    }
}

/// Derivative of the Helmholtz free-energy density:
/// `(1/(2T))*ln((1+phi)/(1-phi)) - Tc*phi`.
pub fn helmholtz_dphi(phi: f64, t: f64, tc: f64) -> Result<f64> {
    if phi.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "free-energy derivative needs |phi| < 1, got {phi}"
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {t}"
        )));
    }
    Ok(((1.0 + phi) / (1.0 - phi)).ln() / (2.0 * t) - tc * phi)
}

/// Closed-form exponents of the analytic Eriksson-Johnson data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EJAnalyticParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// lambda_{1,2} = (-1 +- sqrt(1 - 4*eps*l)) / (-2*eps),
/// delta_{1,2}  = ( 1 +- sqrt(1 + 4*pi^2*eps^2)) / (2*eps).
pub fn ej_analytic_params(eps: f64, l: f64) -> Result<EJAnalyticParams> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("eps must be positive, got {eps}")));
    }
    let disc = 1.0 - 4.0 * eps * l;
    if disc < 0.0 {
        return Err(Error::Domain(format!(
            "negative discriminant 1 - 4*eps*l = {disc}"
        )));
    }
    let sq = disc.sqrt();
    let pi = std::f64::consts::PI;
    let sd = (1.0 + 4.0 * pi * pi * eps * eps).sqrt();
    Ok(EJAnalyticParams {
        lambda1: (-1.0 + sq) / (-2.0 * eps),
        lambda2: (-1.0 - sq) / (-2.0 * eps),
        delta1: (1.0 + sd) / (2.0 * eps),
        delta2: (1.0 - sd) / (2.0 * eps),
    })
}

/// Time-dependent Dirichlet boundary data of the Eriksson-Johnson problem.
pub fn ej_boundary_value(x: f64, y: f64, t: f64, p: &EJAnalyticParams) -> f64 {
    let pi = std::f64::consts::PI;
    let transient = (-t).exp() * ((p.lambda1 * x).exp() - (p.lambda2 * x).exp());
    let steady = (pi * y).cos() * ((p.delta2 * x).exp() - (p.delta1 * x).exp())
        / ((-p.delta2).exp() - (-p.delta1).exp());
    transient + steady
}

/// Initial condition; coincides with the boundary data at t = 0.
pub fn ej_initial_value(x: f64, y: f64, p: &EJAnalyticParams) -> f64 {
    ej_boundary_value(x, y, 0.0, p)
}

/// Analytic data sampled on a whole grid at time t.
pub fn ej_field(grid: GridSpec, t: f64, p: &EJAnalyticParams) -> Field2D {
    Field2D::from_fn(grid, |x, y| ej_boundary_value(x, y, t, p))
}

/// Analytic parameters for a ProblemSpec; the reaction scaling l is taken
/// equal to K.
pub fn ej_params_for(spec: &ProblemSpec) -> Result<EJAnalyticParams> {
    ej_analytic_params(spec.epsilon, spec.k)
}
