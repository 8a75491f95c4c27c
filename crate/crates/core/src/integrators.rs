//! Multistep residual forms, characteristic-polynomial analysis, and the
//! implicit time stepper used for data generation.
//!
//! History arguments throughout this crate are ordered newest-first:
//! `history[0]` is the frame at n-1, `history[1]` the frame at n-2.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{check_same_shape, BoundaryKind, Field2D, Problem, ProblemSpec};
use crate::physics::{self, ej_params_for};
use crate::stencils::{self, DerivativeMode};

/// Newton termination: residual inf-norm below this, or failure.
pub const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_ITERS: usize = 50;
/// Iterates are kept this far away from the log singularity at |u| = 1.
const LOG_GUARD: f64 = 1e-3;

/// Time integrator identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bdf2,
    Cn,
    Ee,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Bdf2 => "bdf2",
            Scheme::Cn => "cn",
            Scheme::Ee => "ee",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bdf2" | "bdf" => Ok(Scheme::Bdf2),
            "cn" => Ok(Scheme::Cn),
            "ee" => Ok(Scheme::Ee),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }

    /// Number of history frames the residual form consumes.
    pub fn steps(&self) -> usize {
        SchemeSpec::for_scheme(*self).steps
    }
}

/// Multistep coefficients in the normal form
/// `sum_k alpha_k U_{n+k} + tau * sum_k beta_k F_{n+k} = 0`
/// with the leading coefficient alpha_s = 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeSpec {
    pub scheme: Scheme,
    pub steps: usize,
    /// alpha_0 .. alpha_s (ascending power of the shift).
    pub alphas: Vec<f64>,
    /// beta_0 .. beta_s.
    pub betas: Vec<f64>,
}

impl SchemeSpec {
    pub fn bdf2() -> Self {
        Self {
            scheme: Scheme::Bdf2,
            steps: 2,
            alphas: vec![1.0 / 3.0, -4.0 / 3.0, 1.0],
            betas: vec![0.0, 0.0, 2.0 / 3.0],
        }
    }

    pub fn cn() -> Self {
        Self {
            scheme: Scheme::Cn,
            steps: 1,
            alphas: vec![-1.0, 1.0],
            betas: vec![0.5, 0.5],
        }
    }

    /// Explicit Euler with the operator at the old state (beta_0 = 1).
    pub fn ee() -> Self {
        Self {
            scheme: Scheme::Ee,
            steps: 1,
            alphas: vec![-1.0, 1.0],
            betas: vec![1.0, 0.0],
        }
    }

    pub fn for_scheme(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Bdf2 => Self::bdf2(),
            Scheme::Cn => Self::cn(),
            Scheme::Ee => Self::ee(),
        }
    }

    /// rho(z) = sum_k alpha_k z^k.
    pub fn rho(&self, z: Complex64) -> Complex64 {
        horner(&self.alphas, z)
    }

    /// sigma(z) = sum_k beta_k z^k.
    pub fn sigma(&self, z: Complex64) -> Complex64 {
        horner(&self.betas, z)
    }
}

fn horner(coeffs: &[f64], z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        acc = acc * z + c;
    }
    acc
}

/// Spatial-discretisation and kernel-operator error scales of the
/// characteristic polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessPair {
    pub d: f64,
    pub dc: f64,
}

/// Characteristic polynomial
/// `pi(z) = (1 + tau*(D+Dc)*beta_s) z^s + sum_{k<s} (alpha_k + tau*(D+Dc)*beta_k) z^k`
/// which factors as `rho(z) + tau*(D+Dc)*sigma(z)`.
pub fn char_poly(spec: &SchemeSpec, tau: f64, stiff: StiffnessPair, z: Complex64) -> Complex64 {
    let d = tau * (stiff.d + stiff.dc);
    spec.rho(z) + d * spec.sigma(z)
}

/// Log-log slope of `|rho(e^tau) + tau*delta*sigma(e^tau)|` over
/// tau in [1e-4, 1e-1]; a scheme of order q yields a slope near q+1.
pub fn consistency_order(spec: &SchemeSpec, delta: f64) -> f64 {
    let taus: Vec<f64> = (0..7).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect();
    let mut xs = Vec::with_capacity(taus.len());
    let mut ys = Vec::with_capacity(taus.len());
    for &tau in &taus {
        let z = Complex64::new(tau.exp(), 0.0);
        let v = (spec.rho(z) + tau * delta * spec.sigma(z)).norm();
        xs.push(tau.ln());
        ys.push(v.ln());
    }
    least_squares_slope(&xs, &ys)
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// BDF2 residual
/// `(3/(2 tau)) (u_n - (4/3) u_{n-1} + (1/3) u_{n-2}) + f(u_n)`.
pub fn residual_bdf2(
    u_n: &Field2D,
    u_nm1: &Field2D,
    u_nm2: &Field2D,
    tau: f64,
    spec: &ProblemSpec,
    mode: DerivativeMode,
) -> Result<Field2D> {
    check_same_shape(u_n, u_nm1)?;
    check_same_shape(u_n, u_nm2)?;
    let mut out = physics::spatial_operator(u_n, spec, mode, None)?;
    let c = 1.5 / tau;
    for p in 0..out.data.len() {
        out.data[p] += c * (u_n.data[p] - 4.0 / 3.0 * u_nm1.data[p] + 1.0 / 3.0 * u_nm2.data[p]);
    }
    Ok(out)
}

/// Crank-Nicolson residual
/// `(1/tau)(u_n - u_{n-1}) + (f(u_n) + f(u_{n-1}))/2`.
pub fn residual_cn(
    u_n: &Field2D,
    u_nm1: &Field2D,
    tau: f64,
    spec: &ProblemSpec,
    mode: DerivativeMode,
) -> Result<Field2D> {
    check_same_shape(u_n, u_nm1)?;
    let f_n = physics::spatial_operator(u_n, spec, mode, None)?;
    let f_m = physics::spatial_operator(u_nm1, spec, mode, None)?;
    let mut out = Field2D::constant(u_n.grid, 0.0);
    for p in 0..out.data.len() {
        out.data[p] = (u_n.data[p] - u_nm1.data[p]) / tau + 0.5 * (f_n.data[p] + f_m.data[p]);
    }
    Ok(out)
}

/// Explicit-Euler residual
/// `(1/tau)(u_n - u_{n-1}) + f(u_{n-1})`; the operator sits at the old frame.
pub fn residual_ee(
    u_n: &Field2D,
    u_nm1: &Field2D,
    tau: f64,
    spec: &ProblemSpec,
    mode: DerivativeMode,
) -> Result<Field2D> {
    check_same_shape(u_n, u_nm1)?;
    let f_m = physics::spatial_operator(u_nm1, spec, mode, None)?;
    let mut out = Field2D::constant(u_n.grid, 0.0);
    for p in 0..out.data.len() {
        out.data[p] = (u_n.data[p] - u_nm1.data[p]) / tau + f_m.data[p];
    }
    Ok(out)
}

/// Residual of the given scheme; `history` is newest-first ground truth.
pub fn residual(
    scheme: Scheme,
    u_n: &Field2D,
    history: &[&Field2D],
    tau: f64,
    spec: &ProblemSpec,
    mode: DerivativeMode,
) -> Result<Field2D> {
    let need = scheme.steps();
    if history.len() < need {
        return Err(Error::InsufficientHistory {
            need,
            got: history.len(),
        });
    }
    match scheme {
        Scheme::Bdf2 => residual_bdf2(u_n, history[0], history[1], tau, spec, mode),
        Scheme::Cn => residual_cn(u_n, history[0], tau, spec, mode),
        Scheme::Ee => residual_ee(u_n, history[0], tau, spec, mode),
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned BiCGStab on a matrix-free operator. Deterministic;
/// sequential reductions only.
fn bicgstab(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(inv_diag).map(|(x, d)| x * d).collect() };
    let bhat = precond(b);
    let bnorm = dot(&bhat, &bhat).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = bhat.clone();
    let rhat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for _ in 0..max_iters {
        let rho1 = dot(&rhat, &r);
        if rho1.abs() < 1e-300 {
            break;
        }
        let beta = (rho1 / rho) * (alpha / omega);
        rho = rho1;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = precond(&apply(&p));
        alpha = rho / dot(&rhat, &v);
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        if dot(&s, &s).sqrt() / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            return Ok(x);
        }
        let t = precond(&apply(&s));
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        if dot(&r, &r).sqrt() / bnorm < tol {
            return Ok(x);
        }
        if omega == 0.0 {
            break;
        }
    }
    let rn = dot(&r, &r).sqrt() / bnorm;
    Err(Error::LinearSolveFailed { residual: rn })
}

/// Whether pixel (i, j) lies on the one-pixel frame border.
#[inline]
pub fn is_border(i: usize, j: usize, nx: usize, ny: usize) -> bool {
    i == 0 || j == 0 || i == ny - 1 || j == nx - 1
}

fn zero_border(f: &mut Field2D) {
    let (nx, ny) = (f.grid.nx, f.grid.ny);
    for j in 0..nx {
        *f.at_mut(0, j) = 0.0;
        *f.at_mut(ny - 1, j) = 0.0;
    }
    for i in 0..ny {
        *f.at_mut(i, 0) = 0.0;
        *f.at_mut(i, nx - 1) = 0.0;
    }
}

/// Advance one step of the implicit solver.
///
/// With two or more history frames the step solves the BDF2 equation
/// `(3/(2 tau)) u - ((2/tau) u_{n-1} - (1/(2 tau)) u_{n-2}) + f(u) = 0`
/// by damped Newton iteration; a single history frame bootstraps with
/// backward Euler. Dirichlet problems pin boundary pixels to the analytic
/// trace at `t_next` and solve the interior. Newton terminates when the
/// residual inf-norm drops below 1e-10 (50 iterations max).
pub fn step_solver(
    history: &[Field2D],
    tau: f64,
    t_next: f64,
    spec: &ProblemSpec,
    mode: DerivativeMode,
) -> Result<Field2D> {
    if history.is_empty() {
        return Err(Error::InvalidArgument(
            "step_solver needs at least one history frame".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time step must be positive, got {tau}"
        )));
    }
    let u1 = &history[0];
    let grid = u1.grid;
    let n = grid.len();

    // time-term coefficient and frozen right-hand side
    let (c0, rhs): (f64, Vec<f64>) = if history.len() >= 2 {
        let u2 = &history[1];
        check_same_shape(u1, u2)?;
        let rhs = (0..n)
            .map(|p| (2.0 / tau) * u1.data[p] - (0.5 / tau) * u2.data[p])
            .collect();
        (1.5 / tau, rhs)
    } else {
        (1.0 / tau, u1.data.iter().map(|v| v / tau).collect())
    };

    let dirichlet = spec.boundary == BoundaryKind::Dirichlet;
    let trace = if dirichlet {
        let params = ej_params_for(spec)?;
        Some(physics::ej_field(grid, t_next, &params))
    } else {
        None
    };

    // initial iterate: linear extrapolation when possible
    let mut u = if history.len() >= 2 {
        let u2 = &history[1];
        let data = (0..n).map(|p| 2.0 * u1.data[p] - u2.data[p]).collect();
        Field2D { grid, data }
    } else {
        u1.clone()
    };
    if spec.problem == Problem::AllenCahn {
        u.clamp_values(-1.0 + LOG_GUARD, 1.0 - LOG_GUARD);
    }
    if let Some(tr) = &trace {
        pin_boundary(&mut u, tr);
    }

    let residual_of = |u: &Field2D| -> Result<Field2D> {
        let mut r = physics::spatial_operator(u, spec, mode, trace.as_ref())?;
        for p in 0..n {
            r.data[p] += c0 * u.data[p] - rhs[p];
        }
        if dirichlet {
            zero_border(&mut r);
        }
        Ok(r)
    };

    let (lap_k, ddx_k, ddy_k) = stencils::mode_kernels(&grid, mode)?;
    let (ct, st) = (spec.theta.cos(), spec.theta.sin());

    let mut r = residual_of(&u)?;
    let mut rnorm = inf_norm(&r.data);
    for _newton in 0..NEWTON_MAX_ITERS {
        if rnorm < NEWTON_TOL {
            return Ok(u);
        }
        let rprime = physics::reaction_derivative(&u, spec);
        // Jacobi preconditioner from the Jacobian diagonal
        let diag_l = lap_k.k[1][1] * lap_k.scale;
        let mut inv_diag: Vec<f64> = (0..n)
            .map(|p| 1.0 / (c0 - spec.epsilon * diag_l + rprime.data[p]))
            .collect();
        if dirichlet {
            let mut d = Field2D {
                grid,
                data: inv_diag,
            };
            zero_border(&mut d);
            for p in 0..n {
                if d.data[p] == 0.0 {
                    d.data[p] = 1.0;
                }
            }
            inv_diag = d.data;
        }

        let apply = |v: &[f64]| -> Vec<f64> {
            let mut vf = Field2D {
                grid,
                data: v.to_vec(),
            };
            if dirichlet {
                zero_border(&mut vf);
            }
            let lap = if dirichlet {
                stencils::apply_kernel_zero_pad(&vf, &lap_k).expect("grid checked")
            } else {
                stencils::apply_kernel(&vf, &lap_k, spec.boundary, None).expect("grid checked")
            };
            let mut w = vec![0.0; n];
            for p in 0..n {
                w[p] = c0 * vf.data[p] - spec.epsilon * lap.data[p] + rprime.data[p] * vf.data[p];
            }
            if spec.problem == Problem::ErikssonJohnson {
                let dx = if dirichlet {
                    stencils::apply_kernel_zero_pad(&vf, &ddx_k).expect("grid checked")
                } else {
                    stencils::apply_kernel(&vf, &ddx_k, spec.boundary, None).expect("grid checked")
                };
                let dy = if dirichlet {
                    stencils::apply_kernel_zero_pad(&vf, &ddy_k).expect("grid checked")
                } else {
                    stencils::apply_kernel(&vf, &ddy_k, spec.boundary, None).expect("grid checked")
                };
                for p in 0..n {
                    w[p] += spec.r * ct * dx.data[p] + spec.r * st * dy.data[p];
                }
            }
            if dirichlet {
                let mut wf = Field2D { grid, data: w };
                zero_border(&mut wf);
                return wf.data;
            }
            w
        };

        let delta = bicgstab(&apply, &inv_diag, &r.data, 1e-12, 500)?;

        // damped update: halve the step until the residual shrinks
        let mut lambda = 1.0;
        let mut improved = false;
        for _ in 0..9 {
            let mut u_try = u.clone();
            for p in 0..n {
                u_try.data[p] -= lambda * delta[p];
            }
            if spec.problem == Problem::AllenCahn {
                u_try.clamp_values(-1.0 + LOG_GUARD, 1.0 - LOG_GUARD);
            }
            if let Some(tr) = &trace {
                pin_boundary(&mut u_try, tr);
            }
            let r_try = residual_of(&u_try)?;
            let rn_try = inf_norm(&r_try.data);
            if rn_try < rnorm || rn_try < NEWTON_TOL {
                u = u_try;
                r = r_try;
                rnorm = rn_try;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            return Err(Error::SolverDiverged {
                step: 0,
                residual: rnorm,
            });
        }
    }
    if rnorm < NEWTON_TOL {
        Ok(u)
    } else {
        Err(Error::SolverDiverged {
            step: 0,
            residual: rnorm,
        })
    }
}

fn pin_boundary(u: &mut Field2D, trace: &Field2D) {
    let (nx, ny) = (u.grid.nx, u.grid.ny);
    for j in 0..nx {
        *u.at_mut(0, j) = trace.at(0, j);
        *u.at_mut(ny - 1, j) = trace.at(ny - 1, j);
    }
    for i in 0..ny {
        *u.at_mut(i, 0) = trace.at(i, 0);
        *u.at_mut(i, nx - 1) = trace.at(i, nx - 1);
    }
}

/// Mean square of a residual field over interior pixels.
pub fn interior_mean_square(r: &Field2D) -> f64 {
    let (nx, ny) = (r.grid.nx, r.grid.ny);
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 1..ny - 1 {
        for j in 1..nx - 1 {
            let v = r.at(i, j);
            acc += v * v;
            count += 1;
        }
    }
    acc / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::physics::InterfaceConstant;

    fn ac_spec() -> ProblemSpec {
        ProblemSpec::new(
            Problem::AllenCahn,
            1.5e-3,
            1.0,
            0.0,
            8e-6,
            BoundaryKind::Periodic,
        )
        .unwrap()
    }

    fn ej_spec() -> ProblemSpec {
        ProblemSpec::new(
            Problem::ErikssonJohnson,
            1e-2,
            1.0,
            1.0,
            0.3,
            BoundaryKind::Dirichlet,
        )
        .unwrap()
    }

    fn rand_field(grid: GridSpec, seed: u64, amp: f64) -> Field2D {
        let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
        let data = (0..grid.len())
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                amp * (2.0 * (state >> 11) as f64 / (1u64 << 53) as f64 - 1.0)
            })
            .collect();
        Field2D { grid, data }
    }

    #[test]
    fn scheme_coefficients_are_consistent() {
        for spec in [SchemeSpec::bdf2(), SchemeSpec::cn(), SchemeSpec::ee()] {
            assert_eq!(spec.alphas.len(), spec.steps + 1);
            assert_eq!(spec.betas.len(), spec.steps + 1);
            assert_eq!(*spec.alphas.last().unwrap(), 1.0);
            let sum: f64 = spec.alphas.iter().sum();
            assert!(sum.abs() < 1e-15, "{:?}", spec.scheme);
        }
        assert_eq!(SchemeSpec::bdf2().steps, 2);
        assert_eq!(SchemeSpec::cn().steps, 1);
        assert_eq!(SchemeSpec::ee().steps, 1);
        // EE puts the operator at the old state
        assert_eq!(SchemeSpec::ee().betas, vec![1.0, 0.0]);
    }

    #[test]
    fn bdf2_residual_vanishes_at_rest() {
        let g = GridSpec::unit_square(6).unwrap();
        let z = Field2D::constant(g, 0.0);
        let r = residual_bdf2(&z, &z, &z, 0.01, &ac_spec(), DerivativeMode::StandardFD).unwrap();
        for &v in &r.data {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn bdf2_weights_sum_to_zero_on_constants() {
        // f(0) = 0 for Allen-Cahn, so a constant zero triple is the clean case;
        // a nonzero constant c with all three frames equal isolates f(c)
        let g = GridSpec::unit_square(6).unwrap();
        let c = 0.4;
        let f = Field2D::constant(g, c);
        let spec = ac_spec();
        let r = residual_bdf2(&f, &f, &f, 0.01, &spec, DerivativeMode::StandardFD).unwrap();
        let fc = physics::spatial_operator(&f, &spec, DerivativeMode::StandardFD, None).unwrap();
        for p in 0..r.data.len() {
            assert!((r.data[p] - fc.data[p]).abs() < 1e-9);
        }
    }

    #[test]
    fn cn_residual_on_equal_frames_is_f() {
        let g = GridSpec::unit_square(6).unwrap();
        let u = rand_field(g, 3, 0.5);
        let spec = ac_spec();
        let r = residual_cn(&u, &u, 0.02, &spec, DerivativeMode::StandardFD).unwrap();
        let f = physics::spatial_operator(&u, &spec, DerivativeMode::StandardFD, None).unwrap();
        for p in 0..r.data.len() {
            assert!((r.data[p] - f.data[p]).abs() < 1e-9 * f.data[p].abs().max(1.0));
        }
    }

    #[test]
    fn ee_residual_vanishes_on_explicit_euler_update() {
        let g = GridSpec::unit_square(6).unwrap();
        let u_old = rand_field(g, 7, 0.4);
        let spec = ac_spec();
        let tau = 0.01;
        let f_old =
            physics::spatial_operator(&u_old, &spec, DerivativeMode::StandardFD, None).unwrap();
        let mut u_new = u_old.clone();
        for p in 0..u_new.data.len() {
            u_new.data[p] -= tau * f_old.data[p];
        }
        let r = residual_ee(&u_new, &u_old, tau, &spec, DerivativeMode::StandardFD).unwrap();
        for &v in &r.data {
            assert!(v.abs() < 1e-10);
        }
    }

    #[test]
    fn residuals_match_scalar_loop_oracle() {
        // 4x4 EJ triple with periodic wrap so the oracle needs no ghosts
        let spec = ProblemSpec {
            boundary: BoundaryKind::Periodic,
            ..ej_spec()
        };
        let g = GridSpec::unit_square(4).unwrap();
        let u_n = rand_field(g, 11, 0.5);
        let u_m1 = rand_field(g, 13, 0.5);
        let u_m2 = rand_field(g, 17, 0.5);
        let tau = 0.01;
        let r = residual_bdf2(&u_n, &u_m1, &u_m2, tau, &spec, DerivativeMode::StandardFD).unwrap();
        let h = g.hx;
        let f_at = |u: &Field2D, i: usize, j: usize| -> f64 {
            let n = u.at((i + 3) % 4, j);
            let s = u.at((i + 1) % 4, j);
            let w = u.at(i, (j + 3) % 4);
            let e = u.at(i, (j + 1) % 4);
            let c = u.at(i, j);
            let lap = (n + s + w + e - 4.0 * c) / (h * h);
            let dx = (e - w) / (2.0 * h);
            let dy = (n - s) / (2.0 * h);
            -spec.epsilon * lap
                + spec.r * spec.theta.cos() * dx
                + spec.r * spec.theta.sin() * dy
                + spec.k * c * (c - 1.0)
        };
        for i in 0..4 {
            for j in 0..4 {
                let expect = 1.5 / tau
                    * (u_n.at(i, j) - 4.0 / 3.0 * u_m1.at(i, j) + 1.0 / 3.0 * u_m2.at(i, j))
                    + f_at(&u_n, i, j);
                assert!((r.at(i, j) - expect).abs() < 1e-9, "bdf2 ({i},{j})");
            }
        }
        let r_cn = residual_cn(&u_n, &u_m1, tau, &spec, DerivativeMode::StandardFD).unwrap();
        let r_ee = residual_ee(&u_n, &u_m1, tau, &spec, DerivativeMode::StandardFD).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let e_cn = (u_n.at(i, j) - u_m1.at(i, j)) / tau
                    + 0.5 * (f_at(&u_n, i, j) + f_at(&u_m1, i, j));
                let e_ee = (u_n.at(i, j) - u_m1.at(i, j)) / tau + f_at(&u_m1, i, j);
                assert!((r_cn.at(i, j) - e_cn).abs() < 1e-9, "cn ({i},{j})");
                assert!((r_ee.at(i, j) - e_ee).abs() < 1e-9, "ee ({i},{j})");
            }
        }
    }

    #[test]
    fn residual_dispatch_checks_history() {
        let g = GridSpec::unit_square(4).unwrap();
        let u = Field2D::constant(g, 0.0);
        let err = residual(
            Scheme::Bdf2,
            &u,
            &[&u],
            0.01,
            &ac_spec(),
            DerivativeMode::StandardFD,
        );
        assert!(matches!(
            err,
            Err(Error::InsufficientHistory { need: 2, got: 1 })
        ));
    }

    #[test]
    fn char_poly_zero_order_consistency() {
        let one = Complex64::new(1.0, 0.0);
        let stiff = StiffnessPair { d: 0.0, dc: 0.0 };
        for spec in [SchemeSpec::bdf2(), SchemeSpec::cn(), SchemeSpec::ee()] {
            let v = char_poly(&spec, 0.1, stiff, one);
            assert!(v.norm() < 1e-15, "{:?}", spec.scheme);
        }
    }

    #[test]
    fn char_poly_ee_expansion() {
        // EE: pi = z - 1 + tau*(D+Dc)
        let spec = SchemeSpec::ee();
        let tau = 0.05;
        let stiff = StiffnessPair { d: 2.0, dc: 0.5 };
        for z in [
            Complex64::new(0.3, 0.1),
            Complex64::new(-1.2, 0.7),
            Complex64::new(0.0, 0.0),
        ] {
            let v = char_poly(&spec, tau, stiff, z);
            let expect = z - 1.0 + tau * 2.5;
            assert!((v - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn char_poly_bdf2_at_origin_ignores_stiffness() {
        let spec = SchemeSpec::bdf2();
        let z0 = Complex64::new(0.0, 0.0);
        let a = char_poly(&spec, 0.1, StiffnessPair { d: 0.0, dc: 0.0 }, z0);
        let b = char_poly(&spec, 0.1, StiffnessPair { d: 9.0, dc: 4.0 }, z0);
        assert!((a - b).norm() < 1e-15);
        assert!((a.re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn char_poly_linear_in_tau_stiffness() {
        let spec = SchemeSpec::cn();
        let z = Complex64::new(0.4, -0.3);
        let tau = 0.07;
        let rho = spec.rho(z);
        let d1 = char_poly(&spec, tau, StiffnessPair { d: 1.0, dc: 0.5 }, z) - rho;
        let d2 = char_poly(&spec, tau, StiffnessPair { d: 2.0, dc: 1.0 }, z) - rho;
        assert!((d2 - 2.0 * d1).norm() < 1e-14);
    }

    #[test]
    fn consistency_order_slopes() {
        let s_bdf2 = consistency_order(&SchemeSpec::bdf2(), -1.0);
        let s_cn = consistency_order(&SchemeSpec::cn(), -1.0);
        let s_ee = consistency_order(&SchemeSpec::ee(), -1.0);
        assert!((s_bdf2 - 3.0).abs() < 0.2, "bdf2 slope {s_bdf2}");
        assert!((s_cn - 3.0).abs() < 0.2, "cn slope {s_cn}");
        assert!((s_ee - 2.0).abs() < 0.2, "ee slope {s_ee}");
    }

    #[test]
    fn kernel_error_suppression_near_origin() {
        // BDF's sigma(z) = beta_s z^s, so the Dc contribution dies like |z|^2
        // while CN/EE keep a constant tau*Dc*|sigma(0)| term.
        let tau = 0.05;
        let dc = 1.0;
        let z = Complex64::new(1e-3, 0.0);
        let gap = |spec: &SchemeSpec| {
            (char_poly(spec, tau, StiffnessPair { d: 1.0, dc }, z)
                - char_poly(spec, tau, StiffnessPair { d: 1.0, dc: 0.0 }, z))
            .norm()
        };
        let g_bdf2 = gap(&SchemeSpec::bdf2());
        let g_cn = gap(&SchemeSpec::cn());
        let g_ee = gap(&SchemeSpec::ee());
        // exact values: tau*dc*|sigma(z)|
        assert!((g_bdf2 - tau * dc * (2.0 / 3.0) * 1e-6).abs() < 1e-12);
        assert!((g_cn - tau * dc * 0.5 * (1.0 + 1e-3)).abs() < 1e-12);
        assert!((g_ee - tau * dc).abs() < 1e-12);
        assert!(g_bdf2 < 1e-4 * g_cn);
    }

    #[test]
    fn solver_preserves_rest_state() {
        let spec = ac_spec();
        let g = spec.grid(16).unwrap();
        let z = Field2D::constant(g, 0.0);
        let mut frames = vec![z];
        for k in 0..4 {
            let next = step_solver(
                &last_two(&frames),
                0.1,
                0.1 * (k + 1) as f64,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            frames.push(next);
        }
        for f in &frames {
            for &v in &f.data {
                assert_eq!(v, 0.0);
            }
        }
    }

    fn last_two(frames: &[Field2D]) -> Vec<Field2D> {
        let n = frames.len();
        if n >= 2 {
            vec![frames[n - 1].clone(), frames[n - 2].clone()]
        } else {
            vec![frames[n - 1].clone()]
        }
    }

    #[test]
    fn solver_constant_state_grows_toward_well() {
        // below the critical temperature product the uniform state drifts
        // toward the positive well; compare against a tiny-step explicit
        // reference integration of the scalar ODE
        let spec = ac_spec();
        let g = spec.grid(8).unwrap();
        let c0 = 0.05;
        let iface = InterfaceConstant::default();
        let cr = 0.5 / (iface.value * iface.value) * spec.k * spec.theta;
        let f_scalar = |u: f64| cr * ((1.0 + u) / (1.0 - u)).ln() - 1.2 * u;

        let tau = 0.05;
        let n_steps = 6;
        let mut frames = vec![Field2D::constant(g, c0)];
        for k in 0..n_steps {
            let next = step_solver(
                &last_two(&frames),
                tau,
                tau * (k + 1) as f64,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            frames.push(next);
        }
        // monotone growth in the first steps
        for w in frames.windows(2) {
            assert!(w[1].data[0] > w[0].data[0]);
        }
        // reference: explicit integration with steps 1000x smaller
        let mut u_ref = c0;
        let sub = 1000;
        for _ in 0..n_steps * sub {
            u_ref -= tau / sub as f64 * f_scalar(u_ref);
        }
        let u_solver = frames.last().unwrap().data[0];
        assert!(
            (u_solver - u_ref).abs() < 1e-3 * u_ref.abs(),
            "solver {u_solver} vs reference {u_ref}"
        );
    }

    #[test]
    fn solver_frames_satisfy_bdf2_residual() {
        let spec = ac_spec();
        let g = spec.grid(16).unwrap();
        let ic = rand_field(g, 42, 0.1);
        let tau = 0.2;
        let mut frames = vec![ic];
        for k in 0..5 {
            let next = step_solver(
                &last_two(&frames),
                tau,
                tau * (k + 1) as f64,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            frames.push(next);
        }
        for nidx in 2..frames.len() {
            let r = residual_bdf2(
                &frames[nidx],
                &frames[nidx - 1],
                &frames[nidx - 2],
                tau,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            assert!(
                interior_mean_square(&r) <= 1e-16,
                "frame {nidx}: {}",
                interior_mean_square(&r)
            );
        }
    }

    #[test]
    fn solver_eriksson_johnson_self_consistency() {
        let spec = ej_spec();
        let g = spec.grid(16).unwrap();
        let params = ej_params_for(&spec).unwrap();
        let ic = physics::ej_field(g, 0.0, &params);
        let tau = 0.01;
        let mut frames = vec![ic];
        for k in 0..5 {
            let next = step_solver(
                &last_two(&frames),
                tau,
                tau * (k + 1) as f64,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            frames.push(next);
        }
        for nidx in 2..frames.len() {
            let r = residual_bdf2(
                &frames[nidx],
                &frames[nidx - 1],
                &frames[nidx - 2],
                tau,
                &spec,
                DerivativeMode::StandardFD,
            )
            .unwrap();
            let l2 = interior_mean_square(&r).sqrt();
            assert!(l2 < NEWTON_TOL * 10.0, "frame {nidx}: interior rms {l2}");
        }
        // boundary pixels carry the analytic trace
        let t3 = 3.0 * tau;
        let trace = physics::ej_field(g, t3, &params);
        for j in 0..16 {
            assert!((frames[3].at(0, j) - trace.at(0, j)).abs() < 1e-12);
            assert!((frames[3].at(15, j) - trace.at(15, j)).abs() < 1e-12);
        }
    }
}
