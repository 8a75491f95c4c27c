//! Solver-restart experiment: upsample a coarse run's state, restart the
//! fine solver from it, and track the drift from the reference fine run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datagen::{generate_entry_series, GenConfig, AC_CLAMP};
use crate::error::{Error, Result};
use crate::grid::{Field2D, Problem};
use crate::integrators::step_solver;
use crate::pgm;
use crate::sr::{bicubic_upsample, variational_sr, SrOptions};
use crate::stencils::DerivativeMode;

/// How the fine-grid restart state is constructed from the coarse run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartMethod {
    /// Catmull-Rom bicubic upsample of the coarse frames.
    Bicubic,
    /// Variational reconstruction with bicubic-upsampled coarse history
    /// (reference-free: no fine-grid data enters).
    VariationalSr,
    /// Inject the true fine frames; a determinism check, not a method.
    Oracle,
}

impl RestartMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            RestartMethod::Bicubic => "bicubic",
            RestartMethod::VariationalSr => "variational-sr",
            RestartMethod::Oracle => "oracle",
        }
    }
}

/// Per-method error curves plus snapshot error fields.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartReport {
    pub method: String,
    /// RMS field error vs the reference at continuation step k = 1..n.
    pub l2: Vec<f64>,
    /// Max-abs field error at each continuation step.
    pub linf: Vec<f64>,
    /// Error fields (restart minus reference) at selected steps.
    pub snapshots: Vec<(usize, Field2D)>,
}

/// Steps at which error-field snapshots are retained.
pub const SNAPSHOT_STEPS: [usize; 3] = [10, 50, 100];

/// Run the restart experiment for one dataset entry.
///
/// Both runs are regenerated in full 64-bit precision from the
/// configuration, so the oracle method reproduces the reference run exactly.
/// For each method the two BDF2 history states at `warmup-1` and `warmup`
/// are built from coarse frames only, then the fine solver marches
/// `n_continue` steps and the error against the reference fine run is
/// recorded per step.
pub fn restart_experiment(
    cfg: &GenConfig,
    entry_id: u32,
    warmup: usize,
    n_continue: usize,
    methods: &[RestartMethod],
    opts: &SrOptions,
) -> Result<Vec<RestartReport>> {
    let (coarse, fine) = generate_entry_series(cfg, entry_id)?;
    let n_frames = fine.frames.len();
    if warmup < 3 {
        return Err(Error::InvalidArgument(
            "warmup must be at least 3 (SR history needs two earlier coarse frames)".into(),
        ));
    }
    if warmup + n_continue >= n_frames {
        return Err(Error::InvalidArgument(format!(
            "need warmup + n_continue < n_frames, got {warmup} + {n_continue} vs {n_frames}"
        )));
    }
    if n_continue == 0 {
        return Err(Error::InvalidArgument("n_continue must be positive".into()));
    }

    let factor = fine.frames[0].nx() / coarse.frames[0].nx();
    let tau = fine.tau;
    let spec = fine.spec;

    let mut reports = Vec::with_capacity(methods.len());
    for &method in methods {
        // two consecutive fine-grid states at warmup-1 and warmup
        let (h_prev, h_last) = match method {
            RestartMethod::Oracle => (fine.frames[warmup - 1].clone(), fine.frames[warmup].clone()),
            RestartMethod::Bicubic => (
                with_grid(bicubic_upsample(&coarse.frames[warmup - 1], factor)?, &fine),
                with_grid(bicubic_upsample(&coarse.frames[warmup], factor)?, &fine),
            ),
            RestartMethod::VariationalSr => {
                let mut states = Vec::with_capacity(2);
                for n in [warmup - 1, warmup] {
                    // reference-free history: bicubic upsamples of the two
                    // preceding coarse frames
                    let b1 = with_grid(bicubic_upsample(&coarse.frames[n - 1], factor)?, &fine);
                    let b2 = with_grid(bicubic_upsample(&coarse.frames[n - 2], factor)?, &fine);
                    let res = variational_sr(
                        &coarse.frames[n],
                        &[&b1, &b2],
                        tau,
                        &spec,
                        fine.time_of(n),
                        opts,
                    )?;
                    states.push(res.u_hr);
                }
                let last = states.pop().expect("two states");
                let prev = states.pop().expect("two states");
                (prev, last)
            }
        };

        // continue the fine run, mirroring the generator's post-step clamp
        let mut frames = vec![h_prev, h_last];
        let mut l2 = Vec::with_capacity(n_continue);
        let mut linf = Vec::with_capacity(n_continue);
        let mut snapshots = Vec::new();
        for k in 1..=n_continue {
            let hist = vec![
                frames[frames.len() - 1].clone(),
                frames[frames.len() - 2].clone(),
            ];
            let t_next = fine.time_of(warmup + k);
            let mut u = step_solver(&hist, tau, t_next, &spec, DerivativeMode::StandardFD)
                .map_err(|e| match e {
                    Error::SolverDiverged { residual, .. } => Error::SolverDiverged {
                        step: warmup + k,
                        residual,
                    },
                    other => other,
                })?;
            if spec.problem == Problem::AllenCahn {
                u.clamp_values(-AC_CLAMP, AC_CLAMP);
            }
            let reference = &fine.frames[warmup + k];
            l2.push(u.rms_diff(reference)?);
            linf.push(u.linf_diff(reference)?);
            if SNAPSHOT_STEPS.contains(&k) {
                let mut err = u.clone();
                err.zip_apply(reference, |a, b| a - b)?;
                snapshots.push((k, err));
            }
            frames.push(u);
            frames.remove(0);
        }
        reports.push(RestartReport {
            method: method.as_str().to_string(),
            l2,
            linf,
            snapshots,
        });
    }
    Ok(reports)
}

fn with_grid(mut f: Field2D, fine: &crate::datagen::TimeSeries) -> Field2D {
    f.grid = fine.frames[0].grid;
    f
}

/// Emit the per-step error curves as one CSV
/// (`step, <method>_l2, <method>_linf, ...`) plus one PGM error field per
/// retained snapshot.
pub fn write_restart_outputs(dir: &Path, reports: &[RestartReport]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let n = reports.first().map(|r| r.l2.len()).unwrap_or(0);
    let mut csv = String::from("step");
    for r in reports {
        csv.push_str(&format!(",{}_l2,{}_linf", r.method, r.method));
    }
    csv.push('\n');
    for k in 0..n {
        csv.push_str(&format!("{}", k + 1));
        for r in reports {
            csv.push_str(&format!(",{},{}", r.l2[k], r.linf[k]));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("restart_errors.csv"), csv)?;
    for r in reports {
        for (k, err) in &r.snapshots {
            let (lo, hi) = pgm::value_range(err);
            let path = dir.join(format!("error_{}_k{:03}.pgm", r.method, k));
            pgm::write_pgm16(&path, err, lo, hi)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::GenConfig;

    fn tiny_cfg() -> GenConfig {
        GenConfig {
            n_series: 1,
            n_steps: 12,
            fine_n: 16,
            coarse_factor: 4,
            t_final: 3.0,
            master_seed: 5,
            ..GenConfig::allen_cahn_default()
        }
    }

    #[test]
    fn oracle_restart_reproduces_reference_exactly() {
        let cfg = tiny_cfg();
        let opts = SrOptions::for_problem(Problem::AllenCahn);
        let reports = restart_experiment(&cfg, 0, 5, 4, &[RestartMethod::Oracle], &opts).unwrap();
        assert_eq!(reports.len(), 1);
        for (&a, &b) in reports[0].l2.iter().zip(&reports[0].linf) {
            assert_eq!(a, 0.0, "oracle restart drifted");
            assert_eq!(b, 0.0);
        }
    }

    #[test]
    fn error_curves_are_reproducible() {
        let cfg = tiny_cfg();
        let mut opts = SrOptions::for_problem(Problem::AllenCahn);
        opts.max_iters = 40;
        let methods = [RestartMethod::Bicubic, RestartMethod::VariationalSr];
        let r1 = restart_experiment(&cfg, 0, 5, 3, &methods, &opts).unwrap();
        let r2 = restart_experiment(&cfg, 0, 5, 3, &methods, &opts).unwrap();
        for (a, b) in r1.iter().zip(&r2) {
            assert_eq!(a.l2, b.l2);
            assert_eq!(a.linf, b.linf);
        }
        assert!(r1[0].l2.iter().all(|&v| v >= 0.0));
        assert_eq!(r1[0].l2.len(), 3);
    }

    #[test]
    fn error_curves_are_smooth() {
        // per-step error increments stay within the reference run's own
        // frame-to-frame movement scale on (nearly) every step
        let cfg = GenConfig {
            n_steps: 16,
            t_final: 4.0,
            ..tiny_cfg()
        };
        let (_, fine) = crate::datagen::generate_entry_series(&cfg, 0).unwrap();
        let warmup = 6;
        let n_continue = 9;
        let lipschitz = (warmup..warmup + n_continue)
            .map(|k| fine.frames[k + 1].rms_diff(&fine.frames[k]).unwrap())
            .fold(0.0f64, f64::max);
        let mut opts = SrOptions::for_problem(Problem::AllenCahn);
        opts.max_iters = 60;
        let reports = restart_experiment(
            &cfg,
            0,
            warmup,
            n_continue,
            &[RestartMethod::Bicubic, RestartMethod::VariationalSr],
            &opts,
        )
        .unwrap();
        for r in &reports {
            let mut ok = 0usize;
            let mut total = 0usize;
            for w in r.l2.windows(2) {
                if (w[1] - w[0]).abs() <= 2.0 * lipschitz {
                    ok += 1;
                }
                total += 1;
            }
            assert!(
                ok as f64 >= 0.95 * total as f64,
                "{}: only {ok}/{total} increments within 2x the reference movement {lipschitz:.3e}",
                r.method
            );
        }
    }

    #[test]
    fn report_serialization_roundtrips() {
        let cfg = tiny_cfg();
        let opts = SrOptions::for_problem(Problem::AllenCahn);
        let reports = restart_experiment(&cfg, 0, 5, 3, &[RestartMethod::Oracle], &opts).unwrap();
        let text = serde_json::to_string(&reports).unwrap();
        let back: Vec<RestartReport> = serde_json::from_str(&text).unwrap();
        assert_eq!(back[0].l2, reports[0].l2);
        assert_eq!(back[0].method, reports[0].method);
    }

    #[test]
    fn argument_validation() {
        let cfg = tiny_cfg();
        let opts = SrOptions::for_problem(Problem::AllenCahn);
        assert!(restart_experiment(&cfg, 0, 2, 3, &[RestartMethod::Oracle], &opts).is_err());
        assert!(restart_experiment(&cfg, 0, 5, 40, &[RestartMethod::Oracle], &opts).is_err());
    }
}
