//! Behavioural checks on solver-generated data: phase separation, loss
//! minimality at the true frame, and integrator ordering.

use pc_resolve::datagen::{counter_hash, generate_entry_series, unit_f64, GenConfig};
use pc_resolve::grid::Field2D;
use pc_resolve::integrators::Scheme;
use pc_resolve::losses::physics_inner_loss;
use pc_resolve::stencils::DerivativeMode;

#[test]
fn allen_cahn_noise_separates_into_two_phases() {
    // default-configuration series 0: noise in [-0.1, 0.1] must coarsen
    // into near-saturated domains of both signs by the final frame
    let cfg = GenConfig::allen_cahn_default();
    let (_, fine) = generate_entry_series(&cfg, 0).unwrap();
    let last = fine.frames.last().unwrap();
    let n = last.data.len() as f64;
    let max_abs = last.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let frac_sep = last.data.iter().filter(|&&v| v.abs() > 0.6).count() as f64 / n;
    let frac_pos = last.data.iter().filter(|&&v| v > 0.6).count() as f64 / n;
    let frac_neg = last.data.iter().filter(|&&v| v < -0.6).count() as f64 / n;
    assert!(max_abs > 0.85, "no saturation: max |u| = {max_abs}");
    assert!(max_abs < 0.99, "clamp bound reached: max |u| = {max_abs}");
    assert!(frac_sep > 0.5, "not bimodal: only {frac_sep:.2} separated");
    assert!(
        frac_pos.min(frac_neg) > 0.05,
        "single-phase collapse: +{frac_pos:.2} / -{frac_neg:.2}"
    );
    // early frames are still mixed: separation is a dynamical outcome
    let early = &fine.frames[1];
    let early_sep = early.data.iter().filter(|&&v| v.abs() > 0.6).count();
    assert_eq!(early_sep, 0, "IC magnitudes cannot exceed 0.1");
}

#[test]
fn true_frame_minimises_inner_loss_among_perturbations() {
    let cfg = GenConfig {
        n_series: 1,
        n_steps: 8,
        fine_n: 16,
        coarse_factor: 4,
        t_final: 2.0,
        master_seed: 31,
        ..GenConfig::allen_cahn_default()
    };
    let (_, fine) = generate_entry_series(&cfg, 0).unwrap();
    let spec = fine.spec;
    let n = 5usize;
    let gt = &fine.frames[n];
    let hist: Vec<&Field2D> = vec![&fine.frames[n - 1], &fine.frames[n - 2]];
    let base = physics_inner_loss(
        gt,
        &hist,
        fine.tau,
        &spec,
        Scheme::Bdf2,
        DerivativeMode::StandardFD,
    )
    .unwrap();
    assert!(base <= 1e-16, "ground truth residual too large: {base}");
    for trial in 0..100u64 {
        let mut pert = gt.clone();
        for (p, v) in pert.data.iter_mut().enumerate() {
            let u = unit_f64(counter_hash(4242, &[trial, p as u64]));
            *v += 1e-2 * (2.0 * u - 1.0);
        }
        let loss = physics_inner_loss(
            &pert,
            &hist,
            fine.tau,
            &spec,
            Scheme::Bdf2,
            DerivativeMode::StandardFD,
        )
        .unwrap();
        assert!(
            loss > base,
            "perturbation {trial} beat the true frame: {loss} vs {base}"
        );
    }
}

#[test]
fn reconstruction_objective_has_local_minimum_at_ground_truth() {
    use pc_resolve::sr::{block_downsample, sr_objective, SrOptions};

    let cfg = GenConfig {
        n_series: 1,
        n_steps: 8,
        fine_n: 16,
        coarse_factor: 4,
        t_final: 2.0,
        master_seed: 77,
        ..GenConfig::allen_cahn_default()
    };
    let (_, fine) = generate_entry_series(&cfg, 0).unwrap();
    let spec = fine.spec;
    let n = 5usize;
    let gt = &fine.frames[n];
    let u_lr = block_downsample(gt, cfg.coarse_factor).unwrap();
    let hist: Vec<&Field2D> = vec![&fine.frames[n - 1], &fine.frames[n - 2]];
    let opts = SrOptions::for_problem(pc_resolve::grid::Problem::AllenCahn);
    let t = fine.time_of(n);
    let at_gt = sr_objective(gt, &u_lr, &hist, fine.tau, &spec, t, &opts).unwrap();
    // data term vanishes (u_lr is gt's own downsample) and the physics
    // residual sits at the solver tolerance
    assert!(at_gt <= opts.weights.w4 * 1e-16 + opts.weights.w5 * 1e-2);
    for trial in 0..100u64 {
        let mut pert = gt.clone();
        for (p, v) in pert.data.iter_mut().enumerate() {
            let u = unit_f64(counter_hash(987, &[trial, p as u64]));
            *v += 1e-2 * (2.0 * u - 1.0);
        }
        let obj = sr_objective(&pert, &u_lr, &hist, fine.tau, &spec, t, &opts).unwrap();
        assert!(obj > at_gt, "perturbation {trial}: {obj} <= {at_gt}");
    }
}

#[test]
fn integrator_residual_ordering_on_solver_data() {
    let cfg = GenConfig {
        n_series: 1,
        n_steps: 10,
        fine_n: 32,
        coarse_factor: 4,
        t_final: 3.0,
        master_seed: 17,
        ..GenConfig::allen_cahn_default()
    };
    let (_, fine) = generate_entry_series(&cfg, 0).unwrap();
    let spec = fine.spec;
    let mut agg = [0.0f64; 3];
    let mut count = 0usize;
    for n in 2..fine.frames.len() {
        let hist: Vec<&Field2D> = vec![&fine.frames[n - 1], &fine.frames[n - 2]];
        for (slot, scheme) in [Scheme::Bdf2, Scheme::Cn, Scheme::Ee]
            .into_iter()
            .enumerate()
        {
            agg[slot] += physics_inner_loss(
                &fine.frames[n],
                &hist,
                fine.tau,
                &spec,
                scheme,
                DerivativeMode::StandardFD,
            )
            .unwrap();
        }
        count += 1;
    }
    for v in &mut agg {
        *v /= count as f64;
    }
    let [bdf2, cn, ee] = agg;
    assert!(
        bdf2 < cn && cn < ee,
        "expected BDF2 < CN < EE, got {bdf2:.3e}, {cn:.3e}, {ee:.3e}"
    );
    assert!(bdf2 < 1e-16);
}
