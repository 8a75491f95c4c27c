//! Command implementations behind the `pc-resolve` binary.
//!
//! Every command returns a process exit code: 0 on success, 1 for
//! configuration/argument errors, 2 for solver failures or missing files,
//! 3 when some series failed but the run completed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pc_resolve::datagen::{
    generate_dataset, read_series, DatasetManifest, GenConfig, IcMode, TimeSeries,
};
use pc_resolve::grid::{BoundaryKind, Field2D, Problem};
use pc_resolve::integrators::{consistency_order, Scheme, SchemeSpec};
use pc_resolve::losses::{composite_loss, LossWeights};
use pc_resolve::metrics::{evaluate_all, DynamicRange};
use pc_resolve::pgm;
use pc_resolve::sr::{bicubic_upsample, variational_sr, SrOptions};
use pc_resolve::stencils::DerivativeMode;
use pc_resolve::surrogate::{restart_experiment, write_restart_outputs, RestartMethod};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_PARTIAL: i32 = 3;

/// Install the global worker pool. The PC_RESOLVE_THREADS environment
/// variable overrides the flag; both default to the available cores.
pub fn init_threads(flag: Option<usize>) {
    let from_env = std::env::var("PC_RESOLVE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = from_env.or(flag) {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

// ---- run configuration ----------------------------------------------------

/// JSON run configuration. Unknown keys are rejected. Every field except
/// `problem` is optional and falls back to the per-problem default.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// "allen-cahn" or "eriksson-johnson".
    pub problem: String,
    /// "periodic", "neumann", or "dirichlet".
    #[serde(default)]
    pub boundary: Option<String>,
    /// Number of series to generate.
    #[serde(default)]
    pub series: Option<usize>,
    /// Time steps per series (frames = steps + 1).
    #[serde(default)]
    pub steps: Option<usize>,
    /// Fine grid points per side.
    #[serde(default)]
    pub fine_n: Option<usize>,
    /// Fine-to-coarse reduction factor per axis.
    #[serde(default)]
    pub coarse_factor: Option<usize>,
    /// Final physical time; the step size is t_final/steps.
    #[serde(default)]
    pub t_final: Option<f64>,
    /// Master seed; every draw in the run derives from it.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Sampling range of the diffusion coefficient.
    #[serde(default)]
    pub epsilon: Option<[f64; 2]>,
    /// Sampling range of the reaction coefficient K.
    #[serde(default)]
    pub k: Option<[f64; 2]>,
    /// Sampling range of the advection speed (Eriksson-Johnson).
    #[serde(default)]
    pub r: Option<[f64; 2]>,
    /// Sampling range of theta (advection angle for Eriksson-Johnson).
    #[serde(default)]
    pub theta: Option<[f64; 2]>,
    /// Allen-Cahn: sampling range of the product K*theta; theta is derived
    /// as the sampled product divided by K. Set to null to sample theta
    /// directly from `theta`.
    #[serde(default)]
    pub k_theta: Option<[f64; 2]>,
    /// "nested" (coarse IC = block mean of fine IC) or "independent".
    #[serde(default)]
    pub ic_mode: Option<String>,
    /// Amplitude of the uniform noise IC (Allen-Cahn).
    #[serde(default)]
    pub ic_amplitude: Option<f64>,
    /// Loss weights used by evaluation commands.
    #[serde(default)]
    pub weights: Option<LossWeights>,
    /// "bdf2", "cn", or "ee".
    #[serde(default)]
    pub scheme: Option<String>,
    /// "standard-fd" or "calibrated-64".
    #[serde(default)]
    pub mode: Option<String>,
    /// Output directory for `generate`.
    #[serde(default)]
    pub out: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn to_gen_config(&self) -> Result<GenConfig, String> {
        let problem = Problem::parse(&self.problem).map_err(|e| e.to_string())?;
        let mut cfg = match problem {
            Problem::AllenCahn => GenConfig::allen_cahn_default(),
            Problem::ErikssonJohnson => GenConfig::eriksson_johnson_default(),
        };
        if let Some(b) = &self.boundary {
            cfg.boundary = BoundaryKind::parse(b).map_err(|e| e.to_string())?;
        }
        if let Some(v) = self.series {
            cfg.n_series = v;
        }
        if let Some(v) = self.steps {
            cfg.n_steps = v;
        }
        if let Some(v) = self.fine_n {
            cfg.fine_n = v;
        }
        if let Some(v) = self.coarse_factor {
            cfg.coarse_factor = v;
        }
        if let Some(v) = self.t_final {
            cfg.t_final = v;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        if let Some([lo, hi]) = self.epsilon {
            cfg.eps_range = (lo, hi);
        }
        if let Some([lo, hi]) = self.k {
            cfg.k_range = (lo, hi);
        }
        if let Some([lo, hi]) = self.r {
            cfg.r_range = (lo, hi);
        }
        if let Some([lo, hi]) = self.theta {
            cfg.theta_range = (lo, hi);
            if problem == Problem::AllenCahn && self.k_theta.is_none() {
                cfg.quench_range = None;
            }
        }
        if let Some([lo, hi]) = self.k_theta {
            cfg.quench_range = Some((lo, hi));
        }
        if let Some(m) = &self.ic_mode {
            cfg.ic_mode = match m.as_str() {
                "nested" => IcMode::Nested,
                "independent" => IcMode::Independent,
                other => return Err(format!("unknown ic_mode '{other}'")),
            };
        }
        if let Some(a) = self.ic_amplitude {
            cfg.ic_amplitude = a;
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

// ---- generate --------------------------------------------------------------

pub fn cmd_generate(config_path: &Path, out_override: Option<&Path>) -> i32 {
    let rc = match RunConfig::load(config_path) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let cfg = match rc.to_gen_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out_dir: PathBuf = out_override
        .map(Path::to_path_buf)
        .or_else(|| rc.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("dataset"));
    match generate_dataset(&cfg, &out_dir) {
        Ok(manifest) => {
            let frames: u32 = manifest.entries.iter().map(|e| e.n_frames).sum();
            println!(
                "generated {} series ({} fine frames) in {}",
                manifest.entries.len(),
                frames,
                out_dir.display()
            );
            if manifest.failed.is_empty() {
                EXIT_OK
            } else {
                for f in &manifest.failed {
                    eprintln!("series {} failed: {}", f.id, f.error);
                }
                EXIT_PARTIAL
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
    }
}

// ---- evaluate ---------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalSource {
    /// Score ground truth against itself (pipeline check).
    Gt,
    /// Score bicubic-upsampled coarse frames against ground truth.
    Bicubic,
}

impl EvalSource {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "gt" => Ok(EvalSource::Gt),
            "bicubic" => Ok(EvalSource::Bicubic),
            other => Err(format!("unknown source '{other}' (use gt|bicubic)")),
        }
    }
}

pub struct EvaluateArgs<'a> {
    pub manifest_path: &'a Path,
    pub split: &'a str,
    pub scheme: Scheme,
    pub source: EvalSource,
    pub mode: DerivativeMode,
    pub weights: Option<LossWeights>,
    pub out_csv: &'a Path,
}

fn load_pair(
    manifest_dir: &Path,
    entry: &pc_resolve::datagen::ManifestEntry,
) -> pc_resolve::Result<(TimeSeries, TimeSeries)> {
    let coarse = read_series(&manifest_dir.join(&entry.coarse))?;
    let fine = read_series(&manifest_dir.join(&entry.fine))?;
    Ok((coarse, fine))
}

fn fmt(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> i32 {
    let manifest = match DatasetManifest::load(args.manifest_path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: cannot load manifest: {e}");
            return EXIT_SOLVER;
        }
    };
    let problem = match Problem::parse(&manifest.problem) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let weights = args
        .weights
        .unwrap_or_else(|| LossWeights::for_problem(problem));
    let dir = args.manifest_path.parent().unwrap_or(Path::new("."));
    let range = DynamicRange::for_problem(problem);
    let steps_needed = args.scheme.steps();

    let mut rows: Vec<String> = Vec::new();
    let mut sums = [0.0f64; 9];
    let mut finite_counts = [0usize; 9];
    let mut n_rows = 0usize;
    for entry in manifest
        .entries
        .iter()
        .filter(|e| args.split == "all" || e.split == args.split)
    {
        let (coarse, fine) = match load_pair(dir, entry) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: entry {}: {e}", entry.id);
                return EXIT_SOLVER;
            }
        };
        let spec = fine.spec;
        let factor = fine.frames[0].nx() / coarse.frames[0].nx();
        for n in steps_needed..fine.frames.len() {
            let u_gt = &fine.frames[n];
            let u_sr: Field2D = match args.source {
                EvalSource::Gt => u_gt.clone(),
                EvalSource::Bicubic => {
                    let mut up = match bicubic_upsample(&coarse.frames[n], factor) {
                        Ok(u) => u,
                        Err(e) => {
                            eprintln!("error: entry {} frame {n}: {e}", entry.id);
                            return EXIT_SOLVER;
                        }
                    };
                    up.grid = u_gt.grid;
                    up
                }
            };
            let hist: Vec<&Field2D> = (1..=steps_needed).map(|k| &fine.frames[n - k]).collect();
            let report = match composite_loss(
                &u_sr,
                u_gt,
                &hist,
                fine.tau,
                &spec,
                args.scheme,
                &weights,
                args.mode,
            ) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: entry {} frame {n}: {e}", entry.id);
                    return EXIT_SOLVER;
                }
            };
            let metrics = match evaluate_all(u_gt, &u_sr, range, args.mode, spec.boundary) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: entry {} frame {n}: {e}", entry.id);
                    return EXIT_SOLVER;
                }
            };
            let vals = [
                report.pixel,
                report.inner,
                report.boundary,
                report.composite,
                metrics.mse,
                metrics.psnr_db,
                metrics.ssim,
                metrics.msge,
                metrics.gsnr_db,
            ];
            for (slot, v) in vals.iter().enumerate() {
                if v.is_finite() {
                    sums[slot] += v;
                    finite_counts[slot] += 1;
                }
            }
            n_rows += 1;
            rows.push(format!("{},{},{}", entry.id, n, vals.map(fmt).join(",")));
        }
    }

    let mut csv =
        String::from("series,frame,pixel,inner,boundary,composite,mse,psnr,ssim,msge,gsnr\n");
    for r in &rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let agg: Vec<String> = sums
        .iter()
        .zip(finite_counts)
        .map(|(s, c)| {
            if c == 0 {
                "inf".to_string()
            } else {
                fmt(s / c as f64)
            }
        })
        .collect();
    csv.push_str(&format!("aggregate,{},{}\n", n_rows, agg.join(",")));
    if let Some(parent) = args.out_csv.parent() {
        if !parent.as_os_str().is_empty() {
            let _ = std::fs::create_dir_all(parent);
        }
    }
    if let Err(e) = std::fs::write(args.out_csv, csv) {
        eprintln!("error: cannot write {}: {e}", args.out_csv.display());
        return EXIT_SOLVER;
    }
    println!("evaluated {} frames -> {}", n_rows, args.out_csv.display());
    EXIT_OK
}

// ---- superres ----------------------------------------------------------------

pub struct SuperresArgs<'a> {
    pub manifest_path: &'a Path,
    pub split: &'a str,
    pub limit: usize,
    pub out_dir: &'a Path,
    pub baseline: bool,
    pub max_iters: Option<usize>,
    pub scheme: Scheme,
}

pub fn cmd_superres(args: &SuperresArgs) -> i32 {
    let manifest = match DatasetManifest::load(args.manifest_path) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: cannot load manifest: {e}");
            return EXIT_SOLVER;
        }
    };
    let problem = match Problem::parse(&manifest.problem) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(args.out_dir) {
        eprintln!("error: cannot create {}: {e}", args.out_dir.display());
        return EXIT_SOLVER;
    }
    let mut opts = SrOptions::for_problem(problem);
    opts.scheme = args.scheme;
    if let Some(it) = args.max_iters {
        opts.max_iters = it;
    }
    let dir = args.manifest_path.parent().unwrap_or(Path::new("."));
    let range = DynamicRange::for_problem(problem);
    let mut csv = String::from("series,frame,method,mse,psnr,ssim,msge,gsnr,objective,iters\n");
    let mut done = 0usize;
    for entry in manifest
        .entries
        .iter()
        .filter(|e| args.split == "all" || e.split == args.split)
    {
        if done >= args.limit {
            break;
        }
        let (coarse, fine) = match load_pair(dir, entry) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("error: entry {}: {e}", entry.id);
                return EXIT_SOLVER;
            }
        };
        let spec = fine.spec;
        let factor = fine.frames[0].nx() / coarse.frames[0].nx();
        let need = args.scheme.steps().max(2);
        for n in need..fine.frames.len() {
            if done >= args.limit {
                break;
            }
            let u_gt = &fine.frames[n];
            let hist: Vec<&Field2D> = (1..=args.scheme.steps())
                .map(|k| &fine.frames[n - k])
                .collect();
            let res = match variational_sr(
                &coarse.frames[n],
                &hist,
                fine.tau,
                &spec,
                fine.time_of(n),
                &opts,
            ) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: entry {} frame {n}: {e}", entry.id);
                    return EXIT_SOLVER;
                }
            };
            let m = match evaluate_all(u_gt, &res.u_hr, range, opts.mode, spec.boundary) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("error: {e}");
                    return EXIT_SOLVER;
                }
            };
            csv.push_str(&format!(
                "{},{},variational-sr,{},{},{},{},{},{},{}\n",
                entry.id,
                n,
                fmt(m.mse),
                fmt(m.psnr_db),
                fmt(m.ssim),
                fmt(m.msge),
                fmt(m.gsnr_db),
                fmt(*res.objective_trace.last().unwrap()),
                res.iters_used
            ));
            let (lo, hi) = pgm::value_range(u_gt);
            let pgm_path = args
                .out_dir
                .join(format!("sr_{:04}_{:04}.pgm", entry.id, n));
            if let Err(e) = pgm::write_pgm16(&pgm_path, &res.u_hr, lo, hi) {
                eprintln!("error: cannot write {}: {e}", pgm_path.display());
                return EXIT_SOLVER;
            }
            if args.baseline {
                let mut up = match bicubic_upsample(&coarse.frames[n], factor) {
                    Ok(u) => u,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_SOLVER;
                    }
                };
                up.grid = u_gt.grid;
                let mb = match evaluate_all(u_gt, &up, range, opts.mode, spec.boundary) {
                    Ok(m) => m,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return EXIT_SOLVER;
                    }
                };
                csv.push_str(&format!(
                    "{},{},bicubic,{},{},{},{},{},,\n",
                    entry.id,
                    n,
                    fmt(mb.mse),
                    fmt(mb.psnr_db),
                    fmt(mb.ssim),
                    fmt(mb.msge),
                    fmt(mb.gsnr_db)
                ));
            }
            done += 1;
        }
    }
    let csv_path = args.out_dir.join("superres.csv");
    if let Err(e) = std::fs::write(&csv_path, csv) {
        eprintln!("error: cannot write {}: {e}", csv_path.display());
        return EXIT_SOLVER;
    }
    println!("reconstructed {done} frames -> {}", args.out_dir.display());
    EXIT_OK
}

// ---- restart -------------------------------------------------------------------

pub struct RestartArgs<'a> {
    pub dataset_dir: &'a Path,
    pub entry: u32,
    pub warmup: Option<usize>,
    pub n_continue: Option<usize>,
    pub include_oracle: bool,
    pub out_dir: &'a Path,
    pub max_iters: Option<usize>,
}

pub fn cmd_restart(args: &RestartArgs) -> i32 {
    let cfg: GenConfig = match std::fs::read_to_string(args.dataset_dir.join("config.json"))
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: cannot load dataset config: {e}");
            return EXIT_SOLVER;
        }
    };
    let manifest = match DatasetManifest::load(&args.dataset_dir.join("manifest.json")) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: cannot load manifest: {e}");
            return EXIT_SOLVER;
        }
    };
    if manifest.entry(args.entry).is_none() {
        eprintln!("error: entry {} not in manifest", args.entry);
        return EXIT_CONFIG;
    }
    let n_frames = cfg.n_steps + 1;
    let warmup = args
        .warmup
        .unwrap_or_else(|| 150.min(3 * (n_frames - 1) / 5).max(3));
    let n_continue = args
        .n_continue
        .unwrap_or_else(|| 100.min(n_frames.saturating_sub(warmup + 2)).max(1));
    let mut methods = vec![RestartMethod::Bicubic, RestartMethod::VariationalSr];
    if args.include_oracle {
        methods.push(RestartMethod::Oracle);
    }
    let problem = cfg.problem;
    let mut opts = SrOptions::for_problem(problem);
    if let Some(it) = args.max_iters {
        opts.max_iters = it;
    }
    match restart_experiment(&cfg, args.entry, warmup, n_continue, &methods, &opts) {
        Ok(reports) => {
            if let Err(e) = write_restart_outputs(args.out_dir, &reports) {
                eprintln!("error: cannot write outputs: {e}");
                return EXIT_SOLVER;
            }
            for r in &reports {
                println!(
                    "{}: final L2 error {:.6e} after {} steps",
                    r.method,
                    r.l2.last().unwrap(),
                    r.l2.len()
                );
            }
            println!("outputs in {}", args.out_dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_SOLVER
        }
    }
}

// ---- analyze ---------------------------------------------------------------------

pub fn cmd_analyze(scheme: Scheme, delta: f64) -> i32 {
    let spec = SchemeSpec::for_scheme(scheme);
    let slope = consistency_order(&spec, delta);
    let expected = match scheme {
        Scheme::Bdf2 | Scheme::Cn => 3.0,
        Scheme::Ee => 2.0,
    };
    println!(
        "scheme {}: consistency slope {:.4} (theory: {:.1})",
        scheme.as_str(),
        slope,
        expected
    );
    EXIT_OK
}
