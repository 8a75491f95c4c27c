//! Paired coarse/fine time-series generation, the binary snapshot format,
//! and the dataset manifest.
//!
//! Everything here is deterministic under a fixed master seed: parameters,
//! initial conditions, and split assignment all come from a counter-based
//! hash, so regenerating a series (or the whole dataset) reproduces it
//! byte for byte.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BoundaryKind, Field2D, GridSpec, Problem, ProblemSpec};
use crate::integrators::step_solver;
use crate::physics;
use crate::sr::block_downsample;
use crate::stencils::DerivativeMode;

/// Allen-Cahn frames are clamped into [-1+1e-2, 1-1e-2].
pub const AC_CLAMP: f64 = 1.0 - 1e-2;

const MAGIC: &[u8; 4] = b"PCRS";
const FORMAT_VERSION: u16 = 1;

// ---- counter-based RNG -------------------------------------------------

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Stateless hash of (seed, words...); the basis of every random draw.
pub fn counter_hash(seed: u64, words: &[u64]) -> u64 {
    let mut acc = mix64(seed ^ 0x243F6A8885A308D3);
    for &w in words {
        acc = mix64(acc ^ w.wrapping_mul(0x9E3779B97F4A7C15));
    }
    acc
}

/// Map a hash to [0, 1).
pub fn unit_f64(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / 9007199254740992.0)
}

fn uniform(seed: u64, words: &[u64], lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * unit_f64(counter_hash(seed, words))
}

const TAG_EPS: u64 = 1;
const TAG_K: u64 = 2;
const TAG_R: u64 = 3;
const TAG_THETA: u64 = 4;
const TAG_IC_FINE: u64 = 5;
const TAG_IC_COARSE: u64 = 6;
const TAG_SPLIT: u64 = 7;
const TAG_SERIES_SEED: u64 = 8;

// ---- configuration ------------------------------------------------------

/// How the coarse initial condition relates to the fine one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcMode {
    /// Coarse IC is the block mean of the fine IC (same physical scenario).
    Nested,
    /// Coarse IC drawn independently from its own counter stream.
    Independent,
}

/// Dataset generation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub problem: Problem,
    pub boundary: BoundaryKind,
    pub n_series: usize,
    pub n_steps: usize,
    pub fine_n: usize,
    pub coarse_factor: usize,
    pub t_final: f64,
    pub master_seed: u64,
    pub eps_range: (f64, f64),
    pub k_range: (f64, f64),
    pub r_range: (f64, f64),
    pub theta_range: (f64, f64),
    /// Allen-Cahn only: when set, the product K*theta is sampled from this
    /// range and theta derived as product/K. The logarithmic reaction term
    /// only admits two-phase dynamics for K*theta below ~1.7e-5; larger
    /// products collapse every state onto zero within one step.
    pub quench_range: Option<(f64, f64)>,
    pub ic_mode: IcMode,
    /// Amplitude of the uniform per-pixel noise IC (Allen-Cahn).
    pub ic_amplitude: f64,
}

impl GenConfig {
    pub fn allen_cahn_default() -> Self {
        Self {
            problem: Problem::AllenCahn,
            boundary: BoundaryKind::Periodic,
            n_series: 40,
            n_steps: 50,
            fine_n: 64,
            coarse_factor: 8,
            t_final: 14.0,
            master_seed: 7,
            eps_range: (8e-4, 2e-3),
            k_range: (0.5, 2.0),
            r_range: (0.5, 2.0),
            theta_range: (0.0, std::f64::consts::FRAC_PI_2),
            quench_range: Some((6.5e-6, 8.5e-6)),
            ic_mode: IcMode::Nested,
            ic_amplitude: 0.1,
        }
    }

    pub fn eriksson_johnson_default() -> Self {
        Self {
            problem: Problem::ErikssonJohnson,
            boundary: BoundaryKind::Dirichlet,
            n_series: 20,
            n_steps: 100,
            fine_n: 64,
            coarse_factor: 8,
            t_final: 0.5,
            master_seed: 11,
            eps_range: (5e-3, 1e-2),
            k_range: (0.5, 2.0),
            r_range: (0.5, 2.0),
            theta_range: (0.0, std::f64::consts::FRAC_PI_2),
            quench_range: None,
            ic_mode: IcMode::Nested,
            ic_amplitude: 0.1,
        }
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_series == 0 {
            return Err(Error::InvalidArgument("n_series must be positive".into()));
        }
        if self.n_steps < 2 {
            return Err(Error::InvalidArgument(
                "n_steps must be at least 2 (BDF2 needs two history frames)".into(),
            ));
        }
        if self.coarse_factor < 2 || self.fine_n % self.coarse_factor != 0 {
            return Err(Error::NotDivisible {
                nx: self.fine_n,
                ny: self.fine_n,
                factor: self.coarse_factor,
            });
        }
        if self.fine_n / self.coarse_factor < 3 {
            return Err(Error::InvalidArgument(
                "coarse grid would have fewer than 3 points per side".into(),
            ));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidArgument("t_final must be positive".into()));
        }
        Ok(())
    }

    /// Physical parameters of series `id`.
    pub fn sample_spec(&self, id: u32) -> Result<ProblemSpec> {
        let s = self.master_seed;
        let w = id as u64;
        let eps = uniform(s, &[w, TAG_EPS], self.eps_range.0, self.eps_range.1);
        let k = uniform(s, &[w, TAG_K], self.k_range.0, self.k_range.1);
        let r = uniform(s, &[w, TAG_R], self.r_range.0, self.r_range.1);
        let theta = match (self.problem, self.quench_range) {
            (Problem::AllenCahn, Some((lo, hi))) => uniform(s, &[w, TAG_THETA], lo, hi) / k,
            _ => uniform(s, &[w, TAG_THETA], self.theta_range.0, self.theta_range.1),
        };
        ProblemSpec::new(self.problem, eps, k, r, theta, self.boundary)
    }

    fn noise_ic(&self, grid: GridSpec, id: u32, tag: u64) -> Field2D {
        let amp = self.ic_amplitude;
        let mut data = Vec::with_capacity(grid.len());
        for p in 0..grid.len() {
            let u = unit_f64(counter_hash(self.master_seed, &[id as u64, tag, p as u64]));
            data.push(-amp + 2.0 * amp * u);
        }
        Field2D { grid, data }
    }
}

// ---- time series ---------------------------------------------------------

/// Ordered frames of one run plus its step size and physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub spec: ProblemSpec,
    pub tau: f64,
    pub t0: f64,
    pub frames: Vec<Field2D>,
}

impl TimeSeries {
    /// Physical time of frame n.
    pub fn time_of(&self, n: usize) -> f64 {
        self.t0 + self.tau * n as f64
    }
}

/// Run the implicit solver for `n_steps` steps from `ic`.
///
/// Allen-Cahn frames (including the IC) are clamped into
/// [-1+1e-2, 1-1e-2]; under the default parameter ranges the clamp is a
/// safety net that never binds, so stored frames satisfy the BDF2 equation
/// exactly.
pub fn solve_series(
    spec: &ProblemSpec,
    grid: GridSpec,
    tau: f64,
    n_steps: usize,
    ic: Field2D,
    t0: f64,
) -> Result<TimeSeries> {
    if n_steps < 2 {
        return Err(Error::InvalidArgument(
            "a series needs at least 2 steps (3 frames)".into(),
        ));
    }
    if !ic.grid.same_shape(&grid) {
        return Err(Error::ShapeMismatch(
            grid.nx, grid.ny, ic.grid.nx, ic.grid.ny,
        ));
    }
    let mut ic = ic;
    if spec.problem == Problem::AllenCahn {
        ic.clamp_values(-AC_CLAMP, AC_CLAMP);
    }
    let mut frames = Vec::with_capacity(n_steps + 1);
    frames.push(ic);
    for k in 1..=n_steps {
        let hist: Vec<Field2D> = if frames.len() >= 2 {
            vec![
                frames[frames.len() - 1].clone(),
                frames[frames.len() - 2].clone(),
            ]
        } else {
            vec![frames[frames.len() - 1].clone()]
        };
        let t_next = t0 + tau * k as f64;
        let mut u = step_solver(&hist, tau, t_next, spec, DerivativeMode::StandardFD).map_err(
            |e| match e {
                Error::SolverDiverged { residual, .. } => {
                    Error::SolverDiverged { step: k, residual }
                }
                other => other,
            },
        )?;
        if spec.problem == Problem::AllenCahn {
            u.clamp_values(-AC_CLAMP, AC_CLAMP);
        }
        frames.push(u);
    }
    Ok(TimeSeries {
        spec: *spec,
        tau,
        t0,
        frames,
    })
}

/// Regenerate the coarse and fine runs of one series, in full 64-bit
/// precision, from the configuration alone.
pub fn generate_entry_series(cfg: &GenConfig, id: u32) -> Result<(TimeSeries, TimeSeries)> {
    cfg.validate()?;
    let spec = cfg.sample_spec(id)?;
    let fine_grid = spec.grid(cfg.fine_n)?;
    let coarse_n = cfg.fine_n / cfg.coarse_factor;
    let coarse_grid = spec.grid(coarse_n)?;
    let tau = cfg.tau();

    let (ic_fine, ic_coarse) = match cfg.problem {
        Problem::AllenCahn => {
            let fine = cfg.noise_ic(fine_grid, id, TAG_IC_FINE);
            let coarse = match cfg.ic_mode {
                IcMode::Nested => block_downsample(&fine, cfg.coarse_factor)?,
                IcMode::Independent => cfg.noise_ic(coarse_grid, id, TAG_IC_COARSE),
            };
            (fine, coarse)
        }
        Problem::ErikssonJohnson => {
            let params = physics::ej_params_for(&spec)?;
            (
                physics::ej_field(fine_grid, 0.0, &params),
                physics::ej_field(coarse_grid, 0.0, &params),
            )
        }
    };

    let fine = solve_series(&spec, fine_grid, tau, cfg.n_steps, ic_fine, 0.0)?;
    let coarse = solve_series(&spec, coarse_grid, tau, cfg.n_steps, ic_coarse, 0.0)?;
    Ok((coarse, fine))
}

// ---- manifest ------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub epsilon: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub r: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u32,
    pub split: String,
    pub params: ParamSet,
    pub seed: u64,
    pub tau: f64,
    pub n_frames: u32,
    pub coarse: String,
    pub fine: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedSeries {
    pub id: u32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub problem: String,
    pub boundary: String,
    pub entries: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failed: Vec<FailedSeries>,
}

impl DatasetManifest {
    pub fn entry(&self, id: u32) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Split sizes: floor(15%) validation, round(15%) test, remainder training.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let val = (0.15 * n as f64).floor() as usize;
    let test = (0.15 * n as f64).round() as usize;
    (n - val - test, val, test)
}

/// Deterministic split assignment over the surviving series ids.
pub fn assign_splits(ids: &[u32], master_seed: u64) -> Vec<(u32, &'static str)> {
    let mut shuffled: Vec<u32> = ids.to_vec();
    // Fisher-Yates driven by the counter hash
    for i in (1..shuffled.len()).rev() {
        let j = (counter_hash(master_seed, &[TAG_SPLIT, i as u64]) % (i as u64 + 1)) as usize;
        shuffled.swap(i, j);
    }
    let (_, n_val, n_test) = split_sizes(shuffled.len());
    let mut out: Vec<(u32, &'static str)> = Vec::with_capacity(shuffled.len());
    for (pos, &id) in shuffled.iter().enumerate() {
        let tag = if pos < n_val {
            "val"
        } else if pos < n_val + n_test {
            "test"
        } else {
            "train"
        };
        out.push((id, tag));
    }
    out.sort_by_key(|(id, _)| *id);
    out
}

/// Generate the full dataset on disk: one coarse and one fine binary file
/// per series plus `manifest.json` and a copy of the configuration
/// (`config.json`) for exact regeneration.
pub fn generate_dataset(cfg: &GenConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;

    let results: Vec<(u32, Result<(TimeSeries, TimeSeries)>)> = (0..cfg.n_series as u32)
        .into_par_iter()
        .map(|id| (id, generate_entry_series(cfg, id)))
        .collect();

    let mut ok_ids = Vec::new();
    let mut failed = Vec::new();
    let mut stored: Vec<(u32, ParamSet, String, String, u32)> = Vec::new();
    for (id, res) in results {
        match res {
            Ok((coarse, fine)) => {
                let coarse_name = format!("series_{id:04}_coarse.pcrs");
                let fine_name = format!("series_{id:04}_fine.pcrs");
                write_series(&out_dir.join(&coarse_name), &coarse)?;
                write_series(&out_dir.join(&fine_name), &fine)?;
                let s = coarse.spec;
                ok_ids.push(id);
                stored.push((
                    id,
                    ParamSet {
                        epsilon: s.epsilon,
                        k: s.k,
                        r: s.r,
                        theta: s.theta,
                    },
                    coarse_name,
                    fine_name,
                    fine.frames.len() as u32,
                ));
            }
            Err(e) => failed.push(FailedSeries {
                id,
                error: e.to_string(),
            }),
        }
    }

    let splits = assign_splits(&ok_ids, cfg.master_seed);
    let entries = stored
        .into_iter()
        .zip(splits)
        .map(|((id, params, coarse, fine, n_frames), (sid, split))| {
            debug_assert_eq!(id, sid);
            ManifestEntry {
                id,
                split: split.to_string(),
                params,
                seed: counter_hash(cfg.master_seed, &[id as u64, TAG_SERIES_SEED]),
                tau: cfg.tau(),
                n_frames,
                coarse,
                fine,
            }
        })
        .collect();

    let manifest = DatasetManifest {
        version: 1,
        problem: cfg.problem.as_str().to_string(),
        boundary: cfg.boundary.as_str().to_string(),
        entries,
        failed,
    };
    let mut manifest_text = serde_json::to_string_pretty(&manifest)?;
    manifest_text.push('\n');
    fs::write(out_dir.join("manifest.json"), manifest_text)?;
    let mut cfg_text = serde_json::to_string_pretty(cfg)?;
    cfg_text.push('\n');
    fs::write(out_dir.join("config.json"), cfg_text)?;
    Ok(manifest)
}

// ---- binary format --------------------------------------------------------
//
// magic "PCRS", u16 version=1, u16 flags, u32 nx, u32 ny, u32 n_frames,
// f64 tau, f64 t0, u8 problem id (0 = Allen-Cahn, 1 = Eriksson-Johnson),
// u8 boundary id (0 = Dirichlet, 1 = Neumann, 2 = Periodic),
// 4 x f64 params (epsilon, K, r, theta);
// then frames as little-endian f32, row-major, frame-major.

fn problem_id(p: Problem) -> u8 {
    match p {
        Problem::AllenCahn => 0,
        Problem::ErikssonJohnson => 1,
    }
}

fn boundary_id(b: BoundaryKind) -> u8 {
    match b {
        BoundaryKind::Dirichlet => 0,
        BoundaryKind::Neumann => 1,
        BoundaryKind::Periodic => 2,
    }
}

pub fn write_series(path: &Path, ts: &TimeSeries) -> Result<()> {
    if ts.frames.is_empty() {
        return Err(Error::InvalidArgument(
            "refusing to write a series with no frames".into(),
        ));
    }
    let grid = ts.frames[0].grid;
    for f in &ts.frames {
        if !f.grid.same_shape(&grid) {
            return Err(Error::ShapeMismatch(grid.nx, grid.ny, f.grid.nx, f.grid.ny));
        }
    }
    let mut buf = Vec::with_capacity(34 + 32 + ts.frames.len() * grid.len() * 4);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes()); // flags
    buf.extend_from_slice(&(grid.nx as u32).to_le_bytes());
    buf.extend_from_slice(&(grid.ny as u32).to_le_bytes());
    buf.extend_from_slice(&(ts.frames.len() as u32).to_le_bytes());
    buf.extend_from_slice(&ts.tau.to_le_bytes());
    buf.extend_from_slice(&ts.t0.to_le_bytes());
    buf.push(problem_id(ts.spec.problem));
    buf.push(boundary_id(ts.spec.boundary));
    buf.extend_from_slice(&ts.spec.epsilon.to_le_bytes());
    buf.extend_from_slice(&ts.spec.k.to_le_bytes());
    buf.extend_from_slice(&ts.spec.r.to_le_bytes());
    buf.extend_from_slice(&ts.spec.theta.to_le_bytes());
    for f in &ts.frames {
        for &v in &f.data {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                what: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut c = Cursor { buf: &buf, pos: 0 };

    let magic = c.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::Format {
            offset: 0,
            what: format!("bad magic bytes {magic:02x?}"),
        });
    }
    let version = c.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Format {
            offset: 4,
            what: format!("unsupported version {version}"),
        });
    }
    let _flags = c.u16("flags")?;
    let nx = c.u32("nx")? as usize;
    let ny = c.u32("ny")? as usize;
    let n_frames = c.u32("n_frames")? as usize;
    let tau = c.f64("tau")?;
    let t0 = c.f64("t0")?;
    let pid = c.u8("problem id")?;
    let bid = c.u8("boundary id")?;
    let problem = match pid {
        0 => Problem::AllenCahn,
        1 => Problem::ErikssonJohnson,
        other => {
            return Err(Error::Format {
                offset: (c.pos - 2) as u64,
                what: format!("unknown problem id {other}"),
            })
        }
    };
    let boundary = match bid {
        0 => BoundaryKind::Dirichlet,
        1 => BoundaryKind::Neumann,
        2 => BoundaryKind::Periodic,
        other => {
            return Err(Error::Format {
                offset: (c.pos - 1) as u64,
                what: format!("unknown boundary id {other}"),
            })
        }
    };
    let epsilon = c.f64("epsilon")?;
    let k = c.f64("K")?;
    let r = c.f64("r")?;
    let theta = c.f64("theta")?;
    let spec =
        ProblemSpec::new(problem, epsilon, k, r, theta, boundary).map_err(|e| Error::Format {
            offset: 34,
            what: format!("inconsistent header parameters: {e}"),
        })?;
    let grid = spec.domain.grid(nx, ny).map_err(|e| Error::Format {
        offset: 8,
        what: format!("bad grid dimensions: {e}"),
    })?;

    let mut frames = Vec::with_capacity(n_frames);
    for fi in 0..n_frames {
        let raw = c.take(nx * ny * 4, &format!("frame {fi}"))?;
        let mut data = Vec::with_capacity(nx * ny);
        for chunk in raw.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: (c.pos - raw.len()) as u64,
                    what: format!("non-finite value in frame {fi}"),
                });
            }
            data.push(v);
        }
        frames.push(Field2D { grid, data });
    }
    if c.pos != buf.len() {
        return Err(Error::Format {
            offset: c.pos as u64,
            what: format!("{} trailing bytes after payload", buf.len() - c.pos),
        });
    }
    Ok(TimeSeries {
        spec,
        tau,
        t0,
        frames,
    })
}

/// Quantize a field to f32 and back, matching what a write/read round trip
/// does to the payload.
pub fn quantize_f32(f: &Field2D) -> Field2D {
    f.map(|v| v as f32 as f64)
}
