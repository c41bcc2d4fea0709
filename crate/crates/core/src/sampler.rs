//! Random canonical IO/SIO channels and Monte-Carlo section regions.
//!
//! A channel is sampled column by column. Column `j` of the system collects
//! one coefficient per class (the entry of that class in column `j`).
//! Completeness asks each coefficient vector to be a unit vector and, for
//! `j ≠ j'`, the coefficients of classes sending both columns to the same row
//! to be orthogonal. Each new column is a complex Gaussian vector projected
//! off those masked constraints and normalised.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::SeedableRng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bloch::{
    check_conditions, max_length, push_forward_linear, section_of, bloch_to_density_linear, BlochError,
    BlochVector3, ConditionReport, PSD_TOL,
};
use crate::channel::{hand_table, KrausOperator, KrausSet, Regime};
use crate::densemath::{fix_phase, orthonormalize, vdot, vnorm, Complex, ZERO};

/// A projected column shorter than this fraction of the raw draw is redrawn.
const DEGENERACY_RATIO: f64 = 1e-6;
/// Region samples from index 2 on are drawn in chunks of this size, each
/// from its own generator stream.
pub const CHUNK: usize = 256;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("column {column}: no admissible draw after {retries} attempts")]
    RetriesExhausted { column: usize, retries: usize },
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid region request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Bloch(#[from] BlochError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub regime: Regime,
    pub seed: u64,
    pub max_retries: usize,
    /// 1-based class numbers; `None` samples every class of the regime.
    pub active_classes: Option<Vec<usize>>,
    /// Draw real coefficients only.
    pub real_entries: bool,
}

impl SamplerConfig {
    pub fn new(regime: Regime, seed: u64) -> Self {
        Self {
            regime,
            seed,
            max_retries: 64,
            active_classes: None,
            real_entries: false,
        }
    }

    fn classes(&self) -> Result<Vec<usize>, SamplerError> {
        let n = self.regime.class_count();
        if self.max_retries == 0 {
            return Err(SamplerError::InvalidConfig("max_retries must be at least 1".into()));
        }
        match &self.active_classes {
            None => Ok((1..=n).collect()),
            Some(list) => {
                let mut v = list.clone();
                v.sort_unstable();
                v.dedup();
                if v.is_empty() || v.len() != list.len() || v[0] == 0 || v[v.len() - 1] > n {
                    return Err(SamplerError::InvalidConfig(format!(
                        "active classes must be distinct values in 1..={n}"
                    )));
                }
                Ok(v)
            }
        }
    }
}

fn draw(rng: &mut impl Rng, real: bool) -> Complex {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
    Complex::new(re, im)
}

/// Samples one channel; also returns the number of redraws.
pub fn sample_channel_counted(cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<(KrausSet, usize), SamplerError> {
    let classes = cfg.classes()?;
    let table = hand_table(cfg.regime);
    let sigs: Vec<_> = classes.iter().map(|&n| &table[n - 1]).collect();
    let d = cfg.regime.dim();
    let mut columns: Vec<Vec<Complex>> = Vec::with_capacity(d);
    let mut retries = 0;
    for j in 0..d {
        let support: Vec<bool> = sigs.iter().map(|s| s.0[j].is_some()).collect();
        if !support.contains(&true) {
            columns.push(vec![ZERO; sigs.len()]);
            continue;
        }
        let constraints: Vec<Vec<Complex>> = columns
            .iter()
            .enumerate()
            .map(|(jp, v)| {
                sigs.iter()
                    .zip(v)
                    .map(|(s, &z)| if s.0[j].is_some() && s.0[j] == s.0[jp] { z } else { ZERO })
                    .collect()
            })
            .collect();
        let basis = orthonormalize(&constraints, 1e-12);
        let mut attempts = 0;
        let column = loop {
            let mut v: Vec<Complex> = support
                .iter()
                .map(|&on| if on { draw(rng, cfg.real_entries) } else { ZERO })
                .collect();
            let n0 = vnorm(&v);
            for _ in 0..2 {
                for q in &basis {
                    let c = vdot(q, &v);
                    for (x, y) in v.iter_mut().zip(q) {
                        *x -= c * y;
                    }
                }
            }
            let n = vnorm(&v);
            attempts += 1;
            if n > DEGENERACY_RATIO * n0 {
                break v.into_iter().map(|z| z / n).collect::<Vec<_>>();
            }
            retries += 1;
            if attempts >= cfg.max_retries {
                return Err(SamplerError::RetriesExhausted { column: j, retries: attempts });
            }
        };
        columns.push(column);
    }
    let ops = sigs
        .iter()
        .enumerate()
        .map(|(k, sig)| {
            let mut vals: Vec<Complex> = (0..d).map(|j| columns[j][k]).collect();
            fix_phase(&mut vals);
            let entries: Vec<_> = (0..d).filter_map(|j| sig.0[j].map(|r| ((r, j), vals[j]))).collect();
            KrausOperator::from_entries(d, &entries)
        })
        .collect();
    let set = KrausSet::new(d, ops).map_err(|e| SamplerError::InvalidConfig(e.to_string()))?;
    Ok((set, retries))
}

/// Samples one channel with operators in class order.
pub fn sample_channel(cfg: &SamplerConfig, rng: &mut impl Rng) -> Result<KrausSet, SamplerError> {
    sample_channel_counted(cfg, rng).map(|(s, _)| s)
}

/// Samples one channel from a generator seeded with `cfg.seed`.
pub fn sample_seeded(cfg: &SamplerConfig) -> Result<KrausSet, SamplerError> {
    sample_channel(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Sio,
    Io,
}

impl ChannelKind {
    pub fn regime(self) -> Regime {
        match self {
            ChannelKind::Sio => Regime::QutritSIO15,
            ChannelKind::Io => Regime::QutritIO39,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionRequest {
    pub t: BlochVector3,
    pub n_samples: usize,
    pub kind: ChannelKind,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionPoint {
    pub index: usize,
    pub m: BlochVector3,
    pub report: ConditionReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegionSummary {
    pub n_samples: usize,
    /// Whether the initial vector reconstructs to a positive matrix. Images
    /// of a non-positive initial vector are still computed through the
    /// linear action.
    pub initial_physical: bool,
    pub min: [f64; 8],
    pub max: [f64; 8],
    /// Applicable records with `satisfied = false`, per condition id.
    pub violations: [usize; 4],
    pub retries: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub points: Vec<RegionPoint>,
    pub summary: RegionSummary,
}

/// Thread count from `KF_THREADS`, else the available parallelism.
pub fn thread_count() -> usize {
    std::env::var("KF_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

pub fn sample_region(req: &RegionRequest) -> Result<Region, SamplerError> {
    sample_region_with_threads(req, thread_count())
}

/// Same stream as [`sample_region`] for any thread count.
pub fn sample_region_with_threads(req: &RegionRequest, threads: usize) -> Result<Region, SamplerError> {
    if section_of(&req.t).is_none() {
        return Err(SamplerError::InvalidRequest("t must have exactly two nonzero coordinates".into()));
    }
    let len = req.t.norm();
    if len > max_length() + 1e-12 {
        return Err(SamplerError::InvalidRequest(format!("|t| = {len:.6} exceeds 2/√3")));
    }
    let initial_physical = bloch_to_density_linear(&req.t).hermitian_eigenvalues()[0] >= -PSD_TOL;
    let cfg = SamplerConfig::new(req.kind.regime(), req.seed);
    let point = |index: usize, s: &KrausSet| -> Result<RegionPoint, SamplerError> {
        let m = push_forward_linear(s, &req.t)?;
        Ok(RegionPoint {
            index,
            m,
            report: check_conditions(&req.t, &m),
        })
    };

    let mut points = Vec::with_capacity(req.n_samples);
    let fixed = [KrausSet::identity(3), KrausSet::dephasing(3)];
    for (index, s) in fixed.iter().enumerate().take(req.n_samples) {
        points.push(point(index, s)?);
    }
    let random = req.n_samples.saturating_sub(2);
    let chunks: Vec<usize> = (0..random.div_ceil(CHUNK)).collect();
    let run_chunk = |&chunk: &usize| -> Result<(Vec<RegionPoint>, usize), SamplerError> {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        rng.set_stream(chunk as u64);
        let start = 2 + chunk * CHUNK;
        let end = (start + CHUNK).min(req.n_samples);
        let mut out = Vec::with_capacity(end - start);
        let mut retries = 0;
        for index in start..end {
            let (s, r) = sample_channel_counted(&cfg, &mut rng)?;
            retries += r;
            out.push(point(index, &s)?);
        }
        Ok((out, retries))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| SamplerError::InvalidConfig(e.to_string()))?;
    let results: Vec<_> = pool.install(|| chunks.par_iter().map(run_chunk).collect());
    let mut retries = 0;
    for r in results {
        let (pts, n) = r?;
        retries += n;
        points.extend(pts);
    }

    let mut min = [f64::INFINITY; 8];
    let mut max = [f64::NEG_INFINITY; 8];
    let mut violations = [0; 4];
    for p in &points {
        for k in 0..8 {
            min[k] = min[k].min(p.m.t[k]);
            max[k] = max[k].max(p.m.t[k]);
        }
        for (v, rec) in violations.iter_mut().zip(&p.report.records) {
            if rec.applicable && !rec.satisfied {
                *v += 1;
            }
        }
    }
    if points.is_empty() {
        min = [0.0; 8];
        max = [0.0; 8];
    }
    Ok(Region {
        summary: RegionSummary {
            n_samples: points.len(),
            initial_physical,
            min,
            max,
            violations,
            retries,
        },
        points,
    })
}
