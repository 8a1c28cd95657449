//! Patch counts against necessary minutiae numbers, identity-link Poisson
//! regression, simulation studies of the sampler and the deletion
//! experiment with a pluggable match scorer.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::field::{FieldError, FieldModel, RegionOfInterest, StarRegion};
use crate::geometry::Point;
use crate::inference::{run_miseal, AcceptanceStats, InferenceError, Priors, ProposalSettings, Schedule, Theta};
use crate::point_process::{sample_poisson, sample_strauss_hardcore, InteractionRadii, PointProcessError, StraussParams, Trend};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{mean, quantile, std_error};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("need at least three observations")]
    TooFewObservations,
    #[error("all covariate values are equal")]
    ConstantCovariate,
    #[error("all counts are zero")]
    Separation,
    #[error("iteration did not converge")]
    NonConvergence,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("scorer failed: {0}")]
    ScorerFailure(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    PointProcess(#[from] PointProcessError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

/// One rectangular tile of the raster, clipped to the mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Patch {
    /// Pixel ranges `[x0, x1) × [y0, y1)`.
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
    /// Area of the in-mask part.
    pub area: f64,
    pub rect: StarRegion,
}

/// Rectangular tiling of the raster into about `target` patches with the
/// raster's aspect ratio; tiles without mask pixels are dropped.
#[derive(Clone, Debug)]
pub struct PatchGrid {
    pub patches: Vec<Patch>,
    nx: usize,
    xs: Vec<usize>,
    ys: Vec<usize>,
    /// Patch index of each tile, `None` when the tile was dropped.
    tile_patch: Vec<Option<usize>>,
}

impl PatchGrid {
    pub fn new(roi: &RegionOfInterest, target: usize) -> Result<Self, AnalysisError> {
        if target == 0 {
            return Err(AnalysisError::InvalidSettings("target patch count must be positive".into()));
        }
        let g = *roi.geometry();
        let aspect = g.width as f64 / g.height as f64;
        let nx = ((target as f64 * aspect).sqrt().round() as usize).clamp(1, g.width);
        let ny = ((target as f64 / nx as f64).round() as usize).clamp(1, g.height);
        let cuts = |n: usize, len: usize| (0..=n).map(|k| k * len / n).collect::<Vec<_>>();
        let (xs, ys) = (cuts(nx, g.width), cuts(ny, g.height));
        let half = 0.5 * g.pixel_size;
        let mut patches = Vec::new();
        let mut tile_patch = Vec::with_capacity(nx * ny);
        for ty in 0..ny {
            for tx in 0..nx {
                let (x0, x1, y0, y1) = (xs[tx], xs[tx + 1], ys[ty], ys[ty + 1]);
                let inside = (y0..y1)
                    .flat_map(|iy| (x0..x1).map(move |ix| (ix, iy)))
                    .filter(|&(ix, iy)| roi.contains_pixel(ix, iy))
                    .count();
                if inside == 0 {
                    tile_patch.push(None);
                    continue;
                }
                let lo = g.center(x0, y0);
                let hi = g.center(x1 - 1, y1 - 1);
                let rect = StarRegion::rectangle(
                    Point::new(lo.x - half, lo.y - half),
                    Point::new(hi.x + half, hi.y + half),
                )?;
                tile_patch.push(Some(patches.len()));
                patches.push(Patch {
                    x0,
                    x1,
                    y0,
                    y1,
                    area: inside as f64 * g.pixel_size * g.pixel_size,
                    rect,
                });
            }
        }
        Ok(PatchGrid {
            patches,
            nx,
            xs,
            ys,
            tile_patch,
        })
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    /// Patch holding pixel `(ix, iy)`.
    pub fn patch_of_pixel(&self, ix: usize, iy: usize) -> Option<usize> {
        let tx = self.xs.partition_point(|&c| c <= ix).checked_sub(1)?;
        let ty = self.ys.partition_point(|&c| c <= iy).checked_sub(1)?;
        if tx + 1 >= self.xs.len() || ty + 1 >= self.ys.len() {
            return None;
        }
        self.tile_patch[ty * self.nx + tx]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchRecord {
    pub patch: usize,
    pub m: f64,
    pub count: u64,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchCounts {
    pub records: Vec<PatchRecord>,
    /// Patches discarded because m(A) could not be computed there, mostly
    /// near singularities.
    pub excluded: Vec<usize>,
}

impl PatchCounts {
    pub fn regression_data(&self) -> Vec<(f64, u64)> {
        self.records.iter().map(|r| (r.m, r.count)).collect()
    }
}

/// m(A) over the in-mask part of every patch and the number of `minutiae`
/// on its in-mask pixels.
pub fn patch_counts(minutiae: &[Point], model: &FieldModel, grid: &PatchGrid) -> PatchCounts {
    let g = model.geometry();
    let mut counts = vec![0u64; grid.len()];
    for p in minutiae {
        if let Some((ix, iy)) = g.pixel_of(*p) {
            if model.is_in_mask(g.index(ix, iy)) {
                if let Some(k) = grid.patch_of_pixel(ix, iy) {
                    counts[k] += 1;
                }
            }
        }
    }
    let ms: Vec<Result<f64, FieldError>> = grid
        .patches
        .par_iter()
        .map(|patch| model.necessary_minutiae_number_area_clipped(&patch.rect))
        .collect();
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    for (k, m) in ms.into_iter().enumerate() {
        match m {
            Ok(m) => records.push(PatchRecord {
                patch: k,
                m,
                count: counts[k],
                area: grid.patches[k].area,
            }),
            Err(_) => excluded.push(k),
        }
    }
    PatchCounts { records, excluded }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionResult {
    pub beta0: f64,
    pub beta1: f64,
    pub se0: f64,
    pub se1: f64,
    pub ci0: (f64, f64),
    pub ci1: (f64, f64),
    /// One-sided likelihood-ratio p-value for β₀ > 0 against β₀ = 0.
    pub p_value_intercept: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub data: Vec<(f64, u64)>,
}

const BARRIER_START: f64 = 1.0;
const BARRIER_END: f64 = 1e-8;
const MAX_NEWTON: usize = 200;

fn poisson_loglik(data: &[(f64, u64)], b0: f64, b1: f64) -> f64 {
    data.iter()
        .map(|&(m, y)| {
            let mu = b0 + b1 * m;
            if y == 0 {
                -mu
            } else if mu > 0.0 {
                y as f64 * mu.ln() - mu
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// Maximises Σ (y + τ) log μ − μ with μ = b0 + b1·m, the Poisson
/// log-likelihood plus a log barrier of weight τ, by damped Newton steps.
fn barrier_newton(data: &[(f64, u64)], tau: f64, start: (f64, f64)) -> Result<((f64, f64), usize), AnalysisError> {
    let objective = |b: (f64, f64)| -> f64 {
        let mut v = 0.0;
        for &(m, y) in data {
            let mu = b.0 + b.1 * m;
            if mu <= 0.0 {
                return f64::NEG_INFINITY;
            }
            v += (y as f64 + tau) * mu.ln() - mu;
        }
        v
    };
    let mut b = start;
    let mut f = objective(b);
    for it in 1..=MAX_NEWTON {
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(m, y) in data {
            let mu = b.0 + b.1 * m;
            let w = (y as f64 + tau) / mu;
            g0 += w - 1.0;
            g1 += (w - 1.0) * m;
            let c = w / mu;
            h00 += c;
            h01 += c * m;
            h11 += c * m * m;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            return Err(AnalysisError::NonConvergence);
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        let mut step = 1.0;
        loop {
            let cand = (b.0 + step * d0, b.1 + step * d1);
            let fc = objective(cand);
            if fc >= f - 1e-12 * f.abs() {
                b = cand;
                f = fc;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(AnalysisError::NonConvergence);
            }
        }
        let dec = g0 * d0 + g1 * d1;
        if dec.abs() < 1e-18 * (1.0 + f.abs()) || (step * d0).abs().max((step * d1).abs()) < 1e-13 * (1.0 + b.0.abs() + b.1.abs()) {
            return Ok((b, it));
        }
    }
    Err(AnalysisError::NonConvergence)
}

/// Maximum likelihood fit of counts ~ Poisson(β₀ + β₁ m) with 95% Wald
/// intervals from the observed information.
pub fn poisson_regression_identity(data: &[(f64, u64)]) -> Result<RegressionResult, AnalysisError> {
    if data.len() < 3 {
        return Err(AnalysisError::TooFewObservations);
    }
    let m_min = data.iter().map(|d| d.0).fold(f64::INFINITY, f64::min);
    let m_max = data.iter().map(|d| d.0).fold(f64::NEG_INFINITY, f64::max);
    if !(m_max > m_min) || !m_min.is_finite() || !m_max.is_finite() {
        return Err(AnalysisError::ConstantCovariate);
    }
    let total: u64 = data.iter().map(|d| d.1).sum();
    if total == 0 {
        return Err(AnalysisError::Separation);
    }
    // Flat line at the mean count is strictly feasible.
    let mut b = (total as f64 / data.len() as f64, 0.0);
    let mut tau = BARRIER_START;
    let mut iterations = 0;
    loop {
        let (nb, it) = barrier_newton(data, tau, b)?;
        b = nb;
        iterations += it;
        if tau <= BARRIER_END {
            break;
        }
        tau = (tau * 0.1).max(BARRIER_END);
    }
    let (b0, b1) = b;
    let (mut i00, mut i01, mut i11) = (0.0, 0.0, 0.0);
    for &(m, y) in data {
        let mu = b0 + b1 * m;
        let c = y as f64 / (mu * mu);
        i00 += c;
        i01 += c * m;
        i11 += c * m * m;
    }
    let det = i00 * i11 - i01 * i01;
    let (se0, se1) = if det > 0.0 {
        ((i11 / det).sqrt(), (i00 / det).sqrt())
    } else {
        (f64::NAN, f64::NAN)
    };
    let z = 1.959_963_984_540_054;
    let log_likelihood = poisson_loglik(data, b0, b1);

    // Under β₀ = 0 the MLE of the slope is Σy/Σm.
    let m_sum: f64 = data.iter().map(|d| d.0).sum();
    let null = if m_sum > 0.0 {
        poisson_loglik(data, 0.0, total as f64 / m_sum)
    } else {
        f64::NEG_INFINITY
    };
    let lr = (2.0 * (log_likelihood - null)).max(0.0);
    let signed_root = b0.signum() * lr.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p_value_intercept = if lr.is_infinite() { 0.0 } else { normal.sf(signed_root) };

    Ok(RegressionResult {
        beta0: b0,
        beta1: b1,
        se0,
        se1,
        ci0: (b0 - z * se0, b0 + z * se0),
        ci1: (b1 - z * se1, b1 + z * se1),
        p_value_intercept,
        log_likelihood,
        iterations,
        data: data.to_vec(),
    })
}

/// Settings shared by every replicate of a simulation study.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StudySettings {
    pub radii: InteractionRadii,
    pub proposal: ProposalSettings,
    pub schedule: Schedule,
    pub replicates: usize,
    /// Central credible level of the reported intervals.
    pub credible_level: f64,
    /// Birth–death–move steps for simulating the necessary points; `None`
    /// uses the sampler's default.
    pub simulation_steps: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicateReport {
    pub index: usize,
    pub field_set: usize,
    pub seed: u64,
    pub truth: Theta,
    pub n_random: usize,
    pub n_necessary: usize,
    pub posterior_mean: Theta,
    /// Central credible intervals for (λ, β, γ).
    pub intervals: [(f64, f64); 3],
    pub covered: [bool; 3],
    pub acceptance: AcceptanceStats,
    /// Fraction of simulated random points with label-1 frequency below 0.5.
    pub random_recognised: f64,
    /// Fraction of simulated necessary points with label-1 frequency of at
    /// least 0.5.
    pub necessary_recognised: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyReport {
    pub replicates: Vec<ReplicateReport>,
}

impl StudyReport {
    /// Replicates whose interval covers the truth, per parameter (λ, β, γ).
    pub fn coverage_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for r in &self.replicates {
            for k in 0..3 {
                c[k] += r.covered[k] as usize;
            }
        }
        c
    }

    /// Replicates in which the posterior mean of β exceeds the truth.
    pub fn beta_overestimated(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.posterior_mean.beta > r.truth.beta)
            .count()
    }
}

fn theta_component(t: &Theta, k: usize) -> f64 {
    match k {
        0 => t.lambda,
        1 => t.beta,
        _ => t.gamma,
    }
}

/// Draws θ from the priors, simulates a superposition of random and
/// necessary minutiae on one of the `trends` and runs the sampler on it,
/// once per replicate. Replicate `i` uses field set `i mod len` and seed
/// `derive_seed(seed, i)`.
pub fn simulation_study(
    trends: &[Trend],
    priors: &Priors,
    settings: &StudySettings,
    seed: u64,
) -> Result<StudyReport, AnalysisError> {
    if trends.is_empty() {
        return Err(AnalysisError::InvalidSettings("need at least one field set".into()));
    }
    if !(settings.credible_level > 0.0 && settings.credible_level < 1.0) {
        return Err(AnalysisError::InvalidSettings("credible level must lie in (0, 1)".into()));
    }
    priors.validate()?;
    let replicates: Result<Vec<ReplicateReport>, AnalysisError> = (0..settings.replicates)
        .into_par_iter()
        .map(|i| run_replicate(i, trends, priors, settings, derive_seed(seed, i as u64)))
        .collect();
    Ok(StudyReport {
        replicates: replicates?,
    })
}

fn run_replicate(
    index: usize,
    trends: &[Trend],
    priors: &Priors,
    settings: &StudySettings,
    seed: u64,
) -> Result<ReplicateReport, AnalysisError> {
    let field_set = index % trends.len();
    let trend = &trends[field_set];
    let mut rng = rng_from_seed(seed);
    let mut draw = || -> Result<(Theta, Vec<Point>, Vec<Point>), AnalysisError> {
        let truth = priors.sample(&mut rng);
        let xi = sample_poisson(trend.roi(), truth.lambda, &mut rng)?;
        let params = StraussParams::new(truth.beta, truth.gamma, settings.radii)?;
        let eta = sample_strauss_hardcore(trend, params, settings.simulation_steps, &mut rng)?;
        Ok((truth, xi.into_points(), eta.into_points()))
    };
    // An empty superposition carries no information; redraw.
    let (truth, xi, eta) = loop {
        let d = draw()?;
        if !d.1.is_empty() || !d.2.is_empty() {
            break d;
        }
    };
    let zeta: Vec<Point> = xi.iter().chain(&eta).copied().collect();
    let chain_seed = rng.random::<u64>();
    let trace = run_miseal(
        &zeta,
        trend,
        &settings.radii,
        priors,
        &settings.proposal,
        &settings.schedule,
        chain_seed,
    )?;
    let alpha = 0.5 * (1.0 - settings.credible_level);
    let (posterior_mean, intervals) = match trace.posterior_mean() {
        Some(m) => {
            let mut iv = [(0.0, 0.0); 3];
            for (k, slot) in iv.iter_mut().enumerate() {
                let xs: Vec<f64> = trace.records.iter().map(|r| theta_component(&Theta { lambda: r.lambda, beta: r.beta, gamma: r.gamma }, k)).collect();
                *slot = (quantile(&xs, alpha), quantile(&xs, 1.0 - alpha));
            }
            (m, iv)
        }
        None => {
            let m = priors.mean();
            (m, [(m.lambda, m.lambda), (m.beta, m.beta), (m.gamma, m.gamma)])
        }
    };
    let mut covered = [false; 3];
    for k in 0..3 {
        let t = theta_component(&truth, k);
        covered[k] = intervals[k].0 <= t && t <= intervals[k].1;
    }
    let freq = &trace.label_frequencies;
    let share = |range: std::ops::Range<usize>, want_necessary: bool| {
        if range.is_empty() {
            return f64::NAN;
        }
        let len = range.len();
        range.filter(|&i| (freq[i] >= 0.5) == want_necessary).count() as f64 / len as f64
    };
    Ok(ReplicateReport {
        index,
        field_set,
        seed,
        truth,
        n_random: xi.len(),
        n_necessary: eta.len(),
        posterior_mean,
        intervals,
        covered,
        acceptance: trace.acceptance,
        random_recognised: share(0..xi.len(), false),
        necessary_recognised: share(xi.len()..zeta.len(), true),
    })
}

/// Similarity S(ζ⁽¹⁾, ζ⁽²⁾) ∈ [0, 1] of two minutiae patterns.
pub trait MatchScorer: Sync {
    fn score(&self, a: &[Point], b: &[Point]) -> Result<f64, AnalysisError>;
}

/// Greedy nearest-neighbour pairing: pairs closer than `radius` are matched
/// in order of increasing distance, each point at most once, and the score
/// is 2·matches/(n₁ + n₂). Purely positional; not a minutiae cylinder code.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreedyMatchScorer {
    pub radius: f64,
}

impl Default for GreedyMatchScorer {
    fn default() -> Self {
        GreedyMatchScorer { radius: 15.0 }
    }
}

impl MatchScorer for GreedyMatchScorer {
    fn score(&self, a: &[Point], b: &[Point]) -> Result<f64, AnalysisError> {
        if a.is_empty() && b.is_empty() {
            return Ok(1.0);
        }
        let r2 = self.radius * self.radius;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (i, p) in a.iter().enumerate() {
            for (j, q) in b.iter().enumerate() {
                let d2 = p.dist2(q);
                if d2 <= r2 {
                    pairs.push((d2, i, j));
                }
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let mut used_a = vec![false; a.len()];
        let mut used_b = vec![false; b.len()];
        let mut matches = 0usize;
        for (_, i, j) in pairs {
            if !used_a[i] && !used_b[j] {
                used_a[i] = true;
                used_b[j] = true;
                matches += 1;
            }
        }
        Ok(2.0 * matches as f64 / (a.len() + b.len()) as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeletionRecord {
    pub s_necessary: f64,
    pub s_random: f64,
    /// (S⁽ⁿ⁾ − S⁽ʳ⁾)/S⁽ʳ⁾; NaN when S⁽ʳ⁾ = 0.
    pub relative_difference: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeletionReport {
    pub records: Vec<DeletionRecord>,
    /// Share of replicates with S⁽ⁿ⁾ > S⁽ʳ⁾ (ties count as not greater).
    pub share_greater: f64,
    pub share_se: f64,
    pub mean_relative_difference: f64,
    pub relative_difference_se: f64,
    pub scorer_failures: usize,
}

/// Deletes posterior-random minutiae from both patterns (labels drawn
/// uniformly with replacement from the joint label samples) and compares
/// the resulting score with that after deleting equally many uniformly
/// chosen minutiae.
#[allow(clippy::too_many_arguments)]
pub fn deletion_experiment(
    zeta1: &[Point],
    zeta2: &[Point],
    samples1: &[Vec<bool>],
    samples2: &[Vec<bool>],
    scorer: &dyn MatchScorer,
    replicates: usize,
    seed: u64,
) -> Result<DeletionReport, AnalysisError> {
    if samples1.is_empty() || samples2.is_empty() {
        return Err(AnalysisError::InvalidSettings("joint label samples are required".into()));
    }
    if samples1.iter().any(|s| s.len() != zeta1.len()) || samples2.iter().any(|s| s.len() != zeta2.len()) {
        return Err(AnalysisError::InvalidSettings("label samples do not match the patterns".into()));
    }
    let outcomes: Vec<Result<DeletionRecord, AnalysisError>> = (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            let mut thin = |zeta: &[Point], samples: &[Vec<bool>]| {
                let w = &samples[rng.random_range(0..samples.len())];
                let kept: Vec<Point> = zeta.iter().zip(w).filter(|(_, &l)| l).map(|(p, _)| *p).collect();
                let keep: Vec<usize> = sample_indices(&mut rng, zeta.len(), kept.len()).into_vec();
                let mut keep_sorted = keep;
                keep_sorted.sort_unstable();
                let random: Vec<Point> = keep_sorted.iter().map(|&k| zeta[k]).collect();
                (kept, random)
            };
            let (n1, r1) = thin(zeta1, samples1);
            let (n2, r2) = thin(zeta2, samples2);
            let s_necessary = scorer.score(&n1, &n2)?;
            let s_random = scorer.score(&r1, &r2)?;
            let relative_difference = if s_random > 0.0 {
                (s_necessary - s_random) / s_random
            } else {
                f64::NAN
            };
            Ok(DeletionRecord {
                s_necessary,
                s_random,
                relative_difference,
            })
        })
        .collect();
    let mut records = Vec::with_capacity(replicates);
    let mut scorer_failures = 0;
    for o in outcomes {
        match o {
            Ok(r) => records.push(r),
            Err(AnalysisError::ScorerFailure(_)) => scorer_failures += 1,
            Err(e) => return Err(e),
        }
    }
    let wins: Vec<f64> = records
        .iter()
        .map(|r| (r.s_necessary > r.s_random) as u8 as f64)
        .collect();
    let rel: Vec<f64> = records
        .iter()
        .map(|r| r.relative_difference)
        .filter(|v| v.is_finite())
        .collect();
    let share = if wins.is_empty() { f64::NAN } else { mean(&wins) };
    Ok(DeletionReport {
        share_greater: share,
        share_se: (share * (1.0 - share) / wins.len() as f64).sqrt(),
        mean_relative_difference: if rel.is_empty() { f64::NAN } else { mean(&rel) },
        relative_difference_se: std_error(&rel),
        records,
        scorer_failures,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub centers: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Histogram with the Freedman–Diaconis bin width 2·IQR·n^(−1/3); falls
/// back to a single bin when the IQR vanishes. Non-finite values are
/// skipped.
pub fn freedman_diaconis_histogram(values: &[f64]) -> Histogram {
    let xs: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if xs.is_empty() {
        return Histogram {
            bin_width: f64::NAN,
            centers: Vec::new(),
            counts: Vec::new(),
        };
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let iqr = quantile(&xs, 0.75) - quantile(&xs, 0.25);
    let width = 2.0 * iqr / (xs.len() as f64).cbrt();
    if !(width > 0.0) || hi == lo {
        let w = if hi > lo { hi - lo } else { 1.0 };
        return Histogram {
            bin_width: w,
            centers: vec![0.5 * (lo + hi)],
            counts: vec![xs.len() as u64],
        };
    }
    let bins = (((hi - lo) / width).floor() as usize + 1).max(1);
    let mut counts = vec![0u64; bins];
    for x in &xs {
        let k = (((x - lo) / width).floor() as usize).min(bins - 1);
        counts[k] += 1;
    }
    Histogram {
        bin_width: width,
        centers: (0..bins).map(|k| lo + (k as f64 + 0.5) * width).collect(),
        counts,
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand_distr::{Distribution, Poisson};

    use super::*;
    use crate::field::{synthetic, FieldOptions, GridGeometry};

    #[test]
    fn paper_sized_patches() {
        let g = GridGeometry::new(388, 374);
        let grid = PatchGrid::new(&RegionOfInterest::full(g).unwrap(), 100).unwrap();
        assert_eq!(grid.len(), 100);
        let avg = grid.patches.iter().map(|p| p.area).sum::<f64>() / grid.len() as f64;
        assert!((avg - 1451.0).abs() < 1.0, "{avg}");
    }

    #[test]
    fn patches_tile_the_mask() {
        let g = GridGeometry::new(200, 150);
        let roi = synthetic::elliptical_mask(g, 3.0).unwrap();
        let grid = PatchGrid::new(&roi, 60).unwrap();
        let mut owner = vec![0u32; g.len()];
        for p in &grid.patches {
            assert!(p.area > 0.0);
            for iy in p.y0..p.y1 {
                for ix in p.x0..p.x1 {
                    owner[g.index(ix, iy)] += 1;
                }
            }
        }
        for i in 0..g.len() {
            if roi.mask()[i] {
                assert_eq!(owner[i], 1);
            }
        }
        let covered: f64 = grid.patches.iter().map(|p| p.area).sum();
        assert_eq!(covered, roi.area());
    }

    fn loop_model() -> (FieldModel, RegionOfInterest) {
        let g = GridGeometry::new(388, 374);
        let (of, rf, roi) = synthetic::loop_print(g).unwrap();
        (FieldModel::new(&of, &rf, &roi, FieldOptions::default()).unwrap(), roi)
    }

    #[test]
    fn patch_counts_delegate_and_conserve() {
        let (model, roi) = loop_model();
        let grid = PatchGrid::new(&roi, 100).unwrap();
        let empty = patch_counts(&[], &model, &grid);
        assert!(empty.records.iter().all(|r| r.count == 0));
        assert!(!empty.excluded.is_empty(), "core and delta patches are discarded");

        let mut rng = rng_from_seed(3);
        let pts = sample_poisson(&roi, 4e-4, &mut rng).unwrap().into_points();
        let pc = patch_counts(&pts, &model, &grid);
        let retained: std::collections::HashSet<usize> = pc.records.iter().map(|r| r.patch).collect();
        let g = model.geometry();
        let inside = pts
            .iter()
            .filter(|p| {
                let (ix, iy) = g.pixel_of(**p).unwrap();
                grid.patch_of_pixel(ix, iy).is_some_and(|k| retained.contains(&k))
            })
            .count() as u64;
        assert_eq!(pc.records.iter().map(|r| r.count).sum::<u64>(), inside);
        for r in pc.records.iter().take(5) {
            let direct = model
                .necessary_minutiae_number_area_clipped(&grid.patches[r.patch].rect)
                .unwrap();
            assert_eq!(r.m, direct);
        }
    }

    #[test]
    fn noiseless_line_is_recovered() {
        let r = poisson_regression_identity(&[(0.0, 1), (1.0, 2), (2.0, 3)]).unwrap();
        assert!((r.beta0 - 1.0).abs() < 1e-4 && (r.beta1 - 1.0).abs() < 1e-4, "{r:?}");
        assert!(r.ci0.0 <= r.beta0 && r.beta0 <= r.ci0.1);
    }

    #[test]
    fn regression_rejects_degenerate_data() {
        assert_eq!(poisson_regression_identity(&[(0.0, 1), (1.0, 2)]).unwrap_err(), AnalysisError::TooFewObservations);
        assert_eq!(
            poisson_regression_identity(&[(1.0, 1), (1.0, 2), (1.0, 0)]).unwrap_err(),
            AnalysisError::ConstantCovariate
        );
        assert_eq!(
            poisson_regression_identity(&[(0.0, 0), (1.0, 0), (2.0, 0)]).unwrap_err(),
            AnalysisError::Separation
        );
    }

    fn synthetic_counts(b0: f64, b1: f64, n: usize, seed: u64) -> Vec<(f64, u64)> {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|_| {
                let m: f64 = rng.random_range(0.0..1.0);
                let y = Poisson::new(b0 + b1 * m).unwrap().sample(&mut rng) as u64;
                (m, y)
            })
            .collect()
    }

    #[test]
    fn null_slope_is_covered() {
        let mut covered = 0;
        for s in 0..100 {
            let data = synthetic_counts(0.5, 0.0, 500, 100 + s);
            let r = poisson_regression_identity(&data).unwrap();
            covered += (r.ci1.0 <= 0.0 && 0.0 <= r.ci1.1) as usize;
        }
        assert!(covered >= 90, "{covered}");
    }

    #[test]
    fn strong_intercept_has_tiny_p_value() {
        let data = synthetic_counts(0.5, 0.3, 2000, 8);
        let r = poisson_regression_identity(&data).unwrap();
        assert!(r.p_value_intercept < 1e-12);
        let none = synthetic_counts(0.0, 1.0, 2000, 9);
        let r = poisson_regression_identity(&none).unwrap();
        assert!(r.p_value_intercept > 1e-3, "{}", r.p_value_intercept);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fitted_mean_equals_count_mean(seed in 0u64..10_000, b0 in 0.05..2.0f64, b1 in 0.0..3.0f64) {
            let data = synthetic_counts(b0, b1, 200, seed);
            prop_assume!(data.iter().any(|d| d.1 > 0));
            let r = poisson_regression_identity(&data).unwrap();
            let n = data.len() as f64;
            let fitted = data.iter().map(|d| r.beta0 + r.beta1 * d.0).sum::<f64>() / n;
            let observed = data.iter().map(|d| d.1 as f64).sum::<f64>() / n;
            prop_assert!((fitted - observed).abs() < 1e-6);
            prop_assert!(data.iter().all(|d| r.beta0 + r.beta1 * d.0 > 0.0));
        }

        #[test]
        fn scorer_is_symmetric_and_bounded(
            a in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 0..30),
            b in prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 0..30),
        ) {
            let a: Vec<Point> = a.into_iter().map(Point::from).collect();
            let b: Vec<Point> = b.into_iter().map(Point::from).collect();
            let s = GreedyMatchScorer::default();
            let ab = s.score(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(ab, s.score(&b, &a).unwrap());
            if !a.is_empty() {
                prop_assert_eq!(s.score(&a, &a).unwrap(), 1.0);
            }
        }
    }

    struct Constant;

    impl MatchScorer for Constant {
        fn score(&self, _: &[Point], _: &[Point]) -> Result<f64, AnalysisError> {
            Ok(0.4)
        }
    }

    struct Failing;

    impl MatchScorer for Failing {
        fn score(&self, a: &[Point], _: &[Point]) -> Result<f64, AnalysisError> {
            if a.len() % 2 == 0 {
                Err(AnalysisError::ScorerFailure("odd input".into()))
            } else {
                Ok(0.5)
            }
        }
    }

    fn grid_points(n: usize, shift: f64) -> Vec<Point> {
        (0..n).map(|i| Point::new(10.0 + 20.0 * (i % 5) as f64 + shift, 10.0 + 20.0 * (i / 5) as f64)).collect()
    }

    #[test]
    fn constant_scorer_never_wins() {
        let z = grid_points(10, 0.0);
        let samples = vec![vec![true, false, true, true, false, true, true, true, false, true]];
        let r = deletion_experiment(&z, &z, &samples, &samples, &Constant, 50, 1).unwrap();
        assert_eq!(r.share_greater, 0.0);
        assert_eq!(r.mean_relative_difference, 0.0);
    }

    #[test]
    fn keeping_everything_ties() {
        let z1 = grid_points(10, 0.0);
        let z2 = grid_points(12, 3.0);
        let s1 = vec![vec![true; 10]];
        let s2 = vec![vec![true; 12]];
        let r = deletion_experiment(&z1, &z2, &s1, &s2, &GreedyMatchScorer::default(), 40, 2).unwrap();
        assert!(r.records.iter().all(|x| x.s_necessary == x.s_random));
        assert_eq!(r.share_greater, 0.0);
    }

    #[test]
    fn scorer_failures_are_counted() {
        let z = grid_points(10, 0.0);
        let samples = vec![vec![true; 10], {
            let mut v = vec![true; 10];
            v[0] = false;
            v
        }];
        let r = deletion_experiment(&z, &z, &samples, &samples, &Failing, 100, 3).unwrap();
        assert!(r.scorer_failures > 0);
        assert_eq!(r.records.len() + r.scorer_failures, 100);
    }

    #[test]
    fn deletion_is_deterministic() {
        let z1 = grid_points(15, 0.0);
        let z2 = grid_points(15, 4.0);
        let s: Vec<Vec<bool>> = (0..5).map(|k| (0..15).map(|i| (i + k) % 3 != 0).collect()).collect();
        let a = deletion_experiment(&z1, &z2, &s, &s, &GreedyMatchScorer::default(), 64, 9).unwrap();
        let b = deletion_experiment(&z1, &z2, &s, &s, &GreedyMatchScorer::default(), 64, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn histogram_bins() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64 / 999.0).collect();
        let h = freedman_diaconis_histogram(&xs);
        let oracle = 2.0 * 0.5 / 10.0;
        assert!((h.bin_width - oracle).abs() < 1e-9);
        assert_eq!(h.counts.iter().sum::<u64>(), 1000);
        let flat = freedman_diaconis_histogram(&[2.0, 2.0, 2.0]);
        assert_eq!(flat.counts, vec![3]);
    }

    #[test]
    fn zero_iteration_study_echoes_priors() {
        let g = GridGeometry::new(80, 80);
        let trend = Trend::constant(RegionOfInterest::full(g).unwrap(), 2e-3).unwrap();
        let settings = StudySettings {
            radii: InteractionRadii::new(8.0, 24.0).unwrap(),
            proposal: ProposalSettings { aux_chain_steps: 50, ..Default::default() },
            schedule: Schedule { burn_in: 0, iterations: 0, thinning: 1, refit_interval: 1000, ..Default::default() },
            replicates: 3,
            credible_level: 0.9,
            simulation_steps: Some(2000),
        };
        let priors = Priors::default();
        let a = simulation_study(&[trend.clone()], &priors, &settings, 5).unwrap();
        assert_eq!(a.replicates.len(), 3);
        for r in &a.replicates {
            assert_eq!(r.posterior_mean, priors.mean());
        }
        // NaN shares rule out PartialEq; compare the printed reports.
        let b = simulation_study(&[trend], &priors, &settings, 5).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
