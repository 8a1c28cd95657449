//! The MiSeal Metropolis-within-Gibbs sampler.
//!
//! A random scan alternates λ Gibbs draws, auxiliary-variable (β, γ) updates
//! and single-label flips. The auxiliary density φ is a Strauss process with
//! hard core at θ̂, refitted by pseudo-likelihood during burn-in and frozen
//! afterwards. θ̂ is piecewise constant between refits, so label flips never
//! change φ and their Hastings ratio omits the φ factor.

use log::warn;
use rand::Rng;

use super::mple::{mple_fit, MpleQuadrature};
use super::priors::{
    gibbs_update_lambda, label_log_odds, log_theta_prior_ratio, propose_beta_gamma, Priors,
    ProposalSettings, Theta,
};
use super::InferenceError;
use crate::geometry::Point;
use crate::point_process::{
    close_pair_count, default_chain_length, min_pair_distance, InteractionRadii, StraussChain,
    StraussParams, Trend,
};
use crate::rng::{rng_from_seed, ChainRng};
use crate::stats::{batch_means_std_error, mean};

/// Dummy-grid spacing (pixels) of the pseudo-likelihood quadrature.
const MPLE_SPACING: usize = 4;

/// How the burn-in refits of θ̂ are averaged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum HatMean {
    #[default]
    Original,
    /// Geometric mean, i.e. arithmetic mean of (log β̂, log γ̂).
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub burn_in: usize,
    /// Post-burn-in iterations.
    pub iterations: usize,
    pub thinning: usize,
    /// Burn-in iterations between θ̂ refits.
    pub refit_interval: usize,
    pub hat_mean: HatMean,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            burn_in: 10_000,
            iterations: 1_000_000,
            thinning: 100,
            refit_interval: 1_000,
            hat_mean: HatMean::Original,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateKind {
    Lambda,
    BetaGamma,
    Flip,
}

impl UpdateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UpdateKind::Lambda => "lambda",
            UpdateKind::BetaGamma => "betagamma",
            UpdateKind::Flip => "flip",
        }
    }
}

impl std::str::FromStr for UpdateKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lambda" => Ok(UpdateKind::Lambda),
            "betagamma" => Ok(UpdateKind::BetaGamma),
            "flip" => Ok(UpdateKind::Flip),
            other => Err(format!("unknown move kind {other:?}")),
        }
    }
}

/// State after iteration `t` (post-burn-in, 1-based within the kept run).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    pub t: u64,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kind: UpdateKind,
    pub accepted: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcceptanceStats {
    pub lambda: MoveStats,
    pub beta_gamma: MoveStats,
    pub flip: MoveStats,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorTrace {
    pub records: Vec<TraceRecord>,
    /// Fraction of post-burn-in iterations each point spent labelled 1.
    pub label_frequencies: Vec<f64>,
    /// Joint label vectors at every `thinning`-th post-burn-in iteration.
    pub label_samples: Vec<Vec<bool>>,
    pub thinning: usize,
    pub acceptance: AcceptanceStats,
    /// θ̂ used by φ: initial fit, each burn-in refit, then the frozen value.
    pub theta_hat_history: Vec<(f64, f64)>,
    pub theta_hat: (f64, f64),
    pub p_w: f64,
    /// Points forced to label 0 because μ is excluded there.
    pub forced_random: Vec<usize>,
}

impl PosteriorTrace {
    pub fn posterior_mean(&self) -> Option<Theta> {
        if self.records.is_empty() {
            return None;
        }
        let col = |f: fn(&TraceRecord) -> f64| mean(&self.records.iter().map(f).collect::<Vec<_>>());
        Some(Theta {
            lambda: col(|r| r.lambda),
            beta: col(|r| r.beta),
            gamma: col(|r| r.gamma),
        })
    }
}

/// Sufficient statistics of a pattern under the Strauss family with a fixed
/// trend: n, s_R and Σ log μ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatternStats {
    pub n: usize,
    pub s: usize,
    pub sum_log_mu: f64,
}

impl PatternStats {
    pub fn of(points: &[Point], trend: &Trend, radii: &InteractionRadii) -> Self {
        PatternStats {
            n: points.len(),
            s: close_pair_count(points, radii.interaction),
            sum_log_mu: points
                .iter()
                .map(|p| trend.mu_at(*p).map_or(f64::NEG_INFINITY, f64::ln))
                .sum(),
        }
    }

    /// Unnormalised log Strauss density at (β, γ) (hard core assumed).
    pub fn log_density(&self, beta: f64, gamma: f64) -> f64 {
        let mut v = self.n as f64 * beta.ln() + self.sum_log_mu;
        if self.s > 0 {
            v += self.s as f64 * gamma.ln();
        }
        v
    }
}

/// State of the (β, γ) block on the extended space: parameters and the
/// auxiliary pattern's statistics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuxState {
    pub beta: f64,
    pub gamma: f64,
    pub aux: PatternStats,
}

/// log of the auxiliary-variable Hastings ratio for moving from `cur` to
/// `prop` with necessary-point statistics `eta`, auxiliary density at θ̂,
/// and λ unchanged:
/// φ(χ′)/φ(χ) · g′(η)/g(η) · π(θ′)/π(θ) · g(χ)/g′(χ′) · β′γ′/(βγ).
pub fn log_aux_hastings_ratio(
    cur: &AuxState,
    prop: &AuxState,
    eta: &PatternStats,
    theta_hat: (f64, f64),
    lambda: f64,
    priors: &Priors,
) -> f64 {
    let old = Theta {
        lambda,
        beta: cur.beta,
        gamma: cur.gamma,
    };
    let new = Theta {
        lambda,
        beta: prop.beta,
        gamma: prop.gamma,
    };
    let prior = log_theta_prior_ratio(&new, &old, priors);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    let (bh, gh) = theta_hat;
    prop.aux.log_density(bh, gh) - cur.aux.log_density(bh, gh)
        + eta.log_density(prop.beta, prop.gamma)
        - eta.log_density(cur.beta, cur.gamma)
        + prior
        + cur.aux.log_density(cur.beta, cur.gamma)
        - prop.aux.log_density(prop.beta, prop.gamma)
        + (prop.beta * prop.gamma / (cur.beta * cur.gamma)).ln()
}

/// log H of a single label flip at fixed θ; −∞ if the flip would break the
/// hard core. `t` is the number of R-close necessary neighbours of the
/// point (excluding itself) and `mu` its trend value.
pub fn log_flip_ratio(to_necessary: bool, lambda: f64, beta: f64, gamma: f64, mu: f64, t: usize, log_odds: f64) -> f64 {
    let mut log_cond = (beta * mu).ln();
    if t > 0 {
        log_cond += t as f64 * gamma.ln();
    }
    let v = log_cond - lambda.ln() + log_odds;
    if to_necessary {
        v
    } else {
        -v
    }
}

/// Labels of the observed points with the neighbourhood structure needed
/// by flips.
#[derive(Clone, Debug)]
struct LabelState {
    points: Vec<Point>,
    mu: Vec<Option<f64>>,
    close: Vec<Vec<usize>>,
    conflicts: Vec<Vec<usize>>,
    labels: Vec<bool>,
    ones: usize,
    close_pairs: usize,
    sum_log_mu: f64,
    hard_core: f64,
}

impl LabelState {
    fn new(points: &[Point], trend: &Trend, radii: &InteractionRadii) -> Self {
        let k = points.len();
        let (h2, r2) = (radii.hard_core.powi(2), radii.interaction.powi(2));
        let mut close = vec![Vec::new(); k];
        let mut conflicts = vec![Vec::new(); k];
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let d2 = points[i].dist2(&points[j]);
                if d2 <= r2 {
                    close[i].push(j);
                }
                if d2 <= h2 {
                    conflicts[i].push(j);
                }
            }
        }
        let mu: Vec<Option<f64>> = points.iter().map(|p| trend.mu_at(*p).filter(|m| *m > 0.0)).collect();
        // All necessary where possible, then drop the later point of each
        // hard-core violation.
        let mut labels: Vec<bool> = mu.iter().map(Option::is_some).collect();
        for i in 0..k {
            if labels[i] {
                for &j in &conflicts[i] {
                    if j > i {
                        labels[j] = false;
                    }
                }
            }
        }
        let mut s = LabelState {
            points: points.to_vec(),
            mu,
            close,
            conflicts,
            labels,
            ones: 0,
            close_pairs: 0,
            sum_log_mu: 0.0,
            hard_core: radii.hard_core,
        };
        s.recount();
        s
    }

    fn recount(&mut self) {
        self.ones = self.labels.iter().filter(|&&l| l).count();
        self.close_pairs = (0..self.labels.len())
            .filter(|&i| self.labels[i])
            .map(|i| self.close[i].iter().filter(|&&j| j > i && self.labels[j]).count())
            .sum();
        self.sum_log_mu = (0..self.labels.len())
            .filter(|&i| self.labels[i])
            .map(|i| self.mu[i].expect("necessary points have a trend").ln())
            .sum();
    }

    fn eta(&self) -> Vec<Point> {
        self.points
            .iter()
            .zip(&self.labels)
            .filter(|(_, &l)| l)
            .map(|(p, _)| *p)
            .collect()
    }

    fn eta_stats(&self) -> PatternStats {
        PatternStats {
            n: self.ones,
            s: self.close_pairs,
            sum_log_mu: self.sum_log_mu,
        }
    }

    fn assert_feasible(&self) {
        assert!(
            min_pair_distance(&self.eta()) > self.hard_core,
            "necessary points violate the hard core"
        );
    }

    fn flip<R: Rng + ?Sized>(&mut self, i: usize, theta: &Theta, log_odds: f64, rng: &mut R) -> bool {
        let Some(mu) = self.mu[i] else {
            return false;
        };
        let to_necessary = !self.labels[i];
        if to_necessary && self.conflicts[i].iter().any(|&j| self.labels[j]) {
            return false;
        }
        let t = self.close[i].iter().filter(|&&j| self.labels[j]).count();
        let log_h = log_flip_ratio(to_necessary, theta.lambda, theta.beta, theta.gamma, mu, t, log_odds);
        let u: f64 = rng.random();
        if !(log_h >= 0.0 || u.ln() < log_h) {
            return false;
        }
        self.labels[i] = to_necessary;
        if to_necessary {
            self.ones += 1;
            self.close_pairs += t;
            self.sum_log_mu += mu.ln();
        } else {
            self.ones -= 1;
            self.close_pairs -= t;
            self.sum_log_mu -= mu.ln();
        }
        true
    }
}

/// Per-point label-1 frequencies with batch-means standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelFrequencies {
    pub frequency: Vec<f64>,
    pub std_error: Vec<f64>,
}

/// Runs label flips only, at fixed θ and p_W. Used to check the flip kernel
/// against the exact label posterior.
#[allow(clippy::too_many_arguments)]
pub fn sample_labels_fixed_theta(
    zeta: &[Point],
    trend: &Trend,
    radii: &InteractionRadii,
    theta: &Theta,
    p_w: f64,
    burn_in: usize,
    iterations: usize,
    batches: usize,
    seed: u64,
) -> Result<LabelFrequencies, InferenceError> {
    if zeta.is_empty() {
        return Err(InferenceError::EmptyPattern);
    }
    if batches < 2 || iterations < batches {
        return Err(InferenceError::InvalidSettings("need at least two non-empty batches".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut state = LabelState::new(zeta, trend, radii);
    let log_odds = label_log_odds(p_w);
    let k = zeta.len();
    for _ in 0..burn_in {
        let i = rng.random_range(0..k);
        state.flip(i, theta, log_odds, &mut rng);
    }
    let batch_len = iterations / batches;
    let mut per_batch = vec![vec![0.0; batches]; k];
    for b in 0..batches {
        let mut ones = vec![0u64; k];
        for _ in 0..batch_len {
            let i = rng.random_range(0..k);
            state.flip(i, theta, log_odds, &mut rng);
            for (c, &l) in ones.iter_mut().zip(&state.labels) {
                *c += l as u64;
            }
        }
        for i in 0..k {
            per_batch[i][b] = ones[i] as f64 / batch_len as f64;
        }
    }
    state.assert_feasible();
    Ok(LabelFrequencies {
        frequency: per_batch.iter().map(|v| mean(v)).collect(),
        std_error: per_batch.iter().map(|v| batch_means_std_error(v, batches)).collect(),
    })
}

struct Aux<'a> {
    trend: &'a Trend,
    radii: InteractionRadii,
    pattern: Vec<Point>,
    stats: PatternStats,
}

impl Aux<'_> {
    fn draw(&self, beta: f64, gamma: f64, steps: usize, rng: &mut ChainRng) -> Result<(Vec<Point>, PatternStats), InferenceError> {
        let params = StraussParams::new(beta, gamma, self.radii).map_err(|e| InferenceError::AuxSamplerFailure(e.to_string()))?;
        let mut chain = StraussChain::new(self.trend, params, self.pattern.clone())
            .map_err(|e| InferenceError::AuxSamplerFailure(e.to_string()))?;
        chain.run(steps, rng);
        let pts = chain.into_points();
        let stats = PatternStats::of(&pts, self.trend, &self.radii);
        Ok((pts, stats))
    }
}

/// Runs MiSeal on the observed pattern `zeta`. `schedule.iterations` counts
/// post-burn-in iterations; the trace keeps every `thinning`-th of them.
pub fn run_miseal(
    zeta: &[Point],
    trend: &Trend,
    radii: &InteractionRadii,
    priors: &Priors,
    proposal: &ProposalSettings,
    schedule: &Schedule,
    seed: u64,
) -> Result<PosteriorTrace, InferenceError> {
    priors.validate()?;
    proposal.validate()?;
    if zeta.is_empty() {
        return Err(InferenceError::EmptyPattern);
    }
    if schedule.thinning == 0 || schedule.refit_interval == 0 {
        return Err(InferenceError::InvalidSettings("thinning and refit interval must be positive".into()));
    }
    if !(trend.integral() > 0.0) {
        return Err(InferenceError::DegenerateTrend);
    }
    let mut rng = rng_from_seed(seed);
    let area = trend.roi().area();
    let k = zeta.len();
    let p_w = priors.label_probability(k, area);
    let log_odds = label_log_odds(p_w);

    let mut state = LabelState::new(zeta, trend, radii);
    let forced_random: Vec<usize> = (0..k).filter(|&i| state.mu[i].is_none()).collect();
    if !forced_random.is_empty() {
        warn!("{} points lie where the trend is excluded and are labelled random", forced_random.len());
    }
    let mut theta = priors.mean();
    let quadrature = MpleQuadrature::new(trend, MPLE_SPACING);
    let fit = mple_fit(&state.eta(), radii, &quadrature, priors);
    let mut theta_hat = (fit.beta, fit.gamma);
    let mut hat_history = vec![theta_hat];
    let mut refits: Vec<(f64, f64)> = Vec::new();

    let mut aux = Aux {
        trend,
        radii: *radii,
        pattern: Vec::new(),
        stats: PatternStats { n: 0, s: 0, sum_log_mu: 0.0 },
    };
    // χ̃ must be a draw at the current θ; a draw at θ̂ makes the pair
    // implausible and freezes the (β, γ) moves.
    let init_steps = proposal
        .aux_chain_steps
        .max(default_chain_length(theta.beta, trend.integral()));
    let (pts, stats) = aux.draw(theta.beta, theta.gamma, init_steps, &mut rng)?;
    aux.pattern = pts;
    aux.stats = stats;

    let total = schedule.burn_in + schedule.iterations;
    let mut acceptance = AcceptanceStats::default();
    let mut records = Vec::with_capacity(schedule.iterations / schedule.thinning);
    let mut samples = Vec::with_capacity(schedule.iterations / schedule.thinning);
    let mut ones_time = vec![0u64; k];
    let mut since = vec![0usize; k];

    for it in 0..total {
        let post = it >= schedule.burn_in;
        let (kind, accepted) = if rng.random::<f64>() < proposal.p_theta {
            if rng.random::<f64>() < proposal.p_lambda {
                theta.lambda = gibbs_update_lambda(k - state.ones, area, priors, &mut rng);
                (UpdateKind::Lambda, true)
            } else {
                let (b, g, _) = propose_beta_gamma(theta.beta, theta.gamma, proposal, &mut rng);
                let accepted = if g >= 1.0 || g <= 0.0 || b <= 0.0 {
                    false
                } else {
                    let (pts, stats) = aux.draw(b, g, proposal.aux_chain_steps, &mut rng)?;
                    let log_h = log_aux_hastings_ratio(
                        &AuxState { beta: theta.beta, gamma: theta.gamma, aux: aux.stats },
                        &AuxState { beta: b, gamma: g, aux: stats },
                        &state.eta_stats(),
                        theta_hat,
                        theta.lambda,
                        priors,
                    );
                    let u: f64 = rng.random();
                    if log_h >= 0.0 || u.ln() < log_h {
                        theta.beta = b;
                        theta.gamma = g;
                        aux.pattern = pts;
                        aux.stats = stats;
                        true
                    } else {
                        false
                    }
                };
                (UpdateKind::BetaGamma, accepted)
            }
        } else {
            let i = rng.random_range(0..k);
            let was = state.labels[i];
            let accepted = state.flip(i, &theta, log_odds, &mut rng);
            if accepted && post {
                let kept = it - schedule.burn_in;
                if was {
                    ones_time[i] += (kept - since[i]) as u64;
                }
                since[i] = kept;
            }
            if accepted && !was && cfg!(debug_assertions) {
                state.assert_feasible();
            }
            (UpdateKind::Flip, accepted)
        };
        if (it + 1) % 1000 == 0 {
            state.assert_feasible();
        }

        if !post {
            if (it + 1) % schedule.refit_interval == 0 {
                let fit = mple_fit(&state.eta(), radii, &quadrature, priors);
                theta_hat = (fit.beta, fit.gamma);
                refits.push(theta_hat);
                hat_history.push(theta_hat);
            }
            if it + 1 == schedule.burn_in {
                if !refits.is_empty() {
                    theta_hat = average_hat(&refits, schedule.hat_mean);
                    hat_history.push(theta_hat);
                }
                for i in 0..k {
                    since[i] = 0;
                }
            }
            continue;
        }

        let stats = match kind {
            UpdateKind::Lambda => &mut acceptance.lambda,
            UpdateKind::BetaGamma => &mut acceptance.beta_gamma,
            UpdateKind::Flip => &mut acceptance.flip,
        };
        stats.record(accepted);
        let kept = it + 1 - schedule.burn_in;
        if kept % schedule.thinning == 0 {
            records.push(TraceRecord {
                t: kept as u64,
                lambda: theta.lambda,
                beta: theta.beta,
                gamma: theta.gamma,
                kind,
                accepted,
            });
            samples.push(state.labels.clone());
        }
    }
    state.assert_feasible();

    // A flip at kept index j takes effect from iteration j + 1 on, so the
    // label held during [since, iterations) is the final one.
    let n_kept = schedule.iterations;
    let label_frequencies = if n_kept == 0 {
        state.labels.iter().map(|&l| l as u8 as f64).collect()
    } else {
        (0..k)
            .map(|i| {
                let mut t = ones_time[i];
                if state.labels[i] {
                    t += (n_kept - since[i]) as u64;
                }
                t as f64 / n_kept as f64
            })
            .collect()
    };

    Ok(PosteriorTrace {
        records,
        label_frequencies,
        label_samples: samples,
        thinning: schedule.thinning,
        acceptance,
        theta_hat_history: hat_history,
        theta_hat,
        p_w,
        forced_random,
    })
}

fn average_hat(refits: &[(f64, f64)], how: HatMean) -> (f64, f64) {
    let n = refits.len() as f64;
    match how {
        HatMean::Original => (
            refits.iter().map(|r| r.0).sum::<f64>() / n,
            refits.iter().map(|r| r.1).sum::<f64>() / n,
        ),
        HatMean::Log => (
            (refits.iter().map(|r| r.0.ln()).sum::<f64>() / n).exp(),
            (refits.iter().map(|r| r.1.ln()).sum::<f64>() / n).exp(),
        ),
    }
}
