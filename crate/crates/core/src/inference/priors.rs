//! Priors on (λ, β, γ, W) and the log-normal (β, γ) proposal.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::InferenceError;
use crate::geometry::Point;
use crate::point_process::min_pair_distance;

/// Model parameters θ = (λ, β, γ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Theta {
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// λ ~ Γ(a0, b0), β ~ Γ(a1, b1), γ ~ Beta(p1, q1), W_i ~ Ber(p_W) i.i.d.
/// Gamma distributions use the shape/rate parameterisation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Priors {
    pub a0: f64,
    pub b0: f64,
    pub a1: f64,
    pub b1: f64,
    pub p1: f64,
    pub q1: f64,
    /// Label prior success probability; `None` derives it per dataset as
    /// max(1 − λ₀|𝔛|/k, 0).
    pub p_w: Option<f64>,
    pub lambda0: f64,
}

impl Default for Priors {
    fn default() -> Self {
        let lambda0 = 1e-4;
        Priors {
            a0: 5.0,
            b0: 5.0 / lambda0,
            a1: 5.0,
            b1: 5.0,
            p1: 2.0,
            q1: 5.0,
            p_w: None,
            lambda0,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let positive = [self.a0, self.b0, self.a1, self.b1, self.p1, self.q1, self.lambda0];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(InferenceError::InvalidSettings("prior parameters must be positive".into()));
        }
        if let Some(p) = self.p_w {
            if !(0.0..=1.0).contains(&p) {
                return Err(InferenceError::InvalidSettings(format!("p_W = {p}")));
            }
        }
        Ok(())
    }

    /// p_W for a dataset of `k` points in a window of area `area`.
    pub fn label_probability(&self, k: usize, area: f64) -> f64 {
        self.p_w
            .unwrap_or_else(|| (1.0 - self.lambda0 * area / k as f64).max(0.0))
    }

    /// The same priors with p_W fixed for the given dataset.
    pub fn for_dataset(&self, k: usize, area: f64) -> Priors {
        Priors {
            p_w: Some(self.label_probability(k, area)),
            ..*self
        }
    }

    pub fn mean(&self) -> Theta {
        Theta {
            lambda: self.a0 / self.b0,
            beta: self.a1 / self.b1,
            gamma: self.p1 / (self.p1 + self.q1),
        }
    }

    /// One draw of θ from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Theta {
        let gamma_draw = |shape: f64, rate: f64, rng: &mut R| {
            Gamma::new(shape, 1.0 / rate)
                .expect("validated prior parameters")
                .sample(rng)
        };
        let lambda = gamma_draw(self.a0, self.b0, rng);
        let beta = gamma_draw(self.a1, self.b1, rng);
        let x = gamma_draw(self.p1, 1.0, rng);
        let y = gamma_draw(self.q1, 1.0, rng);
        Theta {
            lambda,
            beta,
            gamma: x / (x + y),
        }
    }
}

/// log of the prior ratio π(θ′)/π(θ) for the parameters alone.
pub fn log_theta_prior_ratio(new: &Theta, old: &Theta, priors: &Priors) -> f64 {
    if !(new.lambda > 0.0 && new.beta > 0.0 && new.gamma > 0.0 && new.gamma < 1.0) {
        return f64::NEG_INFINITY;
    }
    let mut v = 0.0;
    if new.lambda != old.lambda {
        v += (priors.a0 - 1.0) * (new.lambda / old.lambda).ln() - priors.b0 * (new.lambda - old.lambda);
    }
    if new.beta != old.beta {
        v += (priors.a1 - 1.0) * (new.beta / old.beta).ln() - priors.b1 * (new.beta - old.beta);
    }
    if new.gamma != old.gamma {
        v += (priors.p1 - 1.0) * (new.gamma / old.gamma).ln()
            + (priors.q1 - 1.0) * ((1.0 - new.gamma) / (1.0 - old.gamma)).ln();
    }
    v
}

/// log(p_W/(1 − p_W)), the prior log odds of one extra necessary label.
pub fn label_log_odds(p_w: f64) -> f64 {
    p_w.ln() - (1.0 - p_w).ln()
}

/// Whether the points labelled 1 respect the hard core.
pub fn labels_feasible(points: &[Point], labels: &[bool], hard_core: f64) -> bool {
    let eta: Vec<Point> = points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l)
        .map(|(p, _)| *p)
        .collect();
    min_pair_distance(&eta) > hard_core
}

/// Full log prior ratio π(θ′, W′)/π(θ, W); −∞ when W′ is infeasible.
pub fn log_prior_ratio(
    new: (&Theta, &[bool]),
    old: (&Theta, &[bool]),
    points: &[Point],
    hard_core: f64,
    priors: &Priors,
    p_w: f64,
) -> f64 {
    if !labels_feasible(points, new.1, hard_core) {
        return f64::NEG_INFINITY;
    }
    let ones = |w: &[bool]| w.iter().filter(|&&b| b).count() as i64;
    let dl = ones(new.1) - ones(old.1);
    let mut v = log_theta_prior_ratio(new.0, old.0, priors);
    if dl != 0 {
        v += dl as f64 * label_log_odds(p_w);
    }
    v
}

/// λ | (ζ, W) ~ Γ(a0 + n0, b0 + |𝔛|), with n0 the number of points labelled 0.
pub fn gibbs_update_lambda<R: Rng + ?Sized>(n0: usize, area: f64, priors: &Priors, rng: &mut R) -> f64 {
    Gamma::new(priors.a0 + n0 as f64, 1.0 / (priors.b0 + area))
        .expect("validated prior parameters")
        .sample(rng)
}

/// Random-walk settings of the sampler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProposalSettings {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho12: f64,
    /// Probability of a θ-update (otherwise a label flip).
    pub p_theta: f64,
    /// Probability of a λ-update within a θ-update (otherwise (β, γ)).
    pub p_lambda: f64,
    /// Steps of the birth–death–move chain drawing each auxiliary pattern.
    pub aux_chain_steps: usize,
}

impl Default for ProposalSettings {
    fn default() -> Self {
        ProposalSettings {
            sigma1: 0.07,
            sigma2: 0.05,
            rho12: -0.7,
            p_theta: 0.05,
            p_lambda: 0.2,
            aux_chain_steps: 5000,
        }
    }
}

impl ProposalSettings {
    pub fn validate(&self) -> Result<(), InferenceError> {
        let ok = self.sigma1 >= 0.0
            && self.sigma2 >= 0.0
            && self.rho12.abs() < 1.0
            && (0.0..=1.0).contains(&self.p_theta)
            && (0.0..=1.0).contains(&self.p_lambda);
        if ok {
            Ok(())
        } else {
            Err(InferenceError::InvalidSettings(format!("{self:?}")))
        }
    }

    /// Lower Cholesky factor of Σ.
    pub fn cholesky(&self) -> [[f64; 2]; 2] {
        [
            [self.sigma1, 0.0],
            [self.rho12 * self.sigma2, self.sigma2 * (1.0 - self.rho12 * self.rho12).sqrt()],
        ]
    }
}

/// Log-normal random-walk proposal for (β, γ). Returns (β′, γ′, log q-ratio)
/// where the log q-ratio is log(β′γ′/(βγ)).
pub fn propose_beta_gamma<R: Rng + ?Sized>(
    beta: f64,
    gamma: f64,
    settings: &ProposalSettings,
    rng: &mut R,
) -> (f64, f64, f64) {
    let l = settings.cholesky();
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let s1 = l[0][0] * z1;
    let s2 = l[1][0] * z1 + l[1][1] * z2;
    let beta_new = beta * s1.exp();
    let gamma_new = gamma * s2.exp();
    (beta_new, gamma_new, s1 + s2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use statrs::function::gamma::ln_gamma;

    fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
        shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
    }

    fn ln_beta_pdf(x: f64, p: f64, q: f64) -> f64 {
        ln_gamma(p + q) - ln_gamma(p) - ln_gamma(q) + (p - 1.0) * x.ln() + (q - 1.0) * (1.0 - x).ln()
    }

    #[test]
    fn identical_states_have_zero_log_prior_ratio() {
        let t = Theta { lambda: 2e-4, beta: 1.3, gamma: 0.4 };
        let w = [true, false, true];
        let pts = [Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(30.0, 0.0)];
        assert_eq!(log_prior_ratio((&t, &w), (&t, &w), &pts, 8.0, &Priors::default(), 0.8), 0.0);
    }

    #[test]
    fn beta_prior_ratio_matches_density_evaluation() {
        let p = Priors::default();
        let old = Theta { lambda: 1e-4, beta: 0.9, gamma: 0.3 };
        let new = Theta { beta: 1.4, ..old };
        let v = log_theta_prior_ratio(&new, &old, &p);
        assert!((v - (4.0 * (1.4f64 / 0.9).ln() - 5.0 * (1.4 - 0.9))).abs() < 1e-12);
        let oracle = ln_gamma_pdf(1.4, 5.0, 5.0) - ln_gamma_pdf(0.9, 5.0, 5.0);
        assert!((v - oracle).abs() < 1e-12);

        let new = Theta { lambda: 3e-4, gamma: 0.55, ..old };
        let oracle = ln_gamma_pdf(3e-4, 5.0, 5e4) - ln_gamma_pdf(1e-4, 5.0, 5e4)
            + ln_beta_pdf(0.55, 2.0, 5.0)
            - ln_beta_pdf(0.3, 2.0, 5.0);
        assert!((log_theta_prior_ratio(&new, &old, &p) - oracle).abs() < 1e-9);
    }

    #[test]
    fn one_flip_to_necessary_adds_log_odds() {
        let t = Theta { lambda: 1e-4, beta: 1.0, gamma: 0.3 };
        let pts = [Point::new(0.0, 0.0), Point::new(20.0, 0.0)];
        let v = log_prior_ratio((&t, &[true, true]), (&t, &[true, false]), &pts, 8.0, &Priors::default(), 0.8);
        assert!((v - (0.8f64 / 0.2).ln()).abs() < 1e-12);
        let close = [Point::new(0.0, 0.0), Point::new(5.0, 0.0)];
        let v = log_prior_ratio((&t, &[true, true]), (&t, &[true, false]), &close, 8.0, &Priors::default(), 0.8);
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_one_or_above_has_zero_prior() {
        let old = Theta { lambda: 1e-4, beta: 1.0, gamma: 0.9 };
        let new = Theta { gamma: 1.0, ..old };
        assert_eq!(log_theta_prior_ratio(&new, &old, &Priors::default()), f64::NEG_INFINITY);
    }

    #[test]
    fn label_probability_rule() {
        let p = Priors::default();
        assert!((p.label_probability(50, 145_100.0) - (1.0 - 14.51 / 50.0)).abs() < 1e-12);
        assert_eq!(p.label_probability(10, 145_100.0), 0.0);
        let fixed = Priors { p_w: Some(0.3), ..p };
        assert_eq!(fixed.label_probability(10, 145_100.0), 0.3);
    }

    #[test]
    fn lambda_posterior_mean() {
        let p = Priors { b0: 5e4, ..Priors::default() };
        let mut rng = rng_from_seed(1);
        let draws: Vec<f64> = (0..100_000).map(|_| gibbs_update_lambda(3, 145_100.0, &p, &mut rng)).collect();
        let m = crate::stats::mean(&draws);
        let se = crate::stats::std_error(&draws);
        let expect = 8.0 / 195_100.0;
        assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect}");
    }

    #[test]
    fn degenerate_proposal_stays_put() {
        let s = ProposalSettings { sigma1: 0.0, sigma2: 0.0, rho12: 0.0, ..Default::default() };
        let mut rng = rng_from_seed(2);
        assert_eq!(propose_beta_gamma(1.2, 0.4, &s, &mut rng), (1.2, 0.4, 0.0));
    }

    #[test]
    fn proposal_ratio_arithmetic() {
        // β = 1, γ = 0.5 → β′ = 2, γ′ = 0.25: log(β′γ′/(βγ)) = 0
        assert!(((2.0f64).ln() + (0.5f64).ln()).abs() < 1e-15);
        let s = ProposalSettings::default();
        let mut rng = rng_from_seed(3);
        let (b, g, r) = propose_beta_gamma(1.0, 0.5, &s, &mut rng);
        assert!((r - (b * g / 0.5).ln()).abs() < 1e-12);
    }

    #[test]
    fn proposal_steps_have_the_target_covariance() {
        let s = ProposalSettings::default();
        let mut rng = rng_from_seed(4);
        let n = 100_000;
        let steps: Vec<(f64, f64)> = (0..n)
            .map(|_| {
                let (b, g, _) = propose_beta_gamma(1.0, 0.5, &s, &mut rng);
                (b.ln(), (g / 0.5).ln())
            })
            .collect();
        let c11: Vec<f64> = steps.iter().map(|s| s.0 * s.0).collect();
        let c22: Vec<f64> = steps.iter().map(|s| s.1 * s.1).collect();
        let c12: Vec<f64> = steps.iter().map(|s| s.0 * s.1).collect();
        let check = |xs: &[f64], expect: f64| {
            let m = crate::stats::mean(xs);
            let se = crate::stats::std_error(xs);
            assert!((m - expect).abs() < 3.0 * se, "{m} vs {expect} (se {se})");
        };
        check(&c11, 0.07 * 0.07);
        check(&c22, 0.05 * 0.05);
        check(&c12, -0.7 * 0.07 * 0.05);
    }
}
