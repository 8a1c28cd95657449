//! End-to-end check of the full sampler against an exactly computable
//! posterior. In a window smaller than the interaction radius with a
//! negligible hard core and constant trend, every necessary pair interacts,
//! so the Strauss normaliser is a one-dimensional series, λ integrates out
//! in closed form and the labels enter only through n₁.

use miseal::field::{GridGeometry, RegionOfInterest};
use miseal::inference::{run_miseal, Priors, ProposalSettings, Schedule};
use miseal::point_process::{InteractionRadii, Trend};
use miseal::stats::batch_means_std_error;
use miseal::Point;
use statrs::function::gamma::ln_gamma;

const TREND_MASS: f64 = 3.0;
const AREA: f64 = 256.0;

fn ln_fact(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn log_sum_exp(xs: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.collect();
    let mx = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    mx + xs.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
}

/// Posterior means of (β, γ) by midpoint quadrature over (0, 6) × (0, 1).
fn exact_means(k: usize, priors: &Priors, p_w: f64) -> (f64, f64) {
    let (nb, ng) = (600, 500);
    let (mut z, mut sb, mut sg) = (0.0, 0.0, 0.0);
    for ib in 0..nb {
        let beta = (ib as f64 + 0.5) * 6.0 / nb as f64;
        for ig in 0..ng {
            let gamma = (ig as f64 + 0.5) / ng as f64;
            let log_prior = (priors.a1 - 1.0) * beta.ln() - priors.b1 * beta
                + (priors.p1 - 1.0) * gamma.ln()
                + (priors.q1 - 1.0) * (1.0 - gamma).ln();
            let pairs = |m: usize| (m * m.saturating_sub(1) / 2) as f64;
            let log_alpha =
                log_sum_exp((0..60).map(|m| m as f64 * (beta * TREND_MASS).ln() + pairs(m) * gamma.ln() - ln_fact(m)));
            let w: f64 = (0..=k)
                .map(|n1| {
                    let n0 = k - n1;
                    let labels = ln_fact(k) - ln_fact(n1) - ln_fact(n0)
                        + n1 as f64 * p_w.ln()
                        + n0 as f64 * (1.0 - p_w).ln();
                    let lambda = ln_gamma(priors.a0 + n0 as f64) - (priors.a0 + n0 as f64) * (priors.b0 + AREA).ln();
                    let eta = n1 as f64 * (beta * TREND_MASS / AREA).ln() + pairs(n1) * gamma.ln() - log_alpha;
                    (labels + lambda + eta + log_prior).exp()
                })
                .sum();
            z += w;
            sb += w * beta;
            sg += w * gamma;
        }
    }
    (sb / z, sg / z)
}

fn check(k: usize, priors: Priors, seed: u64) {
    let g = GridGeometry::new(16, 16);
    let trend = Trend::constant(RegionOfInterest::full(g).unwrap(), TREND_MASS / AREA).unwrap();
    let radii = InteractionRadii::new(1e-6, 24.0).unwrap();
    let zeta: Vec<Point> = (0..k).map(|i| Point::new(2.0 + 3.0 * i as f64, 3.0 + 2.5 * i as f64)).collect();
    let (eb, eg) = exact_means(k, &priors, priors.label_probability(k, AREA));
    let schedule = Schedule {
        iterations: 1_000_000,
        thinning: 10,
        ..Schedule::default()
    };
    let trace = run_miseal(&zeta, &trend, &radii, &priors, &ProposalSettings::default(), &schedule, seed).unwrap();
    let betas: Vec<f64> = trace.records.iter().map(|r| r.beta).collect();
    let gammas: Vec<f64> = trace.records.iter().map(|r| r.gamma).collect();
    let mean = trace.posterior_mean().unwrap();
    let (se_b, se_g) = (batch_means_std_error(&betas, 50), batch_means_std_error(&gammas, 50));
    assert!((mean.beta - eb).abs() < 4.0 * se_b, "β: {} vs exact {eb} (se {se_b})", mean.beta);
    assert!((mean.gamma - eg).abs() < 4.0 * se_g, "γ: {} vs exact {eg} (se {se_g})", mean.gamma);
}

#[test]
fn three_points_default_label_prior() {
    check(3, Priors::default(), 21);
}

#[test]
fn four_points_neutral_label_prior() {
    check(
        4,
        Priors {
            p_w: Some(0.5),
            ..Priors::default()
        },
        22,
    );
}
