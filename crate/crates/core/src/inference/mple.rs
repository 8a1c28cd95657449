//! Maximum pseudo-likelihood for the Strauss process with hard core and a
//! known trend shape, by Berman–Turner quadrature on a regular dummy grid.
//!
//! With θ₁ = log β and θ₂ = log γ the log pseudo-likelihood is
//! n θ₁ + 2 s_R θ₂ − e^{θ₁} Σ_b w_b e^{θ₂ t_b} (+ terms free of θ), where the
//! sum runs over feasible dummy cells b with trend mass w_b and t_b
//! R-close data points. θ₁ is profiled out in closed form and the concave
//! profile in θ₂ is maximised by safeguarded Newton steps.

use log::warn;

use super::priors::Priors;
use crate::geometry::Point;
use crate::point_process::{close_pair_count, InteractionRadii, Trend};

const GAMMA_MIN: f64 = 1e-4;
const GAMMA_MAX: f64 = 1.0 - 1e-4;
const MAX_NEWTON: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpleFit {
    pub beta: f64,
    pub gamma: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Dummy cells of `spacing`×`spacing` pixels: centre and trend mass.
#[derive(Clone, Debug)]
pub struct MpleQuadrature {
    centres: Vec<Point>,
    weights: Vec<f64>,
    spacing: f64,
    origin: Point,
    nx: usize,
    ny: usize,
}

impl MpleQuadrature {
    pub fn new(trend: &Trend, spacing_px: usize) -> Self {
        let spacing_px = spacing_px.max(1);
        let geom = *trend.roi().geometry();
        let nx = geom.width.div_ceil(spacing_px);
        let ny = geom.height.div_ceil(spacing_px);
        let mut centres = Vec::with_capacity(nx * ny);
        let mut weights = Vec::with_capacity(nx * ny);
        let cell_area = geom.pixel_size * geom.pixel_size;
        for by in 0..ny {
            for bx in 0..nx {
                let (mut mass, mut sx, mut sy, mut cnt) = (0.0, 0.0, 0.0, 0usize);
                for iy in by * spacing_px..((by + 1) * spacing_px).min(geom.height) {
                    for ix in bx * spacing_px..((bx + 1) * spacing_px).min(geom.width) {
                        if !trend.roi().contains_pixel(ix, iy) {
                            continue;
                        }
                        let c = geom.center(ix, iy);
                        sx += c.x;
                        sy += c.y;
                        cnt += 1;
                        if let Some(m) = trend.mu().get(ix, iy) {
                            mass += m * cell_area;
                        }
                    }
                }
                if cnt > 0 && mass > 0.0 {
                    centres.push(Point::new(sx / cnt as f64, sy / cnt as f64));
                    weights.push(mass);
                }
            }
        }
        let half = 0.5 * geom.pixel_size;
        MpleQuadrature {
            centres,
            weights,
            spacing: spacing_px as f64 * geom.pixel_size,
            origin: Point::new(geom.origin.x - half, geom.origin.y - half),
            nx,
            ny,
        }
    }

    pub fn len(&self) -> usize {
        self.centres.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centres.is_empty()
    }

    /// Per-cell neighbour counts t_b, or `None` for cells within the hard
    /// core of a data point.
    fn cell_counts(&self, eta: &[Point], radii: &InteractionRadii) -> Vec<Option<u32>> {
        // Bucket data points by cell so each cell only inspects nearby ones.
        let reach = (radii.interaction / self.spacing).ceil() as isize + 1;
        let cell_of = |p: &Point| {
            let cx = ((p.x - self.origin.x) / self.spacing).floor() as isize;
            let cy = ((p.y - self.origin.y) / self.spacing).floor() as isize;
            (cx, cy)
        };
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); self.nx * self.ny];
        for (i, p) in eta.iter().enumerate() {
            let (cx, cy) = cell_of(p);
            let cx = cx.clamp(0, self.nx as isize - 1) as usize;
            let cy = cy.clamp(0, self.ny as isize - 1) as usize;
            buckets[cy * self.nx + cx].push(i);
        }
        let h2 = radii.hard_core * radii.hard_core;
        let r2 = radii.interaction * radii.interaction;
        self.centres
            .iter()
            .map(|c| {
                let (cx, cy) = cell_of(c);
                let mut t = 0u32;
                for by in (cy - reach).max(0)..=(cy + reach).min(self.ny as isize - 1) {
                    for bx in (cx - reach).max(0)..=(cx + reach).min(self.nx as isize - 1) {
                        for &i in &buckets[by as usize * self.nx + bx as usize] {
                            let d2 = c.dist2(&eta[i]);
                            if d2 <= h2 {
                                return None;
                            }
                            if d2 <= r2 {
                                t += 1;
                            }
                        }
                    }
                }
                Some(t)
            })
            .collect()
    }
}

/// MPLE of (β, γ) from the necessary points `eta`. Falls back to the prior
/// means for fewer than two points or when the pseudo-likelihood increases
/// all the way to γ → 0.
pub fn mple_fit(
    eta: &[Point],
    radii: &InteractionRadii,
    quadrature: &MpleQuadrature,
    priors: &Priors,
) -> MpleFit {
    let fallback = || {
        let m = priors.mean();
        MpleFit {
            beta: m.beta,
            gamma: m.gamma,
            converged: false,
            iterations: 0,
        }
    };
    let n = eta.len();
    if n < 2 || quadrature.is_empty() {
        return fallback();
    }
    let pairs2 = 2.0 * close_pair_count(eta, radii.interaction) as f64;
    let counts = quadrature.cell_counts(eta, radii);
    let cells: Vec<(f64, f64)> = counts
        .iter()
        .zip(&quadrature.weights)
        .filter_map(|(t, &w)| t.map(|t| (w, t as f64)))
        .collect();
    if cells.is_empty() {
        return fallback();
    }
    let nf = n as f64;
    // S(θ₂) = Σ w e^{θ₂ t}; returns (S, S′/S, Var_w(t)) with weights w e^{θ₂ t}.
    let moments = |th2: f64| {
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for &(w, t) in &cells {
            let v = w * (th2 * t).exp();
            s0 += v;
            s1 += v * t;
            s2 += v * t * t;
        }
        let m = s1 / s0;
        (s0, m, (s2 / s0 - m * m).max(0.0))
    };
    let score = |m: f64| pairs2 - nf * m;

    let (lo_b, hi_b) = (GAMMA_MIN.ln(), GAMMA_MAX.ln());
    let (mut lo, mut hi) = (lo_b, hi_b);
    let mut th2 = (0.3f64).ln();
    let mut converged = false;
    let mut iterations = 0;
    if score(moments(hi_b).1) >= 0.0 {
        th2 = hi_b;
        converged = true;
    } else if score(moments(lo_b).1) <= 0.0 {
        // No interior maximum towards γ = 0: β̂ diverges and the fitted
        // density would be useless as an auxiliary density.
        return fallback();
    } else {
        for it in 1..=MAX_NEWTON {
            iterations = it;
            let (_, m, var) = moments(th2);
            let sc = score(m);
            if sc > 0.0 {
                lo = th2;
            } else {
                hi = th2;
            }
            let info = nf * var;
            let mut next = if info > 0.0 { th2 + sc / info } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - th2).abs() < 1e-10 || hi - lo < 1e-12 {
                th2 = next;
                converged = true;
                break;
            }
            th2 = next;
        }
        if !converged {
            warn!("pseudo-likelihood Newton iteration did not converge; using last iterate");
        }
    }
    let (s0, _, _) = moments(th2);
    MpleFit {
        beta: nf / s0,
        gamma: th2.exp(),
        converged,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{GridGeometry, RegionOfInterest, ScalarGrid};

    fn trend() -> Trend {
        let g = GridGeometry::new(120, 100);
        let mu = ScalarGrid::from_fn(g, |p| 2e-3 * (1.0 + p.y / 100.0)).unwrap();
        Trend::new(mu, RegionOfInterest::full(g).unwrap()).unwrap()
    }

    #[test]
    fn quadrature_mass_matches_trend_integral() {
        let t = trend();
        let q = MpleQuadrature::new(&t, 4);
        let total: f64 = q.weights.iter().sum();
        assert!((total - t.integral()).abs() < 1e-9 * t.integral());
    }

    #[test]
    fn few_points_fall_back_to_prior_means() {
        let t = trend();
        let q = MpleQuadrature::new(&t, 4);
        let radii = InteractionRadii::new(8.0, 24.0).unwrap();
        let fit = mple_fit(&[Point::new(5.0, 5.0)], &radii, &q, &Priors::default());
        assert_eq!((fit.beta, fit.gamma), (1.0, 2.0 / 7.0));
    }

    #[test]
    fn profile_score_vanishes_at_the_fit() {
        // Independent brute-force check of the stationarity conditions on an
        // explicit grid of γ values.
        let t = trend();
        let q = MpleQuadrature::new(&t, 4);
        let radii = InteractionRadii::new(8.0, 24.0).unwrap();
        let eta: Vec<Point> = (0..6)
            .flat_map(|i| (0..5).map(move |j| Point::new(10.0 + 19.0 * i as f64, 8.0 + 21.0 * j as f64)))
            .collect();
        let fit = mple_fit(&eta, &radii, &q, &Priors::default());
        assert!(fit.converged);
        let counts = q.cell_counts(&eta, &radii);
        let s = close_pair_count(&eta, 24.0) as f64;
        let n = eta.len() as f64;
        let log_pl = |b: f64, g: f64| {
            let mut integral = 0.0;
            for (c, w) in counts.iter().zip(&q.weights) {
                if let Some(t) = c {
                    integral += w * b * g.powi(*t as i32);
                }
            }
            n * b.ln() + 2.0 * s * g.ln() - integral
        };
        let best = log_pl(fit.beta, fit.gamma);
        for db in [0.97, 1.03] {
            for dg in [0.97, 1.0, 1.03] {
                let g = (fit.gamma * dg).min(GAMMA_MAX);
                assert!(log_pl(fit.beta * db, g) <= best + 1e-9);
            }
        }
    }

    #[test]
    fn constant_neighbour_counts_fall_back_to_prior_means() {
        // In a window smaller than R every dummy cell sees every data point,
        // so the pseudo-likelihood keeps rising as γ → 0.
        let g = GridGeometry::new(16, 16);
        let t = Trend::constant(RegionOfInterest::full(g).unwrap(), 0.01).unwrap();
        let q = MpleQuadrature::new(&t, 2);
        let radii = InteractionRadii::new(1e-6, 24.0).unwrap();
        let eta = [Point::new(2.0, 3.0), Point::new(5.0, 5.5), Point::new(8.0, 8.0)];
        let fit = mple_fit(&eta, &radii, &q, &Priors::default());
        assert!(!fit.converged);
        assert_eq!((fit.beta, fit.gamma), (1.0, 2.0 / 7.0));
    }
}
