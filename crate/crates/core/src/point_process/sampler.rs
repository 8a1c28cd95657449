//! Forward simulation: homogeneous Poisson patterns and a birth–death–move
//! Metropolis–Hastings chain for the Strauss process with hard core.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::density::{StraussParams, Trend};
use super::pattern::{min_pair_distance, PointPattern};
use super::PointProcessError;
use crate::field::RegionOfInterest;
use crate::geometry::Point;

/// Homogeneous Poisson pattern of intensity `lambda` on the mask.
pub fn sample_poisson<R: Rng + ?Sized>(
    roi: &RegionOfInterest,
    lambda: f64,
    rng: &mut R,
) -> Result<PointPattern, PointProcessError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PointProcessError::InvalidParameter(format!("lambda = {lambda}")));
    }
    let mean = lambda * roi.area();
    let n = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| PointProcessError::InvalidParameter(e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let points = (0..n).map(|_| roi.sample_uniform(rng)).collect();
    Ok(PointPattern::with_area(points, roi.area()))
}

/// max(10⁴, 50·⌈β∫μ⌉)
pub fn default_chain_length(beta: f64, trend_integral: f64) -> usize {
    let expected = (beta * trend_integral).ceil();
    10_000usize.max((50.0 * expected) as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    Birth,
    Death,
    Move,
}

/// Birth–death–move chain targeting the Strauss process with hard core.
/// Each step proposes a birth, a death or a Gaussian move of one point with
/// probability 1/3 each.
#[derive(Clone, Debug)]
pub struct StraussChain<'a> {
    trend: &'a Trend,
    params: StraussParams,
    points: Vec<Point>,
    move_sd: f64,
}

impl<'a> StraussChain<'a> {
    /// Chain started from `initial`, which must be feasible.
    pub fn new(
        trend: &'a Trend,
        params: StraussParams,
        initial: Vec<Point>,
    ) -> Result<Self, PointProcessError> {
        if min_pair_distance(&initial) <= params.radii.hard_core
            || initial.iter().any(|p| !trend.roi().contains(*p))
        {
            return Err(PointProcessError::InfeasibleStart);
        }
        Ok(StraussChain {
            trend,
            params,
            points: initial,
            move_sd: params.radii.interaction / 2.0,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    /// Number of R-close neighbours of `z` among the current points (skipping
    /// index `skip`), or `None` if `z` is within the hard core of one.
    fn neighbours(&self, z: Point, skip: Option<usize>) -> Option<i32> {
        let h2 = self.params.radii.hard_core.powi(2);
        let r2 = self.params.radii.interaction.powi(2);
        let mut t = 0;
        for (j, w) in self.points.iter().enumerate() {
            if Some(j) == skip {
                continue;
            }
            let d2 = z.dist2(w);
            if d2 <= h2 {
                return None;
            }
            if d2 <= r2 {
                t += 1;
            }
        }
        Some(t)
    }

    /// Papangelou conditional intensity β(z)γ^t of `z` given the other points.
    fn conditional(&self, z: Point, skip: Option<usize>) -> f64 {
        match self.neighbours(z, skip) {
            Some(t) => self.trend.activity(self.params.beta, z) * self.params.gamma.powi(t),
            None => 0.0,
        }
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (MoveKind, bool) {
        let area = self.trend.roi().area();
        let n = self.points.len();
        let u: f64 = rng.random();
        if u < 1.0 / 3.0 {
            let z = self.trend.roi().sample_uniform(rng);
            let c = self.conditional(z, None);
            if c > 0.0 && rng.random::<f64>() < c * area / (n + 1) as f64 {
                self.points.push(z);
                return (MoveKind::Birth, true);
            }
            (MoveKind::Birth, false)
        } else if u < 2.0 / 3.0 {
            if n == 0 {
                return (MoveKind::Death, false);
            }
            let i = rng.random_range(0..n);
            let c = self.conditional(self.points[i], Some(i));
            if rng.random::<f64>() * c < n as f64 / area {
                self.points.swap_remove(i);
                return (MoveKind::Death, true);
            }
            (MoveKind::Death, false)
        } else {
            if n == 0 {
                return (MoveKind::Move, false);
            }
            let i = rng.random_range(0..n);
            let old = self.points[i];
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let z = Point::new(old.x + self.move_sd * dx, old.y + self.move_sd * dy);
            if !self.trend.roi().contains(z) {
                return (MoveKind::Move, false);
            }
            let c_new = self.conditional(z, Some(i));
            if c_new > 0.0 {
                let c_old = self.conditional(old, Some(i));
                if rng.random::<f64>() * c_old < c_new {
                    self.points[i] = z;
                    return (MoveKind::Move, true);
                }
            }
            (MoveKind::Move, false)
        }
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
        assert!(
            min_pair_distance(&self.points) > self.params.radii.hard_core,
            "Strauss chain left the hard-core support"
        );
    }
}

/// Final state of a birth–death–move chain of `steps` steps (default
/// [`default_chain_length`]) started from the empty pattern.
pub fn sample_strauss_hardcore<R: Rng + ?Sized>(
    trend: &Trend,
    params: StraussParams,
    steps: Option<usize>,
    rng: &mut R,
) -> Result<PointPattern, PointProcessError> {
    if !(trend.integral() > 0.0) || params.beta == 0.0 {
        return Err(PointProcessError::DegenerateTrend);
    }
    let steps = steps.unwrap_or_else(|| default_chain_length(params.beta, trend.integral()));
    if steps == 0 {
        return Err(PointProcessError::InvalidParameter("steps must be at least 1".into()));
    }
    let mut chain = StraussChain::new(trend, params, Vec::new())?;
    chain.run(steps, rng);
    Ok(PointPattern::with_area(chain.into_points(), trend.roi().area()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridGeometry;
    use crate::point_process::InteractionRadii;
    use crate::rng::rng_from_seed;
    use crate::stats::{mean, std_error};

    #[test]
    fn zero_intensity_gives_empty_patterns() {
        let roi = RegionOfInterest::full(GridGeometry::new(50, 50)).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..20 {
            assert!(sample_poisson(&roi, 0.0, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn poisson_points_stay_in_a_ragged_mask() {
        let g = GridGeometry::new(60, 40);
        let mask = (0..g.len()).map(|i| (g.coords(i).0 + g.coords(i).1) % 3 != 0).collect();
        let roi = RegionOfInterest::new(g, mask).unwrap();
        let mut rng = rng_from_seed(2);
        let p = sample_poisson(&roi, 0.05, &mut rng).unwrap();
        assert!(!p.is_empty());
        assert!(p.points().iter().all(|z| roi.contains(*z)));
    }

    #[test]
    fn strauss_respects_hard_core_and_mask() {
        let g = GridGeometry::new(120, 100);
        let mask = (0..g.len()).map(|i| g.coords(i).0 > 10).collect();
        let roi = RegionOfInterest::new(g, mask).unwrap();
        let trend = Trend::constant(roi.clone(), 0.004).unwrap();
        let params = StraussParams::new(1.0, 0.3, InteractionRadii::new(8.0, 24.0).unwrap()).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..5 {
            let p = sample_strauss_hardcore(&trend, params, Some(5_000), &mut rng).unwrap();
            assert!(min_pair_distance(p.points()) > 8.0);
            assert!(p.points().iter().all(|z| roi.contains(*z)));
        }
    }

    #[test]
    fn degenerate_trend_is_rejected() {
        let roi = RegionOfInterest::full(GridGeometry::new(10, 10)).unwrap();
        let trend = Trend::constant(roi, 0.0).unwrap();
        let params = StraussParams::new(1.0, 0.5, InteractionRadii::new(1.0, 2.0).unwrap()).unwrap();
        let mut rng = rng_from_seed(4);
        assert_eq!(
            sample_strauss_hardcore(&trend, params, None, &mut rng).unwrap_err(),
            PointProcessError::DegenerateTrend
        );
    }

    #[test]
    fn chain_length_rule() {
        assert_eq!(default_chain_length(1.0, 30.0), 10_000);
        assert_eq!(default_chain_length(2.0, 150.2), 50 * 301);
    }

    #[test]
    fn small_poisson_mean_is_recovered() {
        let roi = RegionOfInterest::full(GridGeometry::new(40, 25)).unwrap();
        let mut rng = rng_from_seed(5);
        let counts: Vec<f64> = (0..4000)
            .map(|_| sample_poisson(&roi, 0.003, &mut rng).unwrap().len() as f64)
            .collect();
        assert!((mean(&counts) - 3.0).abs() < 3.0 * std_error(&counts));
    }

    #[test]
    fn fully_interacting_window_matches_exact_count_law() {
        // Every pair in a 16×16 window lies within R = 24 and the hard core
        // is negligible, so P(n) ∝ (β∫μ)ⁿ γ^(n(n−1)/2) / n!.
        let roi = RegionOfInterest::full(GridGeometry::new(16, 16)).unwrap();
        let trend = Trend::constant(roi, 3.0 / 256.0).unwrap();
        let gamma = 0.4;
        let params = StraussParams::new(1.0, gamma, InteractionRadii::new(1e-6, 24.0).unwrap()).unwrap();
        let mut exact: Vec<f64> = (0..8)
            .scan(1.0, |fact, n: i32| {
                if n > 0 {
                    *fact *= n as f64;
                }
                Some(3f64.powi(n) * gamma.powi(n * (n - 1) / 2) / *fact)
            })
            .collect();
        let z: f64 = exact.iter().sum();
        exact.iter_mut().for_each(|e| *e /= z);
        let mut chain = StraussChain::new(&trend, params, Vec::new()).unwrap();
        let mut rng = rng_from_seed(6);
        let steps = 2_000_000;
        let mut hist = [0usize; 8];
        for _ in 0..steps {
            chain.step(&mut rng);
            hist[chain.points().len().min(7)] += 1;
        }
        for n in 0..8 {
            let freq = hist[n] as f64 / steps as f64;
            assert!((freq - exact[n]).abs() < 0.005, "n = {n}: {freq} vs {}", exact[n]);
        }
    }
}
