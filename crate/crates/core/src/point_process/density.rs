use super::pattern::{close_pair_count, min_pair_distance};
use super::PointProcessError;
use crate::field::{RegionOfInterest, ScalarGrid};
use crate::geometry::Point;

/// Hard-core distance h and interaction distance R.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InteractionRadii {
    pub hard_core: f64,
    pub interaction: f64,
}

impl InteractionRadii {
    pub fn new(hard_core: f64, interaction: f64) -> Result<Self, PointProcessError> {
        if !(hard_core > 0.0 && hard_core < interaction && interaction.is_finite()) {
            return Err(PointProcessError::InvalidRadii {
                h: hard_core,
                r: interaction,
            });
        }
        Ok(InteractionRadii {
            hard_core,
            interaction,
        })
    }
}

/// Activity scale β, interaction γ and radii of a Strauss process with hard
/// core whose trend is β·μ(z).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StraussParams {
    pub beta: f64,
    pub gamma: f64,
    pub radii: InteractionRadii,
}

impl StraussParams {
    pub fn new(beta: f64, gamma: f64, radii: InteractionRadii) -> Result<Self, PointProcessError> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(PointProcessError::InvalidParameter(format!("beta = {beta}")));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(PointProcessError::InvalidParameter(format!("gamma = {gamma}")));
        }
        Ok(StraussParams { beta, gamma, radii })
    }
}

/// The trend shape μ on the region of interest.
#[derive(Clone, Debug)]
pub struct Trend {
    mu: ScalarGrid,
    roi: RegionOfInterest,
    integral: f64,
}

impl Trend {
    pub fn new(mu: ScalarGrid, roi: RegionOfInterest) -> Result<Self, PointProcessError> {
        if !mu.geometry().same_shape(roi.geometry()) {
            return Err(crate::field::FieldError::GeometryMismatch.into());
        }
        if let Some(v) = mu.values().iter().find(|v| **v < 0.0) {
            return Err(PointProcessError::InvalidParameter(format!("negative trend value {v}")));
        }
        let integral = mu.integral(&roi);
        Ok(Trend { mu, roi, integral })
    }

    /// μ ≡ `value` on the mask.
    pub fn constant(roi: RegionOfInterest, value: f64) -> Result<Self, PointProcessError> {
        let mu = ScalarGrid::filled(*roi.geometry(), value)?;
        Self::new(mu, roi)
    }

    pub fn mu(&self) -> &ScalarGrid {
        &self.mu
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    /// ∫_𝔛 μ, excluded pixels counting as zero.
    pub fn integral(&self) -> f64 {
        self.integral
    }

    /// μ of the pixel containing `p`; `None` outside the mask or where μ is
    /// excluded.
    #[inline]
    pub fn mu_at(&self, p: Point) -> Option<f64> {
        let (ix, iy) = self.roi.geometry().pixel_of(p)?;
        if !self.roi.contains_pixel(ix, iy) {
            return None;
        }
        self.mu.get(ix, iy)
    }

    /// β(z) = β·μ(z), zero where μ is unavailable.
    #[inline]
    pub fn activity(&self, beta: f64, p: Point) -> f64 {
        self.mu_at(p).map_or(0.0, |m| beta * m)
    }
}

/// log f_λ(ξ) = (1 − λ)|𝔛| + n log λ, with 0·log 0 = 0.
pub fn log_poisson_density(n: usize, area: f64, lambda: f64) -> f64 {
    let base = (1.0 - lambda) * area;
    if n == 0 {
        base
    } else if lambda == 0.0 {
        f64::NEG_INFINITY
    } else {
        base + n as f64 * lambda.ln()
    }
}

/// Σ log β(z) + s_R log γ when the hard core holds, −∞ otherwise. The
/// normalising constant is never included.
pub fn log_strauss_density_unnorm(points: &[Point], trend: &Trend, params: &StraussParams) -> f64 {
    if min_pair_distance(points) <= params.radii.hard_core {
        return f64::NEG_INFINITY;
    }
    let mut total = 0.0;
    for p in points {
        match trend.mu_at(*p) {
            Some(m) => total += (params.beta * m).ln(),
            None => return f64::NEG_INFINITY,
        }
    }
    let s = close_pair_count(points, params.radii.interaction);
    if s > 0 {
        total += s as f64 * params.gamma.ln();
    }
    total
}

/// log g(x ∪ {z}) − log g(x) = log β(z) + t_R(z, x) log γ, or −∞ when `z`
/// comes within the hard core of `others`.
pub fn log_strauss_ratio(z: Point, others: &[Point], trend: &Trend, params: &StraussParams) -> f64 {
    let h2 = params.radii.hard_core * params.radii.hard_core;
    let r2 = params.radii.interaction * params.radii.interaction;
    let mut t = 0usize;
    for w in others {
        let d2 = z.dist2(w);
        if d2 <= h2 {
            return f64::NEG_INFINITY;
        }
        if d2 <= r2 {
            t += 1;
        }
    }
    let mut v = trend.activity(params.beta, z).ln();
    if t > 0 {
        v += t as f64 * params.gamma.ln();
    }
    v
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::field::GridGeometry;

    fn ramp_trend() -> Trend {
        let g = GridGeometry::new(100, 100);
        let mu = ScalarGrid::from_fn(g, |p| 1e-4 * (1.0 + p.x / 50.0)).unwrap();
        Trend::new(mu, RegionOfInterest::full(g).unwrap()).unwrap()
    }

    fn params(beta: f64, gamma: f64) -> StraussParams {
        StraussParams::new(beta, gamma, InteractionRadii::new(8.0, 24.0).unwrap()).unwrap()
    }

    #[test]
    fn poisson_density_cases() {
        assert_eq!(log_poisson_density(0, 12.5, 0.0), 12.5);
        assert_eq!(log_poisson_density(2, 12.5, 0.0), f64::NEG_INFINITY);
        let v = log_poisson_density(3, 145_100.0, 1e-4);
        let oracle = (1.0 - 1e-4) * 145_100.0 + 3.0 * (1e-4f64).ln();
        assert!((v - oracle).abs() < 1e-9);
        let ratio = log_poisson_density(4, 145_100.0, 1e-4) - v;
        assert!((ratio - (1e-4f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn strauss_density_cases() {
        let t = ramp_trend();
        let p = params(1.9, 0.37);
        assert_eq!(log_strauss_density_unnorm(&[], &t, &p), 0.0);
        let violating = [Point::new(10.0, 10.0), Point::new(14.0, 10.0)];
        assert_eq!(log_strauss_density_unnorm(&violating, &t, &p), f64::NEG_INFINITY);
        let at_h = [Point::new(10.0, 10.0), Point::new(18.0, 10.0)];
        assert_eq!(log_strauss_density_unnorm(&at_h, &t, &p), f64::NEG_INFINITY);

        let five = [
            Point::new(10.0, 10.0),
            Point::new(25.0, 12.0),
            Point::new(40.0, 40.0),
            Point::new(60.0, 45.0),
            Point::new(90.0, 90.0),
        ];
        let mut oracle = 0.0;
        for z in &five {
            oracle += (1.9 * 1e-4 * (1.0 + z.x / 50.0)).ln();
        }
        oracle += close_pair_count(&five, 24.0) as f64 * 0.37f64.ln();
        assert!((log_strauss_density_unnorm(&five, &t, &p) - oracle).abs() < 1e-9);
    }

    #[test]
    fn excluded_trend_is_impossible() {
        let g = GridGeometry::new(10, 10);
        let mut v = vec![1.0; g.len()];
        v[g.index(3, 3)] = f64::NAN;
        let t = Trend::new(ScalarGrid::new(g, v).unwrap(), RegionOfInterest::full(g).unwrap()).unwrap();
        let p = params(1.0, 0.5);
        assert_eq!(log_strauss_density_unnorm(&[Point::new(3.0, 3.0)], &t, &p), f64::NEG_INFINITY);
        assert_eq!(t.integral(), 99.0);
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..99.0f64, 0.0..99.0f64), 0..max)
            .prop_map(|v| v.into_iter().map(Point::from).collect())
    }

    proptest! {
        #[test]
        fn ratio_matches_density_difference(pts in arb_points(12), z in (0.0..99.0f64, 0.0..99.0f64), gamma in 0.05..1.0f64) {
            let t = ramp_trend();
            let p = params(1.3, gamma);
            prop_assume!(log_strauss_density_unnorm(&pts, &t, &p).is_finite());
            let z = Point::from(z);
            let mut with = pts.clone();
            with.push(z);
            let direct = log_strauss_density_unnorm(&with, &t, &p) - log_strauss_density_unnorm(&pts, &t, &p);
            let ratio = log_strauss_ratio(z, &pts, &t, &p);
            if direct.is_finite() {
                prop_assert!((direct - ratio).abs() < 1e-9);
            } else {
                prop_assert_eq!(ratio, f64::NEG_INFINITY);
            }
        }

        #[test]
        fn no_interaction_collapses_to_poisson_shape(pts in arb_points(20)) {
            let t = ramp_trend();
            let p = StraussParams::new(2.0, 1.0, InteractionRadii::new(1e-6, 24.0).unwrap()).unwrap();
            prop_assume!(min_pair_distance(&pts) > 1e-6);
            let expect: f64 = pts.iter().map(|z| (2.0 * t.mu_at(*z).unwrap()).ln()).sum();
            prop_assert!((log_strauss_density_unnorm(&pts, &t, &p) - expect).abs() < 1e-9);
        }
    }
}
