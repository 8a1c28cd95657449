//! Kernel estimates of the (inhomogeneous) pair correlation function.

use std::f64::consts::PI;

use super::PointProcessError;
use crate::field::{RegionOfInterest, ScalarGrid};
use crate::geometry::Point;

/// First-order intensity used to normalise pair counts.
#[derive(Clone, Copy, Debug)]
pub enum PcfIntensity<'a> {
    /// λ² estimated by n(n − 1)/|𝔛|².
    Homogeneous,
    Constant(f64),
    /// Trend shape rescaled to n/∫μ, floored at 10⁻⁶. Points on excluded
    /// pixels are left out.
    Trend(&'a ScalarGrid),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcfCurve {
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    /// Number of points the curve was estimated from.
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PooledPcf {
    pub r: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

const INTENSITY_FLOOR: f64 = 1e-6;

/// 0.15/√(n/|𝔛|)
pub fn default_bandwidth(n: usize, area: f64) -> f64 {
    0.15 / (n as f64 / area).sqrt()
}

fn epanechnikov(t: f64, half_width: f64) -> f64 {
    let u = t / half_width;
    if u.abs() >= 1.0 {
        0.0
    } else {
        0.75 * (1.0 - u * u) / half_width
    }
}

/// Epanechnikov-kernel PCF with translation edge correction on the mask's
/// bounding box, rescaled to the mask area. `bandwidth` is the kernel
/// half-width.
pub fn pcf_estimate(
    points: &[Point],
    roi: &RegionOfInterest,
    intensity: PcfIntensity<'_>,
    r_grid: &[f64],
    bandwidth: Option<f64>,
) -> Result<PcfCurve, PointProcessError> {
    let n = points.len();
    if n < 2 {
        return Err(PointProcessError::TooFewPoints);
    }
    if r_grid.iter().any(|r| !(*r > 0.0)) {
        return Err(PointProcessError::InvalidParameter("r grid must be positive".into()));
    }
    let area = roi.area();
    let bw = bandwidth.unwrap_or_else(|| default_bandwidth(n, area));
    if !(bw > 0.0) {
        return Err(PointProcessError::InvalidParameter(format!("bandwidth = {bw}")));
    }
    let lambdas: Vec<Option<f64>> = match intensity {
        PcfIntensity::Homogeneous => vec![Some((n as f64 * (n - 1) as f64).sqrt() / area); n],
        PcfIntensity::Constant(l) => vec![Some(l); n],
        PcfIntensity::Trend(mu) => {
            let total = mu.integral(roi);
            if !(total > 0.0) {
                return Err(PointProcessError::DegenerateTrend);
            }
            let scale = n as f64 / total;
            points
                .iter()
                .map(|p| mu.value_at(*p).map(|m| (scale * m).max(INTENSITY_FLOOR)))
                .collect()
        }
    };
    let (lo, hi) = roi.bounding_box();
    let (a, b) = (hi.x - lo.x, hi.y - lo.y);
    let mut g = vec![0.0; r_grid.len()];
    for i in 0..n {
        let Some(li) = lambdas[i] else { continue };
        for j in (i + 1)..n {
            let Some(lj) = lambdas[j] else { continue };
            let u = points[i].sub(&points[j]);
            let overlap = area * (1.0 - u.x.abs() / a).max(0.0) * (1.0 - u.y.abs() / b).max(0.0);
            if overlap <= 0.0 {
                continue;
            }
            let d = u.norm();
            // Both ordered pairs (i, j) and (j, i).
            let w = 2.0 / (li * lj * overlap);
            for (k, r) in r_grid.iter().enumerate() {
                g[k] += w * epanechnikov(r - d, bw);
            }
        }
    }
    for (k, r) in r_grid.iter().enumerate() {
        g[k] /= 2.0 * PI * r;
    }
    Ok(PcfCurve {
        r: r_grid.to_vec(),
        g,
        n,
    })
}

/// Weighted mean curve with a pointwise mean ± 1.96·sd/√m band. Weights
/// default to n².
pub fn pcf_pool(curves: &[PcfCurve], weights: Option<&[f64]>) -> Result<PooledPcf, PointProcessError> {
    let first = curves.first().ok_or(PointProcessError::TooFewPoints)?;
    if curves.iter().any(|c| c.r != first.r || c.g.len() != first.r.len()) {
        return Err(PointProcessError::GridMismatch);
    }
    let w: Vec<f64> = match weights {
        Some(w) if w.len() == curves.len() => w.to_vec(),
        Some(_) => return Err(PointProcessError::GridMismatch),
        None => curves.iter().map(|c| (c.n * c.n) as f64).collect(),
    };
    let wsum: f64 = w.iter().sum();
    if !(wsum > 0.0) {
        return Err(PointProcessError::InvalidParameter("pooling weights sum to zero".into()));
    }
    let m = curves.len() as f64;
    let len = first.r.len();
    let mut out = PooledPcf {
        r: first.r.clone(),
        mean: vec![0.0; len],
        sd: vec![0.0; len],
        lower: vec![0.0; len],
        upper: vec![0.0; len],
    };
    for k in 0..len {
        let mean = curves.iter().zip(&w).map(|(c, w)| w * c.g[k]).sum::<f64>() / wsum;
        let var = if curves.len() > 1 {
            curves
                .iter()
                .zip(&w)
                .map(|(c, w)| w * (c.g[k] - mean).powi(2))
                .sum::<f64>()
                / wsum
                * m
                / (m - 1.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        out.mean[k] = mean;
        out.sd[k] = sd;
        out.lower[k] = mean - 1.96 * sd / m.sqrt();
        out.upper[k] = mean + 1.96 * sd / m.sqrt();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GridGeometry;
    use crate::point_process::sample_poisson;
    use crate::rng::rng_from_seed;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn kernel_integrates_to_one() {
        let h = 3.0;
        let steps = 60_000;
        let dx = 2.0 * h / steps as f64;
        let s: f64 = (0..steps)
            .map(|i| epanechnikov(-h + (i as f64 + 0.5) * dx, h) * dx)
            .sum();
        assert!((s - 1.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_points() {
        let roi = RegionOfInterest::full(GridGeometry::new(10, 10)).unwrap();
        assert_eq!(
            pcf_estimate(&[Point::new(1.0, 1.0)], &roi, PcfIntensity::Homogeneous, &[1.0], None)
                .unwrap_err(),
            PointProcessError::TooFewPoints
        );
    }

    #[test]
    fn pooling_degenerate_cases() {
        let c = PcfCurve {
            r: vec![1.0, 2.0],
            g: vec![0.5, 1.1],
            n: 10,
        };
        let pooled = pcf_pool(&[c.clone(), c.clone(), c.clone()], None).unwrap();
        assert_eq!(pooled.mean, c.g);
        assert_eq!(pooled.lower, pooled.upper);

        let a = PcfCurve { r: vec![5.0], g: vec![0.8], n: 3 };
        let b = PcfCurve { r: vec![5.0], g: vec![1.2], n: 7 };
        let pooled = pcf_pool(&[a.clone(), b.clone()], Some(&[1.0, 1.0])).unwrap();
        assert!((pooled.mean[0] - 1.0).abs() < 1e-15);

        let mismatched = PcfCurve { r: vec![6.0], g: vec![1.0], n: 3 };
        assert_eq!(pcf_pool(&[a, mismatched], None).unwrap_err(), PointProcessError::GridMismatch);
    }

    #[test]
    fn homogeneous_and_trend_intensities_agree_for_flat_trend() {
        let g = GridGeometry::new(200, 150);
        let roi = RegionOfInterest::full(g).unwrap();
        let mut rng = rng_from_seed(9);
        let p = sample_poisson(&roi, 0.002, &mut rng).unwrap();
        let n = p.len() as f64;
        let flat = ScalarGrid::filled(g, 0.7).unwrap();
        let r: Vec<f64> = (1..=10).map(|k| 5.0 * k as f64).collect();
        let h = pcf_estimate(p.points(), &roi, PcfIntensity::Homogeneous, &r, Some(6.0)).unwrap();
        let t = pcf_estimate(p.points(), &roi, PcfIntensity::Trend(&flat), &r, Some(6.0)).unwrap();
        let c = pcf_estimate(p.points(), &roi, PcfIntensity::Constant(n / roi.area()), &r, Some(6.0)).unwrap();
        for k in 0..r.len() {
            assert!((t.g[k] - c.g[k]).abs() < 1e-9 * c.g[k].max(1.0));
            assert!((h.g[k] * (n - 1.0) / n - c.g[k]).abs() < 1e-9 * c.g[k].max(1.0));
        }
    }

    #[test]
    fn band_covers_the_common_mean_of_perturbed_curves() {
        // The band is a confidence band for the pooled mean, so across many
        // pools it should contain the true curve about 95% of the time.
        let mut rng = rng_from_seed(11);
        let r = vec![10.0];
        let noise = Normal::new(0.0, 0.1).unwrap();
        let pools = 2000;
        let mut covered = 0;
        for _ in 0..pools {
            let curves: Vec<PcfCurve> = (0..50)
                .map(|_| PcfCurve {
                    r: r.clone(),
                    g: vec![1.0 + noise.sample(&mut rng)],
                    n: 30,
                })
                .collect();
            let p = pcf_pool(&curves, None).unwrap();
            if p.lower[0] <= 1.0 && 1.0 <= p.upper[0] {
                covered += 1;
            }
        }
        assert!(covered as f64 / pools as f64 >= 0.93, "{covered}");
    }
}
