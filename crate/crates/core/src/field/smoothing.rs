//! Normalised Gaussian convolution restricted to a pixel support.

use super::grid::GridGeometry;

fn kernel(sigma_px: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_px).ceil() as usize;
    (0..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma_px).powi(2)).exp())
        .collect()
}

fn convolve_rows(geom: &GridGeometry, input: &[f64], k: &[f64]) -> Vec<f64> {
    let (w, h) = (geom.width, geom.height);
    let r = k.len() - 1;
    let mut out = vec![0.0; input.len()];
    for iy in 0..h {
        let row = &input[iy * w..(iy + 1) * w];
        for ix in 0..w {
            let lo = ix.saturating_sub(r);
            let hi = (ix + r).min(w - 1);
            let mut acc = 0.0;
            for (jx, v) in row.iter().enumerate().take(hi + 1).skip(lo) {
                acc += k[ix.abs_diff(jx)] * v;
            }
            out[iy * w + ix] = acc;
        }
    }
    out
}

fn convolve_cols(geom: &GridGeometry, input: &[f64], k: &[f64]) -> Vec<f64> {
    let (w, h) = (geom.width, geom.height);
    let r = k.len() - 1;
    let mut out = vec![0.0; input.len()];
    for iy in 0..h {
        let lo = iy.saturating_sub(r);
        let hi = (iy + r).min(h - 1);
        for jy in lo..=hi {
            let kw = k[iy.abs_diff(jy)];
            let src = &input[jy * w..(jy + 1) * w];
            let dst = &mut out[iy * w..(iy + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += kw * s;
            }
        }
    }
    out
}

/// Smooths several channels sharing one support with a Gaussian of standard
/// deviation `sigma` (length units). Each output pixel is the weighted mean
/// of the supported input pixels in its neighbourhood; unsupported pixels
/// come back as NaN. `sigma == 0` copies the input.
pub fn smooth_channels(
    geom: &GridGeometry,
    support: &[bool],
    channels: &[&[f64]],
    sigma: f64,
) -> Vec<Vec<f64>> {
    if sigma <= 0.0 {
        return channels
            .iter()
            .map(|c| {
                c.iter()
                    .zip(support)
                    .map(|(&v, &s)| if s { v } else { f64::NAN })
                    .collect()
            })
            .collect();
    }
    let k = kernel(sigma / geom.pixel_size);
    let weights: Vec<f64> = support.iter().map(|&s| if s { 1.0 } else { 0.0 }).collect();
    let norm = convolve_cols(geom, &convolve_rows(geom, &weights, &k), &k);
    channels
        .iter()
        .map(|c| {
            let masked: Vec<f64> = c
                .iter()
                .zip(support)
                .map(|(&v, &s)| if s { v } else { 0.0 })
                .collect();
            let sm = convolve_cols(geom, &convolve_rows(geom, &masked, &k), &k);
            sm.iter()
                .zip(&norm)
                .zip(support)
                .map(|((&v, &n), &s)| if s && n > 0.0 { v / n } else { f64::NAN })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_is_preserved_including_edges() {
        let g = GridGeometry::new(17, 9);
        let support = vec![true; g.len()];
        let c = vec![2.5; g.len()];
        let out = smooth_channels(&g, &support, &[&c], 3.0);
        assert!(out[0].iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn linear_ramp_preserved_away_from_edges() {
        let g = GridGeometry::new(60, 60);
        let support = vec![true; g.len()];
        let ramp: Vec<f64> = (0..g.len()).map(|i| (i % 60) as f64 * 0.1).collect();
        let out = smooth_channels(&g, &support, &[&ramp], 2.0);
        for iy in 10..50 {
            for ix in 10..50 {
                let i = g.index(ix, iy);
                assert!((out[0][i] - ramp[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn unsupported_pixels_do_not_leak() {
        let g = GridGeometry::new(10, 1);
        let support: Vec<bool> = (0..10).map(|i| i < 5).collect();
        let vals: Vec<f64> = (0..10).map(|i| if i < 5 { 1.0 } else { 100.0 }).collect();
        let out = smooth_channels(&g, &support, &[&vals], 2.0);
        for i in 0..5 {
            assert!((out[0][i] - 1.0).abs() < 1e-12);
        }
        assert!(out[0][7].is_nan());
    }
}
