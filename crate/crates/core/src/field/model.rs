//! Divergence quantities of a ridge flow and the necessary minutiae number.
//!
//! All derivatives are taken on a locally consistent direction selection:
//! when differencing at a pixel with chosen direction `d`, each neighbour's
//! direction is flipped onto the half-plane of `d`. Away from singularities
//! this is the same as differencing a continuous selection, and it makes
//! every signed quantity flip sign exactly when `d` is negated.

use std::collections::VecDeque;

use log::warn;

use super::grid::{DirectionField, GridGeometry, OrientationGrid, RegionOfInterest, ScalarGrid};
use super::region::StarRegion;
use super::smoothing::smooth_channels;
use super::FieldError;
use crate::geometry::Point;

/// Tuning knobs for the field computations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldOptions {
    /// Standard deviation of the Gaussian applied to (cos 2θ, sin 2θ) and Φ
    /// before differentiation, in length units. Zero disables smoothing.
    pub smoothing_sigma: f64,
    /// Patches whose mean doubled-angle vector is shorter than this are
    /// treated as containing a singularity.
    pub coherence_threshold: f64,
    /// Patches with |div F| above this (per unit length) anywhere are
    /// treated as containing a singularity.
    pub max_divergence: f64,
    /// Side of the square tiles used to flag singular areas in μ maps, pixels.
    pub patch_size: usize,
    /// Node spacing of the boundary quadrature.
    pub boundary_step: f64,
    /// Node spacing of the area quadrature.
    pub area_step: f64,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions {
            smoothing_sigma: 8.0,
            coherence_threshold: 0.3,
            max_divergence: 2.0,
            patch_size: 32,
            boundary_step: 0.5,
            area_step: 0.25,
        }
    }
}

impl FieldOptions {
    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.smoothing_sigma = sigma;
        self
    }

    fn validate(&self) -> Result<(), FieldError> {
        if !(self.smoothing_sigma.is_finite() && self.smoothing_sigma >= 0.0) {
            return Err(FieldError::InvalidSigma(self.smoothing_sigma));
        }
        if !(self.boundary_step > 0.0 && self.area_step > 0.0) || self.patch_size == 0 {
            return Err(FieldError::InvalidOptions);
        }
        Ok(())
    }
}

/// Orientation and ridge frequency after smoothing, with the derived
/// gradient of Φ, ready for divergence computations.
#[derive(Clone, Debug)]
pub struct FieldModel {
    geom: GridGeometry,
    valid: Vec<bool>,
    mask: Vec<bool>,
    cos2: Vec<f64>,
    sin2: Vec<f64>,
    /// Length of the smoothed doubled-angle vector before normalisation.
    coherence: Vec<f64>,
    dir_x: Vec<f64>,
    dir_y: Vec<f64>,
    phi: Vec<f64>,
    grad_x: Vec<f64>,
    grad_y: Vec<f64>,
    options: FieldOptions,
}

/// Divergence with neighbours aligned to `d` at pixel `(ix, iy)`; central
/// differences where both neighbours are usable, one-sided otherwise.
fn aligned_divergence(
    geom: &GridGeometry,
    valid: &[bool],
    fx: &[f64],
    fy: &[f64],
    ix: usize,
    iy: usize,
    d: [f64; 2],
) -> f64 {
    let h = geom.pixel_size;
    let fetch = |jx: isize, jy: isize| -> Option<[f64; 2]> {
        if jx < 0 || jy < 0 || jx as usize >= geom.width || jy as usize >= geom.height {
            return None;
        }
        let j = geom.index(jx as usize, jy as usize);
        if !valid[j] {
            return None;
        }
        let v = [fx[j], fy[j]];
        if v[0] * d[0] + v[1] * d[1] < 0.0 {
            Some([-v[0], -v[1]])
        } else {
            Some(v)
        }
    };
    let (x, y) = (ix as isize, iy as isize);
    let partial = |lo: Option<[f64; 2]>, hi: Option<[f64; 2]>, c: usize| match (lo, hi) {
        (Some(l), Some(r)) => (r[c] - l[c]) / (2.0 * h),
        (None, Some(r)) => (r[c] - d[c]) / h,
        (Some(l), None) => (d[c] - l[c]) / h,
        (None, None) => 0.0,
    };
    partial(fetch(x - 1, y), fetch(x + 1, y), 0) + partial(fetch(x, y - 1), fetch(x, y + 1), 1)
}

/// Central-difference gradient of a scalar raster, one-sided next to
/// unusable pixels.
fn gradient(geom: &GridGeometry, valid: &[bool], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let h = geom.pixel_size;
    let mut gx = vec![0.0; v.len()];
    let mut gy = vec![0.0; v.len()];
    let usable = |jx: isize, jy: isize| -> Option<f64> {
        if jx < 0 || jy < 0 || jx as usize >= geom.width || jy as usize >= geom.height {
            return None;
        }
        let j = geom.index(jx as usize, jy as usize);
        valid[j].then(|| v[j])
    };
    for i in 0..v.len() {
        if !valid[i] {
            continue;
        }
        let (ix, iy) = geom.coords(i);
        let (x, y) = (ix as isize, iy as isize);
        let diff = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(l), Some(r)) => (r - l) / (2.0 * h),
            (None, Some(r)) => (r - v[i]) / h,
            (Some(l), None) => (v[i] - l) / h,
            (None, None) => 0.0,
        };
        gx[i] = diff(usable(x - 1, y), usable(x + 1, y));
        gy[i] = diff(usable(x, y - 1), usable(x, y + 1));
    }
    (gx, gy)
}

/// Central-difference divergence of a direction raster after Gaussian
/// pre-smoothing of its components. Pixels where the input is undefined come
/// back excluded.
pub fn divergence(field: &DirectionField, smoothing_sigma: f64) -> Result<ScalarGrid, FieldError> {
    let geom = *field.geometry();
    if geom.width < 3 || geom.height < 3 {
        return Err(FieldError::DegenerateRaster);
    }
    if !(smoothing_sigma.is_finite() && smoothing_sigma >= 0.0) {
        return Err(FieldError::InvalidSigma(smoothing_sigma));
    }
    let (fx, fy) = field.components();
    let mut valid: Vec<bool> = (0..geom.len()).map(|i| field.get(i).is_some()).collect();
    let sm = smooth_channels(&geom, &valid, &[fx, fy], smoothing_sigma);
    let (mut sx, mut sy) = (sm[0].clone(), sm[1].clone());
    for i in 0..geom.len() {
        let n = sx[i].hypot(sy[i]);
        if valid[i] && n > 0.0 {
            sx[i] /= n;
            sy[i] /= n;
        } else {
            valid[i] = false;
        }
    }
    let values = (0..geom.len())
        .map(|i| {
            if !valid[i] {
                return f64::NAN;
            }
            let (ix, iy) = geom.coords(i);
            aligned_divergence(&geom, &valid, &sx, &sy, ix, iy, [sx[i], sy[i]])
        })
        .collect();
    ScalarGrid::new(geom, values)
}

/// Pixel window around a region plus the direction selection inside it.
struct RegionEval {
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
    assigned: Vec<Option<[f64; 2]>>,
}

impl RegionEval {
    fn local(&self, geom: &GridGeometry, idx: usize) -> Option<usize> {
        let (ix, iy) = geom.coords(idx);
        if ix < self.x0 || iy < self.y0 || ix >= self.x0 + self.w || iy >= self.y0 + self.h {
            return None;
        }
        Some((iy - self.y0) * self.w + (ix - self.x0))
    }

    fn direction(&self, geom: &GridGeometry, idx: usize) -> Option<[f64; 2]> {
        self.local(geom, idx).and_then(|l| self.assigned[l])
    }
}

/// One step of a quantitative check of the local limit m(A)/|A| → μ(z₀).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LimitPoint {
    pub half_width: f64,
    /// r(A) of the square.
    pub radius: f64,
    pub area: f64,
    pub m_over_area: f64,
    pub mu: f64,
    /// |m(A)/|A| − μ(z₀)|
    pub error: f64,
}

impl FieldModel {
    pub fn new(
        of: &OrientationGrid,
        rf: &ScalarGrid,
        roi: &RegionOfInterest,
        options: FieldOptions,
    ) -> Result<Self, FieldError> {
        options.validate()?;
        let geom = *of.geometry();
        if !geom.same_shape(rf.geometry()) || !geom.same_shape(roi.geometry()) {
            return Err(FieldError::GeometryMismatch);
        }
        let n = geom.len();
        let mask = roi.mask().to_vec();
        let mut valid: Vec<bool> = (0..n)
            .map(|i| mask[i] && of.is_defined(i) && !rf.is_excluded(i))
            .collect();
        let mut odd_spacing = 0usize;
        for i in 0..n {
            if valid[i] {
                let phi = rf.values()[i];
                if phi < 0.0 {
                    return Err(FieldError::NegativeFrequency(phi));
                }
                if phi > 0.0 && !(6.0..=15.0).contains(&(1.0 / phi)) {
                    odd_spacing += 1;
                }
            }
        }
        if odd_spacing > 0 {
            warn!("{odd_spacing} pixels have an inter-ridge distance outside [6, 15] pixels");
        }
        let sigma = options.smoothing_sigma;
        let sm = smooth_channels(&geom, &valid, &[of.cos2(), of.sin2(), rf.values()], sigma);
        let (mut cos2, mut sin2, phi) = (sm[0].clone(), sm[1].clone(), sm[2].clone());
        let mut dir_x = vec![f64::NAN; n];
        let mut dir_y = vec![f64::NAN; n];
        let mut coherence = vec![0.0; n];
        for i in 0..n {
            if !valid[i] {
                continue;
            }
            let mag = cos2[i].hypot(sin2[i]);
            coherence[i] = mag;
            if !(mag > 0.0) {
                valid[i] = false;
                continue;
            }
            cos2[i] /= mag;
            sin2[i] /= mag;
            let theta = 0.5 * sin2[i].atan2(cos2[i]);
            dir_x[i] = theta.cos();
            dir_y[i] = theta.sin();
        }
        let (grad_x, grad_y) = gradient(&geom, &valid, &phi);
        Ok(FieldModel {
            geom,
            valid,
            mask,
            cos2,
            sin2,
            coherence,
            dir_x,
            dir_y,
            phi,
            grad_x,
            grad_y,
            options,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn options(&self) -> &FieldOptions {
        &self.options
    }

    pub fn is_valid(&self, idx: usize) -> bool {
        self.valid[idx]
    }

    pub fn is_in_mask(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// One of the two unit directions of the (smoothed) orientation.
    pub fn direction(&self, idx: usize) -> Option<[f64; 2]> {
        self.valid[idx].then(|| [self.dir_x[idx], self.dir_y[idx]])
    }

    /// Smoothed ridge frequency.
    pub fn frequency(&self, idx: usize) -> Option<f64> {
        self.valid[idx].then(|| self.phi[idx])
    }

    fn divergence_at(&self, idx: usize, d: [f64; 2]) -> f64 {
        let (ix, iy) = self.geom.coords(idx);
        aligned_divergence(&self.geom, &self.valid, &self.dir_x, &self.dir_y, ix, iy, d)
    }

    /// Φ div F + ⟨∇Φ, F⟩ at a pixel for the direction choice `d`.
    fn source_at(&self, idx: usize, d: [f64; 2]) -> f64 {
        self.phi[idx] * self.divergence_at(idx, d) + self.grad_x[idx] * d[0] + self.grad_y[idx] * d[1]
    }

    /// Divergence of the smoothed direction field (selection at each pixel
    /// is arbitrary, so only |div F| is meaningful here).
    pub fn divergence_grid(&self) -> ScalarGrid {
        let values = (0..self.geom.len())
            .map(|i| match self.direction(i) {
                Some(d) => self.divergence_at(i, d),
                None => f64::NAN,
            })
            .collect();
        ScalarGrid::new(self.geom, values).expect("geometry validated on construction")
    }

    /// μ(z) = |Φ div F + ⟨∇Φ, F⟩| per pixel. Pixels outside the mask and all
    /// pixels of tiles flagged as singular are excluded.
    pub fn necessary_intensity(&self) -> ScalarGrid {
        let n = self.geom.len();
        let mut values = vec![f64::NAN; n];
        let mut div_abs = vec![0.0; n];
        for i in 0..n {
            if let Some(d) = self.direction(i) {
                values[i] = self.source_at(i, d).abs();
                div_abs[i] = self.divergence_at(i, d).abs();
            }
        }
        let p = self.options.patch_size;
        let max_div = self.options.max_divergence / self.geom.pixel_size;
        for ty in (0..self.geom.height).step_by(p) {
            for tx in (0..self.geom.width).step_by(p) {
                let ys = ty..(ty + p).min(self.geom.height);
                let xs = tx..(tx + p).min(self.geom.width);
                let (mut sc, mut ss, mut cnt, mut too_div) = (0.0, 0.0, 0usize, false);
                for iy in ys.clone() {
                    for ix in xs.clone() {
                        let i = self.geom.index(ix, iy);
                        if self.valid[i] {
                            sc += self.cos2[i];
                            ss += self.sin2[i];
                            cnt += 1;
                            too_div |= div_abs[i] > max_div
                                || self.coherence[i] < self.options.coherence_threshold;
                        }
                    }
                }
                if cnt == 0 {
                    continue;
                }
                let coherence = sc.hypot(ss) / cnt as f64;
                if coherence < self.options.coherence_threshold || too_div {
                    for iy in ys.clone() {
                        for ix in xs.clone() {
                            values[self.geom.index(ix, iy)] = f64::NAN;
                        }
                    }
                }
            }
        }
        ScalarGrid::new(self.geom, values).expect("geometry validated on construction")
    }

    /// Builds a consistent direction selection over the pixels a region's
    /// quadratures touch, seeded at the region's reference point.
    fn prepare(&self, region: &StarRegion, seed: [f64; 2]) -> Result<RegionEval, FieldError> {
        let g = &self.geom;
        let bnodes = region.boundary_nodes(self.options.boundary_step);
        let anodes = region.area_nodes(self.options.area_step);
        let (lo, hi) = region.bounding_box();
        let (fx0, fy0) = g.continuous_index(lo);
        let (fx1, fy1) = g.continuous_index(hi);
        let clampi = |v: f64, max: usize| v.max(0.0).min(max as f64 - 1.0) as usize;
        if fx1 < -2.0 || fy1 < -2.0 || fx0 > g.width as f64 + 1.0 || fy0 > g.height as f64 + 1.0 {
            return Err(FieldError::OutOfMask);
        }
        let x0 = clampi((fx0 - 2.0).floor(), g.width);
        let y0 = clampi((fy0 - 2.0).floor(), g.height);
        let x1 = clampi((fx1 + 2.0).ceil(), g.width);
        let y1 = clampi((fy1 + 2.0).ceil(), g.height);
        let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
        let mut eval = RegionEval {
            x0,
            y0,
            w,
            h,
            assigned: vec![None; w * h],
        };

        let mut support = vec![false; w * h];
        let mut inside = vec![false; w * h];
        for ly in 0..h {
            for lx in 0..w {
                let c = g.center(x0 + lx, y0 + ly);
                if region.contains(c) {
                    support[ly * w + lx] = true;
                    inside[ly * w + lx] = true;
                }
            }
        }
        let nodes = bnodes.iter().map(|n| n.point).chain(anodes.iter().map(|n| n.point));
        for p in nodes {
            for (idx, _) in g.bilinear_stencil(p) {
                if let Some(l) = eval.local(g, idx) {
                    support[l] = true;
                }
            }
        }
        let global = |l: usize| g.index(x0 + l % w, y0 + l / w);
        let usable: Vec<bool> = (0..w * h).map(|l| support[l] && self.valid[global(l)]).collect();
        if !usable.iter().any(|&u| u) {
            return Err(FieldError::EmptyPatch);
        }

        let start = g
            .pixel_of(region.reference_point())
            .and_then(|(ix, iy)| eval.local(g, g.index(ix, iy)))
            .filter(|&l| usable[l])
            .ok_or(FieldError::OutOfMask)?;

        // Breadth-first propagation of the selection over 8-neighbours.
        let align = |v: [f64; 2], to: [f64; 2]| {
            if v[0] * to[0] + v[1] * to[1] < 0.0 {
                [-v[0], -v[1]]
            } else {
                v
            }
        };
        let mut queue = VecDeque::new();
        let mut roots = std::iter::once(start).chain(0..w * h);
        while let Some(root) = roots.next() {
            if !usable[root] || eval.assigned[root].is_some() {
                continue;
            }
            let gi = global(root);
            eval.assigned[root] = Some(align([self.dir_x[gi], self.dir_y[gi]], seed));
            queue.push_back(root);
            while let Some(l) = queue.pop_front() {
                let from = eval.assigned[l].expect("queued pixels are assigned");
                let (lx, ly) = ((l % w) as isize, (l / w) as isize);
                for dy in -1..=1isize {
                    for dx in -1..=1isize {
                        let (nx, ny) = (lx + dx, ly + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let nl = ny as usize * w + nx as usize;
                        if usable[nl] && eval.assigned[nl].is_none() {
                            let gn = global(nl);
                            eval.assigned[nl] = Some(align([self.dir_x[gn], self.dir_y[gn]], from));
                            queue.push_back(nl);
                        }
                    }
                }
            }
        }

        // A continuous selection cannot flip between 4-neighbours.
        for ly in 0..h {
            for lx in 0..w {
                let Some(a) = eval.assigned[ly * w + lx] else {
                    continue;
                };
                let right = (lx + 1 < w).then(|| eval.assigned[ly * w + lx + 1]).flatten();
                let down = (ly + 1 < h).then(|| eval.assigned[(ly + 1) * w + lx]).flatten();
                for b in [right, down].into_iter().flatten() {
                    if a[0] * b[0] + a[1] * b[1] < 0.0 {
                        return Err(FieldError::SingularityInPatch {
                            coherence: f64::NAN,
                            max_divergence: f64::NAN,
                        });
                    }
                }
            }
        }

        let check: Vec<usize> = if inside.iter().zip(&usable).any(|(&i, &u)| i && u) {
            (0..w * h).filter(|&l| inside[l] && usable[l]).collect()
        } else {
            (0..w * h).filter(|&l| usable[l]).collect()
        };
        let (mut sc, mut ss, mut max_div, mut min_coh) = (0.0, 0.0, 0.0f64, f64::INFINITY);
        for &l in &check {
            let gi = global(l);
            sc += self.cos2[gi];
            ss += self.sin2[gi];
            min_coh = min_coh.min(self.coherence[gi]);
            let d = eval.assigned[l].expect("usable pixels are assigned");
            max_div = max_div.max(self.divergence_at(gi, d).abs());
        }
        let coherence = (sc.hypot(ss) / check.len() as f64).min(min_coh);
        if coherence < self.options.coherence_threshold
            || max_div > self.options.max_divergence / g.pixel_size
        {
            return Err(FieldError::SingularityInPatch {
                coherence,
                max_divergence: max_div,
            });
        }
        Ok(eval)
    }

    fn default_seed(&self, region: &StarRegion) -> [f64; 2] {
        self.geom
            .pixel_of(region.reference_point())
            .and_then(|(ix, iy)| self.direction(self.geom.index(ix, iy)))
            .unwrap_or([1.0, 0.0])
    }

    /// Continuous selection F of directions over a region, agreeing with
    /// `seed` at the reference point. Pixels outside the region's quadrature
    /// support are undefined (NaN).
    pub fn local_direction_field(
        &self,
        seed: [f64; 2],
        region: &StarRegion,
    ) -> Result<DirectionField, FieldError> {
        let eval = self.prepare(region, seed)?;
        let n = self.geom.len();
        let mut fx = vec![f64::NAN; n];
        let mut fy = vec![f64::NAN; n];
        for (l, a) in eval.assigned.iter().enumerate() {
            if let Some(d) = a {
                let gi = self.geom.index(eval.x0 + l % eval.w, eval.y0 + l / eval.w);
                fx[gi] = d[0];
                fy[gi] = d[1];
            }
        }
        DirectionField::new(self.geom, fx, fy)
    }

    /// Signed flux ∮ Φ⟨F, n⟩ ds over ∂A for the selection seeded by `seed`.
    pub fn signed_flux_boundary(&self, region: &StarRegion, seed: [f64; 2]) -> Result<f64, FieldError> {
        let eval = self.prepare(region, seed)?;
        let g = &self.geom;
        let mut total = 0.0;
        for node in region.boundary_nodes(self.options.boundary_step) {
            if !g.pixel_of(node.point).is_some_and(|(ix, iy)| self.mask[g.index(ix, iy)]) {
                return Err(FieldError::OutOfMask);
            }
            let (mut vx, mut vy, mut phi, mut wsum, mut best) = (0.0, 0.0, 0.0, 0.0, (0.0, None));
            for (idx, wt) in g.bilinear_stencil(node.point) {
                if let Some(d) = eval.direction(g, idx) {
                    vx += wt * d[0];
                    vy += wt * d[1];
                    phi += wt * self.phi[idx];
                    wsum += wt;
                    if best.1.is_none() || wt > best.0 {
                        best = (wt, Some(d));
                    }
                }
            }
            if wsum <= 0.0 {
                return Err(FieldError::OutOfMask);
            }
            let norm = vx.hypot(vy);
            if norm == 0.0 {
                return Err(FieldError::SingularityInPatch {
                    coherence: 0.0,
                    max_divergence: f64::NAN,
                });
            }
            let f = [vx / norm, vy / norm];
            total += node.weight * (phi / wsum) * (f[0] * node.normal.x + f[1] * node.normal.y);
        }
        Ok(total)
    }

    /// Signed ∫_A Φ div F + ⟨∇Φ, F⟩ for the selection seeded by `seed`.
    /// With `clip_to_mask`, quadrature nodes outside the mask are dropped
    /// (integral over A ∩ 𝔛); otherwise they are an error.
    pub fn signed_flux_area(
        &self,
        region: &StarRegion,
        seed: [f64; 2],
        clip_to_mask: bool,
    ) -> Result<f64, FieldError> {
        let eval = self.prepare(region, seed)?;
        let g = &self.geom;
        let mut integrand = vec![f64::NAN; eval.w * eval.h];
        for (l, a) in eval.assigned.iter().enumerate() {
            if let Some(d) = a {
                let gi = g.index(eval.x0 + l % eval.w, eval.y0 + l / eval.w);
                integrand[l] = self.source_at(gi, *d);
            }
        }
        let mut total = 0.0;
        for node in region.area_nodes(self.options.area_step) {
            let in_mask = g
                .pixel_of(node.point)
                .is_some_and(|(ix, iy)| self.mask[g.index(ix, iy)]);
            if !in_mask {
                if clip_to_mask {
                    continue;
                }
                return Err(FieldError::OutOfMask);
            }
            let (mut acc, mut wsum) = (0.0, 0.0);
            for (idx, wt) in g.bilinear_stencil(node.point) {
                if let Some(l) = eval.local(g, idx) {
                    let v = integrand[l];
                    if !v.is_nan() && wt > 0.0 {
                        acc += wt * v;
                        wsum += wt;
                    }
                }
            }
            if wsum > 0.0 {
                total += node.weight * acc / wsum;
            } else if !clip_to_mask {
                return Err(FieldError::OutOfMask);
            }
        }
        Ok(total)
    }

    /// m(A) = |∮ Φ⟨F, n⟩ ds|.
    pub fn necessary_minutiae_number_boundary(&self, region: &StarRegion) -> Result<f64, FieldError> {
        Ok(self.signed_flux_boundary(region, self.default_seed(region))?.abs())
    }

    /// m(A) = |∫_A Φ div F + ∫_A ⟨∇Φ, F⟩|.
    pub fn necessary_minutiae_number_area(&self, region: &StarRegion) -> Result<f64, FieldError> {
        Ok(self
            .signed_flux_area(region, self.default_seed(region), false)?
            .abs())
    }

    /// As [`Self::necessary_minutiae_number_area`] over A ∩ 𝔛.
    pub fn necessary_minutiae_number_area_clipped(&self, region: &StarRegion) -> Result<f64, FieldError> {
        Ok(self
            .signed_flux_area(region, self.default_seed(region), true)?
            .abs())
    }

    /// μ at an arbitrary location (bilinear over the stencil's |source| values).
    pub fn intensity_at(&self, z: Point) -> Option<f64> {
        let (mut acc, mut wsum) = (0.0, 0.0);
        for (idx, wt) in self.geom.bilinear_stencil(z) {
            if let Some(d) = self.direction(idx) {
                acc += wt * self.source_at(idx, d).abs();
                wsum += wt;
            }
        }
        (wsum > 0.0).then(|| acc / wsum)
    }

    /// Compares m(A)/|A| with μ(z₀) over squares of decreasing half-width
    /// centred at `z0`.
    pub fn local_limit_check(&self, z0: Point, half_widths: &[f64]) -> Result<Vec<LimitPoint>, FieldError> {
        let mu = self.intensity_at(z0).ok_or(FieldError::OutOfMask)?;
        half_widths
            .iter()
            .map(|&hw| {
                let sq = StarRegion::square(z0, hw)?;
                let m = self.necessary_minutiae_number_area(&sq)?;
                let area = sq.area();
                Ok(LimitPoint {
                    half_width: hw,
                    radius: sq.radius(),
                    area,
                    m_over_area: m / area,
                    mu,
                    error: (m / area - mu).abs(),
                })
            })
            .collect()
    }
}

/// μ map from raw grids with default options and the given smoothing.
pub fn necessary_intensity(
    of: &OrientationGrid,
    rf: &ScalarGrid,
    roi: &RegionOfInterest,
    smoothing_sigma: f64,
) -> Result<ScalarGrid, FieldError> {
    if !(smoothing_sigma > 0.0) {
        return Err(FieldError::InvalidSigma(smoothing_sigma));
    }
    let model = FieldModel::new(of, rf, roi, FieldOptions::default().with_sigma(smoothing_sigma))?;
    Ok(model.necessary_intensity())
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::field::synthetic::*;

    fn centred(n: usize) -> GridGeometry {
        let half = (n as f64 - 1.0) / 2.0;
        GridGeometry::new(n, n).with_origin(Point::new(-half, -half))
    }

    fn model(of: &OrientationGrid, rf: &ScalarGrid, sigma: f64) -> FieldModel {
        let roi = RegionOfInterest::full(*of.geometry()).unwrap();
        FieldModel::new(of, rf, &roi, FieldOptions::default().with_sigma(sigma)).unwrap()
    }

    fn radial(n: usize, d: f64, sigma: f64) -> FieldModel {
        let g = centred(n);
        model(
            &radial_orientation(g, Point::default()).unwrap(),
            &constant_frequency(g, 1.0 / d).unwrap(),
            sigma,
        )
    }

    #[test]
    fn constant_field_selection_follows_seed() {
        let g = GridGeometry::new(40, 40);
        let m = model(
            &constant_orientation(g, 0.0).unwrap(),
            &constant_frequency(g, 0.125).unwrap(),
            8.0,
        );
        let sq = StarRegion::square(Point::new(20.0, 20.0), 6.0).unwrap();
        for sign in [1.0, -1.0] {
            let f = m.local_direction_field([sign, 0.0], &sq).unwrap();
            let defined: Vec<_> = (0..g.len()).filter_map(|i| f.get(i)).collect();
            assert!(!defined.is_empty());
            assert!(defined.iter().all(|v| (v[0] - sign).abs() < 1e-12 && v[1].abs() < 1e-12));
        }
    }

    #[test]
    fn radial_selection_points_outward() {
        let m = radial(121, 8.0, 8.0);
        let sector = StarRegion::annular_sector(Point::default(), 0.4, PI / 6.0, 15.0, 40.0).unwrap();
        let seed = [0.4f64.cos(), 0.4f64.sin()];
        let f = m.local_direction_field(seed, &sector).unwrap();
        let mut worst = 0.0f64;
        for i in 0..m.geometry().len() {
            if let Some(v) = f.get(i) {
                let (ix, iy) = m.geometry().coords(i);
                let z = m.geometry().center(ix, iy);
                let u = z.scale(1.0 / z.norm());
                worst = worst.max((v[0] - u.x).hypot(v[1] - u.y));
            }
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn divergence_of_closed_form_fields() {
        let g = centred(241);
        let constant = DirectionField::from_fn(g, |_| Point::new(1.0, 0.0)).unwrap();
        let d = divergence(&constant, 2.0).unwrap();
        assert!(d.values().iter().all(|v| v.abs() < 1e-12));

        let radial = DirectionField::from_fn(g, |z| z).unwrap();
        let tangential = DirectionField::from_fn(g, |z| Point::new(z.y, -z.x)).unwrap();
        let dr = divergence(&radial, 2.0).unwrap();
        let dt = divergence(&tangential, 2.0).unwrap();
        for i in 0..g.len() {
            let (ix, iy) = g.coords(i);
            let z = g.center(ix, iy);
            let r = z.norm();
            if (50.0..=100.0).contains(&r) {
                let rel = (dr.values()[i] - 1.0 / r).abs() * r;
                assert!(rel < 0.02, "radial at {z}: {rel}");
                assert!(dt.values()[i].abs() < 1e-3, "tangential at {z}");
            }
        }
    }

    #[test]
    fn divergence_rejects_tiny_rasters() {
        let g = GridGeometry::new(2, 5);
        let f = DirectionField::from_fn(g, |_| Point::new(1.0, 0.0)).unwrap();
        assert_eq!(divergence(&f, 1.0).unwrap_err(), FieldError::DegenerateRaster);
    }

    #[test]
    fn intensity_of_closed_form_fields() {
        let g = centred(241);
        let roi = RegionOfInterest::full(g).unwrap();
        let flat = necessary_intensity(
            &constant_orientation(g, 0.3).unwrap(),
            &constant_frequency(g, 0.125).unwrap(),
            &roi,
            8.0,
        )
        .unwrap();
        assert!(flat.values().iter().all(|v| v.is_nan() || v.abs() < 1e-12));

        let m = radial(241, 8.0, 8.0);
        let mu = m.intensity_at(Point::new(100.0, 0.0)).unwrap();
        assert!((mu - 1.25e-3).abs() < 0.02 * 1.25e-3, "{mu}");

        let slope = 1e-4;
        let of = tangential_orientation(g, Point::default()).unwrap();
        let rf = linear_frequency(g, 0.125, Point::new(0.0, slope), Point::default()).unwrap();
        let m = model(&of, &rf, 8.0);
        let mu = m.intensity_at(Point::new(100.0, 0.0)).unwrap();
        assert!((mu - slope).abs() < 0.02 * slope, "{mu}");
    }

    #[test]
    fn intensity_excludes_core_tiles_and_mask() {
        let g = GridGeometry::new(160, 160);
        let of = zero_pole_orientation(g, &[Point::new(80.0, 60.0)], &[Point::new(80.0, 130.0)], 0.0).unwrap();
        let rf = constant_frequency(g, 0.1).unwrap();
        let mask: Vec<bool> = (0..g.len()).map(|i| g.coords(i).0 < 150).collect();
        let roi = RegionOfInterest::new(g, mask).unwrap();
        let m = FieldModel::new(&of, &rf, &roi, FieldOptions::default()).unwrap();
        let mu = m.necessary_intensity();
        assert!(mu.is_excluded(g.index(80, 60)));
        assert!(mu.is_excluded(g.index(155, 10)));
        assert!(!mu.is_excluded(g.index(20, 20)));
        assert!(mu.values().iter().all(|v| v.is_nan() || *v >= 0.0));
        assert!(mu.values().iter().any(|v| !v.is_nan()));
    }

    #[test]
    fn sector_matches_closed_form_in_both_forms() {
        let d = 8.0;
        let m = radial(121, d, 8.0);
        let (alpha, r, big_r) = (PI / 6.0, 10.0, 20.0);
        let sector = StarRegion::annular_sector(Point::default(), 1.0, alpha, r, big_r).unwrap();
        let expect = 2.0 * alpha * (big_r - r) / d;
        let b = m.necessary_minutiae_number_boundary(&sector).unwrap();
        let a = m.necessary_minutiae_number_area(&sector).unwrap();
        assert!((b - expect).abs() < 0.01 * expect, "boundary {b} vs {expect}");
        assert!((a - b).abs() <= (0.02 * b).max(1e-3), "area {a} vs boundary {b}");
    }

    #[test]
    fn tangential_sector_has_no_necessary_minutiae() {
        let g = centred(121);
        let m = model(
            &tangential_orientation(g, Point::default()).unwrap(),
            &constant_frequency(g, 0.125).unwrap(),
            8.0,
        );
        let sector = StarRegion::annular_sector(Point::default(), 2.0, PI / 4.0, 10.0, 30.0).unwrap();
        assert!(m.necessary_minutiae_number_boundary(&sector).unwrap() < 1e-3);
        assert!(m.necessary_minutiae_number_area(&sector).unwrap() < 1e-3);
    }

    #[test]
    fn zero_frequency_gives_zero() {
        let m = radial(81, f64::INFINITY, 4.0);
        let sq = StarRegion::square(Point::new(20.0, 10.0), 5.0).unwrap();
        assert_eq!(m.necessary_minutiae_number_boundary(&sq).unwrap(), 0.0);
        assert_eq!(m.necessary_minutiae_number_area(&sq).unwrap(), 0.0);
    }

    #[test]
    fn negated_seed_negates_signed_flux() {
        let g = centred(121);
        let rf = linear_frequency(g, 0.11, Point::new(2e-4, -1e-4), Point::default()).unwrap();
        let m = model(&radial_orientation(g, Point::default()).unwrap(), &rf, 6.0);
        let regions = [
            StarRegion::square(Point::new(30.0, -20.0), 8.0).unwrap(),
            StarRegion::annular_sector(Point::default(), -2.0, 0.5, 12.0, 35.0).unwrap(),
        ];
        for reg in &regions {
            let seed = [0.6, 0.8];
            let neg = [-0.6, -0.8];
            let b = m.signed_flux_boundary(reg, seed).unwrap();
            assert!((b + m.signed_flux_boundary(reg, neg).unwrap()).abs() < 1e-12);
            let a = m.signed_flux_area(reg, seed, false).unwrap();
            assert!((a + m.signed_flux_area(reg, neg, false).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_flux_is_additive_over_a_split() {
        let g = centred(121);
        let rf = linear_frequency(g, 0.1, Point::new(1e-4, 3e-4), Point::default()).unwrap();
        let m = model(&radial_orientation(g, Point::default()).unwrap(), &rf, 8.0);
        let seed = [1.0, 0.0];
        let whole = StarRegion::rectangle(Point::new(20.0, -10.0), Point::new(40.0, 12.0)).unwrap();
        let left = StarRegion::rectangle(Point::new(20.0, -10.0), Point::new(31.0, 12.0)).unwrap();
        let right = StarRegion::rectangle(Point::new(31.0, -10.0), Point::new(40.0, 12.0)).unwrap();
        let w = m.signed_flux_area(&whole, seed, false).unwrap();
        let l = m.signed_flux_area(&left, seed, false).unwrap();
        let r = m.signed_flux_area(&right, seed, false).unwrap();
        assert!((w - l - r).abs() < 1e-12 * w.abs().max(1.0), "{w} vs {l} + {r}");
    }

    #[test]
    fn scaling_frequency_scales_results() {
        let g = centred(101);
        let of = radial_orientation(g, Point::default()).unwrap();
        let rf = linear_frequency(g, 0.1, Point::new(1e-4, 0.0), Point::default()).unwrap();
        let c = 3.0;
        let m1 = model(&of, &rf, 8.0);
        let m2 = model(&of, &rf.map(|v| c * v), 8.0);
        let sq = StarRegion::square(Point::new(25.0, 20.0), 7.0).unwrap();
        let (a1, a2) = (
            m1.necessary_minutiae_number_area(&sq).unwrap(),
            m2.necessary_minutiae_number_area(&sq).unwrap(),
        );
        assert!((a2 - c * a1).abs() < 1e-12 * a2);
        let (mu1, mu2) = (m1.necessary_intensity(), m2.necessary_intensity());
        for (x, y) in mu1.values().iter().zip(mu2.values()) {
            assert!(x.is_nan() && y.is_nan() || (y - c * x).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn local_limit_on_radial_and_flat_fields() {
        let m = radial(161, 8.0, 8.0);
        let pts = m.local_limit_check(Point::new(40.0, 30.0), &[16.0, 8.0, 4.0, 2.0]).unwrap();
        for w in pts.windows(2) {
            assert!(w[1].error <= w[0].error, "{pts:?}");
        }
        let last = pts.last().unwrap();
        assert!(last.error < 0.05 * last.mu);

        let g = GridGeometry::new(80, 80);
        let flat = model(
            &constant_orientation(g, 1.0).unwrap(),
            &constant_frequency(g, 0.1).unwrap(),
            8.0,
        );
        for p in flat.local_limit_check(Point::new(40.0, 40.0), &[16.0, 8.0, 4.0, 2.0]).unwrap() {
            assert!(p.error < 1e-6);
        }
    }

    #[test]
    fn singular_and_outside_regions_are_rejected() {
        let m = radial(81, 8.0, 4.0);
        let around_core = StarRegion::square(Point::new(0.5, 0.5), 10.0).unwrap();
        assert!(matches!(
            m.necessary_minutiae_number_area(&around_core),
            Err(FieldError::SingularityInPatch { .. })
        ));
        let outside = StarRegion::square(Point::new(200.0, 0.0), 5.0).unwrap();
        assert_eq!(m.necessary_minutiae_number_boundary(&outside).unwrap_err(), FieldError::OutOfMask);
        let straddling = StarRegion::square(Point::new(38.0, 0.0), 6.0).unwrap();
        assert_eq!(m.necessary_minutiae_number_area(&straddling).unwrap_err(), FieldError::OutOfMask);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let of = constant_orientation(GridGeometry::new(10, 10), 0.0).unwrap();
        let rf = constant_frequency(GridGeometry::new(10, 11), 0.1).unwrap();
        let roi = RegionOfInterest::full(GridGeometry::new(10, 10)).unwrap();
        assert_eq!(
            necessary_intensity(&of, &rf, &roi, 8.0).unwrap_err(),
            FieldError::GeometryMismatch
        );
    }
}
