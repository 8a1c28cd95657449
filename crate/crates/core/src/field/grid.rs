use std::f64::consts::PI;

use rand::Rng;

use super::FieldError;
use crate::geometry::Point;

/// Raster geometry shared by every grid: `width` columns (x) by `height`
/// rows (y), stored row-major. Pixel `(ix, iy)` is centred at
/// `origin + pixel_size * (ix, iy)` and covers the half-open square of side
/// `pixel_size` around that centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub pixel_size: f64,
    pub origin: Point,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize) -> Self {
        GridGeometry {
            width,
            height,
            pixel_size: 1.0,
            origin: Point::new(0.0, 0.0),
        }
    }

    pub fn with_pixel_size(mut self, pixel_size: f64) -> Self {
        self.pixel_size = pixel_size;
        self
    }

    pub fn with_origin(mut self, origin: Point) -> Self {
        self.origin = origin;
        self
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    #[inline]
    pub fn center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + self.pixel_size * ix as f64,
            self.origin.y + self.pixel_size * iy as f64,
        )
    }

    /// Position in fractional pixel coordinates (pixel centres are integers).
    #[inline]
    pub fn continuous_index(&self, p: Point) -> (f64, f64) {
        (
            (p.x - self.origin.x) / self.pixel_size,
            (p.y - self.origin.y) / self.pixel_size,
        )
    }

    /// The pixel whose square contains `p`.
    #[inline]
    pub fn pixel_of(&self, p: Point) -> Option<(usize, usize)> {
        let (fx, fy) = self.continuous_index(p);
        let ix = (fx + 0.5).floor();
        let iy = (fy + 0.5).floor();
        if ix < 0.0 || iy < 0.0 || ix >= self.width as f64 || iy >= self.height as f64 {
            return None;
        }
        Some((ix as usize, iy as usize))
    }

    pub fn same_shape(&self, other: &GridGeometry) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.pixel_size == other.pixel_size
            && self.origin == other.origin
    }

    /// The four pixels of the bilinear stencil of `p` together with their
    /// weights. Stencil pixels outside the raster are omitted.
    pub fn bilinear_stencil(&self, p: Point) -> impl Iterator<Item = (usize, f64)> {
        let (fx, fy) = self.continuous_index(p);
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (w, h) = (self.width as i64, self.height as i64);
        let width = self.width;
        let corners = [
            (x0 as i64, y0 as i64, (1.0 - tx) * (1.0 - ty)),
            (x0 as i64 + 1, y0 as i64, tx * (1.0 - ty)),
            (x0 as i64, y0 as i64 + 1, (1.0 - tx) * ty),
            (x0 as i64 + 1, y0 as i64 + 1, tx * ty),
        ];
        corners.into_iter().filter_map(move |(ix, iy, wt)| {
            if ix < 0 || iy < 0 || ix >= w || iy >= h {
                None
            } else {
                Some((iy as usize * width + ix as usize, wt))
            }
        })
    }

    fn validate(&self) -> Result<(), FieldError> {
        if self.width == 0 || self.height == 0 {
            return Err(FieldError::EmptyGrid);
        }
        if !(self.pixel_size.is_finite() && self.pixel_size > 0.0) {
            return Err(FieldError::InvalidPixelSize(self.pixel_size));
        }
        Ok(())
    }
}

/// A raster of real values. Excluded pixels (unknown, e.g. near a
/// singularity) are stored as NaN and are never treated as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    geom: GridGeometry,
    values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(geom: GridGeometry, values: Vec<f64>) -> Result<Self, FieldError> {
        geom.validate()?;
        if values.len() != geom.len() {
            return Err(FieldError::LengthMismatch {
                expected: geom.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(ScalarGrid { geom, values })
    }

    pub fn filled(geom: GridGeometry, value: f64) -> Result<Self, FieldError> {
        Self::new(geom, vec![value; geom.len()])
    }

    pub fn from_fn(geom: GridGeometry, f: impl Fn(Point) -> f64) -> Result<Self, FieldError> {
        let values = (0..geom.len())
            .map(|i| {
                let (ix, iy) = geom.coords(i);
                f(geom.center(ix, iy))
            })
            .collect();
        Self::new(geom, values)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn is_excluded(&self, idx: usize) -> bool {
        self.values[idx].is_nan()
    }

    /// Value at a pixel; `None` when excluded.
    #[inline]
    pub fn get(&self, ix: usize, iy: usize) -> Option<f64> {
        let v = self.values[self.geom.index(ix, iy)];
        (!v.is_nan()).then_some(v)
    }

    /// Value of the pixel containing `p`; `None` when outside or excluded.
    #[inline]
    pub fn value_at(&self, p: Point) -> Option<f64> {
        let (ix, iy) = self.geom.pixel_of(p)?;
        self.get(ix, iy)
    }

    /// Bilinear interpolation over the non-excluded stencil pixels
    /// (weights renormalised); `None` if no stencil pixel is usable.
    pub fn bilinear(&self, p: Point) -> Option<f64> {
        let mut acc = 0.0;
        let mut wsum = 0.0;
        for (idx, w) in self.geom.bilinear_stencil(p) {
            let v = self.values[idx];
            if !v.is_nan() && w > 0.0 {
                acc += w * v;
                wsum += w;
            }
        }
        (wsum > 0.0).then(|| acc / wsum)
    }

    pub fn excluded_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// Integral over the non-excluded pixels inside `roi`.
    pub fn integral(&self, roi: &RegionOfInterest) -> f64 {
        let a = self.geom.pixel_size * self.geom.pixel_size;
        self.values
            .iter()
            .zip(roi.mask())
            .filter(|(v, &m)| m && !v.is_nan())
            .map(|(v, _)| v * a)
            .sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarGrid {
        ScalarGrid {
            geom: self.geom,
            values: self
                .values
                .iter()
                .map(|&v| if v.is_nan() { v } else { f(v) })
                .collect(),
        }
    }
}

/// The region of interest as a binary pixel mask.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionOfInterest {
    geom: GridGeometry,
    mask: Vec<bool>,
    count: usize,
    bbox: (Point, Point),
}

impl RegionOfInterest {
    pub fn new(geom: GridGeometry, mask: Vec<bool>) -> Result<Self, FieldError> {
        geom.validate()?;
        if mask.len() != geom.len() {
            return Err(FieldError::LengthMismatch {
                expected: geom.len(),
                found: mask.len(),
            });
        }
        let count = mask.iter().filter(|&&m| m).count();
        if count == 0 {
            return Err(FieldError::EmptyMask);
        }
        let bbox = mask_bounding_box(&geom, &mask);
        Ok(RegionOfInterest {
            geom,
            mask,
            count,
            bbox,
        })
    }

    /// Mask covering the whole raster.
    pub fn full(geom: GridGeometry) -> Result<Self, FieldError> {
        Self::new(geom, vec![true; geom.len()])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn pixel_count(&self) -> usize {
        self.count
    }

    /// |𝔛| = (number of mask pixels) × pixel_size².
    pub fn area(&self) -> f64 {
        self.count as f64 * self.geom.pixel_size * self.geom.pixel_size
    }

    #[inline]
    pub fn contains_pixel(&self, ix: usize, iy: usize) -> bool {
        self.mask[self.geom.index(ix, iy)]
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        match self.geom.pixel_of(p) {
            Some((ix, iy)) => self.contains_pixel(ix, iy),
            None => false,
        }
    }

    /// Bounding box of the mask pixels' squares, `(min, max)`.
    pub fn bounding_box(&self) -> (Point, Point) {
        self.bbox
    }

    /// Uniform location on the mask by rejection over the bounding box.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let (lo, hi) = self.bounding_box();
        loop {
            let p = Point::new(
                rng.random_range(lo.x..hi.x),
                rng.random_range(lo.y..hi.y),
            );
            if self.contains(p) {
                return p;
            }
        }
    }
}

fn mask_bounding_box(geom: &GridGeometry, mask: &[bool]) -> (Point, Point) {
    let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
    for (i, &m) in mask.iter().enumerate() {
        if m {
            let (ix, iy) = geom.coords(i);
            x0 = x0.min(ix);
            y0 = y0.min(iy);
            x1 = x1.max(ix);
            y1 = y1.max(iy);
        }
    }
    let half = 0.5 * geom.pixel_size;
    let lo = geom.center(x0, y0);
    let hi = geom.center(x1, y1);
    (
        Point::new(lo.x - half, lo.y - half),
        Point::new(hi.x + half, hi.y + half),
    )
}

/// Undirected ridge orientation θ ∈ [0, π) per pixel, stored alongside its
/// doubled-angle representation (cos 2θ, sin 2θ). NaN marks pixels without
/// an orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationGrid {
    geom: GridGeometry,
    theta: Vec<f64>,
    cos2: Vec<f64>,
    sin2: Vec<f64>,
}

/// Reduces an angle to [0, π).
pub fn wrap_orientation(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

impl OrientationGrid {
    pub fn from_angles(geom: GridGeometry, theta: Vec<f64>) -> Result<Self, FieldError> {
        geom.validate()?;
        if theta.len() != geom.len() {
            return Err(FieldError::LengthMismatch {
                expected: geom.len(),
                found: theta.len(),
            });
        }
        let theta: Vec<f64> = theta
            .into_iter()
            .map(|t| if t.is_finite() { wrap_orientation(t) } else { f64::NAN })
            .collect();
        let cos2 = theta.iter().map(|t| (2.0 * t).cos()).collect();
        let sin2 = theta.iter().map(|t| (2.0 * t).sin()).collect();
        Ok(OrientationGrid {
            geom,
            theta,
            cos2,
            sin2,
        })
    }

    /// Builds the grid from (not necessarily unit) doubled-angle vectors;
    /// zero or non-finite vectors become undefined pixels.
    pub fn from_doubled(geom: GridGeometry, c: &[f64], s: &[f64]) -> Result<Self, FieldError> {
        if c.len() != geom.len() || s.len() != geom.len() {
            return Err(FieldError::LengthMismatch {
                expected: geom.len(),
                found: c.len().min(s.len()),
            });
        }
        let theta = c
            .iter()
            .zip(s)
            .map(|(&c, &s)| {
                if c.is_finite() && s.is_finite() && (c != 0.0 || s != 0.0) {
                    0.5 * s.atan2(c)
                } else {
                    f64::NAN
                }
            })
            .collect();
        Self::from_angles(geom, theta)
    }

    pub fn from_fn(geom: GridGeometry, f: impl Fn(Point) -> f64) -> Result<Self, FieldError> {
        let theta = (0..geom.len())
            .map(|i| {
                let (ix, iy) = geom.coords(i);
                f(geom.center(ix, iy))
            })
            .collect();
        Self::from_angles(geom, theta)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    pub fn angles(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos2(&self) -> &[f64] {
        &self.cos2
    }

    pub fn sin2(&self) -> &[f64] {
        &self.sin2
    }

    #[inline]
    pub fn is_defined(&self, idx: usize) -> bool {
        !self.theta[idx].is_nan()
    }
}

/// A raster of unit direction vectors; NaN components mark pixels outside
/// the field's support.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionField {
    geom: GridGeometry,
    fx: Vec<f64>,
    fy: Vec<f64>,
}

impl DirectionField {
    pub fn new(geom: GridGeometry, fx: Vec<f64>, fy: Vec<f64>) -> Result<Self, FieldError> {
        geom.validate()?;
        if fx.len() != geom.len() || fy.len() != geom.len() {
            return Err(FieldError::LengthMismatch {
                expected: geom.len(),
                found: fx.len().min(fy.len()),
            });
        }
        Ok(DirectionField { geom, fx, fy })
    }

    /// Samples a vector field at pixel centres and normalises it; zero
    /// vectors become undefined.
    pub fn from_fn(geom: GridGeometry, f: impl Fn(Point) -> Point) -> Result<Self, FieldError> {
        let mut fx = Vec::with_capacity(geom.len());
        let mut fy = Vec::with_capacity(geom.len());
        for i in 0..geom.len() {
            let (ix, iy) = geom.coords(i);
            let v = f(geom.center(ix, iy));
            let n = v.norm();
            if n > 0.0 && n.is_finite() {
                fx.push(v.x / n);
                fy.push(v.y / n);
            } else {
                fx.push(f64::NAN);
                fy.push(f64::NAN);
            }
        }
        Self::new(geom, fx, fy)
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geom
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Option<[f64; 2]> {
        let (x, y) = (self.fx[idx], self.fy[idx]);
        (!x.is_nan() && !y.is_nan()).then_some([x, y])
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.fx, &self.fy)
    }
}
