//! Star-shaped integration regions and their quadrature rules.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use super::FieldError;
use crate::geometry::Point;

/// A compact region that is star-shaped with respect to its reference point.
#[derive(Clone, Debug, PartialEq)]
pub enum StarRegion {
    /// Axis-aligned rectangle `[min.x, max.x] × [min.y, max.y]`, referenced
    /// at its centre.
    Rectangle { min: Point, max: Point },
    /// `{ z : |∠(z − center, axis)| ≤ half_angle, inner ≤ ‖z − center‖ ≤ outer }`
    /// where `axis` is the unit vector at angle `direction`. Referenced at
    /// the point on the axis halfway between the arcs.
    AnnularSector {
        center: Point,
        direction: f64,
        half_angle: f64,
        inner: f64,
        outer: f64,
    },
    /// Simple polygon, star-shaped with respect to `reference`.
    Polygon {
        vertices: Vec<Point>,
        reference: Point,
    },
}

/// One node of a boundary quadrature: location, outward unit normal and
/// arc-length weight.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryNode {
    pub point: Point,
    pub normal: Point,
    pub weight: f64,
}

/// One node of an area quadrature.
#[derive(Clone, Copy, Debug)]
pub struct AreaNode {
    pub point: Point,
    pub weight: f64,
}

fn unit(angle: f64) -> Point {
    Point::new(angle.cos(), angle.sin())
}

fn segment_nodes(a: Point, b: Point, step: f64, out: &mut Vec<BoundaryNode>) {
    let d = b.sub(&a);
    let len = d.norm();
    if len == 0.0 {
        return;
    }
    let n = (len / step).ceil().max(1.0) as usize;
    // Counter-clockwise traversal: outward normal is the edge rotated by -90°.
    let normal = Point::new(d.y / len, -d.x / len);
    let w = len / n as f64;
    for k in 0..n {
        let t = (k as f64 + 0.5) / n as f64;
        out.push(BoundaryNode {
            point: a.add(&d.scale(t)),
            normal,
            weight: w,
        });
    }
}

impl StarRegion {
    pub fn rectangle(min: Point, max: Point) -> Result<Self, FieldError> {
        let r = StarRegion::Rectangle { min, max };
        r.validate()?;
        Ok(r)
    }

    /// Square of half-width `half_width` centred at `center`.
    pub fn square(center: Point, half_width: f64) -> Result<Self, FieldError> {
        Self::rectangle(
            Point::new(center.x - half_width, center.y - half_width),
            Point::new(center.x + half_width, center.y + half_width),
        )
    }

    pub fn annular_sector(
        center: Point,
        direction: f64,
        half_angle: f64,
        inner: f64,
        outer: f64,
    ) -> Result<Self, FieldError> {
        let r = StarRegion::AnnularSector {
            center,
            direction,
            half_angle,
            inner,
            outer,
        };
        r.validate()?;
        Ok(r)
    }

    /// Polygon from vertices in either orientation; stored counter-clockwise.
    pub fn polygon(mut vertices: Vec<Point>, reference: Point) -> Result<Self, FieldError> {
        if vertices.len() >= 3 {
            let signed: f64 = (0..vertices.len())
                .map(|i| {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % vertices.len()];
                    a.cross(&b)
                })
                .sum();
            if signed < 0.0 {
                vertices.reverse();
            }
        }
        let r = StarRegion::Polygon {
            vertices,
            reference,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let bad = |msg: &str| Err(FieldError::InvalidRegion(msg.to_string()));
        match self {
            StarRegion::Rectangle { min, max } => {
                if !(min.x.is_finite() && min.y.is_finite() && max.x.is_finite() && max.y.is_finite())
                {
                    return bad("non-finite rectangle corner");
                }
                if !(max.x > min.x && max.y > min.y) {
                    return bad("rectangle must have positive width and height");
                }
            }
            StarRegion::AnnularSector {
                half_angle,
                inner,
                outer,
                ..
            } => {
                if !(0.0..=FRAC_PI_2).contains(half_angle) {
                    return bad("annular sector needs 0 <= alpha <= pi/2");
                }
                if !(*inner > 0.0 && inner < outer) {
                    return bad("annular sector needs 0 < r < R");
                }
            }
            StarRegion::Polygon {
                vertices,
                reference,
            } => {
                if vertices.len() < 3 {
                    return bad("polygon needs at least three vertices");
                }
                let n = vertices.len();
                let mut total = 0.0;
                for i in 0..n {
                    let a = vertices[i].sub(reference);
                    let b = vertices[(i + 1) % n].sub(reference);
                    let c = a.cross(&b);
                    if c <= 0.0 {
                        return bad("polygon is not star-shaped w.r.t. its reference point");
                    }
                    total += c.atan2(a.dot(&b));
                }
                if (total - TAU).abs() > 1e-9 {
                    return bad("polygon does not wind once around its reference point");
                }
            }
        }
        Ok(())
    }

    pub fn reference_point(&self) -> Point {
        match self {
            StarRegion::Rectangle { min, max } => {
                Point::new(0.5 * (min.x + max.x), 0.5 * (min.y + max.y))
            }
            StarRegion::AnnularSector {
                center,
                direction,
                inner,
                outer,
                ..
            } => center.add(&unit(*direction).scale(0.5 * (inner + outer))),
            StarRegion::Polygon { reference, .. } => *reference,
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            StarRegion::Rectangle { min, max } => (max.x - min.x) * (max.y - min.y),
            StarRegion::AnnularSector {
                half_angle,
                inner,
                outer,
                ..
            } => half_angle * (outer * outer - inner * inner),
            StarRegion::Polygon { vertices, .. } => {
                let n = vertices.len();
                0.5 * (0..n)
                    .map(|i| vertices[i].cross(&vertices[(i + 1) % n]))
                    .sum::<f64>()
            }
        }
    }

    /// r(A): largest distance from the reference point to the region.
    pub fn radius(&self) -> f64 {
        let z0 = self.reference_point();
        match self {
            StarRegion::Rectangle { min, max } => [
                Point::new(min.x, min.y),
                Point::new(max.x, min.y),
                Point::new(min.x, max.y),
                Point::new(max.x, max.y),
            ]
            .iter()
            .map(|c| c.dist(&z0))
            .fold(0.0, f64::max),
            StarRegion::Polygon { vertices, .. } => {
                vertices.iter().map(|v| v.dist(&z0)).fold(0.0, f64::max)
            }
            // Distance from z0 is convex along the radial edges and monotone in
            // |angle| along the arcs, so the maximum sits at a corner.
            StarRegion::AnnularSector {
                center,
                direction,
                half_angle,
                inner,
                outer,
            } => [
                (direction - half_angle, inner),
                (direction + half_angle, inner),
                (direction - half_angle, outer),
                (direction + half_angle, outer),
            ]
            .iter()
            .map(|(a, r)| center.add(&unit(*a).scale(**r)).dist(&z0))
            .fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            StarRegion::Rectangle { min, max } => {
                p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y
            }
            StarRegion::AnnularSector {
                center,
                direction,
                half_angle,
                inner,
                outer,
            } => {
                let d = p.sub(center);
                let rho = d.norm();
                if rho < *inner || rho > *outer {
                    return false;
                }
                let axis = unit(*direction);
                let ang = axis.cross(&d).atan2(axis.dot(&d));
                ang.abs() <= *half_angle
            }
            StarRegion::Polygon { vertices, .. } => {
                let n = vertices.len();
                let mut inside = false;
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    if (a.y > p.y) != (b.y > p.y) {
                        let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                        if p.x < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            StarRegion::Rectangle { min, max } => (*min, *max),
            StarRegion::Polygon { vertices, .. } => bbox(vertices.iter().copied()),
            StarRegion::AnnularSector { .. } => {
                bbox(self.boundary_nodes(0.05).iter().map(|n| n.point))
            }
        }
    }

    /// Composite midpoint rule on the counter-clockwise boundary with node
    /// spacing at most `step`.
    pub fn boundary_nodes(&self, step: f64) -> Vec<BoundaryNode> {
        let mut out = Vec::new();
        match self {
            StarRegion::Rectangle { min, max } => {
                let c = [
                    Point::new(min.x, min.y),
                    Point::new(max.x, min.y),
                    Point::new(max.x, max.y),
                    Point::new(min.x, max.y),
                ];
                for i in 0..4 {
                    segment_nodes(c[i], c[(i + 1) % 4], step, &mut out);
                }
            }
            StarRegion::Polygon { vertices, .. } => {
                let n = vertices.len();
                for i in 0..n {
                    segment_nodes(vertices[i], vertices[(i + 1) % n], step, &mut out);
                }
            }
            StarRegion::AnnularSector {
                center,
                direction,
                half_angle,
                inner,
                outer,
            } => {
                let a = *half_angle;
                let lo = direction - a;
                let hi = direction + a;
                // Outer arc, counter-clockwise, normal pointing away from the centre.
                arc_nodes(*center, *outer, lo, hi, 1.0, step, &mut out);
                // Radial edge at +α, from outer to inner.
                segment_nodes(
                    center.add(&unit(hi).scale(*outer)),
                    center.add(&unit(hi).scale(*inner)),
                    step,
                    &mut out,
                );
                // Inner arc, clockwise, normal pointing towards the centre.
                arc_nodes(*center, *inner, lo, hi, -1.0, step, &mut out);
                // Radial edge at -α, from inner to outer.
                segment_nodes(
                    center.add(&unit(lo).scale(*inner)),
                    center.add(&unit(lo).scale(*outer)),
                    step,
                    &mut out,
                );
            }
        }
        out
    }

    /// Tensor midpoint rule in coordinates adapted to the region (Cartesian
    /// for rectangles, polar for sectors, fan triangles for polygons), node
    /// spacing at most `step`. Weights sum to the exact area.
    pub fn area_nodes(&self, step: f64) -> Vec<AreaNode> {
        let mut out = Vec::new();
        match self {
            StarRegion::Rectangle { min, max } => {
                let (w, h) = (max.x - min.x, max.y - min.y);
                let nx = (w / step).ceil().max(1.0) as usize;
                let ny = (h / step).ceil().max(1.0) as usize;
                let weight = w * h / (nx * ny) as f64;
                for j in 0..ny {
                    let y = min.y + h * (j as f64 + 0.5) / ny as f64;
                    for i in 0..nx {
                        let x = min.x + w * (i as f64 + 0.5) / nx as f64;
                        out.push(AreaNode {
                            point: Point::new(x, y),
                            weight,
                        });
                    }
                }
            }
            StarRegion::AnnularSector {
                center,
                direction,
                half_angle,
                inner,
                outer,
            } => {
                let span = 2.0 * half_angle;
                let nr = ((outer - inner) / step).ceil().max(1.0) as usize;
                let nphi = (span * outer / step).ceil().max(1.0) as usize;
                let dr = (outer - inner) / nr as f64;
                let dphi = span / nphi as f64;
                for i in 0..nr {
                    let rho = inner + dr * (i as f64 + 0.5);
                    for j in 0..nphi {
                        let phi = direction - half_angle + dphi * (j as f64 + 0.5);
                        out.push(AreaNode {
                            point: center.add(&unit(phi).scale(rho)),
                            weight: rho * dr * dphi,
                        });
                    }
                }
            }
            StarRegion::Polygon {
                vertices,
                reference,
            } => {
                let n = vertices.len();
                for k in 0..n {
                    let a = vertices[k].sub(reference);
                    let b = vertices[(k + 1) % n].sub(reference);
                    let edge = b.sub(&a);
                    let jac = a.cross(&edge).abs();
                    let ns = (a.norm().max(b.norm()) / step).ceil().max(1.0) as usize;
                    let nt = (edge.norm() / step).ceil().max(1.0) as usize;
                    for i in 0..ns {
                        let s = (i as f64 + 0.5) / ns as f64;
                        for j in 0..nt {
                            let t = (j as f64 + 0.5) / nt as f64;
                            let p = a.add(&edge.scale(t)).scale(s);
                            out.push(AreaNode {
                                point: reference.add(&p),
                                weight: s * jac / (ns * nt) as f64,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

fn arc_nodes(
    center: Point,
    radius: f64,
    lo: f64,
    hi: f64,
    orientation: f64,
    step: f64,
    out: &mut Vec<BoundaryNode>,
) {
    let span = hi - lo;
    if span <= 0.0 {
        return;
    }
    let n = (span * radius / step).ceil().max(1.0) as usize;
    let w = span * radius / n as f64;
    for k in 0..n {
        let phi = lo + span * (k as f64 + 0.5) / n as f64;
        let u = unit(phi);
        out.push(BoundaryNode {
            point: center.add(&u.scale(radius)),
            normal: u.scale(orientation),
            weight: w,
        });
    }
}

fn bbox(points: impl Iterator<Item = Point>) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Regular polygon with `n` vertices on a circle, useful as a generic
/// star-shaped test region.
pub fn regular_polygon(center: Point, radius: f64, n: usize, phase: f64) -> Vec<Point> {
    (0..n)
        .map(|k| center.add(&unit(phase + TAU * k as f64 / n as f64).scale(radius)))
        .collect()
}

/// Angle of `p` around the origin in (−π, π].
pub fn polar_angle(p: Point) -> f64 {
    let a = p.y.atan2(p.x);
    if a <= -PI {
        a + TAU
    } else {
        a
    }
}
