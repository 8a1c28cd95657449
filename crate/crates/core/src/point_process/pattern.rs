use super::PointProcessError;
use crate::field::RegionOfInterest;
use crate::geometry::Point;

/// A finite set of points in a window of known area.
#[derive(Clone, Debug, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    area: f64,
}

impl PointPattern {
    /// Checks that every point lies in the mask and that no two coincide.
    pub fn new(points: Vec<Point>, roi: &RegionOfInterest) -> Result<Self, PointProcessError> {
        if let Some(index) = points.iter().position(|p| !roi.contains(*p)) {
            return Err(PointProcessError::OutsideMask { index });
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .x
                .total_cmp(&points[b].x)
                .then(points[a].y.total_cmp(&points[b].y))
        });
        for w in order.windows(2) {
            if points[w[0]] == points[w[1]] {
                return Err(PointProcessError::DuplicatePoint {
                    first: w[0].min(w[1]),
                    second: w[0].max(w[1]),
                });
            }
        }
        Ok(PointPattern {
            points,
            area: roi.area(),
        })
    }

    /// Pattern in an abstract window of the given area; no mask checks.
    pub fn with_area(points: Vec<Point>, area: f64) -> Self {
        PointPattern { points, area }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Smallest distance between two distinct points; ∞ for fewer than two.
pub fn min_pair_distance(points: &[Point]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            best = best.min(p.dist2(q));
        }
    }
    best.sqrt()
}

/// s_R: unordered pairs at distance ≤ `r`.
pub fn close_pair_count(points: &[Point], r: f64) -> usize {
    let r2 = r * r;
    let mut count = 0;
    for (i, p) in points.iter().enumerate() {
        count += points[i + 1..].iter().filter(|q| p.dist2(q) <= r2).count();
    }
    count
}

/// t_R: points of `points` other than `z` itself within distance `r` of `z`.
pub fn neighbour_count(z: Point, points: &[Point], r: f64) -> usize {
    let r2 = r * r;
    points.iter().filter(|w| **w != z && z.dist2(w) <= r2).count()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::field::GridGeometry;

    #[test]
    fn min_distance_cases() {
        assert_eq!(min_pair_distance(&[]), f64::INFINITY);
        assert_eq!(min_pair_distance(&[Point::new(1.0, 1.0)]), f64::INFINITY);
        assert_eq!(min_pair_distance(&[Point::new(0.0, 0.0), Point::new(3.0, 4.0)]), 5.0);
    }

    #[test]
    fn close_pairs_count_boundary_ties() {
        let line = [Point::new(0.0, 0.0), Point::new(10.0, 0.0), Point::new(20.0, 0.0)];
        assert_eq!(close_pair_count(&line, 10.0), 2);
        assert_eq!(close_pair_count(&line[..1], 10.0), 0);
        assert_eq!(close_pair_count(&[], 10.0), 0);
        // side 2 exactly representable in every coordinate difference used
        let tri = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(0.0, 2.0)];
        assert_eq!(close_pair_count(&tri, 2.0), 2);
        let s = 3f64.sqrt();
        let eq = [Point::new(0.0, 0.0), Point::new(2.0, 0.0), Point::new(1.0, s)];
        let side = eq[1].dist(&eq[2]).max(eq[0].dist(&eq[2])).max(2.0);
        assert_eq!(close_pair_count(&eq, side), 3);
    }

    #[test]
    fn neighbour_at_triangle_centre() {
        let tri = [Point::new(0.0, 0.0), Point::new(6.0, 0.0), Point::new(3.0, 5.0)];
        let c = Point::new(3.0, 5.0 / 3.0);
        assert_eq!(neighbour_count(c, &tri, 4.0), 3);
        assert_eq!(neighbour_count(c, &[], 4.0), 0);
    }

    #[test]
    fn pattern_rejects_duplicates_and_outside_points() {
        let roi = RegionOfInterest::full(GridGeometry::new(10, 10)).unwrap();
        let dup = vec![Point::new(1.0, 1.0), Point::new(2.0, 2.0), Point::new(1.0, 1.0)];
        assert_eq!(
            PointPattern::new(dup, &roi).unwrap_err(),
            PointProcessError::DuplicatePoint { first: 0, second: 2 }
        );
        let out = vec![Point::new(1.0, 1.0), Point::new(20.0, 2.0)];
        assert_eq!(
            PointPattern::new(out, &roi).unwrap_err(),
            PointProcessError::OutsideMask { index: 1 }
        );
        let ok = PointPattern::new(vec![Point::new(0.0, 0.0)], &roi).unwrap();
        assert_eq!(ok.area(), 100.0);
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec((0.0..100.0f64, 0.0..100.0f64), 0..max)
            .prop_map(|v| v.into_iter().map(Point::from).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn adding_a_point_adds_its_neighbours(pts in arb_points(30), z in (0.0..100.0f64, 0.0..100.0f64), r in 1.0..40.0f64) {
            let z = Point::from(z);
            prop_assume!(!pts.contains(&z));
            let mut with = pts.clone();
            with.push(z);
            prop_assert_eq!(close_pair_count(&with, r) - close_pair_count(&pts, r), neighbour_count(z, &pts, r));
        }

        #[test]
        fn min_distance_matches_sorted_pairs(pts in arb_points(40)) {
            let mut d = Vec::new();
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j {
                        d.push(pts[i].dist(&pts[j]));
                    }
                }
            }
            let brute = d.into_iter().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(min_pair_distance(&pts), brute);
        }
    }
}
