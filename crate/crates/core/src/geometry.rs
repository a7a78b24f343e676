//! 2D primitives and the intersection predicates the planner is built on.
//!
//! Everything here is a pure function of its inputs in plain `f64`;
//! boundary contact counts as intersection so that safety checks err on
//! the conservative side.

/// A point (or position vector) in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx.hypot(dy)
    }
}

/// A closed line segment. `a == b` is allowed and treated as a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment2 {
    pub a: Point2,
    pub b: Point2,
}

impl Segment2 {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Self { a, b }
    }

    pub fn length(self) -> f64 {
        self.a.distance(self.b)
    }

    /// Closest point on the closed segment to `p`.
    pub fn closest_point(self, p: Point2) -> Point2 {
        let dx = self.b.x - self.a.x;
        let dy = self.b.y - self.a.y;
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.a;
        }
        let t = ((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / len2;
        let t = t.clamp(0.0, 1.0);
        Point2::new(self.a.x + t * dx, self.a.y + t * dy)
    }

    pub fn distance_to_point(self, p: Point2) -> f64 {
        self.closest_point(p).distance(p)
    }
}

/// A closed disc; `radius == 0` degenerates to a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Point2,
    pub radius: f64,
}

impl Disc {
    pub const fn new(center: Point2, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// Euclidean distance between two points.
pub fn distance(p: Point2, q: Point2) -> f64 {
    p.distance(q)
}

/// True iff the closed segment touches the closed disc (tangency counts).
pub fn segment_intersects_disc(s: Segment2, d: Disc) -> bool {
    s.distance_to_point(d.center) <= d.radius
}

/// True iff `p` lies in the closed disc (boundary counts).
pub fn point_in_disc(p: Point2, d: Disc) -> bool {
    p.distance(d.center) <= d.radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn distance_cases() {
        assert_eq!(distance(Point2::new(0.0, 0.0), Point2::new(3.0, 4.0)), 5.0);
        assert_eq!(distance(Point2::new(2.0, 2.0), Point2::new(2.0, 2.0)), 0.0);
        assert_eq!(distance(Point2::new(-1.0, 0.0), Point2::new(1.0, 0.0)), 2.0);
    }

    #[test]
    fn segment_disc_cases() {
        let seg = Segment2::new(Point2::new(0.0, 0.0), Point2::new(4.0, 0.0));
        // tangent at (2, 0)
        assert!(segment_intersects_disc(seg, Disc::new(Point2::new(2.0, 1.0), 1.0)));
        // clearance 1
        assert!(!segment_intersects_disc(seg, Disc::new(Point2::new(2.0, 2.0), 1.0)));
        // degenerate segment inside disc
        let point_seg = Segment2::new(Point2::new(0.0, 0.0), Point2::new(0.0, 0.0));
        assert!(segment_intersects_disc(point_seg, Disc::new(Point2::new(0.5, 0.0), 1.0)));
    }

    #[test]
    fn point_disc_cases() {
        let d = Disc::new(Point2::new(0.0, 0.0), 1.0);
        assert!(point_in_disc(Point2::new(1.0, 0.0), d));
        assert!(!point_in_disc(Point2::new(1.0001, 0.0), d));
        let p = Point2::new(-3.0, 7.0);
        assert!(point_in_disc(p, Disc::new(p, 0.0)));
    }

    /// Independent estimate of the segment-to-center distance: coarse scan of
    /// 10^4 points along the segment, then golden-section refinement around
    /// the best sample. Deliberately avoids the projection formula used by
    /// the implementation.
    fn sampled_min_distance(s: Segment2, center: Point2) -> f64 {
        let at = |t: f64| {
            Point2::new(s.a.x + t * (s.b.x - s.a.x), s.a.y + t * (s.b.y - s.a.y))
        };
        let n = 10_000;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..=n {
            let t = i as f64 / n as f64;
            let d = at(t).distance(center);
            if d < best {
                best = d;
                best_t = t;
            }
        }
        // golden-section search on the bracketing interval
        let mut lo = (best_t - 1.0 / n as f64).max(0.0);
        let mut hi = (best_t + 1.0 / n as f64).min(1.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if at(m1).distance(center) < at(m2).distance(center) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        at(0.5 * (lo + hi)).distance(center).min(best)
    }

    fn finite_coord() -> impl Strategy<Value = f64> {
        -100.0..100.0f64
    }

    proptest! {
        #[test]
        fn segment_disc_matches_sampled_oracle(
            ax in finite_coord(), ay in finite_coord(),
            bx in finite_coord(), by in finite_coord(),
            cx in finite_coord(), cy in finite_coord(),
            r in 0.0..50.0f64,
        ) {
            let s = Segment2::new(Point2::new(ax, ay), Point2::new(bx, by));
            let d = Disc::new(Point2::new(cx, cy), r);
            let oracle_min = sampled_min_distance(s, d.center);
            // Within 1e-9 of the boundary either answer is acceptable.
            if (oracle_min - r).abs() > 1e-9 {
                prop_assert_eq!(segment_intersects_disc(s, d), oracle_min <= r);
            }
        }

        #[test]
        fn triangle_inequality(
            ax in finite_coord(), ay in finite_coord(),
            bx in finite_coord(), by in finite_coord(),
            cx in finite_coord(), cy in finite_coord(),
        ) {
            let a = Point2::new(ax, ay);
            let b = Point2::new(bx, by);
            let c = Point2::new(cx, cy);
            prop_assert!(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
            prop_assert!((distance(a, b) - distance(b, a)).abs() == 0.0);
        }
    }
}
