//! Route geometry: polylines with arc-length parameterization and
//! segment-wise speed plans.
//!
//! A [`Route`] is an ordered polyline of 2D keypoints with cumulative
//! arc-length distances. A [`SpeedPlan`] assigns one target speed to every
//! keypoint by mapping normalized-progress speed segments onto absolute
//! arc-length intervals; unassigned keypoints inherit the most recent
//! assigned speed.

use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RouteError {
    #[error("degenerate route: {0}")]
    DegenerateRoute(String),
    #[error("invalid speed segment: {0}")]
    InvalidSegment(String),
    #[error("overlapping speed segments: [{0:.6}, {1:.6}) intersects [{2:.6}, {3:.6})")]
    OverlappingSegments(f64, f64, f64, f64),
}

/// Polyline route with precomputed cumulative arc-length distances.
#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    keypoints: Vec<Vec2>,
    cum_dist: Vec<f64>,
    total_length: f64,
}

impl Route {
    /// Build a route from ordered keypoints, computing cumulative
    /// arc-length distances. Consecutive keypoints must be distinct.
    pub fn new(keypoints: Vec<Vec2>) -> Result<Route, RouteError> {
        if keypoints.len() < 2 {
            return Err(RouteError::DegenerateRoute(format!(
                "need at least 2 keypoints, got {}",
                keypoints.len()
            )));
        }
        let mut cum_dist = Vec::with_capacity(keypoints.len());
        cum_dist.push(0.0);
        let mut total = 0.0;
        for (i, pair) in keypoints.windows(2).enumerate() {
            let step = pair[0].distance(pair[1]);
            if step <= 0.0 {
                return Err(RouteError::DegenerateRoute(format!(
                    "zero-length segment between keypoints {} and {}",
                    i,
                    i + 1
                )));
            }
            total += step;
            cum_dist.push(total);
        }
        Ok(Route {
            keypoints,
            cum_dist,
            total_length: total,
        })
    }

    pub fn keypoints(&self) -> &[Vec2] {
        &self.keypoints
    }

    pub fn cum_dist(&self) -> &[f64] {
        &self.cum_dist
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arc-length coordinate of the closest point on the polyline to `pos`.
    ///
    /// Each segment is searched with orthogonal projection clamped to its
    /// endpoints; the global minimum wins, ties resolving to the smaller
    /// arc-length.
    pub fn project(&self, pos: Vec2) -> f64 {
        let mut best_d2 = f64::INFINITY;
        let mut best_s = 0.0;
        for i in 0..self.keypoints.len() - 1 {
            let a = self.keypoints[i];
            let b = self.keypoints[i + 1];
            let ab = b - a;
            let len = self.cum_dist[i + 1] - self.cum_dist[i];
            let t = ((pos - a).dot(ab) / (len * len)).clamp(0.0, 1.0);
            let closest = a + ab * t;
            let d2 = (pos - closest).dot(pos - closest);
            if d2 < best_d2 {
                best_d2 = d2;
                best_s = self.cum_dist[i] + t * len;
            }
        }
        best_s
    }

    /// Position on the polyline at arc-length `s` (clamped to [0, L]).
    pub fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.total_length);
        let i = self.segment_index(s);
        let a = self.keypoints[i];
        let b = self.keypoints[i + 1];
        let len = self.cum_dist[i + 1] - self.cum_dist[i];
        let t = (s - self.cum_dist[i]) / len;
        a + (b - a) * t
    }

    /// Unit tangent of the segment containing arc-length `s`.
    pub fn tangent_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.total_length);
        let i = self.segment_index(s);
        (self.keypoints[i + 1] - self.keypoints[i]).normalized()
    }

    /// Index of the segment containing `s`; the final keypoint maps to the
    /// last segment.
    fn segment_index(&self, s: f64) -> usize {
        let idx = self.cum_dist.partition_point(|&d| d <= s);
        idx.clamp(1, self.cum_dist.len() - 1) - 1
    }
}

/// One speed segment over normalized route progress: keypoints whose
/// arc-length falls in `[s_start * L, s_end * L)` get target speed `v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedSegment {
    pub s_start: f64,
    pub s_end: f64,
    pub v: f64,
}

impl SpeedSegment {
    pub fn new(s_start: f64, s_end: f64, v: f64) -> Self {
        SpeedSegment { s_start, s_end, v }
    }

    fn validate(&self) -> Result<(), RouteError> {
        if !(0.0..1.0).contains(&self.s_start)
            || self.s_end <= self.s_start
            || self.s_end > 1.0
            || !self.s_start.is_finite()
            || !self.s_end.is_finite()
        {
            return Err(RouteError::InvalidSegment(format!(
                "bounds [{}, {}) must satisfy 0 <= start < end <= 1",
                self.s_start, self.s_end
            )));
        }
        let speed_ok = self.v.is_finite() && self.v >= 0.0;
        if !speed_ok {
            return Err(RouteError::InvalidSegment(format!(
                "speed {} must be finite and >= 0",
                self.v
            )));
        }
        Ok(())
    }
}

/// Dense per-keypoint speed plan derived from a route and its segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedPlan {
    entries: Vec<(Vec2, f64)>,
    cum_dist: Vec<f64>,
}

impl SpeedPlan {
    /// Assign a speed to every route keypoint.
    ///
    /// Segments are mapped to absolute arc-length intervals
    /// `[s_start * L, s_end * L)`; a segment ending at 1.0 additionally
    /// claims the final keypoint. Keypoints covered by no segment inherit
    /// the most recent assigned speed, with `default_v` before the first
    /// segment.
    pub fn build(
        route: &Route,
        segments: &[SpeedSegment],
        default_v: f64,
    ) -> Result<SpeedPlan, RouteError> {
        for seg in segments {
            seg.validate()?;
        }
        let mut sorted: Vec<SpeedSegment> = segments.to_vec();
        sorted.sort_by(|a, b| a.s_start.total_cmp(&b.s_start));
        for pair in sorted.windows(2) {
            if pair[1].s_start < pair[0].s_end {
                return Err(RouteError::OverlappingSegments(
                    pair[0].s_start,
                    pair[0].s_end,
                    pair[1].s_start,
                    pair[1].s_end,
                ));
            }
        }

        let length = route.total_length();
        let mut current = default_v;
        let mut entries = Vec::with_capacity(route.keypoints().len());
        for (&p, &d) in route.keypoints().iter().zip(route.cum_dist()) {
            for seg in &sorted {
                let lo = seg.s_start * length;
                let hi = seg.s_end * length;
                if (d >= lo && d < hi) || (seg.s_end == 1.0 && d == length) {
                    current = seg.v;
                    break;
                }
            }
            entries.push((p, current));
        }
        Ok(SpeedPlan {
            entries,
            cum_dist: route.cum_dist().to_vec(),
        })
    }

    pub fn entries(&self) -> &[(Vec2, f64)] {
        &self.entries
    }

    /// Runtime target-speed lookup: speed of the keypoint nearest to
    /// `ego_pos` in Euclidean distance, ties broken by smallest index.
    pub fn query(&self, ego_pos: Vec2) -> f64 {
        let mut best_d2 = f64::INFINITY;
        let mut best_v = self.entries[0].1;
        for &(p, v) in &self.entries {
            let d2 = (ego_pos - p).dot(ego_pos - p);
            if d2 < best_d2 {
                best_d2 = d2;
                best_v = v;
            }
        }
        best_v
    }

    /// Target speed at an arc-length coordinate: speed of the keypoint
    /// nearest to `s` along the route, ties broken by smallest index.
    pub fn speed_at_arc(&self, s: f64) -> f64 {
        let mut best_gap = f64::INFINITY;
        let mut best_v = self.entries[0].1;
        for (&d, &(_, v)) in self.cum_dist.iter().zip(&self.entries) {
            let gap = (d - s).abs();
            if gap < best_gap {
                best_gap = gap;
                best_v = v;
            }
        }
        best_v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn route(points: &[(f64, f64)]) -> Route {
        Route::new(points.iter().map(|&p| Vec2::from(p)).collect()).unwrap()
    }

    #[test]
    fn cum_dist_pythagorean() {
        let r = route(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        assert_eq!(r.cum_dist(), &[0.0, 3.0, 7.0]);
        assert_eq!(r.total_length(), 7.0);
    }

    #[test]
    fn cum_dist_unit_segment() {
        let r = route(&[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(r.cum_dist(), &[0.0, 1.0]);
        assert_eq!(r.total_length(), 1.0);
    }

    #[test]
    fn total_length_matches_resummation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let points: Vec<Vec2> = (0..100)
            .map(|_| Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
            .collect();
        let r = Route::new(points.clone()).unwrap();
        // Independent accumulation over pairwise distances.
        let mut oracle = 0.0;
        for i in 1..points.len() {
            let dx = points[i].x - points[i - 1].x;
            let dy = points[i].y - points[i - 1].y;
            oracle += (dx * dx + dy * dy).sqrt();
        }
        assert!((r.total_length() - oracle).abs() < 1e-9);
    }

    #[test]
    fn rejects_degenerate_routes() {
        assert!(matches!(
            Route::new(vec![Vec2::new(0.0, 0.0)]),
            Err(RouteError::DegenerateRoute(_))
        ));
        assert!(matches!(
            Route::new(vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.0)]),
            Err(RouteError::DegenerateRoute(_))
        ));
        assert!(matches!(
            Route::new(vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(2.0, 0.0)
            ]),
            Err(RouteError::DegenerateRoute(_))
        ));
    }

    #[test]
    fn plan_interval_membership() {
        // L = 7; keypoints with d < 3.5 get 8, the rest 4.
        let r = route(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        let plan = SpeedPlan::build(
            &r,
            &[SpeedSegment::new(0.0, 0.5, 8.0), SpeedSegment::new(0.5, 1.0, 4.0)],
            0.0,
        )
        .unwrap();
        let speeds: Vec<f64> = plan.entries().iter().map(|e| e.1).collect();
        assert_eq!(speeds, vec![8.0, 8.0, 4.0]);
    }

    #[test]
    fn plan_inherits_default() {
        let r = route(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        let plan = SpeedPlan::build(&r, &[], 6.0).unwrap();
        assert!(plan.entries().iter().all(|e| e.1 == 6.0));
    }

    #[test]
    fn plan_matches_linear_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(2..40);
            let mut pts = vec![Vec2::new(0.0, 0.0)];
            for _ in 1..n {
                let last = *pts.last().unwrap();
                pts.push(last + Vec2::new(rng.gen_range(0.5..5.0), rng.gen_range(-2.0..2.0)));
            }
            let r = Route::new(pts).unwrap();

            // Random non-overlapping segments over sorted cut points.
            let mut cuts: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
            cuts.sort_by(f64::total_cmp);
            let segs = vec![
                SpeedSegment::new(cuts[0], cuts[1].max(cuts[0] + 1e-6), rng.gen_range(1.0..15.0)),
                SpeedSegment::new(
                    cuts[2].max(cuts[1] + 1e-6),
                    cuts[3].max(cuts[2] + 2e-6),
                    rng.gen_range(1.0..15.0),
                ),
            ];
            let default_v = rng.gen_range(1.0..15.0);
            let plan = SpeedPlan::build(&r, &segs, default_v).unwrap();

            // Oracle: evaluate the interval rule keypoint by keypoint.
            let length = r.total_length();
            let mut expected = default_v;
            for (k, &d) in r.cum_dist().iter().enumerate() {
                let mut assigned = None;
                for seg in &segs {
                    let covered = (d >= seg.s_start * length && d < seg.s_end * length)
                        || (seg.s_end == 1.0 && d == length);
                    if covered {
                        assigned = Some(seg.v);
                    }
                }
                if let Some(v) = assigned {
                    expected = v;
                }
                assert_eq!(plan.entries()[k].1, expected, "keypoint {k}");
            }
        }
    }

    #[test]
    fn plan_rejects_overlap() {
        let r = route(&[(0.0, 0.0), (10.0, 0.0)]);
        let err = SpeedPlan::build(
            &r,
            &[SpeedSegment::new(0.0, 0.6, 8.0), SpeedSegment::new(0.5, 1.0, 4.0)],
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, RouteError::OverlappingSegments(..)));
    }

    #[test]
    fn query_exact_keypoint_and_tie_break() {
        let r = route(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]);
        let plan = SpeedPlan::build(
            &r,
            &[
                SpeedSegment::new(0.0, 0.4, 5.0),
                SpeedSegment::new(0.4, 0.8, 7.0),
                SpeedSegment::new(0.8, 1.0, 9.0),
            ],
            0.0,
        )
        .unwrap();
        // Exactly on keypoint 2 (d = 2.0, covered by [1.2, 2.4) -> 7).
        assert_eq!(plan.query(Vec2::new(2.0, 0.0)), 7.0);
        // Equidistant between keypoints 1 and 2: smallest index wins.
        assert_eq!(plan.query(Vec2::new(1.5, 0.3)), plan.entries()[1].1);
    }

    #[test]
    fn query_matches_exhaustive_scan_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = vec![Vec2::new(0.0, 0.0)];
        for _ in 1..60 {
            let last = *pts.last().unwrap();
            pts.push(last + Vec2::new(rng.gen_range(0.5..4.0), rng.gen_range(-2.0..2.0)));
        }
        let r = Route::new(pts).unwrap();
        let segs = vec![
            SpeedSegment::new(0.0, 0.3, 4.0),
            SpeedSegment::new(0.3, 0.7, 9.0),
            SpeedSegment::new(0.7, 1.0, 6.0),
        ];
        let plan = SpeedPlan::build(&r, &segs, 5.0).unwrap();
        for _ in 0..1000 {
            let q = Vec2::new(rng.gen_range(-10.0..150.0), rng.gen_range(-20.0..20.0));
            let mut best = (f64::INFINITY, 0.0);
            for &(p, v) in plan.entries() {
                let d = q.distance(p);
                if d < best.0 {
                    best = (d, v);
                }
            }
            assert_eq!(plan.query(q), best.1);
        }
    }

    #[test]
    fn project_vertex_identity() {
        let r = route(&[(0.0, 0.0), (3.0, 0.0), (3.0, 4.0)]);
        for (i, &p) in r.keypoints().iter().enumerate() {
            assert!((r.project(p) - r.cum_dist()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn project_orthogonal_drop() {
        let r = route(&[(0.0, 0.0), (10.0, 0.0)]);
        assert!((r.project(Vec2::new(4.0, 3.0)) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn project_matches_dense_sampling_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let r = route(&[
            (0.0, 0.0),
            (8.0, 1.0),
            (14.0, 5.0),
            (20.0, 5.0),
            (26.0, 0.0),
        ]);
        // Oracle: sample the route at 1 mm and pick the nearest sample.
        let step = 1e-3;
        let n = (r.total_length() / step).ceil() as usize;
        let samples: Vec<(f64, Vec2)> = (0..=n)
            .map(|i| {
                let s = (i as f64 * step).min(r.total_length());
                (s, r.point_at(s))
            })
            .collect();
        for _ in 0..100 {
            let q = Vec2::new(rng.gen_range(-5.0..30.0), rng.gen_range(-5.0..10.0));
            let s = r.project(q);
            let oracle_s = samples
                .iter()
                .min_by(|a, b| q.distance(a.1).total_cmp(&q.distance(b.1)))
                .unwrap()
                .0;
            assert!(
                (s - oracle_s).abs() < 2e-3,
                "projection {s} vs oracle {oracle_s} for {q:?}"
            );
        }
    }

    #[test]
    fn projection_monotone_along_route() {
        let r = route(&[(0.0, 0.0), (10.0, 2.0), (18.0, 8.0), (30.0, 8.0)]);
        let mut prev = -1.0;
        let mut s = 0.0;
        while s <= r.total_length() {
            let p = r.point_at(s);
            let proj = r.project(p);
            assert!(proj >= prev - 1e-9, "s={s}: {proj} < {prev}");
            prev = proj;
            s += 0.25;
        }
    }

    #[test]
    fn rigid_transform_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = vec![(0.0, 0.0), (7.0, 2.0), (12.0, 9.0), (25.0, 11.0)];
        let r = route(&pts);
        let plan = SpeedPlan::build(&r, &[SpeedSegment::new(0.0, 1.0, 8.0)], 0.0).unwrap();

        let theta: f64 = 0.83;
        let (sin, cos) = theta.sin_cos();
        let shift = Vec2::new(-40.0, 17.0);
        let xform = |p: Vec2| Vec2::new(cos * p.x - sin * p.y, sin * p.x + cos * p.y) + shift;

        let r2 = Route::new(r.keypoints().iter().map(|&p| xform(p)).collect()).unwrap();
        let plan2 = SpeedPlan::build(&r2, &[SpeedSegment::new(0.0, 1.0, 8.0)], 0.0).unwrap();

        for _ in 0..200 {
            let q = Vec2::new(rng.gen_range(-5.0..30.0), rng.gen_range(-5.0..15.0));
            assert!((r.project(q) - r2.project(xform(q))).abs() < 1e-6);
            assert_eq!(plan.query(q), plan2.query(xform(q)));
        }
    }

    #[test]
    fn plan_total_and_consistent_at_keypoints() {
        let r = route(&[(0.0, 0.0), (5.0, 0.0), (9.0, 3.0), (15.0, 3.0)]);
        let plan = SpeedPlan::build(
            &r,
            &[SpeedSegment::new(0.2, 0.6, 7.0), SpeedSegment::new(0.6, 1.0, 3.0)],
            5.0,
        )
        .unwrap();
        assert_eq!(plan.entries().len(), r.keypoints().len());
        for (k, &(p, v)) in plan.entries().iter().enumerate() {
            assert_eq!(plan.query(p), v, "keypoint {k}");
            assert_eq!(plan.speed_at_arc(r.cum_dist()[k]), v, "arc at keypoint {k}");
        }
    }
}
