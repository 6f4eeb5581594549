use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TargetKind {
    Circle,
    FigureEight,
}

/// Closed reference curve for the tracking task, sampled at the
/// environment step size. The first and last waypoints coincide.
#[derive(Clone, Debug, Serialize)]
pub struct TargetTrajectory {
    pub kind: TargetKind,
    waypoints: Vec<[f64; 3]>,
    pub period: f64,
}

const ALTITUDE: f64 = 1.0;

impl TargetTrajectory {
    /// Circle of radius 1 m at fixed altitude.
    pub fn circle(dt: f64, period: f64) -> Self {
        Self::build(TargetKind::Circle, dt, period, |s| {
            [s.cos(), s.sin(), ALTITUDE]
        })
    }

    /// Lemniscate of Gerono with a 2 m span at fixed altitude.
    pub fn figure_eight(dt: f64, period: f64) -> Self {
        Self::build(TargetKind::FigureEight, dt, period, |s| {
            [s.sin(), s.sin() * s.cos(), ALTITUDE]
        })
    }

    fn build(kind: TargetKind, dt: f64, period: f64, f: impl Fn(f64) -> [f64; 3]) -> Self {
        let n = (period / dt).round() as usize;
        assert!(n >= 2, "period {period} too short for step {dt}");
        let waypoints = (0..n)
            .map(|i| f(2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64))
            .collect();
        TargetTrajectory {
            kind,
            waypoints,
            period,
        }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Number of distinct curve points (the closing duplicate excluded).
    pub fn segment_count(&self) -> usize {
        self.waypoints.len() - 1
    }

    pub fn waypoint(&self, i: usize) -> [f64; 3] {
        self.waypoints[i % self.waypoints.len()]
    }

    /// Waypoint the sweep reaches at absolute step `t`.
    pub fn waypoint_at_step(&self, t: usize) -> [f64; 3] {
        self.waypoints[t % self.segment_count()]
    }

    /// Finite-difference velocity along the curve at waypoint `i`.
    pub fn tangent_velocity(&self, i: usize, dt: f64) -> [f64; 3] {
        let a = self.waypoint(i);
        let b = self.waypoint((i + 1) % self.segment_count());
        [(b[0] - a[0]) / dt, (b[1] - a[1]) / dt, (b[2] - a[2]) / dt]
    }

    pub fn nearest_distance(&self, p: &[f64; 3]) -> f64 {
        self.waypoints
            .iter()
            .map(|w| {
                let dx = w[0] - p[0];
                let dy = w[1] - p[1];
                let dz = w[2] - p[2];
                (dx * dx + dy * dy + dz * dz).sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn waypoint_count_matches_period() {
        let t = TargetTrajectory::circle(0.02, 15.0);
        assert_eq!(t.len(), 750);
    }

    #[test]
    fn curve_is_closed() {
        for t in [
            TargetTrajectory::circle(0.02, 15.0),
            TargetTrajectory::figure_eight(0.02, 15.0),
        ] {
            let first = t.waypoint(0);
            let last = t.waypoint(t.len() - 1);
            let gap = (0..3).map(|i| (first[i] - last[i]).abs()).fold(0.0, f64::max);
            assert!(gap < 1e-9, "closure gap {gap}");
        }
    }

    #[test]
    fn figure_eight_span() {
        let t = TargetTrajectory::figure_eight(0.02, 15.0);
        let max_x = (0..t.len()).map(|i| t.waypoint(i)[0]).fold(f64::MIN, f64::max);
        let min_x = (0..t.len()).map(|i| t.waypoint(i)[0]).fold(f64::MAX, f64::min);
        assert!((max_x - min_x - 2.0).abs() < 1e-3);
    }
}
