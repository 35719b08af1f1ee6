//! Greedy one-to-one gating of detections to ground truth.

/// A point in range [m], radial velocity [m/s] and angle [rad].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RvaPoint {
    pub range: f64,
    pub velocity: f64,
    pub angle: f64,
}

impl RvaPoint {
    /// Cartesian position with the array broadside along `x`.
    pub fn position(&self) -> (f64, f64) {
        (self.range * self.angle.cos(), self.range * self.angle.sin())
    }

    pub fn position_error2(&self, other: &RvaPoint) -> f64 {
        let (a, b) = (self.position(), other.position());
        (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
    }
}

/// Gate half-widths; angles are compared in sine space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gates {
    pub range: f64,
    pub velocity: f64,
    pub sine: f64,
}

/// Result of matching detections to truth.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// For every truth entry, the index of its matched detection.
    pub matches: Vec<Option<usize>>,
    /// Detections not matched to any truth entry.
    pub false_alarms: usize,
}

impl Association {
    pub fn detected(&self) -> usize {
        self.matches.iter().filter(|m| m.is_some()).count()
    }
}

/// Pairs inside all three gates are taken in order of normalised distance;
/// each detection and each truth entry is used at most once.
pub fn associate(detections: &[RvaPoint], truth: &[RvaPoint], gates: &Gates) -> Association {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (d, det) in detections.iter().enumerate() {
        for (t, tr) in truth.iter().enumerate() {
            let dr = (det.range - tr.range).abs() / gates.range;
            let dv = (det.velocity - tr.velocity).abs() / gates.velocity;
            let ds = (det.angle.sin() - tr.angle.sin()).abs() / gates.sine;
            if dr <= 1.0 && dv <= 1.0 && ds <= 1.0 {
                candidates.push((dr * dr + dv * dv + ds * ds, d, t));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut matches = vec![None; truth.len()];
    let mut used = vec![false; detections.len()];
    for (_, d, t) in candidates {
        if used[d] || matches[t].is_some() {
            continue;
        }
        used[d] = true;
        matches[t] = Some(d);
    }
    Association {
        false_alarms: used.iter().filter(|u| !**u).count(),
        matches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(range: f64, velocity: f64, angle_deg: f64) -> RvaPoint {
        RvaPoint {
            range,
            velocity,
            angle: angle_deg.to_radians(),
        }
    }

    const GATES: Gates = Gates {
        range: 2.0,
        velocity: 5.0,
        sine: 0.02,
    };

    #[test]
    fn one_detection_never_serves_two_targets() {
        let truth = [pt(100.0, 20.0, 10.0), pt(100.5, 20.0, 10.2)];
        let dets = [pt(100.2, 20.0, 10.1)];
        let a = associate(&dets, &truth, &GATES);
        assert_eq!(a.detected(), 1);
        assert_eq!(a.false_alarms, 0);
    }

    #[test]
    fn closest_pair_wins() {
        let truth = [pt(100.0, 20.0, 10.0)];
        let dets = [pt(101.5, 20.0, 10.0), pt(100.1, 20.0, 10.0)];
        let a = associate(&dets, &truth, &GATES);
        assert_eq!(a.matches, vec![Some(1)]);
        assert_eq!(a.false_alarms, 1);
    }

    #[test]
    fn every_gate_applies() {
        let truth = [pt(100.0, 20.0, 10.0)];
        for d in [pt(103.0, 20.0, 10.0), pt(100.0, 26.0, 10.0), pt(100.0, 20.0, 12.0)] {
            let a = associate(&[d], &truth, &GATES);
            assert_eq!(a.detected(), 0);
            assert_eq!(a.false_alarms, 1);
        }
    }

    #[test]
    fn position_error_uses_cartesian_distance() {
        let a = pt(100.0, 0.0, 0.0);
        let b = pt(100.0, 0.0, 90.0);
        assert!((a.position_error2(&b) - 20000.0).abs() < 1e-9);
    }
}
