//! Sector and angle-domain conditions on motions of a real finite set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::MotionGrid;
use crate::error::{Error, Result};
use crate::linalg::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorParams {
    pub theta: f64,
    /// `min(l-, l+)`.
    pub ell: f64,
}

impl SectorParams {
    pub fn new(theta: f64, ell: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < PI) || !(ell >= 1.0) {
            return Err(Error::InvalidArgument(format!("theta = {theta}, ell = {ell}")));
        }
        Ok(SectorParams { theta, ell })
    }

    /// Half-opening of the sector used for single points.
    pub fn sector(&self) -> f64 {
        4.0 * self.theta / self.ell
    }
}

/// The angle at `z` between the segments to 0 and to 1.
pub fn angle_at(z: C64) -> f64 {
    ((-z) / (C64::new(1.0, 0.0) - z)).arg().abs()
}

/// `z` in `D_theta`: `z` not 0 or 1 and the angle at `z` exceeds `pi - theta`.
pub fn in_angle_domain(z: C64, theta: f64) -> bool {
    z.norm() > 0.0 && (z - 1.0).norm() > 0.0 && angle_at(z) > PI - theta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    pub regular: bool,
    /// `min (4 theta / l - |arg(+-h(a))|)`.
    pub a1_margin: f64,
    /// `min (angle at h(b)/h(a) - (pi - theta))`.
    pub a2_margin: f64,
    pub offender: Option<String>,
}

/// Checks the sector condition on every nonzero point and the angle-domain
/// condition on every same-sign pair, at every sample.
pub fn theta_regular_check(motion: &MotionGrid, sector: &SectorParams) -> ThetaReport {
    let pts = &motion.points;
    let mut a1 = f64::INFINITY;
    let mut a2 = f64::INFINITY;
    let mut offender = None;
    let samples = (0..motion.rays).flat_map(|a| (0..motion.radii.len()).map(move |k| (a, k)));
    for (a, k) in samples {
        for (i, &x) in pts.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let h = motion.values[i][a][k] * x.signum();
            let m = sector.sector() - h.arg().abs();
            if m < a1 {
                a1 = m;
                if m <= 0.0 {
                    offender = Some(format!("A1 at {} (ray {a}, radius {k})", motion.labels[i]));
                }
            }
        }
        for (i, &x) in pts.iter().enumerate() {
            for (j, &y) in pts.iter().enumerate() {
                // |x| > |y| > 0, same sign
                if !(x.abs() > y.abs() && y != 0.0 && x * y > 0.0) {
                    continue;
                }
                let z = motion.values[j][a][k] / motion.values[i][a][k];
                let m = if in_angle_domain(z, PI) {
                    angle_at(z) - (PI - sector.theta)
                } else {
                    f64::NEG_INFINITY
                };
                if m < a2 {
                    a2 = m;
                    if m <= 0.0 {
                        offender = Some(format!(
                            "A2 at {}/{} (ray {a}, radius {k})",
                            motion.labels[j], motion.labels[i]
                        ));
                    }
                }
            }
        }
    }
    ThetaReport {
        regular: a1 > 0.0 && a2 > 0.0,
        a1_margin: a1,
        a2_margin: a2,
        offender,
    }
}

#[cfg(test)]
mod tests {
    use super::super::GridSpec;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_motion_margins() {
        let pts = [0.0, -1.7, 0.9, 1.2, -0.3];
        let m = MotionGrid::identity(&pts, &GridSpec::default());
        let s = SectorParams::new(0.05, 60.0).unwrap();
        let r = theta_regular_check(&m, &s);
        assert!(r.regular);
        assert_eq!(r.a1_margin, s.sector());
        assert!((r.a2_margin - 0.05).abs() < 1e-15);
    }

    #[test]
    fn rotated_point_fails() {
        let pts = [0.0, -1.7, 0.9, 1.2];
        let s = SectorParams::new(0.05, 60.0).unwrap();
        let rot = C64::from_polar(1.0, 5.0 * s.theta / s.ell);
        let m = MotionGrid::from_fn(&pts, vec!["0".into(), "a".into(), "b".into(), "c".into()], &GridSpec::default(), |p, _| {
            if p == 2 { rot * pts[p] } else { C64::new(pts[p], 0.0) }
        });
        let r = theta_regular_check(&m, &s);
        assert!(!r.regular);
        assert!(r.a1_margin < 0.0);
        assert!(r.offender.unwrap().contains("A1 at b"));
    }

    #[test]
    fn angle_domain_basics() {
        assert!((angle_at(C64::new(0.5, 0.0)) - PI).abs() < 1e-15);
        assert!(in_angle_domain(C64::new(0.5, 0.01), 0.1));
        assert!(!in_angle_domain(C64::new(0.5, 0.5), 0.1));
        assert!(!in_angle_domain(C64::new(1.0, 0.0), 0.1));
    }

    /// Powers `z^t`, `0 < t < 1`, of points of `D_theta` stay in `D_theta`.
    #[test]
    fn schwarz_sector_stability() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 10_000 {
            let theta = rng.gen_range(1e-3..PI - 1e-3);
            let z = C64::new(rng.gen_range(-0.5..1.5), rng.gen_range(-1.0..1.0));
            if !in_angle_domain(z, theta) || (z.im == 0.0 && z.re < 0.0) {
                continue;
            }
            let t: f64 = rng.gen_range(1e-3..1.0 - 1e-3);
            let zt = z.powf(t);
            assert!(
                angle_at(zt) > PI - theta - 1e-9,
                "z = {z}, t = {t}, theta = {theta}"
            );
            checked += 1;
        }
    }
}
