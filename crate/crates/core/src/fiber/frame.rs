use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Longest flow time accepted by a single [`flow`] call.
pub const MAX_FLOW_STEP: f64 = 100.0;

const NORMALIZE_LIMIT: f64 = 1e8;

/// An element of PSL(2, R), stored as a unit-determinant matrix `[[a, b], [c, d]]`
/// and identified with its negative.
///
/// Through `g -> (g . i, g_* e)` a frame is a unit tangent vector of the upper half
/// plane: the base point is the Mobius image of `i` and the direction is the image of
/// the upward unit vector at `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Frame {
    m: [f64; 4],
}

impl Frame {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, GeometryError> {
        let det = a * d - b * c;
        if !(det.is_finite() && det > 0.0) {
            return Err(GeometryError::BadDeterminant(det));
        }
        Ok(Self::normalized([a, b, c, d]))
    }

    /// Rescales to unit determinant. For large entries `ad - bc` cancels catastrophically,
    /// so the matrix is left as computed once its norm exceeds `NORMALIZE_LIMIT`.
    #[inline]
    fn normalized(m: [f64; 4]) -> Self {
        let n2 = m[0] * m[0] + m[1] * m[1] + m[2] * m[2] + m[3] * m[3];
        if n2 > NORMALIZE_LIMIT {
            return Self { m };
        }
        let det = m[0] * m[3] - m[1] * m[2];
        let s = 1.0 / det.sqrt();
        Self {
            m: [m[0] * s, m[1] * s, m[2] * s, m[3] * s],
        }
    }

    pub const fn identity() -> Self {
        Self {
            m: [1.0, 0.0, 0.0, 1.0],
        }
    }

    /// `n_x a_y k_theta`: base point `x + i y`, frame angle `theta` in `[0, pi)`.
    pub fn from_iwasawa(x: f64, y: f64, theta: f64) -> Result<Self, GeometryError> {
        if !(y > 0.0 && y.is_finite() && x.is_finite() && theta.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!(
                "iwasawa coordinates ({x}, {y}, {theta})"
            )));
        }
        let sy = y.sqrt();
        let (s, c) = theta.sin_cos();
        // [[sy, x/sy], [0, 1/sy]] * [[c, s], [-s, c]]
        let a = sy * c - x / sy * s;
        let b = sy * s + x / sy * c;
        let cc = -s / sy;
        let d = c / sy;
        Self::new(a, b, cc, d)
    }

    /// Rotation about `i` by `phi` radians (acting on tangent directions).
    pub fn rotation(phi: f64) -> Self {
        let (s, c) = (phi / 2.0).sin_cos();
        Self { m: [c, s, -s, c] }
    }

    /// `diag(e^{t/2}, e^{-t/2})`: hyperbolic translation by `t` along the imaginary axis.
    pub fn diagonal(t: f64) -> Self {
        let e = (t / 2.0).exp();
        Self {
            m: [e, 0.0, 0.0, 1.0 / e],
        }
    }

    #[inline]
    pub fn entries(&self) -> [f64; 4] {
        self.m
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.m[0] * self.m[3] - self.m[1] * self.m[2]
    }

    #[inline]
    pub fn mul(&self, o: &Frame) -> Frame {
        let [a, b, c, d] = self.m;
        let [e, f, g, h] = o.m;
        Self::normalized([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }

    #[inline]
    pub fn inverse(&self) -> Frame {
        let [a, b, c, d] = self.m;
        Self { m: [d, -b, -c, a] }
    }

    /// Squared Frobenius norm; equals `2 cosh d(i, g.i)` for unit determinant.
    #[inline]
    pub fn norm2(&self) -> f64 {
        let [a, b, c, d] = self.m;
        a * a + b * b + c * c + d * d
    }

    /// `cosh` of the hyperbolic distance from `i` to the base point.
    #[inline]
    pub fn cosh_dist_to_center(&self) -> f64 {
        0.5 * self.norm2()
    }

    pub fn dist_to_center(&self) -> f64 {
        self.cosh_dist_to_center().max(1.0).acosh()
    }

    /// Base point `g.i = x + i y` in the upper half plane.
    pub fn base_point(&self) -> (f64, f64) {
        let [a, b, c, d] = self.m;
        let den = c * c + d * d;
        ((a * c + b * d) / den, 1.0 / den)
    }

    /// Frame angle `theta` in `[0, pi)` of the Iwasawa decomposition `n a k_theta`.
    #[inline]
    pub fn frame_angle(&self) -> f64 {
        let [_, _, c, d] = self.m;
        // c i + d = y^{-1/2} e^{-i theta}
        (-(c.atan2(d))).rem_euclid(PI)
    }

    /// Equality in PSL(2, R) up to a relative tolerance.
    pub fn approx_eq(&self, other: &Frame, tol: f64) -> bool {
        let scale = self.norm2().sqrt().max(other.norm2().sqrt()).max(1.0);
        let diff = |sign: f64| {
            self.m
                .iter()
                .zip(other.m.iter())
                .map(|(x, y)| (x - sign * y).abs())
                .fold(0.0, f64::max)
        };
        diff(1.0).min(diff(-1.0)) <= tol * scale
    }

    /// Equality as elements of `PGL(2, R)`: both matrices scaled to unit Frobenius norm,
    /// compared up to sign. Matrices far from the identity lose their determinant to
    /// cancellation, and this comparison is insensitive to that.
    pub fn projectively_eq(&self, other: &Frame, tol: f64) -> bool {
        let (sa, sb) = (self.norm2().sqrt(), other.norm2().sqrt());
        let diff = |sign: f64| {
            self.m
                .iter()
                .zip(other.m.iter())
                .map(|(x, y)| (x / sa - sign * y / sb).abs())
                .fold(0.0, f64::max)
        };
        diff(1.0).min(diff(-1.0)) <= tol
    }

    /// Sign-canonical form (first nonzero entry positive), for hashing and display.
    pub fn canonical(&self) -> [f64; 4] {
        let first = self.m.iter().copied().find(|v| v.abs() > 1e-12).unwrap_or(1.0);
        if first < 0.0 {
            self.m.map(|v| -v)
        } else {
            self.m
        }
    }
}

impl TryFrom<[f64; 4]> for Frame {
    type Error = GeometryError;
    fn try_from(m: [f64; 4]) -> Result<Self, Self::Error> {
        let f = Frame::new(m[0], m[1], m[2], m[3])?;
        if (m[0] * m[3] - m[1] * m[2] - 1.0).abs() > 1e-10 {
            return Err(GeometryError::BadDeterminant(m[0] * m[3] - m[1] * m[2]));
        }
        Ok(f)
    }
}

impl From<Frame> for [f64; 4] {
    fn from(f: Frame) -> Self {
        f.m
    }
}

/// Seconds of geodesic flow.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct FlowTime(pub f64);

impl From<f64> for FlowTime {
    fn from(t: f64) -> Self {
        FlowTime(t)
    }
}

/// Right multiplication by `g_t = diag(e^{t/2}, e^{-t/2})`: unit-speed geodesic flow on
/// the unit tangent bundle. A single call is limited to `|t| <= 100`.
#[inline]
pub fn flow(y: &Frame, t: FlowTime) -> Result<Frame, GeometryError> {
    let t = t.0;
    if !t.is_finite() || t.abs() > MAX_FLOW_STEP {
        return Err(GeometryError::FlowTooLong(t));
    }
    Ok(flow_unchecked(y, t))
}

#[inline]
pub(crate) fn flow_unchecked(y: &Frame, t: f64) -> Frame {
    let e = (0.5 * t).exp();
    let ie = 1.0 / e;
    let [a, b, c, d] = y.m;
    Frame::normalized([a * e, b * ie, c * e, d * ie])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flow_zero_is_identity() {
        let y = Frame::from_iwasawa(0.3, 1.7, 0.4).unwrap();
        assert_eq!(flow(&y, FlowTime(0.0)).unwrap(), y);
    }

    #[test]
    fn flow_inverse() {
        let y = Frame::from_iwasawa(-0.2, 0.6, 2.1).unwrap();
        let back = flow(&flow(&y, FlowTime(1.0)).unwrap(), FlowTime(-1.0)).unwrap();
        assert!(back.approx_eq(&y, 1e-10));
    }

    #[test]
    fn flow_by_twice_log_lambda() {
        let lambda = (3.0 + 5f64.sqrt()) / 2.0;
        let g = flow(&Frame::identity(), FlowTime(2.0 * lambda.ln())).unwrap();
        let [a, b, c, d] = g.entries();
        assert!((a - lambda).abs() < 1e-12 && (d - 1.0 / lambda).abs() < 1e-12);
        assert!((a - 2.618033988749895).abs() < 1e-12 && (d - 0.381966011250105).abs() < 1e-12);
        assert_eq!((b, c), (0.0, 0.0));
    }

    #[test]
    fn flow_rejects_long_times() {
        assert_eq!(
            flow(&Frame::identity(), FlowTime(100.5)),
            Err(GeometryError::FlowTooLong(100.5))
        );
    }

    #[test]
    fn flow_moves_unit_speed() {
        let g = flow(&Frame::identity(), FlowTime(3.0)).unwrap();
        assert!((g.dist_to_center() - 3.0).abs() < 1e-12);
        let (x, y) = g.base_point();
        assert!(x.abs() < 1e-15 && (y - 3f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn iwasawa_round_trip() {
        let g = Frame::from_iwasawa(0.25, 2.5, 1.2).unwrap();
        let (x, y) = g.base_point();
        assert!((x - 0.25).abs() < 1e-14 && (y - 2.5).abs() < 1e-14);
        assert!((g.frame_angle() - 1.2).abs() < 1e-14);
        assert!((g.det() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_negative_determinant() {
        assert!(matches!(Frame::new(1.0, 0.0, 0.0, -1.0), Err(GeometryError::BadDeterminant(_))));
    }

    proptest! {
        #[test]
        fn flow_group_law(x in -2.0f64..2.0, y in 0.2f64..5.0, th in 0.0f64..3.14,
                          s in -50.0f64..50.0, t in -50.0f64..50.0) {
            let g = Frame::from_iwasawa(x, y, th).unwrap();
            let lhs = flow(&flow(&g, FlowTime(s)).unwrap(), FlowTime(t)).unwrap();
            let rhs = flow(&g, FlowTime(s + t)).unwrap();
            prop_assert!(lhs.approx_eq(&rhs, 1e-9));
        }

        #[test]
        fn products_keep_unit_determinant(x in -2.0f64..2.0, y in 0.2f64..5.0, th in 0.0f64..3.14) {
            let g = Frame::from_iwasawa(x, y, th).unwrap();
            let h = g.mul(&Frame::rotation(0.7)).mul(&Frame::diagonal(1.3));
            prop_assert!((h.det() - 1.0).abs() < 1e-10);
        }
    }
}
