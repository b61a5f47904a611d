//! Quaternion algebra on unit normals.
//!
//! Two pixel-level operators drive all normal editing:
//!
//! * `ominus(n1, n2)` expresses `n1` in the frame where `n2` is rotated onto
//!   `+z`. Applied to an image and its smoothed copy it yields the detail
//!   layer.
//! * `oplus(n1, n2)` undoes that: the rotation carrying `+z` onto `n2` is
//!   applied to `n1`, re-attaching a detail normal to a base normal.
//!
//! Rotations are unit quaternions applied by conjugating the pure quaternion
//! `[0, n]`; the result is re-normalized.

use std::fmt;

const PARALLEL_EPS: f64 = 1e-8;

/// A unit-length direction vector.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitNormal {
    x: f64,
    y: f64,
    z: f64,
}

impl fmt::Debug for UnitNormal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

impl Default for UnitNormal {
    fn default() -> Self {
        Self::UP
    }
}

impl UnitNormal {
    /// `(0, 0, 1)`, the flat normal.
    pub const UP: UnitNormal = UnitNormal { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalizes `(x, y, z)`. Returns `None` for zero-length or non-finite input.
    pub fn new(x: f64, y: f64, z: f64) -> Option<Self> {
        let len = (x * x + y * y + z * z).sqrt();
        if !len.is_finite() || len < 1e-300 {
            return None;
        }
        Some(Self {
            x: x / len,
            y: y / len,
            z: z / len,
        })
    }

    pub fn from_array(v: [f64; 3]) -> Option<Self> {
        Self::new(v[0], v[1], v[2])
    }

    /// Builds a normal tilted by `angle` radians from `+z` toward the
    /// horizontal direction `azimuth` (radians from `+x`).
    pub fn from_spherical(angle: f64, azimuth: f64) -> Self {
        let s = angle.sin();
        Self::new(s * azimuth.cos(), s * azimuth.sin(), angle.cos()).unwrap_or(Self::UP)
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y
    }

    #[inline]
    pub fn z(&self) -> f64 {
        self.z
    }

    #[inline]
    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(&self, other: &UnitNormal) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Euclidean distance between the two vectors.
    #[inline]
    pub fn distance(&self, other: &UnitNormal) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    /// Angle in radians between this normal and `+z`.
    #[inline]
    pub fn angle_from_up(&self) -> f64 {
        self.x.hypot(self.y).atan2(self.z)
    }

    /// Angle in radians between two normals.
    pub fn angle_to(&self, other: &UnitNormal) -> f64 {
        let c = cross(self.to_array(), other.to_array());
        norm(c).atan2(self.dot(other))
    }
}

/// A unit quaternion `w + xi + yj + zk`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Rotation of `angle` radians about `axis` (normalized internally).
    fn about_axis(axis: [f64; 3], angle: f64) -> Self {
        let len = norm(axis);
        let (s, c) = (0.5 * angle).sin_cos();
        let k = s / len;
        Self {
            w: c,
            x: axis[0] * k,
            y: axis[1] * k,
            z: axis[2] * k,
        }
        .normalized()
    }

    fn normalized(self) -> Self {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Self {
            w: self.w / n,
            x: self.x / n,
            y: self.y / n,
            z: self.z / n,
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn inverse(&self) -> Self {
        Self {
            w: self.w,
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        2.0 * norm([self.x, self.y, self.z]).atan2(self.w.abs())
    }

    /// Rotation axis, or `None` for the identity.
    pub fn axis(&self) -> Option<[f64; 3]> {
        let v = [self.x, self.y, self.z];
        let n = norm(v);
        if n < 1e-300 {
            return None;
        }
        let s = self.w.signum();
        Some([s * v[0] / n, s * v[1] / n, s * v[2] / n])
    }

    fn mul(&self, o: &Rotation) -> Rotation {
        Rotation {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Conjugates the pure quaternion `[0, n]` by this rotation.
    pub fn apply(&self, n: &UnitNormal) -> UnitNormal {
        let pure = Rotation {
            w: 0.0,
            x: n.x,
            y: n.y,
            z: n.z,
        };
        let r = self.mul(&pure).mul(&self.inverse());
        UnitNormal::new(r.x, r.y, r.z).unwrap_or(*n)
    }
}

/// The rotation taking `a` onto `b` about the axis `a × b`.
///
/// Nearly parallel inputs give the identity. Nearly antipodal inputs rotate by
/// π about the projection of `+x` (or `+y`, if `a` is along `x`) onto the
/// plane orthogonal to `a`.
pub fn rotation_between(a: &UnitNormal, b: &UnitNormal) -> Rotation {
    let c = cross(a.to_array(), b.to_array());
    let s = norm(c);
    let d = a.dot(b);
    if s < PARALLEL_EPS {
        if d > 0.0 {
            return Rotation::IDENTITY;
        }
        return Rotation::about_axis(antipodal_axis(a), std::f64::consts::PI);
    }
    Rotation::about_axis(c, s.atan2(d))
}

fn antipodal_axis(a: &UnitNormal) -> [f64; 3] {
    for probe in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]] {
        let along = a.x * probe[0] + a.y * probe[1] + a.z * probe[2];
        let p = [probe[0] - along * a.x, probe[1] - along * a.y, probe[2] - along * a.z];
        if norm(p) > PARALLEL_EPS {
            return p;
        }
    }
    // a is parallel to both probes only if it is degenerate.
    [0.0, 0.0, 1.0]
}

/// `n1 ⊖ n2`: deviation of `n1` from `n2`, expressed relative to `+z`.
pub fn ominus(n1: &UnitNormal, n2: &UnitNormal) -> UnitNormal {
    rotation_between(n2, &UnitNormal::UP).apply(n1)
}

/// `n1 ⊕ n2`: attaches the detail normal `n1` to the base normal `n2`.
pub fn oplus(n1: &UnitNormal, n2: &UnitNormal) -> UnitNormal {
    rotation_between(&UnitNormal::UP, n2).apply(n1)
}

/// Normalized linear interpolation, `t = 0` gives `a`, `t = 1` gives `b`.
pub fn nlerp(a: &UnitNormal, b: &UnitNormal, t: f64) -> UnitNormal {
    if t <= 0.0 {
        return *a;
    }
    if t >= 1.0 {
        return *b;
    }
    let s = 1.0 - t;
    UnitNormal::new(s * a.x + t * b.x, s * a.y + t * b.y, s * a.z + t * b.z).unwrap_or(if t < 0.5 { *a } else { *b })
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    /// Rodrigues rotation matrix for a unit axis.
    fn rodrigues(axis: [f64; 3], angle: f64) -> [[f64; 3]; 3] {
        let [x, y, z] = axis;
        let (s, c) = angle.sin_cos();
        let t = 1.0 - c;
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    }

    fn mat_apply(m: [[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Matrix rotating `from` onto `to`, built from the cross and dot products.
    fn oracle_between(from: [f64; 3], to: [f64; 3]) -> [[f64; 3]; 3] {
        let c = cross(from, to);
        let s = norm(c);
        let d = from[0] * to[0] + from[1] * to[1] + from[2] * to[2];
        rodrigues([c[0] / s, c[1] / s, c[2] / s], s.atan2(d))
    }

    fn n(x: f64, y: f64, z: f64) -> UnitNormal {
        UnitNormal::new(x, y, z).unwrap()
    }

    fn assert_close(a: [f64; 3], b: [f64; 3], tol: f64) {
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn upper_hemisphere(min_z: f64) -> impl Strategy<Value = UnitNormal> {
        (-1.0f64..1.0, -1.0f64..1.0, min_z..1.0)
            .prop_filter_map("degenerate", |(x, y, z)| UnitNormal::new(x, y, z))
            .prop_filter("below min z", move |v| v.z() > min_z)
    }

    fn any_unit() -> impl Strategy<Value = UnitNormal> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0).prop_filter_map("degenerate", |(x, y, z)| UnitNormal::new(x, y, z))
    }

    #[test]
    fn equal_vectors_give_identity() {
        assert_eq!(rotation_between(&UnitNormal::UP, &UnitNormal::UP), Rotation::IDENTITY);
    }

    #[test]
    fn orthogonal_axes_rotate_about_z() {
        let r = rotation_between(&n(1.0, 0.0, 0.0), &n(0.0, 1.0, 0.0));
        assert!((r.angle() - 90.0 * DEG).abs() < 1e-12);
        assert_close(r.axis().unwrap(), [0.0, 0.0, 1.0], 1e-12);
        assert_close(r.apply(&n(1.0, 0.0, 0.0)).to_array(), [0.0, 1.0, 0.0], 1e-12);
    }

    #[test]
    fn antipodal_pair_is_total() {
        let a = n(0.0, 0.0, 1.0);
        let b = n(0.0, 0.0, -1.0);
        let r = rotation_between(&a, &b);
        assert_close(r.apply(&a).to_array(), b.to_array(), 1e-9);
        assert_close(r.axis().unwrap(), [1.0, 0.0, 0.0], 1e-12);

        let a = n(1.0, 0.0, 0.0);
        let r = rotation_between(&a, &n(-1.0, 0.0, 0.0));
        assert_close(r.axis().unwrap(), [0.0, 1.0, 0.0], 1e-12);
        assert_close(r.apply(&a).to_array(), [-1.0, 0.0, 0.0], 1e-9);
    }

    #[test]
    fn ominus_examples() {
        let m = n(0.3, -0.2, 0.9);
        assert_close(ominus(&m, &m).to_array(), [0.0, 0.0, 1.0], 1e-12);
        assert_eq!(ominus(&UnitNormal::UP, &UnitNormal::UP), UnitNormal::UP);

        let n1 = n((10.0 * DEG).sin(), 0.0, (10.0 * DEG).cos());
        let n2 = n((30.0 * DEG).sin(), 0.0, (30.0 * DEG).cos());
        let expected = mat_apply(oracle_between(n2.to_array(), [0.0, 0.0, 1.0]), n1.to_array());
        assert_close(ominus(&n1, &n2).to_array(), expected, 1e-12);
        // Rotating back by 30° leaves n1 tilted by -20° in the xz-plane.
        assert_close(expected, [(-20.0 * DEG).sin(), 0.0, (20.0 * DEG).cos()], 1e-12);
    }

    #[test]
    fn oplus_examples() {
        let b = n(-0.4, 0.1, 0.7);
        assert_close(oplus(&UnitNormal::UP, &b).to_array(), b.to_array(), 1e-12);

        let n1 = n((5.0 * DEG).sin(), 0.0, (5.0 * DEG).cos());
        let n2 = n(0.0, (45.0 * DEG).sin(), (45.0 * DEG).cos());
        let expected = mat_apply(oracle_between([0.0, 0.0, 1.0], n2.to_array()), n1.to_array());
        assert_close(oplus(&n1, &n2).to_array(), expected, 1e-12);
    }

    #[test]
    fn nlerp_endpoints() {
        let a = n(0.2, 0.0, 1.0);
        let b = n(0.0, -0.5, 1.0);
        assert_eq!(nlerp(&a, &b, 0.0), a);
        assert_eq!(nlerp(&a, &b, 1.0), b);
        let mid = nlerp(&a, &b, 0.5);
        assert!((mid.angle_to(&a) - mid.angle_to(&b)).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn rotation_maps_a_onto_b(a in any_unit(), b in any_unit()) {
            let r = rotation_between(&a, &b);
            let [w, x, y, z] = r.components();
            prop_assert!((w * w + x * x + y * y + z * z - 1.0).abs() < 1e-12);
            assert_close(r.apply(&a).to_array(), b.to_array(), 1e-9);
            let c = cross(a.to_array(), b.to_array());
            if norm(c) > 1e-6 {
                let oracle = mat_apply(oracle_between(a.to_array(), b.to_array()), a.to_array());
                assert_close(r.apply(&a).to_array(), oracle, 1e-9);
                let axis = r.axis().unwrap();
                let parallel = cross(axis, c);
                prop_assert!(norm(parallel) < 1e-9 * norm(c).max(1.0));
            }
        }

        #[test]
        fn rotation_preserves_length(a in any_unit(), b in any_unit(), v in any_unit()) {
            let out = rotation_between(&a, &b).apply(&v);
            prop_assert!((norm(out.to_array()) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn inverse_pair(a in any_unit(), b in upper_hemisphere(0.0)) {
            let back = oplus(&ominus(&a, &b), &b);
            assert_close(back.to_array(), a.to_array(), 1e-9);
            let forth = ominus(&oplus(&a, &b), &b);
            assert_close(forth.to_array(), a.to_array(), 1e-9);
        }

        #[test]
        fn ominus_matches_matrix_oracle(a in any_unit(), b in upper_hemisphere(0.01)) {
            prop_assume!(b.angle_from_up() > 1e-6);
            let m = oracle_between(b.to_array(), [0.0, 0.0, 1.0]);
            assert_close(ominus(&a, &b).to_array(), mat_apply(m, a.to_array()), 1e-9);
        }

        #[test]
        fn frame_equivariance_about_z(
            a in any_unit(),
            b in upper_hemisphere(0.01),
            phi in -3.1f64..3.1,
        ) {
            let s = rodrigues([0.0, 0.0, 1.0], phi);
            let sa = UnitNormal::from_array(mat_apply(s, a.to_array())).unwrap();
            let sb = UnitNormal::from_array(mat_apply(s, b.to_array())).unwrap();
            let lhs = ominus(&sa, &sb);
            let rhs = mat_apply(s, ominus(&a, &b).to_array());
            assert_close(lhs.to_array(), rhs, 1e-9);
        }
    }
}
