//! Spherical geometry primitives on the unit sphere.
//!
//! Everything downstream (grids, quadrature, the finite volume operator) speaks
//! in terms of [`UnitVector`]. All functions here are pure.

use std::fmt;

use nalgebra::Vector3;

use crate::error::GeometryError;

/// Tolerance on `‖x‖ - 1` accepted by [`UnitVector::new`].
pub const UNIT_NORM_TOL: f64 = 1e-14;

/// A point on the unit sphere.
#[derive(Clone, Copy, PartialEq)]
pub struct UnitVector(Vector3<f64>);

impl UnitVector {
    pub const E1: UnitVector = UnitVector(Vector3::new(1.0, 0.0, 0.0));
    pub const E2: UnitVector = UnitVector(Vector3::new(0.0, 1.0, 0.0));
    pub const E3: UnitVector = UnitVector(Vector3::new(0.0, 0.0, 1.0));

    /// Checked constructor; the components must already have unit norm.
    pub fn new(x1: f64, x2: f64, x3: f64) -> Result<Self, GeometryError> {
        let v = Vector3::new(x1, x2, x3);
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(GeometryError::NotUnit(norm));
        }
        Ok(UnitVector(v))
    }

    /// Wraps a vector the caller has already normalized.
    pub(crate) fn new_unchecked(v: Vector3<f64>) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-12, "norm {}", v.norm());
        UnitVector(v)
    }

    #[inline]
    pub fn as_vec(&self) -> &Vector3<f64> {
        &self.0
    }

    #[inline]
    pub fn into_vec(self) -> Vector3<f64> {
        self.0
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.0.x
    }

    #[inline]
    pub fn x2(&self) -> f64 {
        self.0.y
    }

    #[inline]
    pub fn x3(&self) -> f64 {
        self.0.z
    }

    #[inline]
    pub fn dot(&self, other: &UnitVector) -> f64 {
        self.0.dot(&other.0)
    }

    /// Antipodal point.
    pub fn antipode(&self) -> UnitVector {
        UnitVector(-self.0)
    }

    pub fn to_geo(&self) -> GeoCoord {
        GeoCoord::from_unit(self)
    }
}

impl fmt::Debug for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "UnitVector({}, {}, {})", self.0.x, self.0.y, self.0.z)
    }
}

impl From<UnitVector> for Vector3<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

/// Geographic coordinates in radians: latitude in `[-π/2, π/2]`, longitude in `[-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeoCoord {
    pub lat: f64,
    pub lon: f64,
}

impl GeoCoord {
    pub fn new(lat: f64, lon: f64) -> Self {
        GeoCoord { lat, lon }
    }

    pub fn from_unit(u: &UnitVector) -> Self {
        let v = u.as_vec();
        let lat = v.z.atan2(v.x.hypot(v.y));
        let lon = v.y.atan2(v.x);
        GeoCoord { lat, lon }
    }

    pub fn to_unit(&self) -> UnitVector {
        let (slat, clat) = self.lat.sin_cos();
        let (slon, clon) = self.lon.sin_cos();
        // sin/cos pairs are unit up to rounding; renormalize to keep the invariant tight
        let v = Vector3::new(clat * clon, clat * slon, slat);
        UnitVector(v / v.norm())
    }
}

/// Great-circle distance in radians, in `[0, π]`.
///
/// Uses `atan2(‖a×b‖, a·b)`, which keeps full precision near 0 and π where
/// `acos(a·b)` does not.
pub fn geodesic_distance(a: &UnitVector, b: &UnitVector) -> f64 {
    let cross = a.0.cross(&b.0).norm();
    let dot = a.0.dot(&b.0);
    cross.atan2(dot)
}

/// Signed solid angle of the geodesic triangle `(a, b, c)`; positive when the
/// vertices run counterclockwise seen from outside the sphere.
pub fn signed_triangle_area(a: &UnitVector, b: &UnitVector, c: &UnitVector) -> f64 {
    let (a, b, c) = (&a.0, &b.0, &c.0);
    let triple = a.dot(&b.cross(c));
    let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * triple.atan2(denom)
}

/// Area (spherical excess) of the geodesic triangle, in steradians.
///
/// Degenerate triangles (repeated vertices, or all three on one great circle)
/// have zero area.
pub fn spherical_triangle_area(a: &UnitVector, b: &UnitVector, c: &UnitVector) -> f64 {
    signed_triangle_area(a, b, c).abs()
}

/// Spherical circumcenter of a non-degenerate triangle, taken on the side of
/// the sphere where the triangle lives.
pub fn circumcenter(
    a: &UnitVector,
    b: &UnitVector,
    c: &UnitVector,
) -> Result<UnitVector, GeometryError> {
    // a×b + b×c + c×a is (b-a)×(c-a) expanded, but without the cancellation
    // of the differences for nearly coincident points
    let n = a.0.cross(&b.0) + b.0.cross(&c.0) + c.0.cross(&a.0);
    let norm = n.norm();
    let scale_sq = (b.0 - a.0).norm_squared().max((c.0 - a.0).norm_squared()).max((c.0 - b.0).norm_squared());
    if !(norm > 1e-15 * scale_sq) || scale_sq == 0.0 {
        return Err(GeometryError::CollinearVertices);
    }
    let mut q = n / norm;
    // all three on one great circle: the plane of the triangle passes through the origin
    if q.dot(&a.0).abs() < 1e-12 {
        return Err(GeometryError::CollinearVertices);
    }
    if q.dot(&(a.0 + b.0 + c.0)) < 0.0 {
        q = -q;
    }
    Ok(UnitVector(q))
}

/// Midpoint of the minor great-circle arc from `a` to `b`.
pub fn arc_midpoint(a: &UnitVector, b: &UnitVector) -> Result<UnitVector, GeometryError> {
    let s = a.0 + b.0;
    let norm = s.norm();
    if !(norm > 1e-12) {
        return Err(GeometryError::MidpointUndefined);
    }
    Ok(UnitVector(s / norm))
}

/// Radial projection `p / ‖p‖` onto the sphere.
pub fn radial_project(p: &Vector3<f64>) -> Result<UnitVector, GeometryError> {
    let norm = p.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(GeometryError::ZeroVector);
    }
    Ok(UnitVector(p / norm))
}

/// Orthogonal projection of `v` onto the tangent plane at `x`.
pub fn tangential(x: &UnitVector, v: &Vector3<f64>) -> Vector3<f64> {
    v - x.0 * x.0.dot(v)
}

/// Local east/north unit vectors at `x`. Undefined (returns arbitrary frame) at the poles.
pub fn east_north(x: &UnitVector) -> (Vector3<f64>, Vector3<f64>) {
    let g = x.to_geo();
    let (slat, clat) = g.lat.sin_cos();
    let (slon, clon) = g.lon.sin_cos();
    let east = Vector3::new(-slon, clon, 0.0);
    let north = Vector3::new(-slat * clon, -slat * slon, clat);
    (east, north)
}
