//! Quadrature on geodesic triangles through the radial projection.
//!
//! A geodesic triangle is the radial image of the flat triangle spanned by its
//! vertices. The flat triangle is subdivided `depth` times and a planar base
//! rule is applied on each piece; nodes are projected to the sphere and
//! weighted by the area Jacobian of the projection,
//! `J(x) = dist(0, plane) / ‖x‖³`.
//!
//! With [`AreaHandling::Corrected`] the weights of each geodesic triangle are
//! rescaled so they sum to its exact spherical area, which makes every rule
//! exact for constants.

use nalgebra::Vector3;

use crate::geometry::{spherical_triangle_area, UnitVector};

/// Planar base rule applied on each sub-triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseRule {
    /// Vertex-sum rule: exact for constants only. Cheap, used in tests.
    Centroid,
    /// Three edge midpoints with equal weights; exact for quadratics.
    EdgeMidpoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AreaHandling {
    /// Plain radial Jacobian.
    Jacobian,
    /// Radial Jacobian rescaled to the exact spherical area of the triangle.
    Corrected,
}

/// A quadrature node on the sphere.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    pub point: UnitVector,
    pub weight: f64,
    /// Barycentric coordinates of the pre-image in the flat triangle.
    pub bary: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    depth: u32,
    base: BaseRule,
    area: AreaHandling,
    /// Barycentric nodes on the reference triangle with weights summing to 1.
    reference: Vec<([f64; 3], f64)>,
}

pub const DEFAULT_DEPTH: u32 = 2;

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::new(DEFAULT_DEPTH)
    }
}

impl QuadratureRule {
    /// Edge-midpoint rule with `depth` subdivisions and area correction.
    pub fn new(depth: u32) -> Self {
        QuadratureRule::with_options(depth, BaseRule::EdgeMidpoint, AreaHandling::Corrected)
    }

    pub fn with_options(depth: u32, base: BaseRule, area: AreaHandling) -> Self {
        let mut subs = vec![[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]];
        for _ in 0..depth {
            subs = subs.iter().flat_map(split).collect();
        }
        let w_sub = 1.0 / subs.len() as f64;
        let mut reference = Vec::new();
        for [p0, p1, p2] in subs {
            match base {
                BaseRule::Centroid => {
                    let c = [0, 1, 2].map(|k| (p0[k] + p1[k] + p2[k]) / 3.0);
                    reference.push((c, w_sub));
                }
                BaseRule::EdgeMidpoint => {
                    for (p, q) in [(p0, p1), (p1, p2), (p2, p0)] {
                        let m = [0, 1, 2].map(|k| 0.5 * (p[k] + q[k]));
                        reference.push((m, w_sub / 3.0));
                    }
                }
            }
        }
        QuadratureRule { depth, base, area, reference }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn base(&self) -> BaseRule {
        self.base
    }

    pub fn area_handling(&self) -> AreaHandling {
        self.area
    }

    /// Number of nodes per geodesic triangle.
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    /// Nodes and weights on the geodesic triangle `(a, b, c)`.
    pub fn triangle_points(&self, a: &UnitVector, b: &UnitVector, c: &UnitVector) -> Vec<QuadPoint> {
        let (va, vb, vc) = (a.as_vec(), b.as_vec(), c.as_vec());
        let normal = (vb - va).cross(&(vc - va));
        let twice_area = normal.norm();
        if twice_area == 0.0 {
            return Vec::new();
        }
        let plane_dist = (normal / twice_area).dot(va).abs();
        let planar_area = 0.5 * twice_area;

        let mut points: Vec<QuadPoint> = self
            .reference
            .iter()
            .map(|&(bary, w)| {
                let x: Vector3<f64> = va * bary[0] + vb * bary[1] + vc * bary[2];
                let r = x.norm();
                let jac = plane_dist / (r * r * r);
                QuadPoint { point: UnitVector::new_unchecked(x / r), weight: planar_area * w * jac, bary }
            })
            .collect();

        if self.area == AreaHandling::Corrected {
            let raw: f64 = points.iter().map(|p| p.weight).sum();
            let exact = spherical_triangle_area(a, b, c);
            let scale = exact / raw;
            for p in &mut points {
                p.weight *= scale;
            }
        }
        points
    }

    /// `∫ f ds` over the geodesic triangle `(a, b, c)`.
    pub fn integrate_triangle<F>(&self, a: &UnitVector, b: &UnitVector, c: &UnitVector, f: F) -> f64
    where
        F: Fn(&UnitVector) -> f64,
    {
        self.triangle_points(a, b, c).iter().map(|p| p.weight * f(&p.point)).sum()
    }

    /// `∫ f ds` over a spherical polygon containing `center`, by fan triangles from `center`.
    pub fn integrate_fan<F>(&self, center: &UnitVector, polygon: &[UnitVector], f: F) -> f64
    where
        F: Fn(&UnitVector) -> f64,
    {
        let m = polygon.len();
        (0..m)
            .map(|k| self.integrate_triangle(center, &polygon[k], &polygon[(k + 1) % m], &f))
            .sum()
    }
}

fn split(t: &[[f64; 3]; 3]) -> [[[f64; 3]; 3]; 4] {
    let mid = |p: [f64; 3], q: [f64; 3]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])];
    let [a, b, c] = *t;
    let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
    [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
}
