//! Interpolation, integration and error norms on the sphere.
//!
//! Nodal fields are lifted to the sphere through the radial projection: the
//! value at `y` is the linear interpolant on the planar triangle hit by the
//! ray through `y`. Its tangential gradient is computed exactly from the
//! constant planar gradient `G` of that interpolant.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::dual::SphericalMesh;
use crate::error::MetricsError;
use crate::fv::NodalField;
use crate::geometry::{radial_project, tangential, UnitVector};
use crate::grid::DelaunayGrid;
use crate::quadrature::QuadratureRule;

/// Barycentric tolerance for point location.
pub const LOCATE_TOL: f64 = 1e-12;

/// `∫ g ds` over the sphere, triangle by triangle.
pub fn integrate<F>(mesh: &SphericalMesh, rule: &QuadratureRule, g: F) -> f64
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    integrate_grid(&mesh.grid, rule, g)
}

pub fn integrate_grid<F>(grid: &DelaunayGrid, rule: &QuadratureRule, g: F) -> f64
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..grid.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = grid.triangle_vertices(t);
            rule.integrate_triangle(&a, &b, &c, &g)
        })
        .collect();
    parts.iter().sum()
}

/// `Π̃_h u`: nodal values at the grid vertices.
pub fn interp_nodal<F: Fn(&UnitVector) -> f64>(mesh: &SphericalMesh, u: F) -> NodalField {
    NodalField::from_fn(mesh, u)
}

/// `Π̃*_h u`: one constant per Voronoi cell, the value at its generator.
pub fn interp_piecewise_const<F: Fn(&UnitVector) -> f64>(mesh: &SphericalMesh, u: F) -> Vec<f64> {
    mesh.grid.vertices().iter().map(u).collect()
}

/// `Ĩ_h`: transfers a nodal field to the piecewise constants on the dual.
pub fn transfer(u: &NodalField) -> Vec<f64> {
    u.values.clone()
}

/// `‖v − Π̃*_h v‖_{L²}` by fan quadrature over every cell.
pub fn piecewise_const_l2_error<F>(mesh: &SphericalMesh, rule: &QuadratureRule, v: F) -> f64
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    let parts: Vec<f64> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let c = v(mesh.vertex(i));
            rule.integrate_fan(mesh.vertex(i), &mesh.dual.cell_polygon(i), |p| (v(p) - c).powi(2))
        })
        .collect();
    parts.iter().sum::<f64>().sqrt()
}

/// Piecewise linear function on the planar triangles, lifted to the sphere.
#[derive(Clone, Debug)]
pub struct LiftedP1<'a> {
    grid: &'a DelaunayGrid,
    values: &'a [f64],
    /// Constant planar gradient per triangle.
    planar_gradients: Vec<Vector3<f64>>,
}

impl<'a> LiftedP1<'a> {
    pub fn new(grid: &'a DelaunayGrid, u: &'a NodalField) -> Result<Self, MetricsError> {
        if u.len() != grid.num_vertices() {
            return Err(MetricsError::DimensionMismatch { expected: grid.num_vertices(), got: u.len() });
        }
        let planar_gradients = grid
            .triangles()
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|k| *grid.vertices()[k].as_vec());
                let n = (b - a).cross(&(c - a));
                let twice = n.norm_squared();
                let [ua, ub, uc] = tri.map(|k| u.values[k]);
                // ∇λ_a = n × (c − b) / |n|² and cyclically
                (n.cross(&(c - b)) * ua + n.cross(&(a - c)) * ub + n.cross(&(b - a)) * uc) / twice
            })
            .collect();
        Ok(LiftedP1 { grid, values: &u.values, planar_gradients })
    }

    /// Planar barycentric coordinates of the pre-image of `y` in triangle `t`.
    /// Negative entries mean the ray through `y` misses the triangle.
    pub fn barycentric(&self, t: usize, y: &UnitVector) -> [f64; 3] {
        let [a, b, c] = self.grid.triangle_vertices(t);
        let (a, b, c, y) = (a.as_vec(), b.as_vec(), c.as_vec(), y.as_vec());
        // y = s (λ_a a + λ_b b + λ_c c) with Σλ = 1
        let det = a.dot(&b.cross(c));
        let mut l = [y.dot(&b.cross(c)) / det, a.dot(&y.cross(c)) / det, a.dot(&b.cross(y)) / det];
        let s: f64 = l.iter().sum();
        l.iter_mut().for_each(|v| *v /= s);
        if s <= 0.0 {
            // the ray hits the plane behind the origin
            return [-1.0; 3];
        }
        l
    }

    /// Triangle whose lifted image contains `y`, walking the adjacency from `hint`.
    pub fn locate(&self, y: &UnitVector, hint: usize) -> usize {
        let nt = self.grid.num_triangles();
        let mut t = hint.min(nt - 1);
        for _ in 0..nt {
            let l = self.barycentric(t, y);
            let (k, min) = l
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
            if min >= -LOCATE_TOL {
                return t;
            }
            t = self.grid.triangle_neighbors()[t][k];
        }
        // the walk cycles only on degenerate input; fall back to a scan
        (0..nt)
            .max_by(|&p, &q| {
                let mp = self.barycentric(p, y).iter().cloned().fold(f64::INFINITY, f64::min);
                let mq = self.barycentric(q, y).iter().cloned().fold(f64::INFINITY, f64::min);
                mp.total_cmp(&mq)
            })
            .unwrap()
    }

    pub fn value_in(&self, t: usize, bary: &[f64; 3]) -> f64 {
        let tri = self.grid.triangles()[t];
        (0..3).map(|k| bary[k] * self.values[tri[k]]).sum()
    }

    /// Value at `y`, with the containing triangle for use as the next hint.
    pub fn evaluate(&self, y: &UnitVector, hint: usize) -> (f64, usize) {
        let t = self.locate(y, hint);
        (self.value_in(t, &self.barycentric(t, y)), t)
    }

    /// Tangential gradient of the lift at `y`, which must lie in the image of triangle `t`.
    pub fn gradient_in(&self, t: usize, y: &UnitVector) -> Vector3<f64> {
        let [a, b, c] = self.grid.triangle_vertices(t);
        let n = (b.as_vec() - a.as_vec()).cross(&(c.as_vec() - a.as_vec())).normalize();
        let d = n.dot(a.as_vec());
        let g = &self.planar_gradients[t];
        let ny = n.dot(y.as_vec());
        // derivative of y ↦ G·(d y / (n·y))
        let ambient = (g - n * (g.dot(y.as_vec()) / ny)) * (d / ny);
        tangential(y, &ambient)
    }

    pub fn planar_gradient(&self, t: usize) -> &Vector3<f64> {
        &self.planar_gradients[t]
    }
}

/// Empirical convergence rates between two consecutive levels; `None` where
/// an error vanishes and the rate is undefined.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    pub l2: Option<f64>,
    pub h1: Option<f64>,
    pub max: Option<f64>,
    pub w1inf: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorReport {
    pub err_l2: f64,
    /// Tangential-gradient seminorm of the error.
    pub err_h1: f64,
    pub err_max: f64,
    pub err_w1inf: f64,
    /// Rates against the previous level; `None` at the first level.
    pub rates: Option<Rates>,
}

impl ErrorReport {
    /// Fills in the rates relative to the report of the next coarser level.
    pub fn with_rates_from(mut self, prev: &ErrorReport) -> Self {
        self.rates = Some(Rates {
            l2: convergence_rate(prev.err_l2, self.err_l2).ok(),
            h1: convergence_rate(prev.err_h1, self.err_h1).ok(),
            max: convergence_rate(prev.err_max, self.err_max).ok(),
            w1inf: convergence_rate(prev.err_w1inf, self.err_w1inf).ok(),
        });
        self
    }
}

/// Errors of the lift of `u_h` against the exact `u` and its tangential gradient.
///
/// L² and H¹ use the quadrature rule on every primal triangle; the max-norm
/// is taken over quadrature nodes and vertices, and W^{1,∞} adds the gradient
/// error at quadrature nodes and triangle centroids.
pub fn norms<U, G>(
    mesh: &SphericalMesh,
    rule: &QuadratureRule,
    u: U,
    grad_u: G,
    u_h: &NodalField,
) -> Result<ErrorReport, MetricsError>
where
    U: Fn(&UnitVector) -> f64 + Sync,
    G: Fn(&UnitVector) -> Vector3<f64> + Sync,
{
    let grid = &mesh.grid;
    let lift = LiftedP1::new(grid, u_h)?;
    // (Σ w e², Σ w |∇e|², max |e|, max |∇e|) per triangle
    let parts: Vec<[f64; 4]> = (0..grid.num_triangles())
        .into_par_iter()
        .map(|t| {
            let [a, b, c] = grid.triangle_vertices(t);
            let mut acc = [0.0, 0.0, 0.0f64, 0.0f64];
            for q in rule.triangle_points(&a, &b, &c) {
                let e = u(&q.point) - lift.value_in(t, &q.bary);
                let ge = (grad_u(&q.point) - lift.gradient_in(t, &q.point)).norm();
                acc[0] += q.weight * e * e;
                acc[1] += q.weight * ge * ge;
                acc[2] = acc[2].max(e.abs());
                acc[3] = acc[3].max(ge);
            }
            if let Ok(centroid) = radial_project(&(a.as_vec() + b.as_vec() + c.as_vec())) {
                acc[3] = acc[3].max((grad_u(&centroid) - lift.gradient_in(t, &centroid)).norm());
            }
            acc
        })
        .collect();
    let (mut l2, mut h1, mut max, mut gmax) = (0.0, 0.0, 0.0f64, 0.0f64);
    for p in &parts {
        l2 += p[0];
        h1 += p[1];
        max = max.max(p[2]);
        gmax = gmax.max(p[3]);
    }
    for (x, v) in grid.vertices().iter().zip(&u_h.values) {
        max = max.max((u(x) - v).abs());
    }
    Ok(ErrorReport { err_l2: l2.sqrt(), err_h1: h1.sqrt(), err_max: max, err_w1inf: max.max(gmax), rates: None })
}

/// `‖u_h‖_{L²}` of the lifted piecewise linear function.
pub fn lifted_l2_norm(mesh: &SphericalMesh, rule: &QuadratureRule, u_h: &NodalField) -> Result<f64, MetricsError> {
    let r = norms(mesh, rule, |_| 0.0, |_| Vector3::zeros(), u_h)?;
    Ok(r.err_l2)
}

fn check_exponent(p: u32) -> Result<(), MetricsError> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(MetricsError::UnsupportedExponent(p))
    }
}

/// `‖u_h‖_{0,p,h} = (Σ m_a(V_i) |u_i|^p)^{1/p}`.
pub fn discrete_norm(u: &NodalField, mesh: &SphericalMesh, p: u32) -> Result<f64, MetricsError> {
    check_exponent(p)?;
    if u.len() != mesh.num_vertices() {
        return Err(MetricsError::DimensionMismatch { expected: mesh.num_vertices(), got: u.len() });
    }
    let sum: f64 = mesh.dual.cells.iter().zip(&u.values).map(|(c, v)| c.area * v.abs().powi(p as i32)).sum();
    Ok(sum.powf(1.0 / p as f64))
}

/// `|u_h|_{1,p,h} = (Σ_i Σ_{j∈Λ_i} ½ m_l(Γ_ij) d(x_i,x_j) |(u_i − u_j)/‖x_i − x_j‖|^p)^{1/p}`.
pub fn discrete_seminorm(u: &NodalField, mesh: &SphericalMesh, p: u32) -> Result<f64, MetricsError> {
    check_exponent(p)?;
    if u.len() != mesh.num_vertices() {
        return Err(MetricsError::DimensionMismatch { expected: mesh.num_vertices(), got: u.len() });
    }
    // the double sum visits each edge twice with weight ½
    let sum: f64 = mesh
        .grid
        .edges()
        .iter()
        .zip(&mesh.dual.dual_edges)
        .map(|(e, d)| {
            let q = (u.values[e.v[0]] - u.values[e.v[1]]) / d.chord;
            d.length * d.vertex_distance * q.abs().powi(p as i32)
        })
        .sum();
    Ok(sum.powf(1.0 / p as f64))
}

/// `CR = |ln e_next − ln e_prev| / ln 2`.
pub fn convergence_rate(e_prev: f64, e_next: f64) -> Result<f64, MetricsError> {
    if !(e_prev > 0.0 && e_next > 0.0) {
        return Err(MetricsError::NonPositiveError(e_prev, e_next));
    }
    Ok((e_next.ln() - e_prev.ln()).abs() / std::f64::consts::LN_2)
}
