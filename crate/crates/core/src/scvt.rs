//! Lloyd iteration towards a spherical centroidal Voronoi tessellation with
//! constant density.
//!
//! Cell moments are evaluated in closed form. For a spherical polygon with
//! counterclockwise vertices `q_k`,
//!
//! ```text
//! ∫_V y ds = ½ Σ_k θ_k n_k,   n_k = (q_k × q_{k+1}) / ‖q_k × q_{k+1}‖,  θ_k = d(q_k, q_{k+1})
//! ```
//!
//! and since `‖y - x‖² = 2 - 2 x·y` on the unit sphere, the cell energy is
//! `2 m_a(V) - 2 x·∫_V y ds`. Exact moments keep the energy trace monotone to
//! rounding.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::dual::SphericalMesh;
use crate::error::{GridError, LloydError};
use crate::geometry::{geodesic_distance, UnitVector};
use crate::grid::{check_delaunay, local_index, DelaunayGrid};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 2000;

#[derive(Clone, Debug, PartialEq)]
pub struct LloydReport {
    pub iterations: usize,
    /// Largest generator displacement in the last iteration, in radians.
    pub final_max_move: f64,
    /// Energy before the first step followed by the energy after each step.
    pub energy_trace: Vec<f64>,
    pub converged: bool,
}

/// First moment `∫_V y ds` of a spherical polygon.
pub fn first_moment(polygon: &[UnitVector]) -> Vector3<f64> {
    let m = polygon.len();
    let mut sum = Vector3::zeros();
    for k in 0..m {
        sum += edge_moment(polygon[k].as_vec(), polygon[(k + 1) % m].as_vec());
    }
    sum * 0.5
}

#[inline]
fn edge_moment(p: &Vector3<f64>, q: &Vector3<f64>) -> Vector3<f64> {
    let cross = p.cross(q);
    let s = cross.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    cross * (s.atan2(p.dot(q)) / s)
}

/// Sphere-constrained centroid of a cell: the normalized first moment, which
/// minimizes `∫_V ‖y - x‖² ds` over unit `x`.
///
/// `generator` only sets the length scale for deciding that the moment vanishes.
pub fn constrained_centroid(polygon: &[UnitVector], generator: &UnitVector) -> Result<UnitVector, LloydError> {
    let scale = polygon.iter().map(|q| geodesic_distance(generator, q)).fold(0.0, f64::max);
    centroid_from_moment(first_moment(polygon), scale).ok_or(LloydError::CentroidUndefined(None))
}

fn centroid_from_moment(m: Vector3<f64>, scale: f64) -> Option<UnitVector> {
    let norm = m.norm();
    (norm > 1e-14 * scale * scale).then(|| UnitVector::new_unchecked(m / norm))
}

/// `∫_V ‖y - x‖² ds` for one cell.
pub fn cell_energy(polygon: &[UnitVector], area: f64, generator: &UnitVector) -> f64 {
    2.0 * area - 2.0 * generator.as_vec().dot(&first_moment(polygon))
}

/// Quantization energy `Σ_i ∫_{V_i} ‖y - x_i‖² ds`.
pub fn energy(mesh: &SphericalMesh) -> f64 {
    let per_cell: Vec<f64> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| cell_energy(&mesh.dual.cell_polygon(i), mesh.dual.cells[i].area, mesh.vertex(i)))
        .collect();
    per_cell.iter().sum()
}

/// Flattened cell boundaries: for every cell, its polygon corners and the
/// signed primal edge of each polygon side, in counterclockwise order.
struct CellBoundaries {
    offsets: Vec<usize>,
    corners: Vec<usize>,
    sides: Vec<(usize, f64)>,
}

impl CellBoundaries {
    fn new(grid: &DelaunayGrid) -> Self {
        let mut offsets = Vec::with_capacity(grid.num_vertices() + 1);
        let mut corners = Vec::with_capacity(2 * grid.num_edges());
        let mut sides = Vec::with_capacity(2 * grid.num_edges());
        offsets.push(0);
        for i in 0..grid.num_vertices() {
            for &t in grid.vertex_triangles(i) {
                let p = local_index(&grid.triangles()[t], i);
                let e = grid.triangle_edges()[t][(p + 1) % 3];
                let sign = if grid.edges()[e].triangles[0] == t { 1.0 } else { -1.0 };
                corners.push(t);
                sides.push((e, sign));
            }
            offsets.push(corners.len());
        }
        CellBoundaries { offsets, corners, sides }
    }
}

/// Energy of the configuration `vertices` together with the centroid of every cell.
///
/// Uses `Σ_i m_a(V_i) = 4π`, so the total energy is `8π - 2 Σ_i x_i·∫_{V_i} y ds`;
/// the sum is compensated so step-to-step differences stay above rounding.
fn sweep(
    grid: &DelaunayGrid,
    cells: &CellBoundaries,
    vertices: &[UnitVector],
) -> Result<(f64, Vec<UnitVector>), LloydError> {
    let centers = grid.circumcenters_at(vertices)?;
    let edge_moments: Vec<Vector3<f64>> = grid
        .edges()
        .iter()
        .map(|e| edge_moment(centers[e.triangles[0]].as_vec(), centers[e.triangles[1]].as_vec()))
        .collect();
    let per_cell: Vec<(f64, UnitVector)> = (0..vertices.len())
        .into_par_iter()
        .with_min_len(1024)
        .map(|i| {
            let range = cells.offsets[i]..cells.offsets[i + 1];
            let x = vertices[i].as_vec();
            let mut moment = Vector3::zeros();
            let mut scale: f64 = 0.0;
            for (&(e, sign), &t) in cells.sides[range.clone()].iter().zip(&cells.corners[range]) {
                moment += edge_moments[e] * sign;
                scale = scale.max((centers[t].as_vec() - x).norm_squared());
            }
            moment *= 0.5;
            let centroid =
                centroid_from_moment(moment, scale.sqrt()).ok_or(LloydError::CentroidUndefined(Some(i)))?;
            Ok((x.dot(&moment), centroid))
        })
        .collect::<Result<_, LloydError>>()?;
    let projected = neumaier_sum(per_cell.iter().map(|c| c.0));
    let energy = 8.0 * PI - 2.0 * projected;
    Ok((energy, per_cell.into_iter().map(|c| c.1).collect()))
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// One Lloyd step: every generator moves to its constrained centroid.
/// Returns the new vertex positions and the largest displacement.
pub fn lloyd_step(mesh: &SphericalMesh) -> Result<(Vec<UnitVector>, f64), LloydError> {
    let (_, moved) = sweep(&mesh.grid, &CellBoundaries::new(&mesh.grid), mesh.grid.vertices())?;
    let max_move = max_distance(&moved, mesh.grid.vertices());
    Ok((moved, max_move))
}

fn max_distance(a: &[UnitVector], b: &[UnitVector]) -> f64 {
    a.iter().zip(b).map(|(p, q)| geodesic_distance(p, q)).fold(0.0, f64::max)
}

/// Runs Lloyd iterations with fixed connectivity until the largest generator
/// move drops below `tol` or `max_iter` steps have been taken, then verifies
/// the Delaunay criterion on the result.
pub fn lloyd_optimize(
    grid: &DelaunayGrid,
    tol: f64,
    max_iter: usize,
) -> Result<(DelaunayGrid, LloydReport), LloydError> {
    if !(tol > 0.0) {
        return Err(LloydError::BadTolerance(tol));
    }
    let mut report = LloydReport { iterations: 0, final_max_move: 0.0, energy_trace: Vec::new(), converged: false };
    if max_iter == 0 {
        return Ok((grid.clone(), report));
    }
    let cells = CellBoundaries::new(grid);
    let mut vertices = grid.vertices().to_vec();
    let (e0, mut centroids) = sweep(grid, &cells, &vertices)?;
    report.energy_trace.push(e0);
    while report.iterations < max_iter {
        let max_move = max_distance(&centroids, &vertices);
        vertices = centroids;
        let (e, next) = sweep(grid, &cells, &vertices)?;
        centroids = next;
        report.iterations += 1;
        report.final_max_move = max_move;
        report.energy_trace.push(e);
        if max_move < tol {
            report.converged = true;
            break;
        }
    }
    let out = grid.with_vertices(vertices)?;
    let delaunay = check_delaunay(&out)?;
    if !delaunay.passed {
        return Err(LloydError::Grid(GridError::NotDelaunay {
            triangle: delaunay.worst_triangle,
            vertex: delaunay.worst_vertex,
            margin: delaunay.worst_margin,
        }));
    }
    Ok((out, report))
}
