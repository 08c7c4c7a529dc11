//! Voronoi-based finite volume discretization of `-Δ_s u = f`.
//!
//! The flux across the dual edge `Γ_ij` is approximated by the central difference
//!
//! ```text
//! F_ij(u) = -m_l(Γ_ij) (u_j - u_i) / ‖x_j - x_i‖
//! ```
//!
//! and the scheme balances `Σ_{j∈Λ_i} F_ij(u)` against `∫_{V_i} f ds` in every
//! cell. Written in this area-scaled form the operator is the symmetric
//! positive semidefinite matrix with off-diagonal entries `-c_ij`,
//! `c_ij = m_l(Γ_ij) / ‖x_i - x_j‖`, and row sums zero.

use rayon::prelude::*;

use crate::dual::SphericalMesh;
use crate::error::DiscretizationError;
use crate::geometry::UnitVector;
use crate::quadrature::QuadratureRule;
use crate::solver::deflate;
use crate::sparse::{dot, CsrMatrix};

/// One value per grid vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
}

impl NodalField {
    pub fn new(values: Vec<f64>) -> Self {
        NodalField { values }
    }

    pub fn zeros(n: usize) -> Self {
        NodalField { values: vec![0.0; n] }
    }

    /// Samples `f` at the vertices of `mesh`.
    pub fn from_fn<F: Fn(&UnitVector) -> f64>(mesh: &SphericalMesh, f: F) -> Self {
        NodalField { values: mesh.grid.vertices().iter().map(f).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Assembled finite volume system `A u = b`.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    /// `b_i = ∫_{V_i} f ds`.
    pub rhs: Vec<f64>,
    pub cell_areas: Vec<f64>,
    /// `c_ij` per primal edge.
    pub edge_coefficients: Vec<f64>,
    edges: Vec<[usize; 2]>,
}

fn check_len(expected: usize, got: usize) -> Result<(), DiscretizationError> {
    if expected != got {
        return Err(DiscretizationError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `c_ij = m_l(Γ_ij) / ‖x_i - x_j‖` for every primal edge.
pub fn edge_coefficients(mesh: &SphericalMesh) -> Result<Vec<f64>, DiscretizationError> {
    mesh.dual
        .dual_edges
        .iter()
        .enumerate()
        .map(|(edge, d)| {
            if !(d.length > 0.0) || !(d.chord > 0.0) {
                return Err(DiscretizationError::DegenerateDualEdge { edge, length: d.length });
            }
            Ok(d.length / d.chord)
        })
        .collect()
}

/// Central-difference flux from cell `i` into cell `j`.
pub fn discrete_flux(mesh: &SphericalMesh, u: &NodalField, i: usize, j: usize) -> Result<f64, DiscretizationError> {
    check_len(mesh.num_vertices(), u.len())?;
    let nb = mesh
        .dual
        .neighbors(i)
        .iter()
        .find(|nb| nb.vertex == j)
        .ok_or(DiscretizationError::NotNeighbor { i, j })?;
    let d = &mesh.dual.dual_edges[nb.edge];
    Ok(-(d.length / d.chord) * (u.values[j] - u.values[i]))
}

/// `Σ_{j∈Λ_i} F_ij(u)` for every cell.
pub fn cell_flux_sums(mesh: &SphericalMesh, u: &NodalField) -> Result<Vec<f64>, DiscretizationError> {
    check_len(mesh.num_vertices(), u.len())?;
    Ok((0..mesh.num_vertices())
        .map(|i| {
            mesh.dual
                .neighbors(i)
                .iter()
                .map(|nb| {
                    let d = &mesh.dual.dual_edges[nb.edge];
                    -(d.length / d.chord) * (u.values[nb.vertex] - u.values[i])
                })
                .sum()
        })
        .collect())
}

/// Total flux over the sphere, accumulated edge by edge so that the two
/// opposite fluxes of each edge cancel pairwise.
pub fn total_flux(mesh: &SphericalMesh, u: &NodalField) -> Result<f64, DiscretizationError> {
    check_len(mesh.num_vertices(), u.len())?;
    let mut total = 0.0;
    for e in mesh.grid.edges() {
        let [i, j] = e.v;
        total += discrete_flux(mesh, u, i, j)? + discrete_flux(mesh, u, j, i)?;
    }
    Ok(total)
}

/// `∫_{V_i} f ds` by fan quadrature from the generator.
pub fn source_integral<F>(mesh: &SphericalMesh, f: F, i: usize, rule: &QuadratureRule) -> f64
where
    F: Fn(&UnitVector) -> f64,
{
    rule.integrate_fan(mesh.vertex(i), &mesh.dual.cell_polygon(i), f)
}

/// Mean of `f` over cell `i`.
pub fn source_average<F>(mesh: &SphericalMesh, f: F, i: usize, rule: &QuadratureRule) -> f64
where
    F: Fn(&UnitVector) -> f64,
{
    source_integral(mesh, f, i, rule) / mesh.dual.cells[i].area
}

/// Assembles the area-scaled scheme `Σ_j c_ij (u_i - u_j) = ∫_{V_i} f ds`.
///
/// The right-hand side is left as computed; call [`SparseSystem::deflate_rhs`]
/// before solving to remove quadrature drift from the compatibility condition.
pub fn assemble<F>(mesh: &SphericalMesh, f: F, rule: &QuadratureRule) -> Result<SparseSystem, DiscretizationError>
where
    F: Fn(&UnitVector) -> f64 + Sync,
{
    let coef = edge_coefficients(mesh)?;
    let n = mesh.num_vertices();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| {
            let nbrs = mesh.dual.neighbors(i);
            let mut row = Vec::with_capacity(nbrs.len() + 1);
            let mut diag = 0.0;
            for nb in nbrs {
                row.push((nb.vertex, -coef[nb.edge]));
                diag += coef[nb.edge];
            }
            row.push((i, diag));
            row
        })
        .collect();
    let rhs: Vec<f64> = (0..n).into_par_iter().map(|i| source_integral(mesh, &f, i, rule)).collect();
    Ok(SparseSystem {
        matrix: CsrMatrix::from_rows(rows),
        rhs,
        cell_areas: mesh.dual.cell_areas(),
        edge_coefficients: coef,
        edges: mesh.grid.edges().iter().map(|e| e.v).collect(),
    })
}

impl SparseSystem {
    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    /// Projects the right-hand side onto the range of the matrix (zero sum).
    pub fn deflate_rhs(&mut self) {
        let ones = vec![1.0; self.rhs.len()];
        self.rhs = deflate(&self.rhs, &ones);
    }

    /// `u·(A u)`.
    pub fn quadratic_form(&self, u: &NodalField) -> f64 {
        dot(&u.values, &self.matrix.mul_vec(&u.values))
    }

    /// `Σ_edges c_ij (u_i - u_j)²`, the edge form of the discrete bilinear form.
    pub fn edge_energy(&self, u: &NodalField) -> f64 {
        self.edges
            .iter()
            .zip(&self.edge_coefficients)
            .map(|(&[i, j], c)| {
                let d = u.values[i] - u.values[j];
                c * d * d
            })
            .sum()
    }
}

/// Per-cell residual `((A u)_i - b_i) / m_a(V_i)` of the scheme in its
/// cell-averaged scaling.
pub fn apply_operator(sys: &SparseSystem, u: &NodalField) -> Result<Vec<f64>, DiscretizationError> {
    check_len(sys.len(), u.len())?;
    let au = sys.matrix.mul_vec(&u.values);
    Ok(au
        .iter()
        .zip(&sys.rhs)
        .zip(&sys.cell_areas)
        .map(|((a, b), m)| (a - b) / m)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_icosahedron, build_level};
    use crate::problems::heikes_problem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mesh(level: u32) -> SphericalMesh {
        SphericalMesh::new(build_level(level)).unwrap()
    }

    #[test]
    fn flux_of_constant_is_zero() {
        let m = mesh(1);
        let u = NodalField::new(vec![3.5; m.num_vertices()]);
        for i in 0..m.num_vertices() {
            for nb in m.dual.neighbors(i) {
                assert_eq!(discrete_flux(&m, &u, i, nb.vertex).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn flux_by_substitution() {
        let m = mesh(1);
        let (i, j) = (0, m.dual.neighbors(0)[0].vertex);
        let mut u = NodalField::zeros(m.num_vertices());
        u.values[j] = 1.0;
        let d = m.dual.dual_edges[m.dual.neighbors(0)[0].edge];
        assert_eq!(discrete_flux(&m, &u, i, j).unwrap(), -d.length / d.chord);
        assert_eq!(discrete_flux(&m, &u, j, i).unwrap(), d.length / d.chord);
    }

    #[test]
    fn flux_rejects_non_neighbors() {
        let m = mesh(1);
        let u = NodalField::zeros(m.num_vertices());
        assert_eq!(discrete_flux(&m, &u, 0, 11), Err(DiscretizationError::NotNeighbor { i: 0, j: 11 }));
        assert!(matches!(
            discrete_flux(&m, &NodalField::zeros(3), 0, 1),
            Err(DiscretizationError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn fluxes_are_conservative() {
        let m = mesh(3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = NodalField::new((0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect());
        for e in m.grid.edges() {
            let [i, j] = e.v;
            assert_eq!(discrete_flux(&m, &u, i, j).unwrap(), -discrete_flux(&m, &u, j, i).unwrap());
        }
        assert_eq!(total_flux(&m, &u).unwrap(), 0.0);
        let by_cell: f64 = cell_flux_sums(&m, &u).unwrap().iter().sum();
        assert!(by_cell.abs() < 1e-12);
    }

    #[test]
    fn source_average_of_constant() {
        let m = mesh(2);
        let rule = QuadratureRule::default();
        for i in [0, 17, 100] {
            assert!((source_average(&m, |_| 2.5, i, &rule) - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_source_on_equator_symmetric_cell() {
        // on the icosahedron no cell straddles the equator symmetrically, but
        // at level 1 the midpoint of a lower/upper ring edge does
        let m = mesh(1);
        let rule = QuadratureRule::default();
        let i = (0..m.num_vertices()).find(|&i| m.vertex(i).x3().abs() < 1e-15).unwrap();
        assert!(source_average(&m, |p| p.x3(), i, &rule).abs() < 1e-15);
    }

    #[test]
    fn heikes_source_average_against_refined_quadrature() {
        let m = mesh(4);
        let f = heikes_problem().f;
        let i = 1000;
        let coarse = source_average(&m, f, i, &QuadratureRule::default());
        // Richardson-extrapolated fine quadrature as the reference
        let d5 = source_average(&m, f, i, &QuadratureRule::new(5));
        let d6 = source_average(&m, f, i, &QuadratureRule::new(6));
        let reference = d6 + (d6 - d5) / 3.0;
        assert!((coarse - reference).abs() < 1e-8 * reference.abs().max(1.0), "{coarse} vs {reference}");
    }

    #[test]
    fn icosahedron_matrix_is_uniform() {
        let m = SphericalMesh::new(build_icosahedron()).unwrap();
        let sys = assemble(&m, |_| 0.0, &QuadratureRule::default()).unwrap();
        let c = sys.edge_coefficients[0];
        let mut off = 0;
        for i in 0..12 {
            let (cols, vals) = sys.matrix.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    assert!((v + c).abs() < 1e-15);
                    off += 1;
                }
            }
        }
        assert_eq!(off, 60);
    }

    #[test]
    fn matrix_invariants() {
        let m = mesh(3);
        let sys = assemble(&m, heikes_problem().f, &QuadratureRule::default()).unwrap();
        assert!(sys.matrix.is_symmetric());
        let ones = vec![1.0; m.num_vertices()];
        let a1 = sys.matrix.mul_vec(&ones);
        let diag = sys.matrix.diagonal();
        for (r, d) in a1.iter().zip(&diag) {
            assert!(r.abs() <= 1e-13 * d);
        }
        let total: f64 = sys.rhs.iter().sum();
        assert!(total.abs() < 1e-10);
    }

    #[test]
    fn quadratic_form_is_semidefinite_and_matches_edge_form() {
        let m = mesh(3);
        let sys = assemble(&m, |_| 0.0, &QuadratureRule::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let u = NodalField::new((0..m.num_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect());
            let q = sys.quadratic_form(&u);
            assert!(q > 0.0);
            assert!((q - sys.edge_energy(&u)).abs() <= 1e-12 * q);
        }
        let c = NodalField::new(vec![0.7; m.num_vertices()]);
        assert!(sys.quadratic_form(&c).abs() < 1e-13);
    }

    #[test]
    fn residual_of_constant_with_zero_source() {
        let m = mesh(2);
        let sys = assemble(&m, |_| 0.0, &QuadratureRule::default()).unwrap();
        let r = apply_operator(&sys, &NodalField::new(vec![1.0; m.num_vertices()])).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        assert!(apply_operator(&sys, &NodalField::zeros(2)).is_err());
    }

    #[test]
    fn deflated_rhs_sums_to_zero() {
        let m = mesh(2);
        let mut sys = assemble(&m, |p| 1.0 + p.x1(), &QuadratureRule::default()).unwrap();
        sys.deflate_rhs();
        assert!(sys.rhs.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn degenerate_dual_edge_is_rejected() {
        let mut m = mesh(1);
        m.dual.dual_edges[4].length = 0.0;
        assert!(matches!(
            assemble(&m, |_| 0.0, &QuadratureRule::default()),
            Err(DiscretizationError::DegenerateDualEdge { edge: 4, .. })
        ));
    }
}
