//! Recursively refined icosahedral Delaunay grids on the unit sphere.
//!
//! The level-0 grid is a regular icosahedron with vertices at the poles and on
//! two rings at latitude `±atan(1/2)`. Each refinement splits every geodesic
//! triangle into four by joining its arc midpoints. Parent vertices keep their
//! indices and midpoints are appended in edge-index order, so vertex numbering
//! is reproducible across runs.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::GridError;
use crate::geometry::{arc_midpoint, circumcenter, geodesic_distance, signed_triangle_area, GeoCoord, UnitVector};

/// Slack allowed when comparing a vertex distance against a circumradius.
pub const DELAUNAY_TOL: f64 = 1e-10;

/// A primal edge `(v[0], v[1])` with `v[0] < v[1]` and its two incident triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub v: [usize; 2],
    pub triangles: [usize; 2],
}

/// Geodesic Delaunay triangulation of the sphere with icosahedral topology.
#[derive(Clone, Debug, PartialEq)]
pub struct DelaunayGrid {
    level: u32,
    vertices: Vec<UnitVector>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `triangle_edges[t][k]` is the edge opposite local vertex `k`.
    triangle_edges: Vec<[usize; 3]>,
    /// `triangle_neighbors[t][k]` is the triangle across the edge opposite local vertex `k`.
    triangle_neighbors: Vec<[usize; 3]>,
    /// Incident triangles of every vertex, counterclockwise seen from outside.
    vertex_triangles: Vec<Vec<usize>>,
}

/// Vertex count of the level-`level` icosahedral grid.
pub fn vertex_count(level: u32) -> usize {
    10 * 4usize.pow(level) + 2
}

pub fn triangle_count(level: u32) -> usize {
    20 * 4usize.pow(level)
}

pub fn edge_count(level: u32) -> usize {
    30 * 4usize.pow(level)
}

/// The regular icosahedron inscribed in the sphere.
pub fn build_icosahedron() -> DelaunayGrid {
    let ring_lat = 0.5f64.atan();
    let step = 2.0 * PI / 5.0;
    let mut vertices = Vec::with_capacity(12);
    vertices.push(UnitVector::E3);
    for k in 0..5 {
        vertices.push(GeoCoord::new(ring_lat, wrap_lon(k as f64 * step)).to_unit());
    }
    for k in 0..5 {
        vertices.push(GeoCoord::new(-ring_lat, wrap_lon((k as f64 + 0.5) * step)).to_unit());
    }
    vertices.push(UnitVector::E3.antipode());

    let upper = |k: usize| 1 + k % 5;
    let lower = |k: usize| 6 + k % 5;
    let mut triangles = Vec::with_capacity(20);
    for k in 0..5 {
        triangles.push([0, upper(k), upper(k + 1)]);
    }
    for k in 0..5 {
        triangles.push([upper(k), lower(k), upper(k + 1)]);
        triangles.push([lower(k), lower(k + 1), upper(k + 1)]);
    }
    for k in 0..5 {
        triangles.push([11, lower(k + 1), lower(k)]);
    }
    for t in triangles.iter_mut() {
        let [a, b, c] = *t;
        if signed_triangle_area(&vertices[a], &vertices[b], &vertices[c]) < 0.0 {
            *t = [a, c, b];
        }
    }
    DelaunayGrid::from_parts(0, vertices, triangles).expect("icosahedron topology is valid")
}

fn wrap_lon(lon: f64) -> f64 {
    if lon > PI {
        lon - 2.0 * PI
    } else {
        lon
    }
}

/// One level of midpoint refinement: every triangle becomes four.
pub fn refine(grid: &DelaunayGrid) -> DelaunayGrid {
    let n = grid.vertices.len();
    let mut vertices = grid.vertices.clone();
    vertices.reserve(grid.edges.len());
    for e in &grid.edges {
        let m = arc_midpoint(&grid.vertices[e.v[0]], &grid.vertices[e.v[1]])
            .expect("grid edges never join antipodal points");
        vertices.push(m);
    }
    let mut triangles = Vec::with_capacity(4 * grid.triangles.len());
    for (t, &[a, b, c]) in grid.triangles.iter().enumerate() {
        let [e_bc, e_ca, e_ab] = grid.triangle_edges[t];
        let (m_ab, m_bc, m_ca) = (n + e_ab, n + e_bc, n + e_ca);
        triangles.push([a, m_ab, m_ca]);
        triangles.push([m_ab, b, m_bc]);
        triangles.push([m_ca, m_bc, c]);
        triangles.push([m_ab, m_bc, m_ca]);
    }
    DelaunayGrid::from_parts(grid.level + 1, vertices, triangles).expect("refinement preserves topology")
}

/// Refines the icosahedron `level` times.
pub fn build_level(level: u32) -> DelaunayGrid {
    let mut g = build_icosahedron();
    for _ in 0..level {
        g = refine(&g);
    }
    g
}

impl DelaunayGrid {
    /// Builds a grid from vertex positions and counterclockwise triangles,
    /// deriving edges and adjacency. Fails unless the triangles form a closed
    /// oriented surface of genus zero.
    pub fn from_parts(
        level: u32,
        vertices: Vec<UnitVector>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<Self, GridError> {
        let n = vertices.len();
        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3 / 2);
        let mut triangle_edges = vec![[usize::MAX; 3]; triangles.len()];

        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) {
                return Err(GridError::Topology(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(GridError::Topology(format!("triangle {t} repeats a vertex")));
            }
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { v: [key.0, key.1], triangles: [t, usize::MAX] });
                    edges.len() - 1
                });
                if edges[e].triangles[0] != t {
                    if edges[e].triangles[1] != usize::MAX {
                        return Err(GridError::Topology(format!(
                            "edge ({}, {}) is shared by more than two triangles",
                            key.0, key.1
                        )));
                    }
                    edges[e].triangles[1] = t;
                }
                triangle_edges[t][k] = e;
            }
        }
        if let Some(e) = edges.iter().find(|e| e.triangles[1] == usize::MAX) {
            return Err(GridError::Topology(format!("edge ({}, {}) is on a boundary", e.v[0], e.v[1])));
        }
        if n + triangles.len() != edges.len() + 2 {
            return Err(GridError::Topology(format!(
                "Euler characteristic {} != 2",
                n as i64 - edges.len() as i64 + triangles.len() as i64
            )));
        }

        let triangle_neighbors: Vec<[usize; 3]> = triangle_edges
            .iter()
            .enumerate()
            .map(|(t, te)| {
                te.map(|e| {
                    let [t0, t1] = edges[e].triangles;
                    if t0 == t {
                        t1
                    } else {
                        t0
                    }
                })
            })
            .collect();

        // Walk the fan around each vertex: for triangle (v, a, b) the next one
        // counterclockwise is the triangle across edge (v, b).
        let mut first = vec![usize::MAX; n];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if first[v] == usize::MAX {
                    first[v] = t;
                }
            }
        }
        let mut vertex_triangles = Vec::with_capacity(n);
        for (v, &t0) in first.iter().enumerate() {
            if t0 == usize::MAX {
                return Err(GridError::Topology(format!("vertex {v} belongs to no triangle")));
            }
            let mut fan = vec![t0];
            let mut t = t0;
            loop {
                let p = local_index(&triangles[t], v);
                t = triangle_neighbors[t][(p + 1) % 3];
                if t == t0 {
                    break;
                }
                if fan.len() > triangles.len() {
                    return Err(GridError::Topology(format!("vertex {v} has an inconsistent fan")));
                }
                fan.push(t);
            }
            vertex_triangles.push(fan);
        }
        let fan_total: usize = vertex_triangles.iter().map(Vec::len).sum();
        if fan_total != 3 * triangles.len() {
            return Err(GridError::Topology("triangle fans do not cover every corner".into()));
        }

        Ok(DelaunayGrid { level, vertices, triangles, edges, triangle_edges, triangle_neighbors, vertex_triangles })
    }

    /// Same connectivity, relocated vertices.
    pub fn with_vertices(&self, vertices: Vec<UnitVector>) -> Result<Self, GridError> {
        if vertices.len() != self.vertices.len() {
            return Err(GridError::Topology(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Ok(DelaunayGrid { vertices, ..self.clone() })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn vertices(&self) -> &[UnitVector] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn triangle_neighbors(&self) -> &[[usize; 3]] {
        &self.triangle_neighbors
    }

    /// Triangles around vertex `v` in counterclockwise order.
    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    pub fn triangle_vertices(&self, t: usize) -> [UnitVector; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Circumcenters of all triangles, in triangle order.
    pub fn circumcenters(&self) -> Result<Vec<UnitVector>, GridError> {
        self.circumcenters_at(&self.vertices)
    }

    /// Circumcenters with this grid's connectivity but other vertex positions.
    pub(crate) fn circumcenters_at(&self, vertices: &[UnitVector]) -> Result<Vec<UnitVector>, GridError> {
        self.triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let [a, b, c] = tri.map(|v| vertices[v]);
                circumcenter(&a, &b, &c).map_err(|source| GridError::DegenerateTriangle { triangle: t, source })
            })
            .collect()
    }
}

pub(crate) fn local_index(tri: &[usize; 3], v: usize) -> usize {
    tri.iter().position(|&w| w == v).expect("vertex belongs to triangle")
}

/// Outcome of [`check_delaunay`].
#[derive(Clone, Debug, PartialEq)]
pub struct DelaunayReport {
    pub passed: bool,
    /// Smallest `d(q, v) - r` over triangles and tested non-member vertices.
    pub worst_margin: f64,
    pub worst_triangle: usize,
    pub worst_vertex: usize,
}

/// Empty-circumcircle test.
///
/// For each triangle, every vertex in the one-ring neighborhood of its three
/// corners is tested against the circumcircle. On a closed triangulation of
/// the sphere the local condition implies the global one, and the one-ring
/// contains every vertex opposite an edge of the triangle.
pub fn check_delaunay(grid: &DelaunayGrid) -> Result<DelaunayReport, GridError> {
    let centers = grid.circumcenters()?;
    let per_triangle: Vec<(f64, usize)> = (0..grid.num_triangles())
        .into_par_iter()
        .map(|t| triangle_margin(grid, t, &centers[t]))
        .collect();
    let mut report = DelaunayReport { passed: true, worst_margin: f64::INFINITY, worst_triangle: 0, worst_vertex: 0 };
    for (t, &(margin, v)) in per_triangle.iter().enumerate() {
        if margin < report.worst_margin {
            report.worst_margin = margin;
            report.worst_triangle = t;
            report.worst_vertex = v;
        }
    }
    report.passed = report.worst_margin >= -DELAUNAY_TOL;
    Ok(report)
}

fn triangle_margin(grid: &DelaunayGrid, t: usize, center: &UnitVector) -> (f64, usize) {
    let tri = grid.triangles[t];
    let radius = geodesic_distance(center, &grid.vertices[tri[0]]);
    let mut best = (f64::INFINITY, usize::MAX);
    for &corner in &tri {
        for &s in grid.vertex_triangles(corner) {
            for &v in &grid.triangles[s] {
                if tri.contains(&v) {
                    continue;
                }
                let margin = geodesic_distance(center, &grid.vertices[v]) - radius;
                if margin < best.0 {
                    best = (margin, v);
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{radial_project, spherical_triangle_area};

    #[test]
    fn icosahedron_counts_and_poles() {
        let g = build_icosahedron();
        assert_eq!((g.num_vertices(), g.num_triangles(), g.num_edges()), (12, 20, 30));
        assert_eq!(g.euler_characteristic(), 2);
        assert_eq!(g.vertices()[0], UnitVector::E3);
        assert_eq!(g.vertices()[11], UnitVector::E3.antipode());
    }

    #[test]
    fn icosahedron_is_regular() {
        let g = build_icosahedron();
        let lens: Vec<f64> = g
            .edges()
            .iter()
            .map(|e| geodesic_distance(&g.vertices()[e.v[0]], &g.vertices()[e.v[1]]))
            .collect();
        for l in &lens {
            assert!((l - lens[0]).abs() < 1e-12, "{l} vs {}", lens[0]);
        }
        for t in 0..20 {
            let [a, b, c] = g.triangle_vertices(t);
            assert!((signed_triangle_area(&a, &b, &c) - 4.0 * PI / 20.0).abs() < 1e-14);
        }
    }

    #[test]
    fn refinement_counts() {
        let mut g = build_icosahedron();
        for level in 1..=4 {
            g = refine(&g);
            assert_eq!(g.level(), level);
            assert_eq!(g.num_vertices(), vertex_count(level));
            assert_eq!(g.num_triangles(), triangle_count(level));
            assert_eq!(g.num_edges(), edge_count(level));
            assert_eq!(g.euler_characteristic(), 2);
        }
        assert_eq!(build_level(1).num_vertices(), 42);
        assert_eq!(build_level(2).num_vertices(), 162);
    }

    #[test]
    fn children_tile_parent() {
        let g0 = build_level(1);
        let g1 = refine(&g0);
        for t in 0..g0.num_triangles() {
            let [a, b, c] = g0.triangle_vertices(t);
            let parent = spherical_triangle_area(&a, &b, &c);
            let children: f64 = (4 * t..4 * t + 4)
                .map(|s| {
                    let [a, b, c] = g1.triangle_vertices(s);
                    signed_triangle_area(&a, &b, &c)
                })
                .sum();
            assert!((children - parent).abs() < 1e-12 * parent);
        }
    }

    #[test]
    fn orientation_is_counterclockwise_everywhere() {
        let g = build_level(3);
        for t in 0..g.num_triangles() {
            let [a, b, c] = g.triangle_vertices(t);
            assert!(signed_triangle_area(&a, &b, &c) > 0.0);
        }
    }

    #[test]
    fn parents_keep_indices_and_midpoints_follow_edges() {
        let g0 = build_level(1);
        let g1 = refine(&g0);
        assert_eq!(&g1.vertices()[..g0.num_vertices()], g0.vertices());
        for (e, edge) in g0.edges().iter().enumerate() {
            let m = arc_midpoint(&g0.vertices()[edge.v[0]], &g0.vertices()[edge.v[1]]).unwrap();
            assert_eq!(g1.vertices()[g0.num_vertices() + e], m);
        }
    }

    #[test]
    fn rebuilding_is_deterministic() {
        assert_eq!(build_level(3), build_level(3));
    }

    #[test]
    fn vertex_fans_are_counterclockwise_cycles() {
        let g = build_level(2);
        for v in 0..g.num_vertices() {
            let fan = g.vertex_triangles(v);
            assert!(fan.len() == 5 || fan.len() == 6);
            for (k, &t) in fan.iter().enumerate() {
                let next = fan[(k + 1) % fan.len()];
                let p = local_index(&g.triangles()[t], v);
                // (v, a, b) is followed by the triangle that contains edge (v, b)
                let b = g.triangles()[t][(p + 2) % 3];
                assert!(g.triangles()[next].contains(&b));
            }
        }
        assert!(g.vertex_triangles(0).len() == 5);
    }

    #[test]
    fn every_edge_has_two_triangles() {
        let g = build_level(2);
        for e in g.edges() {
            for &t in &e.triangles {
                assert!(g.triangles()[t].contains(&e.v[0]) && g.triangles()[t].contains(&e.v[1]));
            }
            assert_ne!(e.triangles[0], e.triangles[1]);
        }
    }

    #[test]
    fn delaunay_passes_on_nopt_levels() {
        for level in 0..=3 {
            let report = check_delaunay(&build_level(level)).unwrap();
            assert!(report.passed, "level {level}: {report:?}");
            assert!(report.worst_margin > 0.0);
        }
    }

    #[test]
    fn delaunay_margin_matches_definition_on_icosahedron() {
        let g = build_icosahedron();
        let report = check_delaunay(&g).unwrap();
        // nearest outside vertex of face (0,1,2) is the lower-ring vertex 6 sharing edge (1,2)
        let [a, b, c] = g.triangle_vertices(0);
        let q = circumcenter(&a, &b, &c).unwrap();
        let r = geodesic_distance(&q, &a);
        let nearest = g
            .vertices()
            .iter()
            .enumerate()
            .filter(|(i, _)| !g.triangles()[0].contains(i))
            .map(|(_, v)| geodesic_distance(&q, v))
            .fold(f64::INFINITY, f64::min);
        assert!((report.worst_margin - (nearest - r)).abs() < 1e-14);
    }

    #[test]
    fn perturbed_vertex_breaks_delaunay() {
        let g = build_level(2);
        // move the vertex opposite an edge of triangle 0 into that triangle's circumcircle
        let t = 0;
        let k = 0;
        let across = g.triangle_neighbors()[t][k];
        let e = g.triangle_edges()[t][k];
        let opposite = *g.triangles()[across]
            .iter()
            .find(|v| !g.edges()[e].v.contains(v))
            .unwrap();
        let [a, b, c] = g.triangle_vertices(t);
        let q = circumcenter(&a, &b, &c).unwrap();
        let mut vertices = g.vertices().to_vec();
        let target = q.as_vec() * 0.7 + vertices[opposite].as_vec() * 0.3;
        vertices[opposite] = radial_project(&target).unwrap();
        let bad = g.with_vertices(vertices).unwrap();
        let report = check_delaunay(&bad).unwrap();
        assert!(!report.passed);
        assert!(report.worst_margin < -DELAUNAY_TOL);
    }

    #[test]
    fn from_parts_rejects_open_surface() {
        let g = build_icosahedron();
        let mut tris = g.triangles().to_vec();
        tris.pop();
        assert!(matches!(
            DelaunayGrid::from_parts(0, g.vertices().to_vec(), tris),
            Err(GridError::Topology(_))
        ));
    }
}
