//! Voronoi dual of a [`DelaunayGrid`] and the geometric measures the finite
//! volume scheme needs: cell areas, dual edge lengths, and neighbor sets.

use rayon::prelude::*;

use crate::error::GridError;
use crate::geometry::{geodesic_distance, spherical_triangle_area, UnitVector};
use crate::grid::{check_delaunay, DelaunayGrid};

/// Voronoi cell of one generator.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Circumcenter (triangle) indices, counterclockwise.
    pub polygon: Vec<usize>,
    /// Area in steradians.
    pub area: f64,
    /// Largest geodesic distance from the generator to a polygon vertex.
    pub radius: f64,
}

/// Dual arc between the circumcenters of the two triangles sharing a primal edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualEdge {
    /// Geodesic length of the dual arc.
    pub length: f64,
    /// Geodesic distance between the two generators.
    pub vertex_distance: f64,
    /// Chord length between the two generators.
    pub chord: f64,
}

/// Neighbor `j` of a generator together with the primal edge joining them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub vertex: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoronoiDual {
    pub circumcenters: Vec<UnitVector>,
    pub cells: Vec<Cell>,
    /// Indexed like the primal edges.
    pub dual_edges: Vec<DualEdge>,
    neighbor_offsets: Vec<usize>,
    neighbor_list: Vec<Neighbor>,
    /// Grid parameter: the largest cell radius.
    pub h: f64,
}

impl VoronoiDual {
    /// Neighbor set of vertex `i`, sorted by neighbor index.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.neighbor_list[self.neighbor_offsets[i]..self.neighbor_offsets[i + 1]]
    }

    pub fn cell_areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    pub fn total_area(&self) -> f64 {
        self.cells.iter().map(|c| c.area).sum()
    }

    /// Polygon vertices of cell `i`.
    pub fn cell_polygon(&self, i: usize) -> Vec<UnitVector> {
        self.cells[i].polygon.iter().map(|&t| self.circumcenters[t]).collect()
    }
}

/// A primal grid bundled with its dual.
#[derive(Clone, Debug)]
pub struct SphericalMesh {
    pub grid: DelaunayGrid,
    pub dual: VoronoiDual,
}

impl SphericalMesh {
    /// Builds the dual after checking the Delaunay criterion.
    pub fn new(grid: DelaunayGrid) -> Result<Self, GridError> {
        let dual = build_voronoi_dual(&grid)?;
        Ok(SphericalMesh { grid, dual })
    }

    pub fn num_vertices(&self) -> usize {
        self.grid.num_vertices()
    }

    pub fn vertex(&self, i: usize) -> &UnitVector {
        &self.grid.vertices()[i]
    }
}

/// Voronoi dual of a Delaunay grid. Fails if the grid violates the Delaunay
/// criterion, naming the offending triangle and vertex.
pub fn build_voronoi_dual(grid: &DelaunayGrid) -> Result<VoronoiDual, GridError> {
    let report = check_delaunay(grid)?;
    if !report.passed {
        return Err(GridError::NotDelaunay {
            triangle: report.worst_triangle,
            vertex: report.worst_vertex,
            margin: report.worst_margin,
        });
    }
    build_dual_unchecked(grid)
}

pub(crate) fn build_dual_unchecked(grid: &DelaunayGrid) -> Result<VoronoiDual, GridError> {
    let circumcenters = grid.circumcenters()?;
    let vertices = grid.vertices();

    let cells: Vec<Cell> = (0..grid.num_vertices())
        .into_par_iter()
        .map(|i| {
            let polygon = grid.vertex_triangles(i).to_vec();
            let x = &vertices[i];
            let m = polygon.len();
            let mut area = 0.0;
            let mut radius: f64 = 0.0;
            for k in 0..m {
                let q0 = &circumcenters[polygon[k]];
                let q1 = &circumcenters[polygon[(k + 1) % m]];
                area += spherical_triangle_area(x, q0, q1);
                radius = radius.max(geodesic_distance(x, q0));
            }
            Cell { polygon, area, radius }
        })
        .collect();

    let dual_edges: Vec<DualEdge> = grid
        .edges()
        .par_iter()
        .map(|e| {
            let [t0, t1] = e.triangles;
            let (a, b) = (&vertices[e.v[0]], &vertices[e.v[1]]);
            DualEdge {
                length: geodesic_distance(&circumcenters[t0], &circumcenters[t1]),
                vertex_distance: geodesic_distance(a, b),
                chord: (a.as_vec() - b.as_vec()).norm(),
            }
        })
        .collect();

    let n = grid.num_vertices();
    let mut counts = vec![0usize; n + 1];
    for e in grid.edges() {
        counts[e.v[0] + 1] += 1;
        counts[e.v[1] + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let neighbor_offsets = counts;
    let mut fill = neighbor_offsets.clone();
    let mut neighbor_list = vec![Neighbor { vertex: 0, edge: 0 }; 2 * grid.num_edges()];
    for (k, e) in grid.edges().iter().enumerate() {
        let [a, b] = e.v;
        neighbor_list[fill[a]] = Neighbor { vertex: b, edge: k };
        fill[a] += 1;
        neighbor_list[fill[b]] = Neighbor { vertex: a, edge: k };
        fill[b] += 1;
    }
    for i in 0..n {
        neighbor_list[neighbor_offsets[i]..neighbor_offsets[i + 1]].sort_unstable_by_key(|nb| nb.vertex);
    }

    let h = cells.iter().map(|c| c.radius).fold(0.0, f64::max);
    Ok(VoronoiDual { circumcenters, cells, dual_edges, neighbor_offsets, neighbor_list, h })
}

/// Almost-uniformity constants of a dual.
#[derive(Clone, Debug, PartialEq)]
pub struct UniformityReport {
    pub h: f64,
    /// `max(max m_l/h, max h/m_l)` over dual edges.
    pub c0: f64,
    /// `max(max m_a/h², max h²/m_a)` over cells.
    pub c1: f64,
    pub min_edge: f64,
    pub max_edge: f64,
    pub min_area: f64,
    pub max_area: f64,
}

pub fn check_uniformity(dual: &VoronoiDual) -> UniformityReport {
    let h = dual.h;
    let (min_edge, max_edge) = dual
        .dual_edges
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), e| (lo.min(e.length), hi.max(e.length)));
    let (min_area, max_area) = dual
        .cells
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), c| (lo.min(c.area), hi.max(c.area)));
    let ratio = |lo: f64, hi: f64, scale: f64| (hi / scale).max(scale / lo);
    UniformityReport {
        h,
        c0: ratio(min_edge, max_edge, h),
        c1: ratio(min_area, max_area, h * h),
        min_edge,
        max_edge,
        min_area,
        max_area,
    }
}
