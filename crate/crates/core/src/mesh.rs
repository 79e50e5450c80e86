//! Structured triangulations of axis-aligned rectangles.
//!
//! Each cell `[x_i, x_{i+1}] × [y_j, y_{j+1}]` is cut along the diagonal from
//! its lower-left to upper-right corner. Uniform refinement preserves this
//! pattern, so refining an `nx × ny` mesh gives the `2nx × 2ny` mesh up to
//! vertex numbering.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh needs at least one cell in each direction (nx = {nx}, ny = {ny})")]
    TooFewCells { nx: usize, ny: usize },
    #[error("rectangle side lengths must be positive and finite (Lx = {lx}, Ly = {ly})")]
    BadExtent { lx: f64, ly: f64 },
    #[error("boundary spec needs at least one Dirichlet side and one Slip side, got {0}")]
    DegenerateBoundary(BoundarySpec),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Slip,
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryTag::Dirichlet => "dirichlet",
            BoundaryTag::Slip => "slip",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Bottom => [0.0, -1.0],
            Side::Right => [1.0, 0.0],
            Side::Top => [0.0, 1.0],
            Side::Left => [-1.0, 0.0],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BoundarySpec {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl BoundarySpec {
    pub fn uniform(tag: BoundaryTag) -> Self {
        Self { left: tag, right: tag, bottom: tag, top: tag }
    }

    /// Slip on the bottom side, Dirichlet elsewhere.
    pub fn slip_bottom() -> Self {
        Self { bottom: BoundaryTag::Slip, ..Self::uniform(BoundaryTag::Dirichlet) }
    }

    pub fn tag(&self, side: Side) -> BoundaryTag {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let tags: Vec<_> = Side::ALL.iter().map(|&s| self.tag(s)).collect();
        if tags.contains(&BoundaryTag::Dirichlet) && tags.contains(&BoundaryTag::Slip) {
            Ok(())
        } else {
            Err(MeshError::DegenerateBoundary(*self))
        }
    }
}

impl fmt::Display for BoundarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "left={} right={} bottom={} top={}", self.left, self.right, self.bottom, self.top)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    /// endpoints ordered so that the domain lies to the left
    pub vertices: [usize; 2],
    pub side: Side,
    pub tag: BoundaryTag,
    pub normal: [f64; 2],
    /// index of the owning triangle
    pub triangle: usize,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// counterclockwise vertex triples
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub spec: BoundarySpec,
    pub lx: f64,
    pub ly: f64,
}

/// Builds the `nx × ny` diagonal-split mesh of `[0, lx] × [0, ly]`.
pub fn build_rect_mesh(nx: usize, ny: usize, lx: f64, ly: f64, spec: BoundarySpec) -> Result<Mesh, MeshError> {
    spec.validate()?;
    build_rect_mesh_unchecked(nx, ny, lx, ly, spec)
}

/// Like [`build_rect_mesh`] but accepts an all-Dirichlet or all-Slip spec,
/// for exercising degenerate cases downstream.
pub fn build_rect_mesh_unchecked(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    spec: BoundarySpec,
) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::TooFewCells { nx, ny });
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(MeshError::BadExtent { lx, ly });
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    let cell_lower = |i: usize, j: usize| 2 * (j * nx + i);
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    let mut push = |a: usize, b: usize, side: Side, triangle: usize| {
        boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            side,
            tag: spec.tag(side),
            normal: side.outward_normal(),
            triangle,
        });
    };
    for i in 0..nx {
        push(vid(i, 0), vid(i + 1, 0), Side::Bottom, cell_lower(i, 0));
    }
    for j in 0..ny {
        push(vid(nx, j), vid(nx, j + 1), Side::Right, cell_lower(nx - 1, j));
    }
    for i in (0..nx).rev() {
        push(vid(i + 1, ny), vid(i, ny), Side::Top, cell_lower(i, ny - 1) + 1);
    }
    for j in (0..ny).rev() {
        push(vid(0, j + 1), vid(0, j), Side::Left, cell_lower(0, j) + 1);
    }
    Ok(Mesh { vertices, triangles, boundary_edges, spec, lx, ly })
}

/// Splits every triangle into four congruent children through its edge
/// midpoints. Boundary edges split in two and keep their tag and normal.
pub fn refine_uniform(m: &Mesh) -> Mesh {
    let mut vertices = m.vertices.clone();
    let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let key = (a.min(b), a.max(b));
        *mids.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * m.triangles.len());
    for &[a, b, c] in &m.triangles {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * m.boundary_edges.len());
    for e in &m.boundary_edges {
        let [a, b] = e.vertices;
        let mid = midpoint(a, b, &mut vertices);
        for (p, q) in [(a, mid), (mid, b)] {
            let triangle = owning_child(&triangles, e.triangle, p, q);
            boundary_edges.push(BoundaryEdge { vertices: [p, q], triangle, ..e.clone() });
        }
    }
    Mesh { vertices, triangles, boundary_edges, spec: m.spec, lx: m.lx, ly: m.ly }
}

fn owning_child(triangles: &[[usize; 3]], parent: usize, p: usize, q: usize) -> usize {
    (4 * parent..4 * parent + 4)
        .find(|&t| triangles[t].contains(&p) && triangles[t].contains(&q))
        .expect("refined boundary edge lies in a child of its parent")
}

impl Mesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.signed_area(t)).sum()
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        let (p, q) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
        (q[0] - p[0]).hypot(q[1] - p[1])
    }

    pub fn boundary_length(&self) -> f64 {
        self.boundary_edges.iter().map(|e| self.edge_length(e)).sum()
    }

    /// Largest triangle edge length.
    pub fn h_max(&self) -> f64 {
        let mut h = 0.0f64;
        for tri in &self.triangles {
            for k in 0..3 {
                let (p, q) = (self.vertices[tri[k]], self.vertices[tri[(k + 1) % 3]]);
                h = h.max((q[0] - p[0]).hypot(q[1] - p[1]));
            }
        }
        h
    }

    /// Outward normal of edge `(p, q)` computed from the geometry of its
    /// owning triangle rather than from the stored side.
    pub fn geometric_normal(&self, e: &BoundaryEdge) -> [f64; 2] {
        let (p, q) = (self.vertices[e.vertices[0]], self.vertices[e.vertices[1]]);
        let opposite = self.triangles[e.triangle]
            .iter()
            .copied()
            .find(|v| !e.vertices.contains(v))
            .map(|v| self.vertices[v])
            .expect("triangle has a vertex off the edge");
        let (tx, ty) = (q[0] - p[0], q[1] - p[1]);
        let len = tx.hypot(ty);
        let mut n = [ty / len, -tx / len];
        // flip toward the side away from the interior vertex
        if n[0] * (opposite[0] - p[0]) + n[1] * (opposite[1] - p[1]) > 0.0 {
            n = [-n[0], -n[1]];
        }
        n
    }

    /// Legacy ASCII VTK of the triangulation with optional point data.
    pub fn to_vtk(&self, title: &str, scalars: &[(&str, &[f64])], vectors: &[(&str, &[[f64; 2]])]) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0");
        let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
        let _ = writeln!(s, "ASCII");
        let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.n_vertices());
        for p in &self.vertices {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let nt = self.n_triangles();
        let _ = writeln!(s, "CELLS {} {}", nt, 4 * nt);
        for t in &self.triangles {
            let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "CELL_TYPES {nt}");
        for _ in 0..nt {
            let _ = writeln!(s, "5");
        }
        if !scalars.is_empty() || !vectors.is_empty() {
            let _ = writeln!(s, "POINT_DATA {}", self.n_vertices());
            for (name, data) in scalars {
                assert_eq!(data.len(), self.n_vertices(), "scalar field {name} has wrong length");
                let _ = writeln!(s, "SCALARS {name} double 1");
                let _ = writeln!(s, "LOOKUP_TABLE default");
                for v in *data {
                    let _ = writeln!(s, "{v:e}");
                }
            }
            for (name, data) in vectors {
                assert_eq!(data.len(), self.n_vertices(), "vector field {name} has wrong length");
                let _ = writeln!(s, "VECTORS {name} double");
                for v in *data {
                    let _ = writeln!(s, "{:e} {:e} 0", v[0], v[1]);
                }
            }
        }
        s
    }
}
