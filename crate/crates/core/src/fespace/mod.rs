//! Taylor–Hood spaces: continuous quadratic velocity, continuous linear
//! pressure.
//!
//! Velocity unknowns are eliminated row-and-column wherever a boundary
//! condition fixes them to zero, so every assembled velocity operator acts on
//! the free subspace only. On a Slip side the normal component is fixed and
//! the tangential one is free; the tangent is the outward normal rotated by
//! +90°.

mod assembly;
pub mod quadrature;

pub use assembly::{assemble, load_vector, DiscreteSystem};

use std::collections::HashMap;

use crate::mesh::{BoundaryTag, Mesh, Side};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Interior,
    Dirichlet,
    /// on one Slip side, normal component fixed
    Slip {
        side: Side,
    },
    /// shared by two Slip sides with different normals, fully fixed
    SlipCorner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofKind {
    Free,
    DirichletFixed,
    SlipNormalFixed,
}

/// A free tangential unknown on Γ_S.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlipDof {
    pub node: usize,
    /// index in the free-DOF numbering
    pub free: usize,
    /// `v_τ = sign · v[free]`
    pub sign: f64,
    /// lumped boundary mass (Simpson weights on each Slip edge)
    pub weight: f64,
    pub normal: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct DofMap {
    /// quadratic nodes ordered by (y, x)
    pub nodes: Vec<[f64; 2]>,
    pub node_kind: Vec<NodeKind>,
    /// per triangle: vertex nodes then edge midpoints (01, 12, 20)
    pub elements: Vec<[usize; 6]>,
    /// per triangle: pressure unknowns at its vertices
    pub p_elements: Vec<[usize; 3]>,
    pub node_of_vertex: Vec<usize>,
    pub pressure_of_vertex: Vec<usize>,
    /// velocity DOF `2·node + component`
    pub dof_kind: Vec<DofKind>,
    pub free_of_dof: Vec<Option<usize>>,
    pub dof_of_free: Vec<usize>,
    /// free indices at interior nodes (the discrete V₀)
    pub interior_free: Vec<usize>,
    pub slip: Vec<SlipDof>,
}

/// Builds the Taylor–Hood DOF map for `m`.
pub fn build_spaces(m: &Mesh) -> DofMap {
    // raw node numbering: vertices, then midpoints in edge-discovery order
    let mut raw: Vec<[f64; 2]> = m.vertices.clone();
    let mut mid_of_edge: HashMap<(usize, usize), usize> = HashMap::new();
    let mut raw_elements = Vec::with_capacity(m.triangles.len());
    for tri in &m.triangles {
        let mut e = [tri[0], tri[1], tri[2], 0, 0, 0];
        for (k, &(i, j)) in quadrature::EDGE_NODES.iter().enumerate() {
            let (a, b) = (tri[i], tri[j]);
            e[3 + k] = *mid_of_edge.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (m.vertices[a], m.vertices[b]);
                raw.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                raw.len() - 1
            });
        }
        raw_elements.push(e);
    }

    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a][1].total_cmp(&raw[b][1]).then(raw[a][0].total_cmp(&raw[b][0])));
    let mut new_of_raw = vec![0; raw.len()];
    for (new, &old) in order.iter().enumerate() {
        new_of_raw[old] = new;
    }
    let nodes: Vec<[f64; 2]> = order.iter().map(|&i| raw[i]).collect();
    let elements: Vec<[usize; 6]> = raw_elements.iter().map(|e| e.map(|v| new_of_raw[v])).collect();
    let node_of_vertex: Vec<usize> = (0..m.vertices.len()).map(|v| new_of_raw[v]).collect();

    let mut vorder: Vec<usize> = (0..m.vertices.len()).collect();
    vorder.sort_by(|&a, &b| {
        let (p, q) = (m.vertices[a], m.vertices[b]);
        p[1].total_cmp(&q[1]).then(p[0].total_cmp(&q[0]))
    });
    let mut pressure_of_vertex = vec![0; m.vertices.len()];
    for (new, &old) in vorder.iter().enumerate() {
        pressure_of_vertex[old] = new;
    }
    let p_elements: Vec<[usize; 3]> = m.triangles.iter().map(|t| t.map(|v| pressure_of_vertex[v])).collect();

    // boundary membership of every node on a boundary edge
    let n_nodes = nodes.len();
    let mut touches: Vec<Vec<(Side, BoundaryTag)>> = vec![Vec::new(); n_nodes];
    let mut weight = vec![0.0; n_nodes];
    for e in &m.boundary_edges {
        let [a, b] = e.vertices;
        let mid = new_of_raw[mid_of_edge[&(a.min(b), a.max(b))]];
        let (na, nb) = (node_of_vertex[a], node_of_vertex[b]);
        let len = m.edge_length(e);
        for (node, w) in [(na, len / 6.0), (mid, 2.0 * len / 3.0), (nb, len / 6.0)] {
            if !touches[node].contains(&(e.side, e.tag)) {
                touches[node].push((e.side, e.tag));
            }
            if e.tag == BoundaryTag::Slip {
                weight[node] += w;
            }
        }
    }
    let node_kind: Vec<NodeKind> = touches
        .iter()
        .map(|t| {
            if t.is_empty() {
                NodeKind::Interior
            } else if t.iter().any(|(_, tag)| *tag == BoundaryTag::Dirichlet) {
                NodeKind::Dirichlet
            } else if t.len() == 1 {
                NodeKind::Slip { side: t[0].0 }
            } else {
                NodeKind::SlipCorner
            }
        })
        .collect();

    let mut dof_kind = Vec::with_capacity(2 * n_nodes);
    for kind in &node_kind {
        let pair = match kind {
            NodeKind::Interior => [DofKind::Free; 2],
            NodeKind::Dirichlet => [DofKind::DirichletFixed; 2],
            NodeKind::SlipCorner => [DofKind::SlipNormalFixed; 2],
            NodeKind::Slip { side } => match side {
                Side::Bottom | Side::Top => [DofKind::Free, DofKind::SlipNormalFixed],
                Side::Left | Side::Right => [DofKind::SlipNormalFixed, DofKind::Free],
            },
        };
        dof_kind.extend(pair);
    }
    let mut free_of_dof = vec![None; dof_kind.len()];
    let mut dof_of_free = Vec::new();
    for (d, kind) in dof_kind.iter().enumerate() {
        if *kind == DofKind::Free {
            free_of_dof[d] = Some(dof_of_free.len());
            dof_of_free.push(d);
        }
    }
    let interior_free: Vec<usize> = dof_of_free
        .iter()
        .enumerate()
        .filter(|(_, &d)| node_kind[d / 2] == NodeKind::Interior)
        .map(|(f, _)| f)
        .collect();

    let mut slip = Vec::new();
    for (node, kind) in node_kind.iter().enumerate() {
        if let NodeKind::Slip { side } = kind {
            let normal = side.outward_normal();
            let tangent = [-normal[1], normal[0]];
            let comp = if tangent[0] != 0.0 { 0 } else { 1 };
            slip.push(SlipDof {
                node,
                free: free_of_dof[2 * node + comp].expect("tangential slip DOF is free"),
                sign: tangent[comp],
                weight: weight[node],
                normal,
            });
        }
    }

    DofMap {
        nodes,
        node_kind,
        elements,
        p_elements,
        node_of_vertex,
        pressure_of_vertex,
        dof_kind,
        free_of_dof,
        dof_of_free,
        interior_free,
        slip,
    }
}

impl DofMap {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_free(&self) -> usize {
        self.dof_of_free.len()
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure_of_vertex.len()
    }

    pub fn n_slip(&self) -> usize {
        self.slip.len()
    }

    /// Expands a free-DOF vector to nodal velocities (fixed DOFs are zero).
    pub fn nodal_velocity(&self, v: &[f64]) -> Vec<[f64; 2]> {
        let mut out = vec![[0.0; 2]; self.n_nodes()];
        for (f, &d) in self.dof_of_free.iter().enumerate() {
            out[d / 2][d % 2] = v[f];
        }
        out
    }

    /// Samples a vector field at the nodes, keeping only free components.
    pub fn interpolate(&self, field: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        let vals: Vec<[f64; 2]> = self.nodes.iter().map(|&x| field(x)).collect();
        self.dof_of_free.iter().map(|&d| vals[d / 2][d % 2]).collect()
    }
}
