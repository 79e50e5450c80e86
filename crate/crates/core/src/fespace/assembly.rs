use super::quadrature::{Triangle, TRI6};
use super::DofMap;
use crate::linalg::{dot, SparseMatrix, TripletBuilder};
use crate::mesh::Mesh;

/// Assembled operators on the free velocity DOFs and the P1 pressure space.
#[derive(Clone, Debug)]
pub struct DiscreteSystem {
    pub dofs: DofMap,
    pub mu: f64,
    /// a(u, v) = 2μ ∫ ε(u):ε(v)
    pub k_a: SparseMatrix,
    /// V inner product ∫ ε(u):ε(v)
    pub k_v: SparseMatrix,
    /// velocity mass (H inner product)
    pub m: SparseMatrix,
    /// n_p × n_free, b(v, q) = ∫ q div v
    pub b: SparseMatrix,
    pub bt: SparseMatrix,
    /// pressure mass (Q inner product)
    pub m_q: SparseMatrix,
    /// n_s × n_free tangential trace at Slip nodes
    pub t: SparseMatrix,
    /// lumped boundary mass per Slip node
    pub m_gamma: Vec<f64>,
    /// ∫ φ_i for each pressure basis function
    pub mean_p: Vec<f64>,
    pub area: f64,
}

struct Local {
    kv: [[f64; 12]; 12],
    m: [[f64; 6]; 6],
    b: [[f64; 12]; 3],
    mq: [[f64; 3]; 3],
    mean: [f64; 3],
}

fn local_matrices(tri: &Triangle) -> Local {
    let mut loc = Local { kv: [[0.0; 12]; 12], m: [[0.0; 6]; 6], b: [[0.0; 12]; 3], mq: [[0.0; 3]; 3], mean: [0.0; 3] };
    for (l, w) in TRI6 {
        let w = w * tri.area;
        let phi = Triangle::p2_values(l);
        let g = tri.p2_gradients(l);
        for i in 0..6 {
            for j in 0..6 {
                loc.m[i][j] += w * phi[i] * phi[j];
                let gg = g[i][0] * g[j][0] + g[i][1] * g[j][1];
                for a in 0..2 {
                    for c in 0..2 {
                        let delta = if a == c { gg } else { 0.0 };
                        loc.kv[2 * i + a][2 * j + c] += w * 0.5 * (delta + g[i][c] * g[j][a]);
                    }
                }
            }
        }
        for (q, lq) in l.iter().enumerate() {
            loc.mean[q] += w * lq;
            for (r, lr) in l.iter().enumerate() {
                loc.mq[q][r] += w * lq * lr;
            }
            for i in 0..6 {
                for a in 0..2 {
                    loc.b[q][2 * i + a] += w * lq * g[i][a];
                }
            }
        }
    }
    loc
}

/// `∫ f·φ_i` over the free velocity DOFs of `dm`.
pub fn load_vector(dm: &DofMap, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; dm.n_free()];
    for nodes in &dm.elements {
        let tri = Triangle::new([0, 1, 2].map(|k| dm.nodes[nodes[k]]));
        for (l, w) in TRI6 {
            let fx = f(tri.point(l));
            let phi = Triangle::p2_values(l);
            for i in 0..6 {
                for a in 0..2 {
                    if let Some(fi) = dm.free_of_dof[2 * nodes[i] + a] {
                        out[fi] += w * tri.area * fx[a] * phi[i];
                    }
                }
            }
        }
    }
    out
}

/// Assembles every operator of the mixed problem with viscosity `mu`.
pub fn assemble(mesh: &Mesh, dm: &DofMap, mu: f64) -> DiscreteSystem {
    assert!(mu > 0.0 && mu.is_finite(), "viscosity must be positive");
    let n_free = dm.n_free();
    let n_p = dm.n_pressure();
    let mut kv = TripletBuilder::with_capacity(n_free, n_free, 144 * mesh.n_triangles());
    let mut mm = TripletBuilder::with_capacity(n_free, n_free, 72 * mesh.n_triangles());
    let mut bb = TripletBuilder::with_capacity(n_p, n_free, 36 * mesh.n_triangles());
    let mut mq = TripletBuilder::with_capacity(n_p, n_p, 9 * mesh.n_triangles());
    let mut mean_p = vec![0.0; n_p];
    let mut area = 0.0;
    for (e, nodes) in dm.elements.iter().enumerate() {
        let tri = Triangle::new([0, 1, 2].map(|k| dm.nodes[nodes[k]]));
        area += tri.area;
        let loc = local_matrices(&tri);
        let free: [Option<usize>; 12] = std::array::from_fn(|k| dm.free_of_dof[2 * nodes[k / 2] + k % 2]);
        for r in 0..12 {
            let Some(fr) = free[r] else { continue };
            for c in 0..12 {
                if let Some(fc) = free[c] {
                    kv.push(fr, fc, loc.kv[r][c]);
                    if r % 2 == c % 2 {
                        mm.push(fr, fc, loc.m[r / 2][c / 2]);
                    }
                }
            }
        }
        let pe = dm.p_elements[e];
        for q in 0..3 {
            mean_p[pe[q]] += loc.mean[q];
            for r in 0..3 {
                mq.push(pe[q], pe[r], loc.mq[q][r]);
            }
            for c in 0..12 {
                if let Some(fc) = free[c] {
                    bb.push(pe[q], fc, loc.b[q][c]);
                }
            }
        }
    }
    let k_v = kv.build_symmetric();
    let k_a = k_v.scaled(2.0 * mu);
    let b = bb.build();
    let bt = b.transpose();
    let mut tb = TripletBuilder::new(dm.n_slip(), n_free);
    for (s, sd) in dm.slip.iter().enumerate() {
        tb.push(s, sd.free, sd.sign);
    }
    DiscreteSystem {
        mu,
        k_a,
        k_v,
        m: mm.build_symmetric(),
        b,
        bt,
        m_q: mq.build_symmetric(),
        t: tb.build(),
        m_gamma: dm.slip.iter().map(|s| s.weight).collect(),
        mean_p,
        area,
        dofs: dm.clone(),
    }
}

impl DiscreteSystem {
    pub fn n_free(&self) -> usize {
        self.k_v.rows()
    }

    pub fn n_pressure(&self) -> usize {
        self.b.rows()
    }

    pub fn n_slip(&self) -> usize {
        self.t.rows()
    }

    /// Nodal tangential values `Tv` on Γ_S.
    pub fn tangential_trace(&self, v: &[f64]) -> Vec<f64> {
        self.t.mul_vec(v)
    }

    /// `Tᵀ diag(M_Γ) w`: the velocity functional of a nodal boundary density.
    pub fn trace_load(&self, w: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = w.iter().zip(&self.m_gamma).map(|(a, b)| a * b).collect();
        self.t.mul_t_vec(&weighted)
    }

    /// `‖w‖²` in the lumped boundary mass.
    pub fn boundary_norm_sq(&self, w: &[f64]) -> f64 {
        w.iter().zip(&self.m_gamma).map(|(a, b)| b * a * a).sum()
    }

    pub fn h_norm_sq(&self, v: &[f64]) -> f64 {
        self.m.quad_form(v)
    }

    pub fn v_norm_sq(&self, v: &[f64]) -> f64 {
        self.k_v.quad_form(v)
    }

    pub fn q_norm_sq(&self, p: &[f64]) -> f64 {
        self.m_q.quad_form(p)
    }

    /// ∫ p over the domain.
    pub fn pressure_integral(&self, p: &[f64]) -> f64 {
        dot(&self.mean_p, p)
    }

    /// Load vector ∫ f·φ for a vector field `f`, on the free DOFs.
    pub fn load_vector(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
        load_vector(&self.dofs, f)
    }

    /// Pressure nodal interpolant of a scalar field.
    pub fn interpolate_pressure(&self, q: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let dm = &self.dofs;
        let mut out = vec![0.0; self.n_pressure()];
        for (v, &p) in dm.pressure_of_vertex.iter().enumerate() {
            out[p] = q(dm.nodes[dm.node_of_vertex[v]]);
        }
        out
    }

    /// `∫ |v_h − u|²` against an exact field.
    pub fn h_error_sq(&self, v: &[f64], exact: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let dm = &self.dofs;
        let nodal = dm.nodal_velocity(v);
        let mut acc = 0.0;
        for nodes in &dm.elements {
            let tri = Triangle::new([0, 1, 2].map(|k| dm.nodes[nodes[k]]));
            for (l, w) in TRI6 {
                let phi = Triangle::p2_values(l);
                let mut vh = [0.0; 2];
                for i in 0..6 {
                    vh[0] += phi[i] * nodal[nodes[i]][0];
                    vh[1] += phi[i] * nodal[nodes[i]][1];
                }
                let u = exact(tri.point(l));
                acc += w * tri.area * ((vh[0] - u[0]).powi(2) + (vh[1] - u[1]).powi(2));
            }
        }
        acc
    }
}
