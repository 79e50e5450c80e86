//! Quadrature and the quadratic Lagrange basis on the reference triangle.

/// Symmetric 6-point rule, exact for polynomials of degree 4. Points are
/// barycentric; weights sum to 1 and are scaled by the triangle area.
pub const TRI6: [([f64; 3], f64); 6] = {
    const A1: f64 = 0.445948490915965;
    const W1: f64 = 0.223381589678011;
    const A2: f64 = 0.091576213509771;
    const W2: f64 = 0.109951743655322;
    [
        ([A1, A1, 1.0 - 2.0 * A1], W1),
        ([A1, 1.0 - 2.0 * A1, A1], W1),
        ([1.0 - 2.0 * A1, A1, A1], W1),
        ([A2, A2, 1.0 - 2.0 * A2], W2),
        ([A2, 1.0 - 2.0 * A2, A2], W2),
        ([1.0 - 2.0 * A2, A2, A2], W2),
    ]
};

/// Local node order of the quadratic element: three vertices, then the
/// midpoints of edges (0,1), (1,2), (2,0).
pub const EDGE_NODES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// Affine triangle geometry.
#[derive(Clone, Copy, Debug)]
pub struct Triangle {
    pub p: [[f64; 2]; 3],
    pub area: f64,
    /// gradients of the barycentric coordinates
    pub grad_l: [[f64; 2]; 3],
}

impl Triangle {
    pub fn new(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let grad_l = [
            [(p[1][1] - p[2][1]) / det, (p[2][0] - p[1][0]) / det],
            [(p[2][1] - p[0][1]) / det, (p[0][0] - p[2][0]) / det],
            [(p[0][1] - p[1][1]) / det, (p[1][0] - p[0][0]) / det],
        ];
        Self { p, area: 0.5 * det, grad_l }
    }

    pub fn point(&self, l: [f64; 3]) -> [f64; 2] {
        [
            l[0] * self.p[0][0] + l[1] * self.p[1][0] + l[2] * self.p[2][0],
            l[0] * self.p[0][1] + l[1] * self.p[1][1] + l[2] * self.p[2][1],
        ]
    }

    /// Quadratic basis values at barycentric point `l`.
    pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    /// Physical gradients of the quadratic basis at `l`.
    pub fn p2_gradients(&self, l: [f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_l;
        let mut out = [[0.0; 2]; 6];
        for i in 0..3 {
            for d in 0..2 {
                out[i][d] = (4.0 * l[i] - 1.0) * g[i][d];
            }
        }
        for (k, &(i, j)) in EDGE_NODES.iter().enumerate() {
            for d in 0..2 {
                out[3 + k][d] = 4.0 * (l[i] * g[j][d] + l[j] * g[i][d]);
            }
        }
        out
    }
}
