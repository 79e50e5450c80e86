//! Registry of named analytic fields used for initial data and sources.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use super::RotheError;
use crate::fespace::{load_vector, DofMap};

pub const FIELD_NAMES: &[&str] =
    &["zero", "constant", "polynomial", "trig", "indicator", "manufactured_velocity", "manufactured_force"];

/// A field selector as written in a config: a registry name and its
/// parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSpec {
    pub name: String,
    pub params: Vec<f64>,
}

impl FieldSpec {
    pub fn new(name: &str, params: &[f64]) -> Self {
        Self { name: name.to_string(), params: params.to_vec() }
    }

    pub fn zero() -> Self {
        Self::new("zero", &[])
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let p: Vec<String> = self.params.iter().map(|v| v.to_string()).collect();
            write!(f, "({})", p.join(", "))?;
        }
        Ok(())
    }
}

/// Geometry and viscosity that some fields depend on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldContext {
    pub lx: f64,
    pub ly: f64,
    pub mu: f64,
}

/// Divergence-free velocity from the stream function
/// `φ = G(x/Lx) H(y/Ly)` with `G(s) = s²(1−s)²`, `H(s) = s − 3s³ + 2s⁴`,
/// decaying like `e^{−t}`. It vanishes on the left, right and top sides and
/// has zero normal velocity and zero tangential traction on the bottom, so it
/// solves the free-slip problem with a bottom Slip side. The pressure is
/// `cos(πx/Lx) cos(πy/Ly) e^{−t}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Manufactured {
    pub amp: f64,
    pub mu: f64,
    pub lx: f64,
    pub ly: f64,
}

fn g(s: f64) -> [f64; 4] {
    [
        s * s * (1.0 - s) * (1.0 - s),
        2.0 * s - 6.0 * s * s + 4.0 * s * s * s,
        2.0 - 12.0 * s + 12.0 * s * s,
        -12.0 + 24.0 * s,
    ]
}

fn h(s: f64) -> [f64; 4] {
    [
        s - 3.0 * s.powi(3) + 2.0 * s.powi(4),
        1.0 - 9.0 * s * s + 8.0 * s.powi(3),
        -18.0 * s + 24.0 * s * s,
        -18.0 + 48.0 * s,
    ]
}

impl Manufactured {
    fn spatial_velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let (gx, hy) = (g(x[0] / self.lx), h(x[1] / self.ly));
        [gx[0] * hy[1] / self.ly, -gx[1] * hy[0] / self.lx]
    }

    fn spatial_laplacian(&self, x: [f64; 2]) -> [f64; 2] {
        let (gx, hy) = (g(x[0] / self.lx), h(x[1] / self.ly));
        let (lx2, ly2) = (self.lx * self.lx, self.ly * self.ly);
        [(gx[2] * hy[1] / lx2 + gx[0] * hy[3] / ly2) / self.ly, -(gx[3] * hy[0] / lx2 + gx[1] * hy[2] / ly2) / self.lx]
    }

    pub fn velocity(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = self.amp * (-t).exp();
        let u = self.spatial_velocity(x);
        [s * u[0], s * u[1]]
    }

    pub fn pressure(&self, x: [f64; 2], t: f64) -> f64 {
        self.amp * (-t).exp() * (PI * x[0] / self.lx).cos() * (PI * x[1] / self.ly).cos()
    }

    /// `f = u_t − μΔu + ∇p`.
    pub fn forcing(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        let s = self.amp * (-t).exp();
        let u = self.spatial_velocity(x);
        let lap = self.spatial_laplacian(x);
        let (cx, sx) = ((PI * x[0] / self.lx).cos(), (PI * x[0] / self.lx).sin());
        let (cy, sy) = ((PI * x[1] / self.ly).cos(), (PI * x[1] / self.ly).sin());
        let grad_p = [-PI / self.lx * sx * cy, -PI / self.ly * cx * sy];
        [s * (-u[0] - self.mu * lap[0] + grad_p[0]), s * (-u[1] - self.mu * lap[1] + grad_p[1])]
    }
}

/// A resolved analytic vector field `(x, t) ↦ R²`.
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Zero,
    Constant([f64; 2]),
    /// `(a + b t)·(1 − y/Ly, x/Lx)`
    Polynomial {
        a: f64,
        b: f64,
        lx: f64,
        ly: f64,
    },
    /// `a cos(ω t)·(cos(πy/Ly), sin(πx/Lx))`
    Trig {
        a: f64,
        omega: f64,
        lx: f64,
        ly: f64,
    },
    /// `value` on the left half `x < Lx/2`, zero elsewhere
    Indicator {
        value: [f64; 2],
        x_split: f64,
    },
    ManufacturedVelocity(Manufactured),
    ManufacturedForce(Manufactured),
}

impl Field {
    pub fn resolve(spec: &FieldSpec, ctx: FieldContext) -> Result<Self, RotheError> {
        let expected = match spec.name.as_str() {
            "zero" => 0,
            "constant" | "polynomial" | "trig" | "indicator" => 2,
            "manufactured_velocity" | "manufactured_force" => 1,
            other => return Err(RotheError::UnknownField(other.to_string())),
        };
        if spec.params.len() != expected {
            return Err(RotheError::FieldParameters { name: spec.name.clone(), expected, found: spec.params.len() });
        }
        let p = &spec.params;
        let (lx, ly) = (ctx.lx, ctx.ly);
        let mms = || Manufactured { amp: p[0], mu: ctx.mu, lx, ly };
        Ok(match spec.name.as_str() {
            "zero" => Field::Zero,
            "constant" => Field::Constant([p[0], p[1]]),
            "polynomial" => Field::Polynomial { a: p[0], b: p[1], lx, ly },
            "trig" => Field::Trig { a: p[0], omega: p[1], lx, ly },
            "indicator" => Field::Indicator { value: [p[0], p[1]], x_split: 0.5 * lx },
            "manufactured_velocity" => Field::ManufacturedVelocity(mms()),
            _ => Field::ManufacturedForce(mms()),
        })
    }

    pub fn eval(&self, x: [f64; 2], t: f64) -> [f64; 2] {
        match self {
            Field::Zero => [0.0, 0.0],
            Field::Constant(v) => *v,
            Field::Polynomial { a, b, lx, ly } => {
                let s = a + b * t;
                [s * (1.0 - x[1] / ly), s * x[0] / lx]
            }
            Field::Trig { a, omega, lx, ly } => {
                let s = a * (omega * t).cos();
                [s * (PI * x[1] / ly).cos(), s * (PI * x[0] / lx).sin()]
            }
            Field::Indicator { value, x_split } => {
                if x[0] < *x_split {
                    *value
                } else {
                    [0.0, 0.0]
                }
            }
            Field::ManufacturedVelocity(m) => m.velocity(x, t),
            Field::ManufacturedForce(m) => m.forcing(x, t),
        }
    }
}

/// Time-dependent load functional `t ↦ (⟨f(t), φ_i⟩)_i` on the free
/// velocity DOFs.
#[derive(Clone)]
pub struct SourceTerm {
    description: String,
    eval: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
}

impl fmt::Debug for SourceTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceTerm").field("description", &self.description).finish()
    }
}

impl SourceTerm {
    pub fn new(description: impl Into<String>, eval: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self { description: description.into(), eval: Arc::new(eval) }
    }

    pub fn zero(n_free: usize) -> Self {
        Self::new("zero", move |_| vec![0.0; n_free])
    }

    /// Loads a field by quadrature at each requested time.
    pub fn from_field(dm: &DofMap, field: Field, description: impl Into<String>) -> Self {
        if field == Field::Zero {
            let mut s = Self::zero(dm.n_free());
            s.description = description.into();
            return s;
        }
        let dm = Arc::new(dm.clone());
        Self::new(description, move |t| load_vector(&dm, |x| field.eval(x, t)))
    }

    /// Constant-in-time functional.
    pub fn constant(load: Vec<f64>, description: impl Into<String>) -> Self {
        Self::new(description, move |_| load.clone())
    }

    /// `self + scale·other`.
    pub fn plus(&self, scale: f64, other: &SourceTerm) -> Self {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let description = format!("{} + {scale}*({})", self.description, other.description);
        Self::new(description, move |t| {
            let mut v = a(t);
            for (x, y) in v.iter_mut().zip(b(t)) {
                *x += scale * y;
            }
            v
        })
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn load(&self, t: f64) -> Vec<f64> {
        (self.eval)(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> FieldContext {
        FieldContext { lx: 1.0, ly: 1.0, mu: 0.7 }
    }

    #[test]
    fn registry_checks_names_and_arity() {
        assert!(matches!(Field::resolve(&FieldSpec::new("nope", &[]), ctx()), Err(RotheError::UnknownField(_))));
        assert!(matches!(
            Field::resolve(&FieldSpec::new("trig", &[1.0]), ctx()),
            Err(RotheError::FieldParameters { expected: 2, found: 1, .. })
        ));
        for name in FIELD_NAMES {
            let n = match *name {
                "zero" => 0,
                "manufactured_velocity" | "manufactured_force" => 1,
                _ => 2,
            };
            assert!(Field::resolve(&FieldSpec::new(name, &vec![1.0; n]), ctx()).is_ok());
        }
    }

    #[test]
    fn manufactured_velocity_meets_boundary_conditions() {
        let m = Manufactured { amp: 1.0, mu: 1.0, lx: 2.0, ly: 1.5 };
        for i in 0..=10 {
            let s = i as f64 / 10.0;
            for x in [[0.0, 1.5 * s], [2.0, 1.5 * s], [2.0 * s, 1.5]] {
                let u = m.velocity(x, 0.3);
                assert!(u[0].abs() < 1e-15 && u[1].abs() < 1e-15);
            }
            assert!(m.velocity([2.0 * s, 0.0], 0.0)[1].abs() < 1e-15);
        }
    }

    #[test]
    fn manufactured_forcing_matches_finite_differences() {
        let m = Manufactured { amp: 1.3, mu: 0.4, lx: 1.0, ly: 2.0 };
        let (x, t, e) = ([0.37, 0.81], 0.2, 1e-4);
        let u = |x: [f64; 2], t: f64| m.velocity(x, t);
        let mut lap = [0.0; 2];
        for a in 0..2 {
            for d in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += e;
                xm[d] -= e;
                lap[a] += (u(xp, t)[a] - 2.0 * u(x, t)[a] + u(xm, t)[a]) / (e * e);
            }
        }
        let dp = [
            (m.pressure([x[0] + e, x[1]], t) - m.pressure([x[0] - e, x[1]], t)) / (2.0 * e),
            (m.pressure([x[0], x[1] + e], t) - m.pressure([x[0], x[1] - e], t)) / (2.0 * e),
        ];
        let f = m.forcing(x, t);
        for a in 0..2 {
            let ut = (u(x, t + e)[a] - u(x, t - e)[a]) / (2.0 * e);
            let expect = ut - m.mu * lap[a] + dp[a];
            assert!((f[a] - expect).abs() < 1e-5, "{a}: {} vs {expect}", f[a]);
        }
        let div = (u([x[0] + e, x[1]], t)[0] - u([x[0] - e, x[1]], t)[0]) / (2.0 * e)
            + (u([x[0], x[1] + e], t)[1] - u([x[0], x[1] - e], t)[1]) / (2.0 * e);
        assert!(div.abs() < 1e-8);
    }
}
