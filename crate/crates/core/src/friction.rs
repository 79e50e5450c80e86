//! Scalar friction potentials ψ acting on the tangential slip.
//!
//! Every law is piecewise C¹ with finitely many breakpoints, so its Clarke
//! subdifferential at ξ is the interval between the one-sided derivatives.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrictionError {
    #[error("invalid parameters for {law}: {reason}")]
    InvalidParameters { law: &'static str, reason: String },
    #[error("step violates per-node convexity condition (theta * alpha_psi = {product} >= 1)")]
    ConvexityViolated { product: f64 },
    #[error("unknown friction law `{0}` (expected quadratic, saturating or slip_weakening)")]
    UnknownLaw(String),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LawKind {
    /// ψ(s) = κ s²/2
    Quadratic { kappa: f64 },
    /// ψ(s) = κ|s|/(1+|s|)
    Saturating { kappa: f64 },
    /// ψ'(s) = sign(s)·max(μ₂, μ₁ − (μ₁−μ₂)|s|/s₀), ∂ψ(0) = [−μ₁, μ₁]
    SlipWeakening { mu1: f64, mu2: f64, s0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionLaw {
    pub kind: LawKind,
    /// relaxed-monotonicity constant used by the solver and the checks
    pub alpha_psi: f64,
    /// growth constant: |η| ≤ c₀(1+|ξ|)
    pub c0: f64,
}

/// Stored α for convex laws, where any positive value is admissible.
pub const CONVEX_ALPHA: f64 = 1e-8;

impl FrictionLaw {
    pub fn quadratic(kappa: f64) -> Result<Self, FrictionError> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return Err(FrictionError::InvalidParameters {
                law: "quadratic",
                reason: format!("kappa = {kappa} must be >= 0"),
            });
        }
        let c0 = if kappa > 0.0 { kappa } else { CONVEX_ALPHA };
        Ok(Self { kind: LawKind::Quadratic { kappa }, alpha_psi: CONVEX_ALPHA, c0 })
    }

    pub fn saturating(kappa: f64) -> Result<Self, FrictionError> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(FrictionError::InvalidParameters {
                law: "saturating",
                reason: format!("kappa = {kappa} must be > 0"),
            });
        }
        Ok(Self { kind: LawKind::Saturating { kappa }, alpha_psi: 2.0 * kappa, c0: kappa })
    }

    pub fn slip_weakening(mu1: f64, mu2: f64, s0: f64) -> Result<Self, FrictionError> {
        if !(mu1.is_finite() && mu2 >= 0.0 && mu1 >= mu2 && s0 > 0.0 && s0.is_finite()) {
            return Err(FrictionError::InvalidParameters {
                law: "slip_weakening",
                reason: format!("need mu1 >= mu2 >= 0 and s0 > 0 (mu1 = {mu1}, mu2 = {mu2}, s0 = {s0})"),
            });
        }
        let alpha = ((mu1 - mu2) / s0).max(CONVEX_ALPHA);
        Ok(Self { kind: LawKind::SlipWeakening { mu1, mu2, s0 }, alpha_psi: alpha, c0: mu1.max(CONVEX_ALPHA) })
    }

    /// Looks a law up by name with its parameters.
    pub fn from_name(name: &str, params: &LawParams) -> Result<Self, FrictionError> {
        match name {
            "quadratic" => Self::quadratic(params.kappa),
            "saturating" => Self::saturating(params.kappa),
            "slip_weakening" => Self::slip_weakening(params.mu1, params.mu2, params.s0),
            other => Err(FrictionError::UnknownLaw(other.to_string())),
        }
    }

    /// Replaces the stored relaxed-monotonicity constant.
    pub fn with_alpha(mut self, alpha_psi: f64) -> Self {
        self.alpha_psi = alpha_psi;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            LawKind::Quadratic { .. } => "quadratic",
            LawKind::Saturating { .. } => "saturating",
            LawKind::SlipWeakening { .. } => "slip_weakening",
        }
    }

    /// True for ψ ≡ 0.
    pub fn is_zero(&self) -> bool {
        matches!(self.kind, LawKind::Quadratic { kappa } if kappa == 0.0)
    }

    pub fn psi(&self, s: f64) -> f64 {
        let a = s.abs();
        match self.kind {
            LawKind::Quadratic { kappa } => 0.5 * kappa * s * s,
            LawKind::Saturating { kappa } => kappa * a / (1.0 + a),
            LawKind::SlipWeakening { mu1, mu2, s0 } => {
                let slope = (mu1 - mu2) / s0;
                if a <= s0 {
                    mu1 * a - 0.5 * slope * a * a
                } else {
                    0.5 * s0 * (mu1 + mu2) + mu2 * (a - s0)
                }
            }
        }
    }

    /// Points where ψ is not differentiable or changes branch.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.kind {
            LawKind::Quadratic { .. } => Vec::new(),
            LawKind::Saturating { .. } => vec![0.0],
            LawKind::SlipWeakening { s0, .. } => vec![-s0, 0.0, s0],
        }
    }

    /// Derivative on the right of `s` (for s > 0 branch) as a function of |s|,
    /// valid away from 0.
    fn derivative_positive(&self, a: f64, right: bool) -> f64 {
        match self.kind {
            LawKind::Quadratic { kappa } => kappa * a,
            LawKind::Saturating { kappa } => kappa / ((1.0 + a) * (1.0 + a)),
            LawKind::SlipWeakening { mu1, mu2, s0 } => {
                if a < s0 || (a == s0 && !right) {
                    mu1 - (mu1 - mu2) * a / s0
                } else {
                    mu2
                }
            }
        }
    }

    /// `(ψ'(ξ−), ψ'(ξ+))`.
    pub fn one_sided_derivatives(&self, xi: f64) -> (f64, f64) {
        if xi > 0.0 {
            (self.derivative_positive(xi, false), self.derivative_positive(xi, true))
        } else if xi < 0.0 {
            // ψ is even: ψ'(ξ±) = −ψ'(|ξ|∓)
            (-self.derivative_positive(-xi, true), -self.derivative_positive(-xi, false))
        } else {
            let r = self.derivative_positive(0.0, true);
            (-r, r)
        }
    }

    /// Clarke subdifferential `[min, max]` at ξ.
    pub fn subdifferential(&self, xi: f64) -> (f64, f64) {
        let (l, r) = self.one_sided_derivatives(xi);
        (l.min(r), l.max(r))
    }

    /// Generalized directional derivative ψ⁰(ξ; η).
    pub fn psi0(&self, xi: f64, eta: f64) -> f64 {
        let (lo, hi) = self.subdifferential(xi);
        (lo * eta).max(hi * eta)
    }

    /// Minimal-absolute-value element of ∂ψ(ξ).
    pub fn select_subgrad(&self, xi: f64) -> f64 {
        let (lo, hi) = self.subdifferential(xi);
        if lo <= 0.0 && hi >= 0.0 {
            0.0
        } else if lo > 0.0 {
            lo
        } else {
            hi
        }
    }

    /// Distance from η to ∂ψ(ξ).
    pub fn inclusion_gap(&self, xi: f64, eta: f64) -> f64 {
        let (lo, hi) = self.subdifferential(xi);
        (lo - eta).max(eta - hi).max(0.0)
    }

    /// Global minimizer of `w ↦ (w−z)²/(2θ) + ψ(w)`.
    pub fn prox(&self, theta: f64, z: f64) -> Result<f64, FrictionError> {
        let product = theta * self.alpha_psi;
        if !(theta > 0.0) || product >= 1.0 {
            return Err(FrictionError::ConvexityViolated { product });
        }
        Ok(self.prox_unchecked(theta, z))
    }

    /// [`prox`](Self::prox) without the convexity precondition; still returns
    /// the best candidate among all branch stationary points.
    pub fn prox_unchecked(&self, theta: f64, z: f64) -> f64 {
        // ψ is even and nondecreasing in |s|: prox is odd in z and the
        // minimizer for z ≥ 0 lies in [0, z]
        if z < 0.0 {
            return -self.prox_unchecked(theta, -z);
        }
        let mut cands: Vec<f64> = self.breakpoints();
        cands.push(0.0);
        match self.kind {
            LawKind::Quadratic { kappa } => cands.push(z / (1.0 + theta * kappa)),
            LawKind::Saturating { kappa } => cands.extend(saturating_stationary(theta, kappa, z)),
            LawKind::SlipWeakening { mu1, mu2, s0 } => {
                let a = (mu1 - mu2) / s0;
                // (w − z)/θ + μ₁ − a w = 0 on (0, s0)
                let denom = 1.0 - theta * a;
                if denom != 0.0 {
                    let w = (z - theta * mu1) / denom;
                    if w > 0.0 && w < s0 {
                        cands.push(w);
                    }
                }
                let w = z - theta * mu2;
                if w >= s0 {
                    cands.push(w);
                }
            }
        }
        let obj = |w: f64| (w - z) * (w - z) / (2.0 * theta) + self.psi(w);
        let mut best = cands[0];
        let mut best_val = obj(best);
        for &w in &cands[1..] {
            let v = obj(w);
            if v < best_val || (v == best_val && w.abs() < best.abs()) {
                best = w;
                best_val = v;
            }
        }
        best
    }

    /// Samples assumptions (iii) growth and (iv) relaxed monotonicity on
    /// `[−radius, radius]`.
    pub fn validate(&self, n_samples: usize, radius: f64) -> ValidationReport {
        validate_law(self, n_samples, radius)
    }
}

/// Stationary points of the saturating prox objective on w > 0: with
/// y = 1 + w they are the roots of y³ − (1+z)y² + θκ = 0 in (1, 1+z).
fn saturating_stationary(theta: f64, kappa: f64, z: f64) -> Vec<f64> {
    if z <= 0.0 {
        return Vec::new();
    }
    let c = theta * kappa;
    let p = |y: f64| y * y * (y - 1.0 - z) + c;
    // p is monotone between its critical points 0 and 2(1+z)/3
    let turn = 2.0 * (1.0 + z) / 3.0;
    let mut edges = vec![1.0];
    if turn > 1.0 && turn < 1.0 + z {
        edges.push(turn);
    }
    edges.push(1.0 + z);
    let mut roots = Vec::new();
    for win in edges.windows(2) {
        let (mut lo, mut hi) = (win[0], win[1]);
        let (plo, phi) = (p(lo), p(hi));
        if plo == 0.0 {
            roots.push(lo - 1.0);
            continue;
        }
        if plo.signum() == phi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if p(mid).signum() == plo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi) - 1.0);
    }
    roots.retain(|w| *w > 0.0);
    roots
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LawParams {
    pub kappa: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub s0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub law: &'static str,
    pub n_points: usize,
    pub radius: f64,
    pub c0: f64,
    pub alpha_psi: f64,
    pub growth_violations: usize,
    pub monotonicity_violations: usize,
    /// min over samples of c₀(1+|ξ|) − |η|
    pub worst_growth_margin: f64,
    /// min over compared pairs of (η₁−η₂)(ξ₁−ξ₂) + α(ξ₁−ξ₂)²
    pub worst_monotonicity_margin: f64,
    /// smallest α for which (iv) holds on the samples
    pub alpha_hat: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.growth_violations == 0 && self.monotonicity_violations == 0
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "law = {}", self.law)?;
        writeln!(f, "n_points = {}", self.n_points)?;
        writeln!(f, "radius = {:e}", self.radius)?;
        writeln!(f, "c0 = {:e}", self.c0)?;
        writeln!(f, "alpha_psi = {:e}", self.alpha_psi)?;
        writeln!(f, "alpha_hat = {:e}", self.alpha_hat)?;
        writeln!(f, "growth_violations = {}", self.growth_violations)?;
        writeln!(f, "monotonicity_violations = {}", self.monotonicity_violations)?;
        writeln!(f, "worst_growth_margin = {:e}", self.worst_growth_margin)?;
        writeln!(f, "worst_monotonicity_margin = {:e}", self.worst_monotonicity_margin)?;
        write!(f, "status = {}", if self.passed() { "pass" } else { "fail" })
    }
}

/// Base-2 radical inverse, the first Halton coordinate.
fn van_der_corput(mut i: u64) -> f64 {
    let mut x = 0.0;
    let mut scale = 0.5;
    while i > 0 {
        if i & 1 == 1 {
            x += scale;
        }
        i >>= 1;
        scale *= 0.5;
    }
    x
}

/// Checks growth at every sample and relaxed monotonicity between
/// neighbouring samples in sorted order. For scalar graphs the pairwise
/// condition over all pairs holds iff it holds for neighbours (the map
/// ξ ↦ ∂ψ(ξ) + αξ must be monotone), and the tightest α over all pairs is
/// attained by a neighbouring pair.
pub fn validate_law(law: &FrictionLaw, n_samples: usize, radius: f64) -> ValidationReport {
    let mut xs: Vec<f64> = (1..=n_samples as u64).map(|i| radius * (2.0 * van_der_corput(i) - 1.0)).collect();
    xs.extend(law.breakpoints().into_iter().filter(|b| b.abs() <= radius));
    xs.extend([-radius, 0.0, radius]);
    xs.sort_by(f64::total_cmp);
    xs.dedup();

    let mut growth_violations = 0;
    let mut worst_growth = f64::INFINITY;
    let subs: Vec<(f64, f64)> = xs.iter().map(|&x| law.subdifferential(x)).collect();
    for (&x, &(lo, hi)) in xs.iter().zip(&subs) {
        let bound = law.c0 * (1.0 + x.abs());
        let margin = bound - lo.abs().max(hi.abs());
        worst_growth = worst_growth.min(margin);
        if margin < -1e-12 * bound {
            growth_violations += 1;
        }
    }

    let alpha = law.alpha_psi;
    let mut monotonicity_violations = 0;
    let mut worst_mono = f64::INFINITY;
    let mut alpha_hat = 0.0f64;
    for i in 0..xs.len().saturating_sub(1) {
        let dx = xs[i + 1] - xs[i];
        // worst endpoints: largest η at the left point, smallest at the right
        let deta = subs[i + 1].0 - subs[i].1;
        let margin = deta * dx + alpha * dx * dx;
        worst_mono = worst_mono.min(margin);
        let scale = (subs[i + 1].0.abs() + subs[i].1.abs() + alpha * dx) * dx;
        if margin < -1e-12 * scale.max(f64::MIN_POSITIVE) {
            monotonicity_violations += 1;
        }
        alpha_hat = alpha_hat.max(-deta / dx);
    }

    ValidationReport {
        law: law.name(),
        n_points: xs.len(),
        radius,
        c0: law.c0,
        alpha_psi: alpha,
        growth_violations,
        monotonicity_violations,
        worst_growth_margin: worst_growth,
        worst_monotonicity_margin: worst_mono,
        alpha_hat,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l3() -> FrictionLaw {
        FrictionLaw::slip_weakening(1.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn psi0_examples() {
        let l1 = FrictionLaw::quadratic(1.5).unwrap();
        assert_eq!(l1.psi0(2.0, 3.0), 1.5 * 2.0 * 3.0);
        assert_eq!(l3().psi0(0.0, 1.0), 1.0);
    }

    #[test]
    fn subgradient_examples() {
        assert_eq!(FrictionLaw::quadratic(2.5).unwrap().select_subgrad(1.0), 2.5);
        assert_eq!(l3().select_subgrad(0.0), 0.0);
        assert!((l3().select_subgrad(1.0) - 0.2).abs() < 1e-15);
        assert!((l3().select_subgrad(-1.0) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn prox_examples() {
        let l1 = FrictionLaw::quadratic(3.0).unwrap();
        assert!((l1.prox(0.5, 2.0).unwrap() - 2.0 / 2.5).abs() < 1e-15);
        assert_eq!(l3().prox(0.1, 0.0).unwrap(), 0.0);
        assert_eq!(FrictionLaw::saturating(1.0).unwrap().prox(0.1, 0.0).unwrap(), 0.0);
        // inside the stick zone |z| ≤ θμ₁ the prox is 0
        assert_eq!(l3().prox(0.1, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn prox_rejects_nonconvex_steps() {
        let err = l3().prox(2.0, 1.0).unwrap_err();
        assert!(err.to_string().starts_with("step violates per-node convexity condition"));
    }

    #[test]
    fn continuity_of_slip_weakening() {
        let law = l3();
        let s0 = 1.0;
        assert!((law.psi(s0 - 1e-12) - law.psi(s0 + 1e-12)).abs() < 1e-11);
    }

    #[test]
    fn saturating_constants() {
        let law = FrictionLaw::saturating(2.0).unwrap();
        assert_eq!(law.subdifferential(0.0), (-2.0, 2.0));
        let r = law.validate(2000, 5.0);
        assert!(r.passed(), "{r}");
        assert!(r.alpha_hat <= law.alpha_psi && r.alpha_hat > 0.9 * law.alpha_psi);
    }

    #[test]
    fn validator_negative_control() {
        let r = l3().with_alpha(0.4).validate(1000, 3.0);
        assert!(!r.passed());
        assert!((r.alpha_hat - 0.8).abs() < 1e-9);
    }

    #[test]
    fn from_name_rejects_unknown() {
        let e = FrictionLaw::from_name("coulomb", &LawParams::default()).unwrap_err();
        assert!(matches!(e, FrictionError::UnknownLaw(_)));
    }
}
