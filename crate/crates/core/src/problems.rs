//! Analytic test problems `-Δ_s u = f` on the unit sphere.
//!
//! The Heikes-Randall problem has exact solution `u(φ, θ) = cos θ cos⁴ φ`
//! (latitude `φ`, longitude `θ`). Expanding the geographic form of the
//! Laplace-Beltrami operator,
//!
//! ```text
//! Δ_s u = (1/cos²φ) ∂²_θ u + (1/cos φ) ∂_φ(cos φ ∂_φ u)
//!       = cos θ cos²φ (15 - 20 cos²φ)
//! ```
//!
//! so `f = cos θ cos²φ (20 cos²φ - 15)`. With `ρ = cos φ = √(x₁² + x₂²)` and
//! `x₁ = cos φ cos θ` the fields are evaluated in Cartesian form,
//! `u = x₁ ρ³` and `f = x₁ ρ (20 ρ² - 15)`, which is regular at the poles.

use nalgebra::Vector3;

use crate::dual::SphericalMesh;
use crate::geometry::{tangential, UnitVector};
use crate::metrics::integrate;
use crate::quadrature::QuadratureRule;

pub type ScalarField = fn(&UnitVector) -> f64;
pub type VectorField = fn(&UnitVector) -> Vector3<f64>;

#[derive(Clone, Copy, Debug)]
pub struct TestProblem {
    pub name: &'static str,
    /// Exact solution.
    pub u: ScalarField,
    /// Exact tangential gradient of `u`.
    pub grad_u: VectorField,
    /// Forcing, `-Δ_s u`.
    pub f: ScalarField,
}

/// Numerical check of the solvability and zero-mean conditions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompatibilityCertificate {
    /// `∫ f ds`.
    pub source_integral: f64,
    /// `∫ u ds`.
    pub solution_integral: f64,
}

impl CompatibilityCertificate {
    pub fn holds(&self, tol: f64) -> bool {
        self.source_integral.abs() <= tol && self.solution_integral.abs() <= tol
    }
}

impl TestProblem {
    pub fn by_name(name: &str) -> Option<TestProblem> {
        match name {
            "heikes" => Some(heikes_problem()),
            "constant" => Some(constant_problem()),
            _ => None,
        }
    }

    pub fn names() -> &'static [&'static str] {
        &["heikes", "constant"]
    }

    pub fn compatibility(&self, mesh: &SphericalMesh, rule: &QuadratureRule) -> CompatibilityCertificate {
        CompatibilityCertificate {
            source_integral: integrate(mesh, rule, self.f),
            solution_integral: integrate(mesh, rule, self.u),
        }
    }
}

fn heikes_u(x: &UnitVector) -> f64 {
    let rho = x.x1().hypot(x.x2());
    x.x1() * rho * rho * rho
}

fn heikes_f(x: &UnitVector) -> f64 {
    let rho = x.x1().hypot(x.x2());
    x.x1() * rho * (20.0 * rho * rho - 15.0)
}

fn heikes_grad(x: &UnitVector) -> Vector3<f64> {
    // ambient gradient of the extension x₁ (x₁² + x₂²)^{3/2}, projected to the tangent plane
    let (x1, x2) = (x.x1(), x.x2());
    let rho = x1.hypot(x2);
    let ambient = Vector3::new(rho * rho * rho + 3.0 * x1 * x1 * rho, 3.0 * x1 * x2 * rho, 0.0);
    tangential(x, &ambient)
}

pub fn heikes_problem() -> TestProblem {
    TestProblem { name: "heikes", u: heikes_u, grad_u: heikes_grad, f: heikes_f }
}

/// `u ≡ 0`, `f ≡ 0`.
pub fn constant_problem() -> TestProblem {
    TestProblem { name: "constant", u: |_| 0.0, grad_u: |_| Vector3::zeros(), f: |_| 0.0 }
}
