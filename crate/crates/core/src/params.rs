use crate::error::{invalid, Result};

/// Model constants shared by every solver.
///
/// `epsilon` is the chemical diffusion, `p` the chemotactic exponent, `b` the
/// Dirichlet value of the chemical on the boundary, `m` the total cell mass and
/// `dim` the space dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub epsilon: f64,
    pub p: f64,
    pub b: f64,
    pub m: f64,
    pub dim: usize,
}

impl Params {
    pub fn new(epsilon: f64, p: f64, b: f64, m: f64, dim: usize) -> Result<Self> {
        let params = Self { epsilon, p, b, m, dim };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("epsilon", self.epsilon),
            ("p", self.p),
            ("b", self.b),
            ("m", self.m),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return invalid(format!("{name} must be positive and finite, got {value}"));
            }
        }
        if self.dim == 0 {
            return invalid("dimension must be at least 1");
        }
        Ok(())
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_m(mut self, m: f64) -> Self {
        self.m = m;
        self
    }
}

/// Surface area of the unit sphere in R^n.
///
/// For n = 1 the radial problem stands for the symmetric interval [-R, R], so
/// the "sphere" is the two endpoints and the value is 2.
pub fn unit_sphere_area(dim: usize) -> f64 {
    use std::f64::consts::PI;
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        // ω_n = 2 π^{n/2} / Γ(n/2), via the recursion ω_{n+2} = 2π ω_n / n.
        n => 2.0 * PI * unit_sphere_area(n - 2) / (n - 2) as f64,
    }
}

/// Volume of the ball of radius `radius` in R^n.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    unit_sphere_area(dim) * radius.powi(dim as i32) / dim as f64
}

/// Converged steady state `(W, U)` with the constants of the nonlocal problem.
///
/// `amplitude` is `m / ∫W^p`, `lambda_eps` its reciprocal and `sigma` the
/// effective diffusion `ε / amplitude` of the local problem that `w` solves.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState<F> {
    pub w: F,
    pub u: F,
    pub amplitude: f64,
    pub lambda_eps: f64,
    pub sigma: f64,
}
