//! Closed-form functions `Σ c_{ab} sin^a θ cos^b θ` with exact derivatives.
//!
//! Used to build manufactured solutions and their sources without touching
//! the finite-difference stencils.

use std::collections::BTreeMap;

/// Finite sum of `c·sin^a θ·cos^b θ`; `a` may be negative away from the poles.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trig {
    terms: BTreeMap<(i32, u32), f64>,
}

impl Trig {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(c: f64, sin_power: i32, cos_power: u32) -> Self {
        let mut t = Self::zero();
        t.push(c, sin_power, cos_power);
        t
    }

    pub fn constant(c: f64) -> Self {
        Self::monomial(c, 0, 0)
    }

    /// `sin^p θ · Σ_k q_k cos^k θ`.
    pub fn sin_power_times_poly(p: i32, q: &[f64]) -> Self {
        let mut t = Self::zero();
        for (k, &c) in q.iter().enumerate() {
            t.push(c, p, k as u32);
        }
        t
    }

    fn push(&mut self, c: f64, a: i32, b: u32) {
        if c == 0.0 {
            return;
        }
        let e = self.terms.entry((a, b)).or_insert(0.0);
        *e += c;
        if *e == 0.0 {
            self.terms.remove(&(a, b));
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (s, c) = theta.sin_cos();
        self.terms
            .iter()
            .map(|(&(a, b), &k)| k * s.powi(a) * c.powi(b as i32))
            .sum()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(a, b), &c) in &other.terms {
            out.push(c, a, b);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            out.push(c * s, a, b);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(a1, b1), &c1) in &self.terms {
            for (&(a2, b2), &c2) in &other.terms {
                out.push(c1 * c2, a1 + a2, b1 + b2);
            }
        }
        out
    }

    /// Multiplies by `sin^a θ cos^b θ`.
    pub fn shift(&self, a: i32, b: u32) -> Self {
        self.mul(&Self::monomial(1.0, a, b))
    }

    /// `d/dθ`.
    pub fn derivative(&self) -> Self {
        let mut out = Self::zero();
        for (&(a, b), &c) in &self.terms {
            if a != 0 {
                out.push(c * a as f64, a - 1, b + 1);
            }
            if b != 0 {
                out.push(-c * b as f64, a + 1, b - 1);
            }
        }
        out
    }

    pub fn derivative_n(&self, k: usize) -> Self {
        (0..k).fold(self.clone(), |f, _| f.derivative())
    }

    /// `Δ_m f = (f'' + cotθ f' − m² f/sin²θ)/r²`.
    pub fn delta_m(&self, m: i32, r: f64) -> Self {
        let d1 = self.derivative();
        d1.derivative()
            .add(&d1.shift(-1, 1))
            .add(&self.shift(-2, 0).scale(-f64::from(m * m)))
            .scale(1.0 / (r * r))
    }

    /// `α_Ω = (Ω'' + 3Ω' cotθ − 2Ω)/r²`.
    pub fn alpha(&self, r: f64) -> Self {
        let d1 = self.derivative();
        d1.derivative()
            .add(&d1.shift(-1, 1).scale(3.0))
            .add(&self.scale(-2.0))
            .scale(1.0 / (r * r))
    }

    /// `(1/(r² sinθ)) d/dθ[(1/sinθ) d/dθ(Ω sin²θ)]`, the nested form of `α_Ω`.
    pub fn alpha_nested(&self, r: f64) -> Self {
        self.shift(2, 0)
            .derivative()
            .shift(-1, 0)
            .derivative()
            .shift(-1, 0)
            .scale(1.0 / (r * r))
    }

    pub fn sample(&self, nodes: &[f64]) -> Vec<f64> {
        nodes.iter().map(|&t| self.eval(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn derivative_matches_central_difference() {
        let f = Trig::sin_power_times_poly(3, &[1.0, 0.3, -0.5]);
        let d = f.derivative();
        for &t in &[0.3, 1.1, 2.7] {
            let h = 1e-5;
            let fd = (f.eval(t + h) - f.eval(t - h)) / (2.0 * h);
            assert!(close(d.eval(t), fd, 1e-8));
        }
    }

    #[test]
    fn legendre_eigenfunctions() {
        // P₂² ∝ sin²θ, P₃¹ ∝ sinθ(5cos²θ − 1), P₄⁰ ∝ 35cos⁴ − 30cos² + 3.
        let cases = [
            (2, 2, Trig::sin_power_times_poly(2, &[1.0])),
            (1, 3, Trig::sin_power_times_poly(1, &[-1.0, 0.0, 5.0])),
            (
                0,
                4,
                Trig::sin_power_times_poly(0, &[3.0, 0.0, -30.0, 0.0, 35.0]),
            ),
        ];
        for (m, l, f) in cases {
            let lam = -((l * (l + 1)) as f64) / 4.0;
            let g = f.delta_m(m, 2.0);
            for &t in &[0.2, 0.9, 1.7, 3.0] {
                assert!(close(g.eval(t), lam * f.eval(t), 1e-12), "m={m} l={l}");
            }
        }
    }

    #[test]
    fn alpha_forms_agree() {
        let omega = Trig::sin_power_times_poly(0, &[0.2, -0.1, 0.4, 0.3]);
        let (a, b) = (omega.alpha(1.3), omega.alpha_nested(1.3));
        for k in 1..20 {
            let t = k as f64 * PI / 20.0;
            assert!(close(a.eval(t), b.eval(t), 1e-12));
        }
        assert!(close(Trig::constant(0.7).alpha(1.0).eval(0.4), -1.4, 1e-15));
    }

    #[test]
    fn cancellation_removes_terms() {
        let f = Trig::monomial(1.0, 2, 0).add(&Trig::monomial(-1.0, 2, 0));
        assert!(f.is_zero());
    }
}
