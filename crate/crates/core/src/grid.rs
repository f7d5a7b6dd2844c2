//! Cell-centered colatitude grid and the field types living on it.
//!
//! Nodes sit at `θ_j = (j + 1/2)·h` with `h = π/n`, so no node touches a pole and
//! `1/sinθ` is finite everywhere on the grid. Quadrature weights are
//! `w_j = r²·s_n(θ_j)·h`, where `s_n` is the Fourier series of `|sinθ|`
//! truncated at `cos(2kθ)`, `2k ≤ n` (Fejér's first rule). The azimuthal `2π`
//! factor is omitted everywhere.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Smallest grid the fourth-order stencils and the one-sided boundary
/// extrapolation can support.
pub const MIN_NODES: usize = 16;

/// Fejér first-rule weights on cell centers: `∫₀^π f(cosθ) sinθ dθ` is exact
/// for polynomials `f` of degree below `n`.
pub fn fejer_weights(nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let h = PI / n as f64;
    nodes
        .iter()
        .map(|&t| {
            let tail: f64 = (1..=n / 2)
                .map(|k| {
                    let k = k as f64;
                    (2.0 * k * t).cos() / (4.0 * k * k - 1.0)
                })
                .sum();
            h * (2.0 / PI) * (1.0 - 2.0 * tail)
        })
        .collect()
}

/// Cell-centered node positions for `n` cells on `(0, π)`.
pub fn cell_centers(n: usize) -> Vec<f64> {
    let h = PI / n as f64;
    (0..n).map(|j| (j as f64 + 0.5) * h).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    radius: f64,
    spacing: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    sin: Vec<f64>,
    cos: Vec<f64>,
}

impl Grid {
    pub fn new(n: usize, radius: f64) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::Config(format!(
                "grid needs at least {MIN_NODES} nodes, got {n}"
            )));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        let spacing = PI / n as f64;
        let nodes = cell_centers(n);
        let sin: Vec<f64> = nodes.iter().map(|t| t.sin()).collect();
        let cos: Vec<f64> = nodes.iter().map(|t| t.cos()).collect();
        let weights = fejer_weights(&nodes)
            .into_iter()
            .map(|w| radius * radius * w)
            .collect();
        Ok(Self {
            n,
            radius,
            spacing,
            nodes,
            weights,
            sin,
            cos,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    /// Total weight `Σ w_j = 2r²`.
    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Samples a real function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::new(self.nodes.iter().map(|&t| f(t)).collect())
    }

    /// Samples a complex function at the nodes as a field of order `m`.
    pub fn sample_complex(&self, m: i32, f: impl Fn(f64) -> Complex64) -> ComplexField {
        ComplexField::new(m, self.nodes.iter().map(|&t| f(t)).collect())
    }

    fn check_len(&self, len: usize, what: &str) -> Result<()> {
        if len != self.n {
            return Err(Error::Usage(format!(
                "{what} has length {len}, grid has {} nodes",
                self.n
            )));
        }
        Ok(())
    }

    /// Weighted inner product `Σ f_j conj(g_j) w_j`.
    pub fn inner_product(&self, f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
        if f.m != g.m {
            return Err(Error::Usage(format!(
                "inner product of fields with m = {} and m = {}",
                f.m, g.m
            )));
        }
        self.check_len(f.len(), "left field")?;
        self.check_len(g.len(), "right field")?;
        Ok(f.values
            .iter()
            .zip(&g.values)
            .zip(&self.weights)
            .map(|((a, b), w)| a * b.conj() * *w)
            .sum())
    }

    pub fn inner_product_real(&self, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.check_len(f.len(), "left field")?;
        self.check_len(g.len(), "right field")?;
        Ok(dot_weighted(&f.values, &g.values, &self.weights))
    }

    pub fn norm_l2(&self, f: &ComplexField) -> f64 {
        f.values
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a.norm_sqr() * w)
            .sum::<f64>()
            .sqrt()
    }

    pub fn norm_l2_real(&self, f: &ScalarField) -> f64 {
        dot_weighted(&f.values, &f.values, &self.weights).sqrt()
    }

    /// Weighted mean `Σ f_j w_j / Σ w_j`.
    pub fn mean(&self, f: &ScalarField) -> f64 {
        f.values
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| a * w)
            .sum::<f64>()
            / self.area()
    }

    /// Removes the weighted mean.
    pub fn project_mean_zero(&self, f: &ScalarField) -> ScalarField {
        let mean = self.mean(f);
        ScalarField::new(f.values.iter().map(|v| v - mean).collect())
    }
}

pub(crate) fn dot_weighted(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

/// Complex separated field `Ψ̂_m(θ)` of azimuthal order `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub m: i32,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn new(m: i32, values: Vec<Complex64>) -> Self {
        Self { m, values }
    }

    pub fn zeros(m: i32, n: usize) -> Self {
        Self::new(m, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_real(m: i32, values: &[f64]) -> Self {
        Self::new(m, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.m, self.values.iter().map(|v| v * s).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `self - other`; fields of different `m` are rejected.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.m != other.m || self.len() != other.len() {
            return Err(Error::Usage(format!(
                "cannot combine fields (m = {}, len {}) and (m = {}, len {})",
                self.m,
                self.len(),
                other.m,
                other.len()
            )));
        }
        Ok(Self::new(
            self.m,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }
}

/// Real axisymmetric (`m = 0`) latitudinal profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(vec![c; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.values.iter().map(|v| v * s).collect())
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self::new(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_centers_of_four_cells() {
        let nodes = cell_centers(4);
        let expected = [PI / 8.0, 3.0 * PI / 8.0, 5.0 * PI / 8.0, 7.0 * PI / 8.0];
        for (a, b) in nodes.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hundred_point_grid() {
        let g = Grid::new(100, 1.0).unwrap();
        assert_eq!(g.n(), 100);
        assert!((g.spacing() - PI / 100.0).abs() < 1e-16);
        assert!(g.nodes().iter().all(|&t| t > 0.0 && t < PI));
        assert!(g.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn too_small_grid_is_rejected() {
        assert!(matches!(Grid::new(8, 1.0), Err(Error::Config(_))));
        assert!(matches!(Grid::new(32, -1.0), Err(Error::Config(_))));
    }

    #[test]
    fn area_tends_to_two_r_squared() {
        for &r in &[1.0, 2.5] {
            let g = Grid::new(400, r).unwrap();
            let h = g.spacing();
            assert!((g.area() - 2.0 * r * r).abs() < h * h * r * r);
        }
    }

    #[test]
    fn inner_product_of_ones_and_odd_function() {
        let g = Grid::new(200, 1.0).unwrap();
        let one = g.sample_complex(0, |_| Complex64::new(1.0, 0.0));
        let cos = g.sample_complex(0, |t| Complex64::new(t.cos(), 0.0));
        assert!((g.inner_product(&one, &one).unwrap().re - 2.0).abs() < g.spacing().powi(2));
        assert!(g.inner_product(&cos, &one).unwrap().norm() < 1e-14);
    }

    #[test]
    fn inner_product_rejects_mixed_orders() {
        let g = Grid::new(32, 1.0).unwrap();
        let a = ComplexField::zeros(1, 32);
        let b = ComplexField::zeros(2, 32);
        assert!(matches!(g.inner_product(&a, &b), Err(Error::Usage(_))));
        let c = ComplexField::zeros(1, 31);
        assert!(matches!(g.inner_product(&a, &c), Err(Error::Usage(_))));
        assert!(a.sub(&b).is_err());
    }

    #[test]
    fn sin_squared_inner_product_matches_quadrature_oracle() {
        // ∫ sin⁵θ dθ = 16/15; oracle: composite Simpson on a fine mesh.
        let simpson = {
            let k = 20_000;
            let h = PI / k as f64;
            let f = |t: f64| t.sin().powi(5);
            let mut s = f(0.0) + f(PI);
            for i in 1..k {
                let c = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += c * f(i as f64 * h);
            }
            s * h / 3.0
        };
        assert!((simpson - 16.0 / 15.0).abs() < 1e-12);
        for &n in &[16usize, 50, 100] {
            let g = Grid::new(n, 1.0).unwrap();
            let f = g.sample_complex(2, |t| Complex64::new(t.sin().powi(2), 0.0));
            let ip = g.inner_product(&f, &f).unwrap();
            let h = g.spacing();
            assert!((ip.re - simpson).abs() < h * h, "n = {n}: {}", ip.re);
        }
    }

    #[test]
    fn weighted_quadrature_converges_at_second_order_or_better() {
        // Smooth but non-symmetric integrand: ∫ e^θ sinθ dθ = (e^π + 1)/2.
        let exact = (PI.exp() + 1.0) / 2.0;
        let err = |n: usize| {
            let g = Grid::new(n, 1.0).unwrap();
            let f = g.sample(|t| t.exp());
            let one = ScalarField::constant(n, 1.0);
            (g.inner_product_real(&f, &one).unwrap() - exact).abs()
        };
        let order = (err(50) / err(100)).log2();
        assert!(order >= 1.9, "order {order}");
    }
}
