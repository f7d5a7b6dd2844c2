//! Finite-difference operators on the colatitude grid.
//!
//! Derivatives use the fourth-order centered stencils
//! `(1, -8, 0, 8, -1)/(12h)` and `(-1, 16, -30, 16, -1)/(12h²)`. The two ghost
//! layers beyond each pole are folded back onto the grid by the parity of the
//! separated field: a smooth field of order `m` satisfies
//! `ψ(-θ) = (-1)^m ψ(θ)` and `ψ(π + θ) = (-1)^m ψ(π - θ)`. Even parity enforces
//! `Γ₀ = (ψ', ψ''')` at the poles, odd parity enforces `Γ₁ = (ψ, ψ'')`, and for
//! `|m| ≥ 2` the `m²/sin²θ` term of `Δ_m` pins `ψ` and `ψ'` to zero.
//!
//! `Δ_m` is discretized through the even quotient `χ = ψ/sin^{|m|}θ`:
//!
//! `Δ_m ψ = sin^{|m|}θ [χ'' + (2|m|+1) cotθ χ' − |m|(|m|+1) χ] / r²`.
//!
//! Differentiating `ψ` directly leaves an `O(h⁴)` error at the rows next to a
//! pole that does not vanish like `θ^{|m|}`; `cotθ ~ 2/h` (odd `m`) or the
//! `m²/sin²θ` term of a second application (`|m| ≥ 2`) then amplifies it to
//! `O(h³)` or `O(h²)`. With the quotient form the error carries the factor
//! `sin^{|m|}θ` and both `Δ_m` and `Δ_m²` stay fourth-order accurate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField};

const D1_STENCIL: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
const D2_STENCIL: [f64; 5] = [
    -1.0 / 12.0,
    16.0 / 12.0,
    -30.0 / 12.0,
    16.0 / 12.0,
    -1.0 / 12.0,
];

/// Nodes used by the one-sided pole extrapolation in [`Stencils::boundary_trace`].
const TRACE_NODES: usize = 7;

/// Reflection symmetry of a separated field across the poles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(m: i32) -> Self {
        if m.rem_euclid(2) == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

/// Order of a Sobolev norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sobolev {
    L2,
    H1,
    H2,
}

impl FromStr for Sobolev {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L2" => Ok(Sobolev::L2),
            "H1" => Ok(Sobolev::H1),
            "H2" => Ok(Sobolev::H2),
            other => Err(Error::Usage(format!("unknown Sobolev order '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevNorm {
    pub value: f64,
    /// Set when an `m = 0` field with a nonzero weighted mean was measured in a
    /// seminorm (`H1`, `H2`), which then misses the constant component.
    pub nonzero_mean: bool,
}

/// The `Γ_m` quantities extrapolated to each pole.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTrace {
    /// Derivative orders reported, e.g. `[0, 1]` for `|m| ≥ 2`.
    pub orders: [usize; 2],
    pub north: [Complex64; 2],
    pub south: [Complex64; 2],
}

impl BoundaryTrace {
    pub fn max_abs(&self) -> f64 {
        self.north
            .iter()
            .chain(&self.south)
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }
}

/// Derivative orders of the `Γ_m` conditions.
pub fn boundary_orders(m: i32) -> [usize; 2] {
    match m.unsigned_abs() {
        0 => [1, 3],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Finite-difference weights for derivatives `0..=max_order` at `x0` on `xs`
/// (Fornberg's recursion). Returns `w[k][j]`.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let np = xs.len();
    let mut c = vec![vec![0.0; np]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..np {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Derivative stencils and the separated Laplacian `Δ_m` on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Stencils {
    grid: Grid,
    cot: Vec<f64>,
}

impl Stencils {
    pub fn new(grid: &Grid) -> Self {
        let cot = grid
            .sin()
            .iter()
            .zip(grid.cos())
            .map(|(s, c)| c / s)
            .collect();
        Self {
            grid: grid.clone(),
            cot,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cot(&self) -> &[f64] {
        &self.cot
    }

    /// Band matrix of a five-point stencil whose row `j` is `scale[j]·stencil`,
    /// with ghost columns folded back by `parity`.
    fn stencil_matrix(&self, stencil: &[f64; 5], scale: &[f64], parity: Parity) -> BandMatrix<f64> {
        self.stencil_matrix_with(stencil, scale, parity, |_| 1.0)
    }

    /// As [`Self::stencil_matrix`], with the stencil acting on `column(θ)·ψ(θ)`;
    /// `column` is evaluated at ghost positions before folding.
    fn stencil_matrix_with(
        &self,
        stencil: &[f64; 5],
        scale: &[f64],
        parity: Parity,
        column: impl Fn(f64) -> f64,
    ) -> BandMatrix<f64> {
        let n = self.grid.n();
        let h = self.grid.spacing();
        let sign = parity.sign();
        let mut a = BandMatrix::zeros(n, 2, 2);
        for j in 0..n {
            for (o, &c) in stencil.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let t = j as isize + o as isize - 2;
                let (col, s) = fold(t, n, sign);
                let theta = (t as f64 + 0.5) * h;
                a.add_to(j, col, s * c * scale[j] * column(theta));
            }
        }
        a
    }

    /// `d/dθ` for fields of the given parity.
    pub fn d1_matrix(&self, parity: Parity) -> BandMatrix<f64> {
        let h = self.grid.spacing();
        self.stencil_matrix(&D1_STENCIL, &vec![1.0 / h; self.grid.n()], parity)
    }

    /// `d²/dθ²` for fields of the given parity.
    pub fn d2_matrix(&self, parity: Parity) -> BandMatrix<f64> {
        let h = self.grid.spacing();
        self.stencil_matrix(&D2_STENCIL, &vec![1.0 / (h * h); self.grid.n()], parity)
    }

    /// `Δ_m = (1/r²)[d²/dθ² + cotθ d/dθ − m²/sin²θ]` with the order-`m` closure.
    pub fn laplacian(&self, m: i32) -> BandMatrix<f64> {
        let parity = Parity::of(m);
        let k = m.unsigned_abs() as i32;
        let r2 = self.grid.radius().powi(2);
        let h = self.grid.spacing();
        let sin = self.grid.sin();
        let sk: Vec<f64> = sin.iter().map(|s| s.powi(k)).collect();
        let quotient = |t: f64| 1.0 / t.sin().powi(k);
        let d2_scale: Vec<f64> = sk.iter().map(|s| s / (h * h * r2)).collect();
        let d2 = self.stencil_matrix_with(&D2_STENCIL, &d2_scale, parity, quotient);
        let d1_scale: Vec<f64> = sk
            .iter()
            .zip(&self.cot)
            .map(|(s, c)| (2 * k + 1) as f64 * c * s / (h * r2))
            .collect();
        let d1 = self.stencil_matrix_with(&D1_STENCIL, &d1_scale, parity, quotient);
        let diag = vec![-((k * (k + 1)) as f64) / r2; self.grid.n()];
        d2.add(&d1).add(&BandMatrix::diagonal(&diag))
    }

    /// `Δ_m²` as the composition of two closed Laplacians.
    pub fn bilaplacian(&self, m: i32) -> BandMatrix<f64> {
        let lap = self.laplacian(m);
        lap.matmul(&lap)
    }

    /// `Ω ↦ α_Ω = (Ω'' + 3Ω' cotθ − 2Ω)/r²` on even (`m = 0`) profiles.
    pub fn alpha_map(&self) -> BandMatrix<f64> {
        let r2 = self.grid.radius().powi(2);
        let h = self.grid.spacing();
        let n = self.grid.n();
        let d2 = self.stencil_matrix(&D2_STENCIL, &vec![1.0 / (h * h * r2); n], Parity::Even);
        let scaled_cot: Vec<f64> = self.cot.iter().map(|c| 3.0 * c / (h * r2)).collect();
        let d1 = self.stencil_matrix(&D1_STENCIL, &scaled_cot, Parity::Even);
        d2.add(&d1).add(&BandMatrix::diagonal(&vec![-2.0 / r2; n]))
    }

    /// `q ↦ (q'' − q' cotθ)/r²`, the formal adjoint of [`Self::alpha_map`] in
    /// the weighted inner product.
    pub fn alpha_adjoint_map(&self) -> BandMatrix<f64> {
        let r2 = self.grid.radius().powi(2);
        let h = self.grid.spacing();
        let n = self.grid.n();
        let d2 = self.stencil_matrix(&D2_STENCIL, &vec![1.0 / (h * h * r2); n], Parity::Even);
        let scaled_cot: Vec<f64> = self.cot.iter().map(|c| -c / (h * r2)).collect();
        d2.add(&self.stencil_matrix(&D1_STENCIL, &scaled_cot, Parity::Even))
    }

    pub fn d1_real(&self, f: &ScalarField) -> ScalarField {
        ScalarField::new(self.d1_matrix(Parity::Even).matvec(&f.values))
    }

    pub fn d2_real(&self, f: &ScalarField) -> ScalarField {
        ScalarField::new(self.d2_matrix(Parity::Even).matvec(&f.values))
    }

    fn check(&self, psi: &ComplexField) -> Result<()> {
        if psi.len() != self.grid.n() {
            return Err(Error::Usage(format!(
                "field has length {}, grid has {} nodes",
                psi.len(),
                self.grid.n()
            )));
        }
        Ok(())
    }

    pub fn apply_delta_m(&self, m: i32, psi: &ComplexField) -> Result<ComplexField> {
        self.check(psi)?;
        if psi.m != m {
            return Err(Error::Usage(format!(
                "Δ_m with m = {m} applied to field of order {}",
                psi.m
            )));
        }
        Ok(ComplexField::new(
            m,
            apply_real(&self.laplacian(m), &psi.values),
        ))
    }

    pub fn apply_bilaplacian_m(&self, m: i32, psi: &ComplexField) -> Result<ComplexField> {
        let once = self.apply_delta_m(m, psi)?;
        self.apply_delta_m(m, &once)
    }

    /// One-sided extrapolation of the `Γ_m` quantities to `θ = 0` and `θ = π`.
    pub fn boundary_trace(&self, m: i32, psi: &ComplexField) -> Result<BoundaryTrace> {
        self.check(psi)?;
        let orders = boundary_orders(m);
        let nodes = self.grid.nodes();
        let n = nodes.len();
        let north_w = fd_weights(0.0, &nodes[..TRACE_NODES], 3);
        let south_idx: Vec<usize> = (n - TRACE_NODES..n).rev().collect();
        let south_x: Vec<f64> = south_idx.iter().map(|&j| nodes[j]).collect();
        let south_w = fd_weights(std::f64::consts::PI, &south_x, 3);
        let eval = |w: &[f64], idx: &mut dyn Iterator<Item = usize>| -> Complex64 {
            idx.zip(w).map(|(j, c)| psi.values[j] * *c).sum()
        };
        let mut north = [Complex64::new(0.0, 0.0); 2];
        let mut south = north;
        for (slot, &k) in orders.iter().enumerate() {
            north[slot] = eval(&north_w[k], &mut (0..TRACE_NODES));
            south[slot] = eval(&south_w[k], &mut south_idx.iter().copied());
        }
        Ok(BoundaryTrace {
            orders,
            north,
            south,
        })
    }

    /// `L2`: weighted 2-norm; `H1`: norm of the surface gradient; `H2`: `‖Δ_m ψ‖`.
    pub fn norm_sobolev(&self, psi: &ComplexField, order: Sobolev) -> Result<SobolevNorm> {
        self.check(psi)?;
        let grid = &self.grid;
        let nonzero_mean = order != Sobolev::L2 && psi.m == 0 && {
            let one = ComplexField::from_real(0, &vec![1.0; grid.n()]);
            let mean = grid.inner_product(psi, &one)?.norm() / grid.area();
            mean > 1e-8 * (psi.max_abs() + f64::MIN_POSITIVE)
        };
        let value = match order {
            Sobolev::L2 => grid.norm_l2(psi),
            Sobolev::H1 => {
                let r = grid.radius();
                let d = apply_real(&self.d1_matrix(Parity::of(psi.m)), &psi.values);
                let m = psi.m as f64;
                d.iter()
                    .zip(&psi.values)
                    .zip(grid.sin())
                    .zip(grid.weights())
                    .map(|(((dp, p), s), w)| {
                        ((dp / r).norm_sqr() + (p * m / (r * s)).norm_sqr()) * w
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            Sobolev::H2 => grid.norm_l2(&self.apply_delta_m(psi.m, psi)?),
        };
        Ok(SobolevNorm {
            value,
            nonzero_mean,
        })
    }
}

/// Maps a possibly ghost index `t` back onto `0..n` with the parity sign.
fn fold(t: isize, n: usize, sign: f64) -> (usize, f64) {
    let n = n as isize;
    if t < 0 {
        ((-1 - t) as usize, sign)
    } else if t >= n {
        ((2 * n - 1 - t) as usize, sign)
    } else {
        (t as usize, 1.0)
    }
}

/// Real band matrix applied to a complex vector.
pub fn apply_real(a: &BandMatrix<f64>, x: &[Complex64]) -> Vec<Complex64> {
    (0..a.n())
        .map(|i| {
            a.row_columns(i)
                .fold(Complex64::new(0.0, 0.0), |acc, j| acc + x[j] * a.get(i, j))
        })
        .collect()
}
