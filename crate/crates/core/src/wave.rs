//! The separated wave operator
//!
//! `B_m = γΔ_m² + iωΔ_m − imβ_ΩΔ_m + imα_Ω`
//!
//! its adjoint, the rotation-derived coefficients and the well-posedness
//! diagnostics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::band::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField};
use crate::sphere::Stencils;

/// Pivots below this fraction of `‖A‖_∞` are treated as a resonance.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Unknown parameters `(γ, Ω)` and the fixed frame rotation `Ω_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub gamma: f64,
    pub omega: ScalarField,
    pub omega_ref: f64,
}

impl Parameters {
    pub fn new(gamma: f64, omega: ScalarField, omega_ref: f64) -> Self {
        Self {
            gamma,
            omega,
            omega_ref,
        }
    }

    /// `self + s·(dγ, δΩ)`.
    pub fn step(&self, s: f64, dgamma: f64, domega: &ScalarField) -> Self {
        Self {
            gamma: self.gamma + s * dgamma,
            omega: self.omega.axpy(s, domega),
            omega_ref: self.omega_ref,
        }
    }
}

/// Rotation profile with cached `Ω'` and `Ω''`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationProfile {
    pub values: ScalarField,
    pub d1: ScalarField,
    pub d2: ScalarField,
}

impl RotationProfile {
    pub fn new(values: ScalarField, stencils: &Stencils) -> Self {
        let d1 = stencils.d1_real(&values);
        let d2 = stencils.d2_real(&values);
        Self { values, d1, d2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// `α_Ω = (Ω'' + 3Ω' cotθ − 2Ω)/r²`
    pub alpha: ScalarField,
    /// `β_Ω = Ω − Ω_ref`
    pub beta: ScalarField,
    /// `α̃_Ω = Ω' sinθ + 2Ω cosθ`, so that `α_Ω = (1/(r² sinθ)) dα̃_Ω/dθ`.
    pub alpha_tilde: ScalarField,
}

pub fn compute_coefficients(
    omega: &RotationProfile,
    omega_ref: f64,
    stencils: &Stencils,
) -> Coefficients {
    let grid = stencils.grid();
    let r2 = grid.radius().powi(2);
    let v = &omega.values.values;
    let alpha = (0..v.len())
        .map(|j| {
            (omega.d2.values[j] + 3.0 * omega.d1.values[j] * stencils.cot()[j] - 2.0 * v[j]) / r2
        })
        .collect();
    let beta = v.iter().map(|o| o - omega_ref).collect();
    let alpha_tilde = (0..v.len())
        .map(|j| omega.d1.values[j] * grid.sin()[j] + 2.0 * v[j] * grid.cos()[j])
        .collect();
    Coefficients {
        alpha: ScalarField::new(alpha),
        beta: ScalarField::new(beta),
        alpha_tilde: ScalarField::new(alpha_tilde),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Forward,
    Adjoint,
}

/// How the adjoint operator is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjointMode {
    /// `W⁻¹ Bᴴ W`: the exact adjoint of the discrete forward operator with
    /// respect to the weighted inner product.
    #[default]
    Algebraic,
    /// Discretization of `γΔ_m² − iωΔ_m + imΔ_m(β_Ω·) − imα_Ω`.
    Continuous,
}

/// Assembled and factorized band system.
#[derive(Debug, Clone)]
pub struct WaveSystem {
    matrix: BandMatrix<Complex64>,
    m: i32,
    omega_freq: f64,
    role: Role,
    lu: BandLu,
}

impl WaveSystem {
    fn factor(matrix: BandMatrix<Complex64>, m: i32, omega_freq: f64, role: Role) -> Result<Self> {
        let lu = BandLu::factor(&matrix, PIVOT_TOLERANCE).map_err(|e| Error::NearResonance {
            omega: omega_freq,
            m,
            pivot: e.pivot,
            threshold: e.threshold,
        })?;
        Ok(Self {
            matrix,
            m,
            omega_freq,
            role,
            lu,
        })
    }

    pub fn matrix(&self) -> &BandMatrix<Complex64> {
        &self.matrix
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn omega_freq(&self) -> f64 {
        self.omega_freq
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn apply(&self, psi: &ComplexField) -> Result<ComplexField> {
        self.check(psi)?;
        Ok(ComplexField::new(self.m, self.matrix.matvec(&psi.values)))
    }

    pub fn solve(&self, rhs: &ComplexField) -> Result<ComplexField> {
        self.check(rhs)?;
        let mut x = self.lu.solve(&rhs.values);
        // One step of iterative refinement.
        let ax = self.matrix.matvec(&x);
        let r: Vec<Complex64> = rhs.values.iter().zip(&ax).map(|(b, a)| b - a).collect();
        for (xi, di) in x.iter_mut().zip(self.lu.solve(&r)) {
            *xi += di;
        }
        Ok(ComplexField::new(self.m, x))
    }

    /// Inverse-iteration estimate of the smallest singular value of the matrix.
    pub fn smallest_singular_value(&self, iterations: usize) -> Result<f64> {
        let adjoint = BandLu::factor(&self.matrix.conj_transpose(), 0.0).map_err(|e| {
            Error::NearResonance {
                omega: self.omega_freq,
                m: self.m,
                pivot: e.pivot,
                threshold: e.threshold,
            }
        })?;
        let n = self.matrix.n();
        let mut x: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(1.0 + (j as f64 * 0.37).sin(), (j as f64 * 0.11).cos()))
            .collect();
        let mut growth = 0.0;
        for _ in 0..iterations.max(1) {
            let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
            // (AᴴA)⁻¹ x = A⁻¹ A⁻ᴴ x
            let y = adjoint.solve(&x);
            x = self.lu.solve(&y);
            growth = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        }
        Ok(1.0 / growth.sqrt())
    }

    fn check(&self, f: &ComplexField) -> Result<()> {
        if f.m != self.m || f.len() != self.matrix.n() {
            return Err(Error::Usage(format!(
                "field (m = {}, len {}) does not match system (m = {}, n = {})",
                f.m,
                f.len(),
                self.m,
                self.matrix.n()
            )));
        }
        Ok(())
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Config(format!(
            "viscosity must be positive, got {gamma}"
        )));
    }
    Ok(())
}

fn diag_complex(values: &[f64], scale: Complex64) -> BandMatrix<Complex64> {
    let d: Vec<Complex64> = values.iter().map(|&v| scale * v).collect();
    BandMatrix::diagonal(&d)
}

/// Matrix of `B_m(p)` without factorization. Affine in `p`.
pub fn forward_matrix(
    p: &Parameters,
    omega_freq: f64,
    m: i32,
    stencils: &Stencils,
) -> BandMatrix<Complex64> {
    let rot = RotationProfile::new(p.omega.clone(), stencils);
    let coef = compute_coefficients(&rot, p.omega_ref, stencils);
    let lap = stencils.laplacian(m);
    let bilap = lap.matmul(&lap);
    let mm = m as f64;
    // (iω − imβ) Δ_m
    let first: Vec<Complex64> = coef
        .beta
        .values
        .iter()
        .map(|b| I * omega_freq - I * mm * b)
        .collect();
    let lap_term = BandMatrix::diagonal(&first).matmul(&lap.to_complex());
    bilap
        .to_complex()
        .scale(Complex64::new(p.gamma, 0.0))
        .add(&lap_term)
        .add(&diag_complex(&coef.alpha.values, I * mm))
}

pub fn assemble_forward(
    p: &Parameters,
    omega_freq: f64,
    m: i32,
    stencils: &Stencils,
) -> Result<WaveSystem> {
    check_gamma(p.gamma)?;
    check_length(p, stencils.grid())?;
    WaveSystem::factor(
        forward_matrix(p, omega_freq, m, stencils),
        m,
        omega_freq,
        Role::Forward,
    )
}

pub fn adjoint_matrix(
    p: &Parameters,
    omega_freq: f64,
    m: i32,
    stencils: &Stencils,
    mode: AdjointMode,
) -> BandMatrix<Complex64> {
    match mode {
        AdjointMode::Algebraic => {
            let w = stencils.grid().weights();
            let left: Vec<Complex64> = w.iter().map(|&x| Complex64::new(1.0 / x, 0.0)).collect();
            let right: Vec<Complex64> = w.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            forward_matrix(p, omega_freq, m, stencils)
                .conj_transpose()
                .scale_rows_cols(&left, &right)
        }
        AdjointMode::Continuous => {
            let rot = RotationProfile::new(p.omega.clone(), stencils);
            let coef = compute_coefficients(&rot, p.omega_ref, stencils);
            let lap = stencils.laplacian(m).to_complex();
            let mm = m as f64;
            let beta: Vec<Complex64> = coef
                .beta
                .values
                .iter()
                .map(|&b| Complex64::new(b, 0.0))
                .collect();
            let lap_beta = lap.matmul(&BandMatrix::diagonal(&beta)).scale(I * mm);
            lap.matmul(&lap)
                .scale(Complex64::new(p.gamma, 0.0))
                .add(&lap.scale(-I * omega_freq))
                .add(&lap_beta)
                .add(&diag_complex(&coef.alpha.values, -I * mm))
        }
    }
}

pub fn assemble_adjoint(
    p: &Parameters,
    omega_freq: f64,
    m: i32,
    stencils: &Stencils,
    mode: AdjointMode,
) -> Result<WaveSystem> {
    check_gamma(p.gamma)?;
    check_length(p, stencils.grid())?;
    WaveSystem::factor(
        adjoint_matrix(p, omega_freq, m, stencils, mode),
        m,
        omega_freq,
        Role::Adjoint,
    )
}

fn check_length(p: &Parameters, grid: &Grid) -> Result<()> {
    if p.omega.len() != grid.n() {
        return Err(Error::Usage(format!(
            "rotation profile has length {}, grid has {} nodes",
            p.omega.len(),
            grid.n()
        )));
    }
    Ok(())
}

/// `B'(dγ, δΩ)ψ = dγ Δ_m²ψ − im δΩ Δ_mψ + im α_{δΩ} ψ`.
pub fn apply_b_prime(
    dgamma: f64,
    domega: &ScalarField,
    psi: &ComplexField,
    stencils: &Stencils,
    m: i32,
) -> Result<ComplexField> {
    let lap_psi = stencils.apply_delta_m(m, psi)?;
    let bilap_psi = stencils.apply_delta_m(m, &lap_psi)?;
    let alpha = stencils.alpha_map().matvec(&domega.values);
    let mm = m as f64;
    let values = (0..psi.len())
        .map(|j| {
            bilap_psi.values[j] * dgamma - I * mm * domega.values[j] * lap_psi.values[j]
                + I * mm * alpha[j] * psi.values[j]
        })
        .collect();
    Ok(ComplexField::new(m, values))
}

/// Embedding constants entering the well-posedness bounds. None are known in
/// closed form, so all default to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConstants {
    pub h1_to_l6: f64,
    pub h_half_to_l3: f64,
    pub h2_to_l3: f64,
    pub h2_to_linf: f64,
    pub h1_to_l4: f64,
}

impl Default for EmbeddingConstants {
    fn default() -> Self {
        Self {
            h1_to_l6: 1.0,
            h_half_to_l3: 1.0,
            h2_to_l3: 1.0,
            h2_to_linf: 1.0,
            h1_to_l4: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrequencyReport {
    pub omega_abs: f64,
    pub threshold: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallnessReport {
    pub lhs: f64,
    pub gamma: f64,
    pub satisfied: bool,
}

/// `‖f‖²_{H¹} = ‖f‖²_{L²} + ‖∇f‖²_{L²}` for an axisymmetric profile.
pub fn h1_norm_sq(f: &ScalarField, stencils: &Stencils) -> f64 {
    let grid = stencils.grid();
    let d = stencils.d1_real(f);
    let r = grid.radius();
    grid.norm_l2_real(f).powi(2) + grid.norm_l2_real(&d).powi(2) / (r * r)
}

/// Large-frequency invertibility bound:
/// `|ω| > (4/γ³)(C₁C₂)⁴(‖Ω − Ω_ref‖²_{H¹} + 9‖Ω‖²_{H¹})²`.
pub fn frequency_condition(
    p: &Parameters,
    omega_freq: f64,
    constants: &EmbeddingConstants,
    stencils: &Stencils,
) -> FrequencyReport {
    let shifted = ScalarField::new(p.omega.values.iter().map(|o| o - p.omega_ref).collect());
    let sum = h1_norm_sq(&shifted, stencils) + 9.0 * h1_norm_sq(&p.omega, stencils);
    let c = constants.h1_to_l6 * constants.h_half_to_l3;
    let threshold = 4.0 / p.gamma.powi(3) * c.powi(4) * sum * sum;
    FrequencyReport {
        omega_abs: omega_freq.abs(),
        threshold,
        satisfied: omega_freq.abs() > threshold,
    }
}

/// Viscosity-dominance bound: `‖Ω'‖_{L²} (|m|/r) C₃C₁ < γ`.
pub fn smallness_condition(
    p: &Parameters,
    m: i32,
    constants: &EmbeddingConstants,
    stencils: &Stencils,
) -> SmallnessReport {
    let grid = stencils.grid();
    let d = stencils.d1_real(&p.omega);
    let lhs = grid.norm_l2_real(&d) * (m.unsigned_abs() as f64) / grid.radius()
        * constants.h2_to_l3
        * constants.h1_to_l6;
    SmallnessReport {
        lhs,
        gamma: p.gamma,
        satisfied: lhs < p.gamma,
    }
}

/// Smallest singular value of `B_m(p)` along a list of real frequencies.
pub fn resonance_scan(
    p: &Parameters,
    omegas: &[f64],
    m: i32,
    stencils: &Stencils,
) -> Vec<(f64, f64)> {
    omegas
        .iter()
        .map(|&w| {
            let sigma = assemble_forward(p, w, m, stencils)
                .and_then(|sys| sys.smallest_singular_value(30))
                .unwrap_or(0.0);
            (w, sigma)
        })
        .collect()
}

/// Applies `B_m(p)` to a field without factorizing.
pub fn apply_forward(
    p: &Parameters,
    omega_freq: f64,
    psi: &ComplexField,
    stencils: &Stencils,
) -> ComplexField {
    ComplexField::new(
        psi.m,
        forward_matrix(p, omega_freq, psi.m, stencils).matvec(&psi.values),
    )
}
