//! Observation, sensitivities, adjoint-state gradients and the accelerated
//! Landweber reconstruction of `(γ, Ω)`.
//!
//! The rotation is reconstructed modulo its weighted mean: gradients in `Ω`
//! are Riesz representatives in the mean-zero `H¹` or `H²` metric, so the mean
//! of the initial profile is never changed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::band::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField};
use crate::sphere::{apply_real, Parity, Sobolev, Stencils};
use crate::wave::{
    apply_b_prime, assemble_adjoint, assemble_forward, AdjointMode, Parameters, WaveSystem,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    Full,
    Restricted,
}

/// Which part of the state is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationScheme {
    pub kind: SchemeKind,
    /// Colatitude margin: only `ε < θ < π − ε` is observed.
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub real_part_only: bool,
}

impl Default for ObservationScheme {
    fn default() -> Self {
        Self::full()
    }
}

impl ObservationScheme {
    pub fn full() -> Self {
        Self {
            kind: SchemeKind::Full,
            epsilon: 0.0,
            real_part_only: false,
        }
    }

    pub fn restricted(epsilon: f64) -> Self {
        Self {
            kind: SchemeKind::Restricted,
            epsilon,
            real_part_only: false,
        }
    }

    pub fn with_real_part_only(mut self) -> Self {
        self.real_part_only = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::Full if self.epsilon != 0.0 => Err(Error::Config(format!(
                "full observation requires epsilon = 0, got {}",
                self.epsilon
            ))),
            SchemeKind::Restricted if !(self.epsilon > 0.0 && self.epsilon < PI / 2.0) => {
                Err(Error::Config(format!(
                    "restricted observation requires 0 < epsilon < π/2, got {}",
                    self.epsilon
                )))
            }
            _ => Ok(()),
        }
    }

    /// Indices of the observed nodes.
    pub fn mask(&self, grid: &Grid) -> Vec<usize> {
        let eps = self.epsilon;
        grid.nodes()
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > eps && t < PI - eps)
            .map(|(j, _)| j)
            .collect()
    }

    /// Short name used in summary tables, e.g. `restricted_re`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            SchemeKind::Full => "full",
            SchemeKind::Restricted => "restricted",
        };
        if self.real_part_only {
            format!("{base}_re")
        } else {
            base.to_string()
        }
    }
}

/// Observed values on the masked nodes. Real-part data are stored with a
/// zero imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector {
    pub m: i32,
    pub values: Vec<Complex64>,
    pub mask: Vec<usize>,
    pub scheme: ObservationScheme,
}

impl DataVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.m != other.m
            || self.mask != other.mask
            || self.scheme.real_part_only != other.scheme.real_part_only
        {
            return Err(Error::Usage(
                "data vectors from different observation schemes".into(),
            ));
        }
        Ok(())
    }

    /// Real inner product `Re Σ w_j a_j conj(b_j)` over the observed nodes.
    pub fn inner(&self, other: &Self, grid: &Grid) -> Result<f64> {
        self.check(other)?;
        let w = grid.weights();
        Ok(self
            .mask
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(&j, (a, b))| w[j] * (a * b.conj()).re)
            .sum())
    }

    /// Weighted data norm `‖·‖_Y`.
    pub fn norm(&self, grid: &Grid) -> f64 {
        let w = grid.weights();
        self.mask
            .iter()
            .zip(&self.values)
            .map(|(&j, a)| w[j] * a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Unweighted Euclidean norm, used for noise calibration.
    pub fn norm_plain(&self) -> f64 {
        self.values.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(self.with_values(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        ))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.with_values(self.values.iter().map(|a| a * s).collect())
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Self {
        Self {
            m: self.m,
            values,
            mask: self.mask.clone(),
            scheme: self.scheme,
        }
    }
}

pub fn observe(psi: &ComplexField, scheme: &ObservationScheme, grid: &Grid) -> Result<DataVector> {
    if psi.len() != grid.n() {
        return Err(Error::Usage(format!(
            "field has length {}, grid has {} nodes",
            psi.len(),
            grid.n()
        )));
    }
    let mask = scheme.mask(grid);
    let values = mask
        .iter()
        .map(|&j| {
            let v = psi.values[j];
            if scheme.real_part_only {
                Complex64::new(v.re, 0.0)
            } else {
                v
            }
        })
        .collect();
    Ok(DataVector {
        m: psi.m,
        values,
        mask,
        scheme: *scheme,
    })
}

/// Extension by zero; real data embed with zero imaginary part.
pub fn observe_adjoint(d: &DataVector, grid: &Grid) -> ComplexField {
    let mut out = ComplexField::zeros(d.m, grid.n());
    for (&j, v) in d.mask.iter().zip(&d.values) {
        out.values[j] = *v;
    }
    out
}

/// A step or gradient in parameter space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPair {
    pub dgamma: f64,
    pub domega: ScalarField,
}

impl GradientPair {
    pub fn new(dgamma: f64, domega: ScalarField) -> Self {
        Self { dgamma, domega }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(0.0, ScalarField::zeros(n))
    }

    /// `p − q`.
    pub fn between(p: &Parameters, q: &Parameters) -> Self {
        Self::new(p.gamma - q.gamma, p.omega.axpy(-1.0, &q.omega))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.dgamma * s, self.domega.scale(s))
    }
}

pub fn offset(p: &Parameters, s: f64, d: &GradientPair) -> Parameters {
    p.step(s, d.dgamma, &d.domega)
}

/// Inner product on `ℝ × X`:
/// `⟨(a, A), (b, B)⟩ = gamma_scale·a·b + ⟨A, K B⟩_W` with `K = −Δ₀` (`H1`) or
/// `Δ₀²` (`H2`) on weighted-mean-zero profiles.
#[derive(Debug, Clone)]
pub struct ParameterMetric {
    order: Sobolev,
    gamma_scale: f64,
    operator: BandMatrix<f64>,
    laplacian: BandMatrix<f64>,
    d1: BandMatrix<f64>,
    bordered: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    grid: Grid,
}

impl ParameterMetric {
    pub fn new(order: Sobolev, gamma_scale: f64, stencils: &Stencils) -> Result<Self> {
        if !(gamma_scale > 0.0 && gamma_scale.is_finite()) {
            return Err(Error::Config(format!(
                "gamma_scale must be positive, got {gamma_scale}"
            )));
        }
        let laplacian = stencils.laplacian(0);
        let operator = match order {
            Sobolev::H1 => laplacian.map(|v| -v),
            Sobolev::H2 => laplacian.matmul(&laplacian),
            Sobolev::L2 => {
                return Err(Error::Config("parameter metric must be H1 or H2".into()));
            }
        };
        let grid = stencils.grid().clone();
        let n = grid.n();
        // [K 1; wᵀ 0]: the multiplier absorbs the component of the right-hand
        // side outside the range of K.
        let mut b = DMatrix::<f64>::zeros(n + 1, n + 1);
        b.view_mut((0, 0), (n, n)).copy_from(&operator.to_dense());
        for (i, &w) in grid.weights().iter().enumerate() {
            b[(i, n)] = 1.0;
            b[(n, i)] = w;
        }
        Ok(Self {
            order,
            gamma_scale,
            operator,
            laplacian,
            d1: stencils.d1_matrix(Parity::Even),
            bordered: b.lu(),
            grid,
        })
    }

    pub fn order(&self) -> Sobolev {
        self.order
    }

    pub fn gamma_scale(&self) -> f64 {
        self.gamma_scale
    }

    /// Mean-zero solution of `K w = g − mean(g)`.
    pub fn riesz_map(&self, g: &ScalarField) -> Result<ScalarField> {
        let n = self.grid.n();
        if g.len() != n {
            return Err(Error::Usage(format!(
                "density has length {}, grid has {n} nodes",
                g.len()
            )));
        }
        let centered = self.grid.project_mean_zero(g);
        let mut rhs = DVector::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from_slice(&centered.values);
        let x = self
            .bordered
            .solve(&rhs)
            .ok_or_else(|| Error::Internal("Riesz system is singular".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Internal(
                "Riesz map produced non-finite values".into(),
            ));
        }
        Ok(ScalarField::new(x.rows(0, n).iter().copied().collect()))
    }

    /// `⟨a, K b⟩_W`.
    pub fn inner(&self, a: &ScalarField, b: &ScalarField) -> f64 {
        let kb = self.operator.matvec(&b.values);
        a.values
            .iter()
            .zip(&kb)
            .zip(self.grid.weights())
            .map(|((x, y), w)| x * y * w)
            .sum()
    }

    /// Sobolev seminorm of a profile: `‖Ω'/r‖` for `H1`, `‖Δ₀Ω‖` for `H2`.
    pub fn norm(&self, a: &ScalarField) -> f64 {
        let d = match self.order {
            Sobolev::H1 => {
                let r = self.grid.radius();
                self.d1
                    .matvec(&a.values)
                    .into_iter()
                    .map(|v| v / r)
                    .collect()
            }
            _ => self.laplacian.matvec(&a.values),
        };
        self.grid.norm_l2_real(&ScalarField::new(d))
    }

    pub fn pair_inner(&self, a: &GradientPair, b: &GradientPair) -> f64 {
        self.gamma_scale * a.dgamma * b.dgamma + self.inner(&a.domega, &b.domega)
    }

    pub fn pair_norm(&self, a: &GradientPair) -> f64 {
        (self.gamma_scale * a.dgamma * a.dgamma + self.norm(&a.domega).powi(2)).sqrt()
    }
}

/// Convenience wrapper: Riesz representative of `g` in the `H1` or `H2` metric.
pub fn riesz_map(g: &ScalarField, order: Sobolev, stencils: &Stencils) -> Result<ScalarField> {
    ParameterMetric::new(order, 1.0, stencils)?.riesz_map(g)
}

/// Sign relating the raw gradient formulas to the derivative of the misfit.
pub const DEFAULT_SIGN: f64 = -1.0;

/// Forward solve together with its factorized system.
#[derive(Debug, Clone)]
pub struct State {
    pub psi: ComplexField,
    pub system: WaveSystem,
}

/// Everything that stays fixed during a reconstruction.
#[derive(Debug, Clone)]
pub struct Problem {
    stencils: Stencils,
    m: i32,
    omega_freq: f64,
    source: ComplexField,
    scheme: ObservationScheme,
    adjoint_mode: AdjointMode,
    metric: ParameterMetric,
    sign: f64,
    laplacian: BandMatrix<f64>,
    alpha_adjoint: BandMatrix<f64>,
}

impl Problem {
    pub fn new(
        stencils: Stencils,
        m: i32,
        omega_freq: f64,
        source: ComplexField,
        scheme: ObservationScheme,
        adjoint_mode: AdjointMode,
        metric: ParameterMetric,
    ) -> Result<Self> {
        scheme.validate()?;
        let grid = stencils.grid();
        if source.m != m || source.len() != grid.n() {
            return Err(Error::Usage(format!(
                "source (m = {}, len {}) does not match m = {m}, n = {}",
                source.m,
                source.len(),
                grid.n()
            )));
        }
        if scheme.mask(grid).is_empty() {
            return Err(Error::Config("observation mask is empty".into()));
        }
        let alpha_adjoint = match adjoint_mode {
            AdjointMode::Algebraic => {
                let w = grid.weights();
                let inv: Vec<f64> = w.iter().map(|x| 1.0 / x).collect();
                stencils.alpha_map().transpose().scale_rows_cols(&inv, w)
            }
            AdjointMode::Continuous => stencils.alpha_adjoint_map(),
        };
        Ok(Self {
            laplacian: stencils.laplacian(m),
            alpha_adjoint,
            stencils,
            m,
            omega_freq,
            source,
            scheme,
            adjoint_mode,
            metric,
            sign: DEFAULT_SIGN,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.stencils.grid()
    }

    pub fn stencils(&self) -> &Stencils {
        &self.stencils
    }

    pub fn m(&self) -> i32 {
        self.m
    }

    pub fn omega_freq(&self) -> f64 {
        self.omega_freq
    }

    pub fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    pub fn metric(&self) -> &ParameterMetric {
        &self.metric
    }

    pub fn adjoint_mode(&self) -> AdjointMode {
        self.adjoint_mode
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Same problem observed through another scheme.
    pub fn with_scheme(&self, scheme: ObservationScheme) -> Result<Self> {
        scheme.validate()?;
        Ok(Self {
            scheme,
            ..self.clone()
        })
    }

    pub fn with_adjoint_mode(&self, mode: AdjointMode) -> Result<Self> {
        let mut out = Self::new(
            self.stencils.clone(),
            self.m,
            self.omega_freq,
            self.source.clone(),
            self.scheme,
            mode,
            self.metric.clone(),
        )?;
        out.sign = self.sign;
        Ok(out)
    }

    pub fn solve_state(&self, p: &Parameters) -> Result<State> {
        let system = assemble_forward(p, self.omega_freq, self.m, &self.stencils)?;
        let psi = system.solve(&self.source)?;
        Ok(State { psi, system })
    }

    /// `F(p) = L S(p)`.
    pub fn forward(&self, p: &Parameters) -> Result<(DataVector, State)> {
        let state = self.solve_state(p)?;
        let data = observe(&state.psi, &self.scheme, self.grid())?;
        Ok((data, state))
    }

    /// `F'(p) dp = −L B(p)⁻¹ B'(dp) ψ`.
    pub fn sensitivity(&self, state: &State, dp: &GradientPair) -> Result<DataVector> {
        let rhs = apply_b_prime(dp.dgamma, &dp.domega, &state.psi, &self.stencils, self.m)?;
        let dpsi = state.system.solve(&rhs.scale(Complex64::new(-1.0, 0.0)))?;
        observe(&dpsi, &self.scheme, self.grid())
    }

    /// Unmapped gradient of `p ↦ Re⟨F(p), y⟩_Y`: the `γ` component and the `Ω`
    /// density with respect to the weighted inner product.
    pub fn raw_gradient(
        &self,
        p: &Parameters,
        state: &State,
        y: &DataVector,
    ) -> Result<(f64, ScalarField)> {
        let grid = self.grid();
        let adjoint = assemble_adjoint(
            p,
            self.omega_freq,
            self.m,
            &self.stencils,
            self.adjoint_mode,
        )?;
        let z = adjoint.solve(&observe_adjoint(y, grid))?;
        let psi = &state.psi.values;
        let lap_psi = apply_real(&self.laplacian, psi);
        let bilap_psi = apply_real(&self.laplacian, &lap_psi);
        let w = grid.weights();
        let s = self.sign;
        let dgamma = s
            * (0..psi.len())
                .map(|j| w[j] * (bilap_psi[j] * z.values[j].conj()).re)
                .sum::<f64>();
        let product: Vec<f64> = (0..psi.len())
            .map(|j| (psi[j].conj() * z.values[j]).im)
            .collect();
        let t = self.alpha_adjoint.matvec(&product);
        let mm = self.m as f64;
        let density = (0..psi.len())
            .map(|j| s * mm * (t[j] - (lap_psi[j].conj() * z.values[j]).im))
            .collect();
        Ok((dgamma, ScalarField::new(density)))
    }

    /// `F'(p)* y` as an element of `ℝ × X`.
    pub fn adjoint_gradient(
        &self,
        p: &Parameters,
        state: &State,
        y: &DataVector,
    ) -> Result<GradientPair> {
        let (dgamma, density) = self.raw_gradient(p, state, y)?;
        Ok(GradientPair::new(
            dgamma / self.metric.gamma_scale(),
            self.metric.riesz_map(&density)?,
        ))
    }

    /// Fixes the sign of the gradient formulas by comparing
    /// `⟨F'(p)dp, y⟩_Y` with the raw pairing for a random `dp` and `y`.
    pub fn calibrate_sign(&mut self, p: &Parameters, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (data, state) = self.forward(p)?;
        let y = data.with_values(
            (0..data.len())
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = if self.scheme.real_part_only {
                        0.0
                    } else {
                        rng.sample(StandardNormal)
                    };
                    Complex64::new(re, im)
                })
                .collect(),
        );
        let dp = GradientPair::new(
            rng.sample(StandardNormal),
            random_profile(self.grid(), 4, &mut rng),
        );
        let lhs = self.sensitivity(&state, &dp)?.inner(&y, self.grid())?;
        self.sign = 1.0;
        let (gg, density) = self.raw_gradient(p, &state, &y)?;
        let rhs = dp.dgamma * gg + self.grid().inner_product_real(&dp.domega, &density)?;
        if !(lhs * rhs).is_normal() {
            self.sign = DEFAULT_SIGN;
            return Err(Error::Internal("gradient sign check is degenerate".into()));
        }
        self.sign = (lhs * rhs).signum();
        Ok(self.sign)
    }
}

/// Smooth random mean-zero profile `Σ_{l=1}^{modes} c_l P_l(cosθ)/l` with
/// standard normal `c_l`.
pub fn random_profile(grid: &Grid, modes: usize, rng: &mut impl Rng) -> ScalarField {
    let coef: Vec<f64> = (1..=modes)
        .map(|l| rng.sample::<f64, _>(StandardNormal) / l as f64)
        .collect();
    let f = grid.sample(|t| {
        let x = t.cos();
        let (mut p0, mut p1) = (1.0, x);
        let mut acc = coef.first().map_or(0.0, |c| c * x);
        for (l, c) in coef.iter().enumerate().skip(1) {
            let l = l as f64;
            let p2 = ((2.0 * l + 1.0) * x * p1 - l * p0) / (l + 1.0);
            p0 = p1;
            p1 = p2;
            acc += c * p1;
        }
        acc
    });
    grid.project_mean_zero(&f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineSearch {
    pub mu0: f64,
    pub shrink: f64,
    pub armijo_c: f64,
    /// Each iteration starts from the previous accepted step times this factor.
    pub grow: f64,
    pub max_halvings: usize,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            shrink: 0.5,
            armijo_c: 1e-4,
            grow: 2.0,
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationConfig {
    pub nesterov_alpha: f64,
    pub tau: f64,
    pub max_iter: usize,
    pub line_search: LineSearch,
    pub parameter_metric: Sobolev,
    pub gamma_scale: f64,
    /// Stop once the residual is below this fraction of `‖y^δ‖_Y`, whatever
    /// `τδ` is. Needed for noise-free data.
    pub residual_floor: f64,
    pub adjoint_mode: AdjointMode,
    /// Reset the momentum whenever an accepted step increases the residual.
    pub adaptive_restart: bool,
}

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            nesterov_alpha: 3.0,
            tau: 1.1,
            max_iter: 500,
            line_search: LineSearch::default(),
            parameter_metric: Sobolev::H2,
            gamma_scale: 1e4,
            residual_floor: 1e-5,
            adjoint_mode: AdjointMode::Algebraic,
            adaptive_restart: true,
        }
    }
}

impl IterationConfig {
    pub fn validate(&self) -> Result<()> {
        let ls = &self.line_search;
        let checks = [
            (self.tau > 1.0, "tau must exceed 1"),
            (
                self.nesterov_alpha >= 3.0,
                "nesterov_alpha must be at least 3",
            ),
            (
                ls.mu0 > 0.0 && ls.mu0.is_finite(),
                "line_search.mu0 must be positive",
            ),
            (
                ls.shrink > 0.0 && ls.shrink < 1.0,
                "line_search.shrink must lie in (0, 1)",
            ),
            (
                ls.armijo_c > 0.0 && ls.armijo_c < 1.0,
                "line_search.armijo_c must lie in (0, 1)",
            ),
            (
                ls.grow >= 1.0 && ls.grow.is_finite(),
                "line_search.grow must be at least 1",
            ),
            (
                self.gamma_scale > 0.0 && self.gamma_scale.is_finite(),
                "gamma_scale must be positive",
            ),
            (
                self.residual_floor >= 0.0,
                "residual_floor must be nonnegative",
            ),
            (
                self.parameter_metric != Sobolev::L2,
                "parameter_metric must be H1 or H2",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Momentum weight `(k − 1)/(k + α − 1)`.
pub fn momentum_weight(k: usize, alpha: f64) -> f64 {
    (k as f64 - 1.0) / (k as f64 + alpha - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Discrepancy,
    ResidualFloor,
    MaxIter,
    LineSearchFailure,
    NearResonance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub gamma: f64,
    pub omega: ScalarField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionTrace {
    pub iterates: Vec<Iterate>,
    pub residuals: Vec<f64>,
    /// Step size that produced each iterate; zero for the initial guess.
    pub step_sizes: Vec<f64>,
    pub stop_index: usize,
    pub stop_reason: StopReason,
    pub threshold: f64,
    pub sign: f64,
}

impl ReconstructionTrace {
    pub fn final_parameters(&self, omega_ref: f64) -> Parameters {
        let last = &self.iterates[self.stop_index];
        Parameters::new(last.gamma, last.omega.clone(), omega_ref)
    }

    pub fn final_residual(&self) -> f64 {
        self.residuals[self.stop_index]
    }
}

enum Outcome<T> {
    Value(T),
    Resonance,
}

fn catch_resonance<T>(r: Result<T>) -> Result<Outcome<T>> {
    match r {
        Ok(v) => Ok(Outcome::Value(v)),
        Err(Error::NearResonance { .. }) => Ok(Outcome::Resonance),
        Err(e) => Err(e),
    }
}

/// Nesterov-accelerated Landweber iteration with Armijo backtracking, stopped
/// by the discrepancy principle `‖F(p_k) − y^δ‖ ≤ τδ` or the residual floor.
pub fn nesterov_landweber(
    problem: &mut Problem,
    p0: &Parameters,
    y_delta: &DataVector,
    delta: f64,
    config: &IterationConfig,
) -> Result<ReconstructionTrace> {
    config.validate()?;
    if !(delta >= 0.0) {
        return Err(Error::Config(format!(
            "noise level must be nonnegative, got {delta}"
        )));
    }
    let grid = problem.grid().clone();
    let misfit = |data: &DataVector| -> Result<f64> { Ok(data.sub(y_delta)?.norm(&grid)) };

    let mut trace = ReconstructionTrace {
        iterates: Vec::new(),
        residuals: Vec::new(),
        step_sizes: Vec::new(),
        stop_index: 0,
        stop_reason: StopReason::MaxIter,
        threshold: 0.0,
        sign: problem.sign(),
    };
    let record = |trace: &mut ReconstructionTrace, p: &Parameters, res: f64, mu: f64| {
        trace.iterates.push(Iterate {
            gamma: p.gamma,
            omega: p.omega.clone(),
        });
        trace.residuals.push(res);
        trace.step_sizes.push(mu);
    };
    let finish = |mut trace: ReconstructionTrace, reason: StopReason| {
        trace.stop_index = trace.residuals.len() - 1;
        trace.stop_reason = reason;
        trace
    };

    let discrepancy = config.tau * delta;
    let floor = config.residual_floor * y_delta.norm(&grid);
    trace.threshold = discrepancy.max(floor);
    let threshold_reason = if discrepancy >= floor {
        StopReason::Discrepancy
    } else {
        StopReason::ResidualFloor
    };

    let mut residual = match catch_resonance(problem.forward(p0))? {
        Outcome::Value((data, _)) => misfit(&data)?,
        Outcome::Resonance => {
            record(&mut trace, p0, f64::NAN, 0.0);
            return Ok(finish(trace, StopReason::NearResonance));
        }
    };
    match catch_resonance(problem.calibrate_sign(p0, 0))? {
        Outcome::Value(s) => trace.sign = s,
        Outcome::Resonance => {
            record(&mut trace, p0, residual, 0.0);
            return Ok(finish(trace, StopReason::NearResonance));
        }
    }
    record(&mut trace, p0, residual, 0.0);

    let ls = &config.line_search;
    let mut p_prev = p0.clone();
    let mut p = p0.clone();
    let mut mu = ls.mu0 / ls.grow;
    // Iterations since the last momentum restart.
    let mut since_restart = 0;
    for k in 0.. {
        if residual <= trace.threshold {
            return Ok(finish(trace, threshold_reason));
        }
        if k == config.max_iter {
            return Ok(finish(trace, StopReason::MaxIter));
        }
        let weight = momentum_weight(since_restart, config.nesterov_alpha);
        let mut z = offset(&p, weight, &GradientPair::between(&p, &p_prev));
        if z.gamma <= 0.0 {
            z = p.clone();
        }
        let (data_z, state_z) = match catch_resonance(problem.forward(&z))? {
            Outcome::Value(v) => v,
            Outcome::Resonance => return Ok(finish(trace, StopReason::NearResonance)),
        };
        let r_z = data_z.sub(y_delta)?;
        let j_z = 0.5 * r_z.norm(&grid).powi(2);
        let g = match catch_resonance(problem.adjoint_gradient(&z, &state_z, &r_z))? {
            Outcome::Value(v) => v,
            Outcome::Resonance => return Ok(finish(trace, StopReason::NearResonance)),
        };
        let slope = problem.metric().pair_inner(&g, &g);
        if !(slope > 0.0) {
            return Ok(finish(trace, StopReason::LineSearchFailure));
        }
        mu *= ls.grow;
        let mut accepted = None;
        for _ in 0..=ls.max_halvings {
            let candidate = offset(&z, -mu, &g);
            if candidate.gamma > 0.0 {
                let data = match catch_resonance(problem.forward(&candidate))? {
                    Outcome::Value((d, _)) => d,
                    Outcome::Resonance => return Ok(finish(trace, StopReason::NearResonance)),
                };
                let res = misfit(&data)?;
                if 0.5 * res * res <= j_z - ls.armijo_c * mu * slope {
                    accepted = Some((candidate, res));
                    break;
                }
            }
            mu *= ls.shrink;
        }
        let Some((next, res)) = accepted else {
            return Ok(finish(trace, StopReason::LineSearchFailure));
        };
        if config.adaptive_restart && res > residual {
            p_prev = next.clone();
            since_restart = 0;
        } else {
            p_prev = p;
            since_restart += 1;
        }
        p = next;
        residual = res;
        record(&mut trace, &p, residual, mu);
    }
    unreachable!()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    /// Legendre modes spanning the sampled rotation perturbations.
    pub modes: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            radius: 0.1,
            samples: 100,
            seed: 0,
            modes: 6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub ratio: f64,
    pub distance: f64,
    pub data_distance: f64,
    pub remainder: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub radius: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub skipped: usize,
    pub samples: Vec<ProbeSample>,
}

/// Data distances below this are treated as a degenerate pair.
pub const PROBE_DEGENERATE: f64 = 1e-13;

/// `‖F(p) − F(q) − F'(p)(p − q)‖ / (‖p − q‖·‖F(p) − F(q)‖)`, or `None` for a
/// degenerate pair.
pub fn probe_pair(
    problem: &Problem,
    p: &Parameters,
    q: &Parameters,
) -> Result<Option<ProbeSample>> {
    let grid = problem.grid();
    let (fp, state) = problem.forward(p)?;
    let (fq, _) = problem.forward(q)?;
    let h = GradientPair::between(p, q);
    let diff = fp.sub(&fq)?;
    let data_distance = diff.norm(grid);
    if data_distance < PROBE_DEGENERATE {
        return Ok(None);
    }
    let remainder = diff.sub(&problem.sensitivity(&state, &h)?)?.norm(grid);
    let distance = problem.metric().pair_norm(&h);
    Ok(Some(ProbeSample {
        ratio: remainder / (distance * data_distance),
        distance,
        data_distance,
        remainder,
    }))
}

/// Empirical tangential-cone constant over random pairs in the ball of
/// radius `R` around `center`.
pub fn tcc_probe(
    problem: &Problem,
    center: &Parameters,
    config: &ProbeConfig,
) -> Result<ProbeReport> {
    if !(config.radius > 0.0) || config.samples == 0 {
        return Err(Error::Config(
            "probe needs a positive radius and at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let grid = problem.grid().clone();
    let metric = problem.metric();
    let draw = |rng: &mut ChaCha8Rng| -> Result<Parameters> {
        for _ in 0..100 {
            let d = GradientPair::new(
                rng.sample(StandardNormal),
                random_profile(&grid, config.modes, rng),
            );
            let scale = config.radius * rng.gen::<f64>() / metric.pair_norm(&d);
            let p = offset(center, scale, &d);
            if p.gamma > 0.0 {
                return Ok(p);
            }
        }
        Err(Error::Config(format!(
            "probe radius {} leaves the region of positive viscosity",
            config.radius
        )))
    };
    let mut samples = Vec::with_capacity(config.samples);
    let mut skipped = 0;
    for _ in 0..config.samples {
        let p = draw(&mut rng)?;
        let q = draw(&mut rng)?;
        match probe_pair(problem, &p, &q)? {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    let mut ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    let max_ratio = ratios.last().copied().unwrap_or(f64::NAN);
    let median_ratio = match ratios.len() {
        0 => f64::NAN,
        l if l % 2 == 1 => ratios[l / 2],
        l => 0.5 * (ratios[l / 2 - 1] + ratios[l / 2]),
    };
    Ok(ProbeReport {
        radius: config.radius,
        max_ratio,
        median_ratio,
        skipped,
        samples,
    })
}

/// Relative difference between the gradients of the two adjoint modes,
/// measured in the parameter norm.
pub fn adjoint_mode_discrepancy(problem: &Problem, p: &Parameters, y: &DataVector) -> Result<f64> {
    let algebraic = problem.with_adjoint_mode(AdjointMode::Algebraic)?;
    let continuous = problem.with_adjoint_mode(AdjointMode::Continuous)?;
    let state = algebraic.solve_state(p)?;
    let a = algebraic.adjoint_gradient(p, &state, y)?;
    let c = continuous.adjoint_gradient(p, &state, y)?;
    let diff = GradientPair::new(a.dgamma - c.dgamma, a.domega.axpy(-1.0, &c.domega));
    let metric = problem.metric();
    Ok(metric.pair_norm(&diff) / metric.pair_norm(&a))
}
