//! Manufactured ground truths, synthetic noise and reproducible experiment
//! runs with CSV/JSON outputs.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analytic::Trig;
use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, ScalarField};
use crate::inversion::{
    nesterov_landweber, observe, random_profile, DataVector, GradientPair, IterationConfig,
    ObservationScheme, ParameterMetric, ProbeConfig, Problem, ReconstructionTrace, StopReason,
};
use crate::sphere::{boundary_orders, Stencils};
use crate::wave::{assemble_forward, Parameters};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

fn one() -> f64 {
    1.0
}

fn unit_poly() -> Vec<f64> {
    vec![1.0]
}

/// Closed-form state `Ψ*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PsiSpec {
    /// `A·e^{iφ₀}·sin^p θ·Σ_k poly[k] cos^k θ`; `p` defaults to `|m|`.
    SinPower {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        power: Option<i32>,
        #[serde(default = "unit_poly")]
        poly: Vec<f64>,
    },
}

/// Closed-form rotation `Ω*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OmegaSpec {
    Constant {
        a: f64,
    },
    /// `a + b cos²θ`.
    Solar {
        a: f64,
        b: f64,
    },
    /// `a + b cosθ + c cos³θ`.
    Cubic {
        a: f64,
        b: f64,
        c: f64,
    },
}

impl OmegaSpec {
    pub fn trig(&self) -> Trig {
        match *self {
            OmegaSpec::Constant { a } => Trig::constant(a),
            OmegaSpec::Solar { a, b } => Trig::sin_power_times_poly(0, &[a, 0.0, b]),
            OmegaSpec::Cubic { a, b, c } => Trig::sin_power_times_poly(0, &[a, b, 0.0, c]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruthSpec {
    pub psi: PsiSpec,
    pub omega: OmegaSpec,
    pub gamma: f64,
    pub omega_ref: f64,
}

impl Default for TruthSpec {
    fn default() -> Self {
        Self {
            psi: PsiSpec::SinPower {
                amplitude: 1.0,
                phase: 0.4,
                power: None,
                poly: vec![1.0, 0.3, 0.5],
            },
            omega: OmegaSpec::Solar { a: -0.2, b: 0.6 },
            gamma: 0.1,
            omega_ref: 0.5,
        }
    }
}

/// Manufactured truth with its exact source `f = B(p*)Ψ*`.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub spec: TruthSpec,
    pub m: i32,
    pub omega_freq: f64,
    pub radius: f64,
    psi: Trig,
    factor: Complex64,
    omega: Trig,
}

impl GroundTruth {
    pub fn psi_exact(&self, grid: &Grid) -> ComplexField {
        let f = self.factor;
        grid.sample_complex(self.m, |t| f * self.psi.eval(t))
    }

    pub fn omega_exact(&self, grid: &Grid) -> ScalarField {
        grid.sample(|t| self.omega.eval(t))
    }

    pub fn parameters(&self, grid: &Grid) -> Parameters {
        Parameters::new(self.spec.gamma, self.omega_exact(grid), self.spec.omega_ref)
    }

    /// `γΔ²Ψ* + (iω − imβ)ΔΨ* + imαΨ*` from exact derivatives.
    pub fn source(&self, grid: &Grid) -> ComplexField {
        let (m, r) = (self.m, self.radius);
        let lap = self.psi.delta_m(m, r);
        let bilap = lap.delta_m(m, r);
        let alpha = self.omega.alpha(r);
        let mm = m as f64;
        let gamma = self.spec.gamma;
        let (w, oref, f) = (self.omega_freq, self.spec.omega_ref, self.factor);
        grid.sample_complex(m, |t| {
            let beta = self.omega.eval(t) - oref;
            let v = gamma * bilap.eval(t)
                + (I * w - I * mm * beta) * lap.eval(t)
                + I * mm * alpha.eval(t) * self.psi.eval(t);
            f * v
        })
    }
}

/// Builds the ground truth; rejects states that are not smooth fields of
/// order `m` or that violate `Γ_m`.
pub fn manufacture_truth(
    spec: &TruthSpec,
    m: i32,
    omega_freq: f64,
    radius: f64,
) -> Result<GroundTruth> {
    if !(spec.gamma > 0.0 && spec.gamma.is_finite()) {
        return Err(Error::Config(format!(
            "truth viscosity must be positive, got {}",
            spec.gamma
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Config(format!(
            "sphere radius must be positive, got {radius}"
        )));
    }
    let PsiSpec::SinPower {
        amplitude,
        phase,
        power,
        ref poly,
    } = spec.psi;
    let k = m.abs();
    let p = power.unwrap_or(k);
    if poly.iter().all(|&c| c == 0.0) || amplitude == 0.0 {
        return Err(Error::Config("truth state is identically zero".into()));
    }
    let psi = Trig::sin_power_times_poly(p, poly);
    let scale = 1.0 + poly.iter().map(|c| c.abs()).sum::<f64>();
    for order in boundary_orders(m) {
        let d = psi.derivative_n(order);
        for pole in [0.0, std::f64::consts::PI] {
            if p < 0 || d.eval(pole).abs() > 1e-10 * scale {
                return Err(Error::Config(format!(
                    "truth state sin^{p}θ·poly(cosθ) violates the pole conditions for m = {m}"
                )));
            }
        }
    }
    if p < k || (p - k) % 2 != 0 {
        return Err(Error::Config(format!(
            "truth state sin^{p}θ·poly(cosθ) is not a smooth field of order m = {m}"
        )));
    }
    Ok(GroundTruth {
        spec: spec.clone(),
        m,
        omega_freq,
        radius,
        psi,
        factor: Complex64::from_polar(amplitude, phase),
        omega: spec.omega.trig(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub relative_level: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            relative_level: 0.0,
            seed: 0,
        }
    }
}

/// Adds Gaussian noise rescaled to `‖noise‖₂ = level·‖y‖₂` exactly. Returns the
/// noisy data and `δ`, the noise norm in the weighted data norm.
pub fn add_noise(y: &DataVector, spec: &NoiseSpec, grid: &Grid) -> Result<(DataVector, f64)> {
    let level = spec.relative_level;
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Config(format!(
            "relative noise level must lie in [0, 1), got {level}"
        )));
    }
    if level == 0.0 {
        return Ok((y.clone(), 0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let real = y.scheme.real_part_only;
    let raw: Vec<Complex64> = (0..y.len())
        .map(|_| {
            if real {
                Complex64::new(rng.sample(StandardNormal), 0.0)
            } else {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) / 2f64.sqrt()
            }
        })
        .collect();
    let noise = y.with_values(raw);
    let s = level * y.norm_plain() / noise.norm_plain();
    let noise = noise.scale(s);
    let delta = noise.norm(grid);
    Ok((y.add(&noise)?, delta))
}

/// Starting point of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialGuess {
    /// `γ_init = gamma_factor·γ_true`.
    pub gamma_factor: f64,
    /// Constant initial rotation.
    pub omega: f64,
}

impl Default for InitialGuess {
    fn default() -> Self {
        Self {
            gamma_factor: 3.0,
            omega: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub radius: f64,
    pub omega_freq: f64,
    pub m: i32,
    pub truth: TruthSpec,
    pub scheme: ObservationScheme,
    pub noise: NoiseSpec,
    pub iteration: IterationConfig,
    pub initial: InitialGuess,
    pub probe: ProbeConfig,
    pub sweep: SweepSpec,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 100,
            radius: 1.0,
            omega_freq: 3.0,
            m: 3,
            truth: TruthSpec::default(),
            scheme: ObservationScheme::full(),
            noise: NoiseSpec::default(),
            iteration: IterationConfig::default(),
            initial: InitialGuess::default(),
            probe: ProbeConfig::default(),
            sweep: SweepSpec::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        self.iteration.validate()?;
        if !(self.omega_freq.is_finite()) {
            return Err(Error::Config("omega_freq must be finite".into()));
        }
        Ok(())
    }
}

/// Grid, stencils, truth and exact source of an experiment.
#[derive(Debug, Clone)]
pub struct Setup {
    pub grid: Grid,
    pub stencils: Stencils,
    pub truth: GroundTruth,
    pub source: ComplexField,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid::new(config.n, config.radius)?;
        let stencils = Stencils::new(&grid);
        let truth = manufacture_truth(&config.truth, config.m, config.omega_freq, config.radius)?;
        let source = truth.source(&grid);
        Ok(Self {
            grid,
            stencils,
            truth,
            source,
        })
    }

    pub fn problem(&self, config: &ExperimentConfig) -> Result<Problem> {
        let metric = ParameterMetric::new(
            config.iteration.parameter_metric,
            config.iteration.gamma_scale,
            &self.stencils,
        )?;
        Problem::new(
            self.stencils.clone(),
            config.m,
            config.omega_freq,
            self.source.clone(),
            config.scheme,
            config.iteration.adjoint_mode,
            metric,
        )
    }

    /// Discrete state at the true parameters.
    pub fn state(&self, config: &ExperimentConfig) -> Result<ComplexField> {
        let p = self.truth.parameters(&self.grid);
        assemble_forward(&p, config.omega_freq, config.m, &self.stencils)?.solve(&self.source)
    }

    pub fn initial_parameters(&self, config: &ExperimentConfig) -> Parameters {
        Parameters::new(
            config.initial.gamma_factor * config.truth.gamma,
            ScalarField::constant(self.grid.n(), config.initial.omega),
            config.truth.omega_ref,
        )
    }
}

pub fn rel_err_gamma(gamma: f64, truth: f64) -> f64 {
    (gamma - truth).abs() / truth.abs()
}

pub fn rel_err_omega(omega: &ScalarField, truth: &ScalarField, grid: &Grid) -> f64 {
    grid.norm_l2_real(&omega.axpy(-1.0, truth)) / grid.norm_l2_real(truth)
}

/// JSON writes NaN as `null`; read it back as NaN.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Summary of one run. Failed runs carry `error` and NaN metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRecord {
    pub run_id: String,
    pub config: ExperimentConfig,
    pub stop_index: usize,
    pub stop_reason: Option<StopReason>,
    #[serde(deserialize_with = "nan_from_null")]
    pub final_residual: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub delta: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub threshold: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub gamma: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub rel_err_gamma: f64,
    #[serde(deserialize_with = "nan_from_null")]
    pub rel_err_omega: f64,
    pub wall_ms: f64,
    pub iterations_csv: Option<PathBuf>,
    pub error: Option<String>,
}

/// Runs one synthetic reconstruction; outputs are written when
/// `config.output.dir` is set.
pub fn run_experiment(
    config: &ExperimentConfig,
    run_id: &str,
) -> Result<(RunRecord, ReconstructionTrace)> {
    let start = Instant::now();
    let setup = Setup::new(config)?;
    let grid = &setup.grid;
    let psi = setup.state(config)?;
    let y = observe(&psi, &config.scheme, grid)?;
    let (y_delta, delta) = add_noise(&y, &config.noise, grid)?;
    let mut problem = setup.problem(config)?;
    let p0 = setup.initial_parameters(config);
    let trace = nesterov_landweber(&mut problem, &p0, &y_delta, delta, &config.iteration)?;
    let omega_true = setup.truth.omega_exact(grid);
    let last = &trace.iterates[trace.stop_index];
    let mut record = RunRecord {
        run_id: run_id.to_string(),
        config: config.clone(),
        stop_index: trace.stop_index,
        stop_reason: Some(trace.stop_reason),
        final_residual: trace.final_residual(),
        delta,
        threshold: trace.threshold,
        gamma: last.gamma,
        rel_err_gamma: rel_err_gamma(last.gamma, config.truth.gamma),
        rel_err_omega: rel_err_omega(&last.omega, &omega_true, grid),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        iterations_csv: None,
        error: None,
    };
    if let Some(dir) = &config.output.dir {
        fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{run_id}_iterations.csv"));
        fs::write(
            &csv,
            iterations_csv(&trace, config.truth.gamma, &omega_true, grid),
        )?;
        record.iterations_csv = Some(csv);
        fs::write(
            dir.join(format!("{run_id}.json")),
            serde_json::to_string_pretty(&record)?,
        )?;
    }
    Ok((record, trace))
}

pub const ITERATIONS_HEADER: &str = "iter,residual,gamma,rel_err_gamma,rel_err_omega,step_size";
pub const SUMMARY_HEADER: &str =
    "run_id,noise,epsilon,scheme,K,final_residual,rel_err_gamma,rel_err_omega,wall_ms";
pub const STATE_HEADER: &str = "theta,re_psi,im_psi";

pub fn iterations_csv(
    trace: &ReconstructionTrace,
    gamma_true: f64,
    omega_true: &ScalarField,
    grid: &Grid,
) -> String {
    let mut out = format!("{ITERATIONS_HEADER}\n");
    for (k, it) in trace.iterates.iter().enumerate() {
        let _ = writeln!(
            out,
            "{k},{:e},{:e},{:e},{:e},{:e}",
            trace.residuals[k],
            it.gamma,
            rel_err_gamma(it.gamma, gamma_true),
            rel_err_omega(&it.omega, omega_true, grid),
            trace.step_sizes[k]
        );
    }
    out
}

pub fn state_csv(grid: &Grid, psi: &ComplexField) -> String {
    let mut out = format!("{STATE_HEADER}\n");
    for (t, v) in grid.nodes().iter().zip(&psi.values) {
        let _ = writeln!(out, "{t:e},{:e},{:e}", v.re, v.im);
    }
    out
}

/// Parameter varied across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    Noise(Vec<f64>),
    /// `0` means full observation.
    Epsilon(Vec<f64>),
    Scheme(Vec<ObservationScheme>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Noise seeds; every axis value is run once per seed.
    pub seeds: Vec<u64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            axis: SweepAxis::Noise(vec![0.01, 0.05, 0.1, 0.2]),
            seeds: vec![0],
        }
    }
}

impl SweepSpec {
    /// Member configurations in run order with their ids.
    pub fn members(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        let mut out = Vec::new();
        let values: Vec<Box<dyn Fn(&mut ExperimentConfig)>> = match &self.axis {
            SweepAxis::Noise(v) => v
                .iter()
                .map(|&x| {
                    Box::new(move |c: &mut ExperimentConfig| c.noise.relative_level = x)
                        as Box<dyn Fn(&mut _)>
                })
                .collect(),
            SweepAxis::Epsilon(v) => v
                .iter()
                .map(|&x| {
                    Box::new(move |c: &mut ExperimentConfig| {
                        let real = c.scheme.real_part_only;
                        c.scheme = if x == 0.0 {
                            ObservationScheme::full()
                        } else {
                            ObservationScheme::restricted(x)
                        };
                        c.scheme.real_part_only = real;
                    }) as Box<dyn Fn(&mut _)>
                })
                .collect(),
            SweepAxis::Scheme(v) => v
                .iter()
                .map(|&s| {
                    Box::new(move |c: &mut ExperimentConfig| c.scheme = s) as Box<dyn Fn(&mut _)>
                })
                .collect(),
        };
        for (i, apply) in values.iter().enumerate() {
            for &seed in &self.seeds {
                let mut c = base.clone();
                apply(&mut c);
                c.noise.seed = seed;
                out.push((format!("run{i:03}_seed{seed}"), c));
            }
        }
        out
    }
}

/// Runs every member of the sweep; failures are recorded and do not stop the
/// sweep. Writes `summary.csv` when an output directory is configured.
pub fn sweep(base: &ExperimentConfig, spec: &SweepSpec) -> Result<(Vec<RunRecord>, String)> {
    let mut records = Vec::new();
    for (id, config) in spec.members(base) {
        let record = match run_experiment(&config, &id) {
            Ok((r, _)) => r,
            Err(e) => RunRecord {
                run_id: id,
                config,
                stop_index: 0,
                stop_reason: None,
                final_residual: f64::NAN,
                delta: f64::NAN,
                threshold: f64::NAN,
                gamma: f64::NAN,
                rel_err_gamma: f64::NAN,
                rel_err_omega: f64::NAN,
                wall_ms: 0.0,
                iterations_csv: None,
                error: Some(e.to_string()),
            },
        };
        records.push(record);
    }
    let summary = summary_csv(&records);
    if let Some(dir) = &base.output.dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("summary.csv"), &summary)?;
    }
    Ok((records, summary))
}

pub fn summary_csv(records: &[RunRecord]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:e},{:e},{:e},{:.3}",
            r.run_id,
            r.config.noise.relative_level,
            r.config.scheme.epsilon,
            r.config.scheme.label(),
            r.stop_index,
            r.final_residual,
            r.rel_err_gamma,
            r.rel_err_omega,
            r.wall_ms
        );
    }
    out
}

/// Maximum relative mismatch of `⟨F'δp, y⟩_Y = ⟨δp, F'*y⟩` over random trials.
pub fn adjoint_check(config: &ExperimentConfig, trials: usize, seed: u64) -> Result<f64> {
    let setup = Setup::new(config)?;
    let mut problem = setup.problem(config)?;
    let p = setup.truth.parameters(&setup.grid);
    problem.calibrate_sign(&p, seed)?;
    let (data, state) = problem.forward(&p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let metric = problem.metric();
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let dp = GradientPair::new(
            rng.sample(StandardNormal),
            random_profile(&setup.grid, 6, &mut rng),
        );
        let y = random_data(&data, &mut rng);
        let lhs = problem.sensitivity(&state, &dp)?.inner(&y, &setup.grid)?;
        let rhs = metric.pair_inner(&dp, &problem.adjoint_gradient(&p, &state, &y)?);
        let scale = metric.pair_norm(&dp) * y.norm(&setup.grid);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

pub fn random_data(like: &DataVector, rng: &mut impl Rng) -> DataVector {
    let real = like.scheme.real_part_only;
    like.with_values(
        (0..like.len())
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = if real {
                    0.0
                } else {
                    rng.sample(StandardNormal)
                };
                Complex64::new(re, im)
            })
            .collect(),
    )
}

/// Largest error of gradient-predicted directional derivatives of
/// `½‖F(p) − y‖²` against central differences, relative to `‖d‖·‖∇J‖`, over
/// random directions at the truth and two perturbed points.
pub fn gradient_check(
    config: &ExperimentConfig,
    directions: usize,
    step: f64,
    seed: u64,
) -> Result<f64> {
    let setup = Setup::new(config)?;
    let grid = &setup.grid;
    let mut problem = setup.problem(config)?;
    let truth = setup.truth.parameters(grid);
    problem.calibrate_sign(&truth, seed)?;
    let (y, _) = problem.forward(&setup.initial_parameters(config))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = vec![truth.clone()];
    for _ in 0..2 {
        let d = GradientPair::new(
            0.2 * truth.gamma * rng.sample::<f64, _>(StandardNormal),
            random_profile(grid, 4, &mut rng).scale(0.05),
        );
        let mut p = crate::inversion::offset(&truth, 1.0, &d);
        p.gamma = p.gamma.abs().max(0.5 * truth.gamma);
        points.push(p);
    }
    let misfit = |p: &Parameters| -> Result<f64> {
        let (d, _) = problem.forward(p)?;
        Ok(0.5 * d.sub(&y)?.norm(grid).powi(2))
    };
    let mut worst: f64 = 0.0;
    for p in &points {
        let (data, state) = problem.forward(p)?;
        let g = problem.adjoint_gradient(p, &state, &data.sub(&y)?)?;
        for _ in 0..directions {
            let d = GradientPair::new(
                truth.gamma * rng.sample::<f64, _>(StandardNormal),
                random_profile(grid, 6, &mut rng),
            );
            let predicted = problem.metric().pair_inner(&d, &g);
            let plus = misfit(&crate::inversion::offset(p, step, &d))?;
            let minus = misfit(&crate::inversion::offset(p, -step, &d))?;
            let fd = (plus - minus) / (2.0 * step);
            let scale = problem.metric().pair_norm(&d) * problem.metric().pair_norm(&g);
            worst = worst.max((predicted - fd).abs() / scale);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

/// Relative `L²` error of the discrete state against the closed-form `Ψ*`.
pub fn grid_convergence(config: &ExperimentConfig, sizes: &[usize]) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in sizes {
        let c = ExperimentConfig {
            n,
            ..config.clone()
        };
        let setup = Setup::new(&c)?;
        let psi = setup.state(&c)?;
        let exact = setup.truth.psi_exact(&setup.grid);
        let error = setup.grid.norm_l2(&psi.sub(&exact)?) / setup.grid.norm_l2(&exact);
        let order = rows
            .last()
            .map(|prev| (prev.error / error).ln() / (n as f64 / prev.n as f64).ln());
        rows.push(ConvergenceRow { n, error, order });
    }
    Ok(rows)
}

/// Writes `resolved_config.json` into `dir`.
pub fn echo_config(config: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("resolved_config.json"), config.to_json())?;
    Ok(())
}
