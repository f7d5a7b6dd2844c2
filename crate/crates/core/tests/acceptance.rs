//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Lines go to stderr unconditionally, so a plain `cargo test` shows them.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use inertia::grid::{ComplexField, Grid};
use inertia::harness::{
    adjoint_check, gradient_check, grid_convergence, random_data, run_experiment, ExperimentConfig,
    NoiseSpec, Setup,
};
use inertia::inversion::{
    adjoint_mode_discrepancy, offset, random_profile, tcc_probe, GradientPair, ObservationScheme,
    ProbeConfig, StopReason,
};
use inertia::sphere::Stencils;

const SIZES: [usize; 4] = [50, 100, 200, 400];

const C1_MIN_ORDER: f64 = 3.5;
const C1_MAX_SECONDS: f64 = 5.0;
/// Errors at this level on every grid mean the stencil is exact for the field.
const C1_EXACT: f64 = 1e-11;
const C2_MIN_ORDER: f64 = 3.0;
const C3_ADJOINT_TOL: f64 = 1e-10;
const C3_TRIALS: usize = 20;
const C3_MODE_TOL: f64 = 1e-3;
const C3_MODE_MIN_ORDER: f64 = 2.0;
const C4_TOL: f64 = 1e-6;
const C4_STEP: f64 = 1e-5;
const C4_DIRECTIONS: usize = 5;
const C5_MIN_ORDER: f64 = 3.0;
const C6_GAMMA_TOL: f64 = 0.02;
const C6_OMEGA_TOL: f64 = 0.05;
const C6_MAX_ITER: usize = 500;
const C6_MAX_SECONDS: f64 = 10.0;
const C7_EPSILONS: [f64; 3] = [0.0, 0.2 * FRAC_PI_2, 0.5 * FRAC_PI_2];
const C8_LEVELS: [f64; 3] = [0.01, 0.05, 0.20];
const C9_LEVELS: [f64; 3] = [0.20, 0.05, 0.01];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const C10_RADII: [f64; 2] = [0.1, 0.01];
const C10_SAMPLES: usize = 100;
const C10_MAX_GROWTH: f64 = 2.0;
const C10_TAYLOR_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Least-squares slope of `−log e` against `log n`.
fn fitted_order(sizes: &[usize], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| -e.ln()).collect();
    let (mx, my) = (
        xs.iter().sum::<f64>() / xs.len() as f64,
        ys.iter().sum::<f64>() / ys.len() as f64,
    );
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Associated Legendre `P_l^m(cosθ)` by the upward recurrence in `l`.
fn assoc_legendre(l: usize, m: usize, theta: f64) -> f64 {
    let (x, s) = (theta.cos(), theta.sin());
    let mut pmm = 1.0;
    for k in 0..m {
        pmm *= -((2 * k + 1) as f64) * s;
    }
    if l == m {
        return pmm;
    }
    let mut p1 = x * (2 * m + 1) as f64 * pmm;
    let mut p0 = pmm;
    for ll in m + 2..=l {
        let p2 = ((2 * ll - 1) as f64 * x * p1 - (ll + m - 1) as f64 * p0) / (ll - m) as f64;
        p0 = p1;
        p1 = p2;
    }
    p1
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let stencils: Vec<Stencils> = SIZES
        .iter()
        .map(|&n| Stencils::new(&Grid::new(n, 1.0).unwrap()))
        .collect();
    let mut worst = (f64::INFINITY, 0, 0);
    let mut exact = Vec::new();
    for m in 0..=3usize {
        for l in m.max(1)..=6 {
            let lambda = -((l * (l + 1)) as f64);
            let errors: Vec<f64> = stencils
                .iter()
                .map(|st| {
                    let f = st
                        .grid()
                        .sample_complex(m as i32, |t| Complex64::new(assoc_legendre(l, m, t), 0.0));
                    let lap = st.apply_delta_m(m as i32, &f).unwrap();
                    let num = lap
                        .values
                        .iter()
                        .zip(&f.values)
                        .map(|(a, b)| (a - lambda * b).norm())
                        .fold(0.0, f64::max);
                    num / (lambda.abs() * f.max_abs())
                })
                .collect();
            if errors.iter().all(|&e| e < C1_EXACT) {
                exact.push(format!("({l},{m})"));
                continue;
            }
            let order = fitted_order(&SIZES, &errors);
            if order < worst.0 {
                worst = (order, l, m);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst.0 >= C1_MIN_ORDER && secs < C1_MAX_SECONDS,
        format!(
            "min observed order {:.2} (l={}, m={}) >= {C1_MIN_ORDER}; exact (l,m): {}; {secs:.2} s < {C1_MAX_SECONDS} s",
            worst.0,
            worst.1,
            worst.2,
            exact.join(" ")
        ),
    )
}

fn criterion_2() -> Outcome {
    let mut worst = (f64::INFINITY, 0);
    let mut summary = Vec::new();
    for m in 0..=3i32 {
        let k = m.abs();
        let errors: Vec<f64> = SIZES
            .iter()
            .map(|&n| {
                let st = Stencils::new(&Grid::new(n, 1.0).unwrap());
                let g = st.grid();
                let u = g.sample_complex(m, |t| {
                    Complex64::new(
                        t.sin().powi(k) * (0.5 * t.cos()).exp(),
                        0.2 * t.cos().powi(2) * t.sin().powi(k),
                    )
                });
                let v = g.sample_complex(m, |t| {
                    Complex64::new(
                        t.sin().powi(k) * (1.0 + t.cos().powi(3)),
                        t.sin().powi(k + 2),
                    )
                });
                let a = g
                    .inner_product(&st.apply_bilaplacian_m(m, &u).unwrap(), &v)
                    .unwrap();
                let b = g
                    .inner_product(&u, &st.apply_bilaplacian_m(m, &v).unwrap())
                    .unwrap();
                (a - b).norm() / a.norm().max(b.norm())
            })
            .collect();
        let order = fitted_order(&SIZES, &errors);
        summary.push(format!("m={m}: {order:.2}"));
        if order < worst.0 {
            worst = (order, m);
        }
    }
    outcome(
        worst.0 >= C2_MIN_ORDER,
        format!(
            "asymmetry orders [{}] >= {C2_MIN_ORDER}",
            summary.join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let schemes = [
        ObservationScheme::full(),
        ObservationScheme::restricted(0.3),
        ObservationScheme::full().with_real_part_only(),
        ObservationScheme::restricted(0.3).with_real_part_only(),
    ];
    let mut identity: f64 = 0.0;
    for scheme in schemes {
        let c = ExperimentConfig {
            scheme,
            ..ExperimentConfig::default()
        };
        identity = identity.max(adjoint_check(&c, C3_TRIALS, 11).unwrap());
    }
    let mut modes = Vec::new();
    for &n in &SIZES[..3] {
        let c = ExperimentConfig {
            n,
            ..ExperimentConfig::default()
        };
        let setup = Setup::new(&c).unwrap();
        let problem = setup.problem(&c).unwrap();
        let truth = setup.truth.parameters(&setup.grid);
        let (y_true, _) = problem.forward(&truth).unwrap();
        let p0 = setup.initial_parameters(&c);
        let (y0, _) = problem.forward(&p0).unwrap();
        modes.push(adjoint_mode_discrepancy(&problem, &p0, &y0.sub(&y_true).unwrap()).unwrap());
    }
    let order = fitted_order(&SIZES[..3], &modes);
    outcome(
        identity <= C3_ADJOINT_TOL && modes[1] <= C3_MODE_TOL && order >= C3_MODE_MIN_ORDER,
        format!(
            "identity max {identity:.2e} <= {C3_ADJOINT_TOL:e} over 4 schemes x {C3_TRIALS}; continuous vs algebraic {:.2e} at n=100 <= {C3_MODE_TOL:e}, order {order:.2} >= {C3_MODE_MIN_ORDER}",
            modes[1]
        ),
    )
}

fn criterion_4() -> Outcome {
    let worst = gradient_check(&ExperimentConfig::default(), C4_DIRECTIONS, C4_STEP, 4).unwrap();
    outcome(
        worst <= C4_TOL,
        format!("max error {worst:.2e} <= {C4_TOL:e} ({C4_DIRECTIONS} directions x 3 points, step {C4_STEP:e})"),
    )
}

fn criterion_5() -> Outcome {
    let rows = grid_convergence(&ExperimentConfig::default(), &SIZES).unwrap();
    let orders: Vec<f64> = rows.iter().filter_map(|r| r.order).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        min >= C5_MIN_ORDER,
        format!(
            "pairwise orders [{}] >= {C5_MIN_ORDER}; error at n=400 {:.2e}",
            orders
                .iter()
                .map(|o| format!("{o:.2}"))
                .collect::<Vec<_>>()
                .join(", "),
            rows[3].error
        ),
    )
}

fn criterion_6() -> Outcome {
    let c = ExperimentConfig::default();
    let start = Instant::now();
    let (r, _) = run_experiment(&c, "clean").unwrap();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        r.rel_err_gamma <= C6_GAMMA_TOL && r.rel_err_omega <= C6_OMEGA_TOL && r.stop_index <= C6_MAX_ITER && secs < C6_MAX_SECONDS,
        format!(
            "rel_err gamma {:.2e} <= {C6_GAMMA_TOL}, omega {:.2e} <= {C6_OMEGA_TOL}; K={} ({:?}); {secs:.2} s < {C6_MAX_SECONDS} s",
            r.rel_err_gamma,
            r.rel_err_omega,
            r.stop_index,
            r.stop_reason.unwrap()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut errs = Vec::new();
    let mut reasons = Vec::new();
    for &eps in &C7_EPSILONS {
        let mut c = ExperimentConfig::default();
        c.noise = NoiseSpec {
            relative_level: 0.0,
            seed: SEEDS[0],
        };
        c.scheme = if eps == 0.0 {
            ObservationScheme::full()
        } else {
            ObservationScheme::restricted(eps)
        };
        let (r, _) = run_experiment(&c, "leak").unwrap();
        errs.push(r.rel_err_omega);
        reasons.push(r.stop_reason.unwrap());
    }
    let ordered = errs[2] >= errs[1] && errs[1] >= errs[0];
    let stopped = reasons
        .iter()
        .all(|r| matches!(r, StopReason::Discrepancy | StopReason::ResidualFloor));
    outcome(
        ordered && stopped,
        format!(
            "rel_err omega 50% {:.4e} >= 20% {:.4e} >= full {:.4e}; stops {reasons:?}",
            errs[2], errs[1], errs[0]
        ),
    )
}

/// Seed-averaged `(rel_err γ, rel_err Ω, K)` per noise level.
fn noise_batch(base: &ExperimentConfig, levels: &[f64]) -> Vec<(f64, f64, f64)> {
    levels
        .iter()
        .map(|&level| {
            let mut acc = (0.0, 0.0, 0.0);
            for &seed in &SEEDS {
                let mut c = base.clone();
                c.noise = NoiseSpec {
                    relative_level: level,
                    seed,
                };
                let (r, _) = run_experiment(&c, "noise").unwrap();
                acc.0 += r.rel_err_gamma;
                acc.1 += r.rel_err_omega;
                acc.2 += r.stop_index as f64;
            }
            let s = SEEDS.len() as f64;
            (acc.0 / s, acc.1 / s, acc.2 / s)
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let base = ExperimentConfig {
        omega_freq: 1.0,
        m: 2,
        ..ExperimentConfig::default()
    };
    let b = noise_batch(&base, &C8_LEVELS);
    let pass = b.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
    let fmt = |f: fn(&(f64, f64, f64)) -> f64| {
        b.iter()
            .map(|x| format!("{:.3e}", f(x)))
            .collect::<Vec<_>>()
            .join(" <= ")
    };
    outcome(
        pass,
        format!(
            "mean rel_err gamma {}; omega {} at levels {C8_LEVELS:?}, {} seeds",
            fmt(|x| x.0),
            fmt(|x| x.1),
            SEEDS.len()
        ),
    )
}

fn criterion_9() -> Outcome {
    let b = noise_batch(&ExperimentConfig::default(), &C9_LEVELS);
    let ks: Vec<f64> = b.iter().map(|x| x.2).collect();
    outcome(
        ks.windows(2).all(|w| w[1] >= w[0]),
        format!("mean K {ks:?} nondecreasing for delta/|y| {C9_LEVELS:?}"),
    )
}

fn criterion_10() -> Outcome {
    let c = ExperimentConfig::default();
    let setup = Setup::new(&c).unwrap();
    let problem = setup.problem(&c).unwrap();
    let truth = setup.truth.parameters(&setup.grid);
    let maxima: Vec<f64> = C10_RADII
        .iter()
        .map(|&radius| {
            let cfg = ProbeConfig {
                radius,
                samples: C10_SAMPLES,
                seed: 10,
                ..ProbeConfig::default()
            };
            tcc_probe(&problem, &truth, &cfg).unwrap().max_ratio
        })
        .collect();
    let finite = maxima.iter().all(|m| m.is_finite());
    let growth = maxima[1] / maxima[0];

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let grid = &setup.grid;
    let (fp, state) = problem.forward(&truth).unwrap();
    let dir = GradientPair::new(
        0.1 * truth.gamma,
        random_profile(grid, 6, &mut rng).scale(0.1),
    );
    let lin = problem.sensitivity(&state, &dir).unwrap();
    let quad: Vec<f64> = C10_TAYLOR_STEPS
        .iter()
        .map(|&t| {
            let (ft, _) = problem.forward(&offset(&truth, t, &dir)).unwrap();
            ft.sub(&fp).unwrap().sub(&lin.scale(t)).unwrap().norm(grid) / (t * t)
        })
        .collect();
    let spread = quad.iter().copied().fold(0.0, f64::max)
        / quad.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        finite && growth <= C10_MAX_GROWTH && spread <= C10_MAX_GROWTH,
        format!(
            "max ratio R=0.1 {:.3e}, R=0.01 {:.3e} (growth {growth:.2} <= {C10_MAX_GROWTH}); remainder/|h|^2 spread {spread:.2} over t={C10_TAYLOR_STEPS:?}",
            maxima[0], maxima[1]
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("operator spectral accuracy", criterion_1),
        ("discrete symmetry", criterion_2),
        ("adjoint identity", criterion_3),
        ("gradient check", criterion_4),
        ("manufactured forward convergence", criterion_5),
        ("clean reconstruction", criterion_6),
        ("leakage degradation", criterion_7),
        ("noise monotonicity", criterion_8),
        ("discrepancy stopping index", criterion_9),
        ("tangential cone probe", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        // Written to the raw handle so the lines survive output capture.
        let _ = writeln!(
            std::io::stderr(),
            "criterion {:>2} {name}: {} | {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn random_data_matches_scheme_layout() {
    let c = ExperimentConfig {
        n: 32,
        scheme: ObservationScheme::restricted(0.5).with_real_part_only(),
        ..ExperimentConfig::default()
    };
    let setup = Setup::new(&c).unwrap();
    let psi: ComplexField = setup.state(&c).unwrap();
    let y = inertia::inversion::observe(&psi, &c.scheme, &setup.grid).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let d = random_data(&y, &mut rng);
    assert_eq!(d.len(), y.len());
    assert!(d.values.iter().all(|v| v.im == 0.0));
}
