//! Scenario execution: dispatch to the library, collect results, classify
//! failures into exit-code classes.


use std::sync::Arc;

use serde_json::{json, Value};

use cartwright_core::ball::{
    averaged_kernel, harmonic_extension_axial, mu_exact, BallPoint, Dimension, GeometryError,
    MuMode,
};
use cartwright_core::extremal::{
    assemble_v, axis_samples, build_cascade, closed_form_n1, closed_form_n1_variant,
    verify_example, ExtremalError,
};
use cartwright_core::quad::QuadConfig;
use cartwright_core::surface::{verify_surface_bounds, SurfaceError};
use cartwright_core::verifier::{
    majorant_integral, make_extremal_test, make_poisson_test, normalized_surface, run_pipeline,
    scaled_majorant, theta_grid, TheoremId, VerifierError, VerifyOptions,
};
use cartwright_core::weight::{check_conditions, log_grid, RipponIntegral, Weight, WeightError};

use crate::report::{Outcome, ReportDocument, Summary, Table};
use crate::scenario::{Scenario, UsageError};

pub struct RunOutput {
    pub document: ReportDocument,
    pub primary_table: Option<Table>,
    /// Extra named tables some commands export (path decided by the caller).
    pub cascade_table: Option<Table>,
    pub axis_table: Option<Table>,
}

pub enum RunError {
    Usage(UsageError),
    /// Failure captured with a stage label; becomes a failing report.
    Captured { outcome: Outcome, note: String },
}

impl From<UsageError> for RunError {
    fn from(e: UsageError) -> Self {
        RunError::Usage(e)
    }
}

fn classify_weight(e: &WeightError) -> Outcome {
    match e {
        WeightError::Quadrature(_) | WeightError::DerivativeNoise { .. } => {
            Outcome::AccuracyFailure
        }
        _ => Outcome::InvariantFailure,
    }
}

fn classify_geometry(e: &GeometryError) -> Outcome {
    match e {
        GeometryError::Quadrature(_) => Outcome::AccuracyFailure,
        _ => Outcome::InvariantFailure,
    }
}

fn classify_surface(e: &SurfaceError) -> Outcome {
    match e {
        SurfaceError::Quadrature(_) => Outcome::AccuracyFailure,
        SurfaceError::Geometry(g) => classify_geometry(g),
        _ => Outcome::InvariantFailure,
    }
}

fn classify_verifier(e: &VerifierError) -> Outcome {
    match e {
        VerifierError::Quadrature(_) => Outcome::AccuracyFailure,
        VerifierError::Weight(w) => classify_weight(w),
        VerifierError::Geometry(g) => classify_geometry(g),
        VerifierError::Surface(s) => classify_surface(s),
        VerifierError::Extremal(x) => classify_extremal(x),
        VerifierError::Stage { source, .. } => classify_verifier(source),
        _ => Outcome::InvariantFailure,
    }
}

fn classify_extremal(e: &ExtremalError) -> Outcome {
    match e {
        ExtremalError::SeriesNonConvergence { .. }
        | ExtremalError::Ode(_)
        | ExtremalError::Quadrature(_)
        | ExtremalError::Interpolation(_) => Outcome::AccuracyFailure,
        _ => Outcome::InvariantFailure,
    }
}

macro_rules! capture {
    ($stage:expr, $expr:expr, $classify:path) => {
        $expr.map_err(|e| RunError::Captured {
            outcome: $classify(&e),
            note: format!("{}: {e}", $stage),
        })?
    };
}

fn parse_weight(spec: &str) -> Result<Weight, RunError> {
    // Malformed weight specs are usage errors carrying the offending token.
    Weight::parse(spec).map_err(|e| RunError::Usage(UsageError(format!("{e}"))))
}

fn dimension(n: u32) -> Result<Dimension, RunError> {
    Dimension::new(n).map_err(|e| RunError::Usage(UsageError(format!("{e}"))))
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, RunError> {
    match scenario {
        Scenario::WeightCheck {
            n,
            weight,
            grid_min,
            grid_max,
            grid_points,
        } => run_weight_check(*n, weight, *grid_min, *grid_max, *grid_points, scenario),
        Scenario::MuEval { n, a, y, t, mode } => run_mu_eval(*n, *a, *y, *t, mode, scenario),
        Scenario::SurfaceBuild {
            n,
            weight,
            theta,
            lambda,
            samples,
            seed,
        } => run_surface_build(*n, weight, *theta, *lambda, *samples, *seed, scenario),
        Scenario::Verify {
            theorem,
            n,
            weight,
            theta_min,
            theta_max,
            theta_per_decade,
            test_function,
            pole_angle,
            pole_depth,
            lambda,
        } => run_verify(
            theorem,
            *n,
            weight,
            *theta_min,
            *theta_max,
            *theta_per_decade,
            test_function,
            *pole_angle,
            *pole_depth,
            *lambda,
            scenario,
        ),
        Scenario::Example { n } => run_example(*n, scenario),
    }
}

fn scenario_value(s: &Scenario) -> Value {
    serde_json::to_value(s).expect("scenario serializes")
}

fn run_weight_check(
    n: u32,
    weight_spec: &str,
    grid_min: f64,
    grid_max: f64,
    grid_points: usize,
    scenario: &Scenario,
) -> Result<RunOutput, RunError> {
    let nd = dimension(n)?;
    let weight = parse_weight(weight_spec)?;
    if !(grid_min > 0.0 && grid_max > grid_min && grid_max <= 1.0) {
        return Err(RunError::Usage(UsageError(format!(
            "inconsistent grid range [{grid_min}, {grid_max}]"
        ))));
    }
    let grid = log_grid(grid_min, grid_max, grid_points.max(2));
    let report = capture!("check-conditions", check_conditions(nd, &weight, &grid), classify_weight);

    let regular_pass = report.als_pass && report.ar_delta > 0.0;
    let regular_near_boundary = report.als_pass && report.ar_delta_near_zero > 0.0;
    let verdicts = json!({
        "regular_hypotheses": if regular_pass { "pass" } else { "fail" },
        "regular_hypotheses_near_boundary": if regular_near_boundary { "pass" } else { "fail" },
        "boundary_growth_integral": match report.rippon {
            RipponIntegral::Finite(_) => "finite",
            RipponIntegral::Divergent => "divergent",
        },
    });

    let mut table = Table::new(&["y", "log_w", "w_over_dw", "slope_condition_lhs"]);
    for &y in &grid {
        table.push(vec![y, weight.log_value(y), weight.ratio(y), weight.ratio_prime(y)]);
    }

    let results = json!({
        "regularity": serde_json::to_value(&report).unwrap(),
        "verdicts": verdicts,
    });
    let summary = Summary {
        pass: true,
        outcome: Outcome::Pass,
        notes: vec![format!(
            "regular growth hypotheses: {}",
            if regular_pass { "pass" } else { "fail" }
        )],
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: Some(table),
        cascade_table: None,
        axis_table: None,
    })
}

fn run_mu_eval(
    n: u32,
    a: f64,
    y: f64,
    t: f64,
    mode: &str,
    scenario: &Scenario,
) -> Result<RunOutput, RunError> {
    let nd = dimension(n)?;
    let modes: Vec<(&str, MuMode)> = match mode {
        "quadrature" => vec![("quadrature", MuMode::Quadrature)],
        "lemma1" => vec![("lemma1_estimate", MuMode::Lemma1Estimate)],
        "smallangle" => vec![("smallangle_estimate", MuMode::SmallAngleEstimate)],
        "both" => vec![
            ("quadrature", MuMode::Quadrature),
            ("lemma1_estimate", MuMode::Lemma1Estimate),
        ],
        "all" => vec![
            ("quadrature", MuMode::Quadrature),
            ("lemma1_estimate", MuMode::Lemma1Estimate),
            ("smallangle_estimate", MuMode::SmallAngleEstimate),
        ],
        other => {
            return Err(RunError::Usage(UsageError(format!(
                "unknown --mode '{other}' (quadrature|lemma1|smallangle|both|all)"
            ))))
        }
    };

    let cfg = QuadConfig::default();
    let mut entries = Vec::new();
    let mut values = std::collections::BTreeMap::new();
    for (name, m) in modes {
        match averaged_kernel(nd, a, y, t, m, &cfg) {
            Ok(v) => {
                values.insert(name.to_string(), v);
                entries.push(json!({"mode": name, "value": v}));
            }
            Err(GeometryError::UnboundedAverage { angle }) => {
                entries.push(json!({"mode": name, "flag": "unbounded", "at_angle": angle}));
            }
            Err(e) => {
                return Err(RunError::Captured {
                    outcome: classify_geometry(&e),
                    note: format!("mu-eval {name}: {e}"),
                })
            }
        }
    }
    if let (Some(q), Some(l)) = (values.get("quadrature"), values.get("lemma1_estimate")) {
        entries.push(json!({"ratio_quadrature_over_lemma1": q / l}));
    }

    let results = Value::Array(entries);
    let summary = Summary {
        pass: true,
        outcome: Outcome::Pass,
        notes: vec![],
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: None,
        cascade_table: None,
        axis_table: None,
    })
}

fn run_surface_build(
    n: u32,
    weight_spec: &str,
    theta: f64,
    lambda: f64,
    samples: usize,
    seed: u64,
    scenario: &Scenario,
) -> Result<RunOutput, RunError> {
    let nd = dimension(n)?;
    let weight = parse_weight(weight_spec)?;
    let opts = VerifyOptions {
        lambda_initial: lambda,
        ..VerifyOptions::default()
    };

    let (alpha, log_k) = capture!(
        "majorant",
        scaled_majorant(nd, &weight, theta),
        classify_verifier
    );
    let beta = alpha;
    let d = capture!("majorant-integral", majorant_integral(nd, log_k.clone()), classify_verifier);
    let k0 = log_k(0.0).exp();
    let denom = d.powi(n as i32 + 1) + k0 * beta.powi(n as i32);
    let bundle = capture!(
        "surface",
        normalized_surface(nd, log_k, denom, beta, &opts),
        classify_verifier
    );
    let bounds = capture!(
        "bound-sweep",
        verify_surface_bounds(&bundle.kw, &bundle.surface, samples, seed),
        classify_surface
    );

    // Export table sampled log-uniformly along the surface.
    let mut table = Table::new(&["y", "gamma", "k_of_y", "mu_at_beta", "va_value"]);
    let rows = samples.clamp(2, 20_000);
    for i in 0..rows {
        let frac = i as f64 / (rows - 1) as f64;
        let y = bundle.surface.rho * 1e-6f64.powf(1.0 - frac);
        let gamma = bundle.surface.gamma(y);
        let k_of_y = bundle.kw.k(y);
        // gamma(rho) can overshoot pi by a few ulps of solver tolerance.
        let gamma = gamma.min(std::f64::consts::PI);
        let mu = capture!("mu", mu_exact(nd, gamma, y, beta), classify_geometry);
        let point = capture!("surface-point", BallPoint::new(gamma, y), classify_geometry);
        let va = capture!(
            "va-extension",
            harmonic_extension_axial(nd, &bundle.va_profile, point, &QuadConfig::default()),
            classify_geometry
        );
        table.push(vec![y, gamma, k_of_y, mu, va]);
    }

    let pass = bounds.gap_pass && bounds.va_over_k_min > 0.0;
    let results = json!({
        "alpha": alpha,
        "beta": beta,
        "d_integral": d,
        "denom": denom,
        "lambda": bundle.lambda,
        "lambda_halvings": bundle.halvings,
        "s": bundle.surface.s,
        "rho": bundle.surface.rho,
        "va_origin": bundle.va_origin,
        "bounds": serde_json::to_value(&bounds).unwrap(),
    });
    let summary = Summary {
        pass,
        outcome: if pass {
            Outcome::Pass
        } else {
            Outcome::InvariantFailure
        },
        notes: vec![format!(
            "surface bounds: gap pass = {}, mu/k <= {:.6e}, va/k >= {:.6e}",
            bounds.gap_pass, bounds.mu_over_k_max, bounds.va_over_k_min
        )],
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: Some(table),
        cascade_table: None,
        axis_table: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_verify(
    theorem: &str,
    n: u32,
    weight_spec: &str,
    theta_min: f64,
    theta_max: f64,
    theta_per_decade: usize,
    test_function: &str,
    pole_angle: f64,
    pole_depth: f64,
    lambda: f64,
    scenario: &Scenario,
) -> Result<RunOutput, RunError> {
    let nd = dimension(n)?;
    let theorem: TheoremId = theorem
        .parse()
        .map_err(|e: String| RunError::Usage(UsageError(e)))?;
    let weight = parse_weight(weight_spec)?;
    if !(theta_min > 0.0 && theta_max > theta_min && theta_max < 0.5) {
        return Err(RunError::Usage(UsageError(format!(
            "inconsistent theta range [{theta_min}, {theta_max}] (need 0 < min < max < 0.5)"
        ))));
    }

    let u = match test_function {
        "poisson" => capture!(
            "test-function",
            make_poisson_test(nd, pole_angle, pole_depth, &weight),
            classify_verifier
        ),
        "extremal" => {
            if n < 2 {
                return Err(RunError::Usage(UsageError(
                    "--test-function extremal needs --n >= 2".to_string(),
                )));
            }
            let solution = Arc::new(capture!("cascade", build_cascade(nd), classify_extremal));
            capture!(
                "test-function",
                make_extremal_test(&solution, &weight),
                classify_verifier
            )
        }
        other => {
            return Err(RunError::Usage(UsageError(format!(
                "unknown --test-function '{other}' (poisson|extremal)"
            ))))
        }
    };
    capture!("test-function-validation", u.validate(40, 24), classify_verifier);

    let grid = theta_grid(theta_min, theta_max, theta_per_decade.max(1));
    let opts = VerifyOptions {
        lambda_initial: lambda,
        ..VerifyOptions::default()
    };
    let report = capture!(
        "pipeline",
        run_pipeline(nd, theorem, &weight, &u, &grid, &opts),
        classify_verifier
    );

    let mut table = Table::new(&[
        "theta",
        "alpha",
        "d_integral",
        "cap_lhs",
        "cap_rhs",
        "c_measured",
        "k_diag",
        "lambda",
        "va_origin",
        "c1_measured",
        "c2",
        "c3",
        "u_at_eta",
        "measured_ratio",
        "cap_pass",
        "harnack_pass",
    ]);
    for rec in &report.records {
        table.push(vec![
            rec.theta,
            rec.alpha,
            rec.cap.d,
            rec.cap.lhs,
            rec.cap.rhs,
            rec.cap.c_measured,
            rec.cap.k_diag,
            rec.cap.lambda,
            rec.cap.va_origin,
            rec.harnack.c1_measured,
            rec.harnack.c2,
            rec.harnack.c3,
            rec.harnack.u_at_eta,
            rec.harnack.measured_ratio,
            rec.cap.pass as u8 as f64,
            rec.harnack.pass as u8 as f64,
        ]);
    }

    let pass = report.summary.pass;
    let notes = vec![format!(
        "{:?}: cap stage {}, harnack stage {}, K max {:.3e}, C3 uniformity {:.3}",
        report.theorem,
        if report.summary.all_cap_pass { "pass" } else { "fail" },
        if report.summary.all_harnack_pass { "pass" } else { "fail" },
        report.summary.k_max,
        report.summary.c3_uniformity
    )];
    let results = serde_json::to_value(&report).unwrap();
    let summary = Summary {
        pass,
        outcome: if pass {
            Outcome::Pass
        } else {
            Outcome::InvariantFailure
        },
        notes,
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: Some(table),
        cascade_table: None,
        axis_table: None,
    })
}

fn run_example(n: u32, scenario: &Scenario) -> Result<RunOutput, RunError> {
    let nd = dimension(n)?;
    if n == 1 {
        return run_example_planar(scenario);
    }
    let solution = capture!("cascade", build_cascade(nd), classify_extremal);
    let verification = capture!("verification", verify_example(&solution), classify_extremal);

    // Acceptance thresholds, pinned here: cascade residual, second-order
    // convergence of the PDE residual, the on-axis exponent fit, and a
    // positive lower constant. The absolute PDE residual is reported but
    // limited by the truncation constant of the second-order oracle.
    let cascade_ok = verification.cascade_residual_max < 1e-7;
    let convergence_ok = (3.5..=4.5).contains(&verification.pde_convergence_factor);
    let fit_ok = (verification.log_exponent_fit - (n as f64 + 1.0)).abs() <= 0.15;
    let lower_ok = verification.lower_c1 > 0.0;
    let pass = cascade_ok && convergence_ok && fit_ok && lower_ok;

    let column_names: Vec<String> = std::iter::once("t".to_string())
        .chain((0..=n + 1).map(|k| format!("f_{k}")))
        .collect();
    let column_refs: Vec<&str> = column_names.iter().map(String::as_str).collect();
    let mut cascade_table = Table::new(&column_refs);
    for i in 0..=400 {
        let t = i as f64 / 400.0;
        let mut row = vec![t];
        for k in 0..=(n as usize + 1) {
            row.push(solution.coefficient(k).eval(t));
        }
        cascade_table.push(row);
    }

    let mut axis_table = Table::new(&["rho", "v"]);
    for &rho in log_grid(1e-6, 0.5, 200).iter() {
        let v = capture!("axis", assemble_v(&solution, rho, 0.0), classify_extremal);
        axis_table.push(vec![rho, v]);
    }

    let results = serde_json::to_value(&verification).unwrap();
    let summary = Summary {
        pass,
        outcome: if pass {
            Outcome::Pass
        } else {
            Outcome::InvariantFailure
        },
        notes: vec![
            format!(
                "pde residual {:.3e}, cascade residual {:.3e} (< 1e-7: {cascade_ok})",
                verification.pde_residual_max, verification.cascade_residual_max
            ),
            format!(
                "fd convergence factor {:.2} (in [3.5, 4.5]: {convergence_ok})",
                verification.pde_convergence_factor
            ),
            format!(
                "on-axis log exponent {:.3} vs {} +/- 0.15: {fit_ok}",
                verification.log_exponent_fit,
                n + 1
            ),
        ],
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: Some(axis_table.clone()),
        cascade_table: Some(cascade_table),
        axis_table: Some(axis_table),
    })
}

/// The planar case has closed forms; measure both the plain and the inverted
/// variants and report their axis behaviour side by side.
fn run_example_planar(scenario: &Scenario) -> Result<RunOutput, RunError> {
    let ts = log_grid(1e-8, 1e-2, 60);
    let plain = capture!("plain-axis", axis_samples(closed_form_n1, &ts), classify_extremal);
    let variant = capture!(
        "variant-axis",
        axis_samples(closed_form_n1_variant, &ts),
        classify_extremal
    );

    // Fit the log exponent of -v t^{n} (n = 1) against log log(1/t).
    let fit = |samples: &[(f64, f64)]| -> Option<f64> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for &(t, v) in samples {
            if v < 0.0 {
                xs.push(((1.0f64 / t).ln()).ln());
                ys.push((-v * t).ln());
            }
        }
        if xs.len() < 8 {
            return None;
        }
        Some(cartwright_core::weight::least_squares_slope(&xs, &ys))
    };
    let plain_fit = fit(&plain);
    let variant_fit = fit(&variant);

    // Harmonicity spot-check away from the singular point.
    let h = 2e-3;
    let mut residual_max = 0.0f64;
    for form in [closed_form_n1, closed_form_n1_variant] {
        for i in 0..50 {
            let x = -0.6 + 1.2 * i as f64 / 49.0;
            let y = 0.25;
            let f = |a: f64, b: f64| form(a, b).unwrap_or(f64::NAN);
            let lap = (-f(x + 2.0 * h, y) + 16.0 * f(x + h, y) - 30.0 * f(x, y)
                + 16.0 * f(x - h, y)
                - f(x - 2.0 * h, y)
                - f(x, y + 2.0 * h)
                + 16.0 * f(x, y + h)
                + 16.0 * f(x, y - h)
                - f(x, y - 2.0 * h)
                - 30.0 * f(x, y))
                / (12.0 * h * h);
            residual_max = residual_max.max(lap.abs());
        }
    }
    let harmonic_ok = residual_max < 1e-8;
    let variant_exhibits_blowup = variant_fit.map(|s| (s - 2.0).abs() <= 0.15).unwrap_or(false);
    let pass = harmonic_ok && variant_exhibits_blowup;

    let mut axis_table = Table::new(&["t", "plain", "variant"]);
    for ((t, p), (_, v)) in plain.iter().zip(&variant) {
        axis_table.push(vec![*t, *p, *v]);
    }

    let results = json!({
        "harmonicity_residual_max": residual_max,
        "plain": {
            "formula": "Re(-(1-z) log^2(1-z))",
            "axis_value_at_1e-6": plain.iter().find(|(t, _)| *t >= 1e-6).map(|(_, v)| *v),
            "log_exponent_fit": plain_fit,
            "axis_blows_up": false,
        },
        "variant": {
            "formula": "Re(-log^2(1-z) / (1-z))",
            "log_exponent_fit": variant_fit,
            "axis_blows_up": true,
        },
    });
    let summary = Summary {
        pass,
        outcome: if pass {
            Outcome::Pass
        } else {
            Outcome::InvariantFailure
        },
        notes: vec![
            "plain form vanishes on the axis; the inverted variant carries the t^-1 log^2 blow-up"
                .to_string(),
        ],
    };
    Ok(RunOutput {
        document: ReportDocument::new(scenario_value(scenario), results, summary),
        primary_table: Some(axis_table.clone()),
        cascade_table: None,
        axis_table: Some(axis_table),
    })
}
