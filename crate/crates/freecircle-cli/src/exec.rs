//! Command execution: turns a parsed experiment into a JSON value and a CSV
//! table, leaving rendering and file placement to the caller.

use std::path::Path;

use freecircle::freeconv::{self, ConvError, RouteOptions, DEFAULT_ROUTE_THRESHOLD};
use freecircle::limits::{
    check_ck_bound, classify, default_f_grid, default_lemma_grid, verify_f_estimate,
    verify_lemma_bounds, BoundReport, SequenceSpec,
};
use freecircle::measure::{MeasureError, MomentVector};
use freecircle::rmtsim::{simulate_product, SimConfig};

use crate::config::{ExperimentConfig, Guards, MeasureLiteral, SpecLiteral};
use crate::report::{Cell, Table, Value};

/// Moment depth given to bare uniform literals inside a sequence: the
/// classifier probes uniformity to this order, so the stored vector must
/// reach at least as far.
const UNIFORM_ORDER_HINT: usize = 16;

/// A finished experiment, ready to render.
pub struct Outcome {
    pub json: Value,
    pub table: Table,
    /// True when an inequality report failed; the process exits with 2.
    pub bounds_failed: bool,
    /// Eigenangle sidecar rows (trial, index, angle); present only when the
    /// simulation collected angles and a sidecar destination exists.
    pub eigenangles: Option<Vec<(usize, usize, f64)>>,
}

impl Outcome {
    fn new(json: Value, table: Table) -> Self {
        Self {
            json,
            table,
            bounds_failed: false,
            eigenangles: None,
        }
    }
}

/// Runs one experiment. `eigenangle_path` is the sidecar destination the
/// caller will use if the simulate command produces angles; it is recorded
/// in the report so readers can find the file.
pub fn execute(
    config: &ExperimentConfig,
    guards: Guards,
    eigenangle_path: Option<&Path>,
) -> Result<Outcome, String> {
    match config {
        ExperimentConfig::Convolve {
            measure_1,
            measure_2,
            k_max,
            ..
        } => convolve(measure_1, measure_2, *k_max, guards),
        ExperimentConfig::Iterate {
            spec, n_max, k_max, ..
        } => iterate(spec, *n_max, *k_max, guards),
        ExperimentConfig::Classify { spec, horizon, .. } => run_classify(spec, *horizon),
        ExperimentConfig::VerifyBounds {
            measure,
            spec,
            n,
            k_max,
            ..
        } => verify_bounds(measure.as_ref(), spec.as_ref(), *n, *k_max),
        ExperimentConfig::Simulate {
            factors,
            n_dim,
            trials,
            seed,
            k_max,
            collect_eigenangles,
            flop_budget,
            ..
        } => simulate(
            factors,
            *n_dim,
            *trials,
            *seed,
            *k_max,
            collect_eigenangles.unwrap_or(true),
            guards.flop_budget.or(*flop_budget),
            eigenangle_path,
        ),
    }
}

fn positive(value: usize, field: &str) -> Result<(), String> {
    if value == 0 {
        Err(format!("field {field}: must be at least 1"))
    } else {
        Ok(())
    }
}

/// Both convolution routes side by side. When a factor has zero first
/// moment the transform route is undefined; the oracle values then fill both
/// columns and the note says so, keeping every discrepancy entry exactly 0.
fn convolve(
    lit_1: &MeasureLiteral,
    lit_2: &MeasureLiteral,
    k_max: usize,
    guards: Guards,
) -> Result<Outcome, String> {
    positive(k_max, "k-max")?;
    let v1 = moments_of(lit_1, "measure-1", k_max)?;
    let v2 = moments_of(lit_2, "measure-2", k_max)?;
    let oracle = freeconv::convolve_moments_with_cap(&v1, &v2, k_max, guards.word_cap)
        .map_err(|e| e.to_string())?;
    let transform = match freeconv::convolve_s(&v1, &v2, k_max) {
        Ok(t) => Some(t),
        Err(ConvError::Measure(MeasureError::STransformUndefined)) => None,
        Err(e) => return Err(e.to_string()),
    };

    let mut entries = Vec::with_capacity(k_max);
    let mut rows = Vec::with_capacity(k_max);
    let mut max_discrepancy = 0.0f64;
    for k in 1..=k_max {
        let o = oracle.moment(k as i64).map_err(|e| e.to_string())?;
        let (t, discrepancy) = match &transform {
            Some(tv) => {
                let t = tv.moment(k as i64).map_err(|e| e.to_string())?;
                (t, (t - o).norm())
            }
            None => (o, 0.0),
        };
        max_discrepancy = max_discrepancy.max(discrepancy);
        entries.push(Value::object(vec![
            ("k", Value::Int(k as i64)),
            ("transform", Value::complex(t)),
            ("oracle", Value::complex(o)),
            ("discrepancy", Value::Float(discrepancy)),
        ]));
        rows.push(vec![
            Cell::Int(k as i64),
            Cell::Float(t.re),
            Cell::Float(t.im),
            Cell::Float(o.re),
            Cell::Float(o.im),
            Cell::Float(discrepancy),
        ]);
    }

    let route_note = if transform.is_some() {
        Value::Null
    } else {
        Value::Text(
            "transform route undefined (a factor has zero first moment); \
             oracle values fill both columns"
                .into(),
        )
    };
    let json = Value::object(vec![
        ("command", Value::Text("convolve".into())),
        ("k-max", Value::Int(k_max as i64)),
        ("max-discrepancy", Value::Float(max_discrepancy)),
        ("route-note", route_note),
        ("moments", Value::List(entries)),
    ]);
    let table = Table {
        columns: vec![
            "k",
            "transform_re",
            "transform_im",
            "oracle_re",
            "oracle_im",
            "discrepancy",
        ],
        rows,
    };
    Ok(Outcome::new(json, table))
}

fn moments_of(lit: &MeasureLiteral, field: &str, k_max: usize) -> Result<MomentVector, String> {
    lit.circle(field, k_max)?
        .moments(k_max)
        .map_err(|e| format!("field {field}: {e}"))
}

/// Flatness diagnostic of the partial products: max_{k ≤ K} |c_k| per n.
fn iterate(
    spec_lit: &SpecLiteral,
    n_max: usize,
    k_max: usize,
    guards: Guards,
) -> Result<Outcome, String> {
    positive(n_max, "n-max")?;
    positive(k_max, "k-max")?;
    let spec = spec_lit.spec("spec", k_max.max(UNIFORM_ORDER_HINT))?;
    let factors = spec.factors(n_max).map_err(|e| e.to_string())?;
    let vectors: Vec<MomentVector> = factors
        .iter()
        .map(|m| m.moments(k_max))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let options = RouteOptions {
        route_threshold: DEFAULT_ROUTE_THRESHOLD,
        word_cap: guards.word_cap,
    };
    let partials =
        freeconv::product_moments_with(&vectors, k_max, options).map_err(|e| e.to_string())?;

    let mut entries = Vec::with_capacity(n_max);
    let mut rows = Vec::with_capacity(n_max);
    for (i, p) in partials.iter().enumerate() {
        let n = i + 1;
        let max_abs = p.max_abs_moment();
        entries.push(Value::object(vec![
            ("n", Value::Int(n as i64)),
            ("max-abs-moment", Value::Float(max_abs)),
        ]));
        rows.push(vec![Cell::Int(n as i64), Cell::Float(max_abs)]);
    }
    let json = Value::object(vec![
        ("command", Value::Text("iterate".into())),
        ("n-max", Value::Int(n_max as i64)),
        ("k-max", Value::Int(k_max as i64)),
        ("rows", Value::List(entries)),
    ]);
    let table = Table {
        columns: vec!["n", "max_abs_moment"],
        rows,
    };
    Ok(Outcome::new(json, table))
}

/// Limit classification with its evidence. The angle list is JSON-only; the
/// CSV view keeps one field-value row per scalar.
fn run_classify(spec_lit: &SpecLiteral, horizon: usize) -> Result<Outcome, String> {
    positive(horizon, "horizon")?;
    let spec = spec_lit.spec("spec", UNIFORM_ORDER_HINT)?;
    let result = classify(&spec, horizon).map_err(|e| e.to_string())?;

    let w = &result.witnesses;
    let witnesses = Value::object(vec![
        (
            "zero-mean-indices",
            Value::List(
                w.zero_mean_indices
                    .iter()
                    .map(|&i| Value::Int(i as i64))
                    .collect(),
            ),
        ),
        (
            "uniform-index",
            w.uniform_index.map_or(Value::Null, |i| Value::Int(i as i64)),
        ),
        ("product-estimate", Value::Float(w.product_estimate)),
        ("alpha-sum-estimate", Value::Float(w.alpha_sum_estimate)),
        (
            "liminf-estimate",
            w.liminf_estimate.map_or(Value::Null, Value::Float),
        ),
    ]);
    let case = result.case_label.to_string();
    let json = Value::object(vec![
        ("command", Value::Text("classify".into())),
        ("horizon", Value::Int(horizon as i64)),
        ("case", Value::Text(case.clone())),
        ("converges", Value::Bool(result.converges_to_uniform)),
        (
            "indeterminate-at-horizon",
            Value::Bool(result.indeterminate_at_horizon),
        ),
        ("witnesses", witnesses),
        (
            "normalization-angles",
            Value::List(
                result
                    .normalization_angles
                    .iter()
                    .map(|&phi| Value::Float(phi))
                    .collect(),
            ),
        ),
    ]);

    let joined = w
        .zero_mean_indices
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let text = |s: &str| Cell::Text(s.to_string());
    let rows = vec![
        vec![text("case"), Cell::Text(case)],
        vec![
            text("converges"),
            Cell::Text(result.converges_to_uniform.to_string()),
        ],
        vec![
            text("indeterminate-at-horizon"),
            Cell::Text(result.indeterminate_at_horizon.to_string()),
        ],
        vec![
            text("product-estimate"),
            Cell::Float(w.product_estimate),
        ],
        vec![
            text("alpha-sum-estimate"),
            Cell::Float(w.alpha_sum_estimate),
        ],
        vec![text("zero-mean-indices"), Cell::Text(joined)],
        vec![
            text("uniform-index"),
            w.uniform_index
                .map_or_else(|| Cell::Text(String::new()), |i| Cell::Int(i as i64)),
        ],
        vec![
            text("liminf-estimate"),
            w.liminf_estimate
                .map_or_else(|| Cell::Text(String::new()), Cell::Float),
        ],
    ];
    let table = Table {
        columns: vec!["field", "value"],
        rows,
    };
    Ok(Outcome::new(json, table))
}

/// Inequality reports: the per-measure suite over the default grid and/or
/// the sequence bounds at length n. Any failed report flips the exit code.
fn verify_bounds(
    measure: Option<&MeasureLiteral>,
    spec: Option<&SpecLiteral>,
    n: Option<usize>,
    k_max: usize,
) -> Result<Outcome, String> {
    positive(k_max, "k-max")?;
    if measure.is_none() && spec.is_none() {
        return Err("provide at least one of measure, spec".into());
    }
    if spec.is_none() && n.is_some() {
        return Err("field n: only valid together with spec".into());
    }

    let mut reports: Vec<BoundReport> = Vec::new();
    if let Some(lit) = measure {
        // The per-measure inequalities are stated for a real positive mean;
        // they are phase-covariant, so rotate the mean onto the positive
        // axis first and report on the rotated measure.
        let mut m = lit.atomic("measure")?;
        let c1 = m.first_moment();
        if c1.norm() > 0.0 && c1.arg() != 0.0 {
            m = m.rotate(-c1.arg());
        }
        let a = m.first_moment().re;
        reports.extend(
            verify_lemma_bounds(&m, &default_lemma_grid(a), k_max)
                .map_err(|e| format!("field measure: {e}"))?,
        );
    }
    if let Some(lit) = spec {
        let n = n.ok_or("field n: required together with spec")?;
        let spec = lit.spec("spec", k_max.max(UNIFORM_ORDER_HINT))?;
        reports.push(check_ck_bound(&spec, n, k_max).map_err(|e| format!("field spec: {e}"))?);
        let radius = f_grid_radius(&spec, n)?;
        reports.push(
            verify_f_estimate(&spec, n, k_max, &default_f_grid(radius))
                .map_err(|e| format!("field spec: {e}"))?,
        );
    }

    let all_pass = reports.iter().all(|r| r.pass);
    let mut rows = Vec::new();
    let entries: Vec<Value> = reports
        .iter()
        .map(|r| {
            let points: Vec<Value> = r
                .points
                .iter()
                .map(|p| {
                    rows.push(vec![
                        Cell::Text(r.inequality_id.to_string()),
                        Cell::Text(p.label.clone()),
                        Cell::Float(p.lhs),
                        Cell::Float(p.rhs),
                        Cell::Float(p.margin),
                    ]);
                    Value::object(vec![
                        ("label", Value::Text(p.label.clone())),
                        ("lhs", Value::Float(p.lhs)),
                        ("rhs", Value::Float(p.rhs)),
                        ("margin", Value::Float(p.margin)),
                    ])
                })
                .collect();
            Value::object(vec![
                ("inequality", Value::Text(r.inequality_id.to_string())),
                ("pass", Value::Bool(r.pass)),
                ("min-margin", Value::Float(r.min_margin())),
                ("points", Value::List(points)),
            ])
        })
        .collect();

    let json = Value::object(vec![
        ("command", Value::Text("verify-bounds".into())),
        ("k-max", Value::Int(k_max as i64)),
        ("all-pass", Value::Bool(all_pass)),
        ("reports", Value::List(entries)),
    ]);
    let table = Table {
        columns: vec!["inequality", "point", "lhs", "rhs", "margin"],
        rows,
    };
    let mut outcome = Outcome::new(json, table);
    outcome.bounds_failed = !all_pass;
    Ok(outcome)
}

/// The f-estimate grid radius, matching the bound's own applicability
/// radius: a_min²/6684, shrunk by 1/Σα once the α-sum exceeds 1. Zero-mean
/// factors make the bound call itself error, so no guard is needed here.
fn f_grid_radius(spec: &SequenceSpec, n: usize) -> Result<f64, String> {
    let factors = spec.factors(n).map_err(|e| e.to_string())?;
    let mut a_min = f64::INFINITY;
    let mut alpha_sum = 0.0;
    for m in &factors {
        let a = m.first_moment().map_err(|e| e.to_string())?.norm();
        a_min = a_min.min(a);
        alpha_sum += 1.0 - a;
    }
    if !a_min.is_finite() {
        return Ok(0.0);
    }
    Ok(a_min * a_min / 6684.0 * (1.0 / alpha_sum.max(1.0)).min(1.0))
}

/// Random-matrix check of the predicted product moments.
#[allow(clippy::too_many_arguments)]
fn simulate(
    factor_lits: &[MeasureLiteral],
    n_dim: usize,
    trials: usize,
    seed: u64,
    k_max: usize,
    collect_eigenangles: bool,
    flop_budget: Option<f64>,
    eigenangle_path: Option<&Path>,
) -> Result<Outcome, String> {
    let factors = factor_lits
        .iter()
        .enumerate()
        .map(|(i, lit)| lit.atomic(&format!("factors[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut cfg = SimConfig::new(n_dim, trials, seed, k_max, factors);
    cfg.collect_eigenangles = collect_eigenangles;
    cfg.flop_budget = flop_budget;
    let result = simulate_product(&cfg).map_err(|e| e.to_string())?;

    let mut entries = Vec::with_capacity(k_max);
    let mut rows = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let e = result.empirical_moments[k - 1];
        let p = result.predicted_moments[k - 1];
        let se = result.standard_errors[k - 1];
        let abs_error = (e - p).norm();
        entries.push(Value::object(vec![
            ("k", Value::Int(k as i64)),
            ("empirical", Value::complex(e)),
            ("predicted", Value::complex(p)),
            ("std-error", Value::Float(se)),
            ("abs-error", Value::Float(abs_error)),
        ]));
        rows.push(vec![
            Cell::Int(k as i64),
            Cell::Float(e.re),
            Cell::Float(e.im),
            Cell::Float(p.re),
            Cell::Float(p.im),
            Cell::Float(se),
            Cell::Float(abs_error),
        ]);
    }

    let sidecar = match (collect_eigenangles, eigenangle_path) {
        (true, Some(path)) => {
            let mut angle_rows = Vec::new();
            for (trial, angles) in result.eigenangles.iter().enumerate() {
                for (index, &angle) in angles.iter().enumerate() {
                    angle_rows.push((trial, index, angle));
                }
            }
            Some((path.to_path_buf(), angle_rows))
        }
        _ => None,
    };
    let eigenangles_file = sidecar
        .as_ref()
        .map_or(Value::Null, |(path, _)| {
            Value::Text(path.display().to_string())
        });

    let json = Value::object(vec![
        ("command", Value::Text("simulate".into())),
        ("n-dim", Value::Int(n_dim as i64)),
        ("trials", Value::Int(trials as i64)),
        ("seed", Value::UInt(seed)),
        ("k-max", Value::Int(k_max as i64)),
        ("flop-estimate", Value::Float(cfg.flop_estimate())),
        ("eigenangles-collected", Value::Bool(collect_eigenangles)),
        ("eigenangles-file", eigenangles_file),
        ("moments", Value::List(entries)),
    ]);
    let table = Table {
        columns: vec![
            "k",
            "empirical_re",
            "empirical_im",
            "predicted_re",
            "predicted_im",
            "std_error",
            "abs_error",
        ],
        rows,
    };
    let mut outcome = Outcome::new(json, table);
    outcome.eigenangles = sidecar.map(|(_, rows)| rows);
    Ok(outcome)
}
