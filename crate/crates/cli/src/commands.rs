//! Implementations of the five subcommands. Every file is rendered into a
//! string first and written in one call, so failures never leave partial
//! output behind.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ropeplan::{
    base_theta, disturbance_of_thetas, estimate_set, extension_margins, extension_scale,
    verify_relative_property, DpropeSelection, RopeConfig, ScalingPlan, ThetaVector,
};

use crate::config::{
    resolve_model, Axis, DisturbanceArgs, EstimateArgs, Format, Method, MethodArgs, ModelArgs,
    PlanArgs, RunFile, SweepArgs, VerifyArgs,
};
use crate::CliError;

const DEFAULT_BINS: usize = 360;
const DEFAULT_EPSILON: f64 = 1e-8;
const VERIFY_TOLERANCE: f64 = 1e-9;

// ── Shared helpers ──────────────────────────────────────────────────────────

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

fn load_plan(path: &Path) -> Result<ScalingPlan, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    ScalingPlan::from_json(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn explicit_model_given(args: &ModelArgs) -> bool {
    args.model.is_some()
        || args.head_dim.is_some()
        || args.base.is_some()
        || args.pretrain_len.is_some()
}

/// Reconcile a plan's embedded model with explicitly supplied model flags.
fn plan_config(plan: &ScalingPlan, args: &ModelArgs, file: &RunFile) -> Result<RopeConfig, CliError> {
    if explicit_model_given(args) {
        let resolved = resolve_model(args, file)?;
        if resolved != plan.config {
            return Err(CliError::Usage(format!(
                "plan model (d={}, base={}, L={}) does not match the requested model \
                 (d={}, base={}, L={})",
                plan.config.head_dim,
                plan.config.base,
                plan.config.pretrain_len,
                resolved.head_dim,
                resolved.base,
                resolved.pretrain_len
            )));
        }
    }
    Ok(plan.config)
}

fn formats(choice: Option<Format>) -> (bool, bool) {
    match choice.unwrap_or(Format::Both) {
        Format::Csv => (true, false),
        Format::Json => (false, true),
        Format::Both => (true, true),
    }
}

/// Construct a plan from method flags; shared by `plan` and `disturbance`.
fn build_plan(
    config: &RopeConfig,
    target_len: u64,
    method: Method,
    margs: &MethodArgs,
    file: &RunFile,
    bins: usize,
    epsilon: f64,
) -> Result<ScalingPlan, CliError> {
    match method {
        Method::Pi => Ok(ropeplan::plan_pi(config, target_len)?),
        Method::Extrapolate => Ok(ropeplan::plan_extrapolate(config, target_len)?),
        Method::Yarn => {
            let alpha = margs.alpha.or(file.alpha).unwrap_or(1.0);
            let beta = margs.beta.or(file.beta).unwrap_or(32.0);
            Ok(ropeplan::plan_yarn_oriented(
                config,
                target_len,
                alpha,
                beta,
                margs.yarn_orientation.into(),
            )?)
        }
        Method::Dprope => {
            let selection = dprope_selection(config, target_len, margs, file)?;
            Ok(ropeplan::plan_dprope(config, target_len, bins, epsilon, selection)?)
        }
    }
}

fn dprope_selection(
    config: &RopeConfig,
    target_len: u64,
    margs: &MethodArgs,
    file: &RunFile,
) -> Result<DpropeSelection, CliError> {
    let (t, n_hat) = match (margs.t, margs.n_hat) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--t and --n-hat are mutually exclusive".into()))
        }
        (Some(t), None) => (Some(t), None),
        (None, Some(n)) => (None, Some(n)),
        (None, None) => match (file.t, file.n_hat) {
            (Some(_), Some(_)) => {
                return Err(CliError::Usage("config sets both t and n_hat".into()))
            }
            other => other,
        },
    };
    Ok(match (t, n_hat) {
        (Some(_), Some(_)) => unreachable!("rejected above"),
        (Some(t), None) => DpropeSelection::Threshold(t),
        (None, Some(n)) => DpropeSelection::InterpolatedDims(n),
        // Default interpolated-dimension counts for the common doubling and
        // quadrupling extensions; the unconstrained per-pair optimum
        // otherwise.
        (None, None) => {
            let scale = extension_scale(config, target_len);
            if scale == 2.0 && config.head_dim >= 80 {
                DpropeSelection::InterpolatedDims(80)
            } else if scale == 4.0 && config.head_dim >= 64 {
                DpropeSelection::InterpolatedDims(64)
            } else {
                DpropeSelection::Threshold(0.0)
            }
        }
    })
}

fn method_label(plan: &ScalingPlan) -> &'static str {
    plan.method.name()
}

// ── estimate ────────────────────────────────────────────────────────────────

pub fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    let file = RunFile::load(args.model.config.as_ref())?;
    let (config, thetas, default_len) = match &args.plan {
        Some(path) => {
            let plan = load_plan(path)?;
            let config = plan_config(&plan, &args.model, &file)?;
            let target = plan.target_len;
            (config, plan.theta_hats(), target)
        }
        None => {
            let config = resolve_model(&args.model, &file)?;
            (config, base_theta(&config), config.pretrain_len)
        }
    };
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let length = args.length.unwrap_or(default_len);

    let dims: Option<Vec<usize>> = match &args.dims {
        Some(list) => {
            let mut dims = list.clone();
            dims.sort_unstable();
            dims.dedup();
            if let Some(&bad) = dims.iter().find(|&&i| i >= config.num_pairs()) {
                return Err(CliError::Usage(format!(
                    "dimension pair {bad} out of range (model has {} pairs)",
                    config.num_pairs()
                )));
            }
            Some(dims)
        }
        None => None,
    };

    let set = estimate_set(&config, &thetas, length, bins)?;
    let (csv, json) = formats(args.output.format);
    let mut written = Vec::new();
    if csv {
        let text = ropeplan::distribution::set_to_csv(&set, dims.as_deref());
        written.push(write_file(&args.output.out, "histograms.csv", &text)?);
    }
    if json {
        let text = ropeplan::distribution::set_to_json(&set, dims.as_deref());
        written.push(write_file(&args.output.out, "histograms.json", &text)?);
    }

    let exported = dims.as_ref().map_or(set.histograms.len(), |d| d.len());
    println!(
        "estimated {} histogram(s) (bins={}, length={}); wrote {}",
        exported,
        bins,
        length,
        written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
    );
    Ok(())
}

// ── disturbance ─────────────────────────────────────────────────────────────

#[derive(serde::Serialize)]
struct ScoredExport<'m> {
    method: &'m str,
    target_len: u64,
    bins: usize,
    epsilon: f64,
    aggregate: f64,
    per_dim: Vec<f64>,
}

pub fn disturbance(args: DisturbanceArgs) -> Result<(), CliError> {
    let file = RunFile::load(args.model.config.as_ref())?;
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let epsilon = args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);

    if args.table3 {
        if explicit_model_given(&args.model) {
            let resolved = resolve_model(&args.model, &file)?;
            let llama2 = RopeConfig::new(128, 10000.0, 4096).expect("preset is valid");
            if resolved != llama2 {
                return Err(CliError::Usage(
                    "--table3 is fixed to the llama2 preset; drop the model flags".into(),
                ));
            }
        }
        return table3(bins, epsilon, &args.output.out);
    }

    let (config, plan, label): (RopeConfig, ScalingPlan, String) = match (&args.plan, args.method.method.or(file.method()?)) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("--plan and --method are mutually exclusive".into()))
        }
        (Some(path), None) => {
            let plan = load_plan(path)?;
            let config = plan_config(&plan, &args.model, &file)?;
            let label = format!("plan:{}", method_label(&plan));
            (config, plan, label)
        }
        (None, Some(method)) => {
            let config = resolve_model(&args.model, &file)?;
            let target = args
                .target_len
                .or(file.target_len)
                .ok_or_else(|| CliError::Usage("--target-len is required".into()))?;
            if target <= config.pretrain_len {
                return Err(CliError::Usage(format!(
                    "target_len {target} must exceed the pre-training length {}",
                    config.pretrain_len
                )));
            }
            let plan = build_plan(&config, target, method, &args.method, &file, bins, epsilon)?;
            let label = method_label(&plan).to_string();
            (config, plan, label)
        }
        (None, None) => {
            return Err(CliError::Usage("supply --plan or --method".into()))
        }
    };

    let target_len = args.target_len.or(file.target_len).unwrap_or(plan.target_len);
    if target_len <= config.pretrain_len {
        return Err(CliError::Usage(format!(
            "target_len {target_len} must exceed the pre-training length {}",
            config.pretrain_len
        )));
    }

    let scored = disturbance_of_thetas(&plan.theta_hats(), &config, target_len, bins, epsilon)?;
    let margins = extension_margins(&config, target_len, bins, epsilon)?;

    let (csv, json) = formats(args.output.format);
    let mut written = Vec::new();
    if csv {
        let mut text = String::from("dim_pair,disturbance\n");
        for (i, d) in scored.per_dim.iter().enumerate() {
            text.push_str(&format!("{i},{d}\n"));
        }
        written.push(write_file(&args.output.out, "disturbance.csv", &text)?);
        written.push(write_file(&args.output.out, "margins.csv", &margins.to_csv())?);
    }
    if json {
        let export = ScoredExport {
            method: &label,
            target_len,
            bins,
            epsilon,
            aggregate: scored.aggregate,
            per_dim: scored.per_dim.clone(),
        };
        let mut text =
            serde_json::to_string_pretty(&export).expect("disturbance export serializes");
        text.push('\n');
        written.push(write_file(&args.output.out, "disturbance.json", &text)?);
        written.push(write_file(&args.output.out, "margins.json", &margins.to_json())?);
    }

    println!(
        "method={} target_len={} aggregate_disturbance={:.6e}; wrote {}",
        label,
        target_len,
        scored.aggregate,
        written.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
    );
    Ok(())
}

fn table3(bins: usize, epsilon: f64, out: &Path) -> Result<(), CliError> {
    let config = RopeConfig::new(128, 10000.0, 4096).expect("preset is valid");
    let mut rows: Vec<(&str, Vec<f64>)> =
        vec![("pi", Vec::new()), ("yarn", Vec::new()), ("dprope", Vec::new())];

    for (target, n_hat) in [(8192u64, 80usize), (16384, 64)] {
        let plans = [
            ropeplan::plan_pi(&config, target)?,
            ropeplan::plan_yarn(&config, target, 1.0, 32.0)?,
            ropeplan::plan_dprope(
                &config,
                target,
                bins,
                epsilon,
                DpropeSelection::InterpolatedDims(n_hat),
            )?,
        ];
        for (row, plan) in rows.iter_mut().zip(&plans) {
            let d = disturbance_of_thetas(&plan.theta_hats(), &config, target, bins, epsilon)?;
            row.1.push(d.aggregate);
        }
    }

    let mut csv = String::from("method,disturbance_8192,disturbance_16384\n");
    for (name, vals) in &rows {
        csv.push_str(&format!("{},{},{}\n", name, vals[0], vals[1]));
    }
    let path = write_file(out, "table3.csv", &csv)?;

    println!("aggregate disturbance (x1e-3), llama2 preset, bins={bins}, epsilon={epsilon:e}");
    println!("{:<10} {:>10} {:>10}", "method", "8192", "16384");
    for (name, vals) in &rows {
        println!("{:<10} {:>10.3} {:>10.3}", name, vals[0] * 1e3, vals[1] * 1e3);
    }
    println!("wrote {}", path.display());
    Ok(())
}

// ── plan ────────────────────────────────────────────────────────────────────

pub fn plan(args: PlanArgs) -> Result<(), CliError> {
    let file = RunFile::load(args.model.config.as_ref())?;
    let config = resolve_model(&args.model, &file)?;
    let target = args
        .target_len
        .or(file.target_len)
        .ok_or_else(|| CliError::Usage("--target-len is required".into()))?;
    let method = args
        .method
        .method
        .or(file.method()?)
        .ok_or_else(|| CliError::Usage("--method is required".into()))?;
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let epsilon = args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);

    let plan = build_plan(&config, target, method, &args.method, &file, bins, epsilon)?;
    let scored = disturbance_of_thetas(&plan.theta_hats(), &config, target, bins, epsilon)?;

    write_file(&args.output.out, "plan.json", &plan.to_json(bins, epsilon))?;
    write_file(&args.output.out, "theta_hat.txt", &plan.theta_flat())?;

    println!(
        "method={} interpolated_pairs={} aggregate_disturbance={:.6e}",
        method_label(&plan),
        plan.interpolated_pairs(),
        scored.aggregate
    );
    Ok(())
}

// ── sweep ───────────────────────────────────────────────────────────────────

fn parse_values<T: std::str::FromStr>(values: &[String], axis: &str) -> Result<Vec<T>, CliError> {
    values
        .iter()
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| CliError::Usage(format!("invalid {axis} value {v:?}")))
        })
        .collect()
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = RunFile::load(args.model.config.as_ref())?;
    let config = resolve_model(&args.model, &file)?;
    let target = args
        .target_len
        .or(file.target_len)
        .ok_or_else(|| CliError::Usage("--target-len is required".into()))?;
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let epsilon = args.epsilon.or(file.epsilon).unwrap_or(DEFAULT_EPSILON);
    if args.values.is_empty() {
        return Err(CliError::Usage("--values must not be empty".into()));
    }

    let csv = match args.axis {
        Axis::T => {
            let ts: Vec<f64> = parse_values(&args.values, "t")?;
            let points = ropeplan::sweep_threshold(&config, target, bins, epsilon, &ts)?;
            ropeplan::sweep_to_csv(&points)
        }
        Axis::NHat => {
            let n_hats: Vec<usize> = parse_values(&args.values, "n-hat")?;
            let points =
                ropeplan::sweep_interpolated_dims(&config, target, bins, epsilon, &n_hats)?;
            ropeplan::sweep_to_csv(&points)
        }
        Axis::B => {
            let bins_list: Vec<usize> = parse_values(&args.values, "b")?;
            let selection = match (args.t, args.n_hat) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Usage("--t and --n-hat are mutually exclusive".into()))
                }
                (Some(t), None) => DpropeSelection::Threshold(t),
                (None, Some(n)) => DpropeSelection::InterpolatedDims(n),
                (None, None) => DpropeSelection::Threshold(0.0),
            };
            let points = ropeplan::sweep_bins(&config, target, epsilon, selection, &bins_list)?;
            ropeplan::sweep_to_csv(&points)
        }
    };

    let path = write_file(&args.output.out, "sweep.csv", &csv)?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}

// ── verify ──────────────────────────────────────────────────────────────────

pub fn verify(args: VerifyArgs) -> Result<(), CliError> {
    let file = RunFile::load(args.model.config.as_ref())?;
    let config = resolve_model(&args.model, &file)?;
    let trials = args.trials.or(file.trials).unwrap_or(1000);
    if trials == 0 {
        return Err(CliError::Usage("--trials must be >= 1".into()));
    }
    let seed = args.seed.or(file.seed).unwrap_or(42);

    let mut vectors: Vec<(String, ThetaVector)> =
        vec![("base".to_string(), base_theta(&config))];
    if let Some(path) = &args.plan {
        let plan = load_plan(path)?;
        if plan.config.head_dim != config.head_dim {
            return Err(CliError::Usage(format!(
                "plan head_dim {} does not match the model's {}",
                plan.config.head_dim, config.head_dim
            )));
        }
        vectors.push((format!("plan:{}", method_label(&plan)), plan.theta_hats()));
    }

    let d = config.head_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_disc = 0.0f64;
    for _ in 0..trials {
        let q: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let m = rng.gen_range(0..=1_000_000u64);
        let n = rng.gen_range(0..=1_000_000u64);
        for (_, thetas) in &vectors {
            let disc = verify_relative_property(&q, &k, m, n, thetas)?;
            max_disc = max_disc.max(disc);
        }
    }

    let labels: Vec<&str> = vectors.iter().map(|(l, _)| l.as_str()).collect();
    let passed = max_disc <= VERIFY_TOLERANCE;
    println!(
        "trials={} seed={} d={} frequencies=[{}] max_discrepancy={:.3e} {}",
        trials,
        seed,
        d,
        labels.join(","),
        max_disc,
        if passed { "PASS" } else { "FAIL" }
    );
    if !passed {
        return Err(CliError::Verification(format!(
            "max discrepancy {max_disc:.3e} exceeds {VERIFY_TOLERANCE:e}"
        )));
    }
    Ok(())
}
