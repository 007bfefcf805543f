//! Frequency-scaling plans for context-window extension: uniform
//! interpolation, pure extrapolation, ratio-banded blending (YaRN), and the
//! disturbance-minimizing per-dimension selector, together with parameter
//! sweeps and the plan file format.

use crate::disturbance::{extension_margins, DisturbanceReport};
use crate::error::{Error, Result};
use crate::rope::{base_theta, extension_scale, rotation_ratio, RopeConfig, ThetaVector};

const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const PLAN_SCHEMA_VERSION: &str = "1";

// ── Plan data model ─────────────────────────────────────────────────────────

/// How one dimension pair is treated by a plan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairStrategy {
    /// Frequency divided by the scale factor.
    Interpolate,
    /// Frequency kept unchanged.
    Extrapolate,
    /// Linear mix; `gamma` is the weight of the unchanged frequency, so
    /// `theta_hat = (1 - gamma) * theta / s + gamma * theta`.
    Blend { gamma: f64 },
}

impl PairStrategy {
    fn tag(&self) -> &'static str {
        match self {
            PairStrategy::Interpolate => "interpolate",
            PairStrategy::Extrapolate => "extrapolate",
            PairStrategy::Blend { .. } => "blend",
        }
    }
}

/// Strategy and resulting frequency of one dimension pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairAssignment {
    pub dim_pair: usize,
    pub strategy: PairStrategy,
    pub theta_hat: f64,
}

/// Selection rule of the disturbance-driven planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DpropeSelection {
    /// Interpolate every pair whose margin exceeds the threshold; the rest
    /// extrapolate (ties extrapolate).
    Threshold(f64),
    /// Interpolate exactly `n_hat / 2` pairs, chosen by descending margin
    /// with lower pair indices winning ties. `n_hat` counts scalar
    /// dimensions and must be even and at most `head_dim`.
    InterpolatedDims(usize),
}

/// Branch orientation for the ratio-banded planner. `Standard` interpolates
/// pairs with few pre-training rotations (`r < alpha`) and extrapolates pairs
/// with many (`r > beta`); `Swapped` exchanges the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YarnOrientation {
    #[default]
    Standard,
    Swapped,
}

impl YarnOrientation {
    fn tag(&self) -> &'static str {
        match self {
            YarnOrientation::Standard => "standard",
            YarnOrientation::Swapped => "swapped",
        }
    }
}

/// Which planner produced a plan, with its creation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlanMethod {
    Pi,
    Extrapolate,
    Yarn { alpha: f64, beta: f64, orientation: YarnOrientation },
    Dprope { selection: DpropeSelection, bins: usize, epsilon: f64 },
}

impl PlanMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PlanMethod::Pi => "pi",
            PlanMethod::Extrapolate => "extrapolate",
            PlanMethod::Yarn { .. } => "yarn",
            PlanMethod::Dprope { .. } => "dprope",
        }
    }
}

/// A complete per-dimension scaling plan: the artifact's exported product.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPlan {
    pub config: RopeConfig,
    pub target_len: u64,
    pub method: PlanMethod,
    /// One assignment per dimension pair, ascending pair index.
    pub per_pair: Vec<PairAssignment>,
}

impl ScalingPlan {
    /// Extension scale factor `s = target_len / pretrain_len`.
    pub fn scale(&self) -> f64 {
        extension_scale(&self.config, self.target_len)
    }

    /// The modified frequency vector this plan assigns.
    pub fn theta_hats(&self) -> ThetaVector {
        ThetaVector::new(self.per_pair.iter().map(|p| p.theta_hat).collect())
            .expect("plan frequencies are validated positive")
    }

    /// Number of pairs assigned the interpolation strategy.
    pub fn interpolated_pairs(&self) -> usize {
        self.per_pair
            .iter()
            .filter(|p| p.strategy == PairStrategy::Interpolate)
            .count()
    }
}

// ── Planners ────────────────────────────────────────────────────────────────

fn validate_extension(config: &RopeConfig, target_len: u64, strict: bool) -> Result<()> {
    if strict && target_len <= config.pretrain_len {
        return Err(Error::Domain(format!(
            "target_len {} does not extend the pre-training length {}",
            target_len, config.pretrain_len
        )));
    }
    if target_len < config.pretrain_len {
        return Err(Error::Domain(format!(
            "target_len {} is below the pre-training length {}",
            target_len, config.pretrain_len
        )));
    }
    Ok(())
}

/// Uniform interpolation: every pair's frequency divided by `s`.
pub fn plan_pi(config: &RopeConfig, target_len: u64) -> Result<ScalingPlan> {
    validate_extension(config, target_len, false)?;
    let scale = extension_scale(config, target_len);
    let per_pair = base_theta(config)
        .iter()
        .enumerate()
        .map(|(i, &theta)| PairAssignment {
            dim_pair: i,
            strategy: PairStrategy::Interpolate,
            theta_hat: theta / scale,
        })
        .collect();
    Ok(ScalingPlan { config: *config, target_len, method: PlanMethod::Pi, per_pair })
}

/// Pure extrapolation: every pair keeps its frequency.
pub fn plan_extrapolate(config: &RopeConfig, target_len: u64) -> Result<ScalingPlan> {
    validate_extension(config, target_len, false)?;
    let per_pair = base_theta(config)
        .iter()
        .enumerate()
        .map(|(i, &theta)| PairAssignment {
            dim_pair: i,
            strategy: PairStrategy::Extrapolate,
            theta_hat: theta,
        })
        .collect();
    Ok(ScalingPlan { config: *config, target_len, method: PlanMethod::Extrapolate, per_pair })
}

/// Ratio-banded planner with the standard orientation.
pub fn plan_yarn(config: &RopeConfig, target_len: u64, alpha: f64, beta: f64) -> Result<ScalingPlan> {
    plan_yarn_oriented(config, target_len, alpha, beta, YarnOrientation::Standard)
}

/// Ratio-banded planner: each pair branches on its pre-training rotation
/// count `r_i = L / lambda_i` against the thresholds `alpha < beta`, with a
/// linear blend in between.
pub fn plan_yarn_oriented(
    config: &RopeConfig,
    target_len: u64,
    alpha: f64,
    beta: f64,
    orientation: YarnOrientation,
) -> Result<ScalingPlan> {
    if !alpha.is_finite() || !beta.is_finite() || alpha >= beta {
        return Err(Error::Config(format!(
            "thresholds must satisfy alpha < beta, got alpha={alpha} beta={beta}"
        )));
    }
    validate_extension(config, target_len, false)?;
    let scale = extension_scale(config, target_len);
    let mut per_pair = Vec::with_capacity(config.num_pairs());
    for (i, &theta) in base_theta(config).iter().enumerate() {
        let r = rotation_ratio(theta, config.pretrain_len)?;
        let ramp = (r - alpha) / (beta - alpha);
        // `gamma` is always the weight of the unchanged frequency.
        let (strategy, theta_hat) = if r < alpha {
            match orientation {
                YarnOrientation::Standard => (PairStrategy::Interpolate, theta / scale),
                YarnOrientation::Swapped => (PairStrategy::Extrapolate, theta),
            }
        } else if r > beta {
            match orientation {
                YarnOrientation::Standard => (PairStrategy::Extrapolate, theta),
                YarnOrientation::Swapped => (PairStrategy::Interpolate, theta / scale),
            }
        } else {
            let gamma = match orientation {
                YarnOrientation::Standard => ramp,
                YarnOrientation::Swapped => 1.0 - ramp,
            };
            (PairStrategy::Blend { gamma }, (1.0 - gamma) * (theta / scale) + gamma * theta)
        };
        per_pair.push(PairAssignment { dim_pair: i, strategy, theta_hat });
    }
    Ok(ScalingPlan {
        config: *config,
        target_len,
        method: PlanMethod::Yarn { alpha, beta, orientation },
        per_pair,
    })
}

/// Interpolation flags for the count-based selection: the `interpolated_pairs`
/// pairs with the largest margins interpolate, lower indices winning ties.
pub fn interpolation_flags_by_count(margins: &[f64], interpolated_pairs: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..margins.len()).collect();
    order.sort_by(|&a, &b| {
        margins[b].total_cmp(&margins[a]).then_with(|| a.cmp(&b))
    });
    let mut flags = vec![false; margins.len()];
    for &i in order.iter().take(interpolated_pairs) {
        flags[i] = true;
    }
    flags
}

fn selection_flags(report: &DisturbanceReport, selection: DpropeSelection, head_dim: usize) -> Result<Vec<bool>> {
    match selection {
        DpropeSelection::Threshold(t) => {
            if t.is_nan() {
                return Err(Error::Config("threshold must not be NaN".into()));
            }
            Ok(report.per_dim.iter().map(|p| p.margin > t).collect())
        }
        DpropeSelection::InterpolatedDims(n_hat) => {
            if n_hat % 2 != 0 {
                return Err(Error::Config(format!(
                    "n_hat counts scalar dimensions and must be even, got {n_hat}"
                )));
            }
            if n_hat > head_dim {
                return Err(Error::Config(format!(
                    "n_hat {n_hat} exceeds head_dim {head_dim}"
                )));
            }
            Ok(interpolation_flags_by_count(&report.margins(), n_hat / 2))
        }
    }
}

/// Build the disturbance-minimizing plan from a precomputed margin report.
pub fn plan_dprope_from_report(
    config: &RopeConfig,
    report: &DisturbanceReport,
    selection: DpropeSelection,
) -> Result<ScalingPlan> {
    if report.per_dim.len() != config.num_pairs() {
        return Err(Error::Dimension(format!(
            "report covers {} pairs but config implies {}",
            report.per_dim.len(),
            config.num_pairs()
        )));
    }
    let flags = selection_flags(report, selection, config.head_dim)?;
    let scale = extension_scale(config, report.target_len);
    let per_pair = base_theta(config)
        .iter()
        .zip(&flags)
        .enumerate()
        .map(|(i, (&theta, &interpolate))| {
            if interpolate {
                PairAssignment {
                    dim_pair: i,
                    strategy: PairStrategy::Interpolate,
                    theta_hat: theta / scale,
                }
            } else {
                PairAssignment { dim_pair: i, strategy: PairStrategy::Extrapolate, theta_hat: theta }
            }
        })
        .collect();
    Ok(ScalingPlan {
        config: *config,
        target_len: report.target_len,
        method: PlanMethod::Dprope { selection, bins: report.bins, epsilon: report.epsilon },
        per_pair,
    })
}

/// Per-dimension disturbance-minimizing plan: score both candidate
/// strategies for every pair, then select by threshold or by count.
pub fn plan_dprope(
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
    selection: DpropeSelection,
) -> Result<ScalingPlan> {
    validate_extension(config, target_len, true)?;
    let report = extension_margins(config, target_len, bins, epsilon)?;
    plan_dprope_from_report(config, &report, selection)
}

// ── Sweeps ──────────────────────────────────────────────────────────────────

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<P> {
    pub parameter: P,
    pub aggregate: f64,
    pub interpolated_pairs: usize,
}

fn nonempty<T>(values: &[T]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Config("sweep parameter list must not be empty".into()));
    }
    Ok(())
}

fn aggregate_from_flags(report: &DisturbanceReport, flags: &[bool], head_dim: usize) -> f64 {
    let sum: f64 = report
        .per_dim
        .iter()
        .zip(flags)
        .map(|(p, &interp)| if interp { p.d_int } else { p.d_ext })
        .sum();
    2.0 * sum / head_dim as f64
}

/// Aggregate disturbance of the threshold-selected plan at each `t`, rows in
/// input order.
pub fn sweep_threshold(
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
    thresholds: &[f64],
) -> Result<Vec<SweepPoint<f64>>> {
    nonempty(thresholds)?;
    let report = extension_margins(config, target_len, bins, epsilon)?;
    thresholds
        .iter()
        .map(|&t| {
            let flags = selection_flags(&report, DpropeSelection::Threshold(t), config.head_dim)?;
            Ok(SweepPoint {
                parameter: t,
                aggregate: aggregate_from_flags(&report, &flags, config.head_dim),
                interpolated_pairs: flags.iter().filter(|&&f| f).count(),
            })
        })
        .collect()
}

/// Aggregate disturbance of the count-selected plan at each `n_hat`, rows in
/// input order.
pub fn sweep_interpolated_dims(
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
    n_hats: &[usize],
) -> Result<Vec<SweepPoint<usize>>> {
    nonempty(n_hats)?;
    let report = extension_margins(config, target_len, bins, epsilon)?;
    n_hats
        .iter()
        .map(|&n_hat| {
            let flags =
                selection_flags(&report, DpropeSelection::InterpolatedDims(n_hat), config.head_dim)?;
            Ok(SweepPoint {
                parameter: n_hat,
                aggregate: aggregate_from_flags(&report, &flags, config.head_dim),
                interpolated_pairs: flags.iter().filter(|&&f| f).count(),
            })
        })
        .collect()
}

/// Aggregate disturbance of the selected plan under each interval count,
/// rows in input order. Selection and scoring both use the swept bin count.
pub fn sweep_bins(
    config: &RopeConfig,
    target_len: u64,
    epsilon: f64,
    selection: DpropeSelection,
    bins_list: &[usize],
) -> Result<Vec<SweepPoint<usize>>> {
    nonempty(bins_list)?;
    bins_list
        .iter()
        .map(|&bins| {
            let report = extension_margins(config, target_len, bins, epsilon)?;
            let flags = selection_flags(&report, selection, config.head_dim)?;
            Ok(SweepPoint {
                parameter: bins,
                aggregate: aggregate_from_flags(&report, &flags, config.head_dim),
                interpolated_pairs: flags.iter().filter(|&&f| f).count(),
            })
        })
        .collect()
}

/// CSV export with columns `value,aggregate_disturbance,n_interpolated_pairs`.
pub fn sweep_to_csv<P: std::fmt::Display>(points: &[SweepPoint<P>]) -> String {
    let mut out = String::from("value,aggregate_disturbance,n_interpolated_pairs\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.parameter, p.aggregate, p.interpolated_pairs));
    }
    out
}

// ── Plan file format ────────────────────────────────────────────────────────

/// 17-significant-digit decimal form: lossless for every f64.
fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl ScalingPlan {
    /// Serialize to the plan file schema. `bins` and `epsilon` are recorded
    /// as provenance; a disturbance-selected plan records its own creation
    /// settings instead.
    pub fn to_json(&self, bins: usize, epsilon: f64) -> String {
        let (prov_bins, prov_epsilon) = match self.method {
            PlanMethod::Dprope { bins, epsilon, .. } => (bins, epsilon),
            _ => (bins, epsilon),
        };
        let mut out = String::new();
        out.push_str("{\n");
        out.push_str(&format!("  \"schema_version\": \"{PLAN_SCHEMA_VERSION}\",\n"));
        out.push_str("  \"model\": {\n");
        out.push_str(&format!("    \"head_dim\": {},\n", self.config.head_dim));
        out.push_str(&format!("    \"base\": {},\n", fmt_f64(self.config.base)));
        out.push_str(&format!("    \"pretrain_len\": {}\n", self.config.pretrain_len));
        out.push_str("  },\n");
        out.push_str(&format!("  \"target_len\": {},\n", self.target_len));
        out.push_str(&format!("  \"scale\": {},\n", fmt_f64(self.scale())));
        out.push_str(&format!("  \"method\": \"{}\",\n", self.method.name()));
        match self.method {
            PlanMethod::Dprope { selection: DpropeSelection::Threshold(t), .. } => {
                out.push_str(&format!("  \"selection_params\": {{ \"t\": {} }},\n", fmt_f64(t)));
            }
            PlanMethod::Dprope { selection: DpropeSelection::InterpolatedDims(n), .. } => {
                out.push_str(&format!("  \"selection_params\": {{ \"n_hat\": {n} }},\n"));
            }
            _ => out.push_str("  \"selection_params\": null,\n"),
        }
        out.push_str("  \"per_pair\": [\n");
        for (idx, pair) in self.per_pair.iter().enumerate() {
            let comma = if idx + 1 == self.per_pair.len() { "" } else { "," };
            match pair.strategy {
                PairStrategy::Blend { gamma } => out.push_str(&format!(
                    "    {{ \"i\": {}, \"strategy\": \"blend\", \"gamma\": {}, \"theta_hat\": {} }}{comma}\n",
                    pair.dim_pair,
                    fmt_f64(gamma),
                    fmt_f64(pair.theta_hat)
                )),
                _ => out.push_str(&format!(
                    "    {{ \"i\": {}, \"strategy\": \"{}\", \"theta_hat\": {} }}{comma}\n",
                    pair.dim_pair,
                    pair.strategy.tag(),
                    fmt_f64(pair.theta_hat)
                )),
            }
        }
        out.push_str("  ],\n");
        out.push_str("  \"provenance\": {\n");
        out.push_str(&format!("    \"b\": {prov_bins},\n"));
        out.push_str(&format!("    \"epsilon\": {},\n", fmt_f64(prov_epsilon)));
        if let PlanMethod::Yarn { alpha, beta, orientation } = self.method {
            out.push_str(&format!("    \"alpha\": {},\n", fmt_f64(alpha)));
            out.push_str(&format!("    \"beta\": {},\n", fmt_f64(beta)));
            out.push_str(&format!("    \"orientation\": \"{}\",\n", orientation.tag()));
        }
        out.push_str(&format!("    \"tool_version\": \"{TOOL_VERSION}\"\n"));
        out.push_str("  }\n");
        out.push_str("}\n");
        out
    }

    /// Flat export for direct ingestion: one frequency per line, ascending
    /// pair index, 17 significant digits.
    pub fn theta_flat(&self) -> String {
        let mut out = String::new();
        for pair in &self.per_pair {
            out.push_str(&fmt_f64(pair.theta_hat));
            out.push('\n');
        }
        out
    }

    /// Parse and validate a plan file.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PlanFile = serde_json::from_str(text)
            .map_err(|e| Error::PlanParse(format!("invalid JSON: {e}")))?;
        file.into_plan()
    }
}

#[derive(serde::Deserialize)]
struct PlanFile {
    schema_version: String,
    model: PlanModel,
    target_len: u64,
    scale: f64,
    method: String,
    #[serde(default)]
    selection_params: Option<SelectionParamsFile>,
    per_pair: Vec<PlanPairFile>,
    #[serde(default)]
    provenance: Option<ProvenanceFile>,
}

#[derive(serde::Deserialize)]
struct PlanModel {
    head_dim: usize,
    base: f64,
    pretrain_len: u64,
}

#[derive(serde::Deserialize)]
struct SelectionParamsFile {
    #[serde(default)]
    t: Option<f64>,
    #[serde(default)]
    n_hat: Option<usize>,
}

#[derive(serde::Deserialize)]
struct PlanPairFile {
    i: usize,
    strategy: String,
    #[serde(default)]
    gamma: Option<f64>,
    theta_hat: f64,
}

#[derive(serde::Deserialize)]
struct ProvenanceFile {
    #[serde(default)]
    b: Option<usize>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    beta: Option<f64>,
    #[serde(default)]
    orientation: Option<String>,
}

impl PlanFile {
    fn into_plan(self) -> Result<ScalingPlan> {
        if self.schema_version != PLAN_SCHEMA_VERSION {
            return Err(Error::PlanParse(format!(
                "unsupported schema_version {:?}, expected {PLAN_SCHEMA_VERSION:?}",
                self.schema_version
            )));
        }
        let config =
            RopeConfig::new(self.model.head_dim, self.model.base, self.model.pretrain_len)
                .map_err(|e| Error::PlanParse(format!("model: {e}")))?;
        if self.target_len < config.pretrain_len {
            return Err(Error::PlanParse(format!(
                "target_len {} is below pretrain_len {}",
                self.target_len, config.pretrain_len
            )));
        }
        let scale = extension_scale(&config, self.target_len);
        if !(self.scale.is_finite()) || (self.scale - scale).abs() > 1e-12 * scale {
            return Err(Error::PlanParse(format!(
                "scale field {} inconsistent with target_len / pretrain_len = {}",
                self.scale, scale
            )));
        }
        if self.per_pair.len() != config.num_pairs() {
            return Err(Error::PlanParse(format!(
                "per_pair has {} entries, expected {}",
                self.per_pair.len(),
                config.num_pairs()
            )));
        }

        let thetas = base_theta(&config);
        let mut per_pair = Vec::with_capacity(self.per_pair.len());
        for (idx, entry) in self.per_pair.iter().enumerate() {
            if entry.i != idx {
                return Err(Error::PlanParse(format!(
                    "per_pair[{idx}].i = {} out of order (pairs must ascend from 0)",
                    entry.i
                )));
            }
            if !entry.theta_hat.is_finite() || entry.theta_hat <= 0.0 {
                return Err(Error::PlanParse(format!(
                    "per_pair[{idx}].theta_hat must be positive, got {}",
                    entry.theta_hat
                )));
            }
            let theta = thetas[idx];
            let strategy = match entry.strategy.as_str() {
                "interpolate" => {
                    if entry.gamma.is_some() {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: gamma is only valid on blend entries"
                        )));
                    }
                    let expected = theta / scale;
                    if (entry.theta_hat - expected).abs() > 1e-15 * expected {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: interpolate theta_hat {} != theta/s {}",
                            entry.theta_hat, expected
                        )));
                    }
                    PairStrategy::Interpolate
                }
                "extrapolate" => {
                    if entry.gamma.is_some() {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: gamma is only valid on blend entries"
                        )));
                    }
                    if entry.theta_hat != theta {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: extrapolate theta_hat {} != theta {}",
                            entry.theta_hat, theta
                        )));
                    }
                    PairStrategy::Extrapolate
                }
                "blend" => {
                    let gamma = entry.gamma.ok_or_else(|| {
                        Error::PlanParse(format!("per_pair[{idx}]: blend entry missing gamma"))
                    })?;
                    if !(0.0..=1.0).contains(&gamma) {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: gamma {gamma} outside [0, 1]"
                        )));
                    }
                    let expected = (1.0 - gamma) * (theta / scale) + gamma * theta;
                    if (entry.theta_hat - expected).abs() > 1e-12 * expected {
                        return Err(Error::PlanParse(format!(
                            "per_pair[{idx}]: blend theta_hat {} != (1-gamma)*theta/s + gamma*theta = {}",
                            entry.theta_hat, expected
                        )));
                    }
                    PairStrategy::Blend { gamma }
                }
                other => {
                    return Err(Error::PlanParse(format!(
                        "per_pair[{idx}]: unknown strategy {other:?}"
                    )))
                }
            };
            per_pair.push(PairAssignment { dim_pair: idx, strategy, theta_hat: entry.theta_hat });
        }

        let prov = self.provenance.as_ref();
        let method = match self.method.as_str() {
            "pi" => PlanMethod::Pi,
            "extrapolate" => PlanMethod::Extrapolate,
            "yarn" => {
                let orientation = match prov.and_then(|p| p.orientation.as_deref()) {
                    None | Some("standard") => YarnOrientation::Standard,
                    Some("swapped") => YarnOrientation::Swapped,
                    Some(other) => {
                        return Err(Error::PlanParse(format!(
                            "unknown yarn orientation {other:?}"
                        )))
                    }
                };
                PlanMethod::Yarn {
                    alpha: prov.and_then(|p| p.alpha).unwrap_or(1.0),
                    beta: prov.and_then(|p| p.beta).unwrap_or(32.0),
                    orientation,
                }
            }
            "dprope" => {
                let params = self.selection_params.as_ref().ok_or_else(|| {
                    Error::PlanParse("dprope plan missing selection_params".into())
                })?;
                let selection = match (params.t, params.n_hat) {
                    (Some(t), None) => DpropeSelection::Threshold(t),
                    (None, Some(n)) => DpropeSelection::InterpolatedDims(n),
                    _ => {
                        return Err(Error::PlanParse(
                            "selection_params must carry exactly one of t or n_hat".into(),
                        ))
                    }
                };
                let bins = prov.and_then(|p| p.b).ok_or_else(|| {
                    Error::PlanParse("dprope plan missing provenance.b".into())
                })?;
                let epsilon = prov.and_then(|p| p.epsilon).ok_or_else(|| {
                    Error::PlanParse("dprope plan missing provenance.epsilon".into())
                })?;
                PlanMethod::Dprope { selection, bins, epsilon }
            }
            other => return Err(Error::PlanParse(format!("unknown method {other:?}"))),
        };

        Ok(ScalingPlan { config, target_len: self.target_len, method, per_pair })
    }
}

// ── Tests ───────────────────────────────────────────────────────────────────
