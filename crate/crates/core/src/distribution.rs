//! Empirical rotary-angle distributions: every position `0..length` is
//! enumerated, its angle bucketed into `b` uniform intervals of `[0, 2pi)`,
//! and counts normalized into per-pair frequency histograms.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rope::{base_theta, rotary_angle, RopeConfig, ThetaVector, TWO_PI};

/// Upper limit for the configurable interval count.
pub const MAX_BINS: usize = 1_000_000;

// ── Histogram ───────────────────────────────────────────────────────────────

/// Frequency histogram of the rotary angles of one dimension pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AngleHistogram {
    /// Index of the dimension pair this histogram belongs to.
    pub dim_pair: usize,
    /// Number of positions enumerated.
    pub sample_count: u64,
    /// Per-interval frequencies; `freqs[k]` is the fraction of positions
    /// whose angle fell into `[2k*pi/b, 2(k+1)*pi/b)`.
    pub freqs: Vec<f64>,
}

impl AngleHistogram {
    /// Number of intervals.
    pub fn bins(&self) -> usize {
        self.freqs.len()
    }

    /// Indices of intervals with nonzero frequency.
    pub fn occupied_bins(&self) -> Vec<usize> {
        self.freqs
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 0.0)
            .map(|(k, _)| k)
            .collect()
    }
}

/// Interval index of `angle` under `b` uniform intervals of `[0, 2pi)`.
///
/// Intervals are half-open; an index of `b` produced by floating rounding of
/// angles just below 2*pi is clamped to `b - 1`.
pub fn bucket_index(angle: f64, bins: usize) -> Result<usize> {
    if bins == 0 || bins > MAX_BINS {
        return Err(Error::Config(format!("bins must be in 1..={MAX_BINS}, got {bins}")));
    }
    if !angle.is_finite() || !(0.0..TWO_PI).contains(&angle) {
        return Err(Error::Domain(format!(
            "angle must lie in [0, 2*pi), got {angle}"
        )));
    }
    let raw = (angle * bins as f64 / TWO_PI).floor() as usize;
    Ok(raw.min(bins - 1))
}

fn validate_histogram_args(length: u64, bins: usize) -> Result<()> {
    if length == 0 {
        return Err(Error::Domain("length must be >= 1".into()));
    }
    if bins == 0 || bins > MAX_BINS {
        return Err(Error::Config(format!("bins must be in 1..={MAX_BINS}, got {bins}")));
    }
    Ok(())
}

/// Estimate the angle histogram of one frequency by exact enumeration of the
/// positions `0..length`. Deterministic; no sampling.
pub fn estimate_histogram(theta: f64, length: u64, bins: usize) -> Result<AngleHistogram> {
    estimate_histogram_for_pair(0, theta, length, bins)
}

/// [`estimate_histogram`] with an explicit dimension-pair tag.
pub fn estimate_histogram_for_pair(
    dim_pair: usize,
    theta: f64,
    length: u64,
    bins: usize,
) -> Result<AngleHistogram> {
    validate_histogram_args(length, bins)?;
    let mut counts = vec![0u64; bins];
    for m in 0..length {
        let angle = rotary_angle(m, theta)?;
        counts[bucket_index(angle, bins)?] += 1;
    }
    let freqs = counts.into_iter().map(|c| c as f64 / length as f64).collect();
    Ok(AngleHistogram { dim_pair, sample_count: length, freqs })
}

// ── Distribution set ────────────────────────────────────────────────────────

/// The `d/2` angle histograms of a model under one frequency vector.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DistributionSet {
    pub config: RopeConfig,
    /// Positions enumerated for every histogram.
    pub length: u64,
    /// Interval count shared by every histogram.
    pub bins: usize,
    /// One histogram per dimension pair, ascending pair index.
    pub histograms: Vec<AngleHistogram>,
}

impl DistributionSet {
    pub fn histogram(&self, dim_pair: usize) -> Option<&AngleHistogram> {
        self.histograms.get(dim_pair)
    }
}

/// Estimate the histograms of every dimension pair of `thetas`.
///
/// Pairs are evaluated in parallel; each histogram is built independently
/// from its own enumeration, so the result is deterministic and identical to
/// a sequential evaluation.
pub fn estimate_set(
    config: &RopeConfig,
    thetas: &ThetaVector,
    length: u64,
    bins: usize,
) -> Result<DistributionSet> {
    if thetas.len() != config.num_pairs() {
        return Err(Error::Dimension(format!(
            "theta vector has {} entries but config implies {} pairs",
            thetas.len(),
            config.num_pairs()
        )));
    }
    validate_histogram_args(length, bins)?;
    let histograms: Vec<AngleHistogram> = (0..thetas.len())
        .into_par_iter()
        .map(|i| estimate_histogram_for_pair(i, thetas[i], length, bins))
        .collect::<Result<_>>()?;
    Ok(DistributionSet { config: *config, length, bins, histograms })
}

/// [`estimate_set`] with the model's unmodified frequencies at its
/// pre-training length: the reference distribution everything is compared to.
pub fn pretrain_set(config: &RopeConfig, bins: usize) -> Result<DistributionSet> {
    estimate_set(config, &base_theta(config), config.pretrain_len, bins)
}

// ── Export ──────────────────────────────────────────────────────────────────

/// Left edge of interval `k` in radians.
pub fn bin_left_radians(k: usize, bins: usize) -> f64 {
    k as f64 * TWO_PI / bins as f64
}

fn selected<'s>(
    set: &'s DistributionSet,
    dims: Option<&'s [usize]>,
) -> impl Iterator<Item = &'s AngleHistogram> + 's {
    set.histograms
        .iter()
        .filter(move |h| dims.is_none_or(|d| d.contains(&h.dim_pair)))
}

/// CSV export with columns `dim_pair,bin_index,bin_left_radians,frequency`,
/// rows ordered by `(dim_pair, bin_index)`. `dims` restricts the output to
/// the named pairs.
pub fn set_to_csv(set: &DistributionSet, dims: Option<&[usize]>) -> String {
    let mut out = String::from("dim_pair,bin_index,bin_left_radians,frequency\n");
    for hist in selected(set, dims) {
        for (k, &f) in hist.freqs.iter().enumerate() {
            // bin_left with 9 significant digits
            out.push_str(&format!(
                "{},{},{:.8e},{}\n",
                hist.dim_pair,
                k,
                bin_left_radians(k, set.bins),
                f
            ));
        }
    }
    out
}

/// JSON export carrying the same content as the CSV.
pub fn set_to_json(set: &DistributionSet, dims: Option<&[usize]>) -> String {
    #[derive(serde::Serialize)]
    struct SetExport<'s> {
        config: &'s RopeConfig,
        length: u64,
        bins: usize,
        histograms: Vec<&'s AngleHistogram>,
    }
    let export = SetExport {
        config: &set.config,
        length: set.length,
        bins: set.bins,
        histograms: selected(set, dims).collect(),
    };
    let mut text = serde_json::to_string_pretty(&export).expect("histogram export serializes");
    text.push('\n');
    text
}

// ── Tests ───────────────────────────────────────────────────────────────────
