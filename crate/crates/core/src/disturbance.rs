//! Distributional disturbance between an extended rotary-angle distribution
//! set and the pre-trained one: an epsilon-smoothed KL divergence per
//! dimension pair, plus the `2/d`-normalized aggregate.
//!
//! Orientation: the pipeline evaluates the divergence from the pre-trained
//! distribution toward the extended one, `sum_k F_k (ln(F_k + eps) -
//! ln(F'_k + eps))` with `F` the pre-trained and `F'` the extended
//! frequencies. Angle regions the model relied on during pre-training but
//! the extension under-covers are penalized heavily; angles the extension
//! adds in previously unused regions are cheap. With this orientation the
//! score is insensitive to `eps` whenever the extension's support covers the
//! pre-trained support, which pure extrapolation and integer-factor
//! interpolation both guarantee.

use rayon::prelude::*;

use crate::distribution::{estimate_histogram_for_pair, AngleHistogram};
use crate::error::{Error, Result};
use crate::rope::{base_theta, extension_scale, RopeConfig, ThetaVector};

// ── Smoothed KL ─────────────────────────────────────────────────────────────

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "epsilon must be positive and finite, got {epsilon}"
        )));
    }
    Ok(())
}

/// `sum_k F'_k * ln((F'_k + eps) / (F_k + eps))` with `F'` taken from
/// `p_new` and `F` from `p_old`. Terms with `F'_k = 0` contribute exactly
/// zero.
pub fn kl_disturbance(
    p_new: &AngleHistogram,
    p_old: &AngleHistogram,
    epsilon: f64,
) -> Result<f64> {
    if p_new.bins() != p_old.bins() {
        return Err(Error::Dimension(format!(
            "bin counts differ: {} vs {}",
            p_new.bins(),
            p_old.bins()
        )));
    }
    validate_epsilon(epsilon)?;
    Ok(smoothed_kl(&p_new.freqs, &p_old.freqs, epsilon))
}

fn smoothed_kl(weight_freqs: &[f64], reference_freqs: &[f64], epsilon: f64) -> f64 {
    let mut total = 0.0;
    for (&w, &r) in weight_freqs.iter().zip(reference_freqs) {
        if w > 0.0 {
            total += w * ((w + epsilon) / (r + epsilon)).ln();
        }
    }
    total
}

/// Number of bins empty in `pretrain` but occupied in `extended`: the
/// out-of-distribution angles the extension introduces.
pub fn count_ood_bins(pretrain: &AngleHistogram, extended: &AngleHistogram) -> Result<usize> {
    if pretrain.bins() != extended.bins() {
        return Err(Error::Dimension(format!(
            "bin counts differ: {} vs {}",
            pretrain.bins(),
            extended.bins()
        )));
    }
    Ok(pretrain
        .freqs
        .iter()
        .zip(&extended.freqs)
        .filter(|(&f_old, &f_new)| f_old == 0.0 && f_new > 0.0)
        .count())
}

// ── Scoring a frequency vector ──────────────────────────────────────────────

/// Per-pair and aggregate disturbance of one candidate frequency vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaDisturbance {
    /// Disturbance of each dimension pair, ascending pair index.
    pub per_dim: Vec<f64>,
    /// `2 * sum(per_dim) / d`.
    pub aggregate: f64,
}

fn aggregate_of(per_dim: &[f64], head_dim: usize) -> f64 {
    let sum: f64 = per_dim.iter().sum();
    2.0 * sum / head_dim as f64
}

fn pair_disturbance(
    dim_pair: usize,
    theta: f64,
    theta_hat: f64,
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
) -> Result<f64> {
    let pretrain = estimate_histogram_for_pair(dim_pair, theta, config.pretrain_len, bins)?;
    let extended = estimate_histogram_for_pair(dim_pair, theta_hat, target_len, bins)?;
    kl_disturbance(&pretrain, &extended, epsilon)
}

/// Disturbance of an arbitrary modified frequency vector against the
/// pre-trained distribution. This single operation scores any strategy's
/// output, which is how the method comparisons are produced.
pub fn disturbance_of_thetas(
    thetas_hat: &ThetaVector,
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
) -> Result<ThetaDisturbance> {
    if thetas_hat.len() != config.num_pairs() {
        return Err(Error::Dimension(format!(
            "theta vector has {} entries but config implies {} pairs",
            thetas_hat.len(),
            config.num_pairs()
        )));
    }
    if target_len < config.pretrain_len {
        return Err(Error::Domain(format!(
            "target_len {} is below the pre-training length {}",
            target_len, config.pretrain_len
        )));
    }
    validate_epsilon(epsilon)?;
    let thetas = base_theta(config);
    let per_dim: Vec<f64> = (0..thetas_hat.len())
        .into_par_iter()
        .map(|i| pair_disturbance(i, thetas[i], thetas_hat[i], config, target_len, bins, epsilon))
        .collect::<Result<_>>()?;
    let aggregate = aggregate_of(&per_dim, config.head_dim);
    Ok(ThetaDisturbance { per_dim, aggregate })
}

// ── Extension margins ───────────────────────────────────────────────────────

/// Disturbance of the two candidate strategies for one dimension pair.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PairDisturbance {
    pub dim_pair: usize,
    /// Disturbance when the pair keeps its frequency (extrapolation).
    pub d_ext: f64,
    /// Disturbance when the pair's frequency is divided by the scale factor
    /// (interpolation).
    pub d_int: f64,
    /// `d_ext - d_int`; positive means interpolation disturbs less.
    pub margin: f64,
}

/// Per-pair extrapolation/interpolation disturbances and their aggregates.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DisturbanceReport {
    pub pretrain_len: u64,
    pub target_len: u64,
    pub bins: usize,
    pub epsilon: f64,
    pub aggregate_ext: f64,
    pub aggregate_int: f64,
    pub per_dim: Vec<PairDisturbance>,
}

impl DisturbanceReport {
    /// Margins in pair order.
    pub fn margins(&self) -> Vec<f64> {
        self.per_dim.iter().map(|p| p.margin).collect()
    }

    /// CSV export with columns `dim_pair,d_ext,d_int,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim_pair,d_ext,d_int,margin\n");
        for p in &self.per_dim {
            out.push_str(&format!("{},{},{},{}\n", p.dim_pair, p.d_ext, p.d_int, p.margin));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }
}

/// Compare extrapolation against interpolation for every dimension pair when
/// extending `config` to `target_len`.
pub fn extension_margins(
    config: &RopeConfig,
    target_len: u64,
    bins: usize,
    epsilon: f64,
) -> Result<DisturbanceReport> {
    if target_len <= config.pretrain_len {
        return Err(Error::Domain(format!(
            "target_len {} does not extend the pre-training length {}",
            target_len, config.pretrain_len
        )));
    }
    validate_epsilon(epsilon)?;
    let thetas = base_theta(config);
    let scale = extension_scale(config, target_len);
    let per_dim: Vec<PairDisturbance> = (0..thetas.len())
        .into_par_iter()
        .map(|i| -> Result<PairDisturbance> {
            let theta = thetas[i];
            let d_ext = pair_disturbance(i, theta, theta, config, target_len, bins, epsilon)?;
            let d_int =
                pair_disturbance(i, theta, theta / scale, config, target_len, bins, epsilon)?;
            Ok(PairDisturbance { dim_pair: i, d_ext, d_int, margin: d_ext - d_int })
        })
        .collect::<Result<_>>()?;
    let aggregate_ext = aggregate_of(&per_dim.iter().map(|p| p.d_ext).collect::<Vec<_>>(), config.head_dim);
    let aggregate_int = aggregate_of(&per_dim.iter().map(|p| p.d_int).collect::<Vec<_>>(), config.head_dim);
    Ok(DisturbanceReport {
        pretrain_len: config.pretrain_len,
        target_len,
        bins,
        epsilon,
        aggregate_ext,
        aggregate_int,
        per_dim,
    })
}

// ── Tests ───────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::estimate_histogram;

    fn hist(freqs: Vec<f64>) -> AngleHistogram {
        AngleHistogram { dim_pair: 0, sample_count: 1, freqs }
    }

    // ── kl_disturbance ──────────────────────────────────────────────────

    #[test]
    fn identical_histograms_have_zero_disturbance() {
        let h = estimate_histogram(0.4217, 512, 360).unwrap();
        assert_eq!(kl_disturbance(&h, &h, 1e-8).unwrap(), 0.0);
        let p = hist(vec![0.25, 0.75]);
        assert_eq!(kl_disturbance(&p, &p, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn disjoint_mass_blows_up_with_small_epsilon() {
        // 1 * ln((1 + 1e-8) / 1e-8) = 18.420680753952365...
        let d = kl_disturbance(&hist(vec![1.0, 0.0]), &hist(vec![0.0, 1.0]), 1e-8).unwrap();
        let expected = 18.420680753952365;
        assert!((d - expected).abs() / expected < 1e-12, "got {d}");
    }

    #[test]
    fn out_of_distribution_bins_dominate() {
        // 0.5*ln((0.5+e)/(1+e)) + 0.5*ln((0.5+e)/e) = 8.517193206416237...
        let d = kl_disturbance(&hist(vec![0.5, 0.5]), &hist(vec![1.0, 0.0]), 1e-8).unwrap();
        let expected = 8.517193206416237;
        assert!((d - expected).abs() / expected < 1e-12, "got {d}");
    }

    #[test]
    fn zero_weight_bins_contribute_nothing() {
        // The second bin has weight 0; the reference value there must not
        // matter at all.
        let a = kl_disturbance(&hist(vec![1.0, 0.0]), &hist(vec![0.5, 0.5]), 1e-8).unwrap();
        let b = kl_disturbance(&hist(vec![1.0, 0.0]), &hist(vec![0.5, 0.5]), 1e-12).unwrap();
        let direct = (1.0f64 + 1e-8) / (0.5 + 1e-8);
        assert_eq!(a, direct.ln());
        assert!((a - b).abs() < 1e-7);
    }

    #[test]
    fn rejects_bin_mismatch_and_bad_epsilon() {
        let p = hist(vec![1.0, 0.0]);
        let q = hist(vec![1.0, 0.0, 0.0]);
        assert!(matches!(kl_disturbance(&p, &q, 1e-8), Err(Error::Dimension(_))));
        assert!(matches!(kl_disturbance(&p, &p, 0.0), Err(Error::Domain(_))));
        assert!(matches!(kl_disturbance(&p, &p, -1e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn epsilon_sensitivity_confined_to_one_sided_bins() {
        // Shared support: shrinking epsilon four orders of magnitude moves
        // the score by less than 1e-7.
        let p = hist(vec![0.5, 0.5]);
        let q = hist(vec![0.25, 0.75]);
        let shared = (kl_disturbance(&p, &q, 1e-8).unwrap()
            - kl_disturbance(&p, &q, 1e-10).unwrap())
        .abs();
        assert!(shared < 1e-7, "moved by {shared}");

        // One-sided bin present: the same epsilon change moves the score by
        // ~0.5*ln(100).
        let r = hist(vec![1.0, 0.0]);
        let s = hist(vec![0.5, 0.5]);
        let one_sided = (kl_disturbance(&s, &r, 1e-8).unwrap()
            - kl_disturbance(&s, &r, 1e-10).unwrap())
        .abs();
        assert!(one_sided > 1.0, "moved by {one_sided}");
    }

    // ── count_ood_bins ──────────────────────────────────────────────────

    #[test]
    fn ood_bin_counting() {
        let pre = hist(vec![0.5, 0.5, 0.0, 0.0]);
        let ext = hist(vec![0.25, 0.25, 0.25, 0.25]);
        assert_eq!(count_ood_bins(&pre, &ext).unwrap(), 2);
        assert_eq!(count_ood_bins(&pre, &pre).unwrap(), 0);
        let short = hist(vec![1.0]);
        assert!(count_ood_bins(&pre, &short).is_err());
    }

    // ── disturbance_of_thetas ───────────────────────────────────────────

    #[test]
    fn unmodified_thetas_at_pretrain_length_score_zero() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        let d = disturbance_of_thetas(&base_theta(&config), &config, 64, 90, 1e-8).unwrap();
        assert_eq!(d.aggregate, 0.0);
        assert!(d.per_dim.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn aggregate_matches_normalized_sum() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        let thetas = base_theta(&config);
        let halved = ThetaVector::new(thetas.iter().map(|t| t / 2.0).collect()).unwrap();
        let d = disturbance_of_thetas(&halved, &config, 128, 90, 1e-8).unwrap();
        let expected = 2.0 * d.per_dim.iter().sum::<f64>() / 8.0;
        assert!((d.aggregate - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_shrinking_target() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        assert!(matches!(
            disturbance_of_thetas(&base_theta(&config), &config, 32, 90, 1e-8),
            Err(Error::Domain(_))
        ));
    }

    // ── extension_margins ───────────────────────────────────────────────

    #[test]
    fn margins_are_exact_differences() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        let report = extension_margins(&config, 128, 90, 1e-8).unwrap();
        assert_eq!(report.per_dim.len(), 4);
        for p in &report.per_dim {
            assert_eq!(p.margin, p.d_ext - p.d_int);
        }
        let ext_sum: f64 = report.per_dim.iter().map(|p| p.d_ext).sum();
        assert!((report.aggregate_ext - 2.0 * ext_sum / 8.0).abs() < 1e-12);
    }

    #[test]
    fn margin_antisymmetric_under_candidate_swap() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        let thetas = base_theta(&config);
        for (i, &theta) in thetas.iter().enumerate() {
            let pre = estimate_histogram_for_pair(i, theta, 64, 90).unwrap();
            let a = estimate_histogram_for_pair(i, theta, 128, 90).unwrap();
            let b = estimate_histogram_for_pair(i, theta / 2.0, 128, 90).unwrap();
            let margin = kl_disturbance(&pre, &a, 1e-8).unwrap()
                - kl_disturbance(&pre, &b, 1e-8).unwrap();
            let swapped = kl_disturbance(&pre, &b, 1e-8).unwrap()
                - kl_disturbance(&pre, &a, 1e-8).unwrap();
            assert_eq!(margin, -swapped);
        }
    }

    #[test]
    fn rejects_non_extension() {
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        assert!(matches!(extension_margins(&config, 64, 90, 1e-8), Err(Error::Domain(_))));
        assert!(matches!(extension_margins(&config, 32, 90, 1e-8), Err(Error::Domain(_))));
    }

    #[test]
    fn csv_report_layout() {
        let config = RopeConfig::new(4, 100.0, 32).unwrap();
        let report = extension_margins(&config, 64, 36, 1e-8).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "dim_pair,d_ext,d_int,margin");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("1,"));
    }
}
