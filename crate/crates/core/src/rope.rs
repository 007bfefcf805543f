//! Rotary position embedding fundamentals: angular frequencies, wavelengths,
//! rotary angles, pairwise vector rotation, and a numeric verifier for the
//! relative-position identity of rotated dot products.

use crate::error::{Error, Result};

pub const TWO_PI: f64 = std::f64::consts::TAU;
/// Low word of 2*pi in double-double representation: 2*pi - TWO_PI.
const TWO_PI_LO: f64 = 2.449_293_598_294_706_4e-16;

/// Positions above 2^53 are not exactly representable as f64 and would make
/// the angle reduction silently lossy.
const MAX_POSITION: u64 = 1 << 53;

// ── Configuration ───────────────────────────────────────────────────────────

/// Head geometry and pre-training length every computation derives from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RopeConfig {
    /// Scalar dimensions per attention head; even, >= 2.
    pub head_dim: usize,
    /// Base of the geometric frequency progression; > 1.
    pub base: f64,
    /// Context window the model was pre-trained with, in tokens.
    pub pretrain_len: u64,
}

impl RopeConfig {
    pub fn new(head_dim: usize, base: f64, pretrain_len: u64) -> Result<Self> {
        if head_dim < 2 || !head_dim.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "head_dim must be an even integer >= 2, got {head_dim}"
            )));
        }
        if !base.is_finite() || base <= 1.0 {
            return Err(Error::Config(format!("base must be finite and > 1, got {base}")));
        }
        if pretrain_len == 0 {
            return Err(Error::Config("pretrain_len must be >= 1".into()));
        }
        Ok(Self { head_dim, base, pretrain_len })
    }

    /// Number of rotary dimension pairs, `head_dim / 2`.
    pub fn num_pairs(&self) -> usize {
        self.head_dim / 2
    }
}

// ── Frequency vector ────────────────────────────────────────────────────────

/// Per-pair angular frequencies in radians per token, indexed by pair.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
#[serde(transparent)]
pub struct ThetaVector(Vec<f64>);

impl ThetaVector {
    /// Wrap an explicit frequency vector; every entry must be positive and
    /// finite.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("theta vector must not be empty".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!(
                    "theta[{i}] must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl std::ops::Index<usize> for ThetaVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Unmodified frequencies `base^(-2i/d)` for `i = 0 .. d/2-1`.
pub fn base_theta(config: &RopeConfig) -> ThetaVector {
    let d = config.head_dim as f64;
    let values = (0..config.num_pairs())
        .map(|i| config.base.powf(-2.0 * i as f64 / d))
        .collect();
    ThetaVector(values)
}

// ── Wavelengths and rotation counts ─────────────────────────────────────────

/// Token-count period `2*pi / theta` of a dimension pair.
pub fn wavelength(theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::Domain(format!("wavelength requires theta > 0, got {theta}")));
    }
    Ok(TWO_PI / theta)
}

/// Extension scale factor `s = target_len / pretrain_len`.
pub fn extension_scale(config: &RopeConfig, target_len: u64) -> f64 {
    target_len as f64 / config.pretrain_len as f64
}

/// Number of full rotations a pair completes over `pretrain_len` tokens,
/// `r = L / lambda = L * theta / (2*pi)`.
pub fn rotation_ratio(theta: f64, pretrain_len: u64) -> Result<f64> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::Domain(format!(
            "rotation_ratio requires theta > 0, got {theta}"
        )));
    }
    Ok(pretrain_len as f64 * theta / TWO_PI)
}

// ── Rotary angle ────────────────────────────────────────────────────────────

/// `(m * theta) mod 2*pi`, in `[0, TWO_PI)`.
///
/// The product is split into high and low parts (via FMA) and reduced against
/// a double-double representation of 2*pi, so the result tracks the exact
/// value of `m * theta` to a few 1e-16 even for positions in the millions.
/// A naive `(m as f64 * theta) % TWO_PI` drifts enough to flip histogram bins
/// near interval boundaries.
pub fn rotary_angle(m: u64, theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta <= 0.0 {
        return Err(Error::Domain(format!(
            "rotary_angle requires theta > 0, got {theta}"
        )));
    }
    if m > MAX_POSITION {
        return Err(Error::Domain(format!(
            "position {m} exceeds the exactly representable range (2^53)"
        )));
    }
    Ok(reduce_angle(m as f64, theta))
}

/// Core reduction: `(pos * theta) mod 2*pi` for exact non-negative `pos`.
fn reduce_angle(pos: f64, theta: f64) -> f64 {
    let p = pos * theta;
    let p_lo = pos.mul_add(theta, -p); // exact residual of the product

    let k = (p / TWO_PI).floor();
    let w = k * TWO_PI;
    let w_lo = k.mul_add(TWO_PI, -w);
    // p - w is exact (the values are within a factor of two of each other);
    // the remaining terms are tiny and merely refine it.
    let mut angle = (p - w) + (p_lo - w_lo - k * TWO_PI_LO);

    while angle < 0.0 {
        angle += TWO_PI;
    }
    while angle >= TWO_PI {
        angle -= TWO_PI;
    }
    angle
}

// ── Rotation ────────────────────────────────────────────────────────────────

/// Rotate each coordinate pair `(vec[2i], vec[2i+1])` by `m * theta_i`.
pub fn apply_rotation(vec: &[f64], m: u64, thetas: &ThetaVector) -> Result<Vec<f64>> {
    rotate(vec, m, false, thetas)
}

fn rotate(vec: &[f64], magnitude: u64, negate: bool, thetas: &ThetaVector) -> Result<Vec<f64>> {
    if vec.len() != 2 * thetas.len() {
        return Err(Error::Dimension(format!(
            "vector length {} does not match 2 * {} theta entries",
            vec.len(),
            thetas.len()
        )));
    }
    let mut out = Vec::with_capacity(vec.len());
    for (i, &theta) in thetas.iter().enumerate() {
        let angle = rotary_angle(magnitude, theta)?;
        let (mut sin, cos) = angle.sin_cos();
        if negate {
            sin = -sin;
        }
        let x = vec[2 * i];
        let y = vec[2 * i + 1];
        out.push(x * cos - y * sin);
        out.push(x * sin + y * cos);
    }
    Ok(out)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Absolute discrepancy between `<R_m q, R_n k>` and `<q, R_(n-m) k>`.
///
/// Negative relative offsets rotate by the negated angles, so the identity is
/// checked for every ordering of `m` and `n`.
pub fn verify_relative_property(
    q: &[f64],
    k: &[f64],
    m: u64,
    n: u64,
    thetas: &ThetaVector,
) -> Result<f64> {
    if q.len() != k.len() {
        return Err(Error::Dimension(format!(
            "q and k lengths differ: {} vs {}",
            q.len(),
            k.len()
        )));
    }
    let rotated_q = apply_rotation(q, m, thetas)?;
    let rotated_k = apply_rotation(k, n, thetas)?;
    let lhs = dot(&rotated_q, &rotated_k);

    let (offset, negate) = if n >= m { (n - m, false) } else { (m - n, true) };
    let relative_k = rotate(k, offset, negate, thetas)?;
    let rhs = dot(q, &relative_k);

    Ok((lhs - rhs).abs())
}

// ── Tests ───────────────────────────────────────────────────────────────────
