//! Reference bucketer for rotary-angle histograms, implemented with 320-bit
//! fixed-point integer arithmetic instead of floating point.
//!
//! The production path reduces `m * theta mod 2pi` in double-double float
//! arithmetic; this crate recomputes the bin index of every sample exactly,
//! treating `theta` as the dyadic rational its `f64` bits denote. Because
//! `m * theta / (2pi)` is irrational for every dyadic `theta != 0`, a sample
//! never sits on a bin boundary and the integer computation below decides the
//! bin without ambiguity. The two implementations share no code, so agreement
//! between them is meaningful evidence.

use std::sync::LazyLock;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// floor(pi * 2^320), the fixed-point value of pi used for reduction.
static PI_FIXED: LazyLock<BigUint> = LazyLock::new(|| {
    BigUint::parse_bytes(
        b"3243F6A8885A308D313198A2E03707344A4093822299F31D0082EFA98EC4E6C8\
          9452821E638D01377",
        16,
    )
    .expect("valid hex constant")
});

const PI_SHIFT: i64 = 320;
/// Fractional bits carried through the reduction.
const FRAC_BITS: i64 = 128;

/// Split a positive finite `f64` into `(mantissa, exponent)` with
/// `x == mantissa * 2^exponent` exactly.
fn decompose(x: f64) -> (u64, i64) {
    assert!(x.is_finite() && x > 0.0, "decompose requires x > 0, got {x}");
    let bits = x.to_bits();
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp_bits - 1075)
    }
}

/// Exact bin index of the rotary angle `(m * theta) mod 2pi` under `bins`
/// uniform half-open intervals of `[0, 2pi)`.
pub fn exact_bucket(theta: f64, m: u64, bins: usize) -> usize {
    assert!(bins >= 1, "bins must be >= 1");
    if m == 0 {
        return 0;
    }
    let (mant, exp) = decompose(theta);

    // m * theta / (2pi) = (m * mant) * 2^(exp - 1) / pi. Scale by 2^FRAC_BITS
    // and substitute pi ~= PI_FIXED / 2^PI_SHIFT (truncation error < 2^-320,
    // orders of magnitude below the fraction resolution kept here).
    let n = BigUint::from(m) * BigUint::from(mant);
    let shift = exp - 1 + FRAC_BITS + PI_SHIFT;
    let q = if shift >= 0 {
        (n << shift as u64) / &*PI_FIXED
    } else {
        n / (&*PI_FIXED << (-shift) as u64)
    };

    let frac = q & ((BigUint::from(1u8) << FRAC_BITS as u64) - 1u8);
    let bin = (frac * BigUint::from(bins)) >> FRAC_BITS as u64;
    bin.to_usize().expect("bin < bins fits usize")
}

/// Bin counts of the rotary angles of positions `0..length`, one exact
/// `exact_bucket` evaluation per position.
pub fn brute_counts(theta: f64, length: u64, bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for m in 0..length {
        counts[exact_bucket(theta, m, bins)] += 1;
    }
    counts
}

/// Like [`brute_counts`] but normalized to frequencies.
pub fn brute_frequencies(theta: f64, length: u64, bins: usize) -> Vec<f64> {
    assert!(length >= 1);
    brute_counts(theta, length, bins)
        .into_iter()
        .map(|c| c as f64 / length as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_PI: f64 = std::f64::consts::TAU;

    #[test]
    fn position_zero_is_bin_zero() {
        for &theta in &[1e-9, 0.01, 1.0, 3.0] {
            assert_eq!(exact_bucket(theta, 0, 360), 0);
        }
    }

    #[test]
    fn half_pi_times_one_lands_below_quarter_turn() {
        // fl(pi/2) is slightly below the real pi/2, so the exact fraction of a
        // turn is 0.2499999999999999999647..., i.e. bin 0 of 4. A naive f64
        // division yields exactly 1.0 * 4 / 4 = bin 1 here; the fixed-point
        // path must not fall for that.
        assert_eq!(exact_bucket(std::f64::consts::FRAC_PI_2, 1, 4), 0);
    }

    #[test]
    fn known_angle_bin() {
        // 7 mod 2pi = 0.716814692820413523..., which is 0.114084601... of a
        // turn: bin 41 of 360.
        assert_eq!(exact_bucket(1.0, 7, 360), 41);
    }

    #[test]
    fn subnormal_theta_stays_in_first_bin() {
        let tiny = f64::from_bits(1); // smallest positive subnormal
        assert_eq!(exact_bucket(tiny, 1_000_000, 360), 0);
    }

    #[test]
    fn agrees_with_float_path_away_from_boundaries() {
        // Where the naive f64 computation is comfortably inside a bin, the
        // exact path must land in the same bin.
        let bins = 360usize;
        let mut checked = 0;
        for i in 0..200u64 {
            let theta = 0.003 + 0.017 * i as f64;
            for m in [1u64, 17, 401, 4095, 65535] {
                let angle = (m as f64 * theta) % TWO_PI;
                let pos = angle * bins as f64 / TWO_PI;
                let dist = (pos - pos.round()).abs();
                if dist > 1e-3 {
                    assert_eq!(
                        exact_bucket(theta, m, bins),
                        pos.floor() as usize,
                        "theta={theta} m={m}"
                    );
                    checked += 1;
                }
            }
        }
        assert!(checked > 500, "too few comparable samples: {checked}");
    }
}
