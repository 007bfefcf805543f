//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line with the measured values.
//!
//! Run with:
//!   cargo test -p ropeplan-cli --test acceptance -- --nocapture

use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ropeplan::{
    apply_rotation, base_theta, count_ood_bins, disturbance_of_thetas, estimate_histogram,
    extension_margins, kl_disturbance, plan_dprope, plan_extrapolate, plan_pi, plan_yarn,
    sweep_interpolated_dims, sweep_threshold, verify_relative_property, AngleHistogram,
    DpropeSelection, RopeConfig, ThetaVector,
};

const BINS: usize = 360;
const EPSILON: f64 = 1e-8;

fn llama2() -> RopeConfig {
    RopeConfig::new(128, 10000.0, 4096).unwrap()
}

fn criterion(name: &str, body: impl FnOnce() -> Result<String, String>) {
    match body() {
        Ok(detail) => println!("acceptance {name}: PASS — {detail}"),
        Err(msg) => {
            println!("acceptance {name}: FAIL — {msg}");
            panic!("acceptance {name} failed: {msg}");
        }
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn aggregate(config: &RopeConfig, thetas: &ThetaVector, target: u64) -> Result<f64, String> {
    disturbance_of_thetas(thetas, config, target, BINS, EPSILON)
        .map(|d| d.aggregate)
        .map_err(|e| e.to_string())
}

// ── Criterion 1: headline disturbance comparison ────────────────────────────

#[test]
fn criterion_1_headline_disturbance_values() {
    criterion("criterion 1 (headline disturbance values)", || {
        let start = Instant::now();
        let config = llama2();
        let mut measured = Vec::new();
        for (target, n_hat) in [(8192u64, 80usize), (16384, 64)] {
            let pi = plan_pi(&config, target).map_err(|e| e.to_string())?;
            let yarn = plan_yarn(&config, target, 1.0, 32.0).map_err(|e| e.to_string())?;
            let selected = plan_dprope(
                &config,
                target,
                BINS,
                EPSILON,
                DpropeSelection::InterpolatedDims(n_hat),
            )
            .map_err(|e| e.to_string())?;
            let pi_d = aggregate(&config, &pi.theta_hats(), target)?;
            let yarn_d = aggregate(&config, &yarn.theta_hats(), target)?;
            let sel_d = aggregate(&config, &selected.theta_hats(), target)?;
            check(sel_d < pi_d, || {
                format!("selected {sel_d:.4e} not below uniform interpolation {pi_d:.4e} at {target}")
            })?;
            check(sel_d < yarn_d, || {
                format!("selected {sel_d:.4e} not below banded baseline {yarn_d:.4e} at {target}")
            })?;
            measured.push((target, pi_d, yarn_d, sel_d));
        }
        let reported = [
            (24.08e-3, 25.55e-3, 6.71e-3),
            (33.67e-3, 35.44e-3, 22.92e-3),
        ];
        for ((target, pi_d, yarn_d, sel_d), (pi_r, yarn_r, sel_r)) in
            measured.iter().zip(reported)
        {
            for (label, v, r) in [("pi", pi_d, pi_r), ("yarn", yarn_d, yarn_r), ("dprope", sel_d, sel_r)]
            {
                let rel = (v - r).abs() / r;
                check(rel <= 0.15, || {
                    format!(
                        "{label}@{target}: {v:.4e} deviates {:.1}% from reported {r:.4e}",
                        rel * 100.0
                    )
                })?;
            }
        }
        let elapsed = start.elapsed();
        check(elapsed.as_secs_f64() < 5.0, || {
            format!("took {elapsed:?}, budget 5s")
        })?;
        let m = &measured;
        Ok(format!(
            "x1e-3: 8k pi={:.2} yarn={:.2} dprope={:.2}; 16k pi={:.2} yarn={:.2} dprope={:.2}; {elapsed:?}",
            m[0].1 * 1e3, m[0].2 * 1e3, m[0].3 * 1e3,
            m[1].1 * 1e3, m[1].2 * 1e3, m[1].3 * 1e3
        ))
    });
}

// ── Criterion 2: per-dimension argmin optimality ────────────────────────────

#[test]
fn criterion_2_per_dimension_argmin_optimality() {
    criterion("criterion 2 (per-dimension argmin optimality)", || {
        let start = Instant::now();
        let config = RopeConfig::new(8, 100.0, 64).unwrap();
        let target = 128;
        let bins = 36;
        let thetas = base_theta(&config);

        let plan = plan_dprope(&config, target, bins, EPSILON, DpropeSelection::Threshold(0.0))
            .map_err(|e| e.to_string())?;
        let planned = disturbance_of_thetas(&plan.theta_hats(), &config, target, bins, EPSILON)
            .map_err(|e| e.to_string())?
            .aggregate;

        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let candidate = ThetaVector::new(
                (0..4)
                    .map(|i| if mask & (1 << i) != 0 { thetas[i] / 2.0 } else { thetas[i] })
                    .collect(),
            )
            .unwrap();
            let agg = disturbance_of_thetas(&candidate, &config, target, bins, EPSILON)
                .map_err(|e| e.to_string())?
                .aggregate;
            check(planned <= agg + 1e-15, || {
                format!("assignment {mask:04b} scores {agg:.6e}, below the plan's {planned:.6e}")
            })?;
            best = best.min(agg);
        }
        let elapsed = start.elapsed();
        check(elapsed.as_secs_f64() < 1.0, || format!("took {elapsed:?}, budget 1s"))?;
        Ok(format!(
            "threshold-0 aggregate {planned:.6e} = exhaustive minimum {best:.6e} over 16 assignments; {elapsed:?}"
        ))
    });
}

// ── Criterion 3: distribution oracle equivalence ────────────────────────────

#[test]
fn criterion_3_distribution_oracle_equivalence() {
    criterion("criterion 3 (distribution oracle equivalence)", || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..20 {
            let theta = 10f64.powf(rng.gen_range(-5.0..0.5));
            let length = rng.gen_range(1..=8192u64);
            let bins = if case % 2 == 0 { 90 } else { 360 };
            let hist = estimate_histogram(theta, length, bins).map_err(|e| e.to_string())?;
            let reference = ropeplan_oracle::brute_frequencies(theta, length, bins);
            for (k, (&got, &want)) in hist.freqs.iter().zip(&reference).enumerate() {
                check(got == want, || {
                    format!(
                        "case {case} (theta={theta:.6e}, length={length}, bins={bins}): \
                         bin {k} has {got} vs reference {want}"
                    )
                })?;
            }
        }
        Ok("20 randomized cases match the fixed-point bucketer bin-for-bin".into())
    });
}

// ── Criterion 4: qualitative per-dimension behavior ─────────────────────────

#[test]
fn criterion_4_qualitative_per_dimension_behavior() {
    criterion("criterion 4 (qualitative per-dimension behavior)", || {
        let config = llama2();
        let report =
            extension_margins(&config, 8192, BINS, EPSILON).map_err(|e| e.to_string())?;
        let m0 = report.per_dim[0].margin;
        let m63 = report.per_dim[63].margin;
        check(m0 < 0.0, || format!("margin(pair 0) = {m0:.4e}, expected < 0"))?;
        check(m63 > 0.0, || format!("margin(pair 63) = {m63:.4e}, expected > 0"))?;

        let thetas = base_theta(&config);
        let ood = |pair: usize, scale: f64| -> Result<usize, String> {
            let pre = estimate_histogram(thetas[pair], 4096, BINS).map_err(|e| e.to_string())?;
            let ext =
                estimate_histogram(thetas[pair] / scale, 8192, BINS).map_err(|e| e.to_string())?;
            count_ood_bins(&pre, &ext).map_err(|e| e.to_string())
        };
        let (e6, i6) = (ood(6, 1.0)?, ood(6, 2.0)?);
        let (e22, i22) = (ood(22, 1.0)?, ood(22, 2.0)?);

        check(i6 >= 1, || "pair 6 interpolated variant introduces no OOD bins".to_string())?;
        check(e22 >= 1, || "pair 22 extrapolated variant introduces no OOD bins".to_string())?;
        check(e6 < i6 && i22 < e22, || {
            format!(
                "OOD-bin attribution does not hold: measured pair6 ext={e6} int={i6} (expected \
                 ext < int) and pair22 ext={e22} int={i22} (expected int < ext). The asymmetry \
                 exists but sits elsewhere: pair 22 is interpolation-heavy (170 vs 22) and pair \
                 63 extrapolation-heavy (27 vs 0); margins above did pass."
            )
        })?;
        Ok(format!(
            "margins m0={m0:.2e} m63={m63:.2e}; OOD pair6 ext/int={e6}/{i6}, pair22 ext/int={e22}/{i22}"
        ))
    });
}

// ── Criterion 5: identity and zero properties ───────────────────────────────

#[test]
fn criterion_5_identity_and_zero_properties() {
    criterion("criterion 5 (identity and zero properties)", || {
        let config = llama2();
        let thetas = base_theta(&config);

        // Self-divergence is exactly zero.
        let hist = estimate_histogram(thetas[6], 4096, BINS).map_err(|e| e.to_string())?;
        let self_kl = kl_disturbance(&hist, &hist, EPSILON).map_err(|e| e.to_string())?;
        check(self_kl == 0.0, || format!("self divergence {self_kl}, expected exact 0"))?;
        let flat = AngleHistogram { dim_pair: 0, sample_count: 4, freqs: vec![0.25; 4] };
        let self_flat = kl_disturbance(&flat, &flat, 1e-3).map_err(|e| e.to_string())?;
        check(self_flat == 0.0, || format!("self divergence {self_flat}, expected exact 0"))?;

        // Unmodified frequencies at the pre-training length score zero.
        let d = disturbance_of_thetas(&thetas, &config, 4096, BINS, EPSILON)
            .map_err(|e| e.to_string())?;
        check(d.aggregate == 0.0, || {
            format!("aggregate {} for the unmodified setup, expected exact 0", d.aggregate)
        })?;

        // Rotation at position zero is the identity.
        let vec: Vec<f64> = (0..128).map(|i| ((i * 7 + 3) as f64 * 0.421).sin()).collect();
        let rotated = apply_rotation(&vec, 0, &thetas).map_err(|e| e.to_string())?;
        check(rotated == vec, || "rotation at position 0 changed the vector".into())?;

        // Relative-position identity over seeded trials, base and planned.
        let planned =
            plan_dprope(&config, 8192, BINS, EPSILON, DpropeSelection::InterpolatedDims(80))
                .map_err(|e| e.to_string())?
                .theta_hats();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut max_disc = 0.0f64;
        for _ in 0..1000 {
            let q: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let k: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let m = rng.gen_range(0..=1_000_000u64);
            let n = rng.gen_range(0..=1_000_000u64);
            for t in [&thetas, &planned] {
                let disc = verify_relative_property(&q, &k, m, n, t).map_err(|e| e.to_string())?;
                max_disc = max_disc.max(disc);
            }
        }
        check(max_disc <= 1e-9, || {
            format!("relative identity max discrepancy {max_disc:.3e} exceeds 1e-9")
        })?;
        Ok(format!("all identities exact; relative-property max discrepancy {max_disc:.2e}"))
    });
}

// ── Criterion 6: sweep monotonicity and endpoints ───────────────────────────

#[test]
fn criterion_6_sweep_monotonicity_and_endpoints() {
    criterion("criterion 6 (sweep monotonicity and endpoints)", || {
        let config = llama2();
        let ts = [0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0];
        let points =
            sweep_threshold(&config, 8192, BINS, EPSILON, &ts).map_err(|e| e.to_string())?;
        for w in points.windows(2) {
            check(w[1].aggregate >= w[0].aggregate, || {
                format!(
                    "aggregate fell from {:.6e} (t={}) to {:.6e} (t={})",
                    w[0].aggregate, w[0].parameter, w[1].aggregate, w[1].parameter
                )
            })?;
        }

        let endpoints =
            sweep_interpolated_dims(&config, 8192, BINS, EPSILON, &[0, 128]).map_err(|e| e.to_string())?;
        let ext = aggregate(&config, &plan_extrapolate(&config, 8192).unwrap().theta_hats(), 8192)?;
        let pi = aggregate(&config, &plan_pi(&config, 8192).unwrap().theta_hats(), 8192)?;
        check(endpoints[0].aggregate == ext, || {
            format!(
                "n_hat=0 aggregate {:.17e} != pure extrapolation {ext:.17e}",
                endpoints[0].aggregate
            )
        })?;
        check(endpoints[1].aggregate == pi, || {
            format!(
                "n_hat=128 aggregate {:.17e} != uniform interpolation {pi:.17e}",
                endpoints[1].aggregate
            )
        })?;
        Ok(format!(
            "threshold sweep non-decreasing over {:?}; endpoints match exactly (ext {:.4e}, pi {:.4e})",
            ts, ext, pi
        ))
    });
}

// ── Criterion 7: determinism of command outputs ─────────────────────────────

#[test]
fn criterion_7_deterministic_outputs() {
    criterion("criterion 7 (deterministic outputs)", || {
        let run = |args: &[&str]| -> Result<(), String> {
            let out = Command::new(env!("CARGO_BIN_EXE_ropeplan"))
                .args(args)
                .output()
                .map_err(|e| format!("spawning binary: {e}"))?;
            if out.status.code() != Some(0) {
                return Err(format!(
                    "command {:?} exited {:?}: {}",
                    args,
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                ));
            }
            Ok(())
        };
        let read = |dir: &std::path::Path, name: &str| -> Result<Vec<u8>, String> {
            std::fs::read(dir.join(name)).map_err(|e| format!("reading {name}: {e}"))
        };

        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        for dir in [&a, &b] {
            run(&[
                "plan",
                "--model",
                "llama2",
                "--target-len",
                "8192",
                "--method",
                "dprope",
                "--n-hat",
                "80",
                "--out",
                dir.path().to_str().unwrap(),
            ])?;
            run(&["disturbance", "--table3", "--out", dir.path().to_str().unwrap()])?;
        }
        for name in ["plan.json", "theta_hat.txt", "table3.csv"] {
            let left = read(a.path(), name)?;
            let right = read(b.path(), name)?;
            check(left == right, || format!("{name} differs between identical runs"))?;
        }
        Ok("plan.json, theta_hat.txt, table3.csv byte-identical across repeated runs".into())
    });
}
