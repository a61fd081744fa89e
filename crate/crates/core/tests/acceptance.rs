//! Acceptance suite: one PASS/FAIL line per criterion at its stated
//! tolerance. Failing criteria are reported, not asserted, so the remaining
//! checks still run; infrastructure errors are reported as FAIL as well.

use mcarma::cli::ExperimentFile;
use mcarma::core_model::{
    assemble_companion, beta_stack, mcarma_stationarity, perturb_companion, var_stationarity, McarmaCoefficients,
    ModelFile, ModelOrders, PerturbMode, RepresentationFile,
};
use mcarma::estimate::{fit_mcar_pipeline, solve_beta, synthetic, PipelineConfig};
use mcarma::nig_levy::{
    nig_convolve, nig_fit, nig_mean, nig_pdf, nig_sample, nig_scale, nig_variance, NigParams,
};
use mcarma::numerics::{integrate_lower_tail, integrate_upper_tail};
use mcarma::ring::GMat;
use mcarma::simulate::strong_error_experiment;
use mcarma::transform::{
    discrepancy_report, forward_generic, forward_transform, inverse_transform_mcar, symbolic_oracle,
};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

type Outcome = Result<(bool, String), String>;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_mcarma")
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Published MCAR blocks `A_1..A_4`.
fn published_mcar() -> Vec<DMatrix<f64>> {
    let mf: ModelFile = serde_json::from_slice(&std::fs::read(fixture("published_mcar.json")).unwrap()).unwrap();
    mf.to_coefficients().unwrap().a_blocks
}

/// `|diff| <= tol` up to the rounding of decimal table values to doubles.
fn within(diff: f64, tol: f64) -> bool {
    diff.abs() <= tol * (1.0 + 1e-9)
}

fn within_budget(elapsed: Duration, limit: Duration) -> (bool, String) {
    (elapsed < limit, format!("runtime {:.3} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

// 1 ------------------------------------------------------------------------

fn criterion_1() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let out = dir.path().join("a.json");
    let t0 = Instant::now();
    let status = Command::new(bin())
        .args(["transform", "--direction", "inverse", "--paper-mode", "--out"])
        .arg(&out)
        .arg(fixture("published_var.json"))
        .output()
        .map_err(e2s)?;
    let (fast, timing) = within_budget(t0.elapsed(), Duration::from_secs(1));
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let mf: ModelFile = serde_json::from_slice(&std::fs::read(&out).map_err(e2s)?).map_err(e2s)?;
    let got = mf.to_coefficients().map_err(e2s)?.a_blocks;
    let want = published_mcar();
    let mut worst = (0.0f64, String::new());
    let mut misses = Vec::new();
    for j in 0..4 {
        for r in 0..2 {
            for c in 0..2 {
                let diff = (got[j][(r, c)] - want[j][(r, c)]).abs();
                if !within(diff, 0.01) {
                    misses.push(format!(
                        "A{}[{},{}] {:.4} vs {:.4}",
                        j + 1,
                        r + 1,
                        c + 1,
                        got[j][(r, c)],
                        want[j][(r, c)]
                    ));
                }
                if diff > worst.0 {
                    worst = (diff, format!("A{}[{},{}]", j + 1, r + 1, c + 1));
                }
            }
        }
    }
    Ok((
        misses.is_empty() && fast,
        format!(
            "max |diff| {:.4} at {} (tol 0.01); outside tolerance: [{}]; {}",
            worst.0,
            worst.1,
            misses.join(", "),
            timing
        ),
    ))
}

// 2 ------------------------------------------------------------------------

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let orders = ModelOrders::new(4, 0, 2, 2).map_err(e2s)?;
    let coeffs = McarmaCoefficients::new(orders, published_mcar(), vec![DMatrix::identity(2, 2)]).map_err(e2s)?;
    let sys = assemble_companion(&coeffs).map_err(e2s)?;
    let rep_a = mcarma_stationarity(&sys).map_err(e2s)?;
    let published = [
        (-2.21, 0.0),
        (-2.15, 0.0),
        (0.0067, 0.0021),
        (0.0067, -0.0021),
        (-0.20, 1.42),
        (-0.20, -1.42),
        (-0.25, 1.40),
        (-0.25, -1.40),
    ];
    let mut used = vec![false; rep_a.eigenvalues.len()];
    let mut a_worst = 0.0f64;
    for (re, im) in published {
        let (i, d) = rep_a
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, e)| (i, (e[0] - re).abs().max((e[1] - im).abs())))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .ok_or("eigenvalue count mismatch")?;
        used[i] = true;
        a_worst = a_worst.max(d);
    }
    let a_ok = within(a_worst, 0.01);

    let rf: RepresentationFile =
        serde_json::from_slice(&std::fs::read(fixture("published_var.json")).map_err(e2s)?).map_err(e2s)?;
    let rep_f = var_stationarity(&rf.to_representation().map_err(e2s)?).map_err(e2s)?;
    let mut moduli: Vec<f64> = rep_f.moduli.clone();
    moduli.sort_by(f64::total_cmp);
    moduli.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let published_moduli = [0.18, 0.41, 0.47, 0.68, 0.94];
    let f_diffs: Vec<f64> = moduli.iter().zip(published_moduli).map(|(m, p)| (m - p).abs()).collect();
    let f_ok = moduli.len() == published_moduli.len() && f_diffs.iter().all(|d| within(*d, 0.01));
    let (fast, timing) = within_budget(t0.elapsed(), Duration::from_secs(1));
    Ok((
        a_ok && f_ok && fast,
        format!(
            "A eigenvalues max component error {:.4} ({}); F moduli {:?} vs {:?} ({}); {}",
            a_worst,
            if a_ok { "ok" } else { "out of tolerance" },
            moduli.iter().map(|m| (m * 1e4).round() / 1e4).collect::<Vec<_>>(),
            published_moduli,
            if f_ok { "ok" } else { "out of tolerance" },
            timing
        ),
    ))
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let orders = ModelOrders::new(4, 0, 2, 2).map_err(e2s)?;
    let coeffs = McarmaCoefficients::new(orders, published_mcar(), vec![DMatrix::identity(2, 2)]).map_err(e2s)?;
    let sys = assemble_companion(&coeffs).map_err(e2s)?;
    let before = mcarma_stationarity(&sys).map_err(e2s)?;
    let after = mcarma_stationarity(&perturb_companion(&sys, -0.03, PerturbMode::EveryEntry)).map_err(e2s)?;
    let pair = after
        .eigenvalues
        .iter()
        .min_by(|a, b| a[0].hypot(a[1]).total_cmp(&b[0].hypot(b[1])))
        .ok_or("no eigenvalues")?;
    let (re, im) = (pair[0], pair[1].abs());
    let re_rel = (re - -0.00032).abs() / 0.00032;
    let im_rel = (im - 0.0062).abs() / 0.0062;
    let ok = re_rel <= 0.2 && im_rel <= 0.2 && !before.stationary && after.stationary;
    Ok((
        ok,
        format!(
            "lambda_3,4 = {:.6} +- {:.6}i (rel err {:.3}, {:.3}; tol 0.2); stationary {} -> {}",
            re, im, re_rel, im_rel, before.stationary, after.stationary
        ),
    ))
}

// 4 ------------------------------------------------------------------------

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let sigma = DMatrix::from_row_slice(2, 2, &[1.018, -0.02238, -0.02238, 1.006]);
    let s = solve_beta(&sigma, 1.70, 1.77).map_err(e2s)?;
    let (fast, timing) = within_budget(t0.elapsed(), Duration::from_secs(1));
    let want_beta = [[1.009, 0.01174], [-0.03310, 1.002]];
    let beta_err = (0..2)
        .flat_map(|i| (0..2).map(move |j| (i, j)))
        .map(|(i, j)| (s.beta[i][j] - want_beta[i][j]).abs())
        .fold(0.0, f64::max);
    let c_ok = within(s.c_delta - 1.709, 1e-3);
    let r_ok = within(s.restriction_values[0] - 1.194, 1e-3) && within(s.restriction_values[1] - 1.247, 1e-3);
    let d_ok = s.delta_relative_error[0] <= 0.024 && s.delta_relative_error[1] <= 1e-10;
    let ok = c_ok && within(beta_err, 1e-3) && r_ok && d_ok && fast;
    Ok((
        ok,
        format!(
            "C = {:.5} (want 1.709 +- 1e-3); beta = [[{:.5}, {:.5}], [{:.5}, {:.5}]], max err {:.5}; \
             restrictions ({:.4}, {:.4}) (want 1.194, 1.247); delta rel err ({:.5}, {:.1e}) (want <= 0.024, 1e-10); {}",
            s.c_delta,
            s.beta[0][0],
            s.beta[0][1],
            s.beta[1][0],
            s.beta[1][1],
            beta_err,
            s.restriction_values[0],
            s.restriction_values[1],
            s.delta_relative_error[0],
            s.delta_relative_error[1],
            timing
        ),
    ))
}

// 5 ------------------------------------------------------------------------

fn random_rational(rng: &mut ChaCha20Rng) -> BigRational {
    let num: i64 = rng.random_range(-9..=9);
    let den: i64 = rng.random_range(1..=9);
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let steps = [
        BigRational::from_integer(BigInt::from(1)),
        BigRational::new(BigInt::from(1), BigInt::from(2)),
        BigRational::new(BigInt::from(1), BigInt::from(4)),
    ];
    let mut cases = 0usize;
    let mut mismatches = Vec::new();
    for p in 1..=4usize {
        for d in 1..=2usize {
            for q in 0..p {
                for h in &steps {
                    for _ in 0..50 {
                        let m = rng.random_range(1..=2usize);
                        let orders = ModelOrders::new(p, q, d, m).map_err(e2s)?;
                        let a: Vec<GMat<BigRational>> =
                            (0..p).map(|_| GMat::from_fn(d, d, |_, _| random_rational(&mut rng))).collect();
                        let b: Vec<GMat<BigRational>> =
                            (0..=q).map(|_| GMat::from_fn(d, m, |_, _| random_rational(&mut rng))).collect();
                        let fwd = forward_generic(&orders, &a, &b, h);
                        let beta = beta_stack(&orders, &a, &b);
                        let oracle = symbolic_oracle(&orders, &a, &beta, h, 10_000_000).map_err(e2s)?;
                        cases += 1;
                        if fwd != oracle {
                            mismatches.push(format!("p={p} d={d} q={q} m={m} h={h}"));
                        }
                    }
                }
            }
        }
    }
    let rf: RepresentationFile =
        serde_json::from_slice(&std::fs::read(fixture("published_var.json")).map_err(e2s)?).map_err(e2s)?;
    let report = discrepancy_report(&rf.to_representation().map_err(e2s)?).map_err(e2s)?;
    println!("discrepancy report: {}", serde_json::to_string(&report).map_err(e2s)?);
    let (fast, timing) = within_budget(t0.elapsed(), Duration::from_secs(60));
    Ok((
        mismatches.is_empty() && fast,
        format!(
            "{} exact cases, {} mismatches{}; constant ordering against the published form: {:?} (reported above); {}",
            cases,
            mismatches.len(),
            if mismatches.is_empty() { String::new() } else { format!(" [{}]", mismatches.join("; ")) },
            report.ordering,
            timing
        ),
    ))
}

// 6 ------------------------------------------------------------------------

/// Stable coefficients: `A_j = e_j(c) I + small noise`, where `e_j` are the
/// elementary symmetric polynomials of distinct positive roots `c`.
fn random_stable(rng: &mut ChaCha20Rng, p: usize, d: usize) -> McarmaCoefficients {
    loop {
        let roots: Vec<f64> = (0..p).map(|_| rng.random_range(0.3..2.0)).collect();
        let mut e = vec![1.0];
        for r in &roots {
            let mut next = vec![0.0; e.len() + 1];
            for (k, v) in e.iter().enumerate() {
                next[k] += v;
                next[k + 1] += v * r;
            }
            e = next;
        }
        let a: Vec<DMatrix<f64>> = (1..=p)
            .map(|j| DMatrix::from_fn(d, d, |i, k| if i == k { e[j] } else { 0.0 } + rng.random_range(-0.05..0.05)))
            .collect();
        let b0 = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let orders = ModelOrders::new(p, 0, d, d).unwrap();
        let c = McarmaCoefficients::new(orders, a, vec![b0]).unwrap();
        let stable = assemble_companion(&c)
            .and_then(|s| mcarma_stationarity(&s))
            .map(|r| r.stationary)
            .unwrap_or(false);
        if stable {
            return c;
        }
    }
}

fn round_trip_error(c: &McarmaCoefficients, h: f64) -> Result<f64, String> {
    let rep = forward_transform(c, h).map_err(e2s)?;
    let back = inverse_transform_mcar(&rep).map_err(e2s)?;
    Ok(c.a_blocks
        .iter()
        .chain(&c.b_blocks)
        .zip(back.a_blocks.iter().chain(&back.b_blocks))
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max))
}

/// Steps as in the oracle criterion. The error grows like
/// `eps |phi| / h^(p-1)`; the h = 0.1 figure is printed for information.
fn criterion_6() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut worst_fine = 0.0f64;
    for i in 0..100 {
        let p = 1 + i % 5;
        let d = 1 + (i / 5) % 3;
        let h = [1.0, 0.5, 0.25][i % 3];
        let c = random_stable(&mut rng, p, d);
        worst = worst.max(round_trip_error(&c, h)?);
        worst_fine = worst_fine.max(round_trip_error(&c, 0.1)?);
    }
    Ok((
        worst <= 1e-10,
        format!(
            "100 stable systems (p <= 5, d <= 3, h in {{1, 1/2, 1/4}}): max-norm error {worst:.2e} (tol 1e-10); \
             same systems at h = 0.1: {worst_fine:.2e} (information)"
        ),
    ))
}

// 7 ------------------------------------------------------------------------

fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|y| (y - m).powi(4)).sum::<f64>() / n;
    let se_mean = (v / n).sqrt();
    let se_var = ((m4 - v * v) / n).sqrt();
    (m, v, se_mean, se_var)
}

fn criterion_7() -> Outcome {
    let sets = [
        NigParams::new(2.93, 0.398, 1.70, -0.234).map_err(e2s)?,
        NigParams::new(3.13, -0.0781, 1.77, 0.0471).map_err(e2s)?,
    ];
    let mut ok = true;
    let mut notes = Vec::new();
    for (k, p) in sets.iter().enumerate() {
        let mean = nig_mean(p);
        let quad = |g: &dyn Fn(f64) -> f64| -> Result<f64, String> {
            let mut f = |x: f64| g(x) * nig_pdf(x, p);
            let lo = integrate_lower_tail(&mut f, mean, 1e-12).map_err(e2s)?;
            let hi = integrate_upper_tail(&mut f, mean, 1e-12).map_err(e2s)?;
            Ok(lo + hi)
        };
        let mass = quad(&|_| 1.0)?;
        let m1 = quad(&|x| x)?;
        let m2 = quad(&|x| (x - mean).powi(2))?;
        let var = nig_variance(p);
        let q_ok = (mass - 1.0).abs() <= 1e-6 && (m1 - mean).abs() <= 1e-6 && (m2 - var).abs() <= 1e-6;
        ok &= q_ok;
        notes.push(format!(
            "set {}: mass-1 {:.1e}, mean diff {:.1e}, var diff {:.1e}",
            k + 1,
            mass - 1.0,
            m1 - mean,
            m2 - var
        ));

        // Scaling closure.
        let x = nig_sample(p, 1_000_000, 70 + k as u64).map_err(e2s)?;
        let c = -1.7;
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let law = nig_scale(c, p).map_err(e2s)?;
        let (sm, sv, sem, sev) = moments(&scaled);
        let s_ok = (sm - nig_mean(&law)).abs() <= 3.0 * sem && (sv - nig_variance(&law)).abs() <= 3.0 * sev;
        ok &= s_ok;
        notes.push(format!(
            "scale: mean z {:.2}, var z {:.2}",
            (sm - nig_mean(&law)) / sem,
            (sv - nig_variance(&law)) / sev
        ));

        // Convolution closure with a second law sharing (a, b).
        let other = NigParams::new(p.a, p.b, 0.6, 0.3).map_err(e2s)?;
        let y = nig_sample(&other, 1_000_000, 90 + k as u64).map_err(e2s)?;
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let law = nig_convolve(&[*p, other]).map_err(e2s)?;
        let (cm, cv, cem, cev) = moments(&sum);
        let c_ok = (cm - nig_mean(&law)).abs() <= 3.0 * cem && (cv - nig_variance(&law)).abs() <= 3.0 * cev;
        ok &= c_ok;
        notes.push(format!(
            "convolution: mean z {:.2}, var z {:.2}",
            (cm - nig_mean(&law)) / cem,
            (cv - nig_variance(&law)) / cev
        ));

        // Fit round trip.
        let draws = nig_sample(p, 100_000, 110 + k as u64).map_err(e2s)?;
        let (fit, _) = nig_fit(&draws).map_err(e2s)?;
        let f_ok = (fit.a - p.a).abs() / p.a <= 0.05
            && (fit.delta - p.delta).abs() / p.delta <= 0.05
            && (fit.b - p.b).abs() <= 0.05
            && (fit.mu - p.mu).abs() <= 0.05;
        ok &= f_ok;
        notes.push(format!(
            "fit ({:.3}, {:.4}, {:.3}, {:.4})",
            fit.a, fit.b, fit.delta, fit.mu
        ));
    }
    Ok((ok, notes.join("; ")))
}

// 8 ------------------------------------------------------------------------

fn load_experiment(name: &str) -> Result<ExperimentFile, String> {
    serde_json::from_slice(&std::fs::read(fixture(name)).map_err(e2s)?).map_err(e2s)
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let diffusion = load_experiment("convergence_diffusion.json")?;
    let table = strong_error_experiment(&diffusion.to_spec().map_err(e2s)?).map_err(e2s)?;
    let slope = table.slope_h.ok_or("no h slope")?;
    let slope_ok = (slope - 0.5).abs() <= 0.15 && diffusion.n_paths == 2000;

    let toy = load_experiment("convergence_toy.json")?;
    let table = strong_error_experiment(&toy.to_spec().map_err(e2s)?).map_err(e2s)?;
    let mut cells: Vec<_> = table.cells.iter().filter(|c| c.epsilon != table.reference_epsilon).collect();
    cells.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    if cells.len() != 3 {
        return Err(format!("expected three truncation levels, got {}", cells.len()));
    }
    let mut ratio_ok = true;
    let mut ratios = Vec::new();
    for (i, j) in [(0, 1), (1, 2), (0, 2)] {
        let measured = cells[i].error_l2_sup / cells[j].error_l2_sup;
        let g = |e: f64| (e.powf(1.5) / 3.0).sqrt();
        let predicted = g(cells[i].epsilon) / g(cells[j].epsilon);
        let rel = (measured / predicted - 1.0).abs();
        ratio_ok &= rel <= 0.3;
        ratios.push(format!(
            "eps {}/{}: {:.3} vs {:.3}",
            cells[i].epsilon, cells[j].epsilon, measured, predicted
        ));
    }
    let (fast, timing) = within_budget(t0.elapsed(), Duration::from_secs(300));
    Ok((
        slope_ok && ratio_ok && fast,
        format!(
            "h slope {:.3} (want 0.5 +- 0.15, 2000 paths); truncation ratios [{}] (each within 30%); {}",
            slope,
            ratios.join(", "),
            timing
        ),
    ))
}

// 9 ------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let truth = synthetic::reference_model().map_err(e2s)?;
    let data = synthetic::reference_dataset(&truth, 40 * 365, 2024).map_err(e2s)?;
    let config = PipelineConfig {
        p: 2,
        ..Default::default()
    };
    let fit = fit_mcar_pipeline(&data, &config).map_err(e2s)?;
    let true_c = truth.coefficients().map_err(e2s)?;
    let got_c = fit.coefficients().map_err(e2s)?;
    let a_err = true_c
        .a_blocks
        .iter()
        .zip(&got_c.a_blocks)
        .map(|(x, y)| (x - y).amax())
        .fold(0.0, f64::max);
    let b_err = (truth.beta_matrix().map_err(e2s)? - fit.beta_matrix().map_err(e2s)?).amax();
    let mut s_worst = 0.0f64;
    let mut checked = 0;
    for k in 0..2 {
        for j in 1..=10 {
            let amp = truth.seasonality.amplitude(k, j);
            if amp > 0.5 {
                let t = &truth.seasonality.per_dim[k];
                let f = &fit.seasonality.per_dim[k];
                let err = (f[2 * j] - t[2 * j]).hypot(f[2 * j + 1] - t[2 * j + 1]) / amp;
                s_worst = s_worst.max(err);
                checked += 1;
            }
        }
    }
    Ok((
        a_err <= 0.1 && b_err <= 0.1 && s_worst <= 0.05,
        format!(
            "A-block max error {a_err:.4} (tol 0.1); beta max error {b_err:.4} (tol 0.1); \
             seasonality worst relative error {s_worst:.4} over {checked} harmonics (tol 0.05)"
        ),
    ))
}

// 10 -----------------------------------------------------------------------

fn run_twice(args: &[&str], out_name: &str, dir: &Path) -> Result<bool, String> {
    let mut results = Vec::new();
    for round in 0..2 {
        let out = dir.join(format!("{round}-{out_name}"));
        let o = Command::new(bin())
            .args(args)
            .arg("--out")
            .arg(&out)
            .current_dir(fixture(""))
            .output()
            .map_err(e2s)?;
        if !o.status.success() {
            return Err(format!("{:?}: {}", args, String::from_utf8_lossy(&o.stderr)));
        }
        results.push((std::fs::read(&out).map_err(e2s)?, o.stdout));
    }
    Ok(results[0] == results[1])
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(e2s)?;
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("forward", vec!["transform", "published_mcar.json", "--direction", "forward", "--h", "0.5"]),
        ("inverse", vec!["transform", "published_var.json", "--direction", "inverse"]),
        ("paper", vec!["transform", "published_var.json", "--direction", "inverse", "--paper-mode"]),
        ("fit", vec!["fit", "synthetic_daily.csv", "--config", "fit_config.json"]),
        ("sim-fitted", vec!["simulate", "reference_model.json", "--T", "730", "--paths", "4", "--seed", "9"]),
        ("sim-driven", vec!["simulate", "driven_model.json", "--T", "50", "--h", "0.1", "--paths", "8", "--seed", "9"]),
        ("convergence", vec!["convergence", "convergence_toy.json", "--paths", "200"]),
        ("check", vec!["check", "published_mcar.json"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &runs {
        if !run_twice(args, name, dir.path())? {
            differing.push(*name);
        }
    }
    Ok((
        differing.is_empty(),
        format!(
            "{} commands rerun, outputs differing: [{}]",
            runs.len(),
            differing.join(", ")
        ),
    ))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("published VAR -> MCAR blocks via paper-mode inverse", criterion_1),
        ("published eigenvalues and moduli", criterion_2),
        ("rho = -0.03 perturbation", criterion_3),
        ("published error-loading solver", criterion_4),
        ("exact oracle equivalence", criterion_5),
        ("forward/inverse round trip", criterion_6),
        ("NIG algebra", criterion_7),
        ("strong convergence", criterion_8),
        ("pipeline closure", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += ok as usize;
        println!(
            "criterion {:>2} {} [{}]: {} ({:.2} s)",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name,
            detail,
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {passed}/{} criteria pass", criteria.len());
}
