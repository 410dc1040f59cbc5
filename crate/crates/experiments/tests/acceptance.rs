//! End-to-end acceptance gates for the whole pipeline.
//!
//! Each criterion prints one `ACCEPTANCE <k> <name>: PASS|FAIL (<detail>)`
//! line (visible with `cargo test --test acceptance -- --nocapture`); the
//! test runs every gate regardless of earlier failures and only asserts at
//! the end, so a breakage reports the full scoreboard.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use eki_core::filter::{init_ensemble, run_until_discrepancy};
use eki_core::model::{
    discrepancy_threshold, effective_dimension, generate_observations, ground_truth, residual,
    ModelConfig, PriorForm, PriorSpec,
};
use eki_core::nalgebra::{DMatrix, DVector};
use eki_core::posterior::posterior_moments;
use eki_core::rng::derive_seed;
use eki_core::spectral::eigenpairs;
use eki_experiments::config::{ExperimentSpec, Study};
use eki_experiments::studies::{
    run_contraction_study, run_coverage_study, run_figure1, run_oracle_check,
    run_roundtrip_suite, DynError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

struct Gate {
    index: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

/// Run one criterion, enforce its wall-clock budget (when stated), and print
/// its scoreboard line immediately.
fn gate(
    index: usize,
    name: &'static str,
    budget: Option<Duration>,
    body: impl FnOnce() -> Result<(bool, String), DynError>,
) -> Gate {
    let start = Instant::now();
    let (mut pass, mut detail) = match body() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    if let Some(b) = budget {
        if elapsed > b {
            pass = false;
            detail.push_str(&format!("; over budget {:.0?}", b));
        }
    }
    detail.push_str(&format!("; {:.1}s", elapsed.as_secs_f64()));
    println!(
        "ACCEPTANCE {index} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    Gate {
        index,
        name,
        pass,
        detail,
    }
}

fn criterion_oracle() -> Result<(bool, String), DynError> {
    let spec = ExperimentSpec::defaults(Study::Oracle);
    let o = run_oracle_check(&spec)?;
    let max_var = o
        .var_rel_err
        .iter()
        .take(5)
        .cloned()
        .fold(0.0_f64, f64::max);
    Ok((
        o.pass,
        format!(
            "J=2048 dt=1e-3 D=10 n=1e4 tau={}: mean rel l2 err {:.2e} (tol 5e-2), max var dev i<=5 {:.2e} (tol 2e-1)",
            o.tau, o.mean_rel_err, max_var
        ),
    ))
}

/// Brute-force dense mirror of the conjugate update: prior N(0, Λ), noise
/// covariance (1/(τn))·I, innovation form S = KΛKᵀ + R, gain G = ΛKᵀS⁻¹,
/// m = GỸ, C = Λ − GKΛ — everything as explicitly inverted matrices.
fn criterion_dense_posterior() -> Result<(bool, String), DynError> {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_ac2);
    let mut max_dev = 0.0_f64;
    for _ in 0..100 {
        let dim = rng.gen_range(1..=8_usize);
        let alpha = rng.gen_range(0.5..3.0);
        let scale = rng.gen_range(0.25..4.0);
        let tau = rng.gen_range(0.1..2.0);
        let n = rng.gen_range(10..=1_000_000_u64);
        let decay = rng.gen_range(1.0..3.0);
        let noise_free = rng.gen_bool(0.2);
        let basis = eigenpairs(dim)?;
        let v0 = ground_truth(dim, decay)?;
        let obs = generate_observations(&basis, &v0, n, dim, rng.gen(), noise_free)?;
        let mut prior = PriorSpec::new(alpha, scale, dim)?;
        if rng.gen_bool(0.5) {
            prior.form = PriorForm::Alternate;
        }
        let post = posterior_moments(&basis, &prior, &obs, tau)?;

        let lam = DMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            (1..=dim).map(|i| prior.eigenvalue(i)),
        ));
        let kmat = DMatrix::from_diagonal(&DVector::from_iterator(
            dim,
            (1..=dim).map(|i| basis.kappa(i)),
        ));
        let noise_cov = 1.0 / (tau * n as f64);
        let s = &kmat * &lam * kmat.transpose() + DMatrix::identity(dim, dim) * noise_cov;
        let s_inv = s.try_inverse().ok_or("singular innovation covariance")?;
        let gain = &lam * kmat.transpose() * s_inv;
        let y = DVector::from_column_slice(&obs.ytilde);
        let dense_mean = &gain * y;
        let dense_cov = &lam - &gain * &kmat * &lam;
        for i in 0..dim {
            max_dev = max_dev
                .max((post.mean[i] - dense_mean[i]).abs())
                .max((post.variance[i] - dense_cov[(i, i)]).abs());
        }
    }
    Ok((
        max_dev <= 1e-10,
        format!("100 random instances D<=8: max |diag - dense| = {max_dev:.2e} (tol 1e-10)"),
    ))
}

fn criterion_stopping_contract() -> Result<(bool, String), DynError> {
    let mut model = ModelConfig::default();
    model.d_override = Some(100);
    let dim = model.dim();
    let basis = eigenpairs(dim)?;
    let v0 = ground_truth(dim, 2.5)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1_000_u64, 10_000, 100_000] {
        let mut m = model.clone();
        m.n = n;
        let stop_dim = dim.min(effective_dimension(n, m.p, m.dim_constant));
        let kappa = discrepancy_threshold(&m, stop_dim, n);
        let obs = generate_observations(
            &basis,
            &v0,
            n,
            dim,
            derive_seed(m.seed, "acceptance3/obs", n),
            false,
        )?;
        let mut ens = init_ensemble(
            m.particles,
            &m.prior(dim),
            derive_seed(m.seed, "acceptance3/ens", n),
            m.dt,
        )?;
        let report = run_until_discrepancy(&basis, &mut ens, &obs, kappa, 1, m.k_max, stop_dim)?;
        let path = &report.residual_path;
        let k = report.k_dp;
        let crossed = !report.hit_cap && path.len() == k + 1 && path[k] <= kappa;
        let strict_before = k == 0 || path[k - 1] > kappa;
        pass &= crossed && strict_before;
        parts.push(format!("n=1e{} k_dp={k}", (n as f64).log10() as u32));
    }
    Ok((
        pass,
        format!(
            "D=100 alpha=2 C=1: R_k_dp <= kappa < R_(k_dp-1), finite stop at {}",
            parts.join(", ")
        ),
    ))
}

fn criterion_residual_calibration() -> Result<(bool, String), DynError> {
    let dim = 100_usize;
    let n = 10_000_u64;
    let basis = eigenpairs(dim)?;
    let v0 = ground_truth(dim, 2.5)?;
    let draws = 10_000_u64;
    let mut sum = 0.0;
    for rep in 0..draws {
        let obs = generate_observations(
            &basis,
            &v0,
            n,
            dim,
            derive_seed(1, "acceptance4/noise", rep),
            false,
        )?;
        sum += residual(&basis, &obs, &v0);
    }
    let mean = sum / draws as f64;
    let target = dim as f64 / n as f64;
    let rel = (mean / target - 1.0).abs();
    Ok((
        rel <= 0.05,
        format!(
            "mean residual at truth over 1e4 draws = {mean:.6} vs D/n = {target}: rel dev {rel:.2e} (tol 5e-2)"
        ),
    ))
}

fn criterion_round_trip() -> Result<(bool, String), DynError> {
    let spec = ExperimentSpec::defaults(Study::Roundtrip);
    let o = run_roundtrip_suite(&spec)?;
    Ok((
        o.pass,
        format!(
            "m=1024 D=64 sup err {:.2e} (tol 1e-2), refinement slope {:.2} (target -2 +/- 0.3)",
            o.anchor_err, o.slope
        ),
    ))
}

fn criterion_contraction_trend() -> Result<(bool, String), DynError> {
    let mut spec = ExperimentSpec::defaults(Study::Contraction);
    spec.n_list = vec![1_000, 10_000, 100_000, 1_000_000];
    let o = run_contraction_study(&spec)?;
    let monotone = o.medians.windows(2).all(|w| w[1].1 < w[0].1);
    let med: Vec<String> = o
        .medians
        .iter()
        .map(|(n, m)| format!("n=1e{}:{m:.3}", (*n as f64).log10() as u32))
        .collect();
    Ok((
        o.fitted_slope <= -0.15 && monotone,
        format!(
            "fitted slope {:.3} (gate <= -0.15) vs theoretical {:.3}; medians {} (monotone: {monotone}); capped {} diverged {}",
            o.fitted_slope,
            o.theoretical_slope,
            med.join(" "),
            o.capped,
            o.diverged
        ),
    ))
}

fn criterion_coverage_trend() -> Result<(bool, String), DynError> {
    let spec = ExperimentSpec::defaults(Study::Coverage);
    let o = run_coverage_study(&spec)?;
    let cov: Vec<(u64, f64)> = o.per_n.iter().map(|&(n, v, _)| (n, v)).collect();
    let at_mid = cov
        .iter()
        .find(|(n, _)| *n == 10_000)
        .map(|&(_, v)| v)
        .ok_or("missing n=1e4 row")?;
    let first50_mid = o
        .first50_v
        .iter()
        .find(|(n, _)| *n == 10_000)
        .map(|&(_, v)| v)
        .unwrap_or(f64::NAN);
    let endpoint = cov.last().ok_or("empty coverage")?.1 >= cov[0].1;
    let mut inversions = 0_usize;
    let mut small = true;
    for w in cov.windows(2) {
        if w[1].1 < w[0].1 {
            inversions += 1;
            small &= w[0].1 - w[1].1 <= 0.05;
        }
    }
    let trend = endpoint && inversions <= 1 && small;
    let per: Vec<String> = cov
        .iter()
        .map(|(n, v)| format!("n=1e{}:{v:.3}", (*n as f64).log10() as u32))
        .collect();
    Ok((
        at_mid >= 0.80 && trend,
        format!(
            "400 reps J=512 first-10-coeff 95% band: {} (gate n=1e4 >= 0.80, first 50 reps there: {first50_mid:.2}); trend ok: {trend}; capped {} diverged {}",
            per.join(" "),
            o.capped,
            o.diverged
        ),
    ))
}

fn criterion_figure1() -> Result<(bool, String), DynError> {
    let tmp = tempfile::tempdir()?;
    let mut spec = ExperimentSpec::defaults(Study::Figure1);
    spec.output_dir = tmp.path().join("fig");
    let o = run_figure1(&spec)?;
    let areas: Vec<f64> = o.panels.iter().map(|p| p.f_band_area).collect();
    let decreasing = areas.windows(2).all(|w| w[1] < w[0]);
    let last = o.panels.last().ok_or("no panels")?;
    let contained = last.truth_inside_points >= 95 && last.grid_points == 100;
    let stopped = o.panels.iter().all(|p| !p.hit_cap);
    let mut files_ok = true;
    for n in &spec.n_list {
        for name in [
            format!("coeff_n{n}.csv"),
            format!("coeff_n{n}.svg"),
            format!("function_n{n}.csv"),
            format!("function_n{n}.svg"),
        ] {
            files_ok &= spec.output_dir.join(name).is_file();
        }
    }
    let svg = std::fs::read_to_string(
        spec.output_dir
            .join(format!("function_n{}.svg", last.n)),
    )?;
    let truth_layer = svg.contains("class=\"truth\"");
    Ok((
        decreasing && contained && stopped && files_ok && truth_layer,
        format!(
            "band areas {} (strictly decreasing: {decreasing}); truth inside {}/{} points in n={} panel (gate >= 95); 12 panel files: {files_ok}; truth layer drawn: {truth_layer}",
            areas
                .iter()
                .map(|a| format!("{a:.3}"))
                .collect::<Vec<_>>()
                .join(" > "),
            last.truth_inside_points,
            last.grid_points,
            last.n
        ),
    ))
}

fn run_study_to_dir(bin: &str, args: &[&str], out: &Path) -> Result<(), DynError> {
    let status = Command::new(bin)
        .args(args)
        .arg("--out")
        .arg(out)
        .status()?;
    if !status.success() {
        return Err(format!("study run {args:?} exited with {status}").into());
    }
    Ok(())
}

fn criterion_determinism() -> Result<(bool, String), DynError> {
    let bin = env!("CARGO_BIN_EXE_experiments");
    let tmp = tempfile::tempdir()?;
    let mut identical = Vec::new();
    for (study, csv, extra) in [
        (
            "contraction",
            "contraction.csv",
            &["--n", "1000", "--n", "10000", "--replicates", "6"][..],
        ),
        ("coverage", "coverage.csv", &["--n", "1000", "--replicates", "8"][..]),
    ] {
        let mut bytes = Vec::new();
        for jobs in ["1", "8"] {
            let out = tmp.path().join(format!("{study}-j{jobs}"));
            let mut args = vec![study, "--seed", "7", "--particles", "64", "--jobs", jobs];
            args.extend_from_slice(extra);
            run_study_to_dir(bin, &args, &out)?;
            bytes.push(std::fs::read(out.join(csv))?);
        }
        identical.push((csv, bytes[0] == bytes[1]));
    }
    let pass = identical.iter().all(|(_, same)| *same);
    let detail: Vec<String> = identical
        .iter()
        .map(|(csv, same)| format!("{csv} --jobs 1 vs 8 byte-identical: {same}"))
        .collect();
    Ok((pass, detail.join("; ")))
}

#[test]
fn acceptance_criteria() {
    let mins = |m: u64| Some(Duration::from_secs(60 * m));
    let gates = vec![
        gate(1, "oracle-equivalence", mins(1), criterion_oracle),
        gate(2, "dense-vs-diagonal-posterior", None, criterion_dense_posterior),
        gate(3, "stopping-rule-contract", mins(2), criterion_stopping_contract),
        gate(4, "residual-calibration", None, criterion_residual_calibration),
        gate(5, "round-trip", None, criterion_round_trip),
        gate(6, "contraction-trend", mins(10), criterion_contraction_trend),
        gate(7, "coverage-trend", mins(10), criterion_coverage_trend),
        gate(8, "figure1-reproduction", mins(2), criterion_figure1),
        gate(9, "determinism", None, criterion_determinism),
    ];
    let failures: Vec<String> = gates
        .iter()
        .filter(|g| !g.pass)
        .map(|g| format!("criterion {} ({}): {}", g.index, g.name, g.detail))
        .collect();
    assert!(
        failures.is_empty(),
        "acceptance failures:\n{}",
        failures.join("\n")
    );
}
