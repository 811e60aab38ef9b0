//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Runs without the libtest harness so the report is always
//! printed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use common::{desk, rng, simplex_columns, simplex_qp_matrix, uniform, variability};
use funmix::metrics::{align_abundances, prune_library, spectral_angle, sre};
use funmix::model::ModelDims;
use funmix::quec::{assemble_rhs, kkt_oracle_solve, quec_factorize, quec_solve};
use funmix::simulate::{
    add_noise_snr, purity_window, realized_snr_db, sample_purity_abundances, simulate, synthetic_library,
    SimulationConfig,
};
use funmix::solvers::{a_step, b_step_fasun, fasun, fclsu_admm, suns, AdmmParams, SolverState};
use funmix::{constraint_violations, Error, Matrix};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Outcome;

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn aligned_sre(a_true: &Matrix, a_hat: &Matrix) -> f64 {
    sre(a_true, &align_abundances(a_true, a_hat).unwrap()).unwrap().sre_db
}

fn column_sum_error(a: &Matrix) -> f64 {
    a.column_sums().iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

fn quec_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut g = rng(2024);
    for _ in 0..100 {
        let p = g.random_range(1..=8);
        let r = g.random_range(1..=5);
        let n = g.random_range(1..=10);
        let mu = 10f64.powf(g.random_range(-3.0..=3.0));
        let y = uniform(&mut g, p, n, 0.0, 1.0);
        let e = uniform(&mut g, p, r, 0.0, 1.0);
        let s = uniform(&mut g, r, n, -0.5, 1.5);
        let l = uniform(&mut g, r, n, -0.5, 0.5);
        let factors = quec_factorize(&e, mu).unwrap();
        let a = quec_solve(&factors, &assemble_rhs(&e, &y, &s, &l, mu).unwrap()).unwrap();
        worst = worst.max(a.max_abs_diff(&kkt_oracle_solve(&y, &e, &s, &l, mu).unwrap()));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-8 && secs < 1.0,
        format!("max |dev| = {worst:.2e} (< 1e-8), {secs:.3} s (< 1 s)"),
    )
}

/// Replays a FaSUn run one inner update at a time so that every QuEC output
/// (A in the A-step, B in the B-step) can be inspected.
fn exact_sum_to_one() -> Outcome {
    let desk = desk(1);
    let y = add_noise_snr(&desk.y_clean, 40.0, 1).unwrap();
    let d = &desk.d;
    let params = AdmmParams::default().with_outer(200);
    let mut state = SolverState::zeros(ModelDims::from_data(&y, d, 3).unwrap());
    let (mut worst_a, mut worst_b, mut calls) = (0.0f64, 0.0f64, 0usize);
    for _ in 0..params.outer {
        for _ in 0..params.inner_a {
            a_step(&mut state, &y, d, &params, 1).unwrap();
            worst_a = worst_a.max(column_sum_error(&state.a));
            calls += 1;
        }
        for _ in 0..params.inner_b {
            b_step_fasun(&mut state, &y, d, &params, 1).unwrap();
            worst_b = worst_b.max(column_sum_error(&state.b));
            calls += 1;
        }
    }
    let reference = fasun(&y, d, 3, &params).unwrap();
    let same_run = reference.a_raw == state.a;
    let worst_raw = column_sum_error(&reference.a_raw);
    let pass = worst_a < 1e-10 && worst_raw < 1e-10 && same_run;
    outcome(
        pass,
        format!(
            "{calls} QuEC calls: max |1^T A - 1| = {worst_a:.2e}, final A_raw {worst_raw:.2e} (< 1e-10); \
             max |1^T B - 1| = {worst_b:.2e}; replay identical to fasun: {same_run}"
        ),
    )
}

fn fclsu_vs_qp_oracle() -> Outcome {
    let start = Instant::now();
    // The penalty is matched to the Gram spectrum of 10-band instances
    // (eigenvalues roughly 0.1..15); the profile's mu_a = 50 is sized for
    // scenes with hundreds of bands and converges far slower here.
    let params = AdmmParams {
        mu_a: 1.0,
        ..AdmmParams::default()
    };
    let mut g = rng(77);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let e = uniform(&mut g, 10, 4, 0.0, 1.0);
        let a = simplex_columns(&mut g, 4, 50);
        // Noise pushes part of the pixels outside the endmember simplex so
        // the non-negativity constraints become active.
        let y = e.matmul(&a).add(&uniform(&mut g, 10, 50, -0.05, 0.05));
        let res = fclsu_admm(&y, &e, &params, 2000).unwrap();
        worst = worst.max(res.a_feasible.max_abs_diff(&simplex_qp_matrix(&y, &e)));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 10.0,
        format!("mu_a = 1: max |dev| = {worst:.2e} (< 1e-4), {secs:.2} s (< 10 s)"),
    )
}

fn fasun_desk_recovery() -> Outcome {
    let start = Instant::now();
    let desk = desk(5);
    let params = AdmmParams::default().with_outer(2000);
    let y40 = add_noise_snr(&desk.y_clean, 40.0, 5).unwrap();
    let y20 = add_noise_snr(&desk.y_clean, 20.0, 5).unwrap();
    let s40 = aligned_sre(&desk.a_true, &fasun(&y40, &desk.d, 3, &params).unwrap().a_feasible);
    let s20 = aligned_sre(&desk.a_true, &fasun(&y20, &desk.d, 3, &params).unwrap().a_feasible);
    let secs = start.elapsed().as_secs_f64();
    let bound = aligned_sre(
        &desk.a_true,
        &fclsu_admm(&y40, &desk.e_true, &params, 2000).unwrap().a_feasible,
    );
    outcome(
        s40 >= 25.0 && s40 > s20 && secs < 60.0,
        format!(
            "SRE@40dB = {s40:.2} dB (>= 25), SRE@20dB = {s20:.2} dB (< SRE@40dB), {secs:.2} s (< 60 s); \
             FCLSU with true E = {bound:.2} dB"
        ),
    )
}

fn variability_ordering() -> Outcome {
    let seeds = 5;
    let params = AdmmParams::default().with_outer(2000);
    let (mut f, mut s) = (0.0, 0.0);
    for seed in 0..seeds {
        let (y, d, a_true) = variability(seed);
        f += aligned_sre(&a_true, &fasun(&y, &d, 3, &params).unwrap().a_feasible);
        s += aligned_sre(&a_true, &suns(&y, &d, 3, &params).unwrap().a_feasible);
    }
    let (f, s) = (f / seeds as f64, s / seeds as f64);
    outcome(
        f >= s - 0.5,
        format!("mean SRE over {seeds} seeds: FaSUn {f:.2} dB, SUnS {s:.2} dB (FaSUn >= SUnS - 0.5)"),
    )
}

fn purity_contract() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    for rho in [0.5, 0.7, 1.0] {
        let a = sample_purity_abundances(6, 1000, rho, 1.0 / 6.0, 3).unwrap();
        let v = constraint_violations(&a).unwrap();
        let (lo, hi) = purity_window(rho, 6);
        let norms: Vec<f64> = a
            .columns()
            .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let in_window = norms.iter().all(|&n| n > lo && n <= hi);
        pass &= v.asc_max < 1e-12 && v.anc_min >= -1e-12 && in_window;
        notes.push(format!(
            "rho {rho}: asc {:.1e}, window ({lo:.3}, {hi}] ok={in_window}",
            v.asc_max
        ));
    }
    let infeasible = matches!(
        sample_purity_abundances(6, 1000, 0.3, 1.0 / 6.0, 3),
        Err(Error::InfeasiblePurity { .. })
    );
    pass &= infeasible;
    notes.push(format!("rho 0.3 rejected: {infeasible}"));
    outcome(pass, notes.join("; "))
}

fn noise_contract() -> Outcome {
    let d = synthetic_library(60, 20, 9).unwrap();
    let clean = simulate(&SimulationConfig::purity(500, 4, 0.8, 9), &d).unwrap().y;
    let mut worst = 0.0f64;
    for snr in [20.0, 30.0, 40.0] {
        let noisy = add_noise_snr(&clean, snr, 13).unwrap();
        worst = worst.max((realized_snr_db(&clean, &noisy) - snr).abs());
    }
    outcome(
        worst < 1e-9,
        format!("max |realized - target| = {worst:.2e} dB (< 1e-9)"),
    )
}

fn complexity_scaling() -> Outcome {
    let lib = synthetic_library(50, 60, 4).unwrap();
    let params = AdmmParams::default().with_outer(20);
    let per_iter = |n: usize| {
        let y = simulate(&SimulationConfig::purity(n, 5, 0.8, 4).with_snr(30.0), &lib)
            .unwrap()
            .y;
        (0..5)
            .map(|_| {
                let res = fasun(&y, &lib, 5, &params).unwrap();
                res.diagnostics.elapsed_secs / res.diagnostics.outer_iterations as f64
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (t1, t2) = (per_iter(2000), per_iter(4000));
    let ratio = t2 / t1;
    outcome(
        ratio <= 2.5,
        format!(
            "per outer iteration: n=2000 {:.3} ms, n=4000 {:.3} ms, ratio {ratio:.2} (<= 2.5)",
            t1 * 1e3,
            t2 * 1e3
        ),
    )
}

fn pruning_floor() -> Outcome {
    let lib = synthetic_library(60, 50, 21).unwrap();
    let pruned = prune_library(&lib, 4.44).unwrap();
    let d = &pruned.library;
    let mut min = f64::INFINITY;
    for i in 0..d.cols() {
        for j in i + 1..d.cols() {
            min = min.min(spectral_angle(d.col(i), d.col(j)).unwrap());
        }
    }
    outcome(
        min >= 4.44 - 1e-9,
        format!(
            "kept {} of 50 atoms, min pairwise angle {min:.3} deg (>= 4.44)",
            d.cols()
        ),
    )
}

fn objective_descent() -> Outcome {
    let desk = desk(2);
    let params = AdmmParams::default().with_outer(200).with_inner(50, 50);
    let h = fasun(&desk.y_clean, &desk.d, 3, &params)
        .unwrap()
        .diagnostics
        .objective_history;
    let worst_rise = h
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let ratio = h.last().unwrap() / h[0];
    outcome(
        worst_rise <= 0.01 && ratio < 0.1,
        format!(
            "{} outer iterations: worst relative rise {:.2e} (<= 1e-2), final/initial {ratio:.2e} (< 0.1)",
            h.len(),
            worst_rise.max(0.0)
        ),
    )
}

fn run_cli(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_funmix")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "funmix {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file under `dir` with its contents; timing lines are dropped.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in ["scene", "fit"] {
        let mut entries: Vec<_> = std::fs::read_dir(dir.join(sub))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for path in entries {
            let mut bytes = std::fs::read(&path).unwrap();
            if path.extension().is_some_and(|e| e == "txt") {
                let text = String::from_utf8(bytes).unwrap();
                bytes = text
                    .lines()
                    .filter(|l| !l.starts_with("wall_time_secs"))
                    .collect::<Vec<_>>()
                    .join("\n")
                    .into_bytes();
            }
            files.push((format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), bytes));
        }
    }
    files
}

fn pipeline(dir: &Path) -> (Vec<(String, Vec<u8>)>, Vec<u8>) {
    let scene = dir.join("scene");
    let fit = dir.join("fit");
    let s = |p: &Path| p.to_str().unwrap().to_string();
    run_cli(&[
        "simulate",
        "--kind",
        "purity",
        "--pixels",
        "300",
        "--endmembers",
        "3",
        "--rho",
        "0.8",
        "--snr",
        "30",
        "--seed",
        "7",
        "--synthetic-bands",
        "40",
        "--synthetic-atoms",
        "12",
        "--out",
        &s(&scene),
    ]);
    run_cli(&[
        "unmix",
        "--method",
        "fasun",
        "--input",
        &s(&scene),
        "--r",
        "3",
        "--outer",
        "100",
        "--out",
        &s(&fit),
    ]);
    let eval = run_cli(&[
        "eval",
        "--true",
        &s(&scene.join("A_true.fumx")),
        "--est",
        &s(&fit.join("A_feasible.fumx")),
    ]);
    (snapshot(dir), eval.stdout)
}

fn end_to_end_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (files_a, sre_a) = pipeline(a.path());
    let (files_b, sre_b) = pipeline(b.path());
    let identical = files_a == files_b && sre_a == sre_b;
    outcome(
        identical,
        format!(
            "{} artifacts compared, byte-identical: {identical}; SRE printed {}",
            files_a.len(),
            String::from_utf8_lossy(&sre_a).trim()
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("QuEC matches the bordered KKT oracle", quec_oracle_equivalence),
        ("exact sum-to-one across a FaSUn run", exact_sum_to_one),
        ("FCLSU matches the simplex QP oracle", fclsu_vs_qp_oracle),
        ("FaSUn desk-scale recovery", fasun_desk_recovery),
        ("FaSUn vs SUnS under endmember scaling", variability_ordering),
        ("purity generator contract", purity_contract),
        ("noise SNR contract", noise_contract),
        ("linear per-iteration cost in n", complexity_scaling),
        ("pruned library angle floor", pruning_floor),
        ("objective descent", objective_descent),
        ("end-to-end determinism", end_to_end_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {status}  {name}: {} [{:.1} s]",
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
        failed += usize::from(!result.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
