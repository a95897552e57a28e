//! Timing harness: per-Newton-iteration wall time on synthesized chains of
//! increasing state dimension, with a log-log slope fit over the sizes.

use std::path::Path;

use nalgebra::DVector;

use kyp::barrier::{evaluate_barrier, phase1, solve, Phase1Outcome, SolveStatus, SolverConfig};
use kyp::synthesis::{assemble_kyp_sdp, build_actuator_uncertainty, generate_mass_spring_chain};

use crate::commands::CliError;

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub n: usize,
    pub p: usize,
    pub newton_iters: usize,
    pub riccati_solves: u64,
    pub lyapunov_solves: u64,
    pub secs_per_iter: f64,
}

/// Short solver schedule: enough Newton iterations for a stable
/// per-iteration timing without running the full path to t_max.
fn bench_config() -> SolverConfig {
    SolverConfig {
        t0: Some(1.0),
        t_max: 100.0,
        newton_tol: 1e-5,
        max_newton_iters: 6,
        ..SolverConfig::default()
    }
}

/// Run the chain benchmark at the given state dimensions (each must be
/// even: a chain of k masses has n = 2k states).
pub fn run_bench(sizes: &[usize], repeats: usize, gamma: f64) -> Result<Vec<BenchRow>, CliError> {
    if sizes.is_empty() {
        return Err(CliError::Usage("--sizes must name at least one state dimension".into()));
    }
    if repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if n < 2 || n % 2 != 0 {
            return Err(CliError::Usage(format!(
                "size {n} is not an even state dimension (chains have n = 2k)"
            )));
        }
        let (a, b1) = generate_mass_spring_chain(n / 2);
        let spec = build_actuator_uncertainty(a, b1, gamma);
        let prob = assemble_kyp_sdp(&spec).map_err(|e| CliError::Numerical(e.to_string()))?;
        let cfg = bench_config();

        // Probe a ladder of multiplier scales before falling back to a
        // full phase-I solve; the chain instances have narrow feasible
        // windows at small lambda, so the ladder reaches down to 2^-20.
        let p = prob.p();
        let mut start = None;
        let mut probes = vec![1.0f64, 4.0, 16.0];
        probes.extend((1..=10).map(|k| 0.25f64.powi(k)));
        for theta in probes {
            let candidate = DVector::from_element(p, theta);
            if evaluate_barrier(&prob, &candidate, 1.0, &cfg).is_ok() {
                start = Some(candidate);
                break;
            }
        }
        let start = match start {
            Some(s) => s,
            None => {
                // Feasibility search needs the full path depth, not the
                // shortened timing schedule.
                let phase1_cfg = SolverConfig { t0: None, ..SolverConfig::default() };
                match phase1(&prob, &phase1_cfg)
                    .map_err(|e| CliError::Numerical(e.to_string()))?
                {
                    Phase1Outcome::Feasible { lambda, .. } => lambda,
                    Phase1Outcome::Infeasible { lambda0, .. } => {
                        return Err(CliError::Infeasible { lambda0 })
                    }
                }
            }
        };

        let mut per_iter = Vec::with_capacity(repeats);
        let mut counters = (0usize, 0u64, 0u64);
        for _ in 0..repeats {
            let report = solve(&prob, &start, &cfg);
            if report.status == SolveStatus::DomainError {
                return Err(CliError::Numerical(
                    report.message.unwrap_or_else(|| "bench solve failed".into()),
                ));
            }
            let wall: f64 = report.stages.iter().map(|s| s.wall_secs).sum();
            if report.newton_iters_total == 0 {
                return Err(CliError::Numerical(format!(
                    "bench solve at n = {n} took no Newton iterations"
                )));
            }
            per_iter.push(wall / report.newton_iters_total as f64);
            counters = (
                report.newton_iters_total,
                report.riccati_solves,
                report.lyapunov_solves,
            );
        }
        per_iter.sort_by(f64::total_cmp);
        let median = per_iter[per_iter.len() / 2];
        rows.push(BenchRow {
            n,
            p,
            newton_iters: counters.0,
            riccati_solves: counters.1,
            lyapunov_solves: counters.2,
            secs_per_iter: median,
        });
    }
    Ok(rows)
}

/// Least-squares slope of log(secs_per_iter) against log(n). Needs at
/// least two distinct sizes.
pub fn fit_loglog_slope(rows: &[BenchRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.secs_per_iter.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

pub fn csv_text(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,p,newton_iters,riccati_solves,lyapunov_solves,secs_per_iter\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.9e}\n",
            r.n, r.p, r.newton_iters, r.riccati_solves, r.lyapunov_solves, r.secs_per_iter
        ));
    }
    out
}

/// `bench`: run, print rows plus the fitted slope, optionally write CSV.
pub fn cmd_bench(
    sizes: &[usize],
    repeats: usize,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let rows = run_bench(sizes, repeats, 0.25)?;
    print!("{}", csv_text(&rows));
    if let Some(slope) = fit_loglog_slope(&rows) {
        println!("fitted log-log slope: {slope:.3}");
    }
    if let Some(path) = csv {
        std::fs::write(path, csv_text(&rows))
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        println!("csv written to {}", path.display());
    }
    Ok(())
}
