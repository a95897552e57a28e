//! Subcommand implementations and the exit-code contract:
//! 0 success, 1 validation/parse failure, 2 infeasible, 3 numerical failure.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use kyp::barrier::{margins_at, phase1, solve, Phase1Outcome, SolveStatus, SolverConfig};
use kyp::model::{validate_problem, KypProblem, Severity};
use kyp::synthesis::{assemble_kyp_sdp, build_actuator_uncertainty, generate_mass_spring_chain};
use kyp::verify::{check_frequency_domain, check_kyp_lmi, log_omega_grid};
use kyp::Tolerances;

use crate::files::{status_string, ProblemFile, ReportFile};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("validation failed")]
    Validation,
    #[error("infeasible: best feasibility shift {lambda0}")]
    Infeasible { lambda0: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Parse { .. } => 1,
            CliError::Validation => 1,
            CliError::Infeasible { .. } => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn load_problem(path: &Path) -> Result<(ProblemFile, KypProblem), CliError> {
    let text = read_file(path)?;
    let pf: ProblemFile = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: format!("parse error at line {} column {}: {e}", e.line(), e.column()),
    })?;
    let prob = pf
        .into_problem()
        .map_err(|e| CliError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
    Ok((pf, prob))
}

fn print_findings(report: &kyp::ValidationReport) {
    for f in &report.findings {
        let sev = match f.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        println!("{sev}[{}]: {}", f.code, f.message);
    }
}

/// `validate <file>`: load, validate, print findings; exit 0 iff clean.
pub fn cmd_validate(path: &Path) -> Result<(), CliError> {
    let (_, prob) = load_problem(path)?;
    let report = validate_problem(&prob, &Tolerances::default());
    print_findings(&report);
    if report.ok {
        println!(
            "ok: n = {}, m = {}, p = {}, r = {}",
            prob.n(),
            prob.m(),
            prob.p(),
            prob.r_dim()
        );
        Ok(())
    } else {
        Err(CliError::Validation)
    }
}

#[derive(Debug, Default, Clone)]
pub struct SolveFlags {
    pub t0: Option<f64>,
    pub t_max: Option<f64>,
    pub t_factor: Option<f64>,
    pub newton_tol: Option<f64>,
    pub out: Option<PathBuf>,
}

impl SolveFlags {
    fn config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::default();
        cfg.t0 = self.t0.or(cfg.t0);
        if let Some(t_max) = self.t_max {
            cfg.t_max = t_max;
        }
        if let Some(t_factor) = self.t_factor {
            cfg.t_factor = t_factor;
        }
        if let Some(tol) = self.newton_tol {
            cfg.newton_tol = tol;
        }
        cfg
    }
}

fn default_report_path(input: &Path) -> PathBuf {
    input.with_extension("report.json")
}

fn print_margins(prob: &KypProblem, lambda: &DVector<f64>, cfg: &SolverConfig) {
    match margins_at(prob, lambda, cfg) {
        Ok(m) => println!(
            "margins: N {:.3e}, -R {:.3e}, P_+ {:.3e}, gap {:.3e}",
            m.n_min_eig, m.neg_r_min_eig, m.p_plus_min_eig, m.delta_min_eig
        ),
        Err(e) => println!("margins unavailable: {e}"),
    }
}

/// `solve <file>`: run phase-I when the file gives no start point, then the
/// barrier solve; write the report file and print objective plus margins.
pub fn cmd_solve(path: &Path, flags: &SolveFlags) -> Result<(), CliError> {
    let (pf, prob) = load_problem(path)?;
    let validation = validate_problem(&prob, &Tolerances::default());
    if !validation.ok {
        print_findings(&validation);
        return Err(CliError::Validation);
    }
    let cfg = flags.config();
    if let Err(e) = cfg.validate() {
        return Err(CliError::Usage(e.to_string()));
    }

    let (start, phase1_lambda0) = match pf.initial_lambda_vec() {
        Some(v) => (v, None),
        None => match phase1(&prob, &cfg).map_err(|e| CliError::Numerical(e.to_string()))? {
            Phase1Outcome::Feasible { lambda, .. } => (lambda, None),
            Phase1Outcome::Infeasible { lambda0, report } => {
                println!("infeasible: best feasibility shift lambda_0 = {lambda0:.6e} >= 0");
                let mut rf = ReportFile::from_report(&report, &cfg, Some(lambda0));
                rf.status = "infeasible".to_string();
                let out = flags.out.clone().unwrap_or_else(|| default_report_path(path));
                write_file(&out, &to_pretty_json(&rf)?)?;
                return Err(CliError::Infeasible { lambda0 });
            }
        },
    };

    let report = solve(&prob, &start, &cfg);
    println!("status: {}", status_string(report.status));
    println!("objective: {:.12e}", report.objective);
    print_margins(&prob, &report.lambda_opt, &cfg);
    println!(
        "work: {} newton iterations, {} riccati solves, {} lyapunov solves, t_final {:.1e}",
        report.newton_iters_total, report.riccati_solves, report.lyapunov_solves, report.t_final
    );

    let rf = ReportFile::from_report(&report, &cfg, phase1_lambda0);
    let out = flags.out.clone().unwrap_or_else(|| default_report_path(path));
    write_file(&out, &to_pretty_json(&rf)?)?;
    println!("report written to {}", out.display());

    match report.status {
        SolveStatus::Optimal => Ok(()),
        SolveStatus::Infeasible => Err(CliError::Infeasible { lambda0: f64::NAN }),
        SolveStatus::MaxIters => {
            Err(CliError::Numerical("iteration budget exhausted before convergence".into()))
        }
        SolveStatus::DomainError => Err(CliError::Numerical(
            report.message.unwrap_or_else(|| "domain error".into()),
        )),
    }
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("serialization failed: {e}")))
}

/// Plant input file for `synth --plant`: the system matrix and the input
/// matrix of the nominal design model.
#[derive(serde::Deserialize)]
struct PlantInput {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B1")]
    b1: Vec<Vec<f64>>,
}

fn dense_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let nr = rows.len();
    let nc = rows.first().map(|r| r.len()).unwrap_or(0);
    if nr == 0 || nc == 0 {
        return Err(CliError::Usage(format!("{what} must be nonempty")));
    }
    if rows.iter().any(|r| r.len() != nc) {
        return Err(CliError::Usage(format!("{what} rows have inconsistent lengths")));
    }
    let mut out = DMatrix::zeros(nr, nc);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

pub struct SynthFlags {
    pub chain: Option<usize>,
    pub plant: Option<PathBuf>,
    pub gamma: f64,
    pub out_prefix: Option<String>,
    pub solve: SolveFlags,
}

/// `synth`: build the actuator-uncertainty instance for a chain or a plant
/// file, solve it, verify the result in the frequency domain and against
/// the dense LMI, and write both the problem file and the report.
pub fn cmd_synth(flags: &SynthFlags) -> Result<(), CliError> {
    let (a, b1) = match (&flags.chain, &flags.plant) {
        (Some(k), None) => {
            if *k == 0 {
                return Err(CliError::Usage("--chain requires k >= 1".into()));
            }
            generate_mass_spring_chain(*k)
        }
        (None, Some(path)) => {
            let text = read_file(path)?;
            let plant: PlantInput = serde_json::from_str(&text).map_err(|e| CliError::Parse {
                path: path.clone(),
                message: format!("parse error at line {} column {}: {e}", e.line(), e.column()),
            })?;
            let a = dense_from_rows(&plant.a, "A")?;
            let b1 = dense_from_rows(&plant.b1, "B1")?;
            if a.nrows() != a.ncols() || b1.nrows() != a.nrows() {
                return Err(CliError::Usage("plant matrices have inconsistent shapes".into()));
            }
            (a, b1)
        }
        _ => return Err(CliError::Usage("pass exactly one of --chain or --plant".into())),
    };
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN gamma must fail
    if !(flags.gamma > 0.0) {
        return Err(CliError::Usage("--gamma must be positive".into()));
    }

    let spec = build_actuator_uncertainty(a, b1, flags.gamma);
    let prob = assemble_kyp_sdp(&spec).map_err(|e| CliError::Numerical(e.to_string()))?;
    let validation = validate_problem(&prob, &Tolerances::default());
    if !validation.ok {
        print_findings(&validation);
        return Err(CliError::Validation);
    }

    let prefix = flags.out_prefix.clone().unwrap_or_else(|| "synth".to_string());
    let problem_path = PathBuf::from(format!("{prefix}.problem.json"));
    let report_path = PathBuf::from(format!("{prefix}.report.json"));
    let pf = ProblemFile::from_problem(&prob, None);
    write_file(&problem_path, &to_pretty_json(&pf)?)?;
    println!("problem written to {}", problem_path.display());

    let cfg = flags.solve.config();
    let start = match phase1(&prob, &cfg).map_err(|e| CliError::Numerical(e.to_string()))? {
        Phase1Outcome::Feasible { lambda, .. } => lambda,
        Phase1Outcome::Infeasible { lambda0, report } => {
            println!("infeasible: best feasibility shift lambda_0 = {lambda0:.6e} >= 0");
            let mut rf = ReportFile::from_report(&report, &cfg, Some(lambda0));
            rf.status = "infeasible".to_string();
            write_file(&report_path, &to_pretty_json(&rf)?)?;
            return Err(CliError::Infeasible { lambda0 });
        }
    };
    let report = solve(&prob, &start, &cfg);
    println!("status: {}", status_string(report.status));
    println!("objective (-trace P): {:.12e}", report.objective);
    print_margins(&prob, &report.lambda_opt, &cfg);

    let rf = ReportFile::from_report(&report, &cfg, None);
    write_file(&report_path, &to_pretty_json(&rf)?)?;
    println!("report written to {}", report_path.display());

    if report.status != SolveStatus::Optimal {
        return Err(CliError::Numerical(
            report.message.unwrap_or_else(|| "solve did not converge".into()),
        ));
    }

    // Verification pass: frequency sampling plus the dense LMI margin.
    let tol = Tolerances::default();
    let p_star = report
        .p_plus_opt
        .as_ref()
        .ok_or_else(|| CliError::Numerical("missing certificate".into()))?;
    let grid = log_omega_grid(200, 1e-3, 1e3);
    let freq = check_frequency_domain(&prob, &report.lambda_opt, &grid, &tol)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    println!(
        "frequency margin over {} samples (incl. the limit at infinity): {:.6e}",
        freq.evaluated, freq.margin
    );
    let lmi = check_kyp_lmi(&prob, &report.lambda_opt, p_star)
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    println!("dense LMI margin at the certificate: {:.6e}", lmi);
    let lmi_ok = lmi >= -tol.lmi_boundary_tol * (1.0 + p_star.norm());
    if freq.margin <= 0.0 || !lmi_ok {
        return Err(CliError::Numerical(format!(
            "verification failed: frequency margin {:.3e}, LMI margin {:.3e}",
            freq.margin, lmi
        )));
    }
    Ok(())
}
