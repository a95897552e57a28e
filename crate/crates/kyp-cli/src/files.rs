//! JSON problem and report file schemas.
//!
//! Matrices are row-major nested arrays; every float survives a round trip
//! because serialization uses the shortest representation that parses back
//! to the same bits. `schema_version` is "1".

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use kyp::barrier::{SolveReport, SolveStatus, SolverConfig};
use kyp::model::{AffineMatrixFamily, KypProblem};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyJson {
    pub base: Vec<Vec<f64>>,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

/// On-disk problem instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub schema_version: String,
    pub dims: Dims,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    #[serde(rename = "Sigma")]
    pub sigma: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: FamilyJson,
    #[serde(rename = "S")]
    pub s: FamilyJson,
    #[serde(rename = "R")]
    pub r: FamilyJson,
    #[serde(rename = "N")]
    pub n_fam: FamilyJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_lambda: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<BTreeMap<String, serde_json::Value>>,
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("unsupported schema_version {found:?}, expected {SCHEMA_VERSION:?}")]
    SchemaVersion { found: String },
    #[error("{location}: expected {expected}, found {found}")]
    Shape { location: String, expected: String, found: String },
    #[error("{0}")]
    Model(String),
}

fn to_matrix(rows: &[Vec<f64>], location: &str, nr: usize, nc: usize) -> Result<DMatrix<f64>, FileError> {
    let shape_err = |found: String| FileError::Shape {
        location: location.to_string(),
        expected: format!("{nr}x{nc} matrix"),
        found,
    };
    if rows.len() != nr {
        return Err(shape_err(format!("{} rows", rows.len())));
    }
    let mut out = DMatrix::zeros(nr, nc);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != nc {
            return Err(shape_err(format!("row {i} of length {}", row.len())));
        }
        for (j, v) in row.iter().enumerate() {
            out[(i, j)] = *v;
        }
    }
    Ok(out)
}

fn from_matrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_family(
    fam: &FamilyJson,
    location: &str,
    nr: usize,
    nc: usize,
    p: usize,
    symmetric: bool,
) -> Result<AffineMatrixFamily, FileError> {
    let base = to_matrix(&fam.base, &format!("{location}.base"), nr, nc)?;
    if fam.coeffs.len() != p {
        return Err(FileError::Shape {
            location: format!("{location}.coeffs"),
            expected: format!("{p} coefficient matrices"),
            found: format!("{}", fam.coeffs.len()),
        });
    }
    let mut coeffs = Vec::with_capacity(p);
    for (i, c) in fam.coeffs.iter().enumerate() {
        coeffs.push(to_matrix(c, &format!("{location}.coeffs[{i}]"), nr, nc)?);
    }
    AffineMatrixFamily::new(base, coeffs, symmetric).map_err(|e| FileError::Model(e.to_string()))
}

fn from_family(fam: &AffineMatrixFamily) -> FamilyJson {
    FamilyJson {
        base: from_matrix(fam.base()),
        coeffs: fam.coeffs().iter().map(from_matrix).collect(),
    }
}

impl ProblemFile {
    pub fn into_problem(&self) -> Result<KypProblem, FileError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(FileError::SchemaVersion { found: self.schema_version.clone() });
        }
        let Dims { n, m, p, r } = self.dims;
        let a = to_matrix(&self.a, "A", n, n)?;
        let b = to_matrix(&self.b, "B", n, m)?;
        if self.c.len() != p {
            return Err(FileError::Shape {
                location: "c".into(),
                expected: format!("length {p}"),
                found: format!("length {}", self.c.len()),
            });
        }
        let c = DVector::from_row_slice(&self.c);
        let sigma = to_matrix(&self.sigma, "Sigma", n, n)?;
        let q = to_family(&self.q, "Q", n, n, p, true)?;
        let s = to_family(&self.s, "S", n, m, p, false)?;
        let rf = to_family(&self.r, "R", m, m, p, true)?;
        let nf = to_family(&self.n_fam, "N", r, r, p, true)?;
        if let Some(init) = &self.initial_lambda {
            if init.len() != p {
                return Err(FileError::Shape {
                    location: "initial_lambda".into(),
                    expected: format!("length {p}"),
                    found: format!("length {}", init.len()),
                });
            }
        }
        KypProblem::new(a, b, c, sigma, q, s, rf, nf).map_err(|e| FileError::Model(e.to_string()))
    }

    pub fn from_problem(prob: &KypProblem, initial_lambda: Option<Vec<f64>>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.to_string(),
            dims: Dims { n: prob.n(), m: prob.m(), p: prob.p(), r: prob.r_dim() },
            a: from_matrix(&prob.a),
            b: from_matrix(&prob.b),
            c: prob.c.iter().copied().collect(),
            sigma: from_matrix(&prob.sigma),
            q: from_family(&prob.q_fam),
            s: from_family(&prob.s_fam),
            r: from_family(&prob.r_fam),
            n_fam: from_family(&prob.n_fam),
            initial_lambda,
            metadata: None,
        }
    }

    pub fn initial_lambda_vec(&self) -> Option<DVector<f64>> {
        self.initial_lambda.as_ref().map(|v| DVector::from_row_slice(v))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Counters {
    pub newton_iters: usize,
    pub riccati_solves: u64,
    pub lyapunov_solves: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageJson {
    pub t: f64,
    pub newton_iters: usize,
    pub final_decrement: f64,
    pub wall_secs: f64,
    pub converged: bool,
    pub noise_limited: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub t0: Option<f64>,
    pub t_max: f64,
    pub t_factor: f64,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub ls_backtrack: f64,
    pub ls_slope: f64,
    pub ls_max_steps: usize,
}

impl ConfigEcho {
    pub fn from_config(cfg: &SolverConfig) -> Self {
        Self {
            t0: cfg.t0,
            t_max: cfg.t_max,
            t_factor: cfg.t_factor,
            newton_tol: cfg.newton_tol,
            max_newton_iters: cfg.max_newton_iters,
            ls_backtrack: cfg.ls_backtrack,
            ls_slope: cfg.ls_slope,
            ls_max_steps: cfg.ls_max_steps,
        }
    }
}

/// On-disk solve report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub status: String,
    pub lambda_opt: Vec<f64>,
    pub objective: f64,
    #[serde(rename = "P_plus")]
    pub p_plus: Vec<Vec<f64>>,
    pub counters: Counters,
    pub t_final: f64,
    pub final_decrement: f64,
    pub gradient_fallbacks: usize,
    pub stages: Vec<StageJson>,
    pub config: ConfigEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase1_lambda0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

pub fn status_string(status: SolveStatus) -> &'static str {
    match status {
        SolveStatus::Optimal => "optimal",
        SolveStatus::Infeasible => "infeasible",
        SolveStatus::MaxIters => "max_iters",
        SolveStatus::DomainError => "domain_error",
    }
}

impl ReportFile {
    pub fn from_report(
        report: &SolveReport,
        cfg: &SolverConfig,
        phase1_lambda0: Option<f64>,
    ) -> Self {
        Self {
            status: status_string(report.status).to_string(),
            lambda_opt: report.lambda_opt.iter().copied().collect(),
            objective: report.objective,
            p_plus: report.p_plus_opt.as_ref().map(from_matrix).unwrap_or_default(),
            counters: Counters {
                newton_iters: report.newton_iters_total,
                riccati_solves: report.riccati_solves,
                lyapunov_solves: report.lyapunov_solves,
            },
            t_final: report.t_final,
            final_decrement: report.final_decrement,
            gradient_fallbacks: report.gradient_fallbacks,
            stages: report
                .stages
                .iter()
                .map(|s| StageJson {
                    t: s.t,
                    newton_iters: s.newton_iters,
                    final_decrement: s.final_decrement,
                    wall_secs: s.wall_secs,
                    converged: s.converged,
                    noise_limited: s.noise_limited,
                })
                .collect(),
            config: ConfigEcho::from_config(cfg),
            phase1_lambda0,
            message: report.message.clone(),
        }
    }

    pub fn p_plus_matrix(&self) -> Option<DMatrix<f64>> {
        if self.p_plus.is_empty() {
            return None;
        }
        let nr = self.p_plus.len();
        let nc = self.p_plus[0].len();
        to_matrix(&self.p_plus, "P_plus", nr, nc).ok()
    }
}
