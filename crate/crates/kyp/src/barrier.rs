//! Path-following barrier method over the multiplier vector.
//!
//! For an increasing sequence of weights t, the solver minimizes
//!
//! `v_t(l) = t(c'l - tr(Sigma P_+)) - log det N - log det P_+
//!           - log det(-R) - log det Delta`
//!
//! by damped Newton steps with a backtracking line search that doubles as a
//! domain safeguard: any step whose barrier evaluation fails is rejected.
//! Gradient and Hessian follow the closed-form trace expressions in the
//! multiplier coordinates; all inverses are taken through Cholesky
//! factorizations of matrices that are positive definite on the barrier
//! domain.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::calculus::{
    compute_pair, derivative_bundle, CalcError, DerivativeBundle, PairStrategy, RiccatiPair,
};
use crate::model::{symmetrize, AffineMatrixFamily, KypProblem, ModelError};
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum BarrierError {
    /// lambda lies outside the domain of the barrier (Riccati unsolvable or
    /// one of N, P_+, -R, Delta not positive definite).
    #[error("point outside the barrier domain")]
    OutOfDomain,
    #[error("line search failed after {0} backtracking steps")]
    LineSearchFailed(usize),
    #[error("invalid solver configuration: {0}")]
    BadConfig(String),
    #[error("phase-I initialization failed: {0}")]
    PhaseOneInit(String),
    #[error(transparent)]
    Calc(#[from] CalcError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Solver parameters. `t0 = None` picks the initial weight automatically as
/// `1 / (1 + |objective at the start point|)` so the first stage is
/// barrier-dominated.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub t0: Option<f64>,
    pub t_max: f64,
    pub t_factor: f64,
    /// Newton-decrement threshold ending each t-stage.
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub ls_backtrack: f64,
    pub ls_slope: f64,
    pub ls_max_steps: usize,
    pub strategy: PairStrategy,
    pub tol: Tolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            t0: None,
            t_max: 1e6,
            t_factor: 10.0,
            newton_tol: 1e-6,
            max_newton_iters: 80,
            ls_backtrack: 0.5,
            ls_slope: 0.01,
            ls_max_steps: 60,
            strategy: PairStrategy::default(),
            tol: Tolerances::default(),
        }
    }
}

impl SolverConfig {
    // The negated comparisons reject NaN inputs, which `x <= 0.0` would let
    // through.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), BarrierError> {
        let bad = |msg: &str| Err(BarrierError::BadConfig(msg.into()));
        if let Some(t0) = self.t0 {
            if !(t0 > 0.0) {
                return bad("t0 must be positive");
            }
            if t0 > self.t_max {
                return bad("t0 must not exceed t_max");
            }
        }
        if !(self.t_max > 0.0) {
            return bad("t_max must be positive");
        }
        if !(self.t_factor > 1.0) {
            return bad("t_factor must exceed 1");
        }
        if !(self.ls_backtrack > 0.0 && self.ls_backtrack < 1.0) {
            return bad("ls_backtrack must lie in (0, 1)");
        }
        if !(self.ls_slope > 0.0 && self.ls_slope < 0.5) {
            return bad("ls_slope must lie in (0, 0.5)");
        }
        if !(self.newton_tol > 0.0) {
            return bad("newton_tol must be positive");
        }
        Ok(())
    }
}

/// Everything known about the current iterate at one (lambda, t).
#[derive(Debug, Clone)]
pub struct IterateState {
    pub lambda: DVector<f64>,
    pub t: f64,
    pub pair: RiccatiPair,
    pub bundle: DerivativeBundle,
    pub v: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
    pub newton_decrement: f64,
}

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIters,
    DomainError,
}

/// Per-stage trace: accepted barrier values, work and convergence.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub t: f64,
    pub newton_iters: usize,
    pub final_decrement: f64,
    /// Barrier values at the stage's accepted iterates (first entry is the
    /// value on entering the stage).
    pub v_values: Vec<f64>,
    pub wall_secs: f64,
    pub converged: bool,
    /// The stage ended at the floating-point resolution of the barrier
    /// value rather than at the requested decrement.
    pub noise_limited: bool,
}

/// Solve outcome with full instrumentation.
///
/// `riccati_solves` counts Hamiltonian-Schur Riccati solves (one per barrier
/// evaluation under the one-solve gap strategy, two under the two-solve
/// strategy); `lyapunov_solves` counts Bartels–Stewart back-substitutions
/// (one gap equation per barrier evaluation plus p(p+3) per derivative
/// bundle).
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub lambda_opt: DVector<f64>,
    pub p_plus_opt: Option<DMatrix<f64>>,
    /// `c'lambda - tr(Sigma P_+)` at the returned point.
    pub objective: f64,
    pub newton_iters_total: usize,
    pub riccati_solves: u64,
    pub lyapunov_solves: u64,
    pub t_final: f64,
    pub final_decrement: f64,
    /// Newton systems that fell back to a gradient step.
    pub gradient_fallbacks: usize,
    pub stages: Vec<StageRecord>,
    pub message: Option<String>,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN diagonal must fail
fn log_det_pd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    let l = chol.l();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `c'lambda - tr(Sigma P_+)` for a computed pair.
pub fn objective_value(prob: &KypProblem, pair: &RiccatiPair) -> f64 {
    prob.c.dot(&pair.lambda) - trace_of_product(&prob.sigma, &pair.p_plus)
}

/// Barrier value from an already-computed pair; fails with `OutOfDomain`
/// when any of N, P_+, -R, Delta is not positive definite.
pub fn barrier_value_from_pair(
    prob: &KypProblem,
    pair: &RiccatiPair,
    t: f64,
) -> Result<f64, BarrierError> {
    let ld_n = log_det_pd(&pair.n).ok_or(BarrierError::OutOfDomain)?;
    let ld_p = log_det_pd(&pair.p_plus).ok_or(BarrierError::OutOfDomain)?;
    let ld_r = log_det_pd(&(-&pair.r)).ok_or(BarrierError::OutOfDomain)?;
    let ld_d = log_det_pd(&pair.delta).ok_or(BarrierError::OutOfDomain)?;
    Ok(t * objective_value(prob, pair) - ld_n - ld_p - ld_r - ld_d)
}

/// Evaluate the barrier at `lambda`, computing the Riccati pair on the way.
pub fn evaluate_barrier(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    t: f64,
    cfg: &SolverConfig,
) -> Result<(f64, RiccatiPair), BarrierError> {
    let pair = compute_pair(prob, lambda, cfg.strategy, &cfg.tol).map_err(|e| {
        if e.is_out_of_domain() {
            BarrierError::OutOfDomain
        } else {
            BarrierError::Calc(e)
        }
    })?;
    let v = barrier_value_from_pair(prob, &pair, t)?;
    Ok((v, pair))
}

/// Cholesky inverses of the four positive definite barrier arguments.
struct BarrierFactors {
    p_inv: DMatrix<f64>,
    delta_inv: DMatrix<f64>,
    /// `(-R)^{-1}`; note `R^{-1} = -(-R)^{-1}`.
    negr_inv: DMatrix<f64>,
    n_inv: DMatrix<f64>,
}

impl BarrierFactors {
    fn new(pair: &RiccatiPair) -> Result<Self, BarrierError> {
        let inv = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, BarrierError> {
            let chol = m.clone().cholesky().ok_or(BarrierError::OutOfDomain)?;
            let mut out = chol.inverse();
            symmetrize(&mut out);
            Ok(out)
        };
        Ok(Self {
            p_inv: inv(&pair.p_plus)?,
            delta_inv: inv(&pair.delta)?,
            negr_inv: inv(&(-&pair.r))?,
            n_inv: inv(&pair.n)?,
        })
    }
}

fn gradient_with(
    prob: &KypProblem,
    bundle: &DerivativeBundle,
    factors: &BarrierFactors,
    t: f64,
) -> DVector<f64> {
    let p = prob.p();
    DVector::from_fn(p, |i, _| {
        let d_delta = trace_of_product(&factors.delta_inv, &bundle.ddelta[i]);
        let d_obj = prob.c[i] - trace_of_product(&prob.sigma, &bundle.dp_plus[i]);
        let d_p = trace_of_product(&factors.p_inv, &bundle.dp_plus[i]);
        // tr(R^{-1} R_i) = -tr((-R)^{-1} R_i)
        let d_r = -trace_of_product(&factors.negr_inv, prob.r_fam.coeff(i));
        let d_n = trace_of_product(&factors.n_inv, prob.n_fam.coeff(i));
        -d_delta + t * d_obj - d_p - d_r - d_n
    })
}

/// Gradient of the barrier at a consistent (pair, bundle).
pub fn gradient(
    prob: &KypProblem,
    pair: &RiccatiPair,
    bundle: &DerivativeBundle,
    t: f64,
) -> Result<DVector<f64>, BarrierError> {
    let factors = BarrierFactors::new(pair)?;
    Ok(gradient_with(prob, bundle, &factors, t))
}

fn hessian_with(
    prob: &KypProblem,
    bundle: &DerivativeBundle,
    factors: &BarrierFactors,
    t: f64,
) -> DMatrix<f64> {
    let p = prob.p();
    // Inverse-weighted derivative products, one per coordinate.
    let w_p: Vec<DMatrix<f64>> = (0..p).map(|i| &factors.p_inv * &bundle.dp_plus[i]).collect();
    let w_d: Vec<DMatrix<f64>> = (0..p).map(|i| &factors.delta_inv * &bundle.ddelta[i]).collect();
    let w_r: Vec<DMatrix<f64>> =
        (0..p).map(|i| &factors.negr_inv * prob.r_fam.coeff(i)).collect();
    let w_n: Vec<DMatrix<f64>> = (0..p).map(|i| &factors.n_inv * prob.n_fam.coeff(i)).collect();

    let mut h = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let quad_p = trace_of_product(&w_p[i], &w_p[j]);
            let second_p = trace_of_product(&factors.p_inv, bundle.d2p_plus.get(i, j));
            let quad_r = trace_of_product(&w_r[i], &w_r[j]);
            let quad_n = trace_of_product(&w_n[i], &w_n[j]);
            let quad_d = trace_of_product(&w_d[i], &w_d[j]);
            let second_d = trace_of_product(&factors.delta_inv, bundle.d2delta.get(i, j));
            let second_obj = trace_of_product(&prob.sigma, bundle.d2p_plus.get(i, j));
            let val = 2.0 * quad_p - second_p
                + 2.0 * quad_r
                + 2.0 * quad_n
                + 2.0 * quad_d
                - second_d
                - t * second_obj;
            h[(i, j)] = val;
            h[(j, i)] = val;
        }
    }
    symmetrize(&mut h);
    h
}

/// Barrier Hessian in the multiplier coordinates: the five-term trace
/// formula of the path-following scheme, with the doubled quadratic log-det
/// terms. As a positive semidefinite upper bound of the exact Hessian it
/// keeps damped Newton steps well defined on the whole domain.
pub fn hessian(
    prob: &KypProblem,
    pair: &RiccatiPair,
    bundle: &DerivativeBundle,
    t: f64,
) -> Result<DMatrix<f64>, BarrierError> {
    let factors = BarrierFactors::new(pair)?;
    Ok(hessian_with(prob, bundle, &factors, t))
}

/// Newton direction and decrement at a prepared iterate.
#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub direction: DVector<f64>,
    pub decrement: f64,
    /// True when the Hessian solve fell back to a plain gradient step.
    pub used_gradient_fallback: bool,
}

/// Solve `H d = -grad` through a (regularized) Cholesky factorization; on
/// persistent failure fall back to the flagged gradient step `d = -grad`.
/// The decrement is `sqrt(-grad'd)` whenever `grad'd < 0`.
pub fn newton_step(state: &IterateState) -> NewtonStep {
    newton_step_parts(&state.grad, &state.hess)
}

fn newton_step_parts(grad: &DVector<f64>, hess: &DMatrix<f64>) -> NewtonStep {
    let p = grad.len();
    let hnorm = hess.norm();
    if grad.norm() == 0.0 {
        return NewtonStep {
            direction: DVector::zeros(p),
            decrement: 0.0,
            used_gradient_fallback: false,
        };
    }
    let mut shift = 0.0f64;
    for attempt in 0..8 {
        let mut h = hess.clone();
        if shift > 0.0 {
            for i in 0..p {
                h[(i, i)] += shift;
            }
        }
        if let Some(chol) = h.cholesky() {
            let direction = -chol.solve(grad);
            let slope = grad.dot(&direction);
            if slope < 0.0 {
                return NewtonStep {
                    direction,
                    decrement: (-slope).sqrt(),
                    used_gradient_fallback: false,
                };
            }
        }
        shift = if attempt == 0 { 1e-12 * (1.0 + hnorm) } else { shift * 100.0 };
    }
    let direction = -grad.clone();
    let decrement = grad.norm();
    NewtonStep { direction, decrement, used_gradient_fallback: true }
}

/// Accepted line-search step.
#[derive(Debug)]
pub struct LineSearchStep {
    pub alpha: f64,
    pub value: f64,
    pub pair: RiccatiPair,
    /// Barrier evaluations spent (feeds the solve counters).
    pub probes: u64,
}

/// Backtracking line search from alpha = 1 with a domain safeguard: steps
/// whose barrier evaluation fails (for any reason) are rejected, then the
/// Armijo condition `v(l + a d) <= v(l) + ls_slope * a * grad'd` decides.
pub fn line_search(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    d: &DVector<f64>,
    t: f64,
    v_current: f64,
    slope: f64,
    cfg: &SolverConfig,
) -> Result<LineSearchStep, BarrierError> {
    let mut alpha = 1.0;
    let mut probes = 0u64;
    #[allow(clippy::explicit_counter_loop)] // probes counts u64 evaluations
    for _ in 0..cfg.ls_max_steps {
        let candidate = lambda + d * alpha;
        probes += 1;
        if let Ok((v_new, pair)) = evaluate_barrier(prob, &candidate, t, cfg) {
            if v_new <= v_current + cfg.ls_slope * alpha * slope {
                return Ok(LineSearchStep { alpha, value: v_new, pair, probes });
            }
        }
        alpha *= cfg.ls_backtrack;
    }
    Err(BarrierError::LineSearchFailed(cfg.ls_max_steps))
}

struct Counters {
    riccati: u64,
    lyapunov: u64,
}

impl Counters {
    fn barrier_evals(&mut self, cfg: &SolverConfig, count: u64) {
        match cfg.strategy {
            PairStrategy::TwoSolves => self.riccati += 2 * count,
            PairStrategy::LyapunovShortcut => {
                self.riccati += count;
                self.lyapunov += count;
            }
        }
    }

    fn bundle(&mut self, p: u64) {
        self.lyapunov += p * (p + 3);
    }
}

/// Build the full iterate state at (lambda, t): pair, derivative bundle,
/// value, gradient, Hessian and Newton decrement.
pub fn prepare_iterate(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    t: f64,
    cfg: &SolverConfig,
) -> Result<IterateState, BarrierError> {
    let (v, pair) = evaluate_barrier(prob, lambda, t, cfg)?;
    let bundle = derivative_bundle(prob, &pair, &cfg.tol)?;
    let factors = BarrierFactors::new(&pair)?;
    let grad = gradient_with(prob, &bundle, &factors, t);
    let hess = hessian_with(prob, &bundle, &factors, t);
    let step = newton_step_parts(&grad, &hess);
    Ok(IterateState {
        lambda: lambda.clone(),
        t,
        pair,
        bundle,
        v,
        grad,
        hess,
        newton_decrement: step.decrement,
    })
}

/// Minimize the barrier along the path of increasing t from a strictly
/// feasible start. Infeasible or malformed input never panics; it yields a
/// report with `DomainError` status.
pub fn solve(prob: &KypProblem, lambda0: &DVector<f64>, cfg: &SolverConfig) -> SolveReport {
    solve_with_stop(prob, lambda0, cfg, |_| false).0
}

/// As [`solve`], additionally invoking `stop` after every accepted Newton
/// step; a `true` return ends the solve early at the current iterate.
/// Returns the report and whether the stop callback fired.
pub fn solve_with_stop(
    prob: &KypProblem,
    lambda0: &DVector<f64>,
    cfg: &SolverConfig,
    mut stop: impl FnMut(&DVector<f64>) -> bool,
) -> (SolveReport, bool) {
    let mut counters = Counters { riccati: 0, lyapunov: 0 };
    let fail = |msg: String, lambda: DVector<f64>, counters: &Counters| SolveReport {
        status: SolveStatus::DomainError,
        lambda_opt: lambda,
        p_plus_opt: None,
        objective: f64::NAN,
        newton_iters_total: 0,
        riccati_solves: counters.riccati,
        lyapunov_solves: counters.lyapunov,
        t_final: 0.0,
        final_decrement: f64::NAN,
        gradient_fallbacks: 0,
        stages: Vec::new(),
        message: Some(msg),
    };

    if let Err(e) = cfg.validate() {
        return (fail(e.to_string(), lambda0.clone(), &counters), false);
    }
    if lambda0.len() != prob.p() {
        return (
            fail(
                format!("start point has length {}, expected p = {}", lambda0.len(), prob.p()),
                lambda0.clone(),
                &counters,
            ),
            false,
        );
    }

    // Initial feasibility check; the pair also sets the automatic t0.
    counters.barrier_evals(cfg, 1);
    let (_, pair0) = match evaluate_barrier(prob, lambda0, 1.0, cfg) {
        Ok(vp) => vp,
        Err(e) => {
            return (
                fail(format!("infeasible start point: {e}"), lambda0.clone(), &counters),
                false,
            )
        }
    };
    let mut t = cfg
        .t0
        .unwrap_or_else(|| 1.0 / (1.0 + objective_value(prob, &pair0).abs()))
        .min(cfg.t_max);

    let mut lambda = lambda0.clone();
    let mut current_pair = pair0;
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut newton_iters_total = 0usize;
    let mut gradient_fallbacks = 0usize;
    let mut stopped_early = false;
    let mut last_decrement = f64::NAN;
    let mut failure: Option<String> = None;

    'outer: loop {
        let stage_start = Instant::now();
        let mut v = match barrier_value_from_pair(prob, &current_pair, t) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(format!("barrier evaluation failed at stage start: {e}"));
                break 'outer;
            }
        };
        let mut v_values = vec![v];
        let mut iters = 0usize;
        let mut converged = false;
        let mut noise_limited = false;
        let mut stall_count = 0usize;
        let mut stage_decrement = f64::NAN;

        loop {
            counters.bundle(prob.p() as u64);
            let bundle = match derivative_bundle(prob, &current_pair, &cfg.tol) {
                Ok(b) => b,
                Err(e) => {
                    failure = Some(format!("derivative bundle failed: {e}"));
                    break;
                }
            };
            let factors = match BarrierFactors::new(&current_pair) {
                Ok(f) => f,
                Err(e) => {
                    failure = Some(format!("barrier factorization failed: {e}"));
                    break;
                }
            };
            let grad = gradient_with(prob, &bundle, &factors, t);
            let hess = hessian_with(prob, &bundle, &factors, t);
            let step = newton_step_parts(&grad, &hess);
            if step.used_gradient_fallback {
                gradient_fallbacks += 1;
            }
            stage_decrement = step.decrement;
            last_decrement = step.decrement;

            // A decrement below sqrt(eps * |v|) predicts a decrease smaller
            // than the resolution of v itself; the stage cannot make
            // certifiable progress past that floor.
            let noise_floor = (32.0 * f64::EPSILON * (1.0 + v.abs())).sqrt();
            if step.decrement <= cfg.newton_tol.max(noise_floor) {
                converged = true;
                noise_limited = step.decrement > cfg.newton_tol;
                break;
            }
            if iters >= cfg.max_newton_iters {
                break;
            }

            let slope = grad.dot(&step.direction);
            let ls = match line_search(prob, &lambda, &step.direction, t, v, slope, cfg) {
                Ok(ls) => ls,
                Err(e) => {
                    failure = Some(format!("at t = {t:.3e}: {e}"));
                    break;
                }
            };
            counters.barrier_evals(cfg, ls.probes);
            lambda += &step.direction * ls.alpha;
            let improvement = v - ls.value;
            v = ls.value;
            current_pair = ls.pair;
            v_values.push(v);
            iters += 1;
            newton_iters_total += 1;

            if stop(&lambda) {
                stopped_early = true;
                converged = true;
                break;
            }

            // Stall exit: repeated accepted steps with sub-roundoff
            // improvement mean the stage is done to working precision.
            if improvement <= 4.0 * f64::EPSILON * (1.0 + v.abs()) {
                stall_count += 1;
                if stall_count >= 3 {
                    converged = true;
                    noise_limited = true;
                    break;
                }
            } else {
                stall_count = 0;
            }
        }

        stages.push(StageRecord {
            t,
            newton_iters: iters,
            final_decrement: stage_decrement,
            v_values,
            wall_secs: stage_start.elapsed().as_secs_f64(),
            converged,
            noise_limited,
        });

        if failure.is_some() || stopped_early {
            break;
        }
        if t >= cfg.t_max {
            break;
        }
        let t_next = t * cfg.t_factor;
        t = if t_next > cfg.t_max { cfg.t_max } else { t_next };
    }

    let status = if failure.is_some() {
        SolveStatus::DomainError
    } else if stages.last().map(|s| s.converged).unwrap_or(false) {
        SolveStatus::Optimal
    } else {
        SolveStatus::MaxIters
    };
    let objective = objective_value(prob, &current_pair);
    let report = SolveReport {
        status,
        lambda_opt: lambda,
        p_plus_opt: Some(current_pair.p_plus.clone()),
        objective,
        newton_iters_total,
        riccati_solves: counters.riccati,
        lyapunov_solves: counters.lyapunov,
        t_final: t,
        final_decrement: last_decrement,
        gradient_fallbacks,
        stages,
        message: failure,
    };
    (report, stopped_early)
}

/// Strict-feasibility margins of the four barrier arguments at one point.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilityMargins {
    pub n_min_eig: f64,
    pub neg_r_min_eig: f64,
    pub p_plus_min_eig: f64,
    pub delta_min_eig: f64,
}

impl FeasibilityMargins {
    pub fn all_positive(&self) -> bool {
        self.n_min_eig > 0.0
            && self.neg_r_min_eig > 0.0
            && self.p_plus_min_eig > 0.0
            && self.delta_min_eig > 0.0
    }
}

/// Compute feasibility margins at `lambda`, or `OutOfDomain` when the
/// Riccati pair does not exist there.
pub fn margins_at(
    prob: &KypProblem,
    lambda: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<FeasibilityMargins, BarrierError> {
    let pair = compute_pair(prob, lambda, cfg.strategy, &cfg.tol).map_err(|e| {
        if e.is_out_of_domain() {
            BarrierError::OutOfDomain
        } else {
            BarrierError::Calc(e)
        }
    })?;
    Ok(FeasibilityMargins {
        n_min_eig: crate::model::min_eig_sym(&pair.n),
        neg_r_min_eig: crate::model::min_eig_sym(&(-&pair.r)),
        p_plus_min_eig: crate::model::min_eig_sym(&pair.p_plus),
        delta_min_eig: crate::model::min_eig_sym(&pair.delta),
    })
}

/// Augmented instance for phase-I: one extra leading multiplier l_0 shifts
/// the families to `Q - l_0 I`, `R - l_0 I`, `N + l_0 I` and the objective
/// becomes l_0 alone (c = e_1, Sigma = 0). For l_0 large enough the shifted
/// instance is strictly feasible, and any iterate with l_0 < 0 is strictly
/// feasible for the original data.
pub fn augment_for_feasibility(prob: &KypProblem) -> KypProblem {
    let (n, m, p, r) = (prob.n(), prob.m(), prob.p(), prob.r_dim());
    let with_extra = |fam: &AffineMatrixFamily, extra: DMatrix<f64>| {
        let mut coeffs = Vec::with_capacity(p + 1);
        coeffs.push(extra);
        coeffs.extend(fam.coeffs().iter().cloned());
        AffineMatrixFamily::new(fam.base().clone(), coeffs, fam.is_symmetric())
            .expect("augmented family dimensions are consistent")
    };
    let q_fam = with_extra(&prob.q_fam, -DMatrix::identity(n, n));
    let s_fam = with_extra(&prob.s_fam, DMatrix::zeros(n, m));
    let r_fam = with_extra(&prob.r_fam, -DMatrix::identity(m, m));
    let n_fam = with_extra(&prob.n_fam, DMatrix::identity(r, r));
    let mut c = DVector::zeros(p + 1);
    c[0] = 1.0;
    KypProblem::new(
        prob.a.clone(),
        prob.b.clone(),
        c,
        DMatrix::zeros(n, n),
        q_fam,
        s_fam,
        r_fam,
        n_fam,
    )
    .expect("augmented problem dimensions are consistent")
}

/// Phase-I outcome: either a strictly feasible start for the original
/// problem or an infeasibility certificate (the minimized shift stayed
/// nonnegative).
#[derive(Debug)]
pub enum Phase1Outcome {
    Feasible { lambda: DVector<f64>, margins: FeasibilityMargins, report: SolveReport },
    Infeasible { lambda0: f64, report: SolveReport },
}

/// Find a strictly feasible point by minimizing the feasibility shift l_0
/// over the augmented instance, stopping as soon as an iterate with
/// l_0 < 0 yields positive margins for the original problem.
pub fn phase1(prob: &KypProblem, cfg: &SolverConfig) -> Result<Phase1Outcome, BarrierError> {
    cfg.validate()?;
    let aug = augment_for_feasibility(prob);
    let p = prob.p();
    let origin = DVector::zeros(p);

    let r0 = prob.r_fam.evaluate(&origin)?;
    let n0 = prob.n_fam.evaluate(&origin)?;
    let mut shift = 2.0
        * f64::max(
            1.0,
            f64::max(crate::model::max_eig_sym(&r0), -crate::model::min_eig_sym(&n0)),
        );

    // Double the shift until the augmented barrier accepts the start point.
    let mut start = DVector::zeros(p + 1);
    let mut ok = false;
    for _ in 0..60 {
        start[0] = shift;
        if evaluate_barrier(&aug, &start, 1.0, cfg).is_ok() {
            ok = true;
            break;
        }
        shift *= 2.0;
    }
    if !ok {
        return Err(BarrierError::PhaseOneInit(
            "no feasible shift found while doubling up to 2^60".into(),
        ));
    }

    let (report, _stopped) = solve_with_stop(&aug, &start, cfg, |lam| {
        if lam[0] >= 0.0 {
            return false;
        }
        let inner = lam.rows(1, p).into_owned();
        margins_at(prob, &inner, cfg).map(|m| m.all_positive()).unwrap_or(false)
    });

    let lambda0 = report.lambda_opt[0];
    let inner = report.lambda_opt.rows(1, p).into_owned();
    if lambda0 < 0.0 {
        if let Ok(margins) = margins_at(prob, &inner, cfg) {
            if margins.all_positive() {
                return Ok(Phase1Outcome::Feasible { lambda: inner, margins, report });
            }
        }
    }
    Ok(Phase1Outcome::Infeasible { lambda0: lambda0.max(0.0), report })
}
