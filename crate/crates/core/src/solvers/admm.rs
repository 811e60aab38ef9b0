//! ADMM updates for the A-step and both B-step variants, and the cyclic
//! descent drivers built from them.
//!
//! Both drivers alternate `inner_a` A-step updates (with `E = D B` held
//! fixed) and `inner_b` B-step updates (with `A` held fixed). Splits and
//! duals are set once before the first outer iteration and carried over
//! between outer iterations.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::matrix::{EndmemberMatrix, LibraryMatrix, Matrix, ObservationMatrix};
use crate::model::{residual_objective, ModelDims};
use crate::quec::{quec_solve_into, QuecFactors};

use super::init::{one_hot_mixing, select_atoms};
use super::params::{AdmmParams, Initialization, Method, EARLY_STOP_WINDOW};
use super::state::{project_feasible, Diagnostics, Residuals, SolverState, UnmixResult};

/// `sign(x) * max(|x| - tau, 0)`
#[inline]
pub fn soft_threshold(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

#[inline]
pub fn clip_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// B-step operator that stays fixed for a whole run because `D` and the
/// penalties do.
#[derive(Debug, Clone)]
pub(crate) enum BStepOperator {
    /// QuEC factors of `D^T D + (mu_b1 / mu_b2) I`.
    Fasun(QuecFactors),
    /// Cholesky factor of `mu_b1 I + mu_b2 D^T D`.
    Suns(Cholesky),
}

impl BStepOperator {
    pub(crate) fn fasun(d: &Matrix, params: &AdmmParams) -> Result<Self> {
        QuecFactors::from_gram(&d.gram(), params.mu_b1 / params.mu_b2).map(Self::Fasun)
    }

    pub(crate) fn suns(d: &Matrix, params: &AdmmParams) -> Result<Self> {
        let mut gamma_inv = d.gram().scale(params.mu_b2);
        gamma_inv.add_diagonal(params.mu_b1);
        Cholesky::factor(&gamma_inv).map(Self::Suns)
    }
}

/// `iters` rounds of `A <- QuEC`, `S <- max(0, A + L)`, `L <- L + A - S`.
fn abundance_updates(
    a: &mut Matrix,
    s: &mut Matrix,
    l: &mut Matrix,
    factors: &QuecFactors,
    ety: &Matrix,
    mu: f64,
    iters: usize,
) {
    let mut rhs = ety.clone();
    for _ in 0..iters {
        for (((r, &e), &sv), &lv) in rhs
            .as_mut_slice()
            .iter_mut()
            .zip(ety.as_slice())
            .zip(s.as_slice())
            .zip(l.as_slice())
        {
            *r = e + mu * (sv - lv);
        }
        quec_solve_into(factors, &rhs, a);
        for ((sv, lv), &av) in s.as_mut_slice().iter_mut().zip(l.as_mut_slice()).zip(a.as_slice()) {
            let next = (av + *lv).max(0.0);
            *sv = next;
            *lv += av - next;
        }
    }
}

pub(crate) fn a_step_inner(state: &mut SolverState, y: &Matrix, d: &Matrix, mu_a: f64, iters: usize) -> Result<()> {
    let e = d.matmul(&state.b);
    let factors = QuecFactors::from_gram(&e.gram(), mu_a)?;
    let ety = e.t_matmul(y);
    abundance_updates(&mut state.a, &mut state.s, &mut state.l, &factors, &ety, mu_a, iters);
    state.residuals.a_split = state.a.sub(&state.s).frobenius_norm();
    Ok(())
}

/// `X = R M^{-1}` for symmetric positive definite `M`, one row at a time.
fn solve_right(chol: &Cholesky, rhs: &Matrix) -> Matrix {
    let r = chol.dim();
    let mut out = Matrix::zeros(rhs.rows(), r);
    let mut row = vec![0.0; r];
    for i in 0..rhs.rows() {
        for (k, v) in row.iter_mut().enumerate() {
            *v = rhs[(i, k)];
        }
        chol.solve_in_place(&mut row);
        for (k, &v) in row.iter().enumerate() {
            out[(i, k)] = v;
        }
    }
    out
}

pub(crate) fn b_step_inner(
    state: &mut SolverState,
    y: &Matrix,
    d: &Matrix,
    op: &BStepOperator,
    params: &AdmmParams,
    iters: usize,
) -> Result<()> {
    let mu1 = params.mu_b1;
    let mu2 = params.mu_b2;
    // A is fixed for the whole B-step.
    let ya = y.matmul_t(&state.a);
    let mut aat = state.a.matmul_t(&state.a);
    aat.add_diagonal(mu2);
    let s2_system = Cholesky::factor(&aat)?;

    let mut db = d.matmul(&state.b);
    for _ in 0..iters {
        let split2 = state.s2.sub(&state.l2);
        let split1 = state.s1.sub(&state.l1);
        match op {
            BStepOperator::Fasun(factors) => {
                // Dividing the B-subproblem by mu2 turns it into QuEC with
                // data S2 - L2, dictionary D and penalty mu1 / mu2.
                let mut rhs = d.t_matmul(&split2);
                rhs.axpy(mu1 / mu2, &split1);
                quec_solve_into(factors, &rhs, &mut state.b);
                state.s1 = state.b.add(&state.l1).map(|v| v.max(0.0));
            }
            BStepOperator::Suns(gamma) => {
                let mut rhs = d.t_matmul(&split2).scale(mu2);
                rhs.axpy(mu1, &split1);
                state.b = gamma.solve(&rhs);
                let tau = params.lambda / mu1;
                state.s1 = state.b.add(&state.l1).map(|v| clip_unit(soft_threshold(v, tau)));
            }
        }
        db = d.matmul(&state.b);
        let mut s2_rhs = db.add(&state.l2);
        s2_rhs = s2_rhs.scale(mu2);
        s2_rhs.axpy(1.0, &ya);
        state.s2 = solve_right(&s2_system, &s2_rhs);
        state.l1.axpy(1.0, &state.b);
        state.l1.axpy(-1.0, &state.s1);
        state.l2.axpy(1.0, &db);
        state.l2.axpy(-1.0, &state.s2);
    }
    state.residuals.b_split = state.b.sub(&state.s1).frobenius_norm();
    state.residuals.db_split = db.sub(&state.s2).frobenius_norm();
    Ok(())
}

fn check_step_inputs(state: &SolverState, y: &Matrix, d: &Matrix, iters: usize) -> Result<()> {
    if iters == 0 {
        return Err(Error::param("iterations", "iteration counts must be at least 1"));
    }
    if d.rows() != y.rows() {
        return Err(Error::dims(
            "library rows vs observation bands",
            (y.rows(), d.cols()),
            d.shape(),
        ));
    }
    let dims = ModelDims {
        p: y.rows(),
        n: y.cols(),
        m: d.cols(),
        r: state.a.rows(),
    };
    state.check(dims)
}

/// Runs `iters` A-step updates with `E = D B` fixed. Touches `A`, `S`, `L`
/// and the A-split residual only.
pub fn a_step(
    state: &mut SolverState,
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    params: &AdmmParams,
    iters: usize,
) -> Result<()> {
    check_step_inputs(state, y, d, iters)?;
    params.validate()?;
    a_step_inner(state, y, d, params.mu_a, iters)
}

/// Runs `iters` FaSUn B-step updates with `A` fixed. Touches `B`, `S1`,
/// `S2`, `L1`, `L2` and the B-split residuals only.
pub fn b_step_fasun(
    state: &mut SolverState,
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    params: &AdmmParams,
    iters: usize,
) -> Result<()> {
    check_step_inputs(state, y, d, iters)?;
    params.validate()?;
    let op = BStepOperator::fasun(d, params)?;
    b_step_inner(state, y, d, &op, params, iters)
}

/// SUnS counterpart of [`b_step_fasun`].
pub fn b_step_suns(
    state: &mut SolverState,
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    params: &AdmmParams,
    iters: usize,
) -> Result<()> {
    check_step_inputs(state, y, d, iters)?;
    params.validate()?;
    let op = BStepOperator::suns(d, params)?;
    b_step_inner(state, y, d, &op, params, iters)
}

/// Solves the fully constrained least squares problem for known endmembers
/// `E` with `iters` ADMM iterations from `S = L = 0`.
pub fn fclsu_admm(
    y: &ObservationMatrix,
    e: &EndmemberMatrix,
    params: &AdmmParams,
    iters: usize,
) -> Result<UnmixResult> {
    if !(params.mu_a > 0.0) || !params.mu_a.is_finite() {
        return Err(Error::param(
            "mu_a",
            format!("must be positive and finite, got {}", params.mu_a),
        ));
    }
    if iters == 0 {
        return Err(Error::param("iterations", "iteration counts must be at least 1"));
    }
    if e.rows() != y.rows() {
        return Err(Error::dims(
            "endmember rows vs observation bands",
            (y.rows(), e.cols()),
            e.shape(),
        ));
    }
    if e.cols() == 0 || y.cols() == 0 {
        return Err(Error::Empty("endmembers or observations"));
    }
    let start = Instant::now();
    let (r, n) = (e.cols(), y.cols());
    let factors = QuecFactors::from_gram(&e.gram(), params.mu_a)?;
    let ety = e.t_matmul(y);
    let mut a = Matrix::zeros(r, n);
    let mut s = Matrix::zeros(r, n);
    let mut l = Matrix::zeros(r, n);
    let mut history = Vec::with_capacity(iters);
    for it in 0..iters {
        abundance_updates(&mut a, &mut s, &mut l, &factors, &ety, params.mu_a, 1);
        if !a.is_finite() || !l.is_finite() {
            return Err(Error::Diverged {
                what: "A",
                iteration: it + 1,
            });
        }
        history.push(residual_objective(y, e, &a));
    }
    let residuals = Residuals {
        a_split: a.sub(&s).frobenius_norm(),
        ..Residuals::default()
    };
    Ok(UnmixResult {
        a_feasible: project_feasible(&a),
        a_raw: a,
        b_hat: None,
        e_hat: e.clone(),
        diagnostics: Diagnostics {
            objective_history: history,
            residuals,
            outer_iterations: iters,
            stopped_early: false,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
    })
}

/// Convex-combination unmixing: `B >= 0` with columns summing to one.
pub fn fasun(y: &ObservationMatrix, d: &LibraryMatrix, r: usize, params: &AdmmParams) -> Result<UnmixResult> {
    cyclic_descent(Method::Fasun, y, d, r, params, |_| {})
}

/// [`fasun`] with a callback after every outer iteration.
pub fn fasun_with(
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    r: usize,
    params: &AdmmParams,
    on_outer: impl FnMut(&SolverState),
) -> Result<UnmixResult> {
    cyclic_descent(Method::Fasun, y, d, r, params, on_outer)
}

/// Sparse unmixing with soft shrinkage: `0 <= B <= 1` and an l1 penalty.
pub fn suns(y: &ObservationMatrix, d: &LibraryMatrix, r: usize, params: &AdmmParams) -> Result<UnmixResult> {
    cyclic_descent(Method::Suns, y, d, r, params, |_| {})
}

/// [`suns`] with a callback after every outer iteration.
pub fn suns_with(
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    r: usize,
    params: &AdmmParams,
    on_outer: impl FnMut(&SolverState),
) -> Result<UnmixResult> {
    cyclic_descent(Method::Suns, y, d, r, params, on_outer)
}

/// Initial state for a run, per `params.init`.
pub fn initial_state(y: &ObservationMatrix, d: &LibraryMatrix, r: usize, params: &AdmmParams) -> Result<SolverState> {
    let dims = ModelDims::from_data(y, d, r)?;
    let mut state = SolverState::zeros(dims);
    if params.init == Initialization::AtomSelection {
        let atoms = select_atoms(y, d, r);
        log::debug!("initial atoms: {atoms:?}");
        state.b = one_hot_mixing(dims.m, &atoms);
        state.s1 = state.b.clone();
        state.s2 = d.matmul(&state.b);
    }
    Ok(state)
}

fn cyclic_descent(
    method: Method,
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    r: usize,
    params: &AdmmParams,
    mut on_outer: impl FnMut(&SolverState),
) -> Result<UnmixResult> {
    params.validate()?;
    let op = match method {
        Method::Fasun => BStepOperator::fasun(d, params)?,
        Method::Suns => BStepOperator::suns(d, params)?,
        Method::Fclsu => return Err(Error::param("method", "fclsu is not a cyclic-descent method")),
    };
    let start = Instant::now();
    let mut state = initial_state(y, d, r, params)?;
    let mut quiet = 0;
    let mut stopped_early = false;
    while state.iter < params.outer {
        a_step_inner(&mut state, y, d, params.mu_a, params.inner_a)?;
        b_step_inner(&mut state, y, d, &op, params, params.inner_b)?;
        state.iter += 1;
        state.ensure_finite(state.iter)?;
        let f = residual_objective(y, &d.matmul(&state.b), &state.a);
        if !f.is_finite() {
            return Err(Error::Diverged {
                what: "objective",
                iteration: state.iter,
            });
        }
        if params.tol > 0.0 {
            if let Some(&prev) = state.objective_history.last() {
                let change = (prev - f).abs() / prev.abs().max(f64::MIN_POSITIVE);
                quiet = if change < params.tol { quiet + 1 } else { 0 };
            }
        }
        state.objective_history.push(f);
        on_outer(&state);
        if params.tol > 0.0 && quiet >= EARLY_STOP_WINDOW {
            stopped_early = true;
            break;
        }
    }
    Ok(finish(state, d, start, stopped_early))
}

fn finish(state: SolverState, d: &Matrix, start: Instant, stopped_early: bool) -> UnmixResult {
    let e_hat = d.matmul(&state.b);
    UnmixResult {
        a_feasible: project_feasible(&state.a),
        diagnostics: Diagnostics {
            objective_history: state.objective_history,
            residuals: state.residuals,
            outer_iterations: state.iter,
            stopped_early,
            elapsed_secs: start.elapsed().as_secs_f64(),
        },
        a_raw: state.a,
        b_hat: Some(state.b),
        e_hat,
    }
}

/// Dispatches on [`Method`]. FCLSU treats `d` as the endmember matrix and
/// runs `params.outer` iterations.
pub fn unmix(
    method: Method,
    y: &ObservationMatrix,
    d: &LibraryMatrix,
    r: usize,
    params: &AdmmParams,
) -> Result<UnmixResult> {
    match method {
        Method::Fclsu => fclsu_admm(y, d, params, params.outer),
        Method::Fasun => fasun(y, d, r, params),
        Method::Suns => suns(y, d, r, params),
    }
}
