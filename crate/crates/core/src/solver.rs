//! Operator-splitting (ADMM) solver for [`ConeProgram`]s.
//!
//! Splits `Ax + s = b, s ∈ K` into a least-squares `x`-update against a
//! once-factored `AᵀA + σI`, a projection of the slack onto the cone, and a
//! scaled dual update.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::coneprog::{Cone, ConeProgram};
use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub rho: f64,
    pub sigma: f64,
    pub max_iter: usize,
    pub tol_primal: f64,
    pub tol_dual: f64,
    /// Over-relaxation factor in (0, 2).
    pub relaxation: f64,
    /// Record an [`IterationLog`] every this many iterations.
    pub log_interval: Option<usize>,
    /// Consecutive stalled iterations before giving up as infeasible;
    /// `None` disables the check.
    pub stall_window: Option<usize>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma: 1e-6,
            max_iter: 50_000,
            tol_primal: 1e-7,
            tol_dual: 1e-7,
            relaxation: 1.6,
            log_interval: None,
            stall_window: Some(5000),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.sigma > 0.0
            && self.max_iter > 0
            && self.tol_primal > 0.0
            && self.tol_dual > 0.0
            && self.relaxation > 0.0
            && self.relaxation < 2.0
            && self.log_interval != Some(0)
            && self.stall_window != Some(0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad solver settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIters,
    InfeasibleHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

/// Iterate state that can seed another solve.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: DVector<f64>,
    /// Cone-side slack; recomputed from `x` when absent.
    pub z: Option<DVector<f64>>,
    /// Scaled dual; zero when absent.
    pub u: Option<DVector<f64>>,
}

impl WarmStart {
    pub fn primal(x: DVector<f64>) -> Self {
        Self { x, z: None, u: None }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub u: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub wall_time: Duration,
    pub history: Vec<IterationLog>,
}

impl SolveResult {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            x: self.x.clone(),
            z: Some(self.z.clone()),
            u: Some(self.u.clone()),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Euclidean projection onto `{(t, z) : ‖z‖₂ ≤ t}`.
pub fn project_soc(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    project_soc_in_place(&mut out)?;
    Ok(out)
}

fn project_soc_in_place(v: &mut [f64]) -> Result<()> {
    if v.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "second-order cone of dimension {}",
            v.len()
        )));
    }
    let t = v[0];
    let norm = v[1..].iter().map(|z| z * z).sum::<f64>().sqrt();
    if norm <= t {
        // inside
    } else if norm <= -t {
        v.fill(0.0);
    } else {
        let half = 0.5 * (t + norm);
        let ratio = half / norm;
        v[0] = half;
        v[1..].iter_mut().for_each(|z| *z *= ratio);
    }
    Ok(())
}

/// Blockwise projection onto a product of cones.
pub fn project_cones(s: &DVector<f64>, cones: &[Cone]) -> Result<DVector<f64>> {
    let mut out = s.clone();
    project_cones_in_place(out.as_mut_slice(), cones)?;
    Ok(out)
}

fn project_cones_in_place(s: &mut [f64], cones: &[Cone]) -> Result<()> {
    check_len("project_cones", cones.iter().map(Cone::dim).sum(), s.len())?;
    let mut offset = 0;
    for cone in cones {
        let block = &mut s[offset..offset + cone.dim()];
        match cone {
            Cone::Zero { .. } => block.fill(0.0),
            Cone::NonNeg { .. } => block.iter_mut().for_each(|v| *v = v.max(0.0)),
            Cone::Soc { .. } => project_soc_in_place(block)?,
        }
        offset += cone.dim();
    }
    Ok(())
}

/// Compressed-row copy of `A` for the iteration's matrix–vector products.
struct SparseRows {
    ncols: usize,
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRows {
    fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let mut starts = vec![0];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for row in a.row_iter() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            starts.push(cols.len());
        }
        Self {
            ncols: a.ncols(),
            starts,
            cols,
            vals,
        }
    }

    fn mul(&self, x: &DVector<f64>, out: &mut DVector<f64>) {
        for (i, w) in self.starts.windows(2).enumerate() {
            out[i] = (w[0]..w[1]).map(|p| self.vals[p] * x[self.cols[p]]).sum();
        }
    }

    fn mul_transpose(&self, y: &DVector<f64>, out: &mut DVector<f64>) {
        debug_assert_eq!(out.len(), self.ncols);
        out.fill(0.0);
        for (i, w) in self.starts.windows(2).enumerate() {
            let yi = y[i];
            if yi != 0.0 {
                for p in w[0]..w[1] {
                    out[self.cols[p]] += self.vals[p] * yi;
                }
            }
        }
    }
}

/// Primal residual above which a run can count as stalled.
const STALL_RESIDUAL: f64 = 1e-3;

pub fn solve(prog: &ConeProgram, settings: &SolverSettings, warm: Option<&WarmStart>) -> Result<SolveResult> {
    prog.validate()?;
    settings.validate()?;
    let start = Instant::now();
    let (m, n) = (prog.num_rows(), prog.num_vars());
    let rho = settings.rho;
    let lambda = settings.relaxation;

    let mut gram = prog.a.tr_mul(&prog.a);
    for i in 0..n {
        gram[(i, i)] += settings.sigma;
    }
    let chol = gram.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let a = SparseRows::from_dense(&prog.a);
    let at_b = prog.a.tr_mul(&prog.b);
    let c_over_rho = &prog.c / rho;
    let b_scale = 1.0 + prog.b.norm();
    let c_scale = 1.0 + prog.c.norm();

    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    if let Some(w) = warm {
        check_len("warm start x", n, w.x.len())?;
        x.copy_from(&w.x);
        match &w.z {
            Some(wz) => {
                check_len("warm start z", m, wz.len())?;
                z.copy_from(wz);
            }
            None => {
                a.mul(&x, &mut z);
                z = &prog.b - z;
                project_cones_in_place(z.as_mut_slice(), &prog.cones)?;
            }
        }
        if let Some(wu) = &w.u {
            check_len("warm start u", m, wu.len())?;
            u.copy_from(wu);
        }
    }

    let mut s_hat = DVector::zeros(m);
    let mut z_prev = DVector::zeros(m);
    let mut work_m = DVector::zeros(m);
    let mut rhs = DVector::zeros(n);
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIters;
    let (mut r_p, mut r_d) = (f64::INFINITY, f64::INFINITY);
    let mut stall = 0usize;
    let mut stall_start_rp = f64::INFINITY;
    let mut last_u_norm = u.norm();
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        // x ← (AᵀA + σI)⁻¹ (Aᵀ(b − z + u) − c/ρ + σ·x)
        work_m.copy_from(&u);
        work_m -= &z;
        a.mul_transpose(&work_m, &mut rhs);
        rhs += &at_b;
        rhs -= &c_over_rho;
        rhs.axpy(settings.sigma, &x, 1.0);
        chol.solve_mut(&mut rhs);
        x.copy_from(&rhs);

        // ŝ ← b − Ax, relaxed against the previous z
        a.mul(&x, &mut s_hat);
        s_hat.neg_mut();
        s_hat += &prog.b;
        z_prev.copy_from(&z);
        // work_m ← ŝ_r = λŝ + (1 − λ)z
        work_m.copy_from(&s_hat);
        work_m *= lambda;
        work_m.axpy(1.0 - lambda, &z_prev, 1.0);

        z.copy_from(&work_m);
        z += &u;
        project_cones_in_place(z.as_mut_slice(), &prog.cones)?;
        u += &work_m;
        u -= &z;

        r_p = (&s_hat - &z).norm() / b_scale;
        work_m.copy_from(&z);
        work_m -= &z_prev;
        a.mul_transpose(&work_m, &mut rhs);
        r_d = rho * rhs.norm() / c_scale;

        if let Some(every) = settings.log_interval {
            if iter % every == 0 || iter == 1 {
                history.push(IterationLog {
                    iter,
                    primal_residual: r_p,
                    dual_residual: r_d,
                    objective: prog.c.dot(&x),
                });
            }
        }

        if r_p <= settings.tol_primal && r_d <= settings.tol_dual {
            status = SolveStatus::Optimal;
            break;
        }

        // Infeasible problems leave a primal gap the dual keeps growing on.
        // A window only counts if the residual also failed to halve.
        if let Some(window) = settings.stall_window {
            let u_norm = u.norm();
            if r_p > STALL_RESIDUAL && u_norm >= last_u_norm {
                if stall == 0 {
                    stall_start_rp = r_p;
                }
                stall += 1;
            } else {
                stall = 0;
            }
            last_u_norm = u_norm;
            if stall >= window {
                if r_p > 0.5 * stall_start_rp {
                    status = SolveStatus::InfeasibleHeuristic;
                    break;
                }
                stall = 0;
            }
        }
    }

    Ok(SolveResult {
        status,
        objective: prog.c.dot(&x),
        x,
        z,
        u,
        iterations,
        primal_residual: r_p,
        dual_residual: r_d,
        wall_time: start.elapsed(),
        history,
    })
}
