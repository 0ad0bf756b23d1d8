//! The three beamforming designs compared in the experiments.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coneprog::{
    build_l1_robust, build_l2_robust, build_perfect_csi, extract_solution, Beamformer, ConeProgram, ProblemSpec,
    VariableLayout,
};
use crate::error::{Error, Result};
use crate::solver::{solve, SolveResult, SolverSettings, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Perfect,
    L1Robust,
    L2Robust,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Perfect, Scheme::L1Robust, Scheme::L2Robust];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Perfect => "perfect",
            Scheme::L1Robust => "l1_robust",
            Scheme::L2Robust => "l2_robust",
        }
    }

    pub fn build(&self, spec: &ProblemSpec) -> Result<(ConeProgram, VariableLayout)> {
        match self {
            Scheme::Perfect => build_perfect_csi(spec),
            Scheme::L1Robust => build_l1_robust(spec),
            Scheme::L2Robust => build_l2_robust(spec),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scheme '{s}'")))
    }
}

/// A solved design together with its program.
#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub program: ConeProgram,
    pub layout: VariableLayout,
    pub result: SolveResult,
    pub beamformer: Beamformer,
}

impl SchemeSolution {
    pub fn power(&self) -> f64 {
        self.result.objective
    }
}

/// Builds, equilibrates and solves one design.
pub fn solve_scheme(
    scheme: Scheme,
    spec: &ProblemSpec,
    settings: &SolverSettings,
    warm: Option<&WarmStart>,
) -> Result<SchemeSolution> {
    let (program, layout) = scheme.build(spec)?;
    let (scaled, _) = program.equilibrated();
    let result = solve(&scaled, settings, warm)?;
    let beamformer = extract_solution(&result.x, &layout)?;
    Ok(SchemeSolution {
        program,
        layout,
        result,
        beamformer,
    })
}

/// Cheap necessary condition for the robust designs; `true` means the
/// program is provably infeasible.
///
/// With `s_k = ‖w_k‖₂`, `m = max s_k`, `S = ‖(s_1, …, s_K)‖₂`, the shared
/// bounds give `η ≥ b·m` and `α ≥ b·S`, where `b = 1` for the l2 design
/// and `b = 1/√N_t` for the l1 design. Together with
/// `Re(ĥ_kᴴw_k) ≤ ‖ĥ_k‖s_k` every user then needs
/// `β_k(‖ĥ_k‖s_k − e_k·m) ≥ √(‖ĥ_k‖²s_k² + e_k²S²)` with `e_k = b·ε_k`
/// (under either denominator bound). Scaling `m = 1`, this fixes a smallest
/// admissible `s_k(S)`, increasing in `S`; no beamformer exists if for every
/// choice of the largest user the fixed point `S² = 1 + Σ s_k(S)²` pushes
/// some `s_k` above 1.
pub fn screen_infeasible(scheme: Scheme, spec: &ProblemSpec) -> bool {
    let shrink = match scheme {
        Scheme::Perfect => return false,
        Scheme::L1Robust => 1.0 / (spec.n_t() as f64).sqrt(),
        Scheme::L2Robust => 1.0,
    };
    let users = spec.users();
    // Smallest s_k meeting user k's condition at a given S².
    let floor = |k: usize, s_sq: f64| {
        let h = spec.channels[k].norm();
        let e = spec.radii[k] * shrink;
        if e == 0.0 {
            return 0.0;
        }
        if h == 0.0 {
            return f64::INFINITY;
        }
        let b2 = spec.beta(k).powi(2);
        (e / h) * (b2 + (b2 + (b2 - 1.0) * s_sq).sqrt()) / (b2 - 1.0)
    };
    (0..users).all(|top| {
        let mut s_sq = 1.0;
        for _ in 0..10_000 {
            if floor(top, s_sq) > 1.0 {
                return true;
            }
            let mut next = 1.0;
            for k in (0..users).filter(|&k| k != top) {
                let s = floor(k, s_sq);
                if s > 1.0 {
                    return true;
                }
                next += s * s;
            }
            if next - s_sq <= 1e-12 * next {
                return false;
            }
            s_sq = next;
        }
        false
    })
}
