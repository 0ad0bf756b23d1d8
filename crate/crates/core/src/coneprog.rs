//! Real conic programs `min cᵀx s.t. Ax + s = b, s ∈ K` and the builders
//! that lower the beamforming problems into that form.
//!
//! Each cone entry is written as an affine function of `x`; entry `i` of
//! the slack is `s_i = b_i − A_i·x`, so an expression `const + Σ coef·x_j`
//! becomes `b_i = const`, `A_ij = −coef`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::UncertaintyKind;
use crate::error::{check_len, Error, Result};
use crate::numerics::{CMat, CVec, C64};
use crate::solver::project_cones;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Cone {
    Zero {
        dim: usize,
    },
    NonNeg {
        dim: usize,
    },
    /// `{(t, z) : ‖z‖₂ ≤ t}`; the first entry is the head `t`.
    Soc {
        dim: usize,
    },
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Zero { dim } | Cone::NonNeg { dim } | Cone::Soc { dim } => dim,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub cones: Vec<Cone>,
}

impl ConeProgram {
    pub fn new(c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>, cones: Vec<Cone>) -> Result<Self> {
        let prog = Self { c, a, b, cones };
        prog.validate()?;
        Ok(prog)
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_len("constraint matrix columns", self.c.len(), self.a.ncols())?;
        check_len("constraint matrix rows", self.b.len(), self.a.nrows())?;
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        check_len("cone dimensions", self.b.len(), total)?;
        if let Some(bad) = self.cones.iter().find(|c| matches!(c, Cone::Soc { dim } if *dim < 2)) {
            return Err(Error::InvalidParameter(format!(
                "second-order cone of dimension {}",
                bad.dim()
            )));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }

    /// Distance of `b − Ax` from the cone product; zero when `x` is feasible.
    pub fn cone_violation(&self, x: &DVector<f64>) -> Result<f64> {
        check_len("cone_violation", self.num_vars(), x.len())?;
        let s = &self.b - &self.a * x;
        let projected = project_cones(&s, &self.cones)?;
        Ok((s - projected).norm())
    }

    /// Rescales rows for the solver: Zero and NonNeg rows to unit norm one
    /// at a time, each second-order block by a single factor so that its
    /// largest row has unit norm. The feasible set and objective are
    /// unchanged. Returns the program and the per-row factors.
    pub fn equilibrated(&self) -> (ConeProgram, DVector<f64>) {
        let mut scale = DVector::from_element(self.num_rows(), 1.0);
        let row_norm = |i: usize| self.a.row(i).norm();
        let mut offset = 0;
        for cone in &self.cones {
            let dim = cone.dim();
            match cone {
                Cone::Zero { .. } | Cone::NonNeg { .. } => {
                    for i in offset..offset + dim {
                        let n = row_norm(i);
                        if n > 0.0 {
                            scale[i] = 1.0 / n;
                        }
                    }
                }
                Cone::Soc { .. } => {
                    let n = (offset..offset + dim).map(row_norm).fold(0.0, f64::max);
                    if n > 0.0 {
                        scale.rows_mut(offset, dim).fill(1.0 / n);
                    }
                }
            }
            offset += dim;
        }
        let mut a = self.a.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            row *= scale[i];
        }
        let b = self.b.component_mul(&scale);
        (
            ConeProgram {
                c: self.c.clone(),
                a,
                b,
                cones: self.cones.clone(),
            },
            scale,
        )
    }

    pub fn to_file(&self) -> ProblemFile {
        ProblemFile {
            n: self.num_vars(),
            m: self.num_rows(),
            c: self.c.iter().copied().collect(),
            a: self.a.row_iter().map(|r| r.iter().copied().collect()).collect(),
            b: self.b.iter().copied().collect(),
            cones: self.cones.clone(),
        }
    }

    pub fn from_file(file: &ProblemFile) -> Result<Self> {
        check_len("problem file c", file.n, file.c.len())?;
        check_len("problem file b", file.m, file.b.len())?;
        check_len("problem file rows", file.m, file.a.len())?;
        for row in &file.a {
            check_len("problem file row", file.n, row.len())?;
        }
        let a = DMatrix::from_fn(file.m, file.n, |i, j| file.a[i][j]);
        Self::new(
            DVector::from_vec(file.c.clone()),
            a,
            DVector::from_vec(file.b.clone()),
            file.cones.clone(),
        )
    }
}

/// JSON problem file; `a` is dense and row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    pub c: Vec<f64>,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

/// Where each beamforming quantity lives inside `x`.
///
/// `Re W` and `Im W` are stored user-major: entry `(n, k)` of `W` sits at
/// `offset + k·N_t + n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLayout {
    pub n_t: usize,
    pub users: usize,
    pub re_w: usize,
    pub im_w: usize,
    pub p: usize,
    pub t: usize,
    pub eta: usize,
    pub alpha: usize,
    pub len: usize,
}

impl VariableLayout {
    pub fn new(n_t: usize, users: usize) -> Self {
        let kn = n_t * users;
        Self {
            n_t,
            users,
            re_w: 0,
            im_w: kn,
            p: 2 * kn,
            t: 2 * kn + 1,
            eta: 2 * kn + 1 + users,
            alpha: 2 * kn + 1 + users + 1,
            len: 2 * kn + users + 3,
        }
    }

    pub fn re(&self, n: usize, k: usize) -> usize {
        self.re_w + k * self.n_t + n
    }

    pub fn im(&self, n: usize, k: usize) -> usize {
        self.im_w + k * self.n_t + n
    }

    pub fn encode(&self, sol: &Beamformer) -> Result<DVector<f64>> {
        check_len("encode rows", self.n_t, sol.w.nrows())?;
        check_len("encode users", self.users, sol.w.ncols())?;
        check_len("encode t", self.users, sol.t.len())?;
        let mut x = DVector::zeros(self.len);
        for k in 0..self.users {
            for n in 0..self.n_t {
                x[self.re(n, k)] = sol.w[(n, k)].re;
                x[self.im(n, k)] = sol.w[(n, k)].im;
            }
            x[self.t + k] = sol.t[k];
        }
        x[self.p] = sol.power;
        x[self.eta] = sol.eta;
        x[self.alpha] = sol.alpha;
        Ok(x)
    }
}

/// Decoded solver output.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    /// `N_t × K`; column `k` is user `k`'s beamformer.
    pub w: CMat,
    pub power: f64,
    pub t: Vec<f64>,
    pub eta: f64,
    pub alpha: f64,
}

pub fn extract_solution(x: &DVector<f64>, layout: &VariableLayout) -> Result<Beamformer> {
    check_len("extract_solution", layout.len, x.len())?;
    let w = CMat::from_fn(layout.n_t, layout.users, |n, k| {
        C64::new(x[layout.re(n, k)], x[layout.im(n, k)])
    });
    Ok(Beamformer {
        w,
        power: x[layout.p],
        t: (0..layout.users).map(|k| x[layout.t + k]).collect(),
        eta: x[layout.eta],
        alpha: x[layout.alpha],
    })
}

/// How the worst-case denominator bound `‖ĥᴴW‖₂ + ε·α` enters the
/// per-user cone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorBound {
    /// `‖[ĥᴴW, σ]‖₂ ≤ t_k − ε_k·α`: the triangle inequality applied to
    /// the whole stacked vector, a valid upper bound on the worst case.
    Triangle,
    /// `‖[ĥᴴW, ε_k·α, σ]‖₂ ≤ t_k`: the error term stacked as an extra
    /// entry. Drops the cross term between `ĥᴴW` and `δᴴW`, so it can
    /// under-estimate the worst case.
    #[default]
    Stacked,
}

/// Inputs shared by the three builders.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Channel estimates `ĥ_k` (or true channels for the perfect-CSI case).
    pub channels: Vec<CVec>,
    /// Linear SINR targets.
    pub gammas: Vec<f64>,
    /// Noise standard deviation `σ_n`.
    pub sigma: f64,
    pub radii: Vec<f64>,
    pub kind: UncertaintyKind,
    pub bound: DenominatorBound,
}

impl ProblemSpec {
    pub fn users(&self) -> usize {
        self.channels.len()
    }

    pub fn n_t(&self) -> usize {
        self.channels.first().map_or(0, |h| h.len())
    }

    /// `β_k = √(1 + 1/γ_k)`.
    pub fn beta(&self, k: usize) -> f64 {
        (1.0 + 1.0 / self.gammas[k]).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.users();
        if k == 0 {
            return Err(Error::InvalidParameter("no users".into()));
        }
        check_len("SINR targets", k, self.gammas.len())?;
        check_len("uncertainty radii", k, self.radii.len())?;
        for h in &self.channels {
            check_len("channel length", self.n_t(), h.len())?;
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "SINR target must be positive, got {g}"
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise level must be positive, got {}",
                self.sigma
            )));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative uncertainty radius {r}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Affine {
    terms: Vec<(usize, f64)>,
    constant: f64,
}

impl Affine {
    fn var(j: usize, coef: f64) -> Self {
        Self {
            terms: vec![(j, coef)],
            constant: 0.0,
        }
    }

    fn constant(v: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: v,
        }
    }

    fn plus(mut self, other: Affine) -> Self {
        self.terms.extend(other.terms);
        self.constant += other.constant;
        self
    }

    fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }
}

struct Builder {
    layout: VariableLayout,
    rows: Vec<Affine>,
    cones: Vec<Cone>,
}

impl Builder {
    fn new(layout: VariableLayout) -> Self {
        Self {
            layout,
            rows: Vec::new(),
            cones: Vec::new(),
        }
    }

    fn push(&mut self, cone: Cone, rows: Vec<Affine>) {
        debug_assert_eq!(cone.dim(), rows.len());
        self.rows.extend(rows);
        self.cones.push(cone);
    }

    fn push_soc(&mut self, rows: Vec<Affine>) {
        self.push(Cone::Soc { dim: rows.len() }, rows);
    }

    /// Real and imaginary parts of `hᴴ·w_j` as affine forms.
    fn channel_gain(&self, h: &CVec, j: usize) -> (Affine, Affine) {
        let l = &self.layout;
        let mut re = Affine::default();
        let mut im = Affine::default();
        for (n, hn) in h.iter().enumerate() {
            // conj(a + jb)(x + jy) = (ax + by) + j(ay − bx)
            re.terms.push((l.re(n, j), hn.re));
            re.terms.push((l.im(n, j), hn.im));
            im.terms.push((l.im(n, j), hn.re));
            im.terms.push((l.re(n, j), -hn.im));
        }
        (re, im)
    }

    /// Entries `Re/Im(hᴴw_j)` for every user `j`.
    fn stacked_gains(&self, h: &CVec) -> Vec<Affine> {
        (0..self.layout.users)
            .flat_map(|j| {
                let (re, im) = self.channel_gain(h, j);
                [re, im]
            })
            .collect()
    }

    /// `Σ‖w_k‖² ≤ p` as `‖[2·vec(W); p − 1]‖₂ ≤ p + 1`.
    fn power_cone(&mut self) {
        let l = self.layout;
        let mut rows = vec![Affine::var(l.p, 1.0).plus(Affine::constant(1.0))];
        for k in 0..l.users {
            for n in 0..l.n_t {
                rows.push(Affine::var(l.re(n, k), 2.0));
            }
        }
        for k in 0..l.users {
            for n in 0..l.n_t {
                rows.push(Affine::var(l.im(n, k), 2.0));
            }
        }
        rows.push(Affine::var(l.p, 1.0).plus(Affine::constant(-1.0)));
        self.push_soc(rows);
    }

    /// Worst-case numerator: `Re(ĥ_kᴴw_k) − ε_k·η − t_k/β_k ≥ 0` per user.
    fn numerator_rows(&mut self, spec: &ProblemSpec) {
        let l = self.layout;
        let rows = (0..l.users)
            .map(|k| {
                self.channel_gain(&spec.channels[k], k)
                    .0
                    .plus(Affine::var(l.eta, -spec.radii[k]))
                    .plus(Affine::var(l.t + k, -1.0 / spec.beta(k)))
            })
            .collect();
        self.push(Cone::NonNeg { dim: l.users }, rows);
    }

    /// Worst-case denominator cone of user `k`.
    fn denominator_cone(&mut self, spec: &ProblemSpec, k: usize) {
        let l = self.layout;
        let eps = spec.radii[k];
        let gains = self.stacked_gains(&spec.channels[k]);
        let mut rows = Vec::with_capacity(gains.len() + 3);
        match spec.bound {
            DenominatorBound::Triangle => {
                rows.push(Affine::var(l.t + k, 1.0).plus(Affine::var(l.alpha, -eps)));
                rows.extend(gains);
            }
            DenominatorBound::Stacked => {
                rows.push(Affine::var(l.t + k, 1.0));
                rows.extend(gains);
                rows.push(Affine::var(l.alpha, eps));
            }
        }
        rows.push(Affine::constant(spec.sigma));
        self.push_soc(rows);
    }

    fn finish(self) -> Result<(ConeProgram, VariableLayout)> {
        let l = self.layout;
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, l.len);
        let mut b = DVector::zeros(m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, coef) in &row.terms {
                a[(i, j)] -= coef;
            }
            b[i] = row.constant;
        }
        let mut c = DVector::zeros(l.len);
        c[l.p] = 1.0;
        Ok((ConeProgram::new(c, a, b, self.cones)?, l))
    }
}

/// Non-robust power minimization on the given channels:
/// `‖[h_kᴴW, σ]‖₂ ≤ β_k·Re(h_kᴴw_k)` with `Im(h_kᴴw_k) = 0`. The unused
/// `t`, `η`, `α` slots are pinned to zero.
pub fn build_perfect_csi(spec: &ProblemSpec) -> Result<(ConeProgram, VariableLayout)> {
    spec.validate()?;
    let l = VariableLayout::new(spec.n_t(), spec.users());
    let mut bld = Builder::new(l);
    bld.power_cone();
    for k in 0..l.users {
        let (re, im) = bld.channel_gain(&spec.channels[k], k);
        bld.push(Cone::Zero { dim: 1 }, vec![im]);
        let mut rows = vec![re.scaled(spec.beta(k))];
        rows.extend(bld.stacked_gains(&spec.channels[k]));
        rows.push(Affine::constant(spec.sigma));
        bld.push_soc(rows);
    }
    let pins = (0..l.users)
        .map(|k| Affine::var(l.t + k, 1.0))
        .chain([Affine::var(l.eta, 1.0), Affine::var(l.alpha, 1.0)])
        .collect();
    bld.push(Cone::Zero { dim: l.users + 2 }, pins);
    bld.finish()
}

/// Robust power minimization over l1 error balls: per-entry bound
/// `|w_k(n)| ≤ η`, per-row bound `‖v(n)‖₂ ≤ α`, the linear numerator
/// constraints and one denominator cone per user.
pub fn build_l1_robust(spec: &ProblemSpec) -> Result<(ConeProgram, VariableLayout)> {
    spec.validate()?;
    if spec.kind != UncertaintyKind::L1 {
        return Err(Error::KindMismatch {
            expected: UncertaintyKind::L1,
            found: spec.kind,
        });
    }
    let l = VariableLayout::new(spec.n_t(), spec.users());
    let mut bld = Builder::new(l);
    bld.power_cone();
    bld.numerator_rows(spec);
    for k in 0..l.users {
        for n in 0..l.n_t {
            bld.push_soc(vec![
                Affine::var(l.eta, 1.0),
                Affine::var(l.re(n, k), 1.0),
                Affine::var(l.im(n, k), 1.0),
            ]);
        }
    }
    for n in 0..l.n_t {
        let mut rows = vec![Affine::var(l.alpha, 1.0)];
        rows.extend((0..l.users).map(|k| Affine::var(l.re(n, k), 1.0)));
        rows.extend((0..l.users).map(|k| Affine::var(l.im(n, k), 1.0)));
        bld.push_soc(rows);
    }
    for k in 0..l.users {
        bld.denominator_cone(spec, k);
    }
    bld.finish()
}

/// The l2-ball counterpart built the same way: `‖w_k‖₂ ≤ η` (Cauchy–Schwarz
/// on the numerator) and `‖W‖_F ≤ α` (on the denominator).
pub fn build_l2_robust(spec: &ProblemSpec) -> Result<(ConeProgram, VariableLayout)> {
    spec.validate()?;
    if spec.kind != UncertaintyKind::L2 {
        return Err(Error::KindMismatch {
            expected: UncertaintyKind::L2,
            found: spec.kind,
        });
    }
    let l = VariableLayout::new(spec.n_t(), spec.users());
    let mut bld = Builder::new(l);
    bld.power_cone();
    bld.numerator_rows(spec);
    for k in 0..l.users {
        let mut rows = vec![Affine::var(l.eta, 1.0)];
        rows.extend((0..l.n_t).map(|n| Affine::var(l.re(n, k), 1.0)));
        rows.extend((0..l.n_t).map(|n| Affine::var(l.im(n, k), 1.0)));
        bld.push_soc(rows);
    }
    let mut rows = vec![Affine::var(l.alpha, 1.0)];
    rows.extend(
        (0..l.users)
            .flat_map(|k| (0..l.n_t).map(move |n| (n, k)))
            .map(|(n, k)| Affine::var(l.re(n, k), 1.0)),
    );
    rows.extend(
        (0..l.users)
            .flat_map(|k| (0..l.n_t).map(move |n| (n, k)))
            .map(|(n, k)| Affine::var(l.im(n, k), 1.0)),
    );
    bld.push_soc(rows);
    for k in 0..l.users {
        bld.denominator_cone(spec, k);
    }
    bld.finish()
}
