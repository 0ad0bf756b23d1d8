//! Experiment harness: channel files, single solves, certification
//! reports, and the power-versus-ε / power-versus-γ sweeps.
//!
//! Randomness is keyed by `(seed, run, attempt)` only. Every ε and γ cell
//! of a run therefore sees the same channel draw, and the error shape is
//! shared across ε (only its size changes).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    AngularTransform, ChannelDraw, ChannelFile, ChannelFileConfig, ChannelModelParams, ChannelSet, SystemConfig,
    UncertaintyKind,
};
use crate::coneprog::{DenominatorBound, ProblemSpec};
use crate::error::{check_len, Error, Result};
use crate::evaluate::{certify, mc_min_sinr, Certificate};
use crate::numerics::{CMat, RngStream, C64};
use crate::scheme::{screen_infeasible, solve_scheme, Scheme, SchemeSolution};
use crate::solver::{SolveStatus, SolverSettings, WarmStart};

/// `10^(dB/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// All knobs of an experiment. Every field has a default, so a JSON config
/// only needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub channel: ChannelModelParams,
    pub schemes: Vec<Scheme>,
    /// Relative uncertainty bounds swept by `sweep`.
    pub epsilons: Vec<f64>,
    /// SINR targets in dB swept by `sweep`.
    pub gammas_db: Vec<f64>,
    /// Operating point of `gen`, `solve` and `certify`.
    pub epsilon: f64,
    pub gamma_db: f64,
    pub runs: usize,
    pub seed: u64,
    /// `σ_n² = noise_factor · mean_k ‖h_k‖₂²`.
    pub noise_factor: f64,
    /// Ball the synthetic errors are drawn from.
    pub error_model: UncertaintyKind,
    /// Nonzeros of each synthetic error; `None` means twice the tap count.
    pub support_size: Option<usize>,
    pub max_attempts: usize,
    pub bound: DenominatorBound,
    pub solver: SolverSettings,
    pub mc_samples: usize,
    pub mc_phases: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemConfig::default(),
            channel: ChannelModelParams::default(),
            schemes: Scheme::ALL.to_vec(),
            epsilons: vec![0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3],
            gammas_db: vec![3.0],
            epsilon: 0.2,
            gamma_db: 3.0,
            runs: 100,
            seed: 1,
            noise_factor: 0.1,
            error_model: UncertaintyKind::L1,
            support_size: None,
            max_attempts: 20,
            bound: DenominatorBound::Stacked,
            solver: SolverSettings::default(),
            mc_samples: 10_000,
            mc_phases: 64,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.channel.validate()?;
        self.solver.validate()?;
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.schemes.is_empty() || self.epsilons.is_empty() || self.gammas_db.is_empty() {
            return bad("schemes, epsilon grid and gamma grid must be nonempty".into());
        }
        if self.runs == 0 || self.max_attempts == 0 {
            return bad("runs and max_attempts must be at least 1".into());
        }
        if !(self.noise_factor > 0.0) {
            return bad(format!("noise_factor must be positive, got {}", self.noise_factor));
        }
        if let Some(e) = self.epsilons.iter().chain([&self.epsilon]).find(|e| !(**e >= 0.0)) {
            return bad(format!("uncertainty bound must be nonnegative, got {e}"));
        }
        if let Some(g) = self.gammas_db.iter().chain([&self.gamma_db]).find(|g| !g.is_finite()) {
            return bad(format!("SINR target must be finite, got {g}"));
        }
        if self.support_size() > self.system.n_t() {
            return bad(format!(
                "error support {} exceeds N_t = {}",
                self.support_size(),
                self.system.n_t()
            ));
        }
        Ok(())
    }

    pub fn support_size(&self) -> usize {
        self.support_size.unwrap_or(2 * self.channel.taps)
    }

    pub fn channel_draw(&self, epsilon: f64) -> ChannelDraw {
        ChannelDraw {
            system: self.system,
            model: self.channel,
            kind: self.error_model,
            epsilon,
            support_size: self.support_size(),
        }
    }

    /// Random stream of one channel draw in the sweep. `gen` uses run 0,
    /// attempt 0.
    pub fn draw_stream(&self, run: usize, attempt: usize) -> RngStream {
        RngStream::new(self.seed)
            .substream(run as u64)
            .substream(attempt as u64)
    }
}

/// Noise standard deviation under the `c·‖h‖²` rule.
pub fn noise_sigma(set: &ChannelSet, noise_factor: f64) -> f64 {
    (noise_factor * set.mean_channel_energy()).sqrt()
}

/// The program input for `scheme`: perfect CSI designs on the true
/// channels, the robust designs on the estimates with `ε_k = ε·‖h_k‖₂`.
pub fn problem_for(
    scheme: Scheme,
    set: &ChannelSet,
    epsilon: f64,
    gamma_db: f64,
    noise_factor: f64,
    bound: DenominatorBound,
) -> ProblemSpec {
    let users = set.users.len();
    ProblemSpec {
        channels: match scheme {
            Scheme::Perfect => set.true_channels(),
            _ => set.estimates(),
        },
        gammas: vec![db_to_linear(gamma_db); users],
        sigma: noise_sigma(set, noise_factor),
        radii: set.users.iter().map(|u| epsilon * u.h.norm()).collect(),
        kind: match scheme {
            Scheme::L2Robust => UncertaintyKind::L2,
            _ => UncertaintyKind::L1,
        },
        bound,
    }
}

/// Draws the channel file written by `gen`.
pub fn generate_channels(config: &ExperimentConfig) -> Result<ChannelFile> {
    config.validate()?;
    let transform = AngularTransform::new(&config.system)?;
    let set = config
        .channel_draw(config.epsilon)
        .draw(&transform, config.draw_stream(0, 0))?;
    let file_config = ChannelFileConfig {
        n_v: config.system.n_v,
        n_h: config.system.n_h,
        users: config.system.users,
        epsilon: config.epsilon,
        uncertainty: config.error_model,
        noise_factor: config.noise_factor,
    };
    Ok(ChannelFile::new(file_config, config.seed, &set))
}

/// Beamforming matrix as stored in result files: one real and one
/// imaginary array per user column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl MatrixRecord {
    pub fn from_matrix(w: &CMat) -> Self {
        let col = |k: usize, f: fn(&C64) -> f64| w.column(k).iter().map(f).collect();
        Self {
            re: (0..w.ncols()).map(|k| col(k, |c| c.re)).collect(),
            im: (0..w.ncols()).map(|k| col(k, |c| c.im)).collect(),
        }
    }

    pub fn to_matrix(&self, n_t: usize) -> Result<CMat> {
        check_len("beamformer columns", self.re.len(), self.im.len())?;
        for (re, im) in self.re.iter().zip(&self.im) {
            check_len("beamformer column length", n_t, re.len())?;
            check_len("beamformer column length", n_t, im.len())?;
        }
        Ok(CMat::from_fn(n_t, self.re.len(), |n, k| {
            C64::new(self.re[k][n], self.im[k][n])
        }))
    }
}

/// Outcome of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub gamma_db: f64,
    /// Absent unless the solver reached its tolerances.
    pub power: Option<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub time_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub w: Option<MatrixRecord>,
}

/// Solves one design on a channel file; returns the record and the full
/// solution (for problem dumps and iteration logs).
pub fn solve_channel_file(
    file: &ChannelFile,
    scheme: Scheme,
    gamma_db: f64,
    bound: DenominatorBound,
    settings: &SolverSettings,
    with_w: bool,
) -> Result<(SolveRecord, SchemeSolution)> {
    let set = file.channel_set()?;
    let spec = problem_for(
        scheme,
        &set,
        file.config.epsilon,
        gamma_db,
        file.config.noise_factor,
        bound,
    );
    let sol = solve_scheme(scheme, &spec, settings, None)?;
    let r = &sol.result;
    let record = SolveRecord {
        scheme,
        epsilon: file.config.epsilon,
        gamma_db,
        power: r.is_optimal().then_some(r.objective),
        status: r.status,
        iterations: r.iterations,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
        time_ms: r.wall_time.as_secs_f64() * 1e3,
        w: with_w.then(|| MatrixRecord::from_matrix(&sol.beamformer.w)),
    };
    Ok((record, sol))
}

/// Output of `certify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub epsilon: f64,
    pub gamma_db: f64,
    pub all_certified: bool,
    pub users: Vec<Certificate>,
    pub mc_samples: usize,
    pub mc_min_sinr: Vec<f64>,
    pub gamma: f64,
}

pub fn certify_channel_file(file: &ChannelFile, w: &CMat, config: &ExperimentConfig) -> Result<CertificateReport> {
    let set = file.channel_set()?;
    let spec = problem_for(
        Scheme::L1Robust,
        &set,
        file.config.epsilon,
        config.gamma_db,
        file.config.noise_factor,
        config.bound,
    );
    let users = certify(&spec.channels, &spec.radii, w, spec.sigma, &spec.gammas)?;
    let mc = mc_min_sinr(
        &spec.channels,
        &spec.radii,
        w,
        spec.sigma,
        config.mc_samples.max(1),
        config.mc_phases,
        RngStream::new(config.seed).substream(u64::MAX),
    )?;
    Ok(CertificateReport {
        epsilon: file.config.epsilon,
        gamma_db: config.gamma_db,
        all_certified: users.iter().all(|c| c.certified),
        users,
        mc_samples: config.mc_samples.max(1),
        mc_min_sinr: mc,
        gamma: spec.gammas[0],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Optimal,
    Exhausted,
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub gamma_db: f64,
    pub run: usize,
    pub power: Option<f64>,
    pub status: RowStatus,
    pub iterations: usize,
    pub solve_time_ms: f64,
}

/// Per-cell mean over runs that produced a power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scheme: Scheme,
    pub epsilon: f64,
    pub gamma_db: f64,
    pub runs_ok: usize,
    pub mean_power: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    /// Sorted by scheme, γ, ε, run.
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryRow>,
}

/// Schemes in the order they are attempted: the one most likely to be
/// infeasible first, so rejected draws cost as little as possible.
fn attempt_order(schemes: &[Scheme]) -> Vec<Scheme> {
    let mut order: Vec<Scheme> = schemes.to_vec();
    order.sort_by_key(|s| match s {
        Scheme::L2Robust => 0,
        Scheme::L1Robust => 1,
        Scheme::Perfect => 2,
    });
    order.dedup();
    order
}

/// All `(scheme, ε)` rows of one `(γ, run)` pair. Cells are visited in
/// ε order and each scheme warm-starts from its previous optimum.
fn sweep_unit(
    config: &ExperimentConfig,
    transform: &AngularTransform,
    gamma_db: f64,
    run: usize,
) -> Result<Vec<SweepRow>> {
    let schemes = attempt_order(&config.schemes);
    let mut warm: Vec<Option<WarmStart>> = vec![None; schemes.len()];
    let mut rows = Vec::new();
    for &epsilon in &config.epsilons {
        let draw = config.channel_draw(epsilon);
        let mut accepted = None;
        let mut last = vec![(0usize, 0.0f64); schemes.len()];
        'attempts: for attempt in 0..config.max_attempts {
            let set = draw.draw(transform, config.draw_stream(run, attempt))?;
            let mut solved = Vec::with_capacity(schemes.len());
            for (i, &scheme) in schemes.iter().enumerate() {
                let spec = problem_for(scheme, &set, epsilon, gamma_db, config.noise_factor, config.bound);
                if screen_infeasible(scheme, &spec) {
                    last[i] = (0, 0.0);
                    continue 'attempts;
                }
                let sol = solve_scheme(scheme, &spec, &config.solver, warm[i].as_ref())?;
                last[i] = (sol.result.iterations, sol.result.wall_time.as_secs_f64() * 1e3);
                if !sol.result.is_optimal() {
                    continue 'attempts;
                }
                solved.push(sol);
            }
            accepted = Some(solved);
            break;
        }
        match accepted {
            Some(solved) => {
                for (i, sol) in solved.into_iter().enumerate() {
                    rows.push(SweepRow {
                        scheme: schemes[i],
                        epsilon,
                        gamma_db,
                        run,
                        power: Some(sol.power()),
                        status: RowStatus::Optimal,
                        iterations: sol.result.iterations,
                        solve_time_ms: sol.result.wall_time.as_secs_f64() * 1e3,
                    });
                    warm[i] = Some(sol.result.warm_start());
                }
            }
            None => {
                for (i, &scheme) in schemes.iter().enumerate() {
                    rows.push(SweepRow {
                        scheme,
                        epsilon,
                        gamma_db,
                        run,
                        power: None,
                        status: RowStatus::Exhausted,
                        iterations: last[i].0,
                        solve_time_ms: last[i].1,
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Runs the full `(scheme, ε, γ, run)` grid on `threads` workers (all
/// available cores when `None`). Results do not depend on the thread count.
pub fn run_sweep(config: &ExperimentConfig, threads: Option<usize>) -> Result<SweepOutput> {
    config.validate()?;
    let transform = AngularTransform::new(&config.system)?;
    let units: Vec<(f64, usize)> = config
        .gammas_db
        .iter()
        .flat_map(|&g| (0..config.runs).map(move |r| (g, r)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let chunks: Vec<Vec<SweepRow>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(g, r)| sweep_unit(config, &transform, g, r))
            .collect::<Result<_>>()
    })?;
    let mut rows: Vec<SweepRow> = chunks.into_iter().flatten().collect();
    let scheme_rank = |s: Scheme| config.schemes.iter().position(|x| *x == s).unwrap_or(usize::MAX);
    let eps_rank = |e: f64| config.epsilons.iter().position(|x| *x == e).unwrap_or(usize::MAX);
    let gamma_rank = |g: f64| config.gammas_db.iter().position(|x| *x == g).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| {
        (
            scheme_rank(r.scheme),
            gamma_rank(r.gamma_db),
            eps_rank(r.epsilon),
            r.run,
        )
    });
    let summary = summarize(&rows);
    Ok(SweepOutput { rows, summary })
}

/// Means per `(scheme, ε, γ)` over rows with a power, in row order.
pub fn summarize(rows: &[SweepRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    for row in rows {
        let pos = out
            .iter()
            .position(|s| s.scheme == row.scheme && s.epsilon == row.epsilon && s.gamma_db == row.gamma_db);
        let idx = pos.unwrap_or_else(|| {
            out.push(SummaryRow {
                scheme: row.scheme,
                epsilon: row.epsilon,
                gamma_db: row.gamma_db,
                runs_ok: 0,
                mean_power: None,
            });
            sums.push(0.0);
            out.len() - 1
        });
        if let Some(p) = row.power {
            out[idx].runs_ok += 1;
            sums[idx] += p;
        }
    }
    for (s, sum) in out.iter_mut().zip(sums) {
        if s.runs_ok > 0 {
            s.mean_power = Some(sum / s.runs_ok as f64);
        }
    }
    out
}

fn write_csv<T: Serialize, W: Write>(items: &[T], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for item in items {
        writer.serialize(item).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidParameter(format!("csv: {other:?}")),
    }
}

impl SweepOutput {
    /// `scheme,epsilon,gamma_db,run,power,status,iterations,solve_time_ms`.
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.rows, out)
    }

    /// `scheme,epsilon,gamma_db,runs_ok,mean_power`.
    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        write_csv(&self.summary, out)
    }

    pub fn mean_power(&self, scheme: Scheme, epsilon: f64, gamma_db: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.scheme == scheme && s.epsilon == epsilon && s.gamma_db == gamma_db)
            .and_then(|s| s.mean_power)
    }
}
