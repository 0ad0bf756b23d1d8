//! Physical multipath channels for a uniform planar array, the angular
//! transform, and synthesis of sparse CSI errors.
//!
//! Steering convention: antenna `(m, n)` (vertical index `m`, horizontal
//! index `n`) sees phase `2π·d·(m·cosθ + n·sinθ·cosφ)` where `d` is the
//! spacing in wavelengths. Vectors are stacked vertical-index fastest, the
//! same order as `vec(H)` of an `N_v × N_h` matrix.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};
use crate::numerics::{dft_basis, norms, CMat, CVec, RngStream, C64};

/// Array geometry and number of served single-antenna users.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_v: usize,
    pub n_h: usize,
    pub users: usize,
}

impl SystemConfig {
    pub fn new(n_v: usize, n_h: usize, users: usize) -> Self {
        Self { n_v, n_h, users }
    }

    pub fn n_t(&self) -> usize {
        self.n_v * self.n_h
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_v == 0 || self.n_h == 0 || self.users == 0 {
            return Err(Error::InvalidParameter(format!(
                "system needs positive dimensions, got {}×{} with {} users",
                self.n_v, self.n_h, self.users
            )));
        }
        Ok(())
    }
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self::new(4, 8, 4)
    }
}

/// Parameters of the geometric multipath model. Defaults: six taps, half
/// wavelength spacing, θ ~ U(0, π/2), φ ~ U(0, π), |g| ~ U(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelModelParams {
    pub taps: usize,
    /// Antenna spacing in wavelengths.
    pub spacing: f64,
    pub theta_max: f64,
    pub phi_max: f64,
    pub gain_max: f64,
    /// Draw a uniform phase for each tap gain. Without it all gains are real
    /// and nonnegative.
    pub random_phase: bool,
}

impl Default for ChannelModelParams {
    fn default() -> Self {
        Self {
            taps: 6,
            spacing: 0.5,
            theta_max: PI / 2.0,
            phi_max: PI,
            gain_max: 1.0,
            random_phase: true,
        }
    }
}

impl ChannelModelParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.taps >= 1
            && self.spacing > 0.0
            && (0.0..=PI / 2.0).contains(&self.theta_max)
            && (0.0..=PI).contains(&self.phi_max)
            && self.gain_max >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "bad channel model parameters: {self:?}"
            )))
        }
    }
}

/// UPA response toward elevation `theta` and azimuth `phi`.
pub fn steering_vector(theta: f64, phi: f64, spacing: f64, cfg: &SystemConfig) -> Result<CVec> {
    if !(0.0..=PI / 2.0).contains(&theta) || !(0.0..=PI).contains(&phi) {
        return Err(Error::InvalidParameter(format!(
            "angles out of range: theta = {theta}, phi = {phi}"
        )));
    }
    let k = 2.0 * PI * spacing;
    let (vert, horiz) = (theta.cos(), theta.sin() * phi.cos());
    Ok(CVec::from_fn(cfg.n_t(), |i, _| {
        let (m, n) = ((i % cfg.n_v) as f64, (i / cfg.n_v) as f64);
        C64::from_polar(1.0, k * (m * vert + n * horiz))
    }))
}

/// Draws one spatial-domain channel `Σ_l g_l·a(θ_l, φ_l)`.
pub fn gen_channel<R: Rng + ?Sized>(params: &ChannelModelParams, cfg: &SystemConfig, rng: &mut R) -> Result<CVec> {
    params.validate()?;
    let mut h = CVec::zeros(cfg.n_t());
    for _ in 0..params.taps {
        let theta = rng.random::<f64>() * params.theta_max;
        let phi = rng.random::<f64>() * params.phi_max;
        let magnitude = rng.random::<f64>() * params.gain_max;
        let phase = if params.random_phase {
            rng.random::<f64>() * 2.0 * PI
        } else {
            0.0
        };
        h += steering_vector(theta, phi, params.spacing, cfg)? * C64::from_polar(magnitude, phase);
    }
    Ok(h)
}

/// Unitary change of basis between the spatial and angular domains.
#[derive(Debug, Clone)]
pub struct AngularTransform {
    basis: CMat,
}

impl AngularTransform {
    pub fn new(cfg: &SystemConfig) -> Result<Self> {
        Ok(Self {
            basis: dft_basis(cfg.n_v, cfg.n_h)?,
        })
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    /// `Uᴴ·h`.
    pub fn to_angular(&self, h_spatial: &CVec) -> Result<CVec> {
        check_len("to_angular", self.basis.nrows(), h_spatial.len())?;
        Ok(self.basis.ad_mul(h_spatial))
    }

    /// `U·h`.
    pub fn to_spatial(&self, h_angular: &CVec) -> Result<CVec> {
        check_len("to_spatial", self.basis.nrows(), h_angular.len())?;
        Ok(&self.basis * h_angular)
    }
}

/// Fraction of `‖h‖₂²` held by the `k` largest-modulus entries.
pub fn sparsity_stats(h: &CVec, k: usize) -> Result<f64> {
    if k == 0 || k > h.len() {
        return Err(Error::InvalidParameter(format!(
            "top-k size {k} outside 1..={}",
            h.len()
        )));
    }
    let mut energy: Vec<f64> = h.iter().map(|v| v.norm_sqr()).collect();
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    energy.sort_by(|a, b| b.total_cmp(a));
    Ok(energy[..k].iter().sum::<f64>() / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UncertaintyKind {
    L1,
    L2,
}

/// Norm ball around each user's estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyModel {
    pub kind: UncertaintyKind,
    pub radii: Vec<f64>,
}

impl UncertaintyModel {
    pub fn new(kind: UncertaintyKind, radii: Vec<f64>) -> Result<Self> {
        if let Some(r) = radii.iter().find(|r| !(**r >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative uncertainty radius {r}")));
        }
        Ok(Self { kind, radii })
    }

    /// Radii `ε_k = ε·‖h_k‖₂`.
    pub fn relative(kind: UncertaintyKind, epsilon: f64, channels: &[CVec]) -> Result<Self> {
        Self::new(kind, channels.iter().map(|h| epsilon * h.norm()).collect())
    }

    pub fn contains(&self, user: usize, delta: &CVec) -> bool {
        let n = norms(delta);
        let size = match self.kind {
            UncertaintyKind::L1 => n.l1,
            UncertaintyKind::L2 => n.l2,
        };
        size <= self.radii[user]
    }
}

/// Synthesizes a sparse error strictly inside the ball of `radius`.
///
/// The support holds `⌈support_size/2⌉` of the strongest entries of
/// `h_true` plus uniformly drawn indices from the rest. The ball norm of
/// the result is `ρ·radius` with `ρ ~ U(0, 1)`; magnitudes on the support
/// are Dirichlet(1, …, 1) shares of that total and phases are uniform.
pub fn sample_error<R: Rng + ?Sized>(
    kind: UncertaintyKind,
    radius: f64,
    support_size: usize,
    h_true: &CVec,
    rng: &mut R,
) -> Result<CVec> {
    let n = h_true.len();
    if !(radius >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative uncertainty radius {radius}")));
    }
    if support_size > n {
        return Err(Error::InvalidParameter(format!(
            "error support {support_size} exceeds vector length {n}"
        )));
    }
    let mut delta = CVec::zeros(n);
    if support_size == 0 {
        return Ok(delta);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| h_true[b].norm_sqr().total_cmp(&h_true[a].norm_sqr()).then(a.cmp(&b)));
    let strong = support_size.div_ceil(2);
    let mut support: Vec<usize> = order[..strong].to_vec();
    let rest = &order[strong..];
    support.extend(
        index::sample(rng, rest.len(), support_size - strong)
            .iter()
            .map(|i| rest[i]),
    );

    let rho: f64 = rng.random();
    let shares: Vec<f64> = (0..support_size).map(|_| Exp1.sample(rng)).collect();
    let denom = match kind {
        UncertaintyKind::L1 => shares.iter().sum::<f64>(),
        UncertaintyKind::L2 => shares.iter().map(|s| s * s).sum::<f64>().sqrt(),
    };
    for (&i, s) in support.iter().zip(&shares) {
        let phase = rng.random::<f64>() * 2.0 * PI;
        delta[i] = C64::from_polar(rho * radius * s / denom, phase);
    }
    Ok(delta)
}

/// `ĥ = h − δ`.
pub fn make_estimate(h: &CVec, delta: &CVec) -> Result<CVec> {
    check_len("make_estimate", h.len(), delta.len())?;
    Ok(h - delta)
}

/// True channel, estimate and error of one user (angular domain).
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    pub h: CVec,
    pub h_hat: CVec,
    pub delta: CVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub users: Vec<UserChannel>,
}

impl ChannelSet {
    /// Assembles users from true channels and errors, computing `ĥ = h − δ`.
    pub fn from_errors(h: Vec<CVec>, delta: Vec<CVec>) -> Result<Self> {
        check_len("channel set", h.len(), delta.len())?;
        let users = h
            .into_iter()
            .zip(delta)
            .map(|(h, delta)| {
                let h_hat = make_estimate(&h, &delta)?;
                Ok(UserChannel { h, h_hat, delta })
            })
            .collect::<Result<_>>()?;
        Ok(Self { users })
    }

    pub fn true_channels(&self) -> Vec<CVec> {
        self.users.iter().map(|u| u.h.clone()).collect()
    }

    pub fn estimates(&self) -> Vec<CVec> {
        self.users.iter().map(|u| u.h_hat.clone()).collect()
    }

    /// Mean of `‖h_k‖₂²` over users; the reference for the noise rule.
    pub fn mean_channel_energy(&self) -> f64 {
        self.users.iter().map(|u| u.h.norm_squared()).sum::<f64>() / self.users.len() as f64
    }

    /// `N_t × K` matrix whose columns are the true channels.
    pub fn true_matrix(&self) -> CMat {
        CMat::from_columns(&self.true_channels())
    }
}

/// Everything needed to draw a reproducible channel set.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub system: SystemConfig,
    pub model: ChannelModelParams,
    pub kind: UncertaintyKind,
    /// Relative bound: `ε_k = epsilon·‖h_k‖₂`.
    pub epsilon: f64,
    pub support_size: usize,
}

impl ChannelDraw {
    /// Draws channels in the spatial domain, moves them to the angular
    /// domain and adds errors. Each user takes two substreams of `stream`
    /// (channel, error) so the error shape does not depend on `epsilon`.
    pub fn draw(&self, transform: &AngularTransform, stream: RngStream) -> Result<ChannelSet> {
        self.system.validate()?;
        let mut h = Vec::with_capacity(self.system.users);
        let mut delta = Vec::with_capacity(self.system.users);
        for k in 0..self.system.users {
            let user = stream.substream(k as u64);
            let spatial = gen_channel(&self.model, &self.system, &mut user.substream(0).rng())?;
            let angular = transform.to_angular(&spatial)?;
            let radius = self.epsilon * angular.norm();
            let d = sample_error(
                self.kind,
                radius,
                self.support_size,
                &angular,
                &mut user.substream(1).rng(),
            )?;
            h.push(angular);
            delta.push(d);
        }
        ChannelSet::from_errors(h, delta)
    }
}

/// On-disk channel set. Arrays hold `N_t` decimal floats each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFile {
    pub config: ChannelFileConfig,
    pub seed: u64,
    pub users: Vec<UserRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFileConfig {
    pub n_v: usize,
    pub n_h: usize,
    pub users: usize,
    pub epsilon: f64,
    pub uncertainty: UncertaintyKind,
    pub noise_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub h_re: Vec<f64>,
    pub h_im: Vec<f64>,
    pub hhat_re: Vec<f64>,
    pub hhat_im: Vec<f64>,
    pub delta_re: Vec<f64>,
    pub delta_im: Vec<f64>,
}

fn split(v: &CVec) -> (Vec<f64>, Vec<f64>) {
    (v.iter().map(|c| c.re).collect(), v.iter().map(|c| c.im).collect())
}

fn join(re: &[f64], im: &[f64], n: usize) -> Result<CVec> {
    check_len("channel file real part", n, re.len())?;
    check_len("channel file imaginary part", n, im.len())?;
    Ok(CVec::from_iterator(n, re.iter().zip(im).map(|(&a, &b)| C64::new(a, b))))
}

impl ChannelFile {
    pub fn new(config: ChannelFileConfig, seed: u64, set: &ChannelSet) -> Self {
        let users = set
            .users
            .iter()
            .map(|u| {
                let (h_re, h_im) = split(&u.h);
                let (hhat_re, hhat_im) = split(&u.h_hat);
                let (delta_re, delta_im) = split(&u.delta);
                UserRecord {
                    h_re,
                    h_im,
                    hhat_re,
                    hhat_im,
                    delta_re,
                    delta_im,
                }
            })
            .collect();
        Self { config, seed, users }
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig::new(self.config.n_v, self.config.n_h, self.config.users)
    }

    pub fn channel_set(&self) -> Result<ChannelSet> {
        let system = self.system();
        system.validate()?;
        check_len("channel file users", system.users, self.users.len())?;
        let n = system.n_t();
        let users = self
            .users
            .iter()
            .map(|r| {
                Ok(UserChannel {
                    h: join(&r.h_re, &r.h_im, n)?,
                    h_hat: join(&r.hhat_re, &r.hhat_im, n)?,
                    delta: join(&r.delta_re, &r.delta_im, n)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(ChannelSet { users })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
