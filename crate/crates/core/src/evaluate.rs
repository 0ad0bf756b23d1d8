//! SINR evaluation and worst-case checks over l1 error balls.
//!
//! The numerator and denominator oracles are exact for the decoupled worst
//! case: the signal term is minimized and the interference-plus-noise term
//! maximized independently over the ball. Both optima sit at the ball's
//! extreme points `ε·e^{jφ}·e_n`, where `δᴴw = ε·e^{−jφ}·w(n)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_error, UncertaintyKind};
use crate::coneprog::ProblemSpec;
use crate::error::{check_len, Error, Result};
use crate::numerics::{inner, norms, CMat, CVec, RngStream, C64};
use crate::scheme::{solve_scheme, Scheme};
use crate::solver::SolverSettings;

/// Margin below which a user is not certified.
pub const CERTIFY_SLACK: f64 = 1e-6;

fn check_dims(channels: &[CVec], w: &CMat) -> Result<()> {
    check_len("beamformer columns", channels.len(), w.ncols())?;
    for h in channels {
        check_len("beamformer rows", h.len(), w.nrows())?;
    }
    Ok(())
}

/// `hᴴW` as a row of per-user gains.
fn gains(h: &CVec, w: &CMat) -> Vec<C64> {
    (0..w.ncols())
        .map(|j| h.iter().zip(w.column(j).iter()).map(|(a, b)| a.conj() * b).sum())
        .collect()
}

/// SINR of every user for the given channels.
pub fn sinr_all(channels: &[CVec], w: &CMat, sigma: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    check_dims(channels, w)?;
    Ok(channels
        .iter()
        .enumerate()
        .map(|(k, h)| sinr_one(h, w, k, sigma))
        .collect())
}

fn sinr_one(h: &CVec, w: &CMat, k: usize, sigma: f64) -> f64 {
    let g = gains(h, w);
    let interference: f64 = g
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, v)| v.norm_sqr())
        .sum();
    g[k].norm_sqr() / (interference + sigma * sigma)
}

/// `min_{‖δ‖₁≤ε} |(ĥ+δ)ᴴw| = max(|ĥᴴw| − ε‖w‖_∞, 0)`.
pub fn wc_num_l1(h_hat: &CVec, eps: f64, w: &CVec) -> Result<f64> {
    let nominal = inner(h_hat, w)?.norm();
    Ok((nominal - eps * norms(w).linf).max(0.0))
}

/// `max_{‖δ‖₁≤ε} ‖[(ĥ+δ)ᴴW, σ]‖₂`, attained at the row `v(n)` maximizing
/// `‖a‖² + 2ε|⟨a, v(n)⟩| + ε²‖v(n)‖²` with `a = ĥᴴW`.
pub fn wc_den_l1(h_hat: &CVec, eps: f64, w: &CMat, sigma: f64) -> Result<f64> {
    check_len("wc_den_l1", h_hat.len(), w.nrows())?;
    let a = gains(h_hat, w);
    let a_sq: f64 = a.iter().map(|v| v.norm_sqr()).sum();
    let worst = w
        .row_iter()
        .map(|row| {
            let cross: C64 = a.iter().zip(row.iter()).map(|(ai, vi)| ai.conj() * vi).sum();
            let v_sq: f64 = row.iter().map(|v| v.norm_sqr()).sum();
            a_sq + 2.0 * eps * cross.norm() + eps * eps * v_sq
        })
        .fold(a_sq, f64::max);
    Ok((worst + sigma * sigma).sqrt())
}

/// Decoupled worst-case check of one user.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub user: usize,
    /// Lower bound on `|h_kᴴw_k|` over the ball.
    pub numerator: f64,
    /// Upper bound on `‖[h_kᴴW, σ]‖₂` over the ball.
    pub denominator: f64,
    /// `β_k·numerator − denominator`.
    pub margin: f64,
    pub certified: bool,
}

/// Certifies every user; a certified user meets its SINR target for every
/// channel in its l1 ball.
pub fn certify(h_hats: &[CVec], radii: &[f64], w: &CMat, sigma: f64, gammas: &[f64]) -> Result<Vec<Certificate>> {
    check_dims(h_hats, w)?;
    check_len("certify radii", h_hats.len(), radii.len())?;
    check_len("certify targets", h_hats.len(), gammas.len())?;
    h_hats
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let numerator = wc_num_l1(h, radii[k], &w.column(k).into_owned())?;
            let denominator = wc_den_l1(h, radii[k], w, sigma)?;
            let beta = (1.0 + 1.0 / gammas[k]).sqrt();
            let margin = beta * numerator - denominator;
            Ok(Certificate {
                user: k,
                numerator,
                denominator,
                margin,
                certified: margin >= -CERTIFY_SLACK,
            })
        })
        .collect()
}

/// Monte Carlo search for the smallest SINR over each user's l1 ball.
///
/// Every extreme point `ε·e^{jφ}·e_n` on a `phases`-point grid is tried,
/// then `samples` random sparse errors drawn from `stream` (half of them
/// pushed onto the ball's surface). The error enters numerator and
/// denominator jointly, so the result upper-bounds the true worst case.
pub fn mc_min_sinr(
    h_hats: &[CVec],
    radii: &[f64],
    w: &CMat,
    sigma: f64,
    samples: usize,
    phases: usize,
    stream: RngStream,
) -> Result<Vec<f64>> {
    check_dims(h_hats, w)?;
    check_len("mc_min_sinr radii", h_hats.len(), radii.len())?;
    if samples == 0 {
        return Err(Error::InvalidParameter("need at least one Monte Carlo sample".into()));
    }
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise level must be positive, got {sigma}"
        )));
    }
    let n_t = w.nrows();
    h_hats
        .iter()
        .enumerate()
        .map(|(k, h_hat)| {
            let eps = radii[k];
            let mut best = sinr_one(h_hat, w, k, sigma);
            if eps == 0.0 {
                return Ok(best);
            }
            let mut h = h_hat.clone();
            for n in 0..n_t {
                for p in 0..phases {
                    let phi = 2.0 * std::f64::consts::PI * p as f64 / phases as f64;
                    h[n] = h_hat[n] + C64::from_polar(eps, phi);
                    best = best.min(sinr_one(&h, w, k, sigma));
                }
                h[n] = h_hat[n];
            }
            let mut rng = stream.substream(k as u64).rng();
            for i in 0..samples {
                let support = 1 + i % 4.min(n_t);
                let mut delta = sample_error(UncertaintyKind::L1, eps, support, h_hat, &mut rng)?;
                if rng.random::<bool>() {
                    let l1 = norms(&delta).l1;
                    if l1 > 0.0 {
                        delta *= C64::new(eps / l1, 0.0);
                    }
                }
                best = best.min(sinr_one(&(h_hat + delta), w, k, sigma));
            }
            Ok(best)
        })
        .collect()
}

/// Optimal powers of the l1 and l2 robust designs on the same estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceCheck {
    pub p_l1: f64,
    pub p_l2: f64,
    /// `None` when either design failed to solve.
    pub dominance: Option<bool>,
}

/// Solves both robust designs for `spec` (its `kind` is overridden) and
/// checks `p_l1 ≤ p_l2 + 1e-6·max(1, p_l2)`.
pub fn dominance_check(spec: &ProblemSpec, settings: &SolverSettings) -> Result<DominanceCheck> {
    let l1 = solve_scheme(
        Scheme::L1Robust,
        &ProblemSpec {
            kind: UncertaintyKind::L1,
            ..spec.clone()
        },
        settings,
        None,
    )?;
    let l2 = solve_scheme(
        Scheme::L2Robust,
        &ProblemSpec {
            kind: UncertaintyKind::L2,
            ..spec.clone()
        },
        settings,
        None,
    )?;
    let (p_l1, p_l2) = (l1.power(), l2.power());
    let dominance = (l1.result.is_optimal() && l2.result.is_optimal()).then(|| p_l1 <= p_l2 + 1e-6 * p_l2.max(1.0));
    Ok(DominanceCheck { p_l1, p_l2, dominance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coneprog::DenominatorBound;
    use proptest::prelude::*;
    use rand::Rng;

    fn cvec(v: &[(f64, f64)]) -> CVec {
        CVec::from_iterator(v.len(), v.iter().map(|&(a, b)| C64::new(a, b)))
    }

    fn random_cmat(rows: usize, cols: usize, seed: u64) -> CMat {
        let mut rng = RngStream::new(seed).rng();
        CMat::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn sinr_examples() {
        let h = vec![cvec(&[(1.0, 0.0), (0.0, 0.0)]), cvec(&[(0.0, 0.0), (2.0, 0.0)])];
        let w = CMat::identity(2, 2);
        let s = sinr_all(&h, &w, 1.0).unwrap();
        assert_eq!(s, vec![1.0, 4.0]);
        // Crosstalk: user 0 sees gain 1 on its own beam and 1 on the other.
        let h = vec![cvec(&[(1.0, 0.0), (1.0, 0.0)]), cvec(&[(0.0, 0.0), (1.0, 0.0)])];
        let s = sinr_all(&h, &w, 1.0).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!(sinr_all(&h, &w, 0.0).is_err());
        assert!(sinr_all(&h[..1], &w, 1.0).is_err());
    }

    #[test]
    fn worst_case_examples() {
        let h = cvec(&[(1.0, 0.0), (0.0, 0.0)]);
        let w = cvec(&[(1.0, 0.0), (0.5, 0.0)]);
        assert!((wc_num_l1(&h, 0.5, &w).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(wc_num_l1(&h, 1.5, &w).unwrap(), 0.0);
        // One user: the worst row is the largest entry, pushed in phase.
        let wm = CMat::from_column_slice(2, 1, w.as_slice());
        let den = wc_den_l1(&h, 0.5, &wm, 1.0).unwrap();
        assert!((den - (1.5f64.powi(2) + 1.0).sqrt()).abs() < 1e-15);
        assert_eq!(wc_den_l1(&h, 0.0, &wm, 1.0).unwrap(), 2f64.sqrt());
    }

    proptest! {
        #[test]
        fn triangle_bound_dominates_worst_case(seed in any::<u64>(), eps in 0.0f64..2.0) {
            let w = random_cmat(6, 3, seed);
            let h = random_cmat(6, 1, seed ^ 1).column(0).into_owned();
            let sigma = 0.3;
            let a = gains(&h, &w);
            let nominal = (a.iter().map(|v| v.norm_sqr()).sum::<f64>() + sigma * sigma).sqrt();
            let alpha = w.row_iter().map(|r| r.norm()).fold(0.0, f64::max);
            let exact = wc_den_l1(&h, eps, &w, sigma).unwrap();
            prop_assert!(exact >= nominal - 1e-12);
            prop_assert!(exact <= nominal + eps * alpha + 1e-12);
        }
    }

    #[test]
    fn stacked_bound_can_underestimate() {
        // ĥᴴW aligned with the heaviest row: the cross term is not small.
        let h = cvec(&[(1.0, 0.0), (0.0, 0.0)]);
        let w = CMat::from_row_slice(2, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let (eps, sigma) = (0.5, 0.1);
        let stacked = (1.0f64 + eps * eps + sigma * sigma).sqrt();
        let exact = wc_den_l1(&h, eps, &w, sigma).unwrap();
        assert!(exact > stacked + 0.3);
    }

    #[test]
    fn certificate_bounds_monte_carlo() {
        for seed in 0..10 {
            let w = random_cmat(5, 2, 50 + seed);
            let h: Vec<CVec> = (0..2)
                .map(|k| random_cmat(5, 1, 60 + 2 * seed + k).column(0).into_owned() * C64::new(2.0, 0.0))
                .collect();
            let radii = [0.3, 0.1];
            let sigma = 0.4;
            let mc = mc_min_sinr(&h, &radii, &w, sigma, 2000, 32, RngStream::new(seed)).unwrap();
            let nominal = sinr_all(&h, &w, sigma).unwrap();
            for k in 0..2 {
                let num = wc_num_l1(&h[k], radii[k], &w.column(k).into_owned()).unwrap();
                let den = wc_den_l1(&h[k], radii[k], &w, sigma).unwrap();
                let lower = num * num / (den * den - num * num);
                assert!(mc[k] >= lower * (1.0 - 1e-12), "seed {seed} user {k}");
                assert!(mc[k] <= nominal[k]);
            }
        }
    }

    #[test]
    fn certify_flags_weak_beamformers() {
        let h = vec![cvec(&[(1.0, 0.0), (0.0, 0.0)])];
        let strong = CMat::from_column_slice(2, 1, &[C64::new(3.0, 0.0), C64::new(0.0, 0.0)]);
        let c = certify(&h, &[0.1], &strong, 0.1, &[1.0]).unwrap();
        assert!(c[0].certified && c[0].margin > 0.0);
        let weak = CMat::from_column_slice(2, 1, &[C64::new(0.01, 0.0), C64::new(0.0, 0.0)]);
        let c = certify(&h, &[0.1], &weak, 0.1, &[1.0]).unwrap();
        assert!(!c[0].certified);
        assert!(certify(&h, &[0.1, 0.1], &strong, 0.1, &[1.0]).is_err());
    }

    #[test]
    fn dominance_on_a_small_instance() {
        let h: Vec<CVec> = (0..2)
            .map(|k| random_cmat(4, 1, 70 + k).column(0).into_owned() * C64::new(2.0, 0.0))
            .collect();
        let spec = ProblemSpec {
            radii: h.iter().map(|v| 0.05 * v.norm()).collect(),
            channels: h,
            gammas: vec![1.5; 2],
            sigma: 0.3,
            kind: UncertaintyKind::L1,
            bound: DenominatorBound::Stacked,
        };
        let check = dominance_check(&spec, &SolverSettings::default()).unwrap();
        assert_eq!(check.dominance, Some(true), "{check:?}");
        assert!(check.p_l1 < check.p_l2);
    }
}
