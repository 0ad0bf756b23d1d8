//! Brute-force reference computations shared by the integration tests.

#![allow(dead_code)]

use sparsebeam::{CMat, CVec, C64};
use std::f64::consts::PI;

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimizes a unimodal `f` on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - GOLDEN * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + GOLDEN * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    let candidates = [(x, f(x)), (x1, f1), (x2, f2)];
    candidates
        .into_iter()
        .fold((x, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b })
}

/// `(ĥ + δ)ᴴw` for `δ = t·ε·e^{jφ}·e_n`.
fn perturbed_gain(h: &CVec, w: &CVec, n: usize, delta: C64) -> C64 {
    let mut g: C64 = h.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
    g += delta.conj() * w[n];
    g
}

/// Minimum of `|(ĥ+δ)ᴴw|` over the l1 ball by scanning the segments from
/// the center to every extreme point on a `phases`-point grid, then
/// refining the best phase and the position along the segment.
pub fn grid_wc_num(h: &CVec, eps: f64, w: &CVec, phases: usize) -> f64 {
    let mut best = perturbed_gain(h, w, 0, C64::new(0.0, 0.0)).norm();
    let step = 2.0 * PI / phases as f64;
    for n in 0..h.len() {
        let along = |phi: f64, t: f64| perturbed_gain(h, w, n, C64::from_polar(t * eps, phi)).norm();
        let (mut best_p, mut best_v) = (0usize, f64::INFINITY);
        for p in 0..phases {
            let v = along(p as f64 * step, 1.0);
            if v < best_v {
                best_v = v;
                best_p = p;
            }
        }
        let centre = best_p as f64 * step;
        let (mut phi, _) = golden_min(|phi| along(phi, 1.0), centre - step, centre + step);
        best = best.min(along(phi, 1.0));
        // |c + t·z| is convex in t: the clamp case sits inside the segment,
        // where phase and position are refined alternately.
        let mut t = 1.0;
        for _ in 0..4 {
            t = golden_min(|t| along(phi, t), 0.0, 1.0).0;
            phi = golden_min(|p| along(p, t), phi - step, phi + step).0;
        }
        best = best.min(along(phi, t));
    }
    best
}

/// Maximum of `‖[(ĥ+δ)ᴴW, σ]‖₂` over the extreme points of the l1 ball,
/// by phase grid plus golden-section refinement.
pub fn grid_wc_den(h: &CVec, eps: f64, w: &CMat, sigma: f64, phases: usize) -> f64 {
    let value = |n: usize, phi: f64| {
        let delta = C64::from_polar(eps, phi);
        let energy: f64 = (0..w.ncols())
            .map(|k| perturbed_gain(h, &w.column(k).into_owned(), n, delta).norm_sqr())
            .sum();
        (energy + sigma * sigma).sqrt()
    };
    let step = 2.0 * PI / phases as f64;
    let mut best = value(0, 0.0);
    for n in 0..h.len() {
        let (mut best_p, mut best_v) = (0usize, f64::NEG_INFINITY);
        for p in 0..phases {
            let v = value(n, p as f64 * step);
            if v > best_v {
                best_v = v;
                best_p = p;
            }
        }
        let centre = best_p as f64 * step;
        let (_, neg) = golden_min(|phi| -value(n, phi), centre - step, centre + step);
        best = best.max(-neg).max(best_v);
    }
    best
}

/// Optimal single-user robust power for `N_t = 2` by exhaustive search
/// over beam directions `u = (cos a, sin a·e^{jφ})`.
///
/// With `w = r·u` and the common phase chosen to make `ĥᴴu` real, the
/// design constraint reads `r²·D(u) ≥ σ²` with
/// `D = β²(|ĥᴴu| − ε·m)² − |ĥᴴu|² − ε²m²` and `m = ‖u‖_∞` (l1 ball) or
/// `m = 1` (l2 ball), so the optimum is `σ² / max_u D(u)`.
pub fn brute_force_single_user(h: &CVec, gamma: f64, sigma: f64, eps: f64, l1: bool, grid: usize) -> Option<f64> {
    assert_eq!(h.len(), 2);
    let beta2 = 1.0 + 1.0 / gamma;
    let d = |a: f64, phi: f64| {
        let u = [C64::new(a.cos(), 0.0), C64::from_polar(a.sin(), phi)];
        let c = (h[0].conj() * u[0] + h[1].conj() * u[1]).norm();
        let m = if l1 { a.cos().abs().max(a.sin().abs()) } else { 1.0 };
        let lead = c - eps * m;
        if lead <= 0.0 {
            return f64::NEG_INFINITY;
        }
        beta2 * lead * lead - c * c - eps * eps * m * m
    };
    let (mut best, mut at) = (f64::NEG_INFINITY, (0.0, 0.0));
    for i in 0..=grid {
        let a = 0.5 * PI * i as f64 / grid as f64;
        for j in 0..grid {
            let phi = 2.0 * PI * j as f64 / grid as f64;
            let v = d(a, phi);
            if v > best {
                best = v;
                at = (a, phi);
            }
        }
    }
    // Coordinate refinement around the best grid point.
    let (da, dp) = (0.5 * PI / grid as f64, 2.0 * PI / grid as f64);
    let (mut a, mut phi) = at;
    for _ in 0..20 {
        a = golden_min(|x| -d(x, phi), (a - da).max(0.0), (a + da).min(0.5 * PI)).0;
        phi = golden_min(|x| -d(a, x), phi - dp, phi + dp).0;
    }
    let best = best.max(d(a, phi));
    (best > 0.0).then(|| sigma * sigma / best)
}
