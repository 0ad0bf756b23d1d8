//! Complex linear-algebra helpers, the angular-domain DFT basis and seeded
//! random streams.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::error::{check_len, Error, Result};

pub type C64 = Complex64;
/// Dense complex column vector.
pub type CVec = DVector<C64>;
/// Dense complex matrix.
pub type CMat = DMatrix<C64>;

/// Hermitian inner product `xᴴy`.
pub fn inner(x: &CVec, y: &CVec) -> Result<C64> {
    check_len("inner", x.len(), y.len())?;
    Ok(x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum())
}

/// The three vector norms used by the uncertainty models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

pub fn norms(x: &CVec) -> Norms {
    let mut l1 = 0.0;
    let mut sq = 0.0;
    let mut linf: f64 = 0.0;
    for v in x.iter() {
        let m = v.norm();
        l1 += m;
        sq += v.norm_sqr();
        linf = linf.max(m);
    }
    Norms {
        l1,
        l2: sq.sqrt(),
        linf,
    }
}

/// Unitary `n`-point DFT matrix, `F(m, k) = exp(-2πj·mk/n)/√n`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |m, k| {
        // reduce mk mod n first so large products keep full phase precision
        let r = ((m * k) % n) as f64;
        C64::from_polar(scale, -2.0 * PI * r / n as f64)
    })
}

/// Angular-domain basis of an `n_v × n_h` planar array: `F_{n_h} ⊗ F_{n_v}`,
/// which matches column-stacked `vec(H)` with the vertical index fastest.
pub fn dft_basis(n_v: usize, n_h: usize) -> Result<CMat> {
    if n_v == 0 || n_h == 0 {
        return Err(Error::InvalidParameter(format!(
            "array dimensions must be positive, got {n_v}×{n_h}"
        )));
    }
    Ok(dft_matrix(n_h).kronecker(&dft_matrix(n_v)))
}

/// Solves `M·X = B` for symmetric positive-definite `M` by Cholesky.
pub fn chol_solve(m: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_len("chol_solve rows", m.nrows(), b.nrows())?;
    check_len("chol_solve square", m.nrows(), m.ncols())?;
    let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    Ok(chol.solve(b))
}

/// Deterministic random stream identified by `(seed, stream)`.
///
/// Streams are split by mixing a child index into the stream id, so a
/// given `(seed, path of indices)` always reproduces the same draws no
/// matter which thread or in which order it is consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn substream(&self, index: u64) -> Self {
        Self {
            seed: self.seed,
            stream: splitmix64(self.stream ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn unit(n: usize, i: usize) -> CVec {
        CVec::from_fn(n, |k, _| if k == i { c(1.0, 0.0) } else { c(0.0, 0.0) })
    }

    #[test]
    fn inner_products() {
        assert_eq!(inner(&unit(3, 0), &unit(3, 0)).unwrap(), c(1.0, 0.0));
        assert_eq!(inner(&unit(3, 0), &unit(3, 1)).unwrap(), c(0.0, 0.0));
        let x = CVec::from_element(1, c(1.0, 1.0));
        let y = CVec::from_element(1, c(1.0, -1.0));
        assert_eq!(inner(&x, &y).unwrap(), c(0.0, -2.0));
        assert!(inner(&unit(2, 0), &unit(3, 0)).is_err());
    }

    #[test]
    fn norm_examples() {
        let n = norms(&CVec::from_vec(vec![c(3.0, 4.0), c(0.0, 0.0)]));
        assert_eq!((n.l1, n.l2, n.linf), (5.0, 5.0, 5.0));
        let n = norms(&CVec::from_element(4, c(1.0, 0.0)));
        assert_eq!((n.l1, n.l2, n.linf), (4.0, 2.0, 1.0));
        let n = norms(&CVec::from_vec(vec![c(1.0, 1.0), c(1.0, -1.0)]));
        assert!((n.l1 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((n.l2 - 2.0).abs() < 1e-15);
        assert!((n.linf - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn norm_ordering_on_random_vectors() {
        let mut rng = RngStream::new(7).rng();
        for _ in 0..1000 {
            let x = CVec::from_fn(32, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let n = norms(&x);
            assert!(n.linf <= n.l2 + 1e-15 && n.l2 <= n.l1 + 1e-15);
        }
    }

    #[test]
    fn dft_small_cases() {
        let u = dft_basis(1, 1).unwrap();
        assert_eq!(u, CMat::from_element(1, 1, c(1.0, 0.0)));
        let u = dft_basis(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let expect = [[s, s], [s, -s]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((u[(i, j)] - c(expect[i][j], 0.0)).norm() < 1e-15);
            }
        }
        assert!(dft_basis(0, 3).is_err());
    }

    #[test]
    fn dft_basis_is_unitary() {
        let u = dft_basis(4, 8).unwrap();
        let g = u.adjoint() * &u - CMat::identity(32, 32);
        let worst = g.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(worst <= 1e-12, "‖UᴴU − I‖_max = {worst}");
    }

    #[test]
    fn chol_solve_cases() {
        let b = DMatrix::from_vec(2, 1, vec![4.0, 6.0]);
        assert_eq!(chol_solve(&DMatrix::identity(2, 2), &b).unwrap(), b);
        let x = chol_solve(&(DMatrix::identity(2, 2) * 2.0), &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 3.0).abs() < 1e-15);

        let mut rng = RngStream::new(3).rng();
        let g = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let m = g.transpose() * &g + DMatrix::identity(5, 5);
        let b = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
        let x = chol_solve(&m, &b).unwrap();
        let resid = (&m * &x - &b).amax();
        assert!(resid <= 1e-9 * b.amax());

        let bad = DMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            chol_solve(&bad, &b.rows(0, 2).into_owned()),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let s = RngStream::new(42).substream(3);
        let a: Vec<u64> = (0..8)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        let b: Vec<u64> = (0..8)
            .map({
                let mut r = s.rng();
                move |_| r.random()
            })
            .collect();
        assert_eq!(a, b);
        let other: u64 = RngStream::new(42).substream(4).rng().random();
        assert_ne!(a[0], other);
    }

    proptest! {
        #[test]
        fn dft_is_isometric_and_invertible(re in prop::collection::vec(-5.0f64..5.0, 32),
                                           im in prop::collection::vec(-5.0f64..5.0, 32)) {
            let u = dft_basis(4, 8).unwrap();
            let x = CVec::from_fn(32, |i, _| c(re[i], im[i]));
            let y = u.adjoint() * &x;
            prop_assert!((y.norm() - x.norm()).abs() <= 1e-10);
            let back = &u * &y;
            prop_assert!((back - &x).iter().all(|d| d.norm() <= 1e-10));
        }
    }
}
