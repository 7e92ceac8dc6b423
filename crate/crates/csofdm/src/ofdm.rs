//! OFDM grid bookkeeping and partial-DFT operators.
//!
//! `F_{K,M}` is the first `M` columns of the size-`K` normalized DFT, so
//! `F_{K,M}ᴴ F_{K,M} = I_M`. `F_{N/K,M}` keeps the `N` evenly spaced rows
//! hit by a comb pilot pattern, giving `F_{N/K,M}ᴴ F_{N/K,M} = (N/K)·I_M`.
//! Both are applied FFT-style; the dense-matrix product is the test oracle.

use crate::error::{Error, Result};
use crate::linalg::CVector;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rustfft::{Fft, FftPlanner};
use std::io::Write;
use std::sync::Arc;

/// OFDM dimensions: `K` subcarriers, CP/FIR length `M`, `N` comb pilots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmGrid {
    dft_size: usize,
    fir_len: usize,
    pilot_count: usize,
}

impl OfdmGrid {
    /// Requires `M ≤ N ≤ K` and `K mod N = 0` (comb pattern).
    pub fn new(dft_size: usize, fir_len: usize, pilot_count: usize) -> Result<Self> {
        if fir_len == 0 || fir_len > pilot_count || pilot_count > dft_size {
            return Err(Error::InvalidArgument(format!(
                "grid needs M ≤ N ≤ K, got K={dft_size}, M={fir_len}, N={pilot_count}"
            )));
        }
        if dft_size % pilot_count != 0 {
            return Err(Error::InvalidArgument(format!(
                "comb pattern needs K mod N = 0, got K={dft_size}, N={pilot_count}"
            )));
        }
        Ok(OfdmGrid {
            dft_size,
            fir_len,
            pilot_count,
        })
    }

    pub fn dft_size(&self) -> usize {
        self.dft_size
    }

    pub fn fir_len(&self) -> usize {
        self.fir_len
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_count
    }

    /// `K/N`, the pilot comb stride.
    pub fn comb_stride(&self) -> usize {
        self.dft_size / self.pilot_count
    }
}

/// FFT plans for one grid. Immutable and shareable across threads.
pub struct DftOps {
    grid: OfdmGrid,
    fft_k: Arc<dyn Fft<f64>>,
    fft_n: Arc<dyn Fft<f64>>,
    ifft_n: Arc<dyn Fft<f64>>,
}

impl DftOps {
    pub fn new(grid: OfdmGrid) -> Self {
        let mut planner = FftPlanner::new();
        DftOps {
            grid,
            fft_k: planner.plan_fft_forward(grid.dft_size),
            fft_n: planner.plan_fft_forward(grid.pilot_count),
            ifft_n: planner.plan_fft_inverse(grid.pilot_count),
        }
    }

    pub fn grid(&self) -> &OfdmGrid {
        &self.grid
    }

    /// `F_{K,M} h`: the length-`K` normalized DFT image of an `M`-tap
    /// channel. Norm-preserving.
    pub fn f_km_apply(&self, h_m: &CVector) -> CVector {
        let k = self.grid.dft_size;
        assert!(h_m.len() <= k, "h_M longer than DFT size");
        let mut buf = vec![Complex64::default(); k];
        buf[..h_m.len()].copy_from_slice(h_m.as_slice());
        self.fft_k.process(&mut buf);
        let scale = 1.0 / (k as f64).sqrt();
        CVector::from_iterator(k, buf.into_iter().map(|z| z * scale))
    }

    /// `F_{N/K,M} h`: the channel image on the `N` pilot subcarriers.
    /// Row `i` of the comb is DFT row `i·K/N`, so this is an `N`-point DFT
    /// scaled by `1/√K`.
    pub fn f_nkm_apply(&self, h_m: &CVector) -> CVector {
        let n = self.grid.pilot_count;
        assert!(h_m.len() <= n, "h_M longer than pilot count");
        let mut buf = vec![Complex64::default(); n];
        buf[..h_m.len()].copy_from_slice(h_m.as_slice());
        self.fft_n.process(&mut buf);
        let scale = 1.0 / (self.grid.dft_size as f64).sqrt();
        CVector::from_iterator(n, buf.into_iter().map(|z| z * scale))
    }

    /// `F_{N/K,M}ᴴ v`: adjoint of the pilot-image operator;
    /// `(K/N)·F_{N/K,M}ᴴ F_{N/K,M} = I_M`.
    pub fn f_nkm_adjoint(&self, v: &CVector) -> CVector {
        let n = self.grid.pilot_count;
        assert_eq!(v.len(), n, "adjoint input must have pilot length");
        let mut buf = v.as_slice().to_vec();
        self.ifft_n.process(&mut buf); // unnormalized Σ e^{+j2πin/N}
        let scale = 1.0 / (self.grid.dft_size as f64).sqrt();
        CVector::from_iterator(
            self.grid.fir_len,
            buf.into_iter().take(self.grid.fir_len).map(|z| z * scale),
        )
    }

    /// Rebuilds the full `K`-point channel image from its pilot image:
    /// `h_K = F_{K,M} (K/N) F_{N/K,M}ᴴ h_{N/K}`. Exact whenever `h_{N/K}`
    /// is consistent with some `M`-tap channel.
    pub fn reconstruct_hk_from_pilot_image(&self, h_nk: &CVector) -> CVector {
        let ratio = self.grid.comb_stride() as f64;
        let h_m = self.f_nkm_adjoint(h_nk) * Complex64::new(ratio, 0.0);
        self.f_km_apply(&h_m)
    }
}

/// One-shot `F_{K,M}` application without building a grid.
pub fn f_km_apply(h_m: &CVector, dft_size: usize) -> CVector {
    assert!(h_m.len() <= dft_size);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(dft_size);
    let mut buf = vec![Complex64::default(); dft_size];
    buf[..h_m.len()].copy_from_slice(h_m.as_slice());
    fft.process(&mut buf);
    let scale = 1.0 / (dft_size as f64).sqrt();
    CVector::from_iterator(dft_size, buf.into_iter().map(|z| z * scale))
}

/// Received pilot frame: `y = D(x)·F_{N/K,M}h_M + z`.
#[derive(Debug, Clone)]
pub struct PilotObservation {
    /// Received pilot subcarriers `y_N`.
    pub received: CVector,
    /// Transmitted unit-modulus pilot symbols `x_N`.
    pub pilots: CVector,
    /// Complex noise variance per pilot subcarrier.
    pub noise_var: f64,
    /// De-rotated observation `D(x_N)ᴴ y_N`, what the estimators consume.
    pub derotated: CVector,
}

impl PilotObservation {
    /// Debug dump: `subcarrier_index,re_y,im_y` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "subcarrier_index,re_y,im_y")?;
        for (i, z) in self.received.iter().enumerate() {
            writeln!(w, "{},{},{}", i, z.re, z.im)?;
        }
        Ok(())
    }
}

/// All-ones pilots: the minimum-MSE choice under a power constraint.
pub fn unit_pilots(n: usize) -> CVector {
    CVector::from_element(n, Complex64::new(1.0, 0.0))
}

/// Random QPSK pilots; unit modulus, exercises the de-rotation path.
pub fn qpsk_pilots<R: Rng>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re = if rng.gen::<bool>() { s } else { -s };
        let im = if rng.gen::<bool>() { s } else { -s };
        Complex64::new(re, im)
    })
}

/// Synthesizes one pilot observation with circular complex AWGN of
/// variance `sigma2` per subcarrier. Pilots must be unit modulus.
pub fn observe_pilots<R: Rng>(
    h_m: &CVector,
    ops: &DftOps,
    pilots: &CVector,
    sigma2: f64,
    rng: &mut R,
) -> Result<PilotObservation> {
    let n = ops.grid().pilot_count();
    if pilots.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} pilots, got {}",
            pilots.len()
        )));
    }
    if pilots.iter().any(|x| (x.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::InvalidArgument(
            "pilot symbols must have unit modulus".into(),
        ));
    }
    if sigma2 < 0.0 {
        return Err(Error::InvalidArgument("noise variance must be ≥ 0".into()));
    }
    let h_nk = ops.f_nkm_apply(h_m);
    let mut received = CVector::from_fn(n, |i, _| pilots[i] * h_nk[i]);
    if sigma2 > 0.0 {
        let comp = Normal::new(0.0, (sigma2 / 2.0).sqrt()).expect("valid std");
        for i in 0..n {
            received[i] += Complex64::new(comp.sample(rng), comp.sample(rng));
        }
    }
    let derotated = CVector::from_fn(n, |i, _| pilots[i].conj() * received[i]);
    Ok(PilotObservation {
        received,
        pilots: pilots.clone(),
        noise_var: sigma2,
        derotated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use crate::rng::substream;
    use std::f64::consts::TAU;

    /// Dense oracle for `F_{K,M}`.
    fn f_km_dense(k: usize, m: usize) -> CMatrix {
        CMatrix::from_fn(k, m, |row, col| {
            Complex64::from_polar(
                1.0 / (k as f64).sqrt(),
                -TAU * (row as f64) * (col as f64) / k as f64,
            )
        })
    }

    /// Dense oracle for `F_{N/K,M}`: alternated N-of-K rows.
    fn f_nkm_dense(k: usize, m: usize, n: usize) -> CMatrix {
        let stride = k / n;
        CMatrix::from_fn(n, m, |row, col| {
            Complex64::from_polar(
                1.0 / (k as f64).sqrt(),
                -TAU * ((row * stride) as f64) * (col as f64) / k as f64,
            )
        })
    }

    fn random_vec(len: usize, seed: u64) -> CVector {
        let mut rng = substream(seed, &[0]);
        CVector::from_fn(len, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let grid = OfdmGrid::new(8, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let mut e0 = CVector::zeros(4);
        e0[0] = Complex64::new(1.0, 0.0);
        let hk = ops.f_km_apply(&e0);
        for z in hk.iter() {
            assert!((z.norm() - 1.0 / 8f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn f_km_matches_dense_oracle() {
        let grid = OfdmGrid::new(8, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 1);
        let fast = ops.f_km_apply(&h);
        let dense = f_km_dense(8, 4) * &h;
        assert!((fast - dense).norm() < 1e-12);
    }

    #[test]
    fn f_nkm_matches_dense_oracle() {
        let grid = OfdmGrid::new(8, 4, 4).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 2);
        let fast = ops.f_nkm_apply(&h);
        let dense = f_nkm_dense(8, 4, 4) * &h;
        assert!((fast - dense).norm() < 1e-12);

        let v = random_vec(4, 3);
        let fast_adj = ops.f_nkm_adjoint(&v);
        let dense_adj = f_nkm_dense(8, 4, 4).adjoint() * &v;
        assert!((fast_adj - dense_adj).norm() < 1e-12);
    }

    #[test]
    fn parseval_and_subsampling_identity() {
        let grid = OfdmGrid::new(32, 8, 16).unwrap();
        let ops = DftOps::new(grid);
        for seed in 0..20 {
            let h = random_vec(8, 100 + seed);
            let hk = ops.f_km_apply(&h);
            assert!((hk.norm() - h.norm()).abs() < 1e-12);
            let back = ops.f_nkm_adjoint(&ops.f_nkm_apply(&h)) * Complex64::new(2.0, 0.0);
            assert!((back - &h).norm() < 1e-10);
        }
    }

    #[test]
    fn pilot_image_reduces_to_full_dft_when_n_equals_k() {
        let grid = OfdmGrid::new(8, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 4);
        assert!((ops.f_nkm_apply(&h) - ops.f_km_apply(&h)).norm() < 1e-12);
    }

    #[test]
    fn reconstruction_round_trip() {
        let grid = OfdmGrid::new(16, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 5);
        let hk = ops.reconstruct_hk_from_pilot_image(&ops.f_nkm_apply(&h));
        assert!((hk - ops.f_km_apply(&h)).norm() < 1e-10);
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let grid = OfdmGrid::new(16, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 6);
        let mut rng = substream(7, &[0]);
        let x = qpsk_pilots(8, &mut rng);
        let obs = observe_pilots(&h, &ops, &x, 0.0, &mut rng).unwrap();
        let expect = ops.f_nkm_apply(&h);
        for i in 0..8 {
            assert!((obs.received[i] - x[i] * expect[i]).norm() < 1e-12);
            assert!((obs.derotated[i] - expect[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn noise_power_matches_variance() {
        let grid = OfdmGrid::new(16, 4, 16).unwrap();
        let ops = DftOps::new(grid);
        let h = CVector::zeros(4);
        let x = unit_pilots(16);
        let sigma2 = 0.37;
        let mut total = 0.0;
        let trials = 10_000usize;
        let mut rng = substream(8, &[0]);
        for _ in 0..trials {
            let obs = observe_pilots(&h, &ops, &x, sigma2, &mut rng).unwrap();
            total += obs.received.norm_squared();
        }
        let mean = total / trials as f64;
        let expect = 16.0 * sigma2;
        assert!(
            (mean - expect).abs() < 0.03 * expect,
            "E‖z‖² = {mean}, expected {expect}"
        );
    }

    #[test]
    fn non_unit_pilots_rejected() {
        let grid = OfdmGrid::new(8, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 9);
        let mut x = unit_pilots(8);
        x[3] = Complex64::new(1.1, 0.0);
        let mut rng = substream(9, &[0]);
        assert!(matches!(
            observe_pilots(&h, &ops, &x, 0.1, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_validation() {
        assert!(OfdmGrid::new(8, 4, 3).is_err()); // K mod N ≠ 0
        assert!(OfdmGrid::new(8, 5, 4).is_err()); // M > N
        assert!(OfdmGrid::new(8, 4, 16).is_err()); // N > K
        assert!(OfdmGrid::new(512, 128, 128).is_ok());
    }

    #[test]
    fn observation_csv_dump() {
        let grid = OfdmGrid::new(8, 4, 8).unwrap();
        let ops = DftOps::new(grid);
        let h = random_vec(4, 10);
        let mut rng = substream(10, &[0]);
        let obs = observe_pilots(&h, &ops, &unit_pilots(8), 0.0, &mut rng).unwrap();
        let mut buf = Vec::new();
        obs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("subcarrier_index,re_y,im_y\n"));
        assert_eq!(text.lines().count(), 9);
    }
}
