//! Estimation-error covariance models and the OMP error-split probe.
//!
//! Every covariance here has the sandwich form `Σ = F_{K,M}·inner·F_{K,M}ᴴ`
//! with an `M×M` inner term: a scaled identity for the non-sparse LS
//! benchmark (making `F·Fᴴ` the familiar periodic-sinc interpolation
//! kernel), a rank-`L` projector for the genie, and an empirical average of
//! noise-projection plus missed-subspace terms for the CS estimators.

use super::{run_omp_with, ChannelEstimate, DelayDictionary, DictionaryConfig};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, pinv, CMatrix, CVector};
use crate::multipath::{ChannelModel, MpcSet, PulseShape};
use crate::ofdm::{observe_pilots, unit_pilots, DftOps, OfdmGrid};
use crate::rng::substream;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCovKind {
    MlMClosedForm,
    GenieClosedForm,
    CsEmpirical,
}

#[derive(Debug, Clone)]
pub struct ErrorCovModel {
    pub kind: ErrorCovKind,
    /// Per-coefficient MSE ν² = trace(Σ)/K.
    pub nu2: f64,
    /// The `M×M` term between `F_{K,M}` and `F_{K,M}ᴴ`.
    pub inner: CMatrix,
    /// Number of trials averaged (empirical kind only).
    pub sample_count: usize,
}

impl ErrorCovModel {
    /// Materializes the full `K×K` covariance. Dense; test scale only.
    pub fn full_matrix(&self, dft_size: usize) -> CMatrix {
        let m = self.inner.nrows();
        let f = f_km_dense(dft_size, m);
        &f * &self.inner * f.adjoint()
    }
}

/// First `M` columns of the size-`K` normalized DFT, dense.
pub(crate) fn f_km_dense(k: usize, m: usize) -> CMatrix {
    CMatrix::from_fn(k, m, |row, col| {
        Complex64::from_polar(
            1.0 / (k as f64).sqrt(),
            -2.0 * PI * (row as f64) * (col as f64) / k as f64,
        )
    })
}

/// Non-sparse LS/ML error covariance: `Σ = (K/N)σ²·F_{K,M}F_{K,M}ᴴ`,
/// rank `M`, per-coefficient MSE ν² = (M/N)σ².
pub fn error_cov_ml_m(grid: &OfdmGrid, sigma2: f64) -> ErrorCovModel {
    let m = grid.fir_len();
    let scale = grid.comb_stride() as f64 * sigma2;
    ErrorCovModel {
        kind: ErrorCovKind::MlMClosedForm,
        nu2: m as f64 / grid.pilot_count() as f64 * sigma2,
        inner: CMatrix::identity(m, m) * Complex64::new(scale, 0.0),
        sample_count: 0,
    }
}

/// Closed-form entries of the ML-M covariance: a Dirichlet (periodic-sinc)
/// kernel in the subcarrier index difference.
///
/// `Σ[i,j] = (K/N)σ²·(1/K)·e^{-jπ(M-1)Δ/K}·sin(πMΔ/K)/sin(πΔ/K)`, Δ = i−j.
pub fn ml_m_cov_closed_form(grid: &OfdmGrid, sigma2: f64) -> CMatrix {
    let k = grid.dft_size();
    let m = grid.fir_len() as f64;
    let scale = grid.comb_stride() as f64 * sigma2 / k as f64;
    CMatrix::from_fn(k, k, |i, j| {
        let delta = i as f64 - j as f64;
        if delta == 0.0 {
            Complex64::new(scale * m, 0.0)
        } else {
            let ratio = (PI * m * delta / k as f64).sin() / (PI * delta / k as f64).sin();
            Complex64::from_polar(scale * ratio, -PI * (m - 1.0) * delta / k as f64)
        }
    })
}

/// Genie-aided LS error covariance: inner term `(K/N)σ²·P P⁺` has rank `L`
/// and the per-coefficient MSE is (L/N)σ².
pub fn error_cov_genie(
    grid: &OfdmGrid,
    mpcs: &MpcSet,
    pulse: &PulseShape,
    sigma2: f64,
) -> Result<ErrorCovModel> {
    let mpcs = mpcs.merged(1e-6 * pulse.sample_period);
    let p = pulse.delay_matrix(mpcs.delays())?;
    let rank = crate::linalg::numerical_rank(&p);
    if rank < mpcs.len() {
        return Err(Error::NumericalRank {
            expected: mpcs.len(),
            actual: rank,
        });
    }
    let proj = &p * pinv(&p);
    let scale = grid.comb_stride() as f64 * sigma2;
    Ok(ErrorCovModel {
        kind: ErrorCovKind::GenieClosedForm,
        nu2: mpcs.len() as f64 / grid.pilot_count() as f64 * sigma2,
        inner: proj * Complex64::new(scale, 0.0),
        sample_count: 0,
    })
}

/// Accumulates the empirical inner covariance of a two-step CS estimator:
/// the average of `P_T̂ z_b z_bᴴ P_T̂ᴴ + Υ_T̂ a aᴴ Υ_T̂ᴴ` over trials, where
/// `z_b` is the coefficient noise and `Υ_T̂ a` the component of the true
/// channel outside the recovered subspace. Partial accumulations over
/// disjoint trial sets merge exactly.
#[derive(Debug, Clone)]
pub struct CsErrorCovAccumulator {
    grid: OfdmGrid,
    inner_sum: CMatrix,
    count: usize,
}

impl CsErrorCovAccumulator {
    pub fn new(grid: OfdmGrid) -> Self {
        let m = grid.fir_len();
        CsErrorCovAccumulator {
            grid,
            inner_sum: CMatrix::zeros(m, m),
            count: 0,
        }
    }

    /// Folds in one trial given the ground-truth taps and the estimate.
    pub fn add_trial(&mut self, h_m: &CVector, estimate: &ChannelEstimate, pulse: &PulseShape) {
        let m = self.grid.fir_len();
        if estimate.support.is_empty() {
            // nothing recovered: the whole channel is the missed term
            self.inner_sum += h_m * h_m.adjoint();
            self.count += 1;
            return;
        }
        let p = pulse.delay_matrix_unordered(&estimate.support);
        let b_true = lstsq(&p, h_m).coeffs;
        let projected = &p * b_true;
        let noise_part = &p * &estimate.coeffs - &projected; // P(b̂ − b)
        let missed = h_m - &projected; // (I − PP⁺)h = Υ a
        self.inner_sum += &noise_part * noise_part.adjoint() + &missed * missed.adjoint();
        self.count += 1;
        debug_assert_eq!(self.inner_sum.nrows(), m);
    }

    pub fn merge(mut self, other: CsErrorCovAccumulator) -> Self {
        self.inner_sum += other.inner_sum;
        self.count += other.count;
        self
    }

    pub fn sample_count(&self) -> usize {
        self.count
    }

    pub fn finalize(&self) -> Result<ErrorCovModel> {
        if self.count == 0 {
            return Err(Error::InvalidState(
                "empirical covariance needs at least one trial".into(),
            ));
        }
        let inner = &self.inner_sum / Complex64::new(self.count as f64, 0.0);
        let nu2 = inner.diagonal().iter().map(|z| z.re).sum::<f64>() / self.grid.dft_size() as f64;
        Ok(ErrorCovModel {
            kind: ErrorCovKind::CsEmpirical,
            nu2,
            inner,
            sample_count: self.count,
        })
    }
}

/// Monte Carlo error-split probe for OMP at one noise level: mean recovered
/// count, per-coefficient MSE, and the subspace-noise vs missed-power split
/// the MSE decomposes into.
#[derive(Debug, Clone, Copy)]
pub struct OmpErrorProbe {
    pub mean_l_hat: f64,
    pub mse: f64,
    /// `E‖P_T̂(b̂−b)‖²/K`: estimation noise inside the recovered subspace.
    pub term_subspace: f64,
    /// `E[ρ(T̂)]`: channel power outside the recovered subspace.
    pub term_residual: f64,
    pub trials: usize,
}

/// Runs `trials` independent (channel, noise) draws through OMP.
pub fn omp_error_probe(
    model: &ChannelModel,
    ops: &DftOps,
    cfg: &DictionaryConfig,
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> Result<OmpErrorProbe> {
    if trials < 100 {
        return Err(Error::InvalidArgument(
            "error probe needs at least 100 trials".into(),
        ));
    }
    cfg.validate(model.pulse.fir_len)?;
    let dict = DelayDictionary::new(ops, &model.pulse, cfg.dict_size)?;
    let k = ops.grid().dft_size() as f64;
    let n = ops.grid().pilot_count();
    let per_trial: Vec<(f64, f64, f64, f64)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, &[0x0e77, t]);
            let (_, h) = model.sample(&mut rng).expect("channel draw");
            let obs = observe_pilots(h.taps(), ops, &unit_pilots(n), sigma2, &mut rng)
                .expect("observation");
            let est = run_omp_with(&dict, &obs, ops, &model.pulse, cfg);
            let h_k = ops.f_km_apply(h.taps());
            let mse = (&est.h_k - &h_k).norm_squared() / k;
            let (sub, res) = if est.support.is_empty() {
                (0.0, h.norm_squared() / k)
            } else {
                let p = model.pulse.delay_matrix_unordered(&est.support);
                let b_true = lstsq(&p, h.taps()).coeffs;
                let sub = (&p * (&est.coeffs - &b_true)).norm_squared() / k;
                let res = (h.taps() - &p * b_true).norm_squared() / k;
                (sub, res)
            };
            (est.l_hat as f64, mse, sub, res)
        })
        .collect();
    let mut acc = (0.0, 0.0, 0.0, 0.0);
    for (l, mse, sub, res) in per_trial {
        acc.0 += l;
        acc.1 += mse;
        acc.2 += sub;
        acc.3 += res;
    }
    let t = trials as f64;
    Ok(OmpErrorProbe {
        mean_l_hat: acc.0 / t,
        mse: acc.1 / t,
        term_subspace: acc.2 / t,
        term_residual: acc.3 / t,
        trials,
    })
}
