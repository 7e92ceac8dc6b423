//! Channel estimators.
//!
//! Four families share one playing field: a non-sparse LS/ML benchmark on
//! the full tap vector, a genie-aided LS benchmark that knows the true
//! delays, the greedy OMP/OMPBR hybrid (pick delays, then LS on the picked
//! subspace), and an ℓ₁ relaxation (BPDN). All consume the de-rotated
//! pilot observation and return the same [`ChannelEstimate`] shape.

mod bpdn;
mod cov;
mod omp;

pub use bpdn::{run_bpdn, run_bpdn_hinted, run_bpdn_with, BpdnConfig};
pub use cov::{
    error_cov_genie, error_cov_ml_m, ml_m_cov_closed_form, omp_error_probe,
    CsErrorCovAccumulator, ErrorCovKind, ErrorCovModel, OmpErrorProbe,
};
pub use omp::{refine_delay, run_omp, run_omp_with, DelayDictionary};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, CVector};
use crate::multipath::{MpcSet, PulseShape};
use crate::ofdm::{DftOps, PilotObservation};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateMethod {
    MlM,
    GenieLs,
    Omp,
    Ompbr,
    BpdnDirect,
    BpdnLs,
}

impl EstimateMethod {
    pub fn name(&self) -> &'static str {
        match self {
            EstimateMethod::MlM => "ml-m",
            EstimateMethod::GenieLs => "genie-ls",
            EstimateMethod::Omp => "omp",
            EstimateMethod::Ompbr => "ompbr",
            EstimateMethod::BpdnDirect => "bpdn-direct",
            EstimateMethod::BpdnLs => "bpdn-ls",
        }
    }
}

impl std::fmt::Display for EstimateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Output of any estimator: the frequency-domain estimate plus the sparse
/// diagnostics the CS methods produce along the way.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    /// `ĥ_K`, the estimated channel on all `K` subcarriers.
    pub h_k: CVector,
    pub method: EstimateMethod,
    /// Recovered delay support `T̂` in selection order (empty for ml-m).
    pub support: Vec<f64>,
    /// LS coefficients `b̂` aligned with `support`.
    pub coeffs: CVector,
    /// Number of recovered components (iterations for OMP).
    pub l_hat: usize,
    /// Residual power `‖r‖²` at the stop, for the CS methods.
    pub residual_power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Refinement {
    None,
    /// Binary-search refinement within the selected bin to relative
    /// resolution `delta_mu` (fraction of the bin width).
    BinarySearch { delta_mu: f64 },
}

/// Runtime knobs for the dictionary-based estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DictionaryConfig {
    /// Dictionary size `N_T ≥ M`; bins are `n · MT/N_T`.
    pub dict_size: usize,
    pub refine: Refinement,
    /// Stop threshold ξ on the residual power; `N·σ²` puts it at the
    /// noise floor.
    pub stop_threshold: f64,
    pub max_iters: usize,
}

impl DictionaryConfig {
    /// Noise-floor configuration: ξ = N·σ², max iterations 3N/4 (high
    /// enough that the cap does not bind at high SNR, low enough that the
    /// LS step stays overdetermined).
    pub fn noise_floor(
        dict_size: usize,
        refine: Refinement,
        pilot_count: usize,
        sigma2: f64,
    ) -> Self {
        DictionaryConfig {
            dict_size,
            refine,
            stop_threshold: pilot_count as f64 * sigma2,
            max_iters: pilot_count * 3 / 4,
        }
    }

    pub fn validate(&self, fir_len: usize) -> Result<()> {
        if self.dict_size < fir_len {
            return Err(Error::InvalidArgument(format!(
                "dictionary size {} below FIR length {fir_len}",
                self.dict_size
            )));
        }
        if let Refinement::BinarySearch { delta_mu } = self.refine {
            if !(0.0..1.0).contains(&delta_mu) || delta_mu == 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "delta_mu {delta_mu} outside (0, 1)"
                )));
            }
        }
        if self.stop_threshold < 0.0 {
            return Err(Error::InvalidArgument("stop threshold must be ≥ 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Non-sparse LS/ML estimate of the full tap vector.
///
/// For unit-modulus pilots the pseudo-inverse of `D(x)F_{N/K,M}` collapses
/// to `(K/N)·F_{N/K,M}ᴴ D(x)ᴴ`, so this is one adjoint FFT of the
/// de-rotated observation.
pub fn estimate_ml_m(obs: &PilotObservation, ops: &DftOps) -> ChannelEstimate {
    let ratio = ops.grid().comb_stride() as f64;
    let h_m = ops.f_nkm_adjoint(&obs.derotated) * Complex64::new(ratio, 0.0);
    ChannelEstimate {
        h_k: ops.f_km_apply(&h_m),
        method: EstimateMethod::MlM,
        support: Vec::new(),
        coeffs: CVector::zeros(0),
        l_hat: 0,
        residual_power: 0.0,
    }
}

/// Genie-aided sparse LS: the true delays are handed to the receiver and
/// only the complex gains are estimated.
///
/// Components closer than `1e-6 T` are power-merged first; directions the
/// rank-cutoff SVD still considers degenerate (very tight ray clumps) are
/// dropped by the solver rather than amplified, which leaves the projected
/// estimate — and hence the `(L/N)σ²` error law — intact.
pub fn estimate_genie_ls(
    obs: &PilotObservation,
    ops: &DftOps,
    mpcs: &MpcSet,
    pulse: &PulseShape,
) -> Result<ChannelEstimate> {
    let mpcs = mpcs.merged(1e-6 * pulse.sample_period);
    let l = mpcs.len();
    if l > ops.grid().pilot_count() {
        return Err(Error::InvalidArgument(format!(
            "{l} components exceed {} pilots",
            ops.grid().pilot_count()
        )));
    }
    let p = pulse.delay_matrix(mpcs.delays())?;
    let mut a = crate::linalg::CMatrix::zeros(ops.grid().pilot_count(), l);
    for (j, col) in p.column_iter().enumerate() {
        a.set_column(j, &ops.f_nkm_apply(&col.into_owned()));
    }
    let sol = lstsq(&a, &obs.derotated);
    let h_m = &p * &sol.coeffs;
    let residual_power = (&obs.derotated - &a * &sol.coeffs).norm_squared();
    Ok(ChannelEstimate {
        h_k: ops.f_km_apply(&h_m),
        method: EstimateMethod::GenieLs,
        support: mpcs.delays().to_vec(),
        coeffs: sol.coeffs,
        l_hat: l,
        residual_power,
    })
}

/// Fraction of channel power (per subcarrier) outside the subspace spanned
/// by the given delay atoms: `ρ(T̂) = ‖(I − P_T̂ P_T̂⁺) h_M‖² / K`.
pub fn residual_of_support(
    h_m: &CVector,
    support: &[f64],
    pulse: &PulseShape,
    dft_size: usize,
) -> Result<f64> {
    if support.is_empty() {
        return Ok(h_m.norm_squared() / dft_size as f64);
    }
    let span = pulse.window_span();
    if support.iter().any(|&t| !(0.0..span).contains(&t)) {
        return Err(Error::Domain(format!(
            "support delay outside the dictionary span [0, {span:e})"
        )));
    }
    let p = pulse.delay_matrix_unordered(support);
    let sol = lstsq(&p, h_m);
    let r = h_m - &p * sol.coeffs;
    Ok(r.norm_squared() / dft_size as f64)
}
