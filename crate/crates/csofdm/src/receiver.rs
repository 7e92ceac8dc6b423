//! MMSE linear equalization under imperfect CSI, Gray-mapped constellation
//! handling, and BER measurement.
//!
//! The receiver treats channel-estimation error as extra noise: the scalar
//! per-subcarrier equalizer is `b_k = ĥ_k* / (|ĥ_k|² + ν² + σ²)` where ν²
//! is the per-coefficient error variance of the estimator in use. The full
//! matrix form exists for verification and for correlated inputs; with
//! i.i.d. unit-power symbols it collapses onto the scalar path.

use crate::error::Result;
use crate::estimators::{
    estimate_genie_ls, estimate_ml_m, run_omp_with, DelayDictionary, DictionaryConfig,
    ErrorCovModel, Refinement,
};
use crate::linalg::{CMatrix, CVector};
use crate::multipath::ChannelModel;
use crate::ofdm::{observe_pilots, unit_pilots, DftOps};
use crate::rng::substream;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qpsk,
    Qam16,
}

impl Modulation {
    pub fn name(&self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Qam16 => "16qam",
        }
    }

    pub fn bits_per_symbol(&self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Qam16 => 4,
        }
    }

    /// Gray-mapped, unit average energy. QPSK: one bit per axis sign.
    /// 16-QAM: two bits per axis, levels {±1, ±3}/√10 with Gray order
    /// 00→−3, 01→−1, 11→+1, 10→+3.
    pub fn modulate(&self, bits: &[bool]) -> Complex64 {
        debug_assert_eq!(bits.len(), self.bits_per_symbol());
        match self {
            Modulation::Qpsk => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                Complex64::new(
                    if bits[0] { -s } else { s },
                    if bits[1] { -s } else { s },
                )
            }
            Modulation::Qam16 => {
                let axis = |b0: bool, b1: bool| match (b0, b1) {
                    (false, false) => -3.0,
                    (false, true) => -1.0,
                    (true, true) => 1.0,
                    (true, false) => 3.0,
                };
                let s = 1.0 / 10f64.sqrt();
                Complex64::new(axis(bits[0], bits[1]) * s, axis(bits[2], bits[3]) * s)
            }
        }
    }

    /// Minimum-distance decision, writing the decided bits into `out`.
    pub fn demodulate(&self, symbol: Complex64, out: &mut [bool]) {
        debug_assert_eq!(out.len(), self.bits_per_symbol());
        match self {
            Modulation::Qpsk => {
                out[0] = symbol.re < 0.0;
                out[1] = symbol.im < 0.0;
            }
            Modulation::Qam16 => {
                // per-axis slicing at {−2, 0, 2}/√10
                let slice = |v: f64| -> (bool, bool) {
                    let x = v * 10f64.sqrt();
                    if x < -2.0 {
                        (false, false)
                    } else if x < 0.0 {
                        (false, true)
                    } else if x < 2.0 {
                        (true, true)
                    } else {
                        (true, false)
                    }
                };
                (out[0], out[1]) = slice(symbol.re);
                (out[2], out[3]) = slice(symbol.im);
            }
        }
    }
}

/// Input-symbol covariance assumption for the full-matrix equalizer.
#[derive(Debug, Clone)]
pub enum InputCov {
    IidUnit,
    Full(CMatrix),
}

#[derive(Debug, Clone)]
pub struct EqualizerInput {
    pub h_k_hat: CVector,
    /// Per-coefficient channel-estimation error variance ν².
    pub nu2: f64,
    pub sigma2: f64,
    pub input_cov: InputCov,
}

#[derive(Debug, Clone)]
pub struct MmseMatrix {
    pub weights: CMatrix,
    /// Set when the normal matrix was singular and a ridge was added.
    pub regularized: bool,
}

/// Full-matrix MMSE equalizer
/// `B = (Σ_x∘ĥĥᴴ + Σ_x∘Σ_h̃ + σ²I)⁻¹ Σ_x D(ĥ)ᴴ` (∘ is element-wise).
/// Dense inversion; intended for verification scale.
pub fn mmse_full(input: &EqualizerInput, err_cov: &CMatrix) -> MmseMatrix {
    let k = input.h_k_hat.len();
    assert_eq!(err_cov.nrows(), k, "error covariance must be K×K");
    let sigma_x = match &input.input_cov {
        InputCov::IidUnit => CMatrix::identity(k, k),
        InputCov::Full(m) => m.clone(),
    };
    let outer = &input.h_k_hat * input.h_k_hat.adjoint();
    let mut normal = sigma_x.component_mul(&outer) + sigma_x.component_mul(err_cov);
    for i in 0..k {
        normal[(i, i)] += Complex64::new(input.sigma2, 0.0);
    }
    let rhs = &sigma_x * CMatrix::from_diagonal(&input.h_k_hat).adjoint();
    match normal.clone().lu().solve(&rhs) {
        Some(weights) => MmseMatrix {
            weights,
            regularized: false,
        },
        None => {
            let ridge = 1e-12 * normal.diagonal().iter().map(|z| z.re).sum::<f64>() / k as f64;
            for i in 0..k {
                normal[(i, i)] += Complex64::new(ridge.max(1e-300), 0.0);
            }
            let weights = normal
                .lu()
                .solve(&rhs)
                .expect("ridge-regularized system is invertible");
            MmseMatrix {
                weights,
                regularized: true,
            }
        }
    }
}

/// Helper building the full equalizer from a structured covariance model.
pub fn mmse_full_from_model(input: &EqualizerInput, err_cov: &ErrorCovModel) -> MmseMatrix {
    mmse_full(input, &err_cov.full_matrix(input.h_k_hat.len()))
}

/// Scalar per-subcarrier MMSE equalizer output `b_k·y_k`.
pub fn mmse_scalar(h_hat: Complex64, nu2: f64, sigma2: f64, y: Complex64) -> Complex64 {
    h_hat.conj() / Complex64::new(h_hat.norm_sqr() + nu2 + sigma2, 0.0) * y
}

/// Channel estimator used by the data receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceiverEstimator {
    PerfectCsi,
    MlM,
    GenieLs,
    /// OMP with the given dictionary-size factor (`N_T = factor·M`).
    Omp { dict_factor: usize },
    /// OMPBR with bin refinement resolution `delta_mu`.
    Ompbr { dict_factor: usize, delta_mu: f64 },
}

impl ReceiverEstimator {
    pub fn name(&self) -> &'static str {
        match self {
            ReceiverEstimator::PerfectCsi => "perfect-csi",
            ReceiverEstimator::MlM => "ml-m",
            ReceiverEstimator::GenieLs => "genie-ls",
            ReceiverEstimator::Omp { .. } => "omp",
            ReceiverEstimator::Ompbr { .. } => "ompbr",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BerConfig {
    /// OFDM frames per block: 1 pilot frame + (frames_per_block − 1) data
    /// frames sharing the same channel realization.
    pub frames_per_block: usize,
    /// Independent channel realizations.
    pub blocks: usize,
}

impl Default for BerConfig {
    fn default() -> Self {
        BerConfig {
            frames_per_block: 10,
            blocks: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BerResult {
    pub ber: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub symbols: u64,
}

/// Measures BER at one noise level: per block draw a channel, estimate it
/// from one pilot frame, then equalize and hard-demodulate i.i.d. data
/// symbols on all `K` subcarriers of the remaining frames.
///
/// ν² fed to the equalizer is the per-method theory value: 0 for perfect
/// CSI, `(M/N)σ²` for the non-sparse benchmark, `(L/N)σ²` for the genie,
/// and `2L̂σ²/N` for OMP (the receiver knows its own iteration count).
pub fn run_ber_trial(
    channel: &ChannelModel,
    ops: &DftOps,
    estimator: ReceiverEstimator,
    modulation: Modulation,
    sigma2: f64,
    cfg: &BerConfig,
    seed: u64,
) -> Result<BerResult> {
    channel.validate()?;
    let grid = *ops.grid();
    let k = grid.dft_size();
    let n = grid.pilot_count();
    let m = grid.fir_len();
    let dict = match estimator {
        ReceiverEstimator::Omp { dict_factor } | ReceiverEstimator::Ompbr { dict_factor, .. } => {
            Some(DelayDictionary::new(ops, &channel.pulse, dict_factor * m)?)
        }
        _ => None,
    };
    let (errors, bits) = (0..cfg.blocks as u64)
        .into_par_iter()
        .map(|block| {
            let mut rng = substream(seed, &[0xbe5, block]);
            let (mpcs, h) = channel.sample(&mut rng).expect("channel draw");
            let h_k = ops.f_km_apply(h.taps());
            let obs = observe_pilots(h.taps(), ops, &unit_pilots(n), sigma2, &mut rng)
                .expect("pilot observation");
            let (h_hat, nu2) = match &estimator {
                ReceiverEstimator::PerfectCsi => (h_k.clone(), 0.0),
                ReceiverEstimator::MlM => {
                    let est = estimate_ml_m(&obs, ops);
                    (est.h_k, m as f64 / n as f64 * sigma2)
                }
                ReceiverEstimator::GenieLs => {
                    let est = estimate_genie_ls(&obs, ops, &mpcs, &channel.pulse)
                        .expect("genie estimate");
                    let l = est.l_hat;
                    (est.h_k, l as f64 / n as f64 * sigma2)
                }
                ReceiverEstimator::Omp { .. } | ReceiverEstimator::Ompbr { .. } => {
                    let refine = match estimator {
                        ReceiverEstimator::Ompbr { delta_mu, .. } => {
                            Refinement::BinarySearch { delta_mu }
                        }
                        _ => Refinement::None,
                    };
                    let dict = dict.as_ref().expect("dictionary built above");
                    let est_cfg = DictionaryConfig {
                        dict_size: dict.len(),
                        refine,
                        stop_threshold: n as f64 * sigma2,
                        max_iters: n * 3 / 4,
                    };
                    let est = run_omp_with(dict, &obs, ops, &channel.pulse, &est_cfg);
                    let nu2 = 2.0 * est.l_hat as f64 * sigma2 / n as f64;
                    (est.h_k, nu2)
                }
            };
            let noise = Normal::new(0.0, (sigma2 / 2.0).sqrt()).expect("valid std");
            let bps = modulation.bits_per_symbol();
            let mut tx_bits = vec![false; bps];
            let mut rx_bits = vec![false; bps];
            let mut errors = 0u64;
            let mut bits = 0u64;
            for _frame in 1..cfg.frames_per_block {
                for sc in 0..k {
                    for b in tx_bits.iter_mut() {
                        *b = rng.gen::<bool>();
                    }
                    let x = modulation.modulate(&tx_bits);
                    let y = x * h_k[sc] + Complex64::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    let eq = mmse_scalar(h_hat[sc], nu2, sigma2, y);
                    modulation.demodulate(eq, &mut rx_bits);
                    for (t, r) in tx_bits.iter().zip(rx_bits.iter()) {
                        if t != r {
                            errors += 1;
                        }
                    }
                    bits += bps as u64;
                }
            }
            (errors, bits)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(BerResult {
        ber: errors as f64 / bits as f64,
        bit_errors: errors,
        bits,
        symbols: bits / modulation.bits_per_symbol() as u64,
    })
}
