//! Basis pursuit denoising: `min ‖b‖₁ s.t. ‖y − Φb‖² ≤ ξ`.
//!
//! Solved through the penalized form `½‖y − Φb‖² + λ‖b‖₁` with an
//! accelerated proximal-gradient inner loop and an outer bisection on λ
//! that lands the residual just under ξ. First-order and dependency-free;
//! adequate because every claim made about BPDN here is relative (dB gaps
//! against the greedy estimators), not solver-exact.

use super::{ChannelEstimate, DelayDictionary, DictionaryConfig, EstimateMethod};
use crate::error::{Error, Result};
use crate::linalg::{lstsq, spectral_norm_sq, CMatrix, CVector};
use crate::multipath::PulseShape;
use crate::ofdm::{DftOps, PilotObservation};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnConfig {
    /// Relative objective-change tolerance of the inner loop.
    pub inner_tol: f64,
    /// Inner iteration cap.
    pub max_inner: usize,
    /// Support threshold for the debiased variant, as a fraction of the
    /// largest coefficient magnitude.
    pub threshold_frac: f64,
}

impl Default for BpdnConfig {
    fn default() -> Self {
        BpdnConfig {
            inner_tol: 1e-8,
            max_inner: 10_000,
            threshold_frac: 0.05,
        }
    }
}

/// Sparse-aware `Φ b`: sums only the columns with nonzero coefficients.
fn phi_mul(phi: &CMatrix, b: &CVector) -> CVector {
    let mut out = CVector::zeros(phi.nrows());
    for (j, &bj) in b.iter().enumerate() {
        if bj != Complex64::default() {
            out.axpy(bj, &phi.column(j).into_owned(), Complex64::new(1.0, 0.0));
        }
    }
    out
}

fn soft_threshold(v: &CVector, t: f64) -> CVector {
    CVector::from_fn(v.len(), |i, _| {
        let m = v[i].norm();
        if m <= t {
            Complex64::default()
        } else {
            v[i] * ((m - t) / m)
        }
    })
}

struct FistaOutcome {
    b: CVector,
    residual_power: f64,
    converged: bool,
}

fn fista(
    phi: &CMatrix,
    y: &CVector,
    lambda: f64,
    lipschitz: f64,
    cfg: &BpdnConfig,
    warm: &CVector,
) -> FistaOutcome {
    let step = 1.0 / lipschitz;
    let mut b = warm.clone();
    let mut z = b.clone();
    let mut t = 1.0f64;
    let mut prev_obj = f64::MAX;
    let mut converged = false;
    let mut residual_power = (y - phi_mul(phi, &b)).norm_squared();
    for _ in 0..cfg.max_inner {
        let grad = phi.ad_mul(&(phi_mul(phi, &z) - y));
        let next = soft_threshold(&(z - grad * Complex64::new(step, 0.0)), lambda * step);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = Complex64::new((t - 1.0) / t_next, 0.0);
        z = &next + (&next - &b) * momentum;
        b = next;
        t = t_next;

        residual_power = (y - phi_mul(phi, &b)).norm_squared();
        let obj = 0.5 * residual_power + lambda * b.iter().map(|v| v.norm()).sum::<f64>();
        if (prev_obj - obj).abs() <= cfg.inner_tol * obj.max(1e-300) {
            converged = true;
            break;
        }
        if obj > prev_obj {
            // momentum overshoot: restart the acceleration
            t = 1.0;
            z = b.clone();
        }
        prev_obj = obj;
    }
    FistaOutcome {
        b,
        residual_power,
        converged,
    }
}

/// Runs BPDN on the pilot observation. `debias = false` returns the direct
/// ℓ₁ solution; `debias = true` thresholds the support and re-solves LS on
/// it (the hybrid variant).
pub fn run_bpdn(
    obs: &PilotObservation,
    ops: &DftOps,
    pulse: &PulseShape,
    cfg: &DictionaryConfig,
    bpdn: &BpdnConfig,
    debias: bool,
) -> Result<ChannelEstimate> {
    cfg.validate(pulse.fir_len)?;
    let dict = DelayDictionary::new(ops, pulse, cfg.dict_size)?;
    run_bpdn_with(&dict, obs, ops, pulse, cfg, bpdn, debias)
}

pub fn run_bpdn_with(
    dict: &DelayDictionary,
    obs: &PilotObservation,
    ops: &DftOps,
    pulse: &PulseShape,
    cfg: &DictionaryConfig,
    bpdn: &BpdnConfig,
    debias: bool,
) -> Result<ChannelEstimate> {
    run_bpdn_hinted(dict, obs, ops, pulse, cfg, bpdn, debias, None).map(|(est, _)| est)
}

/// Like [`run_bpdn_with`], optionally seeded with a penalty bracket around
/// `lambda_hint` (e.g. the value another observation at the same noise
/// level converged to). Returns the estimate and the accepted penalty.
#[allow(clippy::too_many_arguments)]
pub fn run_bpdn_hinted(
    dict: &DelayDictionary,
    obs: &PilotObservation,
    ops: &DftOps,
    pulse: &PulseShape,
    cfg: &DictionaryConfig,
    bpdn: &BpdnConfig,
    debias: bool,
    lambda_hint: Option<f64>,
) -> Result<(ChannelEstimate, f64)> {
    let y = &obs.derotated;
    let xi = cfg.stop_threshold;
    let phi = dict.atoms();
    let method = if debias {
        EstimateMethod::BpdnLs
    } else {
        EstimateMethod::BpdnDirect
    };

    if y.norm_squared() <= xi {
        // zero is already feasible, and it has minimal ℓ₁ norm
        return Ok((
            assemble(
                dict,
                ops,
                pulse,
                &CVector::zeros(dict.len()),
                y.norm_squared(),
                method,
                obs,
                bpdn,
                debias,
            ),
            0.0,
        ));
    }

    let lipschitz = spectral_norm_sq(phi) * 1.000001 + 1e-12;
    let corr0 = phi.ad_mul(y);
    let lambda_max = corr0.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let mut lambda_hi = lambda_max;
    let mut lambda_lo = lambda_max * 1e-10;
    if let Some(hint) = lambda_hint {
        if hint.is_finite() && hint > 0.0 {
            lambda_lo = (hint / 8.0).min(lambda_max * 0.5);
            lambda_hi = (hint * 8.0).min(lambda_max);
        }
    }

    // the smallest penalty must be feasible, otherwise ξ is unreachable
    // in the span of the dictionary; a hinted bracket falls back to the
    // full range before giving up
    let mut warm = CVector::zeros(dict.len());
    let mut lo_run = fista(phi, y, lambda_lo, lipschitz, bpdn, &warm);
    if lo_run.residual_power > xi && lambda_hint.is_some() {
        lambda_lo = lambda_max * 1e-10;
        lambda_hi = lambda_max;
        lo_run = fista(phi, y, lambda_lo, lipschitz, bpdn, &lo_run.b);
    }
    if lo_run.residual_power > xi {
        let last = assemble(
            dict,
            ops,
            pulse,
            &lo_run.b,
            lo_run.residual_power,
            method,
            obs,
            bpdn,
            debias,
        );
        return Err(Error::NonConvergence {
            iterations: bpdn.max_inner,
            last: Box::new(last),
        });
    }
    let mut feasible = lo_run;
    let mut lambda_star = lambda_lo;
    warm = feasible.b.clone();

    for _ in 0..60 {
        // accept a residual just under the constraint boundary
        if feasible.residual_power >= 0.95 * xi || lambda_hi / lambda_lo < 1.0 + 1e-10 {
            break;
        }
        let lambda = (lambda_lo * lambda_hi).sqrt();
        let run = fista(phi, y, lambda, lipschitz, bpdn, &warm);
        warm = run.b.clone();
        if run.residual_power <= xi {
            lambda_lo = lambda;
            lambda_star = lambda;
            feasible = run;
        } else {
            lambda_hi = lambda;
        }
    }

    if !feasible.converged {
        let last = assemble(
            dict,
            ops,
            pulse,
            &feasible.b,
            feasible.residual_power,
            method,
            obs,
            bpdn,
            debias,
        );
        return Err(Error::NonConvergence {
            iterations: bpdn.max_inner,
            last: Box::new(last),
        });
    }
    Ok((
        assemble(
            dict,
            ops,
            pulse,
            &feasible.b,
            feasible.residual_power,
            method,
            obs,
            bpdn,
            debias,
        ),
        lambda_star,
    ))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    dict: &DelayDictionary,
    ops: &DftOps,
    pulse: &PulseShape,
    b: &CVector,
    residual_power: f64,
    method: EstimateMethod,
    obs: &PilotObservation,
    bpdn: &BpdnConfig,
    debias: bool,
) -> ChannelEstimate {
    if debias {
        // keep coefficients above max(frac·max|b|, σ/√N), then LS-debias
        let max_mag = b.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
        let noise_level = (obs.noise_var).sqrt() / (obs.derotated.len() as f64).sqrt();
        let threshold = (bpdn.threshold_frac * max_mag).max(noise_level);
        let support: Vec<f64> = b
            .iter()
            .enumerate()
            .filter(|(_, v)| v.norm() > threshold)
            .map(|(j, _)| dict.delays()[j])
            .collect();
        if support.is_empty() {
            return ChannelEstimate {
                h_k: CVector::zeros(ops.grid().dft_size()),
                method,
                support,
                coeffs: CVector::zeros(0),
                l_hat: 0,
                residual_power: obs.derotated.norm_squared(),
            };
        }
        let mut a = CMatrix::zeros(obs.derotated.len(), support.len());
        for (j, &tau) in support.iter().enumerate() {
            a.set_column(j, &ops.f_nkm_apply(&pulse.delay_vector_unchecked(tau)));
        }
        let sol = lstsq(&a, &obs.derotated);
        let resid = (&obs.derotated - &a * &sol.coeffs).norm_squared();
        let mut h_m = CVector::zeros(pulse.fir_len);
        for (j, &tau) in support.iter().enumerate() {
            h_m += pulse.delay_vector_unchecked(tau) * sol.coeffs[j];
        }
        ChannelEstimate {
            h_k: ops.f_km_apply(&h_m),
            method,
            l_hat: support.len(),
            support,
            coeffs: sol.coeffs,
            residual_power: resid,
        }
    } else {
        let mut support = Vec::new();
        let mut kept = Vec::new();
        let mut h_m = CVector::zeros(pulse.fir_len);
        for (j, &bj) in b.iter().enumerate() {
            if bj != Complex64::default() {
                support.push(dict.delays()[j]);
                kept.push(bj);
                h_m += pulse.delay_vector_unchecked(dict.delays()[j]) * bj;
            }
        }
        ChannelEstimate {
            h_k: ops.f_km_apply(&h_m),
            method,
            l_hat: support.len(),
            support,
            coeffs: CVector::from_vec(kept),
            residual_power,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::Refinement;
    use crate::multipath::{build_time_channel, MpcSet};
    use crate::ofdm::{observe_pilots, unit_pilots, OfdmGrid};
    use crate::rng::substream;

    fn setup(k: usize, m: usize, n: usize) -> (DftOps, PulseShape) {
        let grid = OfdmGrid::new(k, m, n).unwrap();
        (DftOps::new(grid), PulseShape::sinc(1.0, m))
    }

    #[test]
    fn noiseless_single_atom_recovery() {
        let (ops, pulse) = setup(32, 8, 16);
        let mpcs = MpcSet::new(vec![0.0, 3.0], vec![0.0001, 1.0], vec![0.0, 1.2], 1.0).unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let mut rng = substream(1, &[0]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(16), 0.0, &mut rng).unwrap();
        let cfg = DictionaryConfig {
            dict_size: 8,
            refine: Refinement::None,
            stop_threshold: 1e-6,
            max_iters: 8,
        };
        let est = run_bpdn(&obs, &ops, &pulse, &cfg, &BpdnConfig::default(), false).unwrap();
        // ξ → 0⁺ with one dominant on-grid atom: a single nonzero survives
        assert_eq!(est.l_hat, 1, "support: {:?}", est.support);
        assert!((est.support[0] - 3.0).abs() < 1e-12);
        assert!(est.residual_power <= 1e-6 * 1.001);
    }

    #[test]
    fn feasibility_contract() {
        let (ops, pulse) = setup(64, 16, 32);
        let mpcs = MpcSet::new(
            vec![0.0, 2.3, 7.9, 12.4],
            vec![0.7, 0.5, 0.4, 0.2],
            vec![0.0, 1.0, 2.0, 3.0],
            1.0,
        )
        .unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let sigma2 = 0.002;
        for trial in 0..5 {
            let mut rng = substream(2, &[trial]);
            let obs = observe_pilots(h.taps(), &ops, &unit_pilots(32), sigma2, &mut rng).unwrap();
            let xi = 32.0 * sigma2;
            let cfg = DictionaryConfig {
                dict_size: 32,
                refine: Refinement::None,
                stop_threshold: xi,
                max_iters: 16,
            };
            let est = run_bpdn(&obs, &ops, &pulse, &cfg, &BpdnConfig::default(), false).unwrap();
            assert!(
                est.residual_power <= xi * (1.0 + 1e-3),
                "residual {} vs ξ {xi}",
                est.residual_power
            );
        }
    }

    #[test]
    fn zero_feasible_returns_empty_support() {
        let (ops, pulse) = setup(32, 8, 16);
        let h = CVector::zeros(8);
        let sigma2 = 0.01;
        let mut rng = substream(3, &[0]);
        let obs = observe_pilots(&h, &ops, &unit_pilots(16), sigma2, &mut rng).unwrap();
        let cfg = DictionaryConfig {
            dict_size: 8,
            refine: Refinement::None,
            stop_threshold: 10.0, // far above the noise power
            max_iters: 8,
        };
        let est = run_bpdn(&obs, &ops, &pulse, &cfg, &BpdnConfig::default(), false).unwrap();
        assert_eq!(est.l_hat, 0);
        assert_eq!(est.h_k.norm(), 0.0);
    }

    #[test]
    fn debias_reprojects_on_thresholded_support() {
        let (ops, pulse) = setup(64, 16, 32);
        let amp = 0.5f64.sqrt();
        let mpcs = MpcSet::new(vec![0.0, 6.0], vec![amp, amp], vec![0.4, 2.0], 1.0).unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let sigma2 = 1e-4;
        let mut rng = substream(4, &[0]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(32), sigma2, &mut rng).unwrap();
        let cfg = DictionaryConfig {
            dict_size: 16,
            refine: Refinement::None,
            stop_threshold: 32.0 * sigma2,
            max_iters: 16,
        };
        let est = run_bpdn(&obs, &ops, &pulse, &cfg, &BpdnConfig::default(), true).unwrap();
        assert_eq!(est.method, EstimateMethod::BpdnLs);
        assert_eq!(est.l_hat, 2, "support {:?}", est.support);
        // debiased estimate is close to the truth (soft-threshold bias removed)
        let h_k = ops.f_km_apply(h.taps());
        let nmse = (est.h_k - &h_k).norm_squared() / h_k.norm_squared();
        assert!(nmse < 1e-3, "nmse = {nmse}");
    }
}
