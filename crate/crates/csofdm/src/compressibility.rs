//! Compressibility of channel vectors and amplitude sets.
//!
//! The compressibility index of a vector is Jain's fairness index of its
//! entry powers, `CI = (Σ|v|²)² / (M·Σ|v|⁴)` — the reciprocal of an
//! empirical normalized fourth moment. A vector with index `c` spreads its
//! power like a strictly sparse vector with `M·c` equal entries, so low CI
//! means few dominant components and a fast-decaying oracle residual.
//!
//! `ρ̄(d)` is the residual of the best possible `d`-atom selection on the
//! orthogonal (no-superresolution) dictionary: sort the tap powers, keep
//! the `d` largest. It lower-bounds the residual of any CS algorithm on
//! the same dictionary, and its decay is bracketed in terms of the CI.

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::multipath::{
    draw_unnormalized_amplitudes, sample_delays, AmplitudeModel, DelayProcessConfig,
};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiStats {
    /// Jain-fairness-style index in `[1/M, 1]`.
    pub ci: f64,
    /// `(M/L)·CI`, comparable across channels with different path counts.
    /// Filled by callers that know `L`.
    pub adjusted_ci: Option<f64>,
    /// `1/CI`: the empirical normalized fourth moment.
    pub kurtosis_estimate: f64,
}

fn ci_of_powers(powers: impl Iterator<Item = f64> + Clone) -> Result<(f64, usize)> {
    let mut s2 = 0.0;
    let mut s4 = 0.0;
    let mut m = 0usize;
    for p in powers {
        s2 += p;
        s4 += p * p;
        m += 1;
    }
    if m == 0 || s4 <= 0.0 {
        return Err(Error::InvalidArgument(
            "compressibility index of an all-zero set".into(),
        ));
    }
    Ok((s2 * s2 / (m as f64 * s4), m))
}

/// Compressibility index of a complex vector.
pub fn compressibility_index(v: &CVector) -> Result<CiStats> {
    let (ci, _) = ci_of_powers(v.iter().map(|z| z.norm_sqr()))?;
    Ok(CiStats {
        ci,
        adjusted_ci: None,
        kurtosis_estimate: 1.0 / ci,
    })
}

/// Compressibility index of a nonnegative amplitude set (powers `αℓ²`).
pub fn compressibility_index_amplitudes(amplitudes: &[f64]) -> Result<CiStats> {
    let (ci, _) = ci_of_powers(amplitudes.iter().map(|a| a * a))?;
    Ok(CiStats {
        ci,
        adjusted_ci: None,
        kurtosis_estimate: 1.0 / ci,
    })
}

/// Sorted tap powers, the oracle residual sequence and the CI of every
/// remainder set.
#[derive(Debug, Clone)]
pub struct ResidualProfile {
    /// Tap powers `m₁ ≥ m₂ ≥ …`, length `M`.
    pub sorted_powers: Vec<f64>,
    /// `ρ̄(d)` for `d = 0…M` (per-subcarrier units, `ρ̄(0) = ‖h‖²/K`).
    pub rho_bar: Vec<f64>,
    /// `CI(R_d)` of the remainder after removing the `d` largest taps,
    /// `d = 0…M−1`; `NaN` once the remainder carries no power.
    pub ci_remaining: Vec<f64>,
    /// Normalization constant `K`.
    pub dft_size: usize,
}

impl ResidualProfile {
    pub fn fir_len(&self) -> usize {
        self.sorted_powers.len()
    }
}

/// Builds the oracle residual profile of a tap vector.
pub fn oracle_residual_profile(h_m: &CVector, dft_size: usize) -> Result<ResidualProfile> {
    let m = h_m.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty channel vector".into()));
    }
    let total: f64 = h_m.norm_squared();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("all-zero channel vector".into()));
    }
    let mut powers: Vec<f64> = h_m.iter().map(|z| z.norm_sqr()).collect();
    powers.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let k = dft_size as f64;
    let mut rho_bar = Vec::with_capacity(m + 1);
    let mut remaining = total;
    rho_bar.push(remaining / k);
    for &p in &powers {
        remaining -= p;
        rho_bar.push(remaining.max(0.0) / k);
    }

    let mut ci_remaining = Vec::with_capacity(m);
    let mut s2: f64 = powers.iter().sum();
    let mut s4: f64 = powers.iter().map(|p| p * p).sum();
    for d in 0..m {
        let count = (m - d) as f64;
        if s4 > 1e-300 {
            ci_remaining.push(s2 * s2 / (count * s4));
        } else {
            ci_remaining.push(f64::NAN);
        }
        s2 -= powers[d];
        s4 -= powers[d] * powers[d];
        s2 = s2.max(0.0);
        s4 = s4.max(0.0);
    }

    Ok(ResidualProfile {
        sorted_powers: powers,
        rho_bar,
        ci_remaining,
        dft_size,
    })
}

/// Product lower bound on the remaining power fraction
/// `ρ̄(d)/ρ̄(0) = K·ρ̄(d)/‖h‖²`:
/// `∏_{i=0}^{d−1} (1 − 1/√((M−i)·CI(R_i)))`, each factor clamped at zero.
/// Returns the bound and whether any factor was clamped (the bound is
/// vacuous from that depth on). For unit-power channels the fraction is
/// `K·ρ̄(d)` itself.
pub fn rho_lower_bound_product(profile: &ResidualProfile, d: usize) -> (f64, bool) {
    let m = profile.fir_len();
    assert!(d <= m, "depth {d} beyond FIR length {m}");
    let mut bound = 1.0;
    let mut clamped = false;
    for i in 0..d {
        let ci = profile.ci_remaining[i];
        let factor = if ci.is_nan() {
            0.0
        } else {
            1.0 - 1.0 / (((m - i) as f64) * ci).sqrt()
        };
        if factor <= 0.0 || factor.is_nan() {
            clamped = true;
            return (0.0, clamped);
        }
        bound *= factor;
    }
    (bound, clamped)
}

/// Geometric approximation `(1 − 1/√(M·CI))^d` of the remaining power
/// fraction, using the whole-vector CI. Degenerate (`M·CI < 1`) collapses
/// to zero.
pub fn rho_lower_bound_geometric(ci_h: f64, fir_len: usize, d: usize) -> (f64, bool) {
    let base = 1.0 - 1.0 / (fir_len as f64 * ci_h).sqrt();
    if base <= 0.0 || base.is_nan() {
        (if d == 0 { 1.0 } else { 0.0 }, true)
    } else {
        (base.powi(d as i32), false)
    }
}

/// Amplitude-set form `(1 − 1/√(L·CI({ᾱ})))^d`; scale invariance of the CI
/// makes normalization irrelevant here.
pub fn rho_lower_bound_amplitude(ci_alpha: f64, path_count: usize, d: usize) -> (f64, bool) {
    rho_lower_bound_geometric(ci_alpha, path_count, d)
}

/// Ratio sequence testing the CI-growth assumption: removing the largest
/// element should grow the CI by at least `(M−d+1)/(M−d)`.
#[derive(Debug, Clone)]
pub struct CiGrowth {
    /// `r_d = ((M−d+1)/(M−d))·CI(R_{d−1}) / CI(R_d)` for `d = 1…d_max`.
    /// The assumption holds where `r_d ≲ 1`.
    pub ratios: Vec<f64>,
    /// First depth whose remainder set carried no power, if any.
    pub degenerate_at: Option<usize>,
}

/// Evaluates the growth ratios up to `d_max = min(40, M/2)`.
pub fn ci_growth_check(h_m: &CVector) -> Result<CiGrowth> {
    let profile = oracle_residual_profile(h_m, h_m.len().max(1))?;
    let m = profile.fir_len();
    let d_max = (m / 2).min(40);
    let mut ratios = Vec::with_capacity(d_max);
    let mut degenerate_at = None;
    for d in 1..=d_max {
        let prev = profile.ci_remaining[d - 1];
        let cur = profile.ci_remaining[d];
        if cur.is_nan() || prev.is_nan() {
            degenerate_at = Some(d);
            break;
        }
        let growth = (m - d + 1) as f64 / (m - d) as f64;
        ratios.push(growth * prev / cur);
    }
    Ok(CiGrowth {
        ratios,
        degenerate_at,
    })
}

/// Ensemble bridge between the amplitude-set CI and the kurtosis of the
/// marginal amplitude distribution.
#[derive(Debug, Clone, Copy)]
pub struct KurtosisBridge {
    /// Mean per-set `CI({ᾱ})`.
    pub ci_alpha_mean: f64,
    /// Pooled sample kurtosis `E[ᾱ⁴]/E[ᾱ²]²` of the unnormalized draws.
    pub kappa_estimate: f64,
    pub sets: usize,
}

/// Draws `n_sets ≥ 100` delay/amplitude realizations and estimates both
/// sides of the `1/CI ≈ κ` bridge. Works on unnormalized amplitudes: the
/// per-set CI is scale invariant, while pooled moments are not.
pub fn amplitude_kurtosis_bridge(
    model: &AmplitudeModel,
    delay_cfg: &DelayProcessConfig,
    n_sets: usize,
    seed: u64,
) -> Result<KurtosisBridge> {
    if n_sets < 100 {
        return Err(Error::InvalidArgument(
            "kurtosis bridge needs at least 100 draws".into(),
        ));
    }
    model.validate()?;
    delay_cfg.validate()?;
    let mut ci_sum = 0.0;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    let mut count = 0usize;
    for s in 0..n_sets as u64 {
        let mut rng = substream(seed, &[0xb21d, s]);
        let delays = sample_delays(delay_cfg, &mut rng);
        let raw = draw_unnormalized_amplitudes(model, &delays, &mut rng);
        ci_sum += compressibility_index_amplitudes(&raw)?.ci;
        for a in raw {
            m2 += a * a;
            m4 += a.powi(4);
            count += 1;
        }
    }
    let m2 = m2 / count as f64;
    let m4 = m4 / count as f64;
    Ok(KurtosisBridge {
        ci_alpha_mean: ci_sum / n_sets as f64,
        kappa_estimate: m4 / (m2 * m2),
        sets: n_sets,
    })
}
