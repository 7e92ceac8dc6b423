//! Orthogonal matching pursuit over a delay dictionary, with optional
//! binary-search refinement of each selected delay (OMPBR).
//!
//! Each iteration picks the dictionary atom best correlated with the
//! residual, optionally refines the delay inside its bin, re-solves the LS
//! projection on everything selected so far, and stops once the residual
//! power drops below ξ or the iteration cap is reached.

use super::{ChannelEstimate, DictionaryConfig, EstimateMethod, Refinement};
use crate::error::Result;
use crate::linalg::{lstsq, CMatrix, CVector};
use crate::multipath::PulseShape;
use crate::ofdm::{DftOps, PilotObservation};
use nalgebra::linalg::Cholesky;
use num_complex::Complex64;

/// Dictionary atoms `φ_n = F_{N/K,M} p(n·MT/N_T)`, precomputed once and
/// shared across trials.
pub struct DelayDictionary {
    delays: Vec<f64>,
    atoms: CMatrix,
    bin_width: f64,
}

impl DelayDictionary {
    pub fn new(ops: &DftOps, pulse: &PulseShape, dict_size: usize) -> Result<Self> {
        if dict_size < pulse.fir_len {
            return Err(crate::error::Error::InvalidArgument(format!(
                "dictionary size {dict_size} below FIR length {}",
                pulse.fir_len
            )));
        }
        let span = pulse.window_span();
        let bin_width = span / dict_size as f64;
        let delays: Vec<f64> = (0..dict_size).map(|n| n as f64 * bin_width).collect();
        let n = ops.grid().pilot_count();
        let mut atoms = CMatrix::zeros(n, dict_size);
        for (j, &tau) in delays.iter().enumerate() {
            atoms.set_column(j, &ops.f_nkm_apply(&pulse.delay_vector_unchecked(tau)));
        }
        Ok(DelayDictionary {
            delays,
            atoms,
            bin_width,
        })
    }

    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    pub fn delays(&self) -> &[f64] {
        &self.delays
    }

    pub fn atoms(&self) -> &CMatrix {
        &self.atoms
    }
}

/// Binary-search maximum refinement on `[-1/2, 1/2]`.
///
/// If `f` has a single local maximum at `μ*`, increases strictly before it,
/// decreases after it and is symmetric about it, the result is within
/// `delta_mu` of `μ*`. The result always stays inside the interval.
pub fn refine_delay<F: Fn(f64) -> f64>(f: F, delta_mu: f64) -> f64 {
    binary_search_max(&f, -0.5, 0.5, delta_mu)
}

fn binary_search_max<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, delta: f64) -> f64 {
    let mut lo = lo;
    let mut hi = hi;
    while hi - lo > 2.0 * delta {
        let mid = 0.5 * (lo + hi);
        if f(lo) < f(hi) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Runs OMP/OMPBR building the dictionary on the fly.
pub fn run_omp(
    obs: &PilotObservation,
    ops: &DftOps,
    pulse: &PulseShape,
    cfg: &DictionaryConfig,
) -> Result<ChannelEstimate> {
    cfg.validate(pulse.fir_len)?;
    let dict = DelayDictionary::new(ops, pulse, cfg.dict_size)?;
    Ok(run_omp_with(&dict, obs, ops, pulse, cfg))
}

/// Runs OMP/OMPBR against a prebuilt dictionary (the sweep hot path).
pub fn run_omp_with(
    dict: &DelayDictionary,
    obs: &PilotObservation,
    ops: &DftOps,
    pulse: &PulseShape,
    cfg: &DictionaryConfig,
) -> ChannelEstimate {
    let y = &obs.derotated;
    let n = y.len();
    let mut residual = y.clone();
    let mut residual_power = residual.norm_squared();

    let mut support: Vec<f64> = Vec::new();
    let mut coeffs = CVector::zeros(0);
    let mut chosen = vec![false; dict.len()];
    // selected atom columns for the refined delays
    let mut selected = CMatrix::zeros(n, 0);

    let min_gap = 1e-3 * pulse.sample_period;
    let span_limit = pulse.window_span() * (1.0 - 1e-12);

    while residual_power > cfg.stop_threshold && support.len() < cfg.max_iters {
        let corr = dict.atoms().ad_mul(&residual);
        // adjoint image of the residual, reused by every refinement eval
        let w = match cfg.refine {
            Refinement::BinarySearch { .. } => Some(ops.f_nkm_adjoint(&residual)),
            Refinement::None => None,
        };

        // Candidate bins in descending correlation, skipping chosen ones;
        // a refined delay that collides with the support is discarded and
        // the next-best bin is taken.
        let mut order: Vec<usize> = (0..dict.len()).filter(|&i| !chosen[i]).collect();
        order.sort_by(|&a, &b| {
            corr[b]
                .norm()
                .partial_cmp(&corr[a].norm())
                .unwrap()
                .then(a.cmp(&b)) // lowest index wins ties
        });

        let mut accepted: Option<(usize, f64)> = None;
        for &bin in &order {
            let center = dict.delays()[bin];
            let tau = match (&cfg.refine, &w) {
                (Refinement::BinarySearch { delta_mu }, Some(w)) => {
                    let bw = dict.bin_width;
                    let f = |mu: f64| {
                        let tau = center + mu * bw;
                        let mut acc = Complex64::default();
                        for (i, wi) in w.iter().enumerate() {
                            acc += wi * pulse.eval(i as f64 * pulse.sample_period - tau);
                        }
                        acc.norm()
                    };
                    let lo = (-0.5f64).max(-center / bw);
                    let hi = 0.5f64.min((span_limit - center) / bw);
                    let mu = binary_search_max(&f, lo, hi, *delta_mu);
                    // never worse than the plain bin-center decision
                    if f(mu) >= f(0.0) {
                        center + mu * bw
                    } else {
                        center
                    }
                }
                _ => center,
            };
            if support.iter().all(|&s| (s - tau).abs() >= min_gap) {
                accepted = Some((bin, tau));
                break;
            }
        }
        let Some((bin, tau)) = accepted else {
            break; // every remaining candidate collides
        };
        chosen[bin] = true;
        support.push(tau);
        selected = grow_columns(selected, &ops.f_nkm_apply(&pulse.delay_vector_unchecked(tau)));

        coeffs = solve_projection(&selected, y);
        residual = y - &selected * &coeffs;
        residual_power = residual.norm_squared();
    }

    let h_m = {
        let mut h = CVector::zeros(pulse.fir_len);
        for (j, &tau) in support.iter().enumerate() {
            h += pulse.delay_vector_unchecked(tau) * coeffs[j];
        }
        h
    };
    ChannelEstimate {
        h_k: ops.f_km_apply(&h_m),
        method: match cfg.refine {
            Refinement::None => EstimateMethod::Omp,
            Refinement::BinarySearch { .. } => EstimateMethod::Ompbr,
        },
        l_hat: support.len(),
        support,
        coeffs,
        residual_power,
    }
}

fn grow_columns(m: CMatrix, col: &CVector) -> CMatrix {
    let n = m.nrows().max(col.len());
    let k = m.ncols();
    let mut out = CMatrix::zeros(n, k + 1);
    out.view_mut((0, 0), (n, k)).copy_from(&m);
    out.set_column(k, col);
    out
}

/// LS coefficients on the selected atoms: normal equations with a Cholesky
/// solve, falling back to the rank-cutoff SVD when the Gram matrix is too
/// ill-conditioned (near-duplicate refined delays).
fn solve_projection(a: &CMatrix, y: &CVector) -> CVector {
    let gram = a.ad_mul(a);
    let rhs = a.ad_mul(y);
    if let Some(chol) = Cholesky::new(gram) {
        let d = chol.l_dirty();
        let mut dmin = f64::MAX;
        let mut dmax: f64 = 0.0;
        for i in 0..a.ncols() {
            let v = d[(i, i)].re;
            dmin = dmin.min(v);
            dmax = dmax.max(v);
        }
        if dmin > 1e-7 * dmax {
            return chol.solve(&rhs);
        }
    }
    lstsq(a, y).coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multipath::{build_time_channel, MpcSet};
    use crate::ofdm::{observe_pilots, unit_pilots, OfdmGrid};
    use crate::rng::substream;

    fn setup(k: usize, m: usize, n: usize) -> (DftOps, PulseShape) {
        let grid = OfdmGrid::new(k, m, n).unwrap();
        (DftOps::new(grid), PulseShape::sinc(1.0, m))
    }

    #[test]
    fn refine_finds_parabola_peak() {
        let mu = refine_delay(|x| -(x - 0.3) * (x - 0.3), 1e-3);
        assert!((mu - 0.3).abs() < 1e-3, "μ̂ = {mu}");
    }

    #[test]
    fn refine_monotone_function_hits_boundary() {
        let mu = refine_delay(|x| x, 1e-3);
        assert!((mu - 0.5).abs() < 1e-3, "μ̂ = {mu}");
    }

    #[test]
    fn refine_stays_within_interval() {
        for seed in 0..50 {
            let c = (seed as f64 / 50.0) - 0.5;
            let mu = refine_delay(|x| -(x - c) * (x - c), 1e-4);
            assert!((-0.5..=0.5).contains(&mu));
            assert!((mu - c).abs() < 1e-4);
        }
    }

    #[test]
    fn noiseless_on_grid_exact_recovery() {
        let (ops, pulse) = setup(32, 8, 16);
        let amp = (1.0f64 / 3.0).sqrt();
        let mpcs = MpcSet::new(
            vec![0.0, 2.0, 5.0],
            vec![amp, amp, amp],
            vec![0.3, 1.7, 4.4],
            1.0,
        )
        .unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let mut rng = substream(1, &[0]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(16), 0.0, &mut rng).unwrap();
        let cfg = DictionaryConfig {
            dict_size: 8,
            refine: Refinement::None,
            stop_threshold: 1e-24,
            max_iters: 8,
        };
        let est = run_omp(&obs, &ops, &pulse, &cfg).unwrap();
        assert_eq!(est.l_hat, 3);
        let mut got = est.support.clone();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (g, e) in got.iter().zip([0.0, 2.0, 5.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        assert!(est.residual_power < 1e-20);
        let h_k = ops.f_km_apply(h.taps());
        assert!((est.h_k - h_k).norm() < 1e-10);
    }

    #[test]
    fn residual_power_is_monotone() {
        let (ops, pulse) = setup(64, 16, 32);
        let mpcs = MpcSet::new(
            vec![0.0, 2.7, 6.1, 9.9, 13.0],
            vec![0.6, 0.5, 0.4, 0.3, 0.2],
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            1.0,
        )
        .unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let mut rng = substream(2, &[1]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(32), 0.01, &mut rng).unwrap();
        // run with increasing iteration caps; the residual must not grow
        let mut prev = f64::MAX;
        for iters in 1..=10 {
            let cfg = DictionaryConfig {
                dict_size: 16,
                refine: Refinement::None,
                stop_threshold: 0.0,
                max_iters: iters,
            };
            let est = run_omp(&obs, &ops, &pulse, &cfg).unwrap();
            assert!(est.residual_power <= prev + 1e-12);
            prev = est.residual_power;
        }
    }

    #[test]
    fn refinement_reduces_off_grid_delay_error() {
        let (ops, pulse) = setup(64, 16, 32);
        let mpcs = MpcSet::new(vec![0.0, 5.37], vec![0.5, 1.0], vec![0.0, 0.9], 1.0).unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let mut rng = substream(3, &[0]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(32), 0.0, &mut rng).unwrap();

        let plain = run_omp(
            &obs,
            &ops,
            &pulse,
            &DictionaryConfig {
                dict_size: 16,
                refine: Refinement::None,
                stop_threshold: 1e-10,
                max_iters: 8,
            },
        )
        .unwrap();
        let refined = run_omp(
            &obs,
            &ops,
            &pulse,
            &DictionaryConfig {
                dict_size: 16,
                refine: Refinement::BinarySearch { delta_mu: 1e-4 },
                stop_threshold: 1e-10,
                max_iters: 8,
            },
        )
        .unwrap();
        let err = |est: &ChannelEstimate| {
            est.support
                .iter()
                .map(|s| (s - 5.37).abs())
                .fold(f64::MAX, f64::min)
        };
        assert!(
            err(&refined) < err(&plain),
            "refined {} vs grid {}",
            err(&refined),
            err(&plain)
        );
        assert!(err(&refined) < 0.05);
    }

    #[test]
    fn refined_correlation_dominates_bin_center() {
        // first refined pick: correlation at μ̂ at least that of μ=0
        let (ops, pulse) = setup(64, 16, 32);
        let mpcs = MpcSet::new(vec![0.0, 4.63], vec![0.3, 1.0], vec![0.2, 2.2], 1.0).unwrap();
        let h = build_time_channel(&mpcs, &pulse).unwrap();
        let mut rng = substream(4, &[0]);
        let obs = observe_pilots(h.taps(), &ops, &unit_pilots(32), 0.005, &mut rng).unwrap();
        let dict = DelayDictionary::new(&ops, &pulse, 16).unwrap();

        let corr0 = dict.atoms().ad_mul(&obs.derotated);
        let best = (0..16)
            .max_by(|&a, &b| corr0[a].norm().partial_cmp(&corr0[b].norm()).unwrap())
            .unwrap();
        let cfg = DictionaryConfig {
            dict_size: 16,
            refine: Refinement::BinarySearch { delta_mu: 1e-3 },
            stop_threshold: 1e-12,
            max_iters: 1,
        };
        let est = run_omp_with(&dict, &obs, &ops, &pulse, &cfg);
        assert_eq!(est.l_hat, 1);
        let w = ops.f_nkm_adjoint(&obs.derotated);
        let corr_at = |tau: f64| {
            let mut acc = Complex64::default();
            for (i, wi) in w.iter().enumerate() {
                acc += wi * pulse.eval(i as f64 - tau);
            }
            acc.norm()
        };
        assert!(corr_at(est.support[0]) >= corr_at(dict.delays()[best]) - 1e-12);
    }

    #[test]
    fn stops_immediately_when_observation_is_noise_floor() {
        let (ops, pulse) = setup(32, 8, 16);
        let h = CVector::zeros(8);
        let sigma2 = 0.01;
        let mut rng = substream(5, &[0]);
        let obs = observe_pilots(&h, &ops, &unit_pilots(16), sigma2, &mut rng).unwrap();
        let cfg = DictionaryConfig {
            dict_size: 8,
            refine: Refinement::None,
            stop_threshold: 16.0 * sigma2 * 10.0, // well above the draw
            max_iters: 8,
        };
        let est = run_omp(&obs, &ops, &pulse, &cfg).unwrap();
        assert_eq!(est.l_hat, 0);
        assert!(est.support.is_empty());
        assert_eq!(est.h_k.norm(), 0.0);
        assert!((est.residual_power - obs.derotated.norm_squared()).abs() < 1e-12);
    }
}
