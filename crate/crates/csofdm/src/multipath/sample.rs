//! Random generators for delays and path amplitudes.
//!
//! The clustered delay process is a parameterized stand-in for measured
//! mmWave arrival statistics: cluster origins follow a Poisson arrival
//! process, rays inside a cluster follow a second, faster Poisson process.
//! The shipped defaults are calibrated so that the mean component count is
//! ≈ 32 inside a 320 ns window at T = 2.5 ns (see `configs/`).

use crate::error::{Error, Result};
use crate::multipath::MpcSet;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    /// Single memoryless arrival process at `intra_cluster_rate`.
    UniformPoisson,
    /// Poisson cluster origins, each spawning a faster ray process.
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayProcessConfig {
    pub kind: DelayKind,
    /// Mean number of clusters (clustered kind only).
    pub mean_cluster_count: f64,
    /// Cluster-origin arrival rate, arrivals per second.
    pub cluster_rate: f64,
    /// Ray arrival rate inside a cluster, arrivals per second.
    pub intra_cluster_rate: f64,
    /// Hard cap on the largest delay, seconds.
    pub max_delay_spread: f64,
    /// Hard cap on the number of components.
    pub max_mpc_count: usize,
    /// Mean ray count per cluster (clustered kind only); the draw is
    /// `max(1, Poisson(mean))`, truncated by the window and the caps.
    pub mean_rays_per_cluster: f64,
    /// Dead time between accepted arrivals, seconds. Arrivals closer than
    /// this are discarded; keeps components distinct so pulse-delay
    /// matrices stay numerically full rank.
    pub min_separation: f64,
}

impl DelayProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_delay_spread <= 0.0 {
            return Err(Error::InvalidArgument(
                "max_delay_spread must be positive".into(),
            ));
        }
        if self.max_mpc_count == 0 {
            return Err(Error::InvalidArgument("max_mpc_count must be ≥ 1".into()));
        }
        if self.kind == DelayKind::Clustered
            && (self.mean_cluster_count <= 0.0 || self.mean_rays_per_cluster <= 0.0)
        {
            return Err(Error::InvalidArgument(
                "cluster means must be positive".into(),
            ));
        }
        if self.cluster_rate < 0.0 || self.intra_cluster_rate < 0.0 {
            return Err(Error::InvalidArgument("rates must be nonnegative".into()));
        }
        if self.min_separation < 0.0 {
            return Err(Error::InvalidArgument(
                "min_separation must be ≥ 0".into(),
            ));
        }
        Ok(())
    }
}

/// Draws a sorted delay list with `τ₁ = 0`, all delays ≤ the spread cap,
/// consecutive gaps ≥ `min_separation`, and the count ≤ `max_mpc_count`.
pub fn sample_delays<R: Rng>(cfg: &DelayProcessConfig, rng: &mut R) -> Vec<f64> {
    let ds = cfg.max_delay_spread;
    let cap = cfg.max_mpc_count;
    let sep = cfg.min_separation;
    let mut delays = vec![0.0];
    // Dead-time acceptance: arrivals inside the separation window are
    // discarded without extending the window.
    let accepts = |delays: &Vec<f64>, t: f64| t - delays.last().unwrap() >= sep;
    match cfg.kind {
        DelayKind::UniformPoisson => {
            if cfg.intra_cluster_rate > f64::MIN_POSITIVE {
                let gap = Exp::new(cfg.intra_cluster_rate).expect("validated rate");
                let mut t = 0.0;
                while delays.len() < cap {
                    t += gap.sample(rng);
                    if t > ds {
                        break;
                    }
                    if accepts(&delays, t) {
                        delays.push(t);
                    }
                }
            }
        }
        DelayKind::Clustered => {
            let n_clusters = (Poisson::new(cfg.mean_cluster_count)
                .expect("validated mean")
                .sample(rng) as usize)
                .max(1);
            let mut origins = vec![0.0];
            if cfg.cluster_rate > f64::MIN_POSITIVE {
                let gap = Exp::new(cfg.cluster_rate).expect("validated rate");
                while origins.len() < n_clusters {
                    let next = origins.last().unwrap() + gap.sample(rng);
                    if next > ds {
                        break;
                    }
                    origins.push(next);
                }
            }
            let ray_gap = (cfg.intra_cluster_rate > f64::MIN_POSITIVE)
                .then(|| Exp::new(cfg.intra_cluster_rate).expect("validated rate"));
            let ray_count = Poisson::new(cfg.mean_rays_per_cluster).expect("validated mean");
            for (i, &origin) in origins.iter().enumerate() {
                if delays.len() >= cap {
                    break;
                }
                let end = origins.get(i + 1).copied().unwrap_or(ds).min(ds);
                if i > 0 && accepts(&delays, origin) {
                    delays.push(origin);
                }
                let rays = (ray_count.sample(rng) as usize).max(1);
                let mut placed = 1usize; // the origin counts as the first ray
                if let Some(gap) = &ray_gap {
                    let mut t = origin;
                    while placed < rays && delays.len() < cap {
                        t += gap.sample(rng);
                        if t >= end {
                            break;
                        }
                        if accepts(&delays, t) {
                            delays.push(t);
                            placed += 1;
                        }
                    }
                }
            }
        }
    }
    delays
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmplitudeKind {
    /// `ᾱℓ = exp(−τℓ/Γ + ζℓ)`, `ζℓ ~ N(0, σ²)`: lognormal with
    /// delay-decaying mean power.
    LognormalDecay,
    /// `ᾱℓ = exp(ζℓ)`: lognormal, no decay.
    LognormalFlat,
    /// Rayleigh with scale `exp(−τℓ/Γ)`.
    RayleighDecay,
    /// Unit-scale Rayleigh.
    RayleighFlat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeModel {
    pub kind: AmplitudeKind,
    /// Mean power decay constant Γ, seconds.
    pub decay_gamma: f64,
    /// Lognormal shadowing log-variance σ².
    pub shadow_var: f64,
    /// Two-level power split: total power is first divided across clusters
    /// with a normalized lognormal, then across the rays of each cluster.
    pub cluster_split: bool,
}

impl AmplitudeModel {
    pub fn validate(&self) -> Result<()> {
        if self.decay_gamma <= 0.0 {
            return Err(Error::InvalidArgument("decay_gamma must be positive".into()));
        }
        if self.shadow_var < 0.0 {
            return Err(Error::InvalidArgument("shadow_var must be ≥ 0".into()));
        }
        Ok(())
    }
}

fn rayleigh<R: Rng>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.gen();
    scale * (-2.0 * (1.0 - u).ln()).sqrt()
}

/// Raw amplitude draws before power normalization. Exposed so ensemble
/// statistics (kurtosis of the marginal distribution) can be computed on
/// the unnormalized values.
pub fn draw_unnormalized_amplitudes<R: Rng>(
    model: &AmplitudeModel,
    delays: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let shadow = Normal::new(0.0, model.shadow_var.sqrt()).expect("validated variance");
    delays
        .iter()
        .map(|&tau| match model.kind {
            AmplitudeKind::LognormalDecay => (-tau / model.decay_gamma + shadow.sample(rng)).exp(),
            AmplitudeKind::LognormalFlat => shadow.sample(rng).exp(),
            AmplitudeKind::RayleighDecay => rayleigh((-tau / model.decay_gamma).exp(), rng),
            AmplitudeKind::RayleighFlat => rayleigh(1.0, rng),
        })
        .collect()
}

/// Splits a delay list into clusters at gaps larger than twice the median
/// gap. Heuristic reconstruction of the cluster structure for the
/// two-level power split; a single cluster if the list is short.
fn infer_clusters(delays: &[f64]) -> Vec<usize> {
    let n = delays.len();
    if n < 4 {
        return vec![0; n];
    }
    let mut gaps: Vec<f64> = delays.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = gaps[gaps.len() / 2];
    let threshold = 2.0 * median;
    let mut ids = Vec::with_capacity(n);
    let mut cluster = 0usize;
    ids.push(0);
    for w in delays.windows(2) {
        if w[1] - w[0] > threshold {
            cluster += 1;
        }
        ids.push(cluster);
    }
    ids
}

/// Draws amplitudes for the given delays and assembles a normalized
/// [`MpcSet`] with total power `precv` and i.i.d. uniform phases.
pub fn sample_amplitudes<R: Rng>(
    model: &AmplitudeModel,
    delays: &[f64],
    precv: f64,
    rng: &mut R,
) -> Result<MpcSet> {
    if delays.is_empty() {
        return Err(Error::InvalidArgument("empty delay list".into()));
    }
    model.validate()?;
    let mut amplitudes = draw_unnormalized_amplitudes(model, delays, rng);

    if model.cluster_split {
        let ids = infer_clusters(delays);
        let n_clusters = ids.last().copied().unwrap_or(0) + 1;
        if n_clusters > 1 {
            // Cluster weights: one more normalized lognormal, evaluated at
            // the cluster origin delay for the decaying kinds.
            let shadow = Normal::new(0.0, model.shadow_var.sqrt()).expect("validated variance");
            let mut weights = vec![0.0f64; n_clusters];
            for c in 0..n_clusters {
                let first = ids.iter().position(|&id| id == c).expect("nonempty cluster");
                let origin = delays[first];
                let decay = match model.kind {
                    AmplitudeKind::LognormalDecay | AmplitudeKind::RayleighDecay => {
                        -origin / model.decay_gamma
                    }
                    _ => 0.0,
                };
                let w = (decay + shadow.sample(rng)).exp();
                weights[c] = w * w;
            }
            let total_w: f64 = weights.iter().sum();
            let mut cluster_power = vec![0.0f64; n_clusters];
            for (i, &id) in ids.iter().enumerate() {
                cluster_power[id] += amplitudes[i] * amplitudes[i];
            }
            for (i, &id) in ids.iter().enumerate() {
                if cluster_power[id] > 0.0 {
                    let share = weights[id] / total_w;
                    amplitudes[i] *= (share / cluster_power[id]).sqrt();
                }
            }
        }
    }

    let phases: Vec<f64> = delays.iter().map(|_| rng.gen::<f64>() * TAU).collect();
    MpcSet::new(delays.to_vec(), amplitudes, phases, precv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn clustered_cfg() -> DelayProcessConfig {
        DelayProcessConfig {
            kind: DelayKind::Clustered,
            mean_cluster_count: 4.0,
            cluster_rate: 1.0 / 70e-9,
            intra_cluster_rate: 0.7e9,
            max_delay_spread: 317.5e-9,
            max_mpc_count: 64,
            mean_rays_per_cluster: 11.3,
            min_separation: 0.5e-9,
        }
    }

    #[test]
    fn zero_rate_gives_single_zero_delay() {
        let cfg = DelayProcessConfig {
            kind: DelayKind::UniformPoisson,
            mean_cluster_count: 1.0,
            cluster_rate: 0.0,
            intra_cluster_rate: 0.0,
            max_delay_spread: 1.0,
            max_mpc_count: 8,
            mean_rays_per_cluster: 1.0,
            min_separation: 0.0,
        };
        let mut rng = substream(1, &[0]);
        assert_eq!(sample_delays(&cfg, &mut rng), vec![0.0]);
    }

    #[test]
    fn delays_sorted_unique_capped() {
        let cfg = clustered_cfg();
        for trial in 0..200 {
            let mut rng = substream(42, &[trial]);
            let d = sample_delays(&cfg, &mut rng);
            assert!(!d.is_empty());
            assert_eq!(d[0], 0.0);
            assert!(d.len() <= cfg.max_mpc_count);
            for w in d.windows(2) {
                assert!(w[1] - w[0] >= cfg.min_separation);
            }
            assert!(*d.last().unwrap() <= cfg.max_delay_spread);
        }
    }

    #[test]
    fn calibrated_defaults_give_mean_count_near_32() {
        let cfg = clustered_cfg();
        let mut total = 0usize;
        let trials = 1500u64;
        for t in 0..trials {
            let mut rng = substream(7, &[t]);
            total += sample_delays(&cfg, &mut rng).len();
        }
        let mean = total as f64 / trials as f64;
        assert!((31.5..=36.0).contains(&mean), "E[L] = {mean}");
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = clustered_cfg();
        let model = AmplitudeModel {
            kind: AmplitudeKind::LognormalDecay,
            decay_gamma: 40e-9,
            shadow_var: 0.8,
            cluster_split: true,
        };
        let draw = |seed| {
            let mut rng = substream(seed, &[3]);
            let d = sample_delays(&cfg, &mut rng);
            sample_amplitudes(&model, &d, 1.0, &mut rng).unwrap()
        };
        assert_eq!(draw(9), draw(9));
    }

    #[test]
    fn normalization_and_single_path() {
        let model = AmplitudeModel {
            kind: AmplitudeKind::RayleighFlat,
            decay_gamma: 60e-9,
            shadow_var: 0.0,
            cluster_split: false,
        };
        let mut rng = substream(5, &[0]);
        let s = sample_amplitudes(&model, &[0.0], 2.25, &mut rng).unwrap();
        assert!((s.amplitudes()[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_delays_rejected() {
        let model = AmplitudeModel {
            kind: AmplitudeKind::LognormalFlat,
            decay_gamma: 60e-9,
            shadow_var: 0.1,
            cluster_split: false,
        };
        let mut rng = substream(5, &[0]);
        assert!(sample_amplitudes(&model, &[], 1.0, &mut rng).is_err());
    }

    #[test]
    fn lognormal_amplitude_kurtosis_matches_closed_form() {
        // kurtosis E[ᾱ⁴]/E[ᾱ²]² of exp(N(0,σ²)) is e^{4σ²}; σ² = ln(10)/4
        // gives exactly 10.
        let model = AmplitudeModel {
            kind: AmplitudeKind::LognormalFlat,
            decay_gamma: 60e-9,
            shadow_var: 10f64.ln() / 4.0,
            cluster_split: false,
        };
        let mut rng = substream(11, &[0]);
        let delays: Vec<f64> = (0..200_000).map(|i| i as f64).collect();
        let a = draw_unnormalized_amplitudes(&model, &delays, &mut rng);
        let m2: f64 = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
        let m4: f64 = a.iter().map(|x| x.powi(4)).sum::<f64>() / a.len() as f64;
        let kappa = m4 / (m2 * m2);
        assert!((kappa - 10.0).abs() < 1.0, "lognormal κ = {kappa}");
    }

    #[test]
    fn rayleigh_amplitude_kurtosis_is_two() {
        let model = AmplitudeModel {
            kind: AmplitudeKind::RayleighFlat,
            decay_gamma: 60e-9,
            shadow_var: 0.0,
            cluster_split: false,
        };
        let mut rng = substream(12, &[0]);
        let delays: Vec<f64> = (0..200_000).map(|i| i as f64).collect();
        let a = draw_unnormalized_amplitudes(&model, &delays, &mut rng);
        let m2: f64 = a.iter().map(|x| x * x).sum::<f64>() / a.len() as f64;
        let m4: f64 = a.iter().map(|x| x.powi(4)).sum::<f64>() / a.len() as f64;
        let kappa = m4 / (m2 * m2);
        assert!((kappa - 2.0).abs() < 0.2, "rayleigh κ = {kappa}");
    }

    #[test]
    fn cluster_split_preserves_total_power() {
        let cfg = clustered_cfg();
        let model = AmplitudeModel {
            kind: AmplitudeKind::LognormalDecay,
            decay_gamma: 60e-9,
            shadow_var: 10f64.ln() / 4.0,
            cluster_split: true,
        };
        for trial in 0..50 {
            let mut rng = substream(77, &[trial]);
            let d = sample_delays(&cfg, &mut rng);
            let s = sample_amplitudes(&model, &d, 1.0, &mut rng).unwrap();
            let p: f64 = s.amplitudes().iter().map(|a| a * a).sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }
}
