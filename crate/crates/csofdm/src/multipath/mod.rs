//! Sparse multipath channel generation.
//!
//! A channel is a set of planar-wave arrivals (delays, amplitudes, phases)
//! converted to a length-`M` FIR tap vector through a pulse shape. Delay
//! and amplitude statistics are configurable; amplitudes are always
//! normalized to the configured received power.

mod mpc;
mod pulse;
mod sample;

pub use mpc::{build_time_channel, MpcSet, TimeChannel};
pub use pulse::{PulseKind, PulseShape};
pub use sample::{
    draw_unnormalized_amplitudes, sample_amplitudes, sample_delays, AmplitudeKind, AmplitudeModel,
    DelayKind, DelayProcessConfig,
};

use crate::error::Result;
use rand::Rng;

/// Everything needed to draw one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    pub pulse: PulseShape,
    pub delays: DelayProcessConfig,
    pub amplitudes: AmplitudeModel,
    pub total_power: f64,
}

impl ChannelModel {
    pub fn validate(&self) -> Result<()> {
        self.delays.validate()?;
        self.amplitudes.validate()?;
        if self.total_power <= 0.0 {
            return Err(crate::error::Error::InvalidArgument(
                "total_power must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Draws one realization: delays, amplitudes, phases and the FIR image.
    /// Components closer than `1e-6 T` are power-merged.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<(MpcSet, TimeChannel)> {
        let delays = sample_delays(&self.delays, rng);
        let mpcs = sample_amplitudes(&self.amplitudes, &delays, self.total_power, rng)?
            .merged(1e-6 * self.pulse.sample_period);
        let h = build_time_channel(&mpcs, &self.pulse)?;
        Ok((mpcs, h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    fn nyu_like() -> ChannelModel {
        ChannelModel {
            pulse: PulseShape::sinc(2.5e-9, 128),
            delays: DelayProcessConfig {
                kind: DelayKind::Clustered,
                mean_cluster_count: 4.0,
                cluster_rate: 1.0 / 70e-9,
                intra_cluster_rate: 0.7e9,
                max_delay_spread: 317.5e-9,
                max_mpc_count: 64,
                mean_rays_per_cluster: 11.3,
                min_separation: 0.5e-9,
            },
            amplitudes: AmplitudeModel {
                kind: AmplitudeKind::LognormalDecay,
                decay_gamma: 40e-9,
                shadow_var: 0.8,
                cluster_split: true,
            },
            total_power: 1.0,
        }
    }

    #[test]
    fn sampled_channel_power_averages_to_one() {
        // Σα² is normalized exactly, so E‖h_M‖² = 1 up to pulse
        // truncation. Per realization the clumped arrivals interfere
        // coherently and the FIR power fades like the physical channel:
        // measured quantiles over the calibrated generator are
        // q05 ≈ 0.63, q95 ≈ 1.36.
        let model = nyu_like();
        let trials = 800u64;
        let mut sum = 0.0;
        let mut outside = 0usize;
        for trial in 0..trials {
            let mut rng = substream(2024, &[trial]);
            let (_, h) = model.sample(&mut rng).unwrap();
            let norm2 = h.norm_squared();
            sum += norm2;
            if !(0.5..=1.7).contains(&norm2) {
                outside += 1;
            }
            assert!(
                (0.05..=3.5).contains(&norm2),
                "trial {trial}: ‖h‖² = {norm2}"
            );
        }
        let mean = sum / trials as f64;
        assert!((0.96..=1.02).contains(&mean), "mean ‖h‖² = {mean}");
        assert!(outside <= 80, "{outside} draws outside [0.5, 1.7]");
    }

    #[test]
    fn deterministic_given_stream() {
        let model = nyu_like();
        let mut a = substream(3, &[7]);
        let mut b = substream(3, &[7]);
        let (sa, ha) = model.sample(&mut a).unwrap();
        let (sb, hb) = model.sample(&mut b).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(ha, hb);
    }
}
