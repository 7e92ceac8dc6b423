//! Multipath component sets and their discrete-time FIR image.

use crate::error::{Error, Result};
use crate::linalg::CVector;
use crate::multipath::PulseShape;
use num_complex::Complex64;

/// The physical channel: `L` planar-wave arrivals with delays, nonnegative
/// amplitudes and phases. Amplitudes are normalized on construction so the
/// total power `Σ αℓ²` equals `total_power` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcSet {
    delays: Vec<f64>,
    amplitudes: Vec<f64>,
    phases: Vec<f64>,
    total_power: f64,
}

impl MpcSet {
    /// Builds a validated set. Delays must be strictly ascending with
    /// `τ₁ = 0`; amplitudes nonnegative and not all zero.
    pub fn new(
        delays: Vec<f64>,
        amplitudes: Vec<f64>,
        phases: Vec<f64>,
        total_power: f64,
    ) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::InvalidArgument("empty multipath set".into()));
        }
        if delays.len() != amplitudes.len() || delays.len() != phases.len() {
            return Err(Error::InvalidArgument(
                "delays, amplitudes and phases must have equal length".into(),
            ));
        }
        if delays[0] != 0.0 {
            return Err(Error::InvalidArgument(format!(
                "first delay must be 0, got {:e}",
                delays[0]
            )));
        }
        for pair in delays.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(
                    "delays must be strictly ascending".into(),
                ));
            }
        }
        if amplitudes.iter().any(|&a| a < 0.0 || !a.is_finite()) {
            return Err(Error::InvalidArgument(
                "amplitudes must be nonnegative and finite".into(),
            ));
        }
        if total_power <= 0.0 {
            return Err(Error::InvalidArgument(
                "total power must be positive".into(),
            ));
        }
        let raw_power: f64 = amplitudes.iter().map(|a| a * a).sum();
        if raw_power <= 0.0 {
            return Err(Error::InvalidArgument("all amplitudes are zero".into()));
        }
        let scale = (total_power / raw_power).sqrt();
        let amplitudes = amplitudes.into_iter().map(|a| a * scale).collect();
        Ok(MpcSet {
            delays,
            amplitudes,
            phases,
            total_power,
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

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn total_power(&self) -> f64 {
        self.total_power
    }

    /// Complex gain vector `a` with entries `αℓ·e^{jφℓ}`.
    pub fn gains(&self) -> CVector {
        CVector::from_fn(self.len(), |i, _| {
            Complex64::from_polar(self.amplitudes[i], self.phases[i])
        })
    }

    /// Rescales the total power; every amplitude scales by `√(p/p_old)`.
    pub fn with_total_power(&self, total_power: f64) -> Result<Self> {
        MpcSet::new(
            self.delays.clone(),
            self.amplitudes.clone(),
            self.phases.clone(),
            total_power,
        )
    }

    /// Merges components whose delays are closer than `tol` seconds.
    ///
    /// Powers add; the merged component keeps the delay and phase of its
    /// strongest member. Keeps downstream pulse-delay matrices full rank.
    pub fn merged(&self, tol: f64) -> Self {
        let mut delays = Vec::with_capacity(self.len());
        let mut amplitudes: Vec<f64> = Vec::with_capacity(self.len());
        let mut phases = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let merge_with_last = delays
                .last()
                .is_some_and(|&d: &f64| self.delays[i] - d < tol);
            if merge_with_last {
                let j = amplitudes.len() - 1;
                let combined = (amplitudes[j] * amplitudes[j]
                    + self.amplitudes[i] * self.amplitudes[i])
                    .sqrt();
                if self.amplitudes[i] > amplitudes[j] {
                    phases[j] = self.phases[i];
                }
                amplitudes[j] = combined;
            } else {
                delays.push(self.delays[i]);
                amplitudes.push(self.amplitudes[i]);
                phases.push(self.phases[i]);
            }
        }
        MpcSet::new(delays, amplitudes, phases, self.total_power)
            .expect("merge preserves validity")
    }
}

/// Discrete-time FIR equivalent channel, `M` complex taps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeChannel {
    taps: CVector,
}

impl TimeChannel {
    pub fn new(taps: CVector) -> Self {
        TimeChannel { taps }
    }

    pub fn taps(&self) -> &CVector {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.len() == 0
    }

    pub fn norm_squared(&self) -> f64 {
        self.taps.norm_squared()
    }
}

/// Builds `h_M = Σℓ p(τℓ)·αℓe^{jφℓ}`.
///
/// Every delay must fit the FIR window `[0, (M−1)T]`; the leftover pulse
/// tails outside the window are what the 5% norm tolerance absorbs.
pub fn build_time_channel(mpcs: &MpcSet, pulse: &PulseShape) -> Result<TimeChannel> {
    let mut taps = CVector::zeros(pulse.fir_len);
    let gains = mpcs.gains();
    for (i, &tau) in mpcs.delays().iter().enumerate() {
        let p = pulse.delay_vector(tau)?;
        taps += p * gains[i];
    }
    Ok(TimeChannel::new(taps))
}
