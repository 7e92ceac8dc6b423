//! Transmit pulse shapes and pulse-delay vectors.
//!
//! A pulse shape together with the sampling period `T` and the FIR length
//! `M` turns a continuous path delay into a length-`M` tap vector
//! `p(τ)[n] = p(nT − τ)`. For Nyquist pulses (sinc, raised cosine) an
//! on-grid delay lands on exactly one tap; off-grid delays leak into the
//! neighbours.

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use num_complex::Complex64;
use std::f64::consts::PI;

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseKind {
    /// `sinc(t/T)`: the ideal Nyquist pulse, zero at every nonzero integer lag.
    Sinc,
    /// Raised cosine with the given roll-off in `[0, 1]`. Also Nyquist.
    RaisedCosine { rolloff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseShape {
    pub kind: PulseKind,
    /// Sampling period `T` in seconds.
    pub sample_period: f64,
    /// FIR length `M` of the discrete-time equivalent channel.
    pub fir_len: usize,
}

impl PulseShape {
    pub fn sinc(sample_period: f64, fir_len: usize) -> Self {
        PulseShape {
            kind: PulseKind::Sinc,
            sample_period,
            fir_len,
        }
    }

    pub fn raised_cosine(rolloff: f64, sample_period: f64, fir_len: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&rolloff) {
            return Err(Error::InvalidArgument(format!(
                "raised-cosine roll-off {rolloff} outside [0, 1]"
            )));
        }
        Ok(PulseShape {
            kind: PulseKind::RaisedCosine { rolloff },
            sample_period,
            fir_len,
        })
    }

    /// Evaluates `p(t)`; `p(0) = 1` for every supported kind.
    pub fn eval(&self, t: f64) -> f64 {
        let x = t / self.sample_period;
        match self.kind {
            PulseKind::Sinc => sinc(x),
            PulseKind::RaisedCosine { rolloff } => {
                if rolloff == 0.0 {
                    return sinc(x);
                }
                let denom = 1.0 - (2.0 * rolloff * x) * (2.0 * rolloff * x);
                if denom.abs() < 1e-9 {
                    // limit at x = ±1/(2β)
                    (PI / 4.0) * sinc(1.0 / (2.0 * rolloff))
                } else {
                    sinc(x) * (PI * rolloff * x).cos() / denom
                }
            }
        }
    }

    /// Largest delay representable in the FIR window, `(M−1)·T`.
    pub fn max_delay(&self) -> f64 {
        (self.fir_len as f64 - 1.0) * self.sample_period
    }

    /// Span of the FIR window, `M·T`. Delay dictionaries cover `[0, M·T)`.
    pub fn window_span(&self) -> f64 {
        self.fir_len as f64 * self.sample_period
    }

    /// Pulse-delay vector `p(τ)` with components `p(nT − τ)`.
    ///
    /// Real-valued for the supported pulses but typed complex for
    /// uniformity with the channel vectors it combines into.
    pub fn delay_vector(&self, tau: f64) -> Result<CVector> {
        if !(0.0..=self.max_delay() * (1.0 + 1e-12)).contains(&tau) {
            return Err(Error::Domain(format!(
                "delay {tau:e} s outside [0, {:e}] s",
                self.max_delay()
            )));
        }
        Ok(self.delay_vector_unchecked(tau))
    }

    /// Same as [`delay_vector`](Self::delay_vector) without the range check.
    /// Delay dictionaries use bins up to `M·T`, slightly past `(M−1)·T`.
    pub(crate) fn delay_vector_unchecked(&self, tau: f64) -> CVector {
        CVector::from_fn(self.fir_len, |n, _| {
            Complex64::new(self.eval(n as f64 * self.sample_period - tau), 0.0)
        })
    }

    /// Pulse-delay matrix with one column per delay.
    ///
    /// Delays must be sorted ascending and separated by more than
    /// `1e-6·T`; closer pairs make the matrix numerically rank deficient
    /// and are rejected.
    pub fn delay_matrix(&self, delays: &[f64]) -> Result<CMatrix> {
        for pair in delays.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(
                    "delays must be strictly ascending".into(),
                ));
            }
            if pair[1] - pair[0] < 1e-6 * self.sample_period {
                return Err(Error::InvalidArgument(format!(
                    "duplicate delays: gap {:e} below 1e-6 T",
                    pair[1] - pair[0]
                )));
            }
        }
        let cols: Vec<CVector> = delays
            .iter()
            .map(|&tau| self.delay_vector(tau))
            .collect::<Result<_>>()?;
        Ok(CMatrix::from_columns(&cols))
    }

    /// Internal matrix builder for estimator supports: any column order,
    /// delays allowed up to the dictionary span `M·T`.
    pub(crate) fn delay_matrix_unordered(&self, delays: &[f64]) -> CMatrix {
        let cols: Vec<CVector> = delays
            .iter()
            .map(|&tau| self.delay_vector_unchecked(tau))
            .collect();
        CMatrix::from_columns(&cols)
    }
}
