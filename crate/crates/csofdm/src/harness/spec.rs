//! Config-file schema blocks and their conversion to runtime types.
//!
//! File units are nanoseconds (`*_ns` keys) and rates per nanosecond;
//! runtime units are seconds. Exact key names are documented in the README
//! and pinned by the golden-header tests.

use super::ExperimentSpec;
use crate::error::{Error, Result};
use crate::estimators::{BpdnConfig, DictionaryConfig, Refinement};
use crate::multipath::{
    AmplitudeKind, AmplitudeModel, ChannelModel, DelayKind, DelayProcessConfig, PulseShape,
};
use crate::ofdm::OfdmGrid;
use crate::receiver::{Modulation, ReceiverEstimator};
use serde::{Deserialize, Serialize};

const NS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "K")]
    pub dft_size: usize,
    #[serde(rename = "M")]
    pub fir_len: usize,
    #[serde(rename = "N")]
    pub pilot_count: usize,
}

impl GridSpec {
    pub fn validate(&self, path: &str) -> Result<()> {
        OfdmGrid::new(self.dft_size, self.fir_len, self.pilot_count)
            .map(|_| ())
            .map_err(|e| Error::schema(path, e.to_string()))
    }

    pub fn to_grid(&self) -> OfdmGrid {
        OfdmGrid::new(self.dft_size, self.fir_len, self.pilot_count).expect("validated grid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    /// `sinc` or `raised-cosine`.
    pub kind: String,
    pub t_ns: f64,
    #[serde(default)]
    pub rolloff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    /// `clustered` or `uniform-poisson`.
    pub kind: String,
    #[serde(default = "one")]
    pub mean_cluster_count: f64,
    #[serde(default)]
    pub cluster_rate_per_ns: f64,
    #[serde(default)]
    pub intra_cluster_rate_per_ns: f64,
    pub max_delay_spread_ns: f64,
    pub max_mpc_count: usize,
    #[serde(default = "one")]
    pub mean_rays_per_cluster: f64,
    #[serde(default)]
    pub min_separation_ns: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSpec {
    /// `lognormal-decay`, `lognormal-flat`, `rayleigh-decay`, `rayleigh-flat`.
    pub kind: String,
    pub gamma_ns: f64,
    pub sigma_alpha2: f64,
    #[serde(default)]
    pub cluster_split: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub name: String,
    pub pulse: PulseSpec,
    pub delay: DelaySpec,
    pub amplitude: AmplitudeSpec,
    #[serde(default = "one")]
    pub precv: f64,
}

impl ChannelSpec {
    pub fn validate(&self, path: &str, grid: &GridSpec) -> Result<()> {
        self.to_model(grid)
            .and_then(|m| m.validate())
            .map_err(|e| Error::schema(path, e.to_string()))
    }

    pub fn to_model(&self, grid: &GridSpec) -> Result<ChannelModel> {
        let t = self.pulse.t_ns * NS;
        let pulse = match self.pulse.kind.as_str() {
            "sinc" => PulseShape::sinc(t, grid.fir_len),
            "raised-cosine" => {
                let rolloff = self.pulse.rolloff.ok_or_else(|| {
                    Error::InvalidArgument("raised-cosine needs `rolloff`".into())
                })?;
                PulseShape::raised_cosine(rolloff, t, grid.fir_len)?
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown pulse kind `{other}`"
                )))
            }
        };
        let delay_kind = match self.delay.kind.as_str() {
            "clustered" => DelayKind::Clustered,
            "uniform-poisson" => DelayKind::UniformPoisson,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown delay kind `{other}`"
                )))
            }
        };
        if self.delay.max_mpc_count > grid.fir_len {
            return Err(Error::InvalidArgument(format!(
                "max_mpc_count {} exceeds FIR length {}",
                self.delay.max_mpc_count, grid.fir_len
            )));
        }
        let max_spread = self.delay.max_delay_spread_ns * NS;
        if max_spread > pulse.max_delay() * (1.0 + 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "max_delay_spread {} ns exceeds the FIR window (M−1)T = {} ns",
                self.delay.max_delay_spread_ns,
                pulse.max_delay() / NS
            )));
        }
        let amp_kind = match self.amplitude.kind.as_str() {
            "lognormal-decay" => AmplitudeKind::LognormalDecay,
            "lognormal-flat" => AmplitudeKind::LognormalFlat,
            "rayleigh-decay" => AmplitudeKind::RayleighDecay,
            "rayleigh-flat" => AmplitudeKind::RayleighFlat,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown amplitude kind `{other}`"
                )))
            }
        };
        let model = ChannelModel {
            pulse,
            delays: DelayProcessConfig {
                kind: delay_kind,
                mean_cluster_count: self.delay.mean_cluster_count,
                cluster_rate: self.delay.cluster_rate_per_ns / NS,
                intra_cluster_rate: self.delay.intra_cluster_rate_per_ns / NS,
                max_delay_spread: max_spread,
                max_mpc_count: self.delay.max_mpc_count,
                mean_rays_per_cluster: self.delay.mean_rays_per_cluster,
                min_separation: self.delay.min_separation_ns * NS,
            },
            amplitudes: AmplitudeModel {
                kind: amp_kind,
                decay_gamma: self.amplitude.gamma_ns * NS,
                shadow_var: self.amplitude.sigma_alpha2,
                cluster_split: self.amplitude.cluster_split,
            },
            total_power: self.precv,
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMode {
    /// ξ = N·σ².
    NoiseFloor,
    /// Fixed ξ, independent of the sweep SNR.
    Absolute,
}

impl Default for XiMode {
    fn default() -> Self {
        XiMode::NoiseFloor
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpdnSpec {
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_max_inner")]
    pub max_inner: usize,
    #[serde(default = "default_threshold_frac")]
    pub threshold_frac: f64,
}

fn default_inner_tol() -> f64 {
    1e-8
}
fn default_max_inner() -> usize {
    10_000
}
fn default_threshold_frac() -> f64 {
    0.05
}

impl Default for BpdnSpec {
    fn default() -> Self {
        BpdnSpec {
            inner_tol: default_inner_tol(),
            max_inner: default_max_inner(),
            threshold_frac: default_threshold_frac(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    /// `ml-m`, `genie-ls`, `omp`, `ompbr`, `bpdn-direct`, `bpdn-ls`, or
    /// `perfect-csi` (BER task only).
    pub method: String,
    /// Row label in emitted CSVs; defaults to `method`.
    #[serde(default)]
    pub label: Option<String>,
    /// Dictionary size as a multiple of `M` (`N_T = factor·M`).
    #[serde(default = "one_usize")]
    pub n_t_factor: usize,
    /// Bin-refinement resolution for `ompbr`.
    #[serde(default = "default_delta_mu")]
    pub refine_delta_mu: f64,
    #[serde(default)]
    pub xi_mode: XiMode,
    /// ξ value when `xi_mode = "absolute"`.
    #[serde(default)]
    pub xi_value: Option<f64>,
    /// Iteration cap; defaults to `3N/4`.
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub bpdn: BpdnSpec,
}

fn one_usize() -> usize {
    1
}
fn default_delta_mu() -> f64 {
    0.01
}

impl EstimatorSpec {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.method)
    }

    pub fn validate(&self, path: &str, grid: &GridSpec, task: &TaskSpec) -> Result<()> {
        let known = [
            "ml-m",
            "genie-ls",
            "omp",
            "ompbr",
            "bpdn-direct",
            "bpdn-ls",
            "perfect-csi",
        ];
        if !known.contains(&self.method.as_str()) {
            return Err(Error::schema(
                format!("{path}.method"),
                format!("unknown method `{}`", self.method),
            ));
        }
        if self.method == "perfect-csi" && !matches!(task, TaskSpec::Ber { .. }) {
            return Err(Error::schema(
                format!("{path}.method"),
                "perfect-csi only applies to the BER task",
            ));
        }
        if matches!(task, TaskSpec::Ber { .. })
            && matches!(self.method.as_str(), "bpdn-direct" | "bpdn-ls")
        {
            return Err(Error::schema(
                format!("{path}.method"),
                "BPDN is not wired into the BER receiver",
            ));
        }
        if self.n_t_factor == 0 {
            return Err(Error::schema(
                format!("{path}.n_t_factor"),
                "must be ≥ 1",
            ));
        }
        if !(0.0 < self.refine_delta_mu && self.refine_delta_mu < 1.0) {
            return Err(Error::schema(
                format!("{path}.refine_delta_mu"),
                "must lie in (0, 1)",
            ));
        }
        if self.xi_mode == XiMode::Absolute && self.xi_value.is_none() {
            return Err(Error::schema(
                format!("{path}.xi_value"),
                "required when xi_mode = \"absolute\"",
            ));
        }
        if let Some(iters) = self.max_iters {
            if iters == 0 {
                return Err(Error::schema(format!("{path}.max_iters"), "must be ≥ 1"));
            }
        }
        if self.n_t_factor > 64 {
            return Err(Error::schema(
                format!("{path}.n_t_factor"),
                "dictionary would be unreasonably large",
            ));
        }
        let _ = grid;
        Ok(())
    }

    /// Stop threshold for one sweep point.
    pub fn xi(&self, pilot_count: usize, sigma2: f64) -> f64 {
        match self.xi_mode {
            XiMode::NoiseFloor => pilot_count as f64 * sigma2,
            XiMode::Absolute => self.xi_value.expect("validated"),
        }
    }

    pub fn dictionary_config(&self, grid: &GridSpec, sigma2: f64) -> DictionaryConfig {
        let refine = if self.method == "ompbr" {
            Refinement::BinarySearch {
                delta_mu: self.refine_delta_mu,
            }
        } else {
            Refinement::None
        };
        DictionaryConfig {
            dict_size: self.n_t_factor * grid.fir_len,
            refine,
            stop_threshold: self.xi(grid.pilot_count, sigma2),
            max_iters: self.max_iters.unwrap_or(grid.pilot_count * 3 / 4),
        }
    }

    pub fn bpdn_config(&self) -> BpdnConfig {
        BpdnConfig {
            inner_tol: self.bpdn.inner_tol,
            max_inner: self.bpdn.max_inner,
            threshold_frac: self.bpdn.threshold_frac,
        }
    }

    pub fn receiver_estimator(&self) -> Result<ReceiverEstimator> {
        Ok(match self.method.as_str() {
            "perfect-csi" => ReceiverEstimator::PerfectCsi,
            "ml-m" => ReceiverEstimator::MlM,
            "genie-ls" => ReceiverEstimator::GenieLs,
            "omp" => ReceiverEstimator::Omp {
                dict_factor: self.n_t_factor,
            },
            "ompbr" => ReceiverEstimator::Ompbr {
                dict_factor: self.n_t_factor,
                delta_mu: self.refine_delta_mu,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "method `{other}` has no receiver path"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModulationSpec {
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
}

impl ModulationSpec {
    pub fn to_modulation(self) -> Modulation {
        match self {
            ModulationSpec::Qpsk => Modulation::Qpsk,
            ModulationSpec::Qam16 => Modulation::Qam16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// Estimator MSE / recovered-count sweep over the SNR grid.
    Estimation,
    /// Noise-free oracle-residual curves and their CI bounds.
    RhoBounds {
        #[serde(default = "default_d_max")]
        d_max: usize,
    },
    /// Empirical CDF of the adjusted compressibility index per channel.
    CiCdf,
    /// Histograms of the CI-growth ratios at selected depths.
    CiHist {
        #[serde(default = "default_depths")]
        depths: Vec<usize>,
    },
    /// Link-level BER sweep.
    Ber {
        modulation: ModulationSpec,
        #[serde(default = "default_frames")]
        frames_per_block: usize,
    },
}

fn default_d_max() -> usize {
    40
}
fn default_depths() -> Vec<usize> {
    vec![1, 2, 5, 10, 20, 40]
}
fn default_frames() -> usize {
    10
}

impl TaskSpec {
    pub fn validate(&self, path: &str, spec: &ExperimentSpec) -> Result<()> {
        let needs_snr = matches!(self, TaskSpec::Estimation | TaskSpec::Ber { .. });
        if needs_snr && spec.snr_grid_db.is_empty() {
            return Err(Error::schema("snr_grid_db", "this task sweeps SNR"));
        }
        let needs_estimators = matches!(self, TaskSpec::Estimation | TaskSpec::Ber { .. });
        if needs_estimators && spec.estimators.is_empty() {
            return Err(Error::schema("estimators", "this task needs estimators"));
        }
        match self {
            TaskSpec::RhoBounds { d_max } => {
                if *d_max > spec.grid.fir_len {
                    return Err(Error::schema(
                        format!("{path}.d_max"),
                        format!("exceeds FIR length {}", spec.grid.fir_len),
                    ));
                }
            }
            TaskSpec::CiHist { depths } => {
                if depths.is_empty() {
                    return Err(Error::schema(format!("{path}.depths"), "must not be empty"));
                }
                if depths.iter().any(|&d| d == 0 || d > spec.grid.fir_len / 2) {
                    return Err(Error::schema(
                        format!("{path}.depths"),
                        format!("each depth must be in 1..={}", spec.grid.fir_len / 2),
                    ));
                }
            }
            TaskSpec::Ber {
                frames_per_block, ..
            } => {
                if *frames_per_block < 2 {
                    return Err(Error::schema(
                        format!("{path}.frames_per_block"),
                        "need at least one data frame after the pilot frame",
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }
}
