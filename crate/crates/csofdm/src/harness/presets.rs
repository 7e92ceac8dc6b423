//! Canned experiment specs for the standard figures.
//!
//! Every preset runs the calibrated channel models from
//! `configs/channel_models.toml` on the desk-scale grid K = 512,
//! M = N = 128 (sinc pulse, T = 2.5 ns) with 10³ trials.

use super::spec::{ChannelSpec, EstimatorSpec, GridSpec, ModulationSpec, TaskSpec, XiMode};
use super::ExperimentSpec;
use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::PathBuf;

const CHANNEL_MODELS: &str = include_str!("../../configs/channel_models.toml");

#[derive(Deserialize)]
struct ChannelFile {
    channels: Vec<ChannelSpec>,
}

fn channel_blocks(names: &[&str]) -> Vec<ChannelSpec> {
    let file: ChannelFile = toml::from_str(CHANNEL_MODELS).expect("bundled channel models parse");
    names
        .iter()
        .map(|name| {
            file.channels
                .iter()
                .find(|c| c.name == *name)
                .unwrap_or_else(|| panic!("bundled channel `{name}` exists"))
                .clone()
        })
        .collect()
}

fn desk_grid() -> GridSpec {
    GridSpec {
        dft_size: 512,
        fir_len: 128,
        pilot_count: 128,
    }
}

fn snr_grid() -> Vec<f64> {
    (-2..=6).map(|i| 5.0 * i as f64).collect()
}

fn estimator(method: &str, label: Option<&str>, n_t_factor: usize) -> EstimatorSpec {
    EstimatorSpec {
        method: method.to_string(),
        label: label.map(|s| s.to_string()),
        n_t_factor,
        refine_delta_mu: 0.01,
        xi_mode: XiMode::NoiseFloor,
        xi_value: None,
        max_iters: None,
        bpdn: Default::default(),
    }
}

pub const PRESET_NAMES: [&str; 9] = [
    "fig-lhat",
    "fig-mse",
    "fig-rho-bounds",
    "fig-ci-hist",
    "fig-ci-cdf",
    "fig-model-mse",
    "fig-omp-vs-bpdn",
    "fig-ber-qpsk",
    "fig-ber-16qam",
];

pub fn preset_names() -> &'static [&'static str] {
    &PRESET_NAMES
}

/// Builds the spec for one preset name. Unknown names report the full
/// preset list.
pub fn preset(name: &str) -> Result<ExperimentSpec> {
    let base = ExperimentSpec {
        name: name.to_string(),
        seed: 7,
        trials: 1000,
        snr_grid_db: snr_grid(),
        task: TaskSpec::Estimation,
        grid: desk_grid(),
        channels: channel_blocks(&["lognormal-decay"]),
        estimators: Vec::new(),
        outputs: PathBuf::from("out").join(name),
    };
    let spec = match name {
        "fig-lhat" => ExperimentSpec {
            estimators: vec![
                estimator("omp", Some("omp-nt-m"), 1),
                estimator("omp", Some("omp-nt-4m"), 4),
                estimator("ompbr", None, 1),
            ],
            ..base
        },
        "fig-mse" => ExperimentSpec {
            estimators: vec![
                estimator("ml-m", None, 1),
                estimator("genie-ls", None, 1),
                estimator("omp", Some("omp-nt-m"), 1),
                estimator("omp", Some("omp-nt-4m"), 4),
                estimator("ompbr", None, 1),
            ],
            ..base
        },
        "fig-rho-bounds" => ExperimentSpec {
            task: TaskSpec::RhoBounds { d_max: 40 },
            snr_grid_db: Vec::new(),
            channels: channel_blocks(&[
                "lognormal-decay",
                "lognormal-flat",
                "rayleigh-decay",
                "rayleigh-flat",
            ]),
            ..base
        },
        "fig-ci-hist" => ExperimentSpec {
            task: TaskSpec::CiHist {
                depths: vec![1, 2, 5, 10, 20, 40],
            },
            snr_grid_db: Vec::new(),
            ..base
        },
        "fig-ci-cdf" => ExperimentSpec {
            task: TaskSpec::CiCdf,
            snr_grid_db: Vec::new(),
            channels: channel_blocks(&[
                "lognormal-decay",
                "lognormal-flat",
                "rayleigh-decay",
                "rayleigh-flat",
            ]),
            ..base
        },
        "fig-model-mse" => ExperimentSpec {
            channels: channel_blocks(&[
                "lognormal-decay",
                "lognormal-flat",
                "rayleigh-decay",
                "rayleigh-flat",
            ]),
            estimators: vec![estimator("ompbr", None, 1)],
            ..base
        },
        "fig-omp-vs-bpdn" => ExperimentSpec {
            channels: channel_blocks(&["lognormal-decay", "rayleigh-flat"]),
            // the ℓ1 solves dominate the runtime; a coarser SNR grid keeps
            // this preset in the same ballpark as the others
            snr_grid_db: (-1..=3).map(|i| 10.0 * i as f64).collect(),
            estimators: vec![
                estimator("ompbr", None, 1),
                estimator("omp", Some("omp-nt-4m"), 4),
                estimator("bpdn-direct", None, 4),
                estimator("bpdn-ls", None, 4),
            ],
            ..base
        },
        "fig-ber-qpsk" | "fig-ber-16qam" => ExperimentSpec {
            task: TaskSpec::Ber {
                modulation: if name == "fig-ber-qpsk" {
                    ModulationSpec::Qpsk
                } else {
                    ModulationSpec::Qam16
                },
                frames_per_block: 10,
            },
            snr_grid_db: (0..=7).map(|i| 5.0 * i as f64).collect(),
            estimators: vec![
                estimator("perfect-csi", None, 1),
                estimator("ml-m", None, 1),
                estimator("genie-ls", None, 1),
                estimator("omp", Some("omp-nt-m"), 1),
                estimator("ompbr", None, 1),
            ],
            ..base
        },
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown preset `{other}`; available presets: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in preset_names() {
            let spec = preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&spec.name, name);
            assert_eq!(spec.trials, 1000);
        }
    }

    #[test]
    fn desk_scale_grid_values() {
        let spec = preset("fig-mse").unwrap();
        assert_eq!(spec.grid.dft_size, 512);
        assert_eq!(spec.grid.fir_len, 128);
        assert_eq!(spec.grid.pilot_count, 128);
        assert!((spec.channels[0].pulse.t_ns - 2.5).abs() < 1e-12);
        assert_eq!(spec.channels[0].pulse.kind, "sinc");
    }

    #[test]
    fn lhat_preset_estimator_set() {
        let spec = preset("fig-lhat").unwrap();
        let labels: Vec<&str> = spec.estimators.iter().map(|e| e.label()).collect();
        assert_eq!(labels, ["omp-nt-m", "omp-nt-4m", "ompbr"]);
        assert_eq!(spec.estimators[1].n_t_factor, 4);
        assert!((spec.estimators[2].refine_delta_mu - 0.01).abs() < 1e-12);
    }

    #[test]
    fn ber_presets_carry_modulation() {
        let spec = preset("fig-ber-qpsk").unwrap();
        assert!(matches!(
            spec.task,
            TaskSpec::Ber {
                modulation: ModulationSpec::Qpsk,
                ..
            }
        ));
        let spec = preset("fig-ber-16qam").unwrap();
        assert!(matches!(
            spec.task,
            TaskSpec::Ber {
                modulation: ModulationSpec::Qam16,
                ..
            }
        ));
    }

    #[test]
    fn unknown_preset_lists_options() {
        let err = preset("fig-nope").unwrap_err().to_string();
        for name in preset_names() {
            assert!(err.contains(name), "{err}");
        }
    }

    #[test]
    fn model_compare_uses_all_four_amplitude_kinds() {
        let spec = preset("fig-model-mse").unwrap();
        let kinds: Vec<&str> = spec
            .channels
            .iter()
            .map(|c| c.amplitude.kind.as_str())
            .collect();
        assert_eq!(
            kinds,
            [
                "lognormal-decay",
                "lognormal-flat",
                "rayleigh-decay",
                "rayleigh-flat"
            ]
        );
    }
}
