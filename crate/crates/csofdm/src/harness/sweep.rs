//! The Monte Carlo sweep engine: one deterministic runner per task kind.

use super::output::{format_f64, sidecar, write_csv_atomic, write_json_atomic};
use super::spec::TaskSpec;
use super::{sigma2_for_snr_db, ExperimentSpec};
use crate::compressibility::{
    compressibility_index, compressibility_index_amplitudes, ci_growth_check,
    oracle_residual_profile, rho_lower_bound_amplitude, rho_lower_bound_geometric,
    rho_lower_bound_product,
};
use crate::error::{Error, Result};
use crate::estimators::{
    estimate_genie_ls, estimate_ml_m, run_bpdn_hinted, run_omp_with, DelayDictionary,
};
use crate::linalg::CVector;
use crate::multipath::{build_time_channel, sample_amplitudes, sample_delays, ChannelModel};
use crate::ofdm::{observe_pilots, unit_pilots, DftOps};
use crate::receiver::{run_ber_trial, BerConfig};
use crate::rng::{derive_seed, substream};
use rayon::prelude::*;
use std::collections::HashMap;
use std::path::PathBuf;

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationRow {
    pub snr_db: f64,
    pub label: String,
    pub trials: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub lhat_mean: f64,
    pub lhat_std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoBoundsRow {
    pub d: usize,
    /// Mean remaining power fraction `K·ρ̄(d)/‖h‖²`.
    pub mean_rho_bar: f64,
    pub bound_product: f64,
    pub bound_geometric_h: f64,
    pub bound_geometric_alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdfPoint {
    pub adjusted_ci: f64,
    pub empirical_cdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiHistBin {
    pub d: usize,
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRow {
    pub snr_db: f64,
    pub method: String,
    pub modulation: String,
    pub ber: f64,
    pub symbols: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepResult {
    Estimation(Vec<EstimationRow>),
    RhoBounds(Vec<(String, Vec<RhoBoundsRow>)>),
    CiCdf(Vec<(String, Vec<CdfPoint>)>),
    CiHist {
        bins: Vec<CiHistBin>,
        growth: Vec<(usize, f64)>,
    },
    Ber(Vec<BerRow>),
}

#[derive(Debug)]
pub struct SweepSummary {
    pub files: Vec<PathBuf>,
    pub result: SweepResult,
}

/// Validates and runs the experiment, then writes its CSV tables and the
/// `.meta.json` sidecar atomically into `spec.outputs`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepSummary> {
    spec.validate()?;
    let result = match &spec.task {
        TaskSpec::Estimation => SweepResult::Estimation(run_estimation(spec)?),
        TaskSpec::RhoBounds { d_max } => SweepResult::RhoBounds(run_rho_bounds(spec, *d_max)?),
        TaskSpec::CiCdf => SweepResult::CiCdf(run_ci_cdf(spec)?),
        TaskSpec::CiHist { depths } => {
            let (bins, growth) = run_ci_hist(spec, depths)?;
            SweepResult::CiHist { bins, growth }
        }
        TaskSpec::Ber {
            modulation,
            frames_per_block,
        } => SweepResult::Ber(run_ber(spec, modulation.to_modulation(), *frames_per_block)?),
    };
    let files = emit(spec, &result)?;
    Ok(SweepSummary { files, result })
}

struct ChannelRuntime {
    name: String,
    model: ChannelModel,
    /// Channels with identical (pulse, delay) blocks share delay draws.
    delay_group: usize,
}

fn channel_runtimes(spec: &ExperimentSpec) -> Result<Vec<ChannelRuntime>> {
    let mut out: Vec<ChannelRuntime> = Vec::new();
    let mut groups: Vec<(super::PulseSpec, super::DelaySpec)> = Vec::new();
    for ch in &spec.channels {
        let key = (ch.pulse.clone(), ch.delay.clone());
        let delay_group = groups
            .iter()
            .position(|g| *g == key)
            .unwrap_or_else(|| {
                groups.push(key);
                groups.len() - 1
            });
        out.push(ChannelRuntime {
            name: ch.name.clone(),
            model: ch.to_model(&spec.grid)?,
            delay_group,
        });
    }
    Ok(out)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

const TAG_DELAYS: u64 = 0xD0;
const TAG_AMPLITUDES: u64 = 0xA0;
const TAG_NOISE: u64 = 0xE0;
const TAG_NOISEFREE: u64 = 0x12;
const TAG_BER: u64 = 0xBE;

/// One channel draw shared by every estimator of a sweep cell.
fn draw_channel(
    spec: &ExperimentSpec,
    ch: &ChannelRuntime,
    ch_idx: usize,
    snr_idx: u64,
    trial: u64,
) -> Result<(crate::multipath::MpcSet, crate::multipath::TimeChannel)> {
    let mut rng_d = substream(spec.seed, &[TAG_DELAYS, snr_idx, trial, ch.delay_group as u64]);
    let delays = sample_delays(&ch.model.delays, &mut rng_d);
    let mut rng_a = substream(spec.seed, &[TAG_AMPLITUDES, snr_idx, trial, ch_idx as u64]);
    let mpcs = sample_amplitudes(&ch.model.amplitudes, &delays, ch.model.total_power, &mut rng_a)?
        .merged(1e-6 * ch.model.pulse.sample_period);
    let h = build_time_channel(&mpcs, &ch.model.pulse)?;
    Ok((mpcs, h))
}

fn run_estimation(spec: &ExperimentSpec) -> Result<Vec<EstimationRow>> {
    let grid = spec.grid.to_grid();
    let ops = DftOps::new(grid);
    let channels = channel_runtimes(spec)?;
    let k = grid.dft_size() as f64;

    // dictionaries depend on (pulse, N_T) only; share them across trials
    let mut dictionaries: HashMap<(usize, usize), DelayDictionary> = HashMap::new();
    for (ci, ch) in channels.iter().enumerate() {
        for est in &spec.estimators {
            if matches!(est.method.as_str(), "omp" | "ompbr" | "bpdn-direct" | "bpdn-ls") {
                let size = est.n_t_factor * grid.fir_len();
                dictionaries
                    .entry((ci, size))
                    .or_insert_with(|| {
                        DelayDictionary::new(&ops, &ch.model.pulse, size).expect("validated size")
                    });
            }
        }
    }

    let cells = channels.len() * spec.estimators.len();
    let mut rows = Vec::with_capacity(spec.snr_grid_db.len() * cells);
    for (snr_idx, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let sigma2 = sigma2_for_snr_db(snr_db, grid.dft_size());
        // Deterministic penalty hints for the BPDN cells: solve trial 0
        // unhinted and bracket every other trial around its penalty.
        let mut lambda_hints: HashMap<(usize, usize), f64> = HashMap::new();
        for (ci, ch) in channels.iter().enumerate() {
            for (ei, est) in spec.estimators.iter().enumerate() {
                if matches!(est.method.as_str(), "bpdn-direct" | "bpdn-ls") {
                    let (mpcs, h) = draw_channel(spec, ch, ci, snr_idx as u64, 0)?;
                    let _ = mpcs;
                    let mut rng_n =
                        substream(spec.seed, &[TAG_NOISE, snr_idx as u64, 0, ci as u64]);
                    let obs = observe_pilots(
                        h.taps(),
                        &ops,
                        &unit_pilots(grid.pilot_count()),
                        sigma2,
                        &mut rng_n,
                    )?;
                    let cfg = est.dictionary_config(&spec.grid, sigma2);
                    let dict = &dictionaries[&(ci, cfg.dict_size)];
                    let (_, lambda) = run_bpdn_hinted(
                        dict,
                        &obs,
                        &ops,
                        &ch.model.pulse,
                        &cfg,
                        &est.bpdn_config(),
                        est.method == "bpdn-ls",
                        None,
                    )?;
                    lambda_hints.insert((ci, ei), lambda);
                }
            }
        }
        let per_trial: Vec<Vec<(f64, f64)>> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<Vec<(f64, f64)>> {
                let mut cell_values = Vec::with_capacity(cells);
                for (ci, ch) in channels.iter().enumerate() {
                    let (mpcs, h) = draw_channel(spec, ch, ci, snr_idx as u64, trial)?;
                    let mut rng_n =
                        substream(spec.seed, &[TAG_NOISE, snr_idx as u64, trial, ci as u64]);
                    let obs = observe_pilots(
                        h.taps(),
                        &ops,
                        &unit_pilots(grid.pilot_count()),
                        sigma2,
                        &mut rng_n,
                    )?;
                    let h_k = ops.f_km_apply(h.taps());
                    for est in &spec.estimators {
                        let estimate = match est.method.as_str() {
                            "ml-m" => estimate_ml_m(&obs, &ops),
                            "genie-ls" => estimate_genie_ls(&obs, &ops, &mpcs, &ch.model.pulse)?,
                            "omp" | "ompbr" => {
                                let cfg = est.dictionary_config(&spec.grid, sigma2);
                                let dict = &dictionaries[&(ci, cfg.dict_size)];
                                run_omp_with(dict, &obs, &ops, &ch.model.pulse, &cfg)
                            }
                            "bpdn-direct" | "bpdn-ls" => {
                                let cfg = est.dictionary_config(&spec.grid, sigma2);
                                let dict = &dictionaries[&(ci, cfg.dict_size)];
                                let ei = spec
                                    .estimators
                                    .iter()
                                    .position(|e| std::ptr::eq(e, est))
                                    .expect("estimator is from this spec");
                                run_bpdn_hinted(
                                    dict,
                                    &obs,
                                    &ops,
                                    &ch.model.pulse,
                                    &cfg,
                                    &est.bpdn_config(),
                                    est.method == "bpdn-ls",
                                    lambda_hints.get(&(ci, ei)).copied(),
                                )?
                                .0
                            }
                            other => {
                                return Err(Error::InvalidArgument(format!(
                                    "method `{other}` not valid for the estimation task"
                                )))
                            }
                        };
                        let mse = (&estimate.h_k - &h_k).norm_squared() / k;
                        cell_values.push((mse, estimate.l_hat as f64));
                    }
                }
                Ok(cell_values)
            })
            .collect::<Result<_>>()?;

        for (ci, ch) in channels.iter().enumerate() {
            for (ei, est) in spec.estimators.iter().enumerate() {
                let cell = ci * spec.estimators.len() + ei;
                let mses: Vec<f64> = per_trial.iter().map(|t| t[cell].0).collect();
                let lhats: Vec<f64> = per_trial.iter().map(|t| t[cell].1).collect();
                let (mse_mean, mse_std) = mean_std(&mses);
                let (lhat_mean, lhat_std) = mean_std(&lhats);
                rows.push(EstimationRow {
                    snr_db,
                    label: cell_label(spec, &ch.name, est.label()),
                    trials: spec.trials,
                    mse_mean,
                    mse_std,
                    lhat_mean,
                    lhat_std,
                });
            }
        }
    }
    Ok(rows)
}

fn cell_label(spec: &ExperimentSpec, channel: &str, estimator: &str) -> String {
    if spec.channels.len() > 1 {
        format!("{estimator}@{channel}")
    } else {
        estimator.to_string()
    }
}

fn run_rho_bounds(spec: &ExperimentSpec, d_max: usize) -> Result<Vec<(String, Vec<RhoBoundsRow>)>> {
    let grid = spec.grid.to_grid();
    let channels = channel_runtimes(spec)?;
    let k = grid.dft_size() as f64;
    let mut out = Vec::with_capacity(channels.len());
    for (ci, ch) in channels.iter().enumerate() {
        let sums: Vec<[f64; 4]> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<Vec<[f64; 4]>> {
                let (mpcs, h) = draw_channel(spec, ch, ci, TAG_NOISEFREE, trial)?;
                let profile = oracle_residual_profile(h.taps(), grid.dft_size())?;
                let ci_h = compressibility_index(h.taps())?.ci;
                let ci_a = compressibility_index_amplitudes(mpcs.amplitudes())?.ci;
                // all four columns are remaining power fractions, so the
                // curves share one normalization regardless of the
                // realized channel power
                let total = k * profile.rho_bar[0];
                let mut rows = Vec::with_capacity(d_max + 1);
                for d in 0..=d_max {
                    rows.push([
                        k * profile.rho_bar[d] / total,
                        rho_lower_bound_product(&profile, d).0,
                        rho_lower_bound_geometric(ci_h, grid.fir_len(), d).0,
                        rho_lower_bound_amplitude(ci_a, mpcs.len(), d).0,
                    ]);
                }
                Ok(rows)
            })
            .try_reduce(
                || vec![[0.0; 4]; d_max + 1],
                |mut acc, rows| {
                    for (a, r) in acc.iter_mut().zip(rows) {
                        for (x, y) in a.iter_mut().zip(r) {
                            *x += y;
                        }
                    }
                    Ok(acc)
                },
            )?;
        let n = spec.trials as f64;
        let rows: Vec<RhoBoundsRow> = sums
            .iter()
            .enumerate()
            .map(|(d, s)| RhoBoundsRow {
                d,
                mean_rho_bar: s[0] / n,
                bound_product: s[1] / n,
                bound_geometric_h: s[2] / n,
                bound_geometric_alpha: s[3] / n,
            })
            .collect();
        out.push((ch.name.clone(), rows));
    }
    Ok(out)
}

fn adjusted_ci(h: &CVector, path_count: usize, fir_len: usize) -> Result<f64> {
    Ok(fir_len as f64 / path_count as f64 * compressibility_index(h)?.ci)
}

fn run_ci_cdf(spec: &ExperimentSpec) -> Result<Vec<(String, Vec<CdfPoint>)>> {
    let grid = spec.grid.to_grid();
    let channels = channel_runtimes(spec)?;
    let mut out = Vec::with_capacity(channels.len());
    for (ci, ch) in channels.iter().enumerate() {
        let mut values: Vec<f64> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|trial| -> Result<f64> {
                let (mpcs, h) = draw_channel(spec, ch, ci, TAG_NOISEFREE, trial)?;
                adjusted_ci(h.taps(), mpcs.len(), grid.fir_len())
            })
            .collect::<Result<_>>()?;
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = values.len() as f64;
        let points = values
            .iter()
            .enumerate()
            .map(|(i, &v)| CdfPoint {
                adjusted_ci: v,
                empirical_cdf: (i + 1) as f64 / n,
            })
            .collect();
        out.push((ch.name.clone(), points));
    }
    Ok(out)
}

fn run_ci_hist(
    spec: &ExperimentSpec,
    depths: &[usize],
) -> Result<(Vec<CiHistBin>, Vec<(usize, f64)>)> {
    let channels = channel_runtimes(spec)?;
    let ch = &channels[0];
    let d_top = (spec.grid.fir_len / 2).min(40);

    // ratios[trial][d-1]
    let ratios: Vec<Vec<f64>> = (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Vec<f64>> {
            let (_, h) = draw_channel(spec, ch, 0, TAG_NOISEFREE, trial)?;
            Ok(ci_growth_check(h.taps())?.ratios)
        })
        .collect::<Result<_>>()?;

    const BIN_WIDTH: f64 = 0.05;
    const BIN_COUNT: usize = 40; // covers ratios in [0, 2); overflow clamps
    let mut bins = Vec::new();
    for &d in depths {
        let mut counts = vec![0usize; BIN_COUNT];
        let mut total = 0usize;
        for r in &ratios {
            if let Some(&val) = r.get(d - 1) {
                let idx = ((val / BIN_WIDTH) as usize).min(BIN_COUNT - 1);
                counts[idx] += 1;
                total += 1;
            }
        }
        for (i, &count) in counts.iter().enumerate() {
            bins.push(CiHistBin {
                d,
                bin_lo: i as f64 * BIN_WIDTH,
                bin_hi: (i + 1) as f64 * BIN_WIDTH,
                count,
                fraction: if total == 0 {
                    0.0
                } else {
                    count as f64 / total as f64
                },
            });
        }
    }

    let mut growth = Vec::with_capacity(d_top);
    for d in 1..=d_top {
        let mut le_one = 0usize;
        let mut total = 0usize;
        for r in &ratios {
            if let Some(&val) = r.get(d - 1) {
                total += 1;
                if val <= 1.0 {
                    le_one += 1;
                }
            }
        }
        growth.push((
            d,
            if total == 0 {
                f64::NAN
            } else {
                le_one as f64 / total as f64
            },
        ));
    }
    Ok((bins, growth))
}

fn run_ber(
    spec: &ExperimentSpec,
    modulation: crate::receiver::Modulation,
    frames_per_block: usize,
) -> Result<Vec<BerRow>> {
    let grid = spec.grid.to_grid();
    let ops = DftOps::new(grid);
    let channels = channel_runtimes(spec)?;
    let cfg = BerConfig {
        frames_per_block,
        blocks: spec.trials,
    };
    let mut rows = Vec::new();
    for (snr_idx, &snr_db) in spec.snr_grid_db.iter().enumerate() {
        let sigma2 = sigma2_for_snr_db(snr_db, grid.dft_size());
        for (ci, ch) in channels.iter().enumerate() {
            for (ei, est) in spec.estimators.iter().enumerate() {
                let rec = est.receiver_estimator()?;
                let seed = derive_seed(
                    spec.seed,
                    &[TAG_BER, snr_idx as u64, ci as u64, ei as u64],
                );
                let res = run_ber_trial(&ch.model, &ops, rec, modulation, sigma2, &cfg, seed)?;
                rows.push(BerRow {
                    snr_db,
                    method: cell_label(spec, &ch.name, est.label()),
                    modulation: modulation.name().to_string(),
                    ber: res.ber,
                    symbols: res.symbols,
                });
            }
        }
    }
    Ok(rows)
}

fn emit(spec: &ExperimentSpec, result: &SweepResult) -> Result<Vec<PathBuf>> {
    let dir = &spec.outputs;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    match result {
        SweepResult::Estimation(rows) => {
            let path = dir.join(format!("{}.csv", spec.name));
            write_csv_atomic(
                &path,
                &[
                    "snr_db",
                    "method",
                    "trials",
                    "mse_mean",
                    "mse_std",
                    "lhat_mean",
                    "lhat_std",
                ],
                rows.iter().map(|r| {
                    vec![
                        format_f64(r.snr_db),
                        r.label.clone(),
                        r.trials.to_string(),
                        format_f64(r.mse_mean),
                        format_f64(r.mse_std),
                        format_f64(r.lhat_mean),
                        format_f64(r.lhat_std),
                    ]
                }),
            )?;
            files.push(path);
        }
        SweepResult::RhoBounds(tables) => {
            for (channel, rows) in tables {
                let path = dir.join(format!("{}.{}.csv", spec.name, channel));
                write_csv_atomic(
                    &path,
                    &[
                        "d",
                        "mean_rho_bar",
                        "bound_product",
                        "bound_geometric_h",
                        "bound_geometric_alpha",
                    ],
                    rows.iter().map(|r| {
                        vec![
                            r.d.to_string(),
                            format_f64(r.mean_rho_bar),
                            format_f64(r.bound_product),
                            format_f64(r.bound_geometric_h),
                            format_f64(r.bound_geometric_alpha),
                        ]
                    }),
                )?;
                files.push(path);
            }
        }
        SweepResult::CiCdf(tables) => {
            for (channel, points) in tables {
                let path = dir.join(format!("{}.{}.csv", spec.name, channel));
                write_csv_atomic(
                    &path,
                    &["adjusted_ci", "empirical_cdf"],
                    points.iter().map(|p| {
                        vec![format_f64(p.adjusted_ci), format_f64(p.empirical_cdf)]
                    }),
                )?;
                files.push(path);
            }
        }
        SweepResult::CiHist { bins, growth } => {
            let hist_path = dir.join(format!("{}.hist.csv", spec.name));
            write_csv_atomic(
                &hist_path,
                &["d", "bin_lo", "bin_hi", "count", "fraction"],
                bins.iter().map(|b| {
                    vec![
                        b.d.to_string(),
                        format_f64(b.bin_lo),
                        format_f64(b.bin_hi),
                        b.count.to_string(),
                        format_f64(b.fraction),
                    ]
                }),
            )?;
            files.push(hist_path);
            let growth_path = dir.join(format!("{}.growth.csv", spec.name));
            write_csv_atomic(
                &growth_path,
                &["d", "frac_ratio_le_1"],
                growth
                    .iter()
                    .map(|(d, f)| vec![d.to_string(), format_f64(*f)]),
            )?;
            files.push(growth_path);
        }
        SweepResult::Ber(rows) => {
            let path = dir.join(format!("{}.csv", spec.name));
            write_csv_atomic(
                &path,
                &["snr_db", "method", "modulation", "ber", "symbols"],
                rows.iter().map(|r| {
                    vec![
                        format_f64(r.snr_db),
                        r.method.clone(),
                        r.modulation.clone(),
                        format_f64(r.ber),
                        r.symbols.to_string(),
                    ]
                }),
            )?;
            files.push(path);
        }
    }
    let meta_path = dir.join(format!("{}.meta.json", spec.name));
    write_json_atomic(&meta_path, &sidecar(spec, &files))?;
    files.push(meta_path);
    Ok(files)
}
