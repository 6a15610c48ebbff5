//! Runs every cell of an experiment and renders the result table.

use std::io::Write;

use serde::Serialize;
use tdcb_core::simulator::{run_trials_multi, Scheme, SimConfig, SumRateResult};

use crate::error::CliError;
use crate::spec::ExperimentSpec;

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 10] = [
    "scheme",
    "geometry",
    "k",
    "sigma_deg",
    "total_bits",
    "snr_db",
    "trials",
    "seed",
    "mean_sum_rate",
    "std_error",
];

/// One output row; rates carry 17 significant digits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub scheme: String,
    pub geometry: String,
    pub k: usize,
    pub sigma_deg: f64,
    pub total_bits: u32,
    pub snr_db: f64,
    pub trials: usize,
    pub seed: u64,
    pub mean_sum_rate: String,
    pub std_error: String,
}

impl Row {
    fn new(r: &SumRateResult) -> Self {
        let c = &r.config_echo;
        Self {
            scheme: c.scheme.as_str().to_owned(),
            geometry: c.geometry.label(),
            k: c.scheduled_k,
            sigma_deg: c.profile.cluster_rms,
            total_bits: c.total_bits,
            snr_db: c.snr_db,
            trials: c.trials,
            seed: c.seed,
            mean_sum_rate: format!("{:.16e}", r.mean_sum_rate),
            std_error: format!("{:.16e}", r.std_error),
        }
    }
}

/// Key under which cells differing only in scheme share their draws.
fn draw_key(cfg: &SimConfig) -> SimConfig {
    SimConfig {
        scheme: Scheme::PerfectCdi,
        ..cfg.clone()
    }
}

fn describe(cfg: &SimConfig) -> String {
    format!(
        "cell scheme={} geometry={} k={} sigma={} bits={} snr={}",
        cfg.scheme,
        cfg.geometry.label(),
        cfg.scheduled_k,
        cfg.profile.cluster_rms,
        cfg.total_bits,
        cfg.snr_db
    )
}

/// Full results of every cell, in cell order. `seed` overrides the spec.
pub fn run_experiment_results(spec: &ExperimentSpec, seed: Option<u64>) -> Result<Vec<SumRateResult>, CliError> {
    let configs = spec
        .cells()
        .iter()
        .map(|c| {
            let mut cfg = c.to_sim_config()?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let mut results: Vec<Option<SumRateResult>> = vec![None; configs.len()];
    for i in 0..configs.len() {
        if results[i].is_some() {
            continue;
        }
        let key = draw_key(&configs[i]);
        let members: Vec<usize> = (i..configs.len())
            .filter(|&j| results[j].is_none() && draw_key(&configs[j]) == key)
            .collect();
        let mut schemes: Vec<Scheme> = members.iter().map(|&j| configs[j].scheme).collect();
        schemes.sort();
        schemes.dedup();
        let outcome = run_trials_multi::<f64>(&configs[i], &schemes).map_err(|source| CliError::Cell {
            context: describe(&configs[i]),
            source,
        })?;
        for &j in &members {
            let pos = schemes
                .iter()
                .position(|&s| s == configs[j].scheme)
                .expect("scheme was requested");
            results[j] = Some(outcome[pos].clone());
        }
    }
    Ok(results.into_iter().map(|r| r.expect("every cell was run")).collect())
}

pub fn run_experiment(spec: &ExperimentSpec, seed: Option<u64>) -> Result<Vec<Row>, CliError> {
    Ok(run_experiment_results(spec, seed)?.iter().map(Row::new).collect())
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
