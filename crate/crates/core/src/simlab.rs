//! Seeded experiment orchestration: run matrices over algorithms, instances,
//! budgets and seeds, compute empirical losses and competitive ratios, and
//! emit plot-ready CSV/JSON data.

use crate::error::{Error, Result};
use crate::fmh::{fmh_run, FmhParams};
use crate::learner::{
    fixed_policy_run, fw_ame_fmh_run, fw_ame_run, uniform_baseline_run, Budget, EpisodeSchedule,
    LearnerOptions, LearnerTrace,
};
use crate::mdp::{garnet_generate, three_state_mdp, MdpModel};
use crate::rng::SeedableStream;
use crate::solver::fw_solve;
use crate::stats::{competitive_ratio, loss_empirical};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    /// the three-state chain with a low-variance middle state
    ThreeState { sigma2_mid: f64 },
    Garnet {
        states: usize,
        actions: usize,
        branching: usize,
        sigma2_min: f64,
        sigma2_max: f64,
        reversible: bool,
        instances: usize,
    },
    /// an MDP loaded from a JSON file
    File { path: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgoId {
    /// the episodic optimistic Frank-Wolfe learner
    FwAme,
    /// the learner with per-episode mixing post-processing
    FwAmeFmh,
    /// the uniform-policy baseline
    Uniform,
    /// execute the asymptotically optimal stationary policy
    Asymptotic,
    /// execute the faster-mixing heuristic applied to the asymptotic policy
    Fmh,
    /// the learner with a k^m episode schedule
    PowerSchedule { m: u32 },
}

impl AlgoId {
    pub fn label(&self) -> String {
        match self {
            AlgoId::FwAme => "fw-ame".into(),
            AlgoId::FwAmeFmh => "fw-ame-fmh".into(),
            AlgoId::Uniform => "uniform".into(),
            AlgoId::Asymptotic => "asymptotic".into(),
            AlgoId::Fmh => "fmh".into(),
            AlgoId::PowerSchedule { m } => format!("fw-ame-m{m}"),
        }
    }

    fn code(&self) -> u64 {
        match self {
            AlgoId::FwAme => 1,
            AlgoId::FwAmeFmh => 2,
            AlgoId::Uniform => 3,
            AlgoId::Asymptotic => 4,
            AlgoId::Fmh => 5,
            AlgoId::PowerSchedule { m } => 100 + *m as u64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: String,
    pub instance: InstanceSpec,
    pub algorithms: Vec<AlgoId>,
    pub budgets: Vec<u64>,
    pub runs: usize,
    pub master_seed: u64,
    pub eta_floor: f64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.budgets.is_empty() || self.runs == 0 {
            return Err(Error::InvalidModel(
                "experiment needs at least one algorithm, budget and run".into(),
            ));
        }
        if self.budgets.iter().any(|&n| n == 0) {
            return Err(Error::InvalidModel("budgets must be positive".into()));
        }
        if let InstanceSpec::Garnet { instances, .. } = self.instance {
            if instances == 0 {
                return Err(Error::InvalidModel("need at least one instance".into()));
            }
        }
        Ok(())
    }
}

/// One completed cell of the run matrix.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentRecord {
    pub preset: String,
    pub algo: String,
    pub instance_seed: u64,
    pub run_seed: u64,
    pub n: u64,
    /// empirical estimation loss (1/S)Σ_s (μ̂(s) − μ(s))²
    pub loss: f64,
    pub n_loss: f64,
    /// competitive ratio n·LOSS/L(λ*) − 1
    pub ratio: f64,
    pub slem_avg: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ExperimentRecord>,
    /// cells that errored, as "(algo, instance, run, n): message"
    pub failures: Vec<String>,
    pub summary: serde_json::Value,
}

fn build_instances(cfg: &ExperimentConfig) -> Result<Vec<(u64, MdpModel<f64>)>> {
    let stream = SeedableStream::new(cfg.master_seed);
    match &cfg.instance {
        InstanceSpec::ThreeState { sigma2_mid } => Ok(vec![(0, three_state_mdp(*sigma2_mid))]),
        InstanceSpec::File { path } => {
            let text = std::fs::read_to_string(path)?;
            let value: serde_json::Value = serde_json::from_str(&text)?;
            Ok(vec![(0, MdpModel::from_json(&value)?)])
        }
        InstanceSpec::Garnet {
            states,
            actions,
            branching,
            sigma2_min,
            sigma2_max,
            reversible,
            instances,
        } => (0..*instances)
            .map(|i| {
                let seed = stream.derive(&[0x6A12, i as u64]);
                Ok((
                    seed,
                    garnet_generate(
                        *states,
                        *actions,
                        *branching,
                        *sigma2_min,
                        *sigma2_max,
                        *reversible,
                        seed,
                    )?,
                ))
            })
            .collect(),
    }
}

fn run_cell(
    mdp: &MdpModel<f64>,
    algo: AlgoId,
    n: u64,
    seed: u64,
    eta_floor: f64,
) -> Result<LearnerTrace<f64>> {
    let options = LearnerOptions {
        eta_floor,
        ..LearnerOptions::defaults(mdp, Budget::Steps(n), seed)
    };
    match algo {
        AlgoId::FwAme => fw_ame_run(mdp, &options),
        AlgoId::FwAmeFmh => fw_ame_fmh_run(mdp, &options),
        AlgoId::Uniform => uniform_baseline_run(mdp, &options),
        AlgoId::Asymptotic => {
            let solve = fw_solve(mdp, eta_floor, 1e-8, 200_000)?;
            fixed_policy_run(mdp, &solve.policy, &options)
        }
        AlgoId::Fmh => {
            let solve = fw_solve(mdp, eta_floor, 1e-8, 200_000)?;
            let outcome = fmh_run(mdp, &solve.policy, n, &FmhParams::default())?;
            fixed_policy_run(mdp, &outcome.policy, &options)
        }
        AlgoId::PowerSchedule { m } => {
            let options = LearnerOptions {
                schedule: EpisodeSchedule::power(m, 10),
                ..options
            };
            fw_ame_run(mdp, &options)
        }
    }
}

/// Runs the full matrix. Cells execute in a work pool; records are sorted
/// before aggregation so reruns with the same config produce identical bytes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let instances = build_instances(cfg)?;
    let stream = SeedableStream::new(cfg.master_seed);

    let mut cells = Vec::new();
    for (inst_idx, (inst_seed, _)) in instances.iter().enumerate() {
        for &algo in &cfg.algorithms {
            for &n in &cfg.budgets {
                for run in 0..cfg.runs {
                    let run_seed = stream.derive(&[inst_idx as u64, run as u64, algo.code()]);
                    cells.push((inst_idx, *inst_seed, algo, n, run, run_seed));
                }
            }
        }
    }

    let results: Vec<std::result::Result<ExperimentRecord, String>> = cells
        .par_iter()
        .map(|&(inst_idx, inst_seed, algo, n, run, run_seed)| {
            let mdp = &instances[inst_idx].1;
            match run_cell(mdp, algo, n, run_seed, cfg.eta_floor) {
                Ok(trace) => {
                    let (loss, n_loss) = loss_empirical(&[trace.mean_estimates()], mdp.mu(), n);
                    let ratio = competitive_ratio(n_loss, trace.l_star)
                        .map_err(|e| format!("({}, {inst_seed}, {run}, {n}): {e}", algo.label()))?;
                    Ok(ExperimentRecord {
                        preset: cfg.preset.clone(),
                        algo: algo.label(),
                        instance_seed: inst_seed,
                        run_seed,
                        n,
                        loss,
                        n_loss,
                        ratio,
                        slem_avg: trace.average_slem(),
                    })
                }
                Err(e) => Err(format!("({}, {inst_seed}, {run}, {n}): {e}", algo.label())),
            }
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(msg) => failures.push(msg),
        }
    }
    records.sort_by(|a, b| {
        (&a.algo, a.instance_seed, a.n, a.run_seed)
            .partial_cmp(&(&b.algo, b.instance_seed, b.n, b.run_seed))
            .unwrap()
    });
    failures.sort();
    let summary = summarize(cfg, &records, &failures);
    Ok(ExperimentOutput { records, failures, summary })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn summarize(
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
    failures: &[String],
) -> serde_json::Value {
    let mut groups: Vec<(String, u64)> = records.iter().map(|r| (r.algo.clone(), r.n)).collect();
    groups.sort();
    groups.dedup();
    let cells: Vec<serde_json::Value> = groups
        .iter()
        .map(|(algo, n)| {
            let mut losses: Vec<f64> = Vec::new();
            let mut ratios: Vec<f64> = Vec::new();
            let mut slems: Vec<f64> = Vec::new();
            for r in records.iter().filter(|r| &r.algo == algo && r.n == *n) {
                losses.push(r.n_loss);
                ratios.push(r.ratio);
                slems.push(r.slem_avg);
            }
            losses.sort_by(|a, b| a.partial_cmp(b).unwrap());
            ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            serde_json::json!({
                "algo": algo,
                "n": n,
                "runs": losses.len(),
                "n_loss_mean": mean(&losses),
                "n_loss_q05": quantile(&losses, 0.05),
                "n_loss_q95": quantile(&losses, 0.95),
                "ratio_mean": mean(&ratios),
                "ratio_q05": quantile(&ratios, 0.05),
                "ratio_q95": quantile(&ratios, 0.95),
                "slem_mean": mean(&slems),
            })
        })
        .collect();
    serde_json::json!({
        "preset": cfg.preset,
        "master_seed": cfg.master_seed,
        "cells": cells,
        "failures": failures,
    })
}

/// CSV with one row per completed cell.
pub fn write_records_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "preset", "algo", "instance_seed", "run_seed", "n", "loss", "n_loss", "ratio", "slem_avg",
    ])
    .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    for r in records {
        w.write_record([
            r.preset.clone(),
            r.algo.clone(),
            r.instance_seed.to_string(),
            r.run_seed.to_string(),
            r.n.to_string(),
            format!("{}", r.loss),
            format!("{}", r.n_loss),
            format!("{}", r.ratio),
            format!("{}", r.slem_avg),
        ])
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `<preset>.csv` and `<preset>_summary.json` under `dir`.
pub fn write_outputs(output: &ExperimentOutput, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{}.csv", cfg.preset));
    let file = std::fs::File::create(csv_path)?;
    write_records_csv(&output.records, file)?;
    let json_path = dir.join(format!("{}_summary.json", cfg.preset));
    std::fs::write(json_path, serde_json::to_string_pretty(&output.summary)?)?;
    Ok(())
}

/// The bundled experiment presets.
pub fn preset_catalog() -> Vec<ExperimentConfig> {
    vec![
        ExperimentConfig {
            preset: "three-state".into(),
            instance: InstanceSpec::ThreeState { sigma2_mid: 0.001 },
            algorithms: vec![AlgoId::Asymptotic, AlgoId::Fmh],
            budgets: vec![100, 178, 316, 562, 1000],
            runs: 100,
            master_seed: 1,
            eta_floor: 0.001,
        },
        ExperimentConfig {
            preset: "garnet-table".into(),
            instance: InstanceSpec::Garnet {
                states: 5,
                actions: 3,
                branching: 2,
                sigma2_min: 0.01,
                sigma2_max: 10.0,
                reversible: false,
                instances: 20,
            },
            algorithms: vec![AlgoId::FwAme, AlgoId::Uniform],
            budgets: vec![250, 500, 1000],
            runs: 20,
            master_seed: 2,
            eta_floor: 0.001,
        },
        ExperimentConfig {
            preset: "mixing-curves".into(),
            instance: InstanceSpec::Garnet {
                states: 5,
                actions: 3,
                branching: 2,
                sigma2_min: 0.01,
                sigma2_max: 10.0,
                reversible: true,
                instances: 10,
            },
            algorithms: vec![AlgoId::FwAme, AlgoId::FwAmeFmh],
            budgets: vec![250, 500, 1000, 2000],
            runs: 20,
            master_seed: 3,
            eta_floor: 0.001,
        },
        ExperimentConfig {
            preset: "schedule-sweep".into(),
            // slow-mixing instances are where episode lengths matter
            instance: InstanceSpec::Garnet {
                states: 5,
                actions: 3,
                branching: 2,
                sigma2_min: 0.01,
                sigma2_max: 10.0,
                reversible: true,
                instances: 10,
            },
            algorithms: (1..=6).map(|m| AlgoId::PowerSchedule { m }).collect(),
            budgets: vec![1000],
            runs: 20,
            master_seed: 4,
            eta_floor: 0.001,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            preset: "tiny".into(),
            instance: InstanceSpec::Garnet {
                states: 4,
                actions: 2,
                branching: 2,
                sigma2_min: 0.01,
                sigma2_max: 10.0,
                reversible: false,
                instances: 2,
            },
            algorithms: vec![AlgoId::FwAme, AlgoId::Uniform],
            budgets: vec![300],
            runs: 3,
            master_seed: 99,
            eta_floor: 0.001,
        }
    }

    #[test]
    fn reruns_produce_identical_bytes() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        write_records_csv(&a.records, &mut csv_a).unwrap();
        write_records_csv(&b.records, &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        assert_eq!(
            serde_json::to_string(&a.summary).unwrap(),
            serde_json::to_string(&b.summary).unwrap()
        );
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert_eq!(a.records.len(), 2 * 2 * 3);
    }

    #[test]
    fn catalog_presets_all_validate() {
        let presets = preset_catalog();
        assert_eq!(presets.len(), 4);
        for p in &presets {
            p.validate().unwrap();
        }
        let names: Vec<&str> = presets.iter().map(|p| p.preset.as_str()).collect();
        assert!(names.contains(&"three-state"));
        assert!(names.contains(&"schedule-sweep"));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = tiny_config();
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.budgets = vec![0];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.algorithms.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = tiny_config();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back.preset, cfg.preset);
        assert_eq!(back.algorithms, cfg.algorithms);
        assert_eq!(back.budgets, cfg.budgets);
    }

    #[test]
    fn uniform_normalized_loss_is_stable_across_budgets() {
        let cfg = ExperimentConfig {
            preset: "stability".into(),
            instance: InstanceSpec::Garnet {
                states: 4,
                actions: 2,
                branching: 2,
                sigma2_min: 0.1,
                sigma2_max: 2.0,
                reversible: false,
                instances: 1,
            },
            algorithms: vec![AlgoId::Uniform],
            budgets: vec![500, 1000, 2000],
            runs: 100,
            master_seed: 5,
            eta_floor: 0.001,
        };
        let out = run_experiment(&cfg).unwrap();
        let means: Vec<f64> = cfg
            .budgets
            .iter()
            .map(|&n| {
                let v: Vec<f64> = out
                    .records
                    .iter()
                    .filter(|r| r.n == n)
                    .map(|r| r.n_loss)
                    .collect();
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect();
        let mean = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / means.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.5, "coefficient of variation {cv}");
    }

    #[test]
    fn outputs_land_on_disk() {
        let cfg = ExperimentConfig {
            runs: 1,
            budgets: vec![150],
            ..tiny_config()
        };
        let out = run_experiment(&cfg).unwrap();
        let dir = std::env::temp_dir().join(format!("simlab-test-{}", std::process::id()));
        write_outputs(&out, &cfg, &dir).unwrap();
        let csv = std::fs::read_to_string(dir.join("tiny.csv")).unwrap();
        assert!(csv.starts_with("preset,algo,instance_seed,run_seed,n,loss,n_loss,ratio,slem_avg"));
        let summary: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.join("tiny_summary.json")).unwrap())
                .unwrap();
        assert_eq!(summary["preset"], "tiny");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
