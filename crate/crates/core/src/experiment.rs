//! Declarative experiment runner: target construction, training, circuit
//! evaluation, and report aggregation, all driven by one TOML config.
//!
//! A run lives in its own directory under the output root (the config's
//! `output_dir`, else `$STAIRPREP_OUTPUT_ROOT`, else `./runs`):
//!
//! ```text
//! <root>/<run_id>/
//!   config.toml               copy of the parsed configuration
//!   target.mps.json           target state
//!   target.meta.json          energy / entropy metadata
//!   metrics.csv               one row per epoch
//!   entropy/epoch_XXXXXX.csv  bond-entropy profiles every k epochs
//!   checkpoint_stage_N.json   circuit after each growth stage
//!   checkpoint.json           final circuit
//! ```
//!
//! Unknown config keys are rejected: a typo in a hyperparameter must fail
//! loudly rather than silently train with a default.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::circuit::{circuit_param_count, compression_ratio, load_checkpoint, save_checkpoint};
use crate::dmrg::dmrg_ground_state;
use crate::error::{Error, Result};
use crate::hamiltonian::{build_mpo, ModelKind, SpinChainModel};
use crate::io::{load_mps, read_json_file, save_mps, to_json_string, write_json_file, write_text_file};
use crate::mps::{mps_param_count, MatrixProductState};
use crate::optimizer::{
    grow_and_train_observed, negative_log_fidelity, MetricsRecord, OptimizerKind, TrainConfig,
};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "STAIRPREP_OUTPUT_ROOT";
pub const TARGET_FILE: &str = "target.mps.json";
pub const TARGET_META_FILE: &str = "target.meta.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const CONFIG_COPY_FILE: &str = "config.toml";
pub const FINAL_CHECKPOINT_FILE: &str = "checkpoint.json";
pub const ENTROPY_DIR: &str = "entropy";
pub const REPORT_DIR: &str = "report";

/// What kind of target state to construct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    #[serde(rename = "heisenberg-gs")]
    HeisenbergGroundState,
    #[serde(rename = "xy-gs")]
    XyGroundState,
    #[serde(rename = "random-mps")]
    RandomMps,
    #[serde(rename = "mps-file")]
    MpsFile,
}

fn default_max_sweeps() -> usize {
    24
}
fn default_energy_tol() -> f64 {
    1e-10
}

/// Target section of the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub n_sites: usize,
    /// Bond-dimension cap of the target state.
    pub chi: usize,
    /// Seed for `random-mps` targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Source path for `mps-file` targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// DMRG sweep budget for ground-state targets.
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    /// DMRG per-sweep energy convergence threshold.
    #[serde(default = "default_energy_tol")]
    pub energy_tol: f64,
}

impl TargetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_sites < 2 {
            return Err(Error::Argument(format!(
                "target needs at least 2 sites, got {}",
                self.n_sites
            )));
        }
        if self.chi == 0 {
            return Err(Error::Argument("target chi must be positive".into()));
        }
        if self.max_sweeps == 0 || !(self.energy_tol > 0.0) {
            return Err(Error::Argument(
                "DMRG needs a positive sweep budget and tolerance".into(),
            ));
        }
        match self.kind {
            TargetKind::RandomMps if self.seed.is_none() => Err(Error::Argument(
                "random-mps target requires a seed".into(),
            )),
            TargetKind::MpsFile if self.path.is_none() => Err(Error::Argument(
                "mps-file target requires a path".into(),
            )),
            _ => Ok(()),
        }
    }
}

fn default_eta0() -> f64 {
    1e-2
}
fn default_lr_halvings() -> u32 {
    2
}
fn default_epochs() -> usize {
    1000
}
fn default_window() -> usize {
    50
}
fn default_rel_tol() -> f64 {
    1e-5
}
fn default_broadening() -> f64 {
    1e-12
}
fn default_epsilon() -> f64 {
    1e-2
}
fn default_optimizer() -> OptimizerKind {
    OptimizerKind::Adam
}
fn default_entropy_stride() -> usize {
    10
}

/// Training section of the experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSpec {
    /// Final layer count the growth protocol reaches.
    pub n_layers: usize,
    #[serde(default = "default_eta0")]
    pub eta0: f64,
    #[serde(default = "default_lr_halvings")]
    pub lr_halvings: u32,
    #[serde(default = "default_epochs")]
    pub epochs_per_stage: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_evolve: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_back: Option<usize>,
    #[serde(default = "default_broadening")]
    pub svd_broadening: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon_new_layer: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_optimizer")]
    pub optimizer: OptimizerKind,
    /// Emit a bond-entropy profile file every this many epochs.
    #[serde(default = "default_entropy_stride")]
    pub entropy_stride: usize,
}

impl TrainSpec {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            eta0: self.eta0,
            lr_halvings: self.lr_halvings,
            epochs_per_stage: self.epochs_per_stage,
            window: self.window,
            rel_tol: self.rel_tol,
            chi_evolve: self.chi_evolve,
            chi_back: self.chi_back,
            svd_broadening: self.svd_broadening,
            epsilon_new_layer: self.epsilon_new_layer,
            seed: self.seed,
            optimizer: self.optimizer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::Argument("training needs at least one layer".into()));
        }
        if self.entropy_stride == 0 {
            return Err(Error::Argument("entropy stride must be positive".into()));
        }
        self.to_train_config().validate()
    }
}

/// One experiment: a target, a training schedule, and a place to put the
/// results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run_id: String,
    /// Output root; falls back to `$STAIRPREP_OUTPUT_ROOT`, then `./runs`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub target: TargetSpec,
    pub train: TrainSpec,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty()
            || self
                .run_id
                .chars()
                .any(|c| !(c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.'))
        {
            return Err(Error::Argument(format!(
                "run id {:?} must be a non-empty name of [A-Za-z0-9._-]",
                self.run_id
            )));
        }
        self.target.validate()?;
        self.train.validate()
    }

    /// Directory this run writes into.
    pub fn run_dir(&self) -> PathBuf {
        let root = self
            .output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs"));
        root.join(&self.run_id)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("config serialization failed: {e}")))
    }
}

/// Parse and validate a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let config: ExperimentConfig = toml::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

/// Metadata written next to a built target.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetMetadata {
    pub kind: TargetKind,
    pub n_sites: usize,
    pub chi: usize,
    pub max_internal_bond: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps_used: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    pub bond_entropies: Vec<f64>,
    /// Entropy across the central bond (equal halves).
    pub mid_chain_entropy: f64,
}

fn build_target_state(
    spec: &TargetSpec,
) -> Result<(MatrixProductState, Option<(f64, usize, bool)>)> {
    match spec.kind {
        TargetKind::HeisenbergGroundState | TargetKind::XyGroundState => {
            let model_kind = if spec.kind == TargetKind::HeisenbergGroundState {
                ModelKind::Heisenberg
            } else {
                ModelKind::Xy
            };
            let model = SpinChainModel::new(model_kind, spec.n_sites)?;
            let mpo = build_mpo(&model);
            let out = dmrg_ground_state(&mpo, spec.chi, spec.max_sweeps, spec.energy_tol)?;
            if !out.converged {
                return Err(Error::Numerical(format!(
                    "DMRG did not converge within {} sweeps (last energy {:.12e}); \
                     raise max_sweeps or loosen energy_tol",
                    out.sweeps_used, out.energy
                )));
            }
            Ok((out.psi, Some((out.energy, out.sweeps_used, out.converged))))
        }
        TargetKind::RandomMps => {
            let seed = spec.seed.expect("validated");
            Ok((
                MatrixProductState::random_mps(spec.n_sites, spec.chi, seed)?,
                None,
            ))
        }
        TargetKind::MpsFile => {
            let path = spec.path.as_ref().expect("validated");
            let psi = load_mps(path)?;
            if psi.n_sites() != spec.n_sites {
                return Err(Error::Argument(format!(
                    "{}: file has {} sites, config expects {}",
                    path.display(),
                    psi.n_sites(),
                    spec.n_sites
                )));
            }
            psi.check_normalized()?;
            Ok((psi, None))
        }
    }
}

/// Build the target state and write it (plus metadata and a config copy)
/// into the run directory.
pub fn cmd_build_target(config: &ExperimentConfig) -> Result<(PathBuf, TargetMetadata)> {
    config.validate()?;
    let dir = config.run_dir();
    let (psi, gs_info) = build_target_state(&config.target)?;
    let entropies = psi.bond_entropies()?;
    let mid = entropies[psi.n_sites() / 2 - 1];
    let meta = TargetMetadata {
        kind: config.target.kind,
        n_sites: psi.n_sites(),
        chi: config.target.chi,
        max_internal_bond: psi.max_internal_bond(),
        seed: config.target.seed,
        energy: gs_info.map(|g| g.0),
        sweeps_used: gs_info.map(|g| g.1),
        converged: gs_info.map(|g| g.2),
        bond_entropies: entropies,
        mid_chain_entropy: mid,
    };
    let target_path = dir.join(TARGET_FILE);
    save_mps(&psi, &target_path)?;
    write_json_file(&dir.join(TARGET_META_FILE), &meta)?;
    write_text_file(&dir.join(CONFIG_COPY_FILE), &config.to_toml()?)?;
    Ok((target_path, meta))
}

fn metrics_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(MetricsRecord::csv_header());
    out.push('\n');
    for rec in records {
        out.push_str(&rec.csv_row());
        out.push('\n');
    }
    out
}

fn write_metrics(dir: &Path, records: &[MetricsRecord]) -> Result<()> {
    write_text_file(&dir.join(METRICS_FILE), &metrics_csv(records))
}

fn write_entropy_profiles(dir: &Path, records: &[MetricsRecord], stride: usize) -> Result<()> {
    for rec in records {
        if rec.epoch % stride != 0 {
            continue;
        }
        let mut text = String::from("bond,entropy\n");
        for (i, s) in rec.bond_entropies.iter().enumerate() {
            text.push_str(&format!("{},{:.16e}\n", i + 1, s));
        }
        write_text_file(
            &dir.join(ENTROPY_DIR).join(format!("epoch_{:06}.csv", rec.epoch)),
            &text,
        )?;
    }
    Ok(())
}

/// Per-stage summary of a completed training run.
#[derive(Debug, Clone, Serialize)]
pub struct StageSummary {
    pub n_layers: usize,
    pub epochs: usize,
    pub final_f: f64,
}

/// Result of `cmd_train`.
#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub run_dir: PathBuf,
    pub epochs_total: usize,
    pub final_f: f64,
    pub stages: Vec<StageSummary>,
}

fn stage_summaries(records: &[MetricsRecord]) -> Vec<StageSummary> {
    let mut stages: Vec<StageSummary> = Vec::new();
    for rec in records {
        match stages.last_mut() {
            Some(s) if s.n_layers == rec.n_layers => {
                s.epochs += 1;
                s.final_f = rec.loss_f;
            }
            _ => stages.push(StageSummary {
                n_layers: rec.n_layers,
                epochs: 1,
                final_f: rec.loss_f,
            }),
        }
    }
    stages
}

/// Train a circuit against the run's target. `target_path` overrides the
/// default `<run dir>/target.mps.json`. Partial metrics and per-stage
/// checkpoints survive a numerical abort.
pub fn cmd_train(config: &ExperimentConfig, target_path: Option<&Path>) -> Result<TrainSummary> {
    config.validate()?;
    let dir = config.run_dir();
    let default_target = dir.join(TARGET_FILE);
    let tpath = target_path.unwrap_or(&default_target);
    let target = load_mps(tpath)?;
    if target.n_sites() != config.target.n_sites {
        return Err(Error::Argument(format!(
            "{}: target has {} sites, config expects {}",
            tpath.display(),
            target.n_sites(),
            config.target.n_sites
        )));
    }
    target.check_normalized()?;
    let psi0 = MatrixProductState::all_zeros(target.n_sites())?;
    let train_config = config.train.to_train_config();
    let stride = config.train.entropy_stride;
    write_text_file(&dir.join(CONFIG_COPY_FILE), &config.to_toml()?)?;

    let mut records = Vec::new();
    let result = grow_and_train_observed(
        &target,
        &psi0,
        config.train.n_layers,
        &train_config,
        &mut records,
        |stage, circuit, recs| {
            save_checkpoint(circuit, &dir.join(format!("checkpoint_stage_{stage}.json")))?;
            write_metrics(&dir, recs)?;
            write_entropy_profiles(&dir, recs, stride)?;
            Ok(())
        },
    );
    match result {
        Ok(circuit) => {
            save_checkpoint(&circuit, &dir.join(FINAL_CHECKPOINT_FILE))?;
            write_metrics(&dir, &records)?;
            write_entropy_profiles(&dir, &records, stride)?;
            let final_f = records.last().map(|r| r.loss_f).unwrap_or(f64::NAN);
            Ok(TrainSummary {
                run_dir: dir,
                epochs_total: records.len(),
                final_f,
                stages: stage_summaries(&records),
            })
        }
        Err(e) => {
            // keep whatever was logged before the abort
            let _ = write_metrics(&dir, &records);
            let _ = write_entropy_profiles(&dir, &records, stride);
            Err(e)
        }
    }
}

/// Evaluation report for a checkpoint against a target.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_sites: usize,
    pub n_layers: usize,
    pub chi_evolve: usize,
    pub loss_f: f64,
    pub overlap_modulus: f64,
    pub truncation_error: f64,
    pub bond_entropies: Vec<f64>,
    pub avg_entropy: f64,
    pub max_entropy: f64,
    /// `N_L · ln 4`, the stair-circuit entanglement ceiling.
    pub entropy_bound: f64,
    pub entropy_within_bound: bool,
    pub circuit_params: u64,
    pub mps_params: u64,
    /// Parameter ratio r of the circuit against the target's MPS form.
    pub compression_ratio: f64,
    /// Single-layer ratio r₀ = r / N_L.
    pub single_layer_ratio: f64,
}

/// Evaluate a checkpoint against a target state. `chi_evolve` defaults to
/// twice the target's bond dimension.
pub fn cmd_eval(
    checkpoint_path: &Path,
    target_path: &Path,
    chi_evolve: Option<usize>,
    out: Option<&Path>,
) -> Result<EvalReport> {
    let circuit = load_checkpoint(checkpoint_path)?;
    let target = load_mps(target_path)?;
    if circuit.n_sites() != target.n_sites() {
        return Err(Error::Argument(format!(
            "checkpoint acts on {} sites but target has {}",
            circuit.n_sites(),
            target.n_sites()
        )));
    }
    target.check_normalized()?;
    let chi_target = target.max_internal_bond().max(1);
    let chi = chi_evolve.unwrap_or(2 * chi_target).max(4);
    let psi0 = MatrixProductState::all_zeros(target.n_sites())?;
    let (loss_f, c, trunc) = negative_log_fidelity(&target, &circuit, &psi0, chi)?;
    let (evolved, _) = circuit.apply_circuit_mps(&psi0, chi, 0.0)?;
    let entropies = evolved.normalized()?.bond_entropies()?;
    let avg = entropies.iter().sum::<f64>() / entropies.len() as f64;
    let max = entropies.iter().copied().fold(0.0, f64::max);
    let bound = circuit.n_layers() as f64 * 4.0_f64.ln();
    let (r, r0) = compression_ratio(target.n_sites(), chi_target, circuit.n_layers())?;
    let report = EvalReport {
        n_sites: target.n_sites(),
        n_layers: circuit.n_layers(),
        chi_evolve: chi,
        loss_f,
        overlap_modulus: c.norm(),
        truncation_error: trunc,
        bond_entropies: entropies,
        avg_entropy: avg,
        max_entropy: max,
        entropy_bound: bound,
        entropy_within_bound: max <= bound + 1e-9,
        circuit_params: circuit_param_count(target.n_sites(), circuit.n_layers())?,
        mps_params: mps_param_count(target.n_sites(), chi_target)?,
        compression_ratio: r,
        single_layer_ratio: r0,
    };
    if let Some(path) = out {
        write_json_file(path, &report)?;
    }
    Ok(report)
}

/// Files produced by `cmd_report`.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub runs: usize,
    pub files: Vec<PathBuf>,
}

struct RunData {
    run_id: String,
    /// (epoch, n_layers, loss_f) triples from metrics.csv.
    metrics: Vec<(usize, usize, f64)>,
    meta: Option<TargetMetadata>,
    /// epoch → bond entropies, from the profile sidecars.
    profiles: BTreeMap<usize, Vec<f64>>,
}

fn parse_metrics_csv(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != MetricsRecord::csv_header() {
        return Err(Error::Format(format!(
            "{}: unexpected metrics header {header:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 7 {
            return Err(Error::Format(format!(
                "{}:{}: expected 7 columns, got {}",
                path.display(),
                lineno + 2,
                cols.len()
            )));
        }
        let parse_err = |what: &str| {
            Error::Format(format!(
                "{}:{}: malformed {what} column",
                path.display(),
                lineno + 2
            ))
        };
        out.push((
            cols[0].parse::<usize>().map_err(|_| parse_err("epoch"))?,
            cols[1].parse::<usize>().map_err(|_| parse_err("n_layers"))?,
            cols[2].parse::<f64>().map_err(|_| parse_err("loss_F"))?,
        ));
    }
    Ok(out)
}

fn parse_profile_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let entropy = line
            .split(',')
            .nth(1)
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Format(format!("{}: malformed entropy profile row", path.display()))
            })?;
        out.push(entropy);
    }
    Ok(out)
}

fn collect_runs(dir: &Path) -> Result<Vec<RunData>> {
    let mut runs = Vec::new();
    let entries = fs::read_dir(dir)?;
    let mut run_dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.join(METRICS_FILE).is_file())
        .collect();
    run_dirs.sort();
    for run_dir in run_dirs {
        let run_id = run_dir
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let metrics = parse_metrics_csv(&run_dir.join(METRICS_FILE))?;
        let meta = read_json_file::<TargetMetadata>(&run_dir.join(TARGET_META_FILE)).ok();
        let mut profiles = BTreeMap::new();
        let entropy_dir = run_dir.join(ENTROPY_DIR);
        if entropy_dir.is_dir() {
            for entry in fs::read_dir(&entropy_dir)? {
                let path = entry?.path();
                let name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
                if let Some(name) = name {
                    if let Some(epoch) = name
                        .strip_prefix("epoch_")
                        .and_then(|v| v.parse::<usize>().ok())
                    {
                        profiles.insert(epoch, parse_profile_csv(&path)?);
                    }
                }
            }
        }
        runs.push(RunData {
            run_id,
            metrics,
            meta,
            profiles,
        });
    }
    Ok(runs)
}

/// Aggregate every run under `dir` into plot-ready tables:
/// stage-final loss per layer count, final loss against target mid-chain
/// entropy, and one epoch × bond entropy matrix per run.
pub fn cmd_report(dir: &Path) -> Result<ReportSummary> {
    let runs = collect_runs(dir)?;
    if runs.is_empty() {
        return Err(Error::Argument(format!(
            "{}: no runs with {METRICS_FILE} found",
            dir.display()
        )));
    }
    let report_dir = dir.join(REPORT_DIR);
    let mut files = Vec::new();

    let mut f_vs_layers = String::from("run_id,n_layers,final_F\n");
    for run in &runs {
        let mut last_per_stage: Vec<(usize, f64)> = Vec::new();
        for &(_, n_layers, loss) in &run.metrics {
            match last_per_stage.last_mut() {
                Some((stage, slot)) if *stage == n_layers => *slot = loss,
                _ => last_per_stage.push((n_layers, loss)),
            }
        }
        for (n_layers, loss) in last_per_stage {
            f_vs_layers.push_str(&format!("{},{},{:.16e}\n", run.run_id, n_layers, loss));
        }
    }
    let path = report_dir.join("f_vs_layers.csv");
    write_text_file(&path, &f_vs_layers)?;
    files.push(path);

    let mut f_vs_entropy = String::from("run_id,mid_chain_S,n_layers,final_F\n");
    for run in &runs {
        if let (Some(meta), Some(&(_, n_layers, loss))) = (&run.meta, run.metrics.last()) {
            f_vs_entropy.push_str(&format!(
                "{},{:.16e},{},{:.16e}\n",
                run.run_id, meta.mid_chain_entropy, n_layers, loss
            ));
        }
    }
    let path = report_dir.join("f_vs_entropy.csv");
    write_text_file(&path, &f_vs_entropy)?;
    files.push(path);

    for run in &runs {
        if run.profiles.is_empty() {
            continue;
        }
        let n_bonds = run.profiles.values().next().map(Vec::len).unwrap_or(0);
        let mut matrix = String::from("epoch");
        for b in 1..=n_bonds {
            matrix.push_str(&format!(",S_{b}"));
        }
        matrix.push('\n');
        for (epoch, entropies) in &run.profiles {
            matrix.push_str(&epoch.to_string());
            for s in entropies {
                matrix.push_str(&format!(",{s:.16e}"));
            }
            matrix.push('\n');
        }
        let path = report_dir.join(format!("{}_entropy_matrix.csv", run.run_id));
        write_text_file(&path, &matrix)?;
        files.push(path);
    }

    Ok(ReportSummary {
        runs: runs.len(),
        files,
    })
}

/// Outcome of one batch entry.
#[derive(Debug)]
pub struct BatchOutcome {
    pub config_path: PathBuf,
    pub run_id: Option<String>,
    pub result: Result<TrainSummary>,
}

/// Run build-target + train for each config in sequence, continuing past
/// failures so independent experiments don't block each other.
pub fn cmd_batch(config_paths: &[PathBuf]) -> Vec<BatchOutcome> {
    config_paths
        .iter()
        .map(|path| {
            let run = || -> Result<(String, TrainSummary)> {
                let config = load_config(path)?;
                cmd_build_target(&config)?;
                let summary = cmd_train(&config, None)?;
                Ok((config.run_id, summary))
            };
            match run() {
                Ok((run_id, summary)) => BatchOutcome {
                    config_path: path.clone(),
                    run_id: Some(run_id),
                    result: Ok(summary),
                },
                Err(e) => BatchOutcome {
                    config_path: path.clone(),
                    run_id: None,
                    result: Err(e),
                },
            }
        })
        .collect()
}

/// JSON rendering used by the CLI for summaries and reports.
pub fn render_json<T: Serialize>(value: &T) -> Result<String> {
    to_json_string(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::StairCircuit;
    use crate::tensor::ComplexTensor;
    use tempfile::TempDir;

    fn tiny_config(dir: &Path, run_id: &str) -> ExperimentConfig {
        ExperimentConfig {
            run_id: run_id.to_string(),
            output_dir: Some(dir.to_path_buf()),
            target: TargetSpec {
                kind: TargetKind::RandomMps,
                n_sites: 4,
                chi: 2,
                seed: Some(5),
                path: None,
                max_sweeps: default_max_sweeps(),
                energy_tol: default_energy_tol(),
            },
            train: TrainSpec {
                n_layers: 1,
                eta0: default_eta0(),
                lr_halvings: default_lr_halvings(),
                epochs_per_stage: 25,
                window: 10,
                rel_tol: default_rel_tol(),
                chi_evolve: None,
                chi_back: None,
                svd_broadening: default_broadening(),
                epsilon_new_layer: default_epsilon(),
                seed: 3,
                optimizer: OptimizerKind::Adam,
                entropy_stride: 5,
            },
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let config = tiny_config(Path::new("/tmp/out"), "round-trip");
        let text = config.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
run_id = "x"
[target]
kind = "random-mps"
n_sites = 4
chi = 2
seed = 1
[train]
n_layers = 1
learning_rate = 0.5
"#;
        let err = toml::from_str::<ExperimentConfig>(text).unwrap_err();
        assert!(err.to_string().contains("learning_rate"));
    }

    #[test]
    fn validation_catches_missing_fields() {
        let mut config = tiny_config(Path::new("/tmp/out"), "bad");
        config.target.seed = None;
        assert!(matches!(config.validate(), Err(Error::Argument(_))));
        let mut config = tiny_config(Path::new("/tmp/out"), "bad");
        config.run_id = "has space".into();
        assert!(matches!(config.validate(), Err(Error::Argument(_))));
        let mut config = tiny_config(Path::new("/tmp/out"), "bad");
        config.train.epochs_per_stage = 0;
        assert!(config.validate().is_err());
    }

    #[test]
    fn build_target_is_deterministic() {
        let tmp = TempDir::new().unwrap();
        let c1 = tiny_config(&tmp.path().join("a"), "t1");
        let c2 = tiny_config(&tmp.path().join("b"), "t1");
        let (p1, m1) = cmd_build_target(&c1).unwrap();
        let (p2, m2) = cmd_build_target(&c2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(m1.mid_chain_entropy.to_bits(), m2.mid_chain_entropy.to_bits());
        assert!(m1.energy.is_none());
    }

    #[test]
    fn build_target_heisenberg_pair_energy() {
        let tmp = TempDir::new().unwrap();
        let mut config = tiny_config(tmp.path(), "heis2");
        config.target.kind = TargetKind::HeisenbergGroundState;
        config.target.n_sites = 2;
        config.target.seed = None;
        let (_, meta) = cmd_build_target(&config).unwrap();
        assert!((meta.energy.unwrap() + 0.75).abs() < 1e-10);
        assert_eq!(meta.converged, Some(true));
    }

    #[test]
    fn train_writes_all_artifacts_and_is_deterministic() {
        let tmp = TempDir::new().unwrap();
        let config = tiny_config(tmp.path(), "run1");
        cmd_build_target(&config).unwrap();
        let summary = cmd_train(&config, None).unwrap();
        let dir = config.run_dir();
        assert!(dir.join(METRICS_FILE).is_file());
        assert!(dir.join(FINAL_CHECKPOINT_FILE).is_file());
        assert!(dir.join("checkpoint_stage_1.json").is_file());
        assert!(dir.join(ENTROPY_DIR).join("epoch_000000.csv").is_file());
        assert_eq!(summary.stages.len(), 1);
        assert!(summary.final_f.is_finite());

        // rerun into a second directory: byte-identical metrics modulo wall time
        let config2 = ExperimentConfig {
            run_id: "run2".into(),
            ..config.clone()
        };
        cmd_build_target(&config2).unwrap();
        cmd_train(&config2, None).unwrap();
        let strip_wall = |path: &Path| {
            fs::read_to_string(path)
                .unwrap()
                .lines()
                .map(|l| l.rsplit_once(',').map(|(head, _)| head.to_string()).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(
            strip_wall(&dir.join(METRICS_FILE)),
            strip_wall(&config2.run_dir().join(METRICS_FILE))
        );
    }

    #[test]
    fn eval_identity_checkpoint_reports_zero_loss() {
        let tmp = TempDir::new().unwrap();
        let n = 4;
        let target = MatrixProductState::all_zeros(n).unwrap();
        let target_path = tmp.path().join("target.mps.json");
        save_mps(&target, &target_path).unwrap();
        let layer = vec![ComplexTensor::identity(4); n - 1];
        let circuit = StairCircuit::from_latent_layers(n, vec![layer], vec![]).unwrap();
        let ckpt_path = tmp.path().join("ckpt.json");
        save_checkpoint(&circuit, &ckpt_path).unwrap();
        let out_path = tmp.path().join("report.json");
        let report = cmd_eval(&ckpt_path, &target_path, None, Some(&out_path)).unwrap();
        assert!(report.loss_f.abs() < 1e-12);
        assert!((report.overlap_modulus - 1.0).abs() < 1e-12);
        assert!(report.entropy_within_bound);
        assert_eq!(report.circuit_params, 48);
        assert!(out_path.is_file());
        let back: EvalReport = read_json_file(&out_path).unwrap();
        assert_eq!(back.loss_f.to_bits(), report.loss_f.to_bits());
    }

    #[test]
    fn eval_rejects_mismatched_sizes() {
        let tmp = TempDir::new().unwrap();
        let target = MatrixProductState::all_zeros(5).unwrap();
        let target_path = tmp.path().join("target.mps.json");
        save_mps(&target, &target_path).unwrap();
        let layer = vec![ComplexTensor::identity(4); 3];
        let circuit = StairCircuit::from_latent_layers(4, vec![layer], vec![]).unwrap();
        let ckpt_path = tmp.path().join("ckpt.json");
        save_checkpoint(&circuit, &ckpt_path).unwrap();
        assert!(matches!(
            cmd_eval(&ckpt_path, &target_path, None, None),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn report_aggregates_a_run() {
        let tmp = TempDir::new().unwrap();
        let config = tiny_config(tmp.path(), "rep");
        cmd_build_target(&config).unwrap();
        cmd_train(&config, None).unwrap();
        let summary = cmd_report(tmp.path()).unwrap();
        assert_eq!(summary.runs, 1);
        let layers_table =
            fs::read_to_string(tmp.path().join(REPORT_DIR).join("f_vs_layers.csv")).unwrap();
        assert!(layers_table.lines().count() >= 2);
        assert!(layers_table.starts_with("run_id,n_layers,final_F"));
        let entropy_table =
            fs::read_to_string(tmp.path().join(REPORT_DIR).join("f_vs_entropy.csv")).unwrap();
        assert!(entropy_table.lines().nth(1).unwrap().starts_with("rep,"));
        let matrix =
            fs::read_to_string(tmp.path().join(REPORT_DIR).join("rep_entropy_matrix.csv"))
                .unwrap();
        // epoch column + one entropy column per bond
        assert_eq!(matrix.lines().next().unwrap(), "epoch,S_1,S_2,S_3");

        let empty = TempDir::new().unwrap();
        assert!(matches!(cmd_report(empty.path()), Err(Error::Argument(_))));
    }

    #[test]
    fn batch_continues_past_failures() {
        let tmp = TempDir::new().unwrap();
        let good = tiny_config(tmp.path(), "ok");
        let good_path = tmp.path().join("good.toml");
        fs::write(&good_path, good.to_toml().unwrap()).unwrap();
        let bad_path = tmp.path().join("bad.toml");
        fs::write(&bad_path, "run_id = \"broken\"\n").unwrap();
        let outcomes = cmd_batch(&[bad_path.clone(), good_path.clone()]);
        assert_eq!(outcomes.len(), 2);
        assert!(outcomes[0].result.is_err());
        assert!(outcomes[1].result.is_ok());
        assert_eq!(outcomes[1].run_id.as_deref(), Some("ok"));
    }
}
