//! End-to-end ensemble experiment: generate networks per bias class, sample
//! their attractors, compute distance matrices, clustering coefficients and
//! dendrograms, and write every artifact plus pooled statistics.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! manifest.json
//! summary_<measure>.csv             pooled distances, one row per bias
//! summary_<measure>_averaged.csv    mean of per-network summaries
//! bias_<p>/histogram_<measure>.csv  per-network clustering coefficients
//! bias_<p>/per_network_<measure>.csv
//! bias_<p>/net_<idx>/network.txt
//! bias_<p>/net_<idx>/attractors.json
//! bias_<p>/net_<idx>/distances_<measure>.csv
//! bias_<p>/net_<idx>/clustering_<measure>.csv   (3+ attractors)
//! bias_<p>/net_<idx>/dendrogram_<measure>.nwk   (2+ attractors)
//! bias_<p>/net_<idx>/merges_<measure>.csv       (2+ attractors)
//! ```
//!
//! Artifacts are a pure function of the configuration. The run is staged in a
//! sibling `<output_dir>.partial` directory and renamed into place only on
//! success.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attractor::{sample_attractors, AttractorSet, SearchConfig};
use crate::cluster::{
    clustering_report, single_link_dendrogram, weights_from_distances, ClusteringReport, Dendrogram,
};
use crate::distance::{distance_matrix, DistanceMatrix, Measure};
use crate::error::{Error, Result};
use crate::network::{generate_rbn, GenerationParams};
use crate::seed;
use crate::stats::{clustering_histogram, summary, Histogram, SummaryStats};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k: usize,
    pub biases: Vec<f64>,
    pub networks_per_bias: usize,
    pub samples_per_network: usize,
    pub max_steps: u64,
    pub measures: Vec<Measure>,
    pub bins: usize,
    pub root_seed: u64,
    /// Read from config files but never echoed, so output trees do not
    /// depend on where they were written.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    /// 70 nodes, k = 3, chaotic/critical/ordered biases, 50 networks per
    /// bias, 10^5 initial states each, 10^6 steps per trajectory.
    fn default() -> Self {
        ExperimentConfig {
            n: 70,
            k: 3,
            biases: vec![0.5, 0.788675, 0.85],
            networks_per_bias: 50,
            samples_per_network: 100_000,
            max_steps: 1_000_000,
            measures: Measure::ALL.to_vec(),
            bins: 10,
            root_seed: 0,
            output_dir: PathBuf::from("rbn-experiment"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n < 1
            || self.networks_per_bias < 1
            || self.samples_per_network < 1
            || self.max_steps < 1
            || self.bins < 1
        {
            return bad("n, networks_per_bias, samples_per_network, max_steps and bins must all be at least 1".into());
        }
        if self.k < 1 || self.k > self.n {
            return bad(format!(
                "k must satisfy 1 <= k <= n, got k = {}, n = {}",
                self.k, self.n
            ));
        }
        if self.biases.is_empty() {
            return bad("at least one bias is required".into());
        }
        if let Some(b) = self.biases.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return bad(format!("bias {b} outside [0, 1]"));
        }
        if self.measures.is_empty() {
            return bad("at least one measure is required".into());
        }
        let mut distinct = self.measures.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() != self.measures.len() {
            return bad("measures must be distinct".into());
        }
        let mut names: Vec<String> = self.biases.iter().map(|b| bias_dir(*b)).collect();
        names.sort();
        names.dedup();
        if names.len() != self.biases.len() {
            return bad("biases must be distinct".into());
        }
        if self.biases.len() > u32::MAX as usize || self.networks_per_bias > u32::MAX as usize {
            return bad("too many networks".into());
        }
        Ok(())
    }
}

fn bias_dir(bias: f64) -> String {
    format!("bias_{bias}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub bias: f64,
    pub bias_index: u32,
    pub network_index: u32,
    pub network_seed: u64,
    pub sampling_seed: u64,
    pub attractors: usize,
    pub not_found: u64,
    /// Fewer than 3 attractors: no clustering coefficient.
    pub clustering_skipped: bool,
    /// Network clustering coefficient per measure name.
    pub clustering: BTreeMap<String, f64>,
    /// Path relative to the output directory.
    pub directory: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub networks: Vec<NetworkEntry>,
    /// Not written to `manifest.json`, which must stay byte-reproducible.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureReport {
    pub measure: Measure,
    /// Summary of all pooled pairwise distances of the bias class.
    pub pooled: Option<SummaryStats>,
    pub pooled_values: Vec<f64>,
    /// Mean of the per-network summaries (networks with 2+ attractors).
    pub averaged: Option<SummaryStats>,
    /// Network clustering coefficients of networks with 3+ attractors.
    pub clustering: Vec<f64>,
    pub histogram: Histogram,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasReport {
    pub bias: f64,
    pub measures: Vec<MeasureReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub manifest: RunManifest,
    pub classes: Vec<BiasReport>,
}

impl RunReport {
    pub fn class(&self, bias: f64) -> Option<&BiasReport> {
        self.classes.iter().find(|c| c.bias == bias)
    }
}

impl BiasReport {
    pub fn measure(&self, measure: Measure) -> Option<&MeasureReport> {
        self.measures.iter().find(|m| m.measure == measure)
    }
}

/// Clustering outputs derivable from one distance matrix.
pub struct ClusterArtifacts {
    pub report: Option<ClusteringReport>,
    pub dendrogram: Option<Dendrogram>,
}

/// Clustering report for 3+ attractors, dendrogram for 2+.
pub fn cluster_artifacts(matrix: &DistanceMatrix) -> Result<ClusterArtifacts> {
    let report = if matrix.len() >= 3 {
        Some(clustering_report(
            &weights_from_distances(matrix)?,
            matrix.labels(),
        )?)
    } else {
        None
    };
    let dendrogram = if matrix.len() >= 2 {
        Some(single_link_dendrogram(matrix)?)
    } else {
        None
    };
    Ok(ClusterArtifacts { report, dendrogram })
}

/// Writes the clustering files for one measure into `dir`.
pub fn write_cluster_artifacts(
    dir: &Path,
    measure: Measure,
    artifacts: &ClusterArtifacts,
) -> Result<()> {
    if let Some(report) = &artifacts.report {
        write(
            &dir.join(format!("clustering_{measure}.csv")),
            &report.to_csv(),
        )?;
    }
    if let Some(dg) = &artifacts.dendrogram {
        write(
            &dir.join(format!("dendrogram_{measure}.nwk")),
            &(dg.to_newick() + "\n"),
        )?;
        write(&dir.join(format!("merges_{measure}.csv")), &dg.merges_csv())?;
    }
    Ok(())
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

struct MeasureOutcome {
    upper: Vec<f64>,
    per_network: Option<SummaryStats>,
    clustering: Option<f64>,
}

struct NetworkOutcome {
    entry: NetworkEntry,
    measures: Vec<MeasureOutcome>,
}

fn run_network(
    cfg: &ExperimentConfig,
    stage: &Path,
    bias_index: usize,
    network_index: usize,
) -> Result<NetworkOutcome> {
    let bias = cfg.biases[bias_index];
    let network_seed = seed::network_seed(cfg.root_seed, bias_index as u32, network_index as u32);
    let sampling_seed = seed::sampling_seed(network_seed);
    let net = generate_rbn(&GenerationParams {
        n: cfg.n,
        k: cfg.k,
        bias,
        seed: network_seed,
    })?;
    let search = SearchConfig::new(cfg.max_steps)?;
    let set = sample_attractors(&net, cfg.samples_per_network, &search, sampling_seed)?;

    let rel = format!("{}/net_{network_index:03}", bias_dir(bias));
    let dir = stage.join(&rel);
    create_dir(&dir)?;
    write(&dir.join("network.txt"), &net.to_text())?;
    write(&dir.join("attractors.json"), &set.to_json())?;

    let mut clustering = BTreeMap::new();
    let mut measures = Vec::with_capacity(cfg.measures.len());
    for &measure in &cfg.measures {
        let (matrix, csv) = exported_matrix(&set, measure)?;
        write(&dir.join(format!("distances_{measure}.csv")), &csv)?;
        let artifacts = cluster_artifacts(&matrix)?;
        write_cluster_artifacts(&dir, measure, &artifacts)?;
        let c = artifacts.report.as_ref().map(|r| r.network);
        if let Some(c) = c {
            clustering.insert(measure.to_string(), c);
        }
        let upper: Vec<f64> = matrix.upper_triangle().collect();
        measures.push(MeasureOutcome {
            per_network: summary(&upper).ok(),
            upper,
            clustering: c,
        });
    }

    Ok(NetworkOutcome {
        entry: NetworkEntry {
            bias,
            bias_index: bias_index as u32,
            network_index: network_index as u32,
            network_seed,
            sampling_seed,
            attractors: set.len(),
            not_found: set.not_found(),
            clustering_skipped: set.len() < 3,
            clustering,
            directory: rel,
        },
        measures,
    })
}

/// The distance matrix as written to disk, and as read back from it, so that
/// everything downstream sees exactly the exported values.
fn exported_matrix(set: &AttractorSet, measure: Measure) -> Result<(DistanceMatrix, String)> {
    let csv = distance_matrix(set, measure).to_csv();
    Ok((DistanceMatrix::from_csv(&csv)?, csv))
}

fn mean_summary(items: &[SummaryStats]) -> Option<SummaryStats> {
    if items.is_empty() {
        return None;
    }
    let k = items.len() as f64;
    let avg = |f: fn(&SummaryStats) -> f64| items.iter().map(f).sum::<f64>() / k;
    Some(SummaryStats {
        min: avg(|s| s.min),
        q1: avg(|s| s.q1),
        median: avg(|s| s.median),
        mean: avg(|s| s.mean),
        q3: avg(|s| s.q3),
        max: avg(|s| s.max),
    })
}

/// Six-number summary table; `NA` cells for rows without data.
pub fn summary_table_csv(
    first_column: &str,
    rows: &[(String, Option<SummaryStats>, usize)],
) -> String {
    let mut out = format!("{first_column},{},count\n", SummaryStats::CSV_COLUMNS);
    for (key, stats, count) in rows {
        match stats {
            Some(s) => writeln!(out, "{key},{},{count}", s.csv_cells()),
            None => writeln!(out, "{key},NA,NA,NA,NA,NA,NA,{count}"),
        }
        .expect("writing to a String");
    }
    out
}

fn prepare_stage(output_dir: &Path) -> Result<PathBuf> {
    if output_dir.exists() {
        let mut entries = fs::read_dir(output_dir).map_err(|e| Error::io(output_dir, e))?;
        if entries.next().is_some() {
            return Err(Error::InvalidParams(format!(
                "output directory {} is not empty",
                output_dir.display()
            )));
        }
    }
    let name = output_dir.file_name().ok_or_else(|| {
        Error::InvalidParams(format!("invalid output directory {}", output_dir.display()))
    })?;
    let mut stage_name = name.to_os_string();
    stage_name.push(".partial");
    let stage = output_dir.with_file_name(stage_name);
    if stage.exists() {
        fs::remove_dir_all(&stage).map_err(|e| Error::io(&stage, e))?;
    }
    create_dir(&stage)?;
    Ok(stage)
}

/// Runs the full pipeline on the current rayon thread pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let started = Instant::now();
    let stage = prepare_stage(&cfg.output_dir)?;
    match run_staged(cfg, &stage) {
        Ok(mut report) => {
            if cfg.output_dir.exists() {
                fs::remove_dir(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            }
            fs::rename(&stage, &cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
            report.manifest.wall_clock_secs = started.elapsed().as_secs_f64();
            Ok(report)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&stage);
            Err(e)
        }
    }
}

/// Runs the pipeline on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot build worker pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn run_staged(cfg: &ExperimentConfig, stage: &Path) -> Result<RunReport> {
    let jobs: Vec<(usize, usize)> = (0..cfg.biases.len())
        .flat_map(|b| (0..cfg.networks_per_bias).map(move |i| (b, i)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(b, i)| run_network(cfg, stage, b, i))
        .collect::<Result<Vec<_>>>()?;

    let mut classes = Vec::with_capacity(cfg.biases.len());
    let mut pooled_rows: Vec<Vec<(String, Option<SummaryStats>, usize)>> =
        vec![Vec::new(); cfg.measures.len()];
    let mut averaged_rows = pooled_rows.clone();

    for (b, &bias) in cfg.biases.iter().enumerate() {
        let class: Vec<&NetworkOutcome> = outcomes
            .iter()
            .filter(|o| o.entry.bias_index as usize == b)
            .collect();
        let dir = stage.join(bias_dir(bias));
        create_dir(&dir)?;
        let mut measures = Vec::with_capacity(cfg.measures.len());
        for (m, &measure) in cfg.measures.iter().enumerate() {
            let pooled_values: Vec<f64> = class
                .iter()
                .flat_map(|o| o.measures[m].upper.iter().copied())
                .collect();
            let pooled = summary(&pooled_values).ok();
            let per_net: Vec<SummaryStats> = class
                .iter()
                .filter_map(|o| o.measures[m].per_network)
                .collect();
            let averaged = mean_summary(&per_net);
            let clustering: Vec<f64> = class
                .iter()
                .filter_map(|o| o.measures[m].clustering)
                .collect();
            let histogram = clustering_histogram(&clustering, cfg.bins)?;

            write(
                &dir.join(format!("histogram_{measure}.csv")),
                &histogram.to_csv(),
            )?;
            let mut table = format!(
                "network,attractors,{},clustering\n",
                SummaryStats::CSV_COLUMNS
            );
            for o in &class {
                let mo = &o.measures[m];
                let stats = mo
                    .per_network
                    .map_or_else(|| "NA,NA,NA,NA,NA,NA".to_string(), |s| s.csv_cells());
                let c = mo
                    .clustering
                    .map_or_else(|| "NA".to_string(), |c| format!("{c:.6}"));
                writeln!(
                    table,
                    "{},{},{stats},{c}",
                    o.entry.network_index, o.entry.attractors
                )
                .expect("writing to a String");
            }
            write(&dir.join(format!("per_network_{measure}.csv")), &table)?;

            pooled_rows[m].push((bias.to_string(), pooled, pooled_values.len()));
            averaged_rows[m].push((bias.to_string(), averaged, per_net.len()));
            measures.push(MeasureReport {
                measure,
                pooled,
                pooled_values,
                averaged,
                clustering,
                histogram,
            });
        }
        classes.push(BiasReport { bias, measures });
    }

    for (m, measure) in cfg.measures.iter().enumerate() {
        write(
            &stage.join(format!("summary_{measure}.csv")),
            &summary_table_csv("bias", &pooled_rows[m]),
        )?;
        write(
            &stage.join(format!("summary_{measure}_averaged.csv")),
            &summary_table_csv("bias", &averaged_rows[m]),
        )?;
    }

    let manifest = RunManifest {
        tool_version: TOOL_VERSION.to_string(),
        config: cfg.clone(),
        networks: outcomes.into_iter().map(|o| o.entry).collect(),
        wall_clock_secs: 0.0,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write(&stage.join("manifest.json"), &json)?;

    Ok(RunReport { manifest, classes })
}
