//! End-to-end analysis from summary files to an emitted network.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use crate::covariance::{
    estimate_error_covariance, reliability_ratio, CorrelationPipeline, ErrorCovariance, Estimator,
    DEFAULT_COVARIANCE_FLOOR,
};
use crate::error::{Error, Result};
use crate::ingest::{
    align_traits, distance_prune, joint_chisq_screen, null_panel, null_screen, parse_gwas_file, AlignedPanel,
};
use crate::matrix::SymmetricMatrix;
use crate::selection::{
    cross_validate_lambda, select_network, CvResult, PanelSource, SelectionConfig, StabilityResult,
};
use crate::solver::{AdmmConfig, PenaltyFamily, PenaltySpec, DEFAULT_MCP_GAMMA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub trait_files: Vec<PathBuf>,
    /// Defaults to the file stems when empty.
    pub trait_labels: Vec<String>,
    pub null_p_threshold: f64,
    pub joint_p_threshold: f64,
    pub prune_window_bp: u64,
    pub estimator: Estimator,
    pub penalty: PenaltyFamily,
    pub mcp_gamma: f64,
    pub covariance_floor: f64,
    pub admm: AdmmConfig,
    /// Its seed is replaced by `seed`.
    pub selection: SelectionConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            trait_files: Vec::new(),
            trait_labels: Vec::new(),
            null_p_threshold: 0.05,
            joint_p_threshold: 5e-8,
            prune_window_bp: 1_000_000,
            estimator: Estimator::Spearman,
            penalty: PenaltyFamily::Mcp,
            mcp_gamma: DEFAULT_MCP_GAMMA,
            covariance_floor: DEFAULT_COVARIANCE_FLOOR,
            admm: AdmmConfig::default(),
            selection: SelectionConfig::new(0),
            output_dir: PathBuf::from("egg-out"),
            seed: 0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.trait_files.len() < 2 {
            return bad(format!("need at least 2 trait files, got {}", self.trait_files.len()));
        }
        if !self.trait_labels.is_empty() && self.trait_labels.len() != self.trait_files.len() {
            return bad("one label per trait file is required".into());
        }
        let labels = self.labels();
        let mut sorted = labels.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != labels.len() {
            return bad("trait labels must be unique".into());
        }
        for (name, v) in [
            ("null-p-threshold", self.null_p_threshold),
            ("joint-p-threshold", self.joint_p_threshold),
            ("covariance-floor", self.covariance_floor),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        if self.prune_window_bp == 0 {
            return bad("prune-window-bp must be positive".into());
        }
        self.penalty_spec()?;
        self.admm.validate()?;
        self.selection_config().validate()
    }

    pub fn labels(&self) -> Vec<String> {
        if !self.trait_labels.is_empty() {
            return self.trait_labels.clone();
        }
        self.trait_files
            .iter()
            .map(|p| {
                p.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| p.display().to_string())
            })
            .collect()
    }

    pub fn penalty_spec(&self) -> Result<PenaltySpec> {
        let lambda = self.selection.lambda_grid.first().copied().unwrap_or(0.0);
        match self.penalty {
            PenaltyFamily::Mcp => PenaltySpec::mcp(lambda, self.mcp_gamma),
            PenaltyFamily::Lasso => PenaltySpec::lasso(lambda),
        }
    }

    pub fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            seed: self.seed,
            ..self.selection.clone()
        }
    }

    fn correlation_pipeline(&self) -> CorrelationPipeline {
        CorrelationPipeline {
            floor: self.covariance_floor,
            ..CorrelationPipeline::corrected(self.estimator)
        }
    }
}

/// Variant counts after each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub records_per_trait: Vec<usize>,
    pub aligned: usize,
    pub allele_mismatches: usize,
    pub null_variants: usize,
    pub candidates: usize,
    pub joint_significant: usize,
    pub after_pruning: usize,
}

/// Screened analysis panel and the error covariance from the null variants.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub analysis: AlignedPanel,
    pub error_covariance: ErrorCovariance,
    pub counts: StageCounts,
}

/// Parses, aligns and screens the trait files.
pub fn prepare_data(config: &AnalysisConfig) -> Result<PreparedData> {
    config.validate()?;
    let labels = config.labels();
    let mut counts = StageCounts::default();

    let mut traits = Vec::with_capacity(labels.len());
    for (label, path) in labels.iter().zip(&config.trait_files) {
        let records = parse_gwas_file(path).map_err(|e| e.in_stage("parse"))?;
        info!("parse: {} records for {label} from {}", records.len(), path.display());
        counts.records_per_trait.push(records.len());
        traits.push((label.clone(), records));
    }

    let aligned = align_traits(&traits).map_err(|e| e.in_stage("align"))?;
    counts.aligned = aligned.panel.n_variants();
    counts.allele_mismatches = aligned.allele_mismatches;
    info!(
        "align: {} shared variants, {} allele mismatches",
        counts.aligned, counts.allele_mismatches
    );

    let (null_rows, candidate_rows) = null_screen(&aligned.panel, config.null_p_threshold);
    counts.null_variants = null_rows.len();
    counts.candidates = candidate_rows.len();
    info!(
        "null screen: {} null variants, {} candidates",
        null_rows.len(),
        candidate_rows.len()
    );
    let error_covariance = null_panel(&aligned.panel, &null_rows)
        .and_then(|nulls| estimate_error_covariance(&nulls))
        .map_err(|e| e.in_stage("error-covariance"))?;

    let candidates = aligned
        .select(&candidate_rows)
        .map_err(|e| e.in_stage("joint-screen"))?;
    let joint = joint_chisq_screen(&candidates.panel, &error_covariance, config.joint_p_threshold)
        .map_err(|e| e.in_stage("joint-screen"))?;
    counts.joint_significant = joint.kept.len();
    info!(
        "joint screen: {} variants below {:e}",
        joint.kept.len(),
        config.joint_p_threshold
    );

    let significant = candidates.select(&joint.kept).map_err(|e| e.in_stage("prune"))?;
    let p_values: Vec<f64> = joint.kept.iter().map(|&j| joint.p_value[j]).collect();
    let kept = distance_prune(&significant.loci, &p_values, config.prune_window_bp)
        .and_then(|rows| significant.select(&rows))
        .map_err(|e| e.in_stage("prune"))?;
    counts.after_pruning = kept.panel.n_variants();
    info!("prune: {} variants remain", counts.after_pruning);

    let null_ids: std::collections::HashSet<&str> =
        null_rows.iter().map(|&j| aligned.loci[j].variant_id.as_str()).collect();
    if kept.loci.iter().any(|l| null_ids.contains(l.variant_id.as_str())) {
        return Err(Error::InvalidParameter("null and analysis variants overlap".into()).in_stage("prune"));
    }

    Ok(PreparedData {
        analysis: kept,
        error_covariance,
        counts,
    })
}

#[derive(Debug, Clone)]
pub struct NetworkReport {
    pub traits: Vec<String>,
    pub genetic_correlation: SymmetricMatrix,
    pub error_covariance: ErrorCovariance,
    pub cv: CvResult,
    pub stability: StabilityResult,
    pub counts: StageCounts,
    pub config: AnalysisConfig,
}

impl NetworkReport {
    pub fn converged(&self) -> bool {
        self.stability.pruned_fit.converged
    }
}

/// Runs every stage from file parsing to stability selection.
pub fn run_pipeline(config: &AnalysisConfig) -> Result<NetworkReport> {
    let prepared = prepare_data(config)?;
    let panel = &prepared.analysis.panel;
    let source = PanelSource {
        panel,
        err: &prepared.error_covariance,
        pipeline: config.correlation_pipeline(),
    };
    let genetic_correlation = config
        .correlation_pipeline()
        .run(panel, &prepared.error_covariance)
        .map_err(|e| e.in_stage("correlation"))?;
    let selection = select_network(
        &source,
        &config.selection_config(),
        &config.penalty_spec()?,
        &config.admm,
    )
    .map_err(|e| e.in_stage("selection"))?;
    info!(
        "selection: lambda {:e}, {} edges, {} unconverged subsamples",
        selection.cv.lambda_cv,
        selection.stability.pruned_fit.support.len(),
        selection.stability.unconverged_subsamples
    );
    Ok(NetworkReport {
        traits: panel.traits().to_vec(),
        genetic_correlation,
        error_covariance: prepared.error_covariance,
        cv: selection.cv,
        stability: selection.stability,
        counts: prepared.counts,
        config: config.clone(),
    })
}

/// Cross-validation table only.
pub fn run_cross_validation(config: &AnalysisConfig) -> Result<CvResult> {
    let prepared = prepare_data(config)?;
    let source = PanelSource {
        panel: &prepared.analysis.panel,
        err: &prepared.error_covariance,
        pipeline: config.correlation_pipeline(),
    };
    cross_validate_lambda(
        &source,
        &config.selection_config(),
        &config.penalty_spec()?,
        &config.admm,
    )
    .map_err(|e| e.in_stage("selection"))
}

/// Reliability ratio of each trait over the screened analysis variants.
pub fn run_reliability(config: &AnalysisConfig) -> Result<Vec<(String, f64)>> {
    let prepared = prepare_data(config)?;
    let panel = &prepared.analysis.panel;
    let ratios = reliability_ratio(panel).map_err(|e| e.in_stage("reliability"))?;
    Ok(panel.traits().iter().cloned().zip(ratios).collect())
}

/// Rounds to six significant digits.
pub fn six_significant(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// `−Θ_ks / √(Θ_kk Θ_ss)`.
pub fn partial_correlation(theta: &SymmetricMatrix, k: usize, s: usize) -> f64 {
    -theta[(k, s)] / (theta[(k, k)] * theta[(s, s)]).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDocument {
    pub traits: Vec<String>,
    pub genetic_correlation: Vec<Vec<f64>>,
    pub precision: Vec<Vec<f64>>,
    pub selection_frequencies: Vec<Vec<f64>>,
    pub empirical_p: Vec<Vec<f64>>,
}

impl MatrixDocument {
    pub fn from_report(report: &NetworkReport) -> Self {
        MatrixDocument {
            traits: report.traits.clone(),
            genetic_correlation: report.genetic_correlation.to_rows(),
            precision: report.stability.pruned_fit.precision.to_rows(),
            selection_frequencies: report.stability.frequencies.to_rows(),
            empirical_p: report.stability.pvalues.to_rows(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub lambda_cv: f64,
    pub edges: usize,
    pub converged: bool,
    pub unconverged_subsamples: usize,
    pub counts: StageCounts,
    pub config: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputPaths {
    pub edges: PathBuf,
    pub matrices: PathBuf,
    pub metadata: PathBuf,
    pub cve: PathBuf,
}

impl OutputPaths {
    pub fn in_dir(dir: &Path) -> Self {
        OutputPaths {
            edges: dir.join("edges.tsv"),
            matrices: dir.join("matrices.json"),
            metadata: dir.join("metadata.json"),
            cve: dir.join("cve.tsv"),
        }
    }
}

fn write_file(path: &Path, body: &[u8]) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(body))
        .map_err(|e| Error::io(path, e))
}

pub fn edge_table(report: &NetworkReport) -> String {
    let fit = &report.stability.pruned_fit;
    let mut out = String::from("trait_a\ttrait_b\tpartial_corr\tprecision_entry\tselection_freq\tempirical_p\n");
    for &(k, s) in &fit.support {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            report.traits[k],
            report.traits[s],
            six_significant(partial_correlation(&fit.precision, k, s)),
            six_significant(fit.precision[(k, s)]),
            six_significant(report.stability.frequencies[(k, s)]),
            six_significant(report.stability.pvalues[(k, s)]),
        ));
    }
    out
}

pub fn cve_table(cv: &CvResult) -> String {
    let mut out = String::from("lambda\tmean_cve\tsd_cve\n");
    for row in &cv.table {
        out.push_str(&format!("{}\t{}\t{}\n", row.lambda, row.mean_cve, row.sd_cve));
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// Writes the edge list, matrix document, run metadata and CV table into `dir`.
pub fn emit_network(report: &NetworkReport, dir: &Path) -> Result<OutputPaths> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = OutputPaths::in_dir(dir);
    write_file(&paths.edges, edge_table(report).as_bytes())?;
    write_file(
        &paths.matrices,
        to_json(&MatrixDocument::from_report(report)).as_bytes(),
    )?;
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: report.config.seed,
        lambda_cv: report.cv.lambda_cv,
        edges: report.stability.pruned_fit.support.len(),
        converged: report.converged(),
        unconverged_subsamples: report.stability.unconverged_subsamples,
        counts: report.counts.clone(),
        config: report.config.clone(),
    };
    write_file(&paths.metadata, to_json(&metadata).as_bytes())?;
    write_file(&paths.cve, cve_table(&report.cv).as_bytes())?;
    Ok(paths)
}
