//! GWAS summary files, allele alignment and variant screening.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::covariance::{ErrorCovariance, NullPanel, SummaryPanel};
use crate::error::{Error, Result};
use crate::stats::{chi_square_sf, median, normal_two_sided_p};

pub const REQUIRED_COLUMNS: [&str; 8] = ["SNP", "CHR", "POS", "A1", "A2", "BETA", "SE", "N"];

/// Floor applied to the error covariance before it is inverted for the joint test.
const JOINT_SCREEN_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwasRecord {
    pub variant_id: String,
    pub chromosome: String,
    pub position: u64,
    pub effect_allele: String,
    pub other_allele: String,
    pub beta: f64,
    pub se: f64,
    pub n: u64,
}

impl GwasRecord {
    pub fn z(&self) -> f64 {
        self.beta / self.se
    }
}

fn field<T: std::str::FromStr>(raw: &str, column: &str, path: &Path, line: usize) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("cannot parse {column} value '{raw}'"),
    })
}

/// Reads a tab-separated summary file with columns SNP, CHR, POS, A1, A2,
/// BETA, SE and N (header matched case-insensitively, extra columns ignored).
///
/// Later duplicates of a variant id are dropped with a warning.
pub fn parse_gwas_file(path: &Path) -> Result<Vec<GwasRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .flexible(false)
        .from_reader(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let mut idx = [0usize; 8];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })?;
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut duplicates = 0usize;
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let get = |i: usize| &row[idx[i]];
        let record = GwasRecord {
            variant_id: get(0).trim().to_string(),
            chromosome: get(1).trim().to_string(),
            position: field(get(2), "POS", path, line)?,
            effect_allele: get(3).trim().to_ascii_uppercase(),
            other_allele: get(4).trim().to_ascii_uppercase(),
            beta: field(get(5), "BETA", path, line)?,
            se: field(get(6), "SE", path, line)?,
            n: field(get(7), "N", path, line)?,
        };
        if !record.beta.is_finite() {
            return Err(parse_err(line, "BETA is not finite".into()));
        }
        if !(record.se > 0.0 && record.se.is_finite()) {
            return Err(parse_err(line, format!("SE must be positive, got {}", record.se)));
        }
        if record.n == 0 {
            return Err(parse_err(line, "N must be positive".into()));
        }
        if !seen.insert(record.variant_id.clone()) {
            duplicates += 1;
            continue;
        }
        records.push(record);
    }
    if duplicates > 0 {
        warn!(
            "{}: kept the first of {duplicates} duplicated variant ids",
            path.display()
        );
    }
    Ok(records)
}

/// Writes records in the format read by [`parse_gwas_file`].
pub fn write_gwas_file(path: &Path, records: &[GwasRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "{}", REQUIRED_COLUMNS.join("\t"))?;
        for r in records {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{:e}\t{:e}\t{}",
                r.variant_id, r.chromosome, r.position, r.effect_allele, r.other_allele, r.beta, r.se, r.n
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Locus {
    pub variant_id: String,
    pub chromosome: String,
    pub position: u64,
}

/// Z-score panel over the variants shared by every trait, with positions.
#[derive(Debug, Clone)]
pub struct AlignedPanel {
    pub panel: SummaryPanel,
    pub loci: Vec<Locus>,
    /// Shared variants dropped because their alleles could not be matched.
    pub allele_mismatches: usize,
}

impl AlignedPanel {
    pub fn select(&self, rows: &[usize]) -> Result<AlignedPanel> {
        Ok(AlignedPanel {
            panel: self.panel.select_rows(rows)?,
            loci: rows.iter().map(|&j| self.loci[j].clone()).collect(),
            allele_mismatches: self.allele_mismatches,
        })
    }
}

/// Joins traits on variant id, in the row order of the first trait.
///
/// Alleles must match the first trait exactly or as an A1/A2 swap, in which
/// case the effect sign is flipped. Anything else is dropped and counted.
/// Each trait's sample size is the median `N` over the retained rows.
pub fn align_traits(traits: &[(String, Vec<GwasRecord>)]) -> Result<AlignedPanel> {
    if traits.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 traits, got {}",
            traits.len()
        )));
    }
    let lookups: Vec<HashMap<&str, &GwasRecord>> = traits[1..]
        .iter()
        .map(|(_, recs)| recs.iter().map(|r| (r.variant_id.as_str(), r)).collect())
        .collect();

    let p = traits.len();
    let mut z_rows: Vec<Vec<f64>> = Vec::new();
    let mut n_rows: Vec<Vec<u64>> = Vec::new();
    let mut loci = Vec::new();
    let mut mismatches = 0usize;
    'variants: for reference in &traits[0].1 {
        let mut z = Vec::with_capacity(p);
        let mut n = Vec::with_capacity(p);
        z.push(reference.z());
        n.push(reference.n);
        for lookup in &lookups {
            let Some(other) = lookup.get(reference.variant_id.as_str()) else {
                continue 'variants;
            };
            let sign = if other.effect_allele == reference.effect_allele && other.other_allele == reference.other_allele
            {
                1.0
            } else if other.effect_allele == reference.other_allele && other.other_allele == reference.effect_allele {
                -1.0
            } else {
                mismatches += 1;
                continue 'variants;
            };
            z.push(sign * other.z());
            n.push(other.n);
        }
        z_rows.push(z);
        n_rows.push(n);
        loci.push(Locus {
            variant_id: reference.variant_id.clone(),
            chromosome: reference.chromosome.clone(),
            position: reference.position,
        });
    }
    if mismatches > 0 {
        warn!("dropped {mismatches} shared variants with unmatched alleles");
    }
    if z_rows.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let m = z_rows.len();
    let z = DMatrix::from_fn(m, p, |j, k| z_rows[j][k]);
    let sample_sizes = (0..p)
        .map(|k| {
            let ns: Vec<f64> = n_rows.iter().map(|r| r[k] as f64).collect();
            median(&ns).round() as u64
        })
        .collect();
    let labels = traits.iter().map(|(l, _)| l.clone()).collect();
    let panel = SummaryPanel::new(z, labels, sample_sizes)?;
    Ok(AlignedPanel {
        panel,
        loci,
        allele_mismatches: mismatches,
    })
}

/// Splits row indices into null variants (two-sided p above `threshold` for
/// every trait) and the rest.
pub fn null_screen(panel: &SummaryPanel, threshold: f64) -> (Vec<usize>, Vec<usize>) {
    (0..panel.n_variants()).partition(|&j| panel.row(j).iter().all(|&z| normal_two_sided_p(z) > threshold))
}

pub fn null_panel(panel: &SummaryPanel, rows: &[usize]) -> Result<NullPanel> {
    let z = panel.z();
    NullPanel::new(DMatrix::from_fn(rows.len(), panel.n_traits(), |i, k| z[(rows[i], k)]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointScreen {
    /// `z_jᵀ R_ω⁻¹ z_j` for every input row.
    pub statistic: Vec<f64>,
    pub p_value: Vec<f64>,
    /// Rows with p-value below the threshold, ascending.
    pub kept: Vec<usize>,
}

/// Joint chi-square test with `p` degrees of freedom against the error covariance.
pub fn joint_chisq_screen(panel: &SummaryPanel, err: &ErrorCovariance, threshold: f64) -> Result<JointScreen> {
    let p = panel.n_traits();
    if err.matrix.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: err.matrix.dim(),
        });
    }
    let r = err.matrix.clip_eigenvalues(JOINT_SCREEN_FLOOR)?;
    let mut statistic = Vec::with_capacity(panel.n_variants());
    for j in 0..panel.n_variants() {
        statistic.push(r.inverse_quadratic_form(&panel.row(j))?);
    }
    let p_value: Vec<f64> = statistic.iter().map(|&s| chi_square_sf(s, p as f64)).collect();
    let kept = (0..p_value.len())
        .filter(|&j| threshold >= 1.0 || p_value[j] < threshold)
        .collect();
    Ok(JointScreen {
        statistic,
        p_value,
        kept,
    })
}

/// Greedy distance pruning: visit variants by ascending p-value and keep one
/// unless a kept variant on the same chromosome lies within `window_bp`.
///
/// Returns kept indices in ascending order.
pub fn distance_prune(loci: &[Locus], p_values: &[f64], window_bp: u64) -> Result<Vec<usize>> {
    if loci.len() != p_values.len() {
        return Err(Error::DimensionMismatch {
            expected: loci.len(),
            found: p_values.len(),
        });
    }
    let mut order: Vec<usize> = (0..loci.len()).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut kept_by_chr: HashMap<&str, Vec<u64>> = HashMap::new();
    let mut kept = Vec::new();
    for j in order {
        let positions = kept_by_chr.entry(loci[j].chromosome.as_str()).or_default();
        if positions.iter().any(|&q| q.abs_diff(loci[j].position) <= window_bp) {
            continue;
        }
        positions.push(loci[j].position);
        kept.push(j);
    }
    kept.sort_unstable();
    info!("distance pruning kept {} of {} variants", kept.len(), loci.len());
    Ok(kept)
}

/// Per-trait summary records for a causal and a null Z-score panel, with
/// each causal variant on its own 1.5 Mb slot and nulls packed at the end of
/// each chromosome.
pub fn synthetic_records(panel: &SummaryPanel, nulls: &NullPanel) -> Vec<Vec<GwasRecord>> {
    const CHROMOSOMES: usize = 22;
    let p = panel.n_traits();
    let m = panel.n_variants();
    (0..p)
        .map(|k| {
            let n = panel.sample_sizes()[k];
            let se = 1.0 / (n as f64).sqrt();
            let record = |id: String, chr: usize, pos: u64, z: f64| GwasRecord {
                variant_id: id,
                chromosome: (chr + 1).to_string(),
                position: pos,
                effect_allele: "A".into(),
                other_allele: "G".into(),
                beta: z * se,
                se,
                n,
            };
            let causal = (0..m).map(|j| {
                let slot = (j / CHROMOSOMES) as u64;
                record(
                    format!("c{j}"),
                    j % CHROMOSOMES,
                    1_000_000 + slot * 1_500_000,
                    panel.z()[(j, k)],
                )
            });
            let null = (0..nulls.n_variants()).map(|i| {
                let slot = (i / CHROMOSOMES) as u64;
                record(
                    format!("n{i}"),
                    i % CHROMOSOMES,
                    400_000_000 + slot * 1_000,
                    nulls.b()[(i, k)],
                )
            });
            causal.chain(null).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn locus(chr: &str, pos: u64) -> Locus {
        Locus {
            variant_id: format!("{chr}:{pos}"),
            chromosome: chr.into(),
            position: pos,
        }
    }

    #[test]
    fn prune_hand_traces() {
        let loci = vec![locus("1", 0), locus("2", 0), locus("3", 0)];
        assert_eq!(
            distance_prune(&loci, &[0.1, 0.2, 0.3], 1_000_000).unwrap(),
            vec![0, 1, 2]
        );
        let loci = vec![locus("1", 5_000), locus("1", 6_000)];
        assert_eq!(distance_prune(&loci, &[0.2, 0.1], 1_000_000).unwrap(), vec![1]);
        let loci = vec![locus("1", 0), locus("1", 600_000), locus("1", 1_200_000)];
        assert_eq!(
            distance_prune(&loci, &[1e-10, 1e-9, 1e-8], 1_000_000).unwrap(),
            vec![0, 2]
        );
    }

    #[test]
    fn null_screen_partitions() {
        let z = DMatrix::from_row_slice(3, 2, &[0.1, -0.5, 3.0, 0.0, 1.0, 1.5]);
        let panel = SummaryPanel::unlabeled(z, 1000).unwrap();
        let (nulls, rest) = null_screen(&panel, 0.05);
        assert_eq!(nulls, vec![0, 2]);
        assert_eq!(rest, vec![1]);
    }
}
