use std::fs;
use std::path::{Path, PathBuf};

use egg_core::covariance::ErrorCovariance;
use egg_core::ingest::{
    align_traits, distance_prune, joint_chisq_screen, parse_gwas_file, write_gwas_file, GwasRecord, Locus,
};
use egg_core::pipeline::{
    edge_table, emit_network, run_pipeline, six_significant, MatrixDocument, NetworkReport, StageCounts,
};
use egg_core::selection::{CvResult, CveRow, StabilityResult};
use egg_core::{AnalysisConfig, Error, PrecisionFit, SummaryPanel, SymmetricMatrix};
use nalgebra::DMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const HEADER: &str = "SNP\tCHR\tPOS\tA1\tA2\tBETA\tSE\tN\n";

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn record(id: &str, a1: &str, a2: &str, beta: f64) -> GwasRecord {
    GwasRecord {
        variant_id: id.into(),
        chromosome: "1".into(),
        position: 100,
        effect_allele: a1.into(),
        other_allele: a2.into(),
        beta,
        se: 0.5,
        n: 1000,
    }
}

#[test]
fn parses_well_formed_file() {
    let dir = tempfile::tempdir().unwrap();
    let body = "snp\tchr\tpos\ta1\ta2\tbeta\tse\tn\textra\n\
                rs1\t1\t100\tA\tG\t0.1\t0.05\t1000\tx\n\
                rs2\t1\t200\tc\tt\t-0.2\t0.05\t1000\tx\n\
                rs3\t2\t300\tA\tC\t0\t0.1\t900\tx\n";
    let recs = parse_gwas_file(&write(dir.path(), "t.tsv", body)).unwrap();
    assert_eq!(recs.len(), 3);
    assert_eq!(recs[1].effect_allele, "C");
    assert_eq!(recs[2].n, 900);
    assert!((recs[0].z() - 2.0).abs() < 1e-12);
}

#[test]
fn missing_se_names_column_and_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "no_se.tsv",
        "SNP\tCHR\tPOS\tA1\tA2\tBETA\tN\nrs1\t1\t1\tA\tG\t0.1\t10\n",
    );
    let err = parse_gwas_file(&path).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "SE"));
    assert!(msg.contains("SE") && msg.contains("no_se.tsv"), "{msg}");
}

#[test]
fn zero_se_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}rs1\t1\t1\tA\tG\t0.1\t0.1\t10\nrs2\t1\t2\tA\tG\t0.1\t0\t10\n");
    match parse_gwas_file(&write(dir.path(), "t.tsv", &body)).unwrap_err() {
        Error::Parse { line, message, .. } => {
            assert_eq!(line, 3);
            assert!(message.contains("SE"));
        }
        other => panic!("unexpected {other}"),
    }
    let body = format!("{HEADER}rs1\t1\tx\tA\tG\t0.1\t0.1\t10\n");
    assert!(matches!(
        parse_gwas_file(&write(dir.path(), "u.tsv", &body)).unwrap_err(),
        Error::Parse { line: 2, .. }
    ));
}

#[test]
fn duplicates_keep_first() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{HEADER}rs1\t1\t1\tA\tG\t0.1\t0.1\t10\nrs1\t1\t1\tA\tG\t0.9\t0.1\t10\n");
    let recs = parse_gwas_file(&write(dir.path(), "t.tsv", &body)).unwrap();
    assert_eq!(recs.len(), 1);
    assert_eq!(recs[0].beta, 0.1);
}

#[test]
fn write_then_parse_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let recs = vec![record("a", "A", "G", 0.123456789), record("b", "T", "C", -1e-9)];
    let path = dir.path().join("rt.tsv");
    write_gwas_file(&path, &recs).unwrap();
    assert_eq!(parse_gwas_file(&path).unwrap(), recs);
}

#[test]
fn align_identical_swapped_and_disjoint() {
    let a = vec![record("x", "A", "G", 1.0), record("y", "A", "G", 2.0)];
    let b = vec![record("y", "A", "G", 3.0), record("x", "A", "G", 4.0)];
    let out = align_traits(&[("a".into(), a.clone()), ("b".into(), b)]).unwrap();
    assert_eq!(out.panel.n_variants(), 2);
    assert_eq!(out.panel.row(0), vec![2.0, 8.0]);

    let swapped = vec![record("x", "G", "A", 4.0), record("y", "A", "G", 3.0)];
    let out = align_traits(&[("a".into(), a.clone()), ("b".into(), swapped)]).unwrap();
    assert_eq!(out.panel.row(0), vec![2.0, -8.0]);

    let three = vec![
        record("x", "A", "G", 1.0),
        record("y", "A", "G", 2.0),
        record("w", "A", "G", 5.0),
    ];
    let mismatch = vec![
        record("w", "A", "G", 6.0),
        record("x", "C", "T", 4.0),
        record("y", "A", "G", 3.0),
    ];
    let out = align_traits(&[("a".into(), three), ("b".into(), mismatch)]).unwrap();
    assert_eq!(out.panel.n_variants(), 2);
    assert_eq!(out.loci[1].variant_id, "w");
    assert_eq!(out.allele_mismatches, 1);

    let other = vec![record("z", "A", "G", 1.0)];
    assert!(matches!(
        align_traits(&[("a".into(), a), ("b".into(), other)]),
        Err(Error::EmptyIntersection)
    ));
}

#[test]
fn joint_screen_cases() {
    let mut z = DMatrix::zeros(2, 10);
    let scale = (31.41f64 / 10.0).sqrt();
    for k in 0..10 {
        z[(1, k)] = scale;
    }
    let panel = SummaryPanel::unlabeled(z, 1000).unwrap();
    let err = ErrorCovariance {
        matrix: SymmetricMatrix::identity(10),
    };
    let screen = joint_chisq_screen(&panel, &err, 0.05).unwrap();
    assert_eq!(screen.statistic[0], 0.0);
    assert_eq!(screen.p_value[0], 1.0);
    assert_eq!(screen.kept, vec![1]);
    let oracle = ChiSquared::new(10.0).unwrap().sf(31.41);
    assert!((screen.statistic[1] - 31.41).abs() < 1e-10);
    assert!(((screen.p_value[1] - oracle) / oracle).abs() < 1e-8);
    assert!((screen.p_value[1] - 5.2e-4).abs() < 0.5e-4);
    assert_eq!(joint_chisq_screen(&panel, &err, 1.0).unwrap().kept, vec![0, 1]);
}

#[test]
fn prune_three_positions() {
    let loci: Vec<Locus> = [0u64, 600_000, 1_200_000]
        .iter()
        .map(|&pos| Locus {
            variant_id: pos.to_string(),
            chromosome: "7".into(),
            position: pos,
        })
        .collect();
    assert_eq!(
        distance_prune(&loci, &[1e-12, 1e-10, 1e-9], 1_000_000).unwrap(),
        vec![0, 2]
    );
}

fn report_with(precision: SymmetricMatrix, frequencies: SymmetricMatrix) -> NetworkReport {
    let p = precision.dim();
    NetworkReport {
        traits: (1..=p).map(|k| format!("T{k}")).collect(),
        genetic_correlation: SymmetricMatrix::from_fn(p, |k, s| if k == s { 1.0 } else { 0.1 / 3.0 }),
        error_covariance: ErrorCovariance {
            matrix: SymmetricMatrix::identity(p),
        },
        cv: CvResult {
            lambda_cv: 0.1,
            table: vec![CveRow {
                lambda: 0.1,
                mean_cve: 0.5,
                sd_cve: 0.01,
            }],
        },
        stability: StabilityResult {
            lambda_cv: 0.1,
            pvalues: frequencies.map_entries(|_, _, v| 1.0 - v),
            frequencies,
            pruned_fit: PrecisionFit::from_precision(precision, true, 10),
            unconverged_subsamples: 0,
        },
        counts: StageCounts::default(),
        config: AnalysisConfig::default(),
    }
}

#[test]
fn empty_support_gives_header_only() {
    let report = report_with(SymmetricMatrix::identity(3), SymmetricMatrix::identity(3));
    let table = edge_table(&report);
    assert_eq!(table.lines().count(), 1);
    assert!(table.starts_with("trait_a\ttrait_b\tpartial_corr\tprecision_entry\tselection_freq\tempirical_p"));
}

#[test]
fn negative_precision_gives_positive_partial_correlation() {
    let theta = SymmetricMatrix::from_rows(&[&[1.0, -0.5], &[-0.5, 1.0]]).unwrap();
    let freq = SymmetricMatrix::from_rows(&[&[1.0, 0.97], &[0.97, 1.0]]).unwrap();
    let table = edge_table(&report_with(theta, freq));
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 2);
    let cells: Vec<&str> = rows[1].split('\t').collect();
    assert_eq!(cells[..4], ["T1", "T2", "0.5", "-0.5"]);
    assert_eq!(cells[4].parse::<f64>().unwrap(), 0.97);
    assert!((cells[5].parse::<f64>().unwrap() - 0.03).abs() < 1e-12);
}

#[test]
fn emitted_documents_round_trip_and_agree() {
    let dir = tempfile::tempdir().unwrap();
    let theta = SymmetricMatrix::from_rows(&[
        &[1.3, -0.123456789, 0.0],
        &[-0.123456789, 1.1, 1.0 / 3.0],
        &[0.0, 1.0 / 3.0, 0.9],
    ])
    .unwrap();
    let freq = SymmetricMatrix::from_fn(3, |k, s| if k == s { 1.0 } else { 0.96 + 0.01 * (k + s) as f64 });
    let report = report_with(theta.clone(), freq);
    let paths = emit_network(&report, dir.path()).unwrap();
    let doc = MatrixDocument::read(&paths.matrices).unwrap();
    for k in 0..3 {
        for s in 0..3 {
            assert!((doc.precision[k][s] - theta[(k, s)]).abs() <= 1e-12);
            assert!((doc.genetic_correlation[k][s] - report.genetic_correlation[(k, s)]).abs() <= 1e-12);
        }
    }
    let edges = fs::read_to_string(&paths.edges).unwrap();
    for line in edges.lines().skip(1) {
        let cells: Vec<&str> = line.split('\t').collect();
        let k = doc.traits.iter().position(|t| t == cells[0]).unwrap();
        let s = doc.traits.iter().position(|t| t == cells[1]).unwrap();
        assert_eq!(cells[3].parse::<f64>().unwrap(), six_significant(doc.precision[k][s]));
    }
    assert_eq!(edges.lines().count(), 3);
    let cve = fs::read_to_string(&paths.cve).unwrap();
    assert_eq!(cve, "lambda\tmean_cve\tsd_cve\n0.1\t0.5\t0.01\n");
    assert!(fs::read_to_string(&paths.metadata).unwrap().contains("\"seed\": 0"));
}

#[test]
fn single_trait_config_fails_before_reading() {
    let config = AnalysisConfig {
        trait_files: vec![PathBuf::from("/nonexistent/only.tsv")],
        ..AnalysisConfig::default()
    };
    let err = run_pipeline(&config).unwrap_err();
    assert!(err.is_validation(), "{err}");
    assert!(!matches!(err, Error::Io { .. }));
}

#[test]
fn missing_file_is_a_stage_error() {
    let config = AnalysisConfig {
        trait_files: vec![PathBuf::from("/nonexistent/a.tsv"), PathBuf::from("/nonexistent/b.tsv")],
        ..AnalysisConfig::default()
    };
    let err = run_pipeline(&config).unwrap_err();
    assert!(!err.is_validation());
    assert!(err.to_string().contains("parse"), "{err}");
}
