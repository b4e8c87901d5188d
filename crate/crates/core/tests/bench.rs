use mnr::bench::{
    check_bands, compute_fsr_nsr, emit_report, run_experiment, run_replicates, ExperimentConfig,
    MetricsTable, ReplicateSummary, ReportFormat, REPORT_CSV_COLUMNS,
};

const SMOKE: &str = include_str!("../../../configs/smoke.json");

fn smoke() -> ExperimentConfig {
    ExperimentConfig::from_json(SMOKE).unwrap()
}

fn small(replicates: usize) -> ExperimentConfig {
    let mut cfg = smoke();
    cfg.replicates = replicates;
    cfg.generator.n = 60;
    cfg.generator.cov.p = 20;
    cfg.joint_sets = vec![vec![0, 1], vec![2, 5]];
    cfg
}

#[test]
fn single_replicate_table_equals_its_indicators() {
    let cfg = smoke();
    let reps = run_replicates(&cfg, 0..1).unwrap();
    let rep = &reps[0];
    assert!(rep.error.is_none());
    let table = run_experiment(&cfg).unwrap();
    let signal: Vec<f64> = (0..3)
        .filter_map(|j| rep.covered[j])
        .map(|c| f64::from(u8::from(c)))
        .collect();
    let cov = signal.iter().sum::<f64>() / signal.len() as f64;
    assert_eq!(table.signal.unwrap().coverage, cov);
    for c in &table.coefficients {
        assert_eq!(c.mean, rep.estimate[c.feature].unwrap());
        assert_eq!(c.sd, 0.0);
    }
    assert_eq!(table.replicates, 1);
    assert_eq!(table.completed, 1);
}

fn handmade(cfg: &ExperimentConfig, covered: &[[bool; 3]]) -> Vec<ReplicateSummary> {
    let p = cfg.generator.cov.p;
    covered
        .iter()
        .enumerate()
        .map(|(r, sig)| {
            let mut s = ReplicateSummary::empty(r, r as u64, p, 0);
            for j in 0..p {
                s.estimate[j] = Some(0.0);
                s.covered[j] = Some(if j < 3 { sig[j] } else { true });
                s.width[j] = Some(if j < 3 { 1.0 + r as f64 } else { 2.0 });
            }
            s.selected = Some(vec![0, 1, 2]);
            s
        })
        .collect()
}

#[test]
fn always_covering_intervals_give_full_coverage() {
    let cfg = smoke();
    let model = cfg.model_spec().unwrap();
    let reps = handmade(&cfg, &[[true; 3], [true; 3], [true; 3]]);
    let t = MetricsTable::from_replicates(&cfg, &model, &reps);
    assert_eq!(t.signal.unwrap().coverage, 1.0);
    assert_eq!(t.noise.unwrap().coverage, 1.0);
    assert_eq!(t.signal.unwrap().coverage_sd, 0.0);
    assert_eq!(t.fsr, Some(0.0));
    assert_eq!(t.nsr, Some(0.0));
}

#[test]
fn standard_errors_by_hand() {
    let cfg = smoke();
    let model = cfg.model_spec().unwrap();
    let reps = handmade(&cfg, &[[true, true, false], [true, true, true]]);
    let t = MetricsTable::from_replicates(&cfg, &model, &reps);
    let g = t.signal.unwrap();
    // pooled indicators 1,1,0,1,1,1: sample variance 1/6, two replicates
    assert!((g.coverage - 5.0 / 6.0).abs() < 1e-15);
    assert!((g.coverage_sd - (1.0f64 / 12.0).sqrt()).abs() < 1e-15);
    // widths 1,1,1,2,2,2: sample variance 0.3
    assert!((g.width - 1.5).abs() < 1e-15);
    assert!((g.width_sd - 0.15f64.sqrt()).abs() < 1e-15);
}

#[test]
fn failed_replicates_are_excluded_and_listed() {
    let cfg = smoke();
    let model = cfg.model_spec().unwrap();
    let mut reps = handmade(&cfg, &[[true; 3], [false; 3]]);
    reps[1].error = Some("boom".into());
    let t = MetricsTable::from_replicates(&cfg, &model, &reps);
    assert_eq!(t.completed, 1);
    assert_eq!(t.failed.len(), 1);
    assert_eq!(t.failed[0].error, "boom");
    assert_eq!(t.signal.unwrap().coverage, 1.0);
    assert_eq!(t.value("failure_rate"), Some(0.5));
}

#[test]
fn selection_rates_by_hand() {
    let truth = [0, 1, 2, 3, 4, 5];
    assert_eq!(compute_fsr_nsr(&[truth.to_vec()], &truth), (0.0, 0.0));
    // one false among six selected, nothing missed
    assert_eq!(
        compute_fsr_nsr(&[vec![0, 1, 2, 3, 4, 9]], &truth[..5]),
        (1.0 / 6.0, 0.0)
    );
    // nothing selected in any replicate
    assert_eq!(compute_fsr_nsr(&[vec![], vec![]], &truth), (0.0, 1.0));
}

#[test]
fn reports_round_trip_and_have_their_headers() {
    let cfg = small(3);
    let t = run_experiment(&cfg).unwrap();
    assert_eq!(MetricsTable::from_json(&t.to_json()).unwrap(), t);
    let csv = String::from_utf8(emit_report(&t, ReportFormat::Csv)).unwrap();
    assert_eq!(csv.lines().next().unwrap(), REPORT_CSV_COLUMNS.join(","));
    let md = String::from_utf8(emit_report(&t, ReportFormat::Markdown)).unwrap();
    assert!(md.contains("Coverage") && md.contains("Width"));
    let json = emit_report(&t, ReportFormat::Json);
    assert_eq!(
        MetricsTable::from_json(std::str::from_utf8(&json).unwrap()).unwrap(),
        t
    );
    assert_eq!(t.joint.len(), 2);
}

#[test]
fn reports_do_not_depend_on_the_thread_count() {
    let cfg = small(6);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let t = pool.install(|| run_experiment(&cfg).unwrap());
        [
            ReportFormat::Csv,
            ReportFormat::Json,
            ReportFormat::Markdown,
        ]
        .map(|f| emit_report(&t, f))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn replicate_batches_merge_to_the_full_run() {
    let cfg = small(6);
    let whole = run_replicates(&cfg, 0..6).unwrap();
    let mut parts = run_replicates(&cfg, 0..3).unwrap();
    parts.extend(run_replicates(&cfg, 3..6).unwrap());
    assert_eq!(whole, parts);
    let seeds: std::collections::BTreeSet<u64> = whole.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 6);
}

#[test]
fn bands_are_checked() {
    let cfg = small(2);
    let t = run_experiment(&cfg).unwrap();
    let mut bands = cfg.bands.clone();
    bands[0].min = Some(2.0);
    let checks = check_bands(&t, &bands);
    assert!(!checks[0].pass);
    assert!(checks[0].to_string().contains("OUT OF BAND"));
    assert!(check_bands(&t, &cfg.bands).iter().all(|c| c.pass));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = smoke();
    cfg.replicates = 0;
    assert!(cfg.validate().is_err());
    let mut cfg = smoke();
    cfg.level = 1.5;
    assert!(cfg.validate().is_err());
    let mut cfg = smoke();
    cfg.joint_sets = vec![vec![3]];
    assert!(cfg.validate().is_err());
    let bad_metric = SMOKE.replace("signal_coverage", "coverage_of_everything");
    assert!(ExperimentConfig::from_json(&bad_metric).is_err());
    assert!(ExperimentConfig::from_json("{").is_err());
}

#[test]
fn shipped_configs_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.desk_scaled().validate().unwrap();
        seen += 1;
    }
    assert!(seen >= 8);
}
