use std::path::PathBuf;

use fmtrack::hard_instances::gen_zipf;
use fmtrack::harness::{
    build_stream, calibrate_constant, copies_for, run_experiment, scaling_sweep, trial_seed, AggregateReport,
    Calibration, CopyPolicy, ExperimentConfig, HarnessError, SketchKind, Source,
};
use fmtrack::hashing::{derive_seed, role};
use fmtrack::sketches::AmsSketch;
use fmtrack::tracker::{evaluate_tracking, TrackOptions, Tracker};

fn small(trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        source: Source::Zipf { n: 256, m: 3000, skew: 1.1 },
        copy_policy: CopyPolicy::Theorem(1.0),
        trials,
        seed: 7,
        ..ExperimentConfig::default()
    }
}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn rerun_writes_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let trace = dir.path().join(format!("{name}.trace"));
        run_experiment(&ExperimentConfig { output: Some(path.clone()), trace: Some(trace.clone()), ..small(6) })
            .unwrap();
        (std::fs::read(path).unwrap(), std::fs::read(trace).unwrap())
    };
    let (a, ta) = run("a.csv");
    let (b, tb) = run("b.csv");
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next(), Some(AggregateReport::CSV_HEADER));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn every_trial_replays_from_its_seed() {
    let cfg = small(4);
    let report = run_experiment(&cfg).unwrap();
    for outcome in &report.trials {
        let seed = trial_seed(cfg.seed, outcome.trial);
        let stream = build_stream(&cfg, seed).unwrap();
        let l = copies_for(&cfg, stream.length(), stream.universe);
        let mut t =
            Tracker::ams(l, AmsSketch::buckets_for(cfg.eps), stream.universe, derive_seed(seed, 0, role::SKETCH))
                .unwrap();
        let alone = evaluate_tracking(&stream, &mut t, &TrackOptions::new(cfg.p, cfg.eps)).unwrap();
        assert_eq!(alone, outcome.report);
    }
}

#[test]
fn unreachable_target_reports_failure() {
    let cfg = ExperimentConfig { buckets: Some(2), ..small(10) };
    match calibrate_constant(&cfg, 0.999, &[1.0]).unwrap() {
        Calibration::Failed { best_constant, best_fraction, trials } => {
            assert_eq!(best_constant, 1.0);
            assert!(best_fraction < 0.999);
            assert_eq!(trials, 10);
        }
        other => panic!("expected failure, got {other:?}"),
    }
    assert!(calibrate_constant(&cfg, 1.5, &[1.0]).is_err());
    assert!(calibrate_constant(&cfg, 0.5, &[]).is_err());
}

#[test]
fn file_source_runs_and_missing_file_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("stream.txt");
    std::fs::write(&path, gen_zipf(128, 2000, 1.2, 3).unwrap().to_text()).unwrap();
    let cfg = ExperimentConfig { source: Source::File { path: path.clone() }, trials: 3, ..small(3) };
    let report = run_experiment(&cfg).unwrap();
    // the stream is shared, only the sketch seeds differ
    assert!(report.trials.iter().all(|t| t.stream_length == 2000));

    let oracle = ExperimentConfig { sketch: SketchKind::Oracle, ..cfg.clone() };
    assert_eq!(run_experiment(&oracle).unwrap().success_fraction, 1.0);

    let missing = ExperimentConfig { source: Source::File { path: dir.path().join("absent.txt") }, ..cfg };
    assert!(matches!(run_experiment(&missing), Err(HarnessError::Io(_))));
}

#[test]
fn shipped_configs_parse() {
    for name in ["ams_zipf.conf", "ams_uniform.conf", "stable_zipf.conf"] {
        let cfg = ExperimentConfig::load(&configs_dir().join(name)).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg, "{name}");
        assert!(matches!(cfg.copy_policy, CopyPolicy::Theorem(_)), "{name}");
    }
}

#[test]
fn mode_mismatch_is_rejected() {
    let cfg = ExperimentConfig {
        source: Source::TurnstileHard { positions: 4, players: 2, alphabet: 2 },
        mode: Some(fmtrack::StreamMode::CashRegister),
        ..small(1)
    };
    assert!(matches!(run_experiment(&cfg), Err(HarnessError::BadConfig(_))));
}

#[test]
fn sweep_rejects_stable_and_single_length() {
    let cfg = small(2);
    assert!(scaling_sweep(&cfg, &[1000], 0.9).is_err());
    let stable = ExperimentConfig { sketch: SketchKind::Stable, p: 1.5, ..cfg };
    assert!(scaling_sweep(&stable, &[1000, 2000], 0.9).is_err());
}
