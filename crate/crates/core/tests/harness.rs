use tard_core::adaptation::TrainConfig;
use tard_core::data::{DriftSchedule, LabeledSeries};
use tard_core::harness::{
    emit_report, run_evaluation, run_method, DataConfig, Detector, EvaluationReport, MethodId,
    MethodSettings, Prepared, PretrainCache, RunConfig, StreamEvent, StreamingDetector,
    SyntheticScenario,
};
use tard_core::models::{load_bundle, save_bundle};

fn scenario() -> SyntheticScenario {
    SyntheticScenario {
        n_controls: 3,
        n_sensors: 5,
        source_samples: 800,
        target_adapt_rows: 200,
        test_samples: 300,
        n_conditions: 4,
        schedule: DriftSchedule {
            segment_len: 50,
            ramp_len: 10,
            random_order: true,
            ..DriftSchedule::default()
        },
        shifted_sensors: vec![0, 3],
        fault_sensor: 1,
        fault_offset: 120,
        fault_duration: 80,
        ..SyntheticScenario::default()
    }
}

fn settings(seed: u64) -> MethodSettings {
    MethodSettings {
        train: TrainConfig {
            epochs: 15,
            seed,
            ..TrainConfig::default()
        },
        stream_batch: Some(32),
        ..MethodSettings::default()
    }
}

fn run_config(methods: Vec<MethodId>) -> RunConfig {
    RunConfig {
        seed: 11,
        methods,
        repeats: 1,
        data: DataConfig::Synthetic(scenario()),
        settings: settings(11),
    }
}

fn stream_all(detector: Detector, series: &LabeledSeries) -> Vec<StreamEvent> {
    let mut s = StreamingDetector::new(detector).unwrap();
    let mut events = Vec::new();
    for i in 0..series.rows() {
        events.extend(s.push(series.batch.values.row(i)).unwrap());
    }
    events.extend(s.finish().unwrap());
    events
}

#[test]
fn streaming_matches_offline_scoring_for_every_method() {
    let data = scenario().build(3).unwrap();
    let prepared = Prepared::new(&data.splits);
    let mut cache = PretrainCache::default();
    let test = &data.splits.test;
    for method in MethodId::ALL {
        let run = run_method(method, "c", &prepared, test, None, &settings(3), &mut cache).unwrap();
        let events = stream_all(run.fitted.detector.clone(), test);
        let trace = &run.trace;
        assert_eq!(events.len(), trace.smoothed.len(), "{method}");
        for (i, e) in events.iter().enumerate() {
            assert_eq!(e.index, i);
            assert_eq!(e.s_raw, trace.raw[i], "{method} row {i}");
            assert_eq!(e.s_smooth, trace.smoothed[i], "{method} row {i}");
            assert_eq!(e.label, trace.labels[i], "{method} row {i}");
            assert_eq!(e.threshold, trace.threshold);
        }
    }
}

#[test]
fn method_runs_are_reproducible() {
    let data = scenario().build(4).unwrap();
    let prepared = Prepared::new(&data.splits);
    let test = &data.splits.test;
    for method in [MethodId::Tard, MethodId::Mmd] {
        let once = || {
            let mut cache = PretrainCache::default();
            run_method(
                method,
                "c",
                &prepared,
                test,
                Some(&data.clean_test),
                &settings(4),
                &mut cache,
            )
            .unwrap()
        };
        let (a, b) = (once(), once());
        assert_eq!(a.row, b.row);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.fitted.detector.bundle, b.fitted.detector.bundle);
    }
}

#[test]
fn method_order_does_not_change_results() {
    let (fwd, _) = run_evaluation(&run_config(MethodId::ALL.to_vec())).unwrap();
    let mut reversed = MethodId::ALL.to_vec();
    reversed.reverse();
    let (back, _) = run_evaluation(&run_config(reversed)).unwrap();
    for row in &fwd.rows {
        let twin = back.rows.iter().find(|r| r.method == row.method).unwrap();
        assert_eq!(row, twin);
    }
}

#[test]
fn report_echo_reproduces_the_run() {
    let cfg = run_config(vec![MethodId::SourceOnly, MethodId::Tard]);
    let (report, runs) = run_evaluation(&cfg).unwrap();
    let text = report.to_json().unwrap();
    let parsed = EvaluationReport::from_json(&text).unwrap();
    assert_eq!(parsed, report);

    let (again, _) = run_evaluation(&parsed.config).unwrap();
    assert_eq!(again.to_json().unwrap(), text);

    let dir = tempfile::tempdir().unwrap();
    let traces: Vec<_> = runs.iter().map(|r| &r.trace).collect();
    emit_report(&report, &traces, dir.path()).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
        text
    );
    for row in &report.rows {
        assert!(dir.path().join(&row.trace).is_file(), "{}", row.trace);
    }
}

#[test]
fn reloaded_bundle_scores_identically() {
    let data = scenario().build(5).unwrap();
    let prepared = Prepared::new(&data.splits);
    let mut cache = PretrainCache::default();
    let dir = tempfile::tempdir().unwrap();
    for method in MethodId::ALL {
        let run = run_method(
            method,
            "c",
            &prepared,
            &data.splits.test,
            None,
            &settings(5),
            &mut cache,
        )
        .unwrap();
        let path = dir.path().join(format!("{method}.json"));
        save_bundle(&run.fitted.detector.bundle, &path).unwrap();
        let bundle = load_bundle(&path).unwrap();
        assert_eq!(bundle, run.fitted.detector.bundle);
        let trace = Detector::new(bundle)
            .unwrap()
            .score(&data.splits.test)
            .unwrap();
        assert_eq!(trace, run.trace, "{method}");
    }
}

#[test]
fn calibration_uses_only_healthy_adaptation_rows() {
    let data = scenario().build(6).unwrap();
    let prepared = Prepared::new(&data.splits);
    let mut cache = PretrainCache::default();
    let run = run_method(
        MethodId::SourceOnly,
        "c",
        &prepared,
        &data.splits.test,
        None,
        &settings(6),
        &mut cache,
    )
    .unwrap();

    // same fit, different test stream: the threshold cannot move
    let other = run_method(
        MethodId::SourceOnly,
        "c",
        &prepared,
        &data.clean_test,
        None,
        &settings(6),
        &mut cache,
    )
    .unwrap();
    assert_eq!(run.trace.threshold, other.trace.threshold);
    assert_eq!(
        run.fitted.detector.bundle.scoring,
        other.fitted.detector.bundle.scoring
    );
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            if let DataConfig::Csv(csv) = &cfg.data {
                for f in csv
                    .source
                    .iter()
                    .chain(csv.cases.iter().flat_map(|c| &c.files))
                {
                    assert!(f.manifest.is_file(), "{}", f.manifest.display());
                }
            }
            seen += 1;
        }
    }
    assert_eq!(seen, 5);
}
