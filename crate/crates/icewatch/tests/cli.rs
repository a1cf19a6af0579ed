use std::path::Path;
use std::process::{Command, Output};

use icewatch::config::{DataSource, ExperimentConfig};
use icewatch_core::learners::LearnerConfig;
use icewatch_core::pipeline::PipelineConfig;
use icewatch_core::synth::{OffsetProfile, SynthConfig};

fn icewatch(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_icewatch"))
        .args(args)
        .current_dir(dir)
        .env("ICEWATCH_THREADS", "1")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = icewatch(args, dir);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str], dir: &Path) -> i32 {
    icewatch(args, dir).status.code().unwrap()
}

fn small_experiment(runs: usize) -> ExperimentConfig {
    let base = SynthConfig {
        duration: 30_000,
        ..SynthConfig::default()
    };
    let mut traditional = PipelineConfig::traditional(LearnerConfig::default());
    let mut reengineered = PipelineConfig::reengineered(LearnerConfig::default());
    traditional.n_runs = runs;
    reengineered.n_runs = runs;
    ExperimentConfig {
        data: DataSource::Synthetic {
            base,
            offset_profile: OffsetProfile::documented_default(),
        },
        traditional: Some(traditional),
        reengineered: Some(reengineered),
    }
}

#[test]
fn synth_is_byte_identical_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        &["synth", "--duration", "3000", "--seed", "4", "--out", "a"],
        d,
    );
    ok(
        &["synth", "--duration", "3000", "--seed", "4", "--out", "b"],
        d,
    );
    for turbine in ["wt_a", "wt_b"] {
        for file in ["scada.csv", "windows.csv", "ledger.json"] {
            let a = std::fs::read(d.join("a").join(turbine).join(file)).unwrap();
            let b = std::fs::read(d.join("b").join(turbine).join(file)).unwrap();
            assert_eq!(a, b, "{turbine}/{file}");
        }
    }
    ok(
        &["synth", "--duration", "3000", "--single", "--out", "c"],
        d,
    );
    assert!(!d.join("c/wt_b").exists());
}

#[test]
fn ingest_train_predict_flow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["synth", "--duration", "30000", "--out", "data"], d);
    let summary = ok(
        &[
            "ingest",
            "--scada",
            "data/wt_a/scada.csv",
            "--windows",
            "data/wt_a/windows.csv",
            "--out",
            "wt_a.csv",
        ],
        d,
    );
    assert!(summary.starts_with("wt_a: 30000 records"), "{summary}");

    let ranking = ok(
        &[
            "features",
            "--dataset",
            "wt_a.csv",
            "--out",
            "features.csv",
            "--rank",
        ],
        d,
    );
    assert!(ranking.lines().count() > 10);
    let header = std::fs::read_to_string(d.join("features.csv")).unwrap();
    assert!(header.starts_with("x1,x2,x3,x4,x5,x6,x7,x8,x9,x10,y"));

    let rules = ok(&["inspect-rules", "--dataset", "wt_a.csv"], d);
    assert_eq!(rules.lines().count(), 6);

    let pipeline =
        serde_json::to_string(&PipelineConfig::reengineered(LearnerConfig::default())).unwrap();
    std::fs::write(d.join("pipeline.json"), pipeline).unwrap();
    ok(
        &[
            "train",
            "--config",
            "pipeline.json",
            "--dataset",
            "wt_a.csv",
            "--out",
            "bundle.json",
        ],
        d,
    );
    ok(
        &[
            "predict",
            "--bundle",
            "bundle.json",
            "--scada",
            "data/wt_b/scada.csv",
            "--out",
            "labels.csv",
        ],
        d,
    );
    let labels = std::fs::read_to_string(d.join("labels.csv")).unwrap();
    let mut lines = labels.lines();
    assert_eq!(lines.next(), Some("time,label,confidence_flag"));
    assert_eq!(lines.count(), 30_000);
}

#[test]
fn small_experiment_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = serde_json::to_string_pretty(&small_experiment(2)).unwrap();
    std::fs::write(d.join("exp.json"), cfg).unwrap();
    let text = ok(&["experiment", "--config", "exp.json", "--out", "one"], d);
    ok(&["experiment", "--config", "exp.json", "--out", "two"], d);
    assert!(text.contains("reengineered"));
    let read = |sub: &str| std::fs::read(d.join(sub).join("report.json")).unwrap();
    assert_eq!(read("one"), read("two"));
    assert!(d.join("one/report.txt").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&[], d), 2);
    assert_eq!(code(&["experiment", "--config", "missing.json"], d), 2);

    std::fs::write(d.join("broken.json"), "{ not json").unwrap();
    assert_eq!(code(&["experiment", "--config", "broken.json"], d), 2);

    let mut swapped = small_experiment(1);
    std::mem::swap(&mut swapped.traditional, &mut swapped.reengineered);
    std::fs::write(
        d.join("swapped.json"),
        serde_json::to_string(&swapped).unwrap(),
    )
    .unwrap();
    assert_eq!(code(&["experiment", "--config", "swapped.json"], d), 2);

    assert_eq!(
        code(
            &[
                "ingest",
                "--scada",
                "nope.csv",
                "--windows",
                "nope.csv",
                "--out",
                "x.csv"
            ],
            d
        ),
        3
    );

    std::fs::write(d.join("bad.csv"), "time,wind_speed\n1,abc\n").unwrap();
    std::fs::write(d.join("windows.csv"), "start,end,class\n").unwrap();
    assert_eq!(
        code(
            &[
                "ingest",
                "--scada",
                "bad.csv",
                "--windows",
                "windows.csv",
                "--out",
                "x.csv"
            ],
            d
        ),
        3
    );
}
