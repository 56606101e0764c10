use std::fs;
use std::path::Path;
use std::process::Command;

use tokenpress::dump::write_dump;
use tokenpress::pipeline::{
    load_config, parse_config, run, synthetic_input, write_outputs, SyntheticSpec, CURVES_FILE, MANIFEST_FILE,
    QUANT_FILE, RATES_FILE,
};

const SWEEP: &str = r#"
seed = 5
budgets = [48, 24, 12]

[[input]]
name = "a"
synthetic = { frames = 2, rows = 6, cols = 6, dim = 16, text_queries = 2 }

[[input]]
name = "b"
synthetic = { rows = 8, cols = 8, dim = 16, text_queries = 1 }

[[stage]]
op = "text_attention"
reduce = "last_row"

[[stage]]
op = "fastv"

[[stage]]
op = "rtn"
out_features = 8

[[stage]]
op = "cost"
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tokenpress"))
}

#[test]
fn metrics_only_config_retains_everything() {
    let text = "budgets = [10]\n[[input]]\nsynthetic = { frames = 3, rows = 4, cols = 4 }\n[[stage]]\nop = \"redundancy\"\n[[stage]]\nop = \"cost\"\n";
    let config = parse_config(text, Path::new("/")).unwrap();
    let report = run(&config).unwrap();
    assert_eq!(report.jobs.len(), 1);
    let job = &report.jobs[0];
    assert_eq!(job.rate.final_tokens, 48);
    assert_eq!(job.rate.retention.scale(48), Some(48));
    assert!((job.coverage - 1.0).abs() < 1e-9);
}

#[test]
fn smaller_budgets_never_retain_more() {
    let config = parse_config(SWEEP, Path::new("/")).unwrap();
    let report = run(&config).unwrap();
    assert_eq!(report.jobs.len(), 6);
    for input in ["a", "b"] {
        let rr: Vec<f64> = report
            .jobs
            .iter()
            .filter(|j| j.input == input)
            .map(|j| j.rate.retention_rate())
            .collect();
        assert_eq!(rr.len(), 3);
        assert!(rr.windows(2).all(|w| w[0] >= w[1]), "{input}: {rr:?}");
    }
}

#[test]
fn written_reports_are_reproducible() {
    let config = parse_config(SWEEP, Path::new("/")).unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (i, dir) in dirs.iter().enumerate() {
        let mut c = config.clone();
        c.workers = 1 + 2 * i;
        write_outputs(&c, &run(&c).unwrap(), dir.path()).unwrap();
    }
    for name in [RATES_FILE, CURVES_FILE, QUANT_FILE] {
        let a = fs::read(dirs[0].path().join(name)).unwrap();
        let b = fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let manifest = fs::read_to_string(dirs[0].path().join(MANIFEST_FILE)).unwrap();
    let replay = parse_config(&manifest, Path::new("/")).unwrap();
    assert_eq!(replay.to_manifest(), manifest);
}

#[test]
fn dump_inputs_resolve_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SyntheticSpec {
        frames: 3,
        rows: 4,
        cols: 4,
        ..SyntheticSpec::default()
    };
    let (tokens, bundle) = synthetic_input(&spec, 1).unwrap();
    write_dump(dir.path().join("clip.tokd"), &tokens, Some(&bundle)).unwrap();
    let config_path = dir.path().join("run.toml");
    fs::write(
        &config_path,
        "[[input]]\ndump = \"clip.tokd\"\n[[stage]]\nop = \"holitom\"\nmerge_rate = 0.5\nsegmenter = \"fixed\"\nlength = 3\n",
    )
    .unwrap();
    let config = load_config(&config_path).unwrap();
    let report = run(&config).unwrap();
    assert_eq!(report.jobs[0].input, "clip");
    assert_eq!(report.jobs[0].rate.final_tokens, 24);
}

#[test]
fn cli_run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.toml");
    fs::write(&config, SWEEP).unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", config.to_str().unwrap(), "--workers", "2", "--seed", "9", "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert!(out.join(RATES_FILE).exists());
    assert!(fs::read_to_string(out.join(MANIFEST_FILE)).unwrap().contains("seed = 9"));
}

#[test]
fn cli_exit_codes_separate_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad_op = dir.path().join("bad.toml");
    fs::write(&bad_op, "[[stage]]\nkind = \"spatial\"\nop = \"fastvv\"\n").unwrap();
    let out = bin().args(["run", bad_op.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("did you mean"));

    let missing = bin().args(["run", "/nonexistent/run.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let no_dump = dir.path().join("nodump.toml");
    fs::write(&no_dump, "[[input]]\ndump = \"absent.tokd\"\n[[stage]]\nop = \"cost\"\n").unwrap();
    let out = bin().args(["run", no_dump.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));

    let inspect = bin().args(["inspect", "/nonexistent/x.tokd"]).output().unwrap();
    assert_eq!(inspect.status.code(), Some(3));
}

#[test]
fn cli_report_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("results.csv");
    fs::write(&results, "benchmark,method,score,upper_bound\nGQA,a,60,62\nPOPE,a,85,87\n").unwrap();
    let json = dir.path().join("summary.json");
    let out = bin()
        .args(["report", results.to_str().unwrap(), "--out", json.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = fs::read_to_string(&json).unwrap();
    assert!(text.contains("\"method\""));

    let oracle = bin().args(["oracle", "dp"]).output().unwrap();
    assert!(oracle.status.success());
    assert!(String::from_utf8_lossy(&oracle.stdout).starts_with("PASS dp"));
    assert_eq!(bin().args(["oracle", "nope"]).output().unwrap().status.code(), Some(2));
}
