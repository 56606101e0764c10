use std::path::Path;

use tokenpress::pipeline::{load_config, run, StageKind};

#[test]
fn sample_config_covers_every_stage_kind() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/pipeline.toml");
    let config = load_config(&path).unwrap();
    for kind in [StageKind::Metrics, StageKind::Temporal, StageKind::Spatial, StageKind::Quant, StageKind::Eval] {
        assert!(config.stages.iter().any(|s| s.kind == kind), "{kind}");
    }
    let report = run(&config).unwrap();
    assert_eq!(report.jobs.len(), config.inputs.len() * config.budgets.len());
    assert!(report.jobs.iter().all(|j| j.cost.is_some() && j.quant.len() == 1));
}
