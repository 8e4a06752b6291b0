//! Results depend on the seed only, not on the worker count.

use subjective_bubbles::output::write_scenario;
use subjective_bubbles::scenarios::{run_scenario, ScenarioConfig, ScenarioKind};

fn files_with_threads(cfg: &ScenarioConfig, threads: usize) -> Vec<(String, Vec<u8>)> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let out = pool.install(|| run_scenario(cfg)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut files: Vec<_> = write_scenario(dir.path(), &out, None)
        .unwrap()
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn worker_count_does_not_change_output() {
    for kind in ScenarioKind::ALL {
        let cfg = ScenarioConfig {
            n_paths: 1500,
            n_steps: 120,
            law_paths: 600,
            ks_replicates: 49,
            bridge: kind == ScenarioKind::Optimist,
            ..ScenarioConfig::defaults(kind)
        };
        assert_eq!(files_with_threads(&cfg, 1), files_with_threads(&cfg, 3), "{kind:?}");
    }
}

#[test]
fn seeds_change_output() {
    let cfg = ScenarioConfig {
        n_paths: 500,
        n_steps: 50,
        ..ScenarioConfig::defaults(ScenarioKind::Pessimist)
    };
    let other = ScenarioConfig { seed: 2, ..cfg.clone() };
    assert_ne!(files_with_threads(&cfg, 1), files_with_threads(&other, 1));
}
