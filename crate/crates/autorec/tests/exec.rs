use autorec::exec::{ParallelEnv, RayonExecutor};
use autorec_core::config::presets;
use autorec_core::offline::{Executor, SerialExecutor};
use autorec_core::online::{SimEnv, TrialEnv};
use autorec_core::persona::PersonaKind;
use autorec_core::sim::{gen_supervised_dataset, DatasetName};
use autorec_core::space;
use autorec_core::tools::TrainerScorer;

#[test]
fn parallel_scores_match_serial_in_order() {
    let scorer = TrainerScorer::new(gen_supervised_dataset(DatasetName::Illcond100, 0), 0);
    let configs = space::efficiency_grid(&presets::sgd_long()).configs();
    let serial = SerialExecutor.score_all(&scorer, &configs);
    for workers in [0, 1, 4] {
        assert_eq!(RayonExecutor::new(workers).score_all(&scorer, &configs), serial, "{workers} workers");
    }
}

#[test]
fn parallel_training_matches_serial() {
    let env = ParallelEnv::new(SimEnv::standard(1, 2000), 3);
    let grid = space::architecture_grid(&presets::dense_baseline()).configs();
    let jobs: Vec<_> = grid
        .into_iter()
        .take(6)
        .map(|c| (PersonaKind::Architecture, c))
        .chain([(PersonaKind::Optimizer, presets::adagrad_linear())])
        .collect();
    let serial: Vec<_> = jobs.iter().map(|(p, c)| env.inner.train(*p, c)).collect();
    assert_eq!(env.train_batch(&jobs), serial);
}
