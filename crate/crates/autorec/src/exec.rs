//! Thread-pool execution of independent scoring and training jobs.

use autorec_core::config::Config;
use autorec_core::offline::Executor;
use autorec_core::online::{DriftCheck, TrainingOutcome, TrialEnv};
use autorec_core::persona::PersonaKind;
use autorec_core::score::Score;
use autorec_core::tools::Scorer;
use rayon::prelude::*;

/// Scores configs on a rayon pool; results keep input order.
#[derive(Debug, Default)]
pub struct RayonExecutor {
    pool: Option<rayon::ThreadPool>,
}

impl RayonExecutor {
    /// `workers == 0` uses the global pool.
    pub fn new(workers: usize) -> Self {
        Self {
            pool: (workers > 0).then(|| {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .expect("thread pool")
            }),
        }
    }

    fn run<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }
}

impl Executor for RayonExecutor {
    fn score_all(&self, scorer: &dyn Scorer, configs: &[Config]) -> Vec<Score> {
        self.run(|| configs.par_iter().map(|c| scorer.score(c)).collect())
    }
}

/// Wraps an environment so batched training fans out across threads.
pub struct ParallelEnv<E> {
    pub inner: E,
    exec: RayonExecutor,
}

impl<E: TrialEnv> ParallelEnv<E> {
    pub fn new(inner: E, workers: usize) -> Self {
        Self {
            inner,
            exec: RayonExecutor::new(workers),
        }
    }
}

impl<E: TrialEnv> TrialEnv for ParallelEnv<E> {
    fn baseline(&self, persona: PersonaKind) -> &Config {
        self.inner.baseline(persona)
    }

    fn data_rows(&self, persona: PersonaKind) -> usize {
        self.inner.data_rows(persona)
    }

    fn estimated_cost(&self, persona: PersonaKind, c: &Config) -> f64 {
        self.inner.estimated_cost(persona, c)
    }

    fn drift(&self, persona: PersonaKind, c: &Config) -> Option<DriftCheck> {
        self.inner.drift(persona, c)
    }

    fn train(&self, persona: PersonaKind, c: &Config) -> TrainingOutcome {
        self.inner.train(persona, c)
    }

    fn train_batch(&self, jobs: &[(PersonaKind, Config)]) -> Vec<TrainingOutcome> {
        self.exec.run(|| jobs.par_iter().map(|(p, c)| self.inner.train(*p, c)).collect())
    }
}
