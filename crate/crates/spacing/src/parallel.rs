//! Multi-threaded study runner with output identical to the sequential one.

use rayon::prelude::*;
use spacing_core::simlab::{ReplicateOutcome, Study, StudyReport};

/// Runs every replicate on the rayon pool; outcomes are reduced in
/// replicate order, so the report equals [`Study::run`].
pub fn run_parallel(study: &Study) -> StudyReport {
    let cfg = study.config();
    let designs = (0..cfg.designs.len())
        .map(|i| {
            log::info!("design {} ({} replicates)", cfg.designs[i].name, cfg.reps);
            let outcomes: Vec<ReplicateOutcome> = (0..cfg.reps)
                .into_par_iter()
                .map(|r| study.replicate(i, r))
                .collect();
            study.summarize(i, &outcomes)
        })
        .collect();
    study.report(designs)
}
