use std::time::Instant;

use dynsbm_core::{run_restart, FitResult, InteractionTensor, RestartOutcome, SearchConfig};
use rayon::prelude::*;

/// A restart and its wall-clock time.
#[derive(Debug, Clone)]
pub struct TimedRestart {
    pub outcome: RestartOutcome,
    pub seconds: f64,
}

/// Runs the restarts of `config` on the rayon pool. Each restart draws from
/// its own stream of the seed, so the result does not depend on scheduling.
pub fn fit_parallel(
    tensor: &InteractionTensor,
    config: &SearchConfig,
) -> dynsbm_core::Result<(FitResult, Vec<f64>)> {
    config.validate(tensor)?;
    let timed: Vec<TimedRestart> = (0..config.n_restarts)
        .into_par_iter()
        .map(|r| {
            let start = Instant::now();
            run_restart(tensor, config, r).map(|outcome| TimedRestart {
                outcome,
                seconds: start.elapsed().as_secs_f64(),
            })
        })
        .collect::<dynsbm_core::Result<_>>()?;
    let seconds = timed.iter().map(|t| t.seconds).collect();
    let fit = FitResult::from_restarts(timed.into_iter().map(|t| t.outcome).collect())?;
    Ok((fit, seconds))
}
