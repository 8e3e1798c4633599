use super::{run, JkoConfig, JkoTrajectory};
use crate::error::{Error, Result};
use crate::transport::{GridDensity, QuantileProfile};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct RefinementStudy {
    pub taus: Vec<f64>,
    /// `gaps[k] = sup_n W2(u_k(n tau_0), u_{k+1}(n tau_0))` over the stamps of the coarsest level.
    pub gaps: Vec<f64>,
    #[serde(skip)]
    pub trajectories: Vec<JkoTrajectory>,
}

impl RefinementStudy {
    /// Gaps shrink from level to level and the last is at most `ratio` times the first.
    pub fn converges(&self, ratio: f64) -> bool {
        self.gaps.windows(2).all(|w| w[1] < w[0])
            && match (self.gaps.first(), self.gaps.last()) {
                (Some(a), Some(b)) => *b <= ratio * a,
                _ => false,
            }
    }
}

/// Runs `levels` trajectories with `tau / 2^k` over the same horizon and
/// compares consecutive levels at the coarse time stamps.
pub fn refine_study(u0: &GridDensity, cfg: &JkoConfig, levels: usize) -> Result<RefinementStudy> {
    if levels < 2 {
        return Err(Error::Config("refinement needs at least two levels".into()));
    }
    cfg.validate()?;
    let configs: Vec<JkoConfig> = (0..levels)
        .map(|k| JkoConfig {
            tau: cfg.tau / (1u64 << k) as f64,
            n_steps: cfg.n_steps << k,
            ..cfg.clone()
        })
        .collect();
    let trajectories: Vec<JkoTrajectory> = configs
        .par_iter()
        .map(|c| run(u0, c))
        .collect::<Result<_>>()?;
    let profiles: Vec<Vec<QuantileProfile>> = trajectories
        .iter()
        .enumerate()
        .map(|(k, t)| {
            (0..=cfg.n_steps)
                .map(|n| QuantileProfile::new(&t.states[n << k]))
                .collect()
        })
        .collect();
    let mut gaps = Vec::with_capacity(levels - 1);
    for k in 0..levels - 1 {
        let mut sup = 0.0f64;
        for n in 0..=cfg.n_steps {
            sup = sup.max(profiles[k][n].distance(&profiles[k + 1][n])?);
        }
        gaps.push(sup);
    }
    Ok(RefinementStudy {
        taus: configs.iter().map(|c| c.tau).collect(),
        gaps,
        trajectories,
    })
}
