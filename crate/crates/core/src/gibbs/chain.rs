use std::thread;

use crate::draws::{ChainStats, DrawsMeta, PosteriorDraws};
use crate::error::{Error, Result};
use crate::gibbs::config::{ChainConfig, PriorConfig};
use crate::gibbs::state::ParameterState;
use crate::gibbs::updates::{
    mh_variance_pair, update_beta, update_eta_plus, update_sigma2_eta, update_sigma2_u,
    update_sigma2_v, update_u_plus, update_v, ResidualSums,
};
use crate::panel::PanelDataset;
use crate::rng::RandomStream;
use crate::spatial::SpatialGraph;

/// Lower bound applied to every variance draw.
pub const VARIANCE_FLOOR: f64 = 1e-12;

fn check_inputs(
    data: &PanelDataset,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    config: &ChainConfig,
) -> Result<()> {
    config.validate()?;
    prior.validate(data.k_regressors())?;
    if graph.n_regions() != data.n_regions() {
        return Err(Error::validation(format!(
            "graph has {} regions but the panel has {}",
            graph.n_regions(),
            data.n_regions()
        )));
    }
    Ok(())
}

/// Runs a single chain from the default starting point using sub-stream 0 of
/// `config.seed`.
pub fn run_chain(
    data: &PanelDataset,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    check_inputs(data, graph, prior, config)?;
    let init = ParameterState::initial(data, prior);
    let mut rng = RandomStream::new(config.seed).split(0);
    run_chain_from(data, graph, prior, config, init, &mut rng)
}

/// Runs `n_chains` chains on worker threads; chain `c` uses sub-stream `c` of
/// `config.seed`, so chain 0 reproduces [`run_chain`].
pub fn run_chains(
    data: &PanelDataset,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    config: &ChainConfig,
    n_chains: usize,
) -> Result<PosteriorDraws> {
    if n_chains == 0 {
        return Err(Error::invalid("at least one chain is required"));
    }
    check_inputs(data, graph, prior, config)?;
    let master = RandomStream::new(config.seed);
    let results: Vec<Result<PosteriorDraws>> = thread::scope(|scope| {
        let handles: Vec<_> = (0..n_chains)
            .map(|c| {
                let mut rng = master.split(c as u64);
                scope.spawn(move || {
                    let init = ParameterState::initial(data, prior);
                    run_chain_from(data, graph, prior, config, init, &mut rng)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("chain worker panicked"))
            .collect()
    });
    PosteriorDraws::concat(results.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Sweep order: β → u⁺ → η⁺ → v → σ²_v → σ²_u → σ²_η → (σ²_α, σ²_ε).
/// Blocks disabled in `config.updates` keep their values from `init`.
pub fn run_chain_from(
    data: &PanelDataset,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    config: &ChainConfig,
    init: ParameterState,
    rng: &mut RandomStream,
) -> Result<PosteriorDraws> {
    check_inputs(data, graph, prior, config)?;
    init.check_shape(data)?;
    let mask = config.updates;
    let t = data.n_periods();
    let mut state = init;
    let mut stats = ChainStats::default();
    let mut stored = Vec::with_capacity(config.n_stored());

    let floor = |x: f64, stats: &mut ChainStats| {
        if x < VARIANCE_FLOOR || x.is_nan() {
            stats.floored += 1;
            VARIANCE_FLOOR
        } else {
            x
        }
    };

    for iter in 0..config.n_iter {
        let at = |e: Error| Error::AtIteration {
            iteration: iter,
            source: Box::new(e),
        };
        if mask.beta {
            state.beta = update_beta(&state, data, prior, rng).map_err(at)?;
        }
        if mask.u_plus {
            state.u_plus = update_u_plus(&state, data, rng).map_err(at)?;
        }
        if mask.eta_plus {
            state.eta_plus = update_eta_plus(&state, data, rng).map_err(at)?;
        }
        if mask.v {
            state.v = update_v(&state, data, graph, config.center_car, rng).map_err(at)?;
        }
        if mask.sigma2_v {
            let s = update_sigma2_v(&state, graph, prior, config.car_df, t, rng).map_err(at)?;
            state.sigma2_v = floor(s, &mut stats);
        }
        if mask.sigma2_u {
            let s = update_sigma2_u(&state, prior, rng).map_err(at)?;
            state.sigma2_u = floor(s, &mut stats);
        }
        if mask.sigma2_eta {
            let s = update_sigma2_eta(&state, prior, rng).map_err(at)?;
            state.sigma2_eta = floor(s, &mut stats);
        }
        if mask.sigma2_alpha || mask.sigma2_eps {
            let sums = ResidualSums::from_state(&state, data);
            let out = mh_variance_pair(
                &state,
                &sums,
                prior,
                config.mh_step_scale_alpha,
                config.mh_step_scale_eps,
                mask.sigma2_alpha,
                mask.sigma2_eps,
                rng,
            );
            stats.proposals += 1;
            stats.accepted_alpha += out.accepted[0] as u64;
            stats.accepted_eps += out.accepted[1] as u64;
            if mask.sigma2_alpha {
                state.sigma2_alpha = floor(out.sigma2_alpha, &mut stats);
            }
            if mask.sigma2_eps {
                state.sigma2_eps = floor(out.sigma2_eps, &mut stats);
            }
        }

        let done = iter + 1;
        if done > config.burn_in && (done - config.burn_in).is_multiple_of(config.thin) {
            stored.push(state.clone());
        }
    }

    Ok(PosteriorDraws {
        n_regions: data.n_regions(),
        n_periods: t,
        k_regressors: data.k_regressors(),
        chain: vec![0; stored.len()],
        states: stored,
        chain_stats: vec![stats],
        meta: DrawsMeta {
            seed: config.seed,
            n_iter: config.n_iter as u64,
            burn_in: config.burn_in as u64,
            thin: config.thin as u64,
        },
    })
}
