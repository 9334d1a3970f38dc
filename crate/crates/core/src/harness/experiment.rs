use crate::engines::{run_trial, EngineKind};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::resources::{Coherence, QuantumParams};
use crate::rng::{self, Purpose};
use crate::stats::Summary;
use crate::topology::{sample_consumers, ConsumerSet, SamplingSpec};

use super::config::{DStar, ExperimentConfig};

/// One aggregated row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub engine: EngineKind,
    pub topology: String,
    pub p: f64,
    pub q: f64,
    pub m: Coherence,
    pub n: usize,
    pub d_star: f64,
    pub sweep_param: &'static str,
    /// Numeric sweep coordinate; `inf` for unbounded coherence.
    pub sweep_value: f64,
    pub mean_rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy)]
struct Combo {
    p: f64,
    q: f64,
    m: Coherence,
    n: usize,
    d_star: DStar,
    /// Index into the (n, d_star) placement list.
    placement: usize,
}

/// The first list with more than one value names the sweep axis.
fn sweep_axis(config: &ExperimentConfig) -> &'static str {
    if config.m.len() > 1 {
        "m"
    } else if config.p.len() > 1 {
        "p"
    } else if config.q.len() > 1 {
        "q"
    } else if config.d_star.len() > 1 {
        "d_star"
    } else if config.n.len() > 1 {
        "n"
    } else {
        "m"
    }
}

fn axis_value(axis: &str, c: &Combo) -> f64 {
    match axis {
        "p" => c.p,
        "q" => c.q,
        "d_star" => c.d_star.resolve(c.n),
        "n" => c.n as f64,
        _ => c.m.as_f64(),
    }
}

fn axis_label(axis: &str, c: &Combo) -> String {
    match axis {
        "m" => c.m.to_string(),
        "d_star" => c.d_star.to_string(),
        _ => axis_value(axis, c).to_string(),
    }
}

/// Runs every (engine, parameter combination) point for `config.trials`
/// trials each.
///
/// Trial `t` of placement `(n, d_star)` draws its consumers from a stream
/// keyed only by `(seed, t, placement)`, so every engine and every value of
/// p, q and m sees the same consumer sets. The slot simulation of a point is
/// keyed by `(seed, t, combo)`; engines share it as well.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<SeriesPoint>> {
    config.validate()?;
    let topo = config.topology.build(config.seed)?;
    let root = topo.center_node();
    let table = topo.distance_table();
    let axis = sweep_axis(config);

    let mut placements: Vec<(usize, DStar)> = Vec::new();
    let mut combos = Vec::new();
    for &n in &config.n {
        for &d_star in &config.d_star {
            let placement = placements.len();
            placements.push((n, d_star));
            for &p in &config.p {
                for &q in &config.q {
                    for &m in &config.m {
                        combos.push(Combo { p, q, m, n, d_star, placement });
                    }
                }
            }
        }
    }

    let trials = config.trials;
    let consumer_sets: Vec<Result<ConsumerSet>> = map_indexed(placements.len() * trials, config.execution, |task| {
        let (placement, trial) = (task / trials, task % trials);
        let (n, d_star) = placements[placement];
        let spec = SamplingSpec { n, d_star: d_star.resolve(n), delta: config.delta, trials };
        let mut stream = rng::derive(config.seed, Purpose::Consumers, trial as u64, placement as u64);
        sample_consumers(&table, &spec, root, &mut stream)
    });
    let consumer_sets: Vec<ConsumerSet> = consumer_sets
        .into_iter()
        .enumerate()
        .map(|(task, r)| {
            r.map_err(|e| {
                let c = combos.iter().find(|c| c.placement == task / trials).expect("placement has combos");
                Error::Sweep { sweep_param: axis.to_string(), sweep_value: axis_label(axis, c), source: Box::new(e) }
            })
        })
        .collect::<Result<_>>()?;

    let engines = config.engine.engines();
    let options = config.engine_options();
    let per_engine = combos.len() * trials;
    let means: Vec<Result<f64>> = map_indexed(engines.len() * per_engine, config.execution, |task| {
        let engine = engines[task / per_engine];
        let (combo_idx, trial) = ((task % per_engine) / trials, task % trials);
        let c = &combos[combo_idx];
        let mut params = QuantumParams::new(c.p, c.q, c.m)?;
        params.fusion_mode = config.fusion_mode;
        let consumers = &consumer_sets[c.placement * trials + trial];
        let mut stream = rng::derive(config.seed, Purpose::Simulation, trial as u64, combo_idx as u64);
        run_trial(engine, &topo, root, consumers, &params, &options, config.slots, &mut stream).map(|o| o.mean)
    });

    let means: Vec<f64> = means
        .into_iter()
        .enumerate()
        .map(|(task, r)| {
            r.map_err(|e| Error::Sweep {
                sweep_param: axis.to_string(),
                sweep_value: axis_label(axis, &combos[(task % per_engine) / trials]),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(engines.len() * combos.len());
    for (e, &engine) in engines.iter().enumerate() {
        for (ci, c) in combos.iter().enumerate() {
            let start = e * per_engine + ci * trials;
            let summary: Summary = means[start..start + trials].iter().copied().collect();
            points.push(SeriesPoint {
                engine,
                topology: config.topology.to_string(),
                p: c.p,
                q: c.q,
                m: c.m,
                n: c.n,
                d_star: c.d_star.resolve(c.n),
                sweep_param: axis,
                sweep_value: axis_value(axis, c),
                mean_rate: summary.mean(),
                stderr: summary.stderr(),
                trials,
            });
        }
    }
    Ok(points)
}
