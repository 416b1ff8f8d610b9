//! Backends for the CLI subcommands, exposed as plain functions so
//! integration tests can drive them without spawning the binary.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;

use mcb_core::analysis::effort::DecisionPolicy;
use mcb_core::analysis::{
    effort_and_probs, integrate, lower_bound_basic, lower_bound_improved, screen, Density,
    RlPolicy, TablePolicy,
};
use mcb_core::analysis::screen::{ScreenConfig, ScreenReport};
use mcb_core::{
    BernoulliSource, BucketSet, DecisionReport, Engine, EngineConfig, RecordedSource,
};

use crate::config::RunConfig;
use crate::error::McbError;
use crate::formats::{self, EffortRow, Table2Row};

/// Decides one hypothesis: either a seeded Bernoulli stream at rate `p`
/// or a recorded `size,ones` stream from a file.
pub fn decide(
    run: &RunConfig,
    p: Option<f64>,
    stream: Option<&Path>,
) -> Result<DecisionReport, McbError> {
    let mut engine = Engine::new(run.bucket_set()?, run.engine_config()?)?;
    match (p, stream) {
        (Some(p), None) => {
            if !(0.0..=1.0).contains(&p) {
                return Err(McbError::InvalidArgs(format!("--p {p} outside [0, 1]")));
            }
            let mut source = BernoulliSource::new(p, run.seed, 0);
            Ok(engine.decide(&mut source)?)
        }
        (None, Some(path)) => {
            let file = File::open(path).map_err(|e| McbError::io(path, e))?;
            let batches = formats::read_stream_csv(BufReader::new(file), path)?;
            let mut source = RecordedSource::new(batches)?;
            Ok(engine.decide(&mut source)?)
        }
        _ => Err(McbError::InvalidArgs(
            "exactly one of --p or --stream is required".into(),
        )),
    }
}

/// Interior evaluation grid `i / (points + 1)`, `i = 1..=points`.
fn unit_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|i| i as f64 / (points + 1) as f64).collect()
}

fn policies(
    set: &BucketSet,
    eps: f64,
    spending_k: f64,
) -> Result<(RlPolicy, TablePolicy), McbError> {
    Ok((
        RlPolicy::new(set.clone(), eps)?,
        TablePolicy::new(set.clone(), eps, spending_k)?,
    ))
}

/// Effort curve with the matching floors on an interior grid.
pub fn effort_rows(
    set: &BucketSet,
    eps: f64,
    spending_k: f64,
    horizon: u64,
    grid: usize,
) -> Result<Vec<EffortRow>, McbError> {
    policies(set, eps, spending_k)?;
    unit_grid(grid)
        .into_par_iter()
        .map_init(
            || policies(set, eps, spending_k),
            |pols, p| {
                let (rl, tp) = match pols {
                    Ok(pair) => pair,
                    Err(e) => return Err(McbError::InvalidArgs(e.to_string())),
                };
                Ok(EffortRow {
                    p,
                    effort_rl: effort_and_probs(rl, p, horizon)?.expected_samples,
                    effort_simctest: effort_and_probs(tp, p, horizon)?.expected_samples,
                    lower_basic: lower_bound_basic(set, p, eps)?,
                    lower_improved: lower_bound_improved(set, p, eps)?,
                })
            },
        )
        .collect()
}

/// Decision-probability curve for one method: `(p, per-bucket mass,
/// undecided residual)` on an interior grid.
pub fn prob_rows(
    policy_for: &(dyn Fn() -> Result<Box<dyn DecisionPolicy + Send>, McbError> + Sync),
    horizon: u64,
    grid: usize,
) -> Result<Vec<(f64, Vec<f64>, f64)>, McbError> {
    policy_for()?;
    unit_grid(grid)
        .into_par_iter()
        .map_init(policy_for, |pol, p| {
            let pol = match pol {
                Ok(b) => b.as_mut(),
                Err(e) => return Err(McbError::InvalidArgs(e.to_string())),
            };
            let summary = effort_and_probs(pol, p, horizon)?;
            Ok((p, summary.bucket_probs, summary.undecided))
        })
        .collect()
}

/// Lower-bound curves only (cheap, no dynamic programming).
pub fn lowerbound_rows(
    set: &BucketSet,
    eps: f64,
    grid: usize,
) -> Result<Vec<(f64, f64, f64)>, McbError> {
    unit_grid(grid)
        .into_par_iter()
        .map(|p| {
            Ok((
                p,
                lower_bound_basic(set, p, eps)?,
                lower_bound_improved(set, p, eps)?,
            ))
        })
        .collect()
}

/// Memoized effort evaluator: one policy and one value cache per
/// method, shared across all integrals so each distinct `p` is solved
/// once even though the three densities refine differently.
struct EffortCache {
    policy: Box<dyn DecisionPolicy + Send>,
    values: HashMap<u64, f64>,
}

impl EffortCache {
    fn eval(cache: &Mutex<Self>, p: f64, horizon: u64) -> f64 {
        let mut guard = cache.lock().unwrap();
        if let Some(&v) = guard.values.get(&p.to_bits()) {
            return v;
        }
        let v = effort_and_probs(guard.policy.as_mut(), p, horizon)
            .map(|s| s.expected_samples)
            .unwrap_or(f64::NAN);
        guard.values.insert(p.to_bits(), v);
        v
    }
}

pub const TABLE2_DENSITIES: [(&str, Density); 3] =
    [("H0", Density::Uniform), ("H1a", Density::Spiked), ("H1b", Density::Beta)];

/// Integrated effort of both methods plus the integrated improved floor
/// under the three reference densities.
pub fn table2(
    set: &BucketSet,
    eps: f64,
    spending_k: f64,
    horizon: u64,
    rel_tol: f64,
) -> Result<Vec<Table2Row>, McbError> {
    let (rl, tp) = policies(set, eps, spending_k)?;
    let rl_cache = Mutex::new(EffortCache { policy: Box::new(rl), values: HashMap::new() });
    let tp_cache = Mutex::new(EffortCache { policy: Box::new(tp), values: HashMap::new() });
    let kinks = set.boundary_points();

    // 3 densities x (rl | simctest | floor): nine independent integrals.
    let cells: Vec<(usize, usize)> =
        (0..3).flat_map(|d| (0..3).map(move |c| (d, c))).collect();
    let results: Result<Vec<((usize, usize), f64)>, McbError> = cells
        .into_par_iter()
        .map(|(d, c)| {
            let density = TABLE2_DENSITIES[d].1;
            let mut f: Box<dyn FnMut(f64) -> f64> = match c {
                0 => Box::new(|p| EffortCache::eval(&rl_cache, p, horizon)),
                1 => Box::new(|p| EffortCache::eval(&tp_cache, p, horizon)),
                _ => Box::new(|p| lower_bound_improved(set, p, eps).unwrap_or(f64::NAN)),
            };
            let q = integrate(f.as_mut(), density, &kinks, rel_tol, 4000)?;
            Ok(((d, c), q.value))
        })
        .collect();
    let mut grid = [[f64::NAN; 3]; 3];
    for ((d, c), v) in results? {
        grid[d][c] = v;
    }
    Ok((0..3)
        .map(|d| Table2Row {
            density: TABLE2_DENSITIES[d].0.into(),
            rl: grid[d][0],
            simctest: grid[d][1],
            lower_bound: grid[d][2],
        })
        .collect())
}

/// Parallel screening: each hypothesis is an independent seeded
/// substream, so rows are identical to the sequential driver's in any
/// thread interleaving.
pub fn run_screen(
    set: BucketSet,
    engine_cfg: EngineConfig,
    cfg: &ScreenConfig,
) -> Result<ScreenReport, McbError> {
    let template = Engine::new(set, engine_cfg)?;
    let rows: Result<Vec<_>, _> = (0..cfg.hypotheses)
        .into_par_iter()
        .map_init(
            || template.clone(),
            |engine, index| screen::screen_row(engine, cfg, index),
        )
        .collect();
    Ok(screen::aggregate(template.bucket_set().buckets().len(), rows?))
}

/// Applies `MCB_THREADS` to the global worker pool. Call once at
/// startup; later calls are ignored.
pub fn configure_threads() {
    if let Ok(v) = std::env::var("MCB_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mcb_core::engine::{Method, Outcome};

    #[test]
    fn decide_runs_a_seeded_stream() {
        let run = RunConfig { seed: 7, ..RunConfig::default() };
        let report = decide(&run, Some(0.5), None).unwrap();
        assert_eq!(report.outcome, Outcome::Decided);
        assert_eq!(report.rating.to_string(), "");
        assert!(report.bucket.contains(0.5));
        // Deterministic.
        assert_eq!(report, decide(&run, Some(0.5), None).unwrap());
    }

    #[test]
    fn decide_rejects_ambiguous_sources() {
        let run = RunConfig::default();
        assert!(matches!(decide(&run, None, None), Err(McbError::InvalidArgs(_))));
        assert!(matches!(
            decide(&run, Some(1.5), None),
            Err(McbError::InvalidArgs(_))
        ));
    }

    #[test]
    fn effort_rows_drop_to_one_sample_far_above_the_thresholds() {
        let set = BucketSet::jstar();
        let rows = effort_rows(&set, 0.05, 100.0, 300_000, 9).unwrap();
        assert_eq!(rows.len(), 9);
        // Grid point 0.9: a handful of draws decide (0.05, 1].
        let last = rows.last().unwrap();
        assert!(last.effort_rl < 200.0, "rl {}", last.effort_rl);
        assert!(last.effort_simctest < 200.0, "sim {}", last.effort_simctest);
        for r in &rows {
            assert!(r.lower_improved >= r.lower_basic);
            assert!(r.effort_rl >= r.lower_improved || r.lower_improved.is_infinite());
        }
    }

    #[test]
    fn prob_rows_sum_to_one() {
        let mk = || -> Result<Box<dyn DecisionPolicy + Send>, McbError> {
            Ok(Box::new(TablePolicy::new(BucketSet::jstar(), 0.05, 100.0)?))
        };
        let rows = prob_rows(&mk, 200_000, 5).unwrap();
        for (p, probs, undecided) in rows {
            let total: f64 = probs.iter().sum::<f64>() + undecided;
            assert!((total - 1.0).abs() < 1e-9, "p={p} total={total}");
        }
    }

    #[test]
    fn screening_parallel_matches_sequential() {
        let cfg = ScreenConfig {
            hypotheses: 30,
            alternatives: 5,
            seed: 11,
            ..ScreenConfig::default()
        };
        let mut engine_cfg = EngineConfig::new(Method::Simctest, 0.01);
        engine_cfg.n_cap = 30_000;
        let par = run_screen(BucketSet::js(), engine_cfg, &cfg).unwrap();
        let seq = screen::screen(BucketSet::js(), engine_cfg, &cfg).unwrap();
        assert_eq!(par, seq);
    }
}
