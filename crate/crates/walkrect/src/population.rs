//! Population Monte Carlo: evolve a weighted particle ensemble with
//! weight-proportional resampling at every generation, so that the running
//! weights stay near the ensemble mean instead of compounding into a
//! heavy-tailed product along each path.

use crate::error::{Result, WalkError};
use crate::geometry::{Domain, Landing};
use crate::sampling::RngStream;
use crate::walker::{single_step, ProposalPolicy, WalkerConfig};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// One particle of the ensemble.
#[derive(Debug, Clone)]
pub struct Particle {
    pub w: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub lineage: usize,
}

/// How indices are drawn from the running set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleKind {
    /// independent draws with p_j = w_j / sum w (the algorithm as stated)
    #[default]
    Multinomial,
    /// stratified single-uniform sweep; lower resampling noise
    Systematic,
}

/// Draw `count` indices proportionally to `weights`.
fn resample_indices(
    weights: &[f64],
    count: usize,
    kind: ResampleKind,
    rng: &mut impl Rng,
) -> Result<Vec<usize>> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(WalkError::AllParticlesZeroWeight);
    }
    let mut cum = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for &w in weights {
        acc += w;
        cum.push(acc);
    }
    let locate = |u: f64| cum.partition_point(|&c| c < u * total).min(weights.len() - 1);
    let out = match kind {
        ResampleKind::Multinomial => (0..count).map(|_| locate(rng.gen())).collect(),
        ResampleKind::Systematic => {
            let u0: f64 = rng.gen::<f64>() / count as f64;
            (0..count)
                .map(|i| locate(u0 + i as f64 / count as f64))
                .collect()
        }
    };
    Ok(out)
}

/// Estimator output plus the per-generation survival trace.
#[derive(Debug, Clone, Serialize)]
pub struct PopulationReport {
    /// self-normalized estimate sum w f / sum w over stopped particles
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
    pub generations: usize,
    /// fraction of the ensemble still running after each generation
    pub survival_trace: Vec<f64>,
    pub max_log_weight: f64,
    pub stopped_weight: f64,
    pub wall_time_s: f64,
}

impl PopulationReport {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("generation,running_fraction\n");
        for (i, f) in self.survival_trace.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, f));
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct PopulationConfig {
    pub walker: WalkerConfig,
    pub resample: ResampleKind,
    pub max_generations: usize,
}

impl Default for PopulationConfig {
    fn default() -> PopulationConfig {
        PopulationConfig {
            walker: WalkerConfig::default(),
            resample: ResampleKind::Multinomial,
            max_generations: 100_000,
        }
    }
}

fn finish(
    domain: &Domain,
    stopped: Vec<Particle>,
    stopped_landing: Vec<Landing>,
    n: usize,
    generations: usize,
    trace: Vec<f64>,
    max_log_weight: f64,
    t0: std::time::Instant,
) -> Result<PopulationReport> {
    let total: f64 = stopped.iter().map(|p| p.w).sum();
    if !(total > 0.0) {
        return Err(WalkError::AllParticlesZeroWeight);
    }
    let mut num = 0.0;
    for (p, &landing) in stopped.iter().zip(&stopped_landing) {
        let f = match landing {
            Landing::Terminal => domain.terminal.eval(&p.x),
            _ => domain.dirichlet.eval(&p.x),
        };
        num += p.w * f;
    }
    let estimate = num / total;
    // linearized variance of the self-normalized ratio estimator
    let mut var = 0.0;
    for (p, &landing) in stopped.iter().zip(&stopped_landing) {
        let f = match landing {
            Landing::Terminal => domain.terminal.eval(&p.x),
            _ => domain.dirichlet.eval(&p.x),
        };
        var += (p.w * (f - estimate)).powi(2);
    }
    Ok(PopulationReport {
        estimate,
        std_error: var.sqrt() / total,
        n,
        generations,
        survival_trace: trace,
        max_log_weight,
        stopped_weight: total,
        wall_time_s: t0.elapsed().as_secs_f64(),
    })
}

/// Run the resampled ensemble until extinction of the running set.
///
/// Per generation, `|R_n|` particles are drawn with replacement from the
/// running set proportionally to their weights, moved by one box exit, and
/// reweighted to (mean running weight) x (step weight). Stopped particles
/// keep their weight at stopping; the estimate is the self-normalized
/// average of the boundary data over the stopped set.
pub fn run_population(
    domain: &Domain,
    t: f64,
    x: &[f64],
    n: usize,
    policy: &ProposalPolicy,
    cfg: &PopulationConfig,
    seed: u64,
) -> Result<PopulationReport> {
    run_population_impl(domain, t, x, n, policy, cfg, seed, None)
}

/// Fixed-size variant: every generation moves exactly `n` draws from the
/// running set and scales the weights by the running proportion, stopping
/// once that proportion falls below `threshold` (0 runs to extinction). Mass
/// still running at the stop is discarded; the estimator is self-normalized
/// so this costs variance, not bias, for bounded data.
pub fn run_population_fixed_n(
    domain: &Domain,
    t: f64,
    x: &[f64],
    n: usize,
    threshold: f64,
    policy: &ProposalPolicy,
    cfg: &PopulationConfig,
    seed: u64,
) -> Result<PopulationReport> {
    run_population_impl(domain, t, x, n, policy, cfg, seed, Some(threshold))
}

#[allow(clippy::too_many_arguments)]
fn run_population_impl(
    domain: &Domain,
    t: f64,
    x: &[f64],
    n: usize,
    policy: &ProposalPolicy,
    cfg: &PopulationConfig,
    seed: u64,
    fixed_threshold: Option<f64>,
) -> Result<PopulationReport> {
    if n < 2 {
        return Err(WalkError::Config("population size must be at least 2".into()));
    }
    if domain.classify(t, x) != Landing::Interior {
        return Err(WalkError::DegenerateStart);
    }
    let t0 = std::time::Instant::now();
    let mut running: Vec<Particle> = (0..n)
        .map(|lineage| Particle {
            w: 1.0,
            t,
            x: x.to_vec(),
            lineage,
        })
        .collect();
    let mut stopped: Vec<Particle> = Vec::new();
    let mut stopped_landing: Vec<Landing> = Vec::new();
    let mut trace: Vec<f64> = Vec::new();
    let mut max_log_weight = 0.0f64;
    let mut generation = 0usize;

    while !running.is_empty() {
        if generation >= cfg.max_generations {
            return Err(WalkError::StepLimitExceeded(generation));
        }
        let weights: Vec<f64> = running.iter().map(|p| p.w).collect();
        let mean_w: f64 = weights.iter().sum::<f64>() / weights.len() as f64;
        let draws = if fixed_threshold.is_some() { n } else { running.len() };
        // selection is a synchronization point with its own stream
        let mut sel_rng = RngStream::new(seed, (1 << 40) + generation as u64);
        let picks = resample_indices(&weights, draws, cfg.resample, &mut sel_rng)?;
        // the proportion multiplier of the fixed-size variant folds into the
        // shared pre-weight: mean over R_n times |R_n|/n equals sum w / n
        let pre_w = if fixed_threshold.is_some() {
            weights.iter().sum::<f64>() / n as f64
        } else {
            mean_w
        };
        let gen_base = (generation as u64) << 24;
        let moved: Vec<(Particle, Landing)> = picks
            .par_iter()
            .enumerate()
            .map(|(slot, &j)| -> Result<(Particle, Landing)> {
                let src = &running[j];
                let mut rng = RngStream::new(seed, gen_base + slot as u64);
                let (t1, x1, log_w) =
                    single_step(domain, policy, src.t, &src.x, &cfg.walker.series, &mut rng)?;
                let landing = domain.classify(t1, &x1);
                let p = Particle {
                    w: pre_w * log_w.exp(),
                    t: t1,
                    x: x1,
                    lineage: src.lineage,
                };
                Ok((p, landing))
            })
            .collect::<Result<Vec<_>>>()?;
        running.clear();
        for (p, landing) in moved {
            if p.w > 0.0 {
                max_log_weight = max_log_weight.max(p.w.ln());
            }
            if landing == Landing::Interior {
                // an underflowed weight carries no mass; keeping the particle
                // would only stall extinction
                if p.w > 0.0 {
                    running.push(p);
                }
            } else {
                stopped.push(p);
                stopped_landing.push(landing);
            }
        }
        generation += 1;
        let frac = running.len() as f64 / n as f64;
        trace.push(frac);
        if let Some(th) = fixed_threshold {
            if frac < th {
                break;
            }
        }
    }
    finish(
        domain,
        stopped,
        stopped_landing,
        n,
        generation,
        trace,
        max_log_weight,
        t0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walker::{estimate, WalkerConfig};

    fn square_domain(dirichlet: &str) -> Domain {
        Domain::from_json(&format!(
            r#"{{
            "boxes": [{{"center": [0.0, 0.0], "half_lengths": [1.0, 1.0]}}],
            "dirichlet": {dirichlet}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn resampling_guards_zero_and_nonfinite_weights() {
        let mut rng = RngStream::new(1, 0);
        assert!(matches!(
            resample_indices(&[0.0, 0.0], 2, ResampleKind::Multinomial, &mut rng),
            Err(WalkError::AllParticlesZeroWeight)
        ));
        assert!(resample_indices(&[1.0, f64::INFINITY], 2, ResampleKind::Multinomial, &mut rng)
            .is_err());
        let picks =
            resample_indices(&[0.0, 1.0, 0.0], 64, ResampleKind::Systematic, &mut rng).unwrap();
        assert!(picks.iter().all(|&i| i == 1));
    }

    #[test]
    fn unit_data_gives_exactly_one() {
        let dom = square_domain(r#"{"type": "constant", "value": 1.0}"#);
        let cfg = PopulationConfig::default();
        let rep = run_population(&dom, 0.0, &[0.2, 0.1], 500, &ProposalPolicy::Default, &cfg, 3)
            .unwrap();
        assert_eq!(rep.estimate, 1.0);
        assert_eq!(rep.generations, 1);
    }

    #[test]
    fn exact_sampler_matches_plain_walker() {
        // phi = x0 harmonic; all step weights are one, resampling is uniform
        let dom = square_domain(r#"{"type": "coordinate", "axis": 0}"#);
        let cfg = PopulationConfig::default();
        let x = [0.3, -0.1];
        let pop =
            run_population(&dom, 0.0, &x, 20_000, &ProposalPolicy::Exact, &cfg, 5).unwrap();
        let wal = estimate(
            &dom,
            0.0,
            &x,
            20_000,
            &ProposalPolicy::Exact,
            &WalkerConfig::default(),
            6,
        )
        .unwrap();
        let se = (pop.std_error.powi(2) + wal.std_error.powi(2)).sqrt();
        assert!(
            (pop.estimate - wal.estimate).abs() < 3.0 * se,
            "{} vs {}",
            pop.estimate,
            wal.estimate
        );
        assert!((pop.estimate - 0.3).abs() < 4.0 * pop.std_error);
    }

    fn two_box_domain() -> Domain {
        // overlapping strip so paths take several generations
        Domain::from_json(
            r#"{
            "boxes": [
                {"center": [0.0, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x0+": "interior"}},
                {"center": [1.5, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x0-": "interior"}}
            ],
            "dirichlet": {"type": "coordinate", "axis": 0}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn multigeneration_harmonic_value() {
        let dom = two_box_domain();
        let cfg = PopulationConfig::default();
        let rep = run_population(
            &dom,
            0.0,
            &[0.75, 0.0],
            20_000,
            &ProposalPolicy::Default,
            &cfg,
            7,
        )
        .unwrap();
        assert!(rep.generations > 1);
        assert!(
            (rep.estimate - 0.75).abs() < 4.0 * rep.std_error,
            "{} +- {}",
            rep.estimate,
            rep.std_error
        );
        // trace is a survival curve: nonincreasing down to zero
        assert!(rep.survival_trace.windows(2).all(|w| w[1] <= w[0] + 0.05));
        assert_eq!(*rep.survival_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn fixed_n_extinction_matches_free_variant() {
        // finite horizon, so the running proportion of the fixed-size
        // variant actually decays to zero
        let mut dom = two_box_domain();
        dom.horizon = 1.0;
        dom.terminal = crate::geometry::BoundaryData::Coordinate { axis: 0 };
        let cfg = PopulationConfig::default();
        let free = run_population(
            &dom,
            0.0,
            &[0.75, 0.0],
            10_000,
            &ProposalPolicy::Default,
            &cfg,
            11,
        )
        .unwrap();
        let fixed = run_population_fixed_n(
            &dom,
            0.0,
            &[0.75, 0.0],
            10_000,
            0.0,
            &ProposalPolicy::Default,
            &cfg,
            12,
        )
        .unwrap();
        let se = (free.std_error.powi(2) + fixed.std_error.powi(2)).sqrt();
        assert!(
            (free.estimate - fixed.estimate).abs() < 3.0 * se,
            "{} vs {}",
            free.estimate,
            fixed.estimate
        );
    }

    #[test]
    fn fixed_n_threshold_one_stops_after_first_generation() {
        let dom = two_box_domain();
        let cfg = PopulationConfig::default();
        let rep = run_population_fixed_n(
            &dom,
            0.0,
            &[0.75, 0.0],
            2_000,
            1.0,
            &ProposalPolicy::Default,
            &cfg,
            13,
        )
        .unwrap();
        assert_eq!(rep.generations, 1);
        assert!(rep.estimate.is_finite());
    }

    #[test]
    fn trace_csv_shape() {
        let dom = square_domain(r#"{"type": "constant", "value": 1.0}"#);
        let cfg = PopulationConfig::default();
        let rep =
            run_population(&dom, 0.0, &[0.0, 0.0], 100, &ProposalPolicy::Exact, &cfg, 17).unwrap();
        let csv = rep.trace_csv();
        assert!(csv.starts_with("generation,running_fraction\n"));
        assert_eq!(csv.lines().count(), 1 + rep.survival_trace.len());
    }
}
