//! Path-level estimator: chain box exits across the domain, accumulating the
//! Feynman-Kac discount Y = exp(sum c dt), the source integral Z and the
//! importance-weight product W, then average W (phi Y + Z) over paths.

use crate::boxstep::{
    exact_step, importance_step, scale_and_shift, ExactBoxSampler, ExitSample, PositionLaw,
    Proposal, SideId,
};
use crate::error::{Result, WalkError};
use crate::geometry::{Domain, FrozenBox, Landing};
use crate::sampling::RngStream;
use crate::series1d::SeriesConfig;
use crate::util::Moments;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// How the per-box exit law is sampled.
#[derive(Clone)]
pub enum ProposalPolicy {
    /// the default importance proposal of each box
    Default,
    /// the exact sampler; every weight is one
    Exact,
    /// user-supplied proposal builder, called once per selected box
    Custom(Arc<dyn Fn(&FrozenBox) -> Proposal + Send + Sync>),
}

impl std::fmt::Debug for ProposalPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProposalPolicy::Default => write!(f, "Default"),
            ProposalPolicy::Exact => write!(f, "Exact"),
            ProposalPolicy::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct WalkerConfig {
    pub series: SeriesConfig,
    pub max_steps: usize,
    /// paths with |log W| beyond this are flagged (kept, counted, warned)
    pub log_weight_bound: f64,
    /// user-declared freezing tolerance for the bias line of the report;
    /// not computable from inside the estimator
    pub delta: Option<f64>,
}

impl Default for WalkerConfig {
    fn default() -> WalkerConfig {
        WalkerConfig {
            series: SeriesConfig::default(),
            max_steps: 1_000_000,
            log_weight_bound: 50.0,
            delta: None,
        }
    }
}

/// Terminal state of one path.
#[derive(Debug, Clone)]
pub struct PathEnd {
    pub theta: f64,
    pub xi: Vec<f64>,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub log_w: f64,
    pub steps: usize,
    pub landing: Landing,
    pub overflowed: bool,
}

impl PathEnd {
    /// The Feynman-Kac payoff W (data(xi) Y + Z) with the landing-appropriate
    /// boundary data.
    pub fn payoff(&self, domain: &Domain) -> f64 {
        let data = match self.landing {
            Landing::Terminal => domain.terminal.eval(&self.xi),
            _ => domain.dirichlet.eval(&self.xi),
        };
        self.w * (data * self.y + self.z)
    }
}

fn build_proposal(policy: &ProposalPolicy, fb: &FrozenBox) -> Option<Proposal> {
    match policy {
        ProposalPolicy::Default => Some(Proposal::default_for(&fb.bx)),
        ProposalPolicy::Exact => None,
        ProposalPolicy::Custom(f) => Some(f(fb)),
    }
}

/// One box exit from an interior point: returns the landing time, the
/// landing point and the step's log-weight.
pub fn single_step(
    domain: &Domain,
    policy: &ProposalPolicy,
    t: f64,
    x: &[f64],
    series: &SeriesConfig,
    rng: &mut RngStream,
) -> Result<(f64, Vec<f64>, f64)> {
    let fb = domain.select_box(t, x)?;
    let sample = match build_proposal(policy, &fb) {
        Some(p) => importance_step(&fb.bx, &fb.start, &p, series, rng)?,
        None => exact_step(&fb.bx, &fb.start, series, rng)?,
    };
    let sample = scale_and_shift(&sample, &fb.map);
    Ok((t + sample.tau, sample.position, sample.log_weight))
}

/// Run one path from (t, x) until it lands on an absorbing surface or the
/// horizon. Y, Z use the coefficients frozen per box: Y' = Y e^{c dt},
/// Z' = Z + Y f (e^{c dt} - 1)/c, with the Taylor branch for small c dt.
pub fn run_path(
    domain: &Domain,
    policy: &ProposalPolicy,
    t: f64,
    x: &[f64],
    cfg: &WalkerConfig,
    rng: &mut RngStream,
) -> Result<PathEnd> {
    if domain.classify(t, x) != Landing::Interior {
        return Err(WalkError::DegenerateStart);
    }
    let mut theta = t;
    let mut xi = x.to_vec();
    let (mut y, mut z, mut log_w) = (1.0f64, 0.0f64, 0.0f64);
    let mut steps = 0usize;
    let mut overflowed = false;
    loop {
        if steps >= cfg.max_steps {
            return Err(WalkError::StepLimitExceeded(steps));
        }
        let fb = domain.select_box(theta, &xi)?;
        let sample = match build_proposal(policy, &fb) {
            Some(p) => importance_step(&fb.bx, &fb.start, &p, &cfg.series, rng)?,
            None => exact_step(&fb.bx, &fb.start, &cfg.series, rng)?,
        };
        let sample = scale_and_shift(&sample, &fb.map);
        let dt = sample.tau;
        let c = fb.bx.c_hat;
        let growth = (c * dt).exp();
        z += if (c * dt).abs() < 1e-8 {
            y * fb.bx.f_hat * dt * (1.0 + 0.5 * c * dt)
        } else {
            y * fb.bx.f_hat * (growth - 1.0) / c
        };
        y *= growth;
        log_w += sample.log_weight;
        if log_w.abs() > cfg.log_weight_bound {
            overflowed = true;
        }
        theta += dt;
        xi = sample.position;
        steps += 1;
        if domain.classify(theta, &xi) != Landing::Interior {
            break;
        }
    }
    Ok(PathEnd {
        landing: domain.classify(theta, &xi),
        theta,
        xi,
        y,
        z,
        w: log_w.exp(),
        log_w,
        steps,
        overflowed,
    })
}

/// Fixed-width histogram with under/overflow buckets.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(lo: f64, width: f64, bins: usize) -> Histogram {
        Histogram {
            lo,
            width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    pub fn push(&mut self, v: f64) {
        if v < self.lo {
            self.underflow += 1;
            return;
        }
        let i = ((v - self.lo) / self.width) as usize;
        if i < self.counts.len() {
            self.counts[i] += 1;
        } else {
            self.overflow += 1;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        self.underflow += other.underflow;
        self.overflow += other.overflow;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Estimator output with weight and step diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n: usize,
    pub weight_mean: f64,
    pub weight_variance: f64,
    pub weight_max: f64,
    pub log_weight_hist: Histogram,
    pub steps_mean: f64,
    pub steps_max: f64,
    pub step_hist: Histogram,
    pub n_overflowed: usize,
    /// empirical E[W nu], the computable factor of the delta * E[W nu e^{M theta}]
    /// bias bound (with M = 0); multiply by the declared freezing tolerance
    pub bias_factor: f64,
    pub delta: Option<f64>,
    pub wall_time_s: f64,
}

impl RunReport {
    pub fn csv_header() -> &'static str {
        "estimate,std_error,n,weight_mean,weight_variance,weight_max,steps_mean,steps_max,n_overflowed,wall_time_s"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{:.3}",
            self.estimate,
            self.std_error,
            self.n,
            self.weight_mean,
            self.weight_variance,
            self.weight_max,
            self.steps_mean,
            self.steps_max,
            self.n_overflowed,
            self.wall_time_s
        )
    }
}

struct ChunkStats {
    value: Moments,
    weight: Moments,
    steps: Moments,
    wnu: Moments,
    log_w_hist: Histogram,
    step_hist: Histogram,
    n_overflowed: usize,
}

impl ChunkStats {
    fn new() -> ChunkStats {
        ChunkStats {
            value: Moments::new(),
            weight: Moments::new(),
            steps: Moments::new(),
            wnu: Moments::new(),
            log_w_hist: Histogram::new(-60.0, 5.0, 24),
            step_hist: Histogram::new(0.0, 1.0, 64),
            n_overflowed: 0,
        }
    }

    fn push(&mut self, value: f64, p: &PathEnd) {
        self.value.push(value);
        self.weight.push(p.w);
        self.steps.push(p.steps as f64);
        self.wnu.push(p.w * p.steps as f64);
        self.log_w_hist.push(p.log_w);
        self.step_hist.push(p.steps as f64);
        self.n_overflowed += p.overflowed as usize;
    }

    fn merge(mut self, o: ChunkStats) -> ChunkStats {
        self.value.merge(&o.value);
        self.weight.merge(&o.weight);
        self.steps.merge(&o.steps);
        self.wnu.merge(&o.wnu);
        self.log_w_hist.merge(&o.log_w_hist);
        self.step_hist.merge(&o.step_hist);
        self.n_overflowed += o.n_overflowed;
        self
    }
}

const CHUNK: usize = 4096;

/// Average an arbitrary path functional over `n` independent paths. Paths
/// are keyed by index to their own RNG stream, so the result is identical
/// for any worker count.
pub fn estimate_with<F>(
    domain: &Domain,
    t: f64,
    x: &[f64],
    n: usize,
    policy: &ProposalPolicy,
    cfg: &WalkerConfig,
    seed: u64,
    functional: F,
) -> Result<RunReport>
where
    F: Fn(&PathEnd) -> f64 + Sync,
{
    let t_start = std::time::Instant::now();
    let n_chunks = n.div_ceil(CHUNK);
    let stats = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<ChunkStats> {
            let mut s = ChunkStats::new();
            let hi = ((ci + 1) * CHUNK).min(n);
            for i in ci * CHUNK..hi {
                let mut rng = RngStream::new(seed, i as u64);
                let p = run_path(domain, policy, t, x, cfg, &mut rng)?;
                s.push(functional(&p), &p);
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(ChunkStats::new(), ChunkStats::merge);
    Ok(RunReport {
        estimate: stats.value.mean,
        std_error: stats.value.std_error(),
        n,
        weight_mean: stats.weight.mean,
        weight_variance: stats.weight.variance(),
        weight_max: stats.weight.max,
        log_weight_hist: stats.log_w_hist,
        steps_mean: stats.steps.mean,
        steps_max: stats.steps.max,
        step_hist: stats.step_hist,
        n_overflowed: stats.n_overflowed,
        bias_factor: stats.wnu.mean,
        delta: cfg.delta,
        wall_time_s: t_start.elapsed().as_secs_f64(),
    })
}

/// The standard estimator: u(t,x) ~ mean of W (data(Xi) Y + Z) where the
/// data is the Dirichlet or terminal value depending on the landing.
pub fn estimate(
    domain: &Domain,
    t: f64,
    x: &[f64],
    n: usize,
    policy: &ProposalPolicy,
    cfg: &WalkerConfig,
    seed: u64,
) -> Result<RunReport> {
    estimate_with(domain, t, x, n, policy, cfg, seed, |p| p.payoff(domain))
}

/// Average several functionals of weight-one exits over shared draws from a
/// prepared `ExactBoxSampler`. Returns (mean, standard error) per functional;
/// chunk-keyed RNG streams keep the result worker-count independent.
pub fn estimate_exact_box(
    sampler: &ExactBoxSampler,
    n: usize,
    seed: u64,
    functionals: &[&(dyn Fn(&ExitSample) -> f64 + Sync)],
) -> Result<Vec<(f64, f64)>> {
    let k = functionals.len();
    let n_chunks = n.div_ceil(CHUNK);
    let stats = (0..n_chunks)
        .into_par_iter()
        .map(|ci| -> Result<Vec<Moments>> {
            let mut ms = vec![Moments::new(); k];
            let mut rng = RngStream::new(seed, ci as u64);
            let hi = ((ci + 1) * CHUNK).min(n);
            for _ in ci * CHUNK..hi {
                let e = sampler.sample(&mut rng)?;
                for (m, f) in ms.iter_mut().zip(functionals) {
                    m.push(f(&e));
                }
            }
            Ok(ms)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(vec![Moments::new(); k], |mut acc, ms| {
            for (a, m) in acc.iter_mut().zip(ms) {
                a.merge(&m);
            }
            acc
        });
    Ok(stats.iter().map(|m| (m.mean, m.std_error())).collect())
}

/// Repulsing proposal for the room + corridor layout: from the room, exits
/// are pushed onto the corridor-mouth window of the shared face; inside the
/// corridor, the far end gets a boosted side probability. Positions outside
/// the mouth window carry zero payoff (killed on zero data), so restricting
/// the proposal support there leaves the estimator unbiased; it does leave
/// the mean weight below one, which self-normalized estimators cannot use.
pub fn corridor_proposal(domain: &Domain) -> Result<ProposalPolicy> {
    corridor_proposal_with(domain, true)
}

/// Like [`corridor_proposal`] but optionally keeping the full side support
/// (`windowed = false`): mean weight one at the price of heavier weight
/// tails.
pub fn corridor_proposal_with(domain: &Domain, windowed: bool) -> Result<ProposalPolicy> {
    if domain.boxes.len() < 2 || domain.dim() != 2 {
        return Err(WalkError::Config(
            "corridor proposal expects a 2-d room + corridor layout".into(),
        ));
    }
    // the mouth window truncates whole-face support; on an interior interface
    // that would cut off live paths and bias the estimate, so the windowed
    // variant is only sound when the room is a single box
    if windowed && domain.boxes.len() != 2 {
        return Err(WalkError::Config(
            "windowed corridor proposal requires a single room box".into(),
        ));
    }
    // convention of the shipped configs: the last box is the corridor, the
    // others cover the room
    let corridor_index = domain.boxes.len() - 1;
    let room = domain.boxes[0].clone();
    let cor = domain.boxes[corridor_index].clone();
    // the corridor runs along the axis where it pokes out of the room
    let mut along = None;
    for axis in 0..2 {
        for eta in [-1.0f64, 1.0] {
            let cor_edge = cor.center[axis] + eta * cor.half_lengths[axis];
            let room_edge = room.center[axis] + eta * room.half_lengths[axis];
            if eta * (cor_edge - room_edge) > 1e-12 {
                along = Some((axis, eta));
            }
        }
    }
    let (axis, eta) =
        along.ok_or_else(|| WalkError::Config("corridor does not extend past the room".into()))?;
    let cross = 1 - axis;
    let mouth = (
        cor.center[cross] - cor.half_lengths[cross],
        cor.center[cross] + cor.half_lengths[cross],
    );
    Ok(ProposalPolicy::Custom(Arc::new(move |fb| {
        let mut p = Proposal::default_for(&fb.bx);
        let target = SideId::Lateral {
            axis,
            eta: if eta > 0.0 { 1 } else { -1 },
        };
        let boost = if fb.index == corridor_index { 0.4 } else { 0.85 };
        let rest = (1.0 - boost) / (p.sides.len() - 1) as f64;
        for s in p.sides.iter_mut() {
            s.alpha = if s.side == target { boost } else { rest };
            if windowed && fb.index != corridor_index && s.side == target {
                // canonical window of the corridor mouth on the shared face
                let mut lo = fb.map.offset.as_slice().to_vec();
                let mut hi = lo.clone();
                lo[cross] = mouth.0;
                hi[cross] = mouth.1;
                let w = (
                    fb.map.to_canonical(&lo)[cross],
                    fb.map.to_canonical(&hi)[cross],
                );
                s.positions[cross] = PositionLaw::Uniform { window: Some(w) };
            }
        }
        p
    })))
}

/// Proposal for multi-box room tilings with a trailing corridor box: room
/// cells keep the default proposal (paths genuinely walk the tiling, so each
/// path multiplies several O(1) step weights), and only the corridor box
/// boosts its far end so the rare exit stays reachable. On such tilings the
/// plain walker's weight products develop a heavy tail while every single
/// step stays well conditioned, which is the regime population resampling is
/// built for.
pub fn corridor_walk_proposal(domain: &Domain) -> Result<ProposalPolicy> {
    if domain.boxes.len() < 2 || domain.dim() != 2 {
        return Err(WalkError::Config(
            "corridor walk proposal expects a 2-d room tiling + corridor layout".into(),
        ));
    }
    let corridor_index = domain.boxes.len() - 1;
    let cor = domain.boxes[corridor_index].clone();
    // the corridor's long axis; its far end is the boosted side
    let axis = (0..2)
        .max_by(|&a, &b| {
            cor.half_lengths[a]
                .partial_cmp(&cor.half_lengths[b])
                .unwrap()
        })
        .unwrap();
    let hull_max = domain
        .boxes
        .iter()
        .take(corridor_index)
        .map(|b| b.center[axis] + b.half_lengths[axis])
        .fold(f64::NEG_INFINITY, f64::max);
    let eta: i8 = if cor.center[axis] + cor.half_lengths[axis] > hull_max + 1e-12 {
        1
    } else {
        -1
    };
    Ok(ProposalPolicy::Custom(Arc::new(move |fb| {
        let mut p = Proposal::default_for(&fb.bx);
        if fb.index == corridor_index {
            let target = SideId::Lateral { axis, eta };
            let rest = 0.6 / (p.sides.len() - 1) as f64;
            for s in p.sides.iter_mut() {
                s.alpha = if s.side == target { 0.4 } else { rest };
            }
        }
        p
    })))
}

/// Lognormal fit of per-step log-weights and the implied growth of Var[W_n].
#[derive(Debug, Clone, Serialize)]
pub struct ExplosionForecast {
    pub mean_log: f64,
    pub var_log: f64,
}

impl ExplosionForecast {
    /// Var[W_n] for n iid lognormal step weights.
    pub fn variance_at(&self, n: usize) -> f64 {
        let (m, s2, nf) = (self.mean_log, self.var_log, n as f64);
        (nf * (2.0 * m + s2)).exp() * ((nf * s2).exp_m1())
    }

    /// Largest step budget keeping the forecast variance under `cap`.
    pub fn recommended_max_steps(&self, cap: f64) -> usize {
        if self.var_log == 0.0 && self.mean_log <= 0.0 {
            return usize::MAX;
        }
        let mut n = 0usize;
        while n < 100_000 && self.variance_at(n + 1) < cap {
            n += 1;
        }
        n
    }
}

pub fn weight_explosion_forecast(step_log_weights: &[f64]) -> ExplosionForecast {
    let mut m = Moments::new();
    for &lw in step_log_weights {
        m.push(lw);
    }
    ExplosionForecast {
        mean_log: m.mean,
        var_log: m.variance(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series1d::{exit_time_density, BoundaryPair};
    use crate::util::integrate_gl;
    use rand::Rng;

    fn square_domain() -> Domain {
        Domain::from_json(
            r#"{
            "boxes": [{"center": [0.0, 0.0], "half_lengths": [1.0, 1.0]}],
            "dirichlet": {"type": "constant", "value": 1.0}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn zero_coefficients_give_unit_y_zero_z() {
        let dom = square_domain();
        let cfg = WalkerConfig::default();
        let mut rng = RngStream::new(3, 0);
        for _ in 0..50 {
            let p = run_path(&dom, &ProposalPolicy::Default, 0.0, &[0.1, 0.2], &cfg, &mut rng)
                .unwrap();
            assert_eq!(p.y, 1.0);
            assert_eq!(p.z, 0.0);
            assert_eq!(p.steps, 1);
            assert_eq!(p.landing, Landing::Dirichlet);
        }
    }

    #[test]
    fn total_mass_is_one() {
        let dom = square_domain();
        let cfg = WalkerConfig::default();
        let rep = estimate(
            &dom,
            0.0,
            &[0.0, 0.0],
            40_000,
            &ProposalPolicy::Default,
            &cfg,
            11,
        )
        .unwrap();
        assert!(
            (rep.estimate - 1.0).abs() < 3.0 * rep.std_error,
            "{} +- {}",
            rep.estimate,
            rep.std_error
        );
        assert!((rep.weight_mean - 1.0).abs() < 3.0 * rep.std_error);
    }

    #[test]
    fn discounted_mass_matches_quadrature() {
        // c < 0, f = 0, phi = 1: u = E[e^{c tau}] on the unit square
        let mut dom = square_domain();
        dom.coefficients.c = -0.5;
        let cfg = WalkerConfig::default();
        let rep = estimate(
            &dom,
            0.0,
            &[0.0, 0.0],
            30_000,
            &ProposalPolicy::Exact,
            &cfg,
            17,
        )
        .unwrap();
        // density of the d=2 exit time: 2 q(t) S(t) in canonical units
        let scfg = SeriesConfig::default();
        let target = integrate_gl(
            |t| {
                let ch = crate::series1d::Channel::new(BoundaryPair::DD, 0.0).unwrap();
                let q = exit_time_density(BoundaryPair::DD, 0.0, t, 0.0, &scfg).unwrap();
                let s = ch.survival(t, 0.0, &scfg).unwrap().value();
                2.0 * q * s * (-0.5 * t).exp()
            },
            1e-9,
            40.0,
            400,
        );
        assert!(
            (rep.estimate - target).abs() < 3.0 * rep.std_error,
            "{} vs {target} (se {})",
            rep.estimate,
            rep.std_error
        );
    }

    #[test]
    fn source_term_reproduces_quadratic_solution() {
        // (1/2) lap v = 1 with v = |x|^2/2 on the boundary: f = -1, c = 0
        let mut dom = square_domain();
        dom.coefficients.f = -1.0;
        dom.dirichlet = crate::geometry::BoundaryData::QuadraticSum;
        let cfg = WalkerConfig::default();
        let x = [0.3, -0.4];
        let rep = estimate(&dom, 0.0, &x, 30_000, &ProposalPolicy::Exact, &cfg, 23).unwrap();
        let exact = (x[0] * x[0] + x[1] * x[1]) / 2.0;
        assert!(
            (rep.estimate - exact).abs() < 3.0 * rep.std_error,
            "{} vs {exact} (se {})",
            rep.estimate,
            rep.std_error
        );
    }

    #[test]
    fn multibox_walk_terminates_on_outer_boundary() {
        let dom = Domain::from_json(
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
        .unwrap();
        // phi = x0 is harmonic: estimate from (0.75, 0) must be 0.75
        let cfg = WalkerConfig::default();
        let rep = estimate(
            &dom,
            0.0,
            &[0.75, 0.0],
            20_000,
            &ProposalPolicy::Exact,
            &cfg,
            31,
        )
        .unwrap();
        assert!(rep.steps_mean > 1.5, "overlap walk should take several steps");
        assert!(
            (rep.estimate - 0.75).abs() < 3.0 * rep.std_error,
            "{} (se {})",
            rep.estimate,
            rep.std_error
        );
    }

    #[test]
    fn reproducible_across_worker_counts() {
        let dom = square_domain();
        let cfg = WalkerConfig::default();
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1
            .install(|| estimate(&dom, 0.0, &[0.0, 0.0], 10_000, &ProposalPolicy::Default, &cfg, 7))
            .unwrap();
        let r4 = pool4
            .install(|| estimate(&dom, 0.0, &[0.0, 0.0], 10_000, &ProposalPolicy::Default, &cfg, 7))
            .unwrap();
        assert_eq!(r1.estimate.to_bits(), r4.estimate.to_bits());
        assert_eq!(r1.weight_max.to_bits(), r4.weight_max.to_bits());
    }

    #[test]
    fn step_count_bound_on_finite_horizon() {
        let mut dom = square_domain();
        dom.horizon = 1.0;
        let cfg = WalkerConfig::default();
        let mut steps = Moments::new();
        let mut advance = Moments::new();
        let mut rng = RngStream::new(41, 0);
        for _ in 0..4000 {
            let p = run_path(&dom, &ProposalPolicy::Exact, 0.0, &[0.0, 0.0], &cfg, &mut rng)
                .unwrap();
            steps.push(p.steps as f64);
            advance.push(p.theta / p.steps as f64);
        }
        let gamma = advance.mean;
        assert!(
            steps.mean <= 1.0 + 1.0 / gamma + 3.0 * steps.std_error(),
            "mean nu {} gamma {gamma}",
            steps.mean
        );
    }

    #[test]
    fn forecast_flat_for_constant_weights() {
        let f = weight_explosion_forecast(&[0.0; 100]);
        assert_eq!(f.variance_at(10), 0.0);
        assert_eq!(f.recommended_max_steps(1.0), usize::MAX);
    }

    #[test]
    fn forecast_matches_lognormal_closed_form() {
        let (m, s) = (-0.02, 0.3);
        let mut rng = RngStream::new(51, 0);
        let mut lws = Vec::with_capacity(200_000);
        for _ in 0..200_000 {
            lws.push(m + s * rng.sample::<f64, _>(rand_distr::StandardNormal));
        }
        let f = weight_explosion_forecast(&lws);
        for n in [5usize, 10, 20] {
            let nf = n as f64;
            let s2 = s * s;
            let exact = (nf * (2.0 * m + s2)).exp() * ((nf * s2).exp_m1());
            let rel = (f.variance_at(n) - exact).abs() / exact;
            assert!(rel < 0.1, "n={n}: {} vs {exact}", f.variance_at(n));
        }
    }
}
