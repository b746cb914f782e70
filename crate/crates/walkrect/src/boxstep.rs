//! One step on a right time-space parallelepiped: draw an exit time, side
//! and position from a proposal law and attach the importance weight that
//! makes bounded functionals of the true exit law unbiased. Also houses the
//! exact (weight-one) sampler and the fast centered-hypercube path.

use crate::error::{Result, WalkError};
use crate::sampling::{
    build_inverse_cdf, sample_triangular, ExitTables, InverseCdfTable, TableTag,
    DEFAULT_TABLE_GRID,
};
use crate::series1d::{
    survival_position_density, Bc, BoundaryPair, Lane, SeriesConfig,
};
use rand::Rng;

/// Exit surface label: the time horizon or a lateral side (axis, +-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideId {
    Horizon,
    Lateral { axis: usize, eta: i8 },
}

/// A right parallelepiped [0,T] x prod [-L_i, L_i] with per-axis constant
/// drift and boundary conditions, plus coefficients frozen on the box for
/// the Feynman-Kac bookkeeping done by the walker.
#[derive(Debug, Clone)]
pub struct TimeSpaceBox {
    pub horizon: f64,
    pub half_lengths: Vec<f64>,
    pub drifts: Vec<f64>,
    pub bcs: Vec<BoundaryPair>,
    /// frozen zeroth-order (killing/potential) coefficient
    pub c_hat: f64,
    /// frozen source term
    pub f_hat: f64,
    lanes: Vec<Lane>,
}

impl TimeSpaceBox {
    pub fn new(
        horizon: f64,
        half_lengths: Vec<f64>,
        drifts: Vec<f64>,
        bcs: Vec<BoundaryPair>,
    ) -> Result<TimeSpaceBox> {
        let d = half_lengths.len();
        if d == 0 || drifts.len() != d || bcs.len() != d {
            return Err(WalkError::Config(
                "half_lengths, drifts and boundary conditions must share a length".into(),
            ));
        }
        if half_lengths.iter().any(|&l| !(l > 0.0)) {
            return Err(WalkError::Config("half-lengths must be positive".into()));
        }
        if !(horizon > 0.0) {
            return Err(WalkError::Config("horizon must be positive".into()));
        }
        if horizon.is_infinite() && !bcs.iter().any(|bc| bc.has_dirichlet()) {
            return Err(WalkError::InvalidBoundary(
                "infinite horizon requires at least one absorbing surface",
            ));
        }
        let mut lanes = Vec::with_capacity(d);
        for i in 0..d {
            lanes.push(Lane::new(bcs[i], drifts[i], half_lengths[i])?);
        }
        Ok(TimeSpaceBox {
            horizon,
            half_lengths,
            drifts,
            bcs,
            c_hat: 0.0,
            f_hat: 0.0,
            lanes,
        })
    }

    pub fn with_coeffs(mut self, c_hat: f64, f_hat: f64) -> TimeSpaceBox {
        self.c_hat = c_hat;
        self.f_hat = f_hat;
        self
    }

    pub fn dim(&self) -> usize {
        self.half_lengths.len()
    }

    pub fn lane(&self, i: usize) -> &Lane {
        &self.lanes[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(&self.half_lengths)
                .all(|(&xi, &l)| xi.abs() < l)
    }

    /// Lateral sides through which the process can actually exit.
    pub fn absorbing_sides(&self) -> Vec<(usize, i8)> {
        let mut v = Vec::new();
        for (i, bc) in self.bcs.iter().enumerate() {
            if bc.left == Bc::Dirichlet {
                v.push((i, -1));
            }
            if bc.right == Bc::Dirichlet {
                v.push((i, 1));
            }
        }
        v
    }
}

/// Time law of a lateral side proposal.
#[derive(Debug, Clone, Copy)]
pub enum TimeLaw {
    /// rate-alpha exponential conditioned on (0, T)
    ExponentialTruncated { rate: f64 },
}

impl TimeLaw {
    fn sample(&self, horizon: f64, rng: &mut impl Rng) -> f64 {
        match *self {
            TimeLaw::ExponentialTruncated { rate } => {
                let u: f64 = rng.gen();
                if horizon.is_infinite() {
                    -(-u).ln_1p() / rate
                } else {
                    let cap = -(-rate * horizon).exp_m1(); // 1 - e^{-rate T}
                    -(-u * cap).ln_1p() / rate
                }
            }
        }
    }

    fn log_density(&self, horizon: f64, t: f64) -> f64 {
        match *self {
            TimeLaw::ExponentialTruncated { rate } => {
                let norm = if horizon.is_infinite() {
                    1.0
                } else {
                    -(-rate * horizon).exp_m1()
                };
                rate.ln() - rate * t - norm.ln()
            }
        }
    }
}

/// Position law of one surviving coordinate on [-L, L].
#[derive(Debug, Clone, Copy)]
pub enum PositionLaw {
    /// uniform on a window [a, b] of the axis (defaults to the full axis)
    Uniform { window: Option<(f64, f64)> },
    /// density (1 - |z|/L)/L
    Triangular,
}

impl PositionLaw {
    fn sample(&self, l: f64, rng: &mut impl Rng) -> f64 {
        match *self {
            PositionLaw::Uniform { window } => {
                let (a, b) = window.unwrap_or((-l, l));
                a + (b - a) * rng.gen::<f64>()
            }
            PositionLaw::Triangular => {
                let (x, _chi) = sample_triangular(rng);
                l * x
            }
        }
    }

    fn log_density(&self, l: f64, z: f64) -> f64 {
        match *self {
            PositionLaw::Uniform { window } => {
                let (a, b) = window.unwrap_or((-l, l));
                -(b - a).ln()
            }
            PositionLaw::Triangular => ((1.0 - (z / l).abs()) / l).ln(),
        }
    }
}

/// Proposal for one exit side: selection probability, time law (lateral
/// sides only) and per-axis position laws for the surviving coordinates.
#[derive(Debug, Clone)]
pub struct SideProposal {
    pub side: SideId,
    pub alpha: f64,
    pub time: TimeLaw,
    /// indexed by axis; the exiting axis entry is ignored
    pub positions: Vec<PositionLaw>,
}

/// A full proposal: one entry per reachable exit side.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub sides: Vec<SideProposal>,
}

impl Proposal {
    /// The default proposal: sides uniform
    /// over reachable surfaces, exponential exit times with rate
    /// 1/sqrt(L/2), uniform positions.
    pub fn default_for(bx: &TimeSpaceBox) -> Proposal {
        let mut sides: Vec<SideId> = bx
            .absorbing_sides()
            .into_iter()
            .map(|(axis, eta)| SideId::Lateral { axis, eta })
            .collect();
        if bx.horizon.is_finite() {
            sides.push(SideId::Horizon);
        }
        let n = sides.len();
        let d = bx.dim();
        Proposal {
            sides: sides
                .into_iter()
                .map(|side| {
                    let rate = match side {
                        SideId::Lateral { axis, .. } => {
                            crate::sampling::exponential_rate_for_half_length(
                                bx.half_lengths[axis],
                            )
                        }
                        SideId::Horizon => 1.0,
                    };
                    SideProposal {
                        side,
                        alpha: 1.0 / n as f64,
                        time: TimeLaw::ExponentialTruncated { rate },
                        positions: vec![PositionLaw::Uniform { window: None }; d],
                    }
                })
                .collect(),
        }
    }

    /// Absolute-continuity check: every reachable side carries positive
    /// probability and the alphas form a distribution.
    pub fn validate(&self, bx: &TimeSpaceBox) -> Result<()> {
        let total: f64 = self.sides.iter().map(|s| s.alpha).sum();
        if (total - 1.0).abs() > 1e-9 || self.sides.iter().any(|s| s.alpha <= 0.0) {
            return Err(WalkError::AbsoluteContinuityViolation(format!(
                "side probabilities must be positive and sum to 1 (got {total})"
            )));
        }
        let mut reachable: Vec<SideId> = bx
            .absorbing_sides()
            .into_iter()
            .map(|(axis, eta)| SideId::Lateral { axis, eta })
            .collect();
        if bx.horizon.is_finite() {
            reachable.push(SideId::Horizon);
        }
        for side in reachable {
            if !self.sides.iter().any(|s| s.side == side) {
                return Err(WalkError::AbsoluteContinuityViolation(format!(
                    "reachable side {side:?} has zero proposal probability"
                )));
            }
        }
        for s in &self.sides {
            match s.side {
                SideId::Horizon => {
                    if bx.horizon.is_infinite() {
                        return Err(WalkError::AbsoluteContinuityViolation(
                            "horizon side proposed on an infinite-horizon box".into(),
                        ));
                    }
                }
                SideId::Lateral { axis, eta } => {
                    if axis >= bx.dim() {
                        return Err(WalkError::Config("side axis out of range".into()));
                    }
                    let bc = bx.bcs[axis];
                    let end = if eta > 0 { bc.right } else { bc.left };
                    if end != Bc::Dirichlet {
                        return Err(WalkError::AbsoluteContinuityViolation(format!(
                            "side {s:?} is reflecting; its true exit probability is zero",
                            s = s.side
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// One sampled exit with its importance weight.
#[derive(Debug, Clone)]
pub struct ExitSample {
    pub side: SideId,
    pub tau: f64,
    pub position: Vec<f64>,
    pub log_weight: f64,
    pub weight: f64,
}

fn categorical(weights: &[f64], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        u -= w;
        if u <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Draw (side, tau, position) from `proposal` and weight it by the ratio of
/// the true exit density to the proposal density, accumulated in log space.
pub fn importance_step(
    bx: &TimeSpaceBox,
    start: &[f64],
    proposal: &Proposal,
    cfg: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<ExitSample> {
    if !bx.contains(start) {
        return Err(WalkError::PointOutsideDomain([
            start.first().copied().unwrap_or(f64::NAN),
            start.get(1).copied().unwrap_or(0.0),
            start.get(2).copied().unwrap_or(0.0),
        ]));
    }
    let alphas: Vec<f64> = proposal.sides.iter().map(|s| s.alpha).collect();
    let pick = categorical(&alphas, rng);
    let sp = &proposal.sides[pick];
    let mut log_num = 0.0;
    let mut log_den = sp.alpha.ln();
    let (tau, exit_axis) = match sp.side {
        SideId::Horizon => (bx.horizon, None),
        SideId::Lateral { axis, .. } => {
            let t = sp.time.sample(bx.horizon, rng);
            log_den += sp.time.log_density(bx.horizon, t);
            (t, Some(axis))
        }
    };
    let mut position = vec![0.0; bx.dim()];
    for j in 0..bx.dim() {
        if Some(j) == exit_axis {
            continue;
        }
        let l = bx.half_lengths[j];
        let z = sp.positions[j].sample(l, rng);
        log_den += sp.positions[j].log_density(l, z);
        log_num += bx.lanes[j].transition_density(tau, start[j], z, cfg)?.ln();
        position[j] = z;
    }
    if let SideId::Lateral { axis, eta } = sp.side {
        position[axis] = eta as f64 * bx.half_lengths[axis];
        let lane = &bx.lanes[axis];
        let factor = if bx.bcs[axis] == BoundaryPair::DD {
            lane.one_sided_exit_density(eta, tau, start[axis], cfg)?
        } else {
            lane.exit_time_density(tau, start[axis], cfg)?
        };
        log_num += factor.ln();
    }
    let log_weight = log_num - log_den;
    // log_num = -inf means a true density factor lost all precision;
    // a merely huge negative log is a valid (underflowed-to-zero) weight
    if log_weight.is_nan() || log_weight == f64::INFINITY || log_num == f64::NEG_INFINITY {
        return Err(WalkError::NumericalUnderflow);
    }
    Ok(ExitSample {
        side: sp.side,
        tau,
        position,
        log_weight,
        weight: log_weight.exp(),
    })
}

/// Log of the joint survival probability of all axes at time t.
pub(crate) fn log_survival_all(bx: &TimeSpaceBox, start: &[f64], t: f64, cfg: &SeriesConfig) -> Result<f64> {
    let mut s = 0.0;
    for j in 0..bx.dim() {
        s += bx.lanes[j].survival(t, start[j], cfg)?.ln();
    }
    Ok(s)
}

/// Invert P[X_t <= y, surv] = u * P[surv] for one lane by bisection in y.
pub(crate) fn sample_survivor_position(
    lane: &Lane,
    t: f64,
    x: f64,
    cfg: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<f64> {
    let u: f64 = rng.gen();
    let target = lane.survival(t, x, cfg)?.ln() + u.ln();
    let l = lane.half_length;
    // 2^-46 of the interval is already below series accuracy
    let (mut a, mut b) = (-l, l);
    for _ in 0..46 {
        let m = 0.5 * (a + b);
        if lane.position_cdf(t, x, m, cfg)?.ln() < target {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Exact draw of (side, tau, position): weight 1.
pub fn exact_step(
    bx: &TimeSpaceBox,
    start: &[f64],
    cfg: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<ExitSample> {
    if !bx.contains(start) {
        return Err(WalkError::PointOutsideDomain([
            start.first().copied().unwrap_or(f64::NAN),
            start.get(1).copied().unwrap_or(0.0),
            start.get(2).copied().unwrap_or(0.0),
        ]));
    }
    let u: f64 = rng.gen();
    let lu = u.ln();
    let horizon_exit = bx.horizon.is_finite() && lu <= log_survival_all(bx, start, bx.horizon, cfg)?;
    let mut position = vec![0.0; bx.dim()];
    if horizon_exit {
        for j in 0..bx.dim() {
            position[j] = sample_survivor_position(&bx.lanes[j], bx.horizon, start[j], cfg, rng)?;
        }
        return Ok(ExitSample {
            side: SideId::Horizon,
            tau: bx.horizon,
            position,
            log_weight: 0.0,
            weight: 1.0,
        });
    }
    // exit time: solve log S_total(t) = log u on (0, T)
    let mut hi = bx
        .half_lengths
        .iter()
        .map(|l| l * l)
        .fold(0.0f64, f64::max)
        .max(1e-6);
    if bx.horizon.is_finite() {
        hi = bx.horizon;
    } else {
        while log_survival_all(bx, start, hi, cfg)? > lu {
            hi *= 2.0;
            if hi > 1e12 {
                return Err(WalkError::NonConvergence {
                    context: "exit-time bracket in exact_step",
                });
            }
        }
    }
    let mut lo = 0.0;
    let mut tau = 0.5 * hi;
    for _ in 0..70 {
        tau = 0.5 * (lo + hi);
        if log_survival_all(bx, start, tau, cfg)? > lu {
            lo = tau;
        } else {
            hi = tau;
        }
    }
    // exiting axis: weights q_i(tau)/S_i(tau)
    let mut axis_rates = vec![0.0; bx.dim()];
    for j in 0..bx.dim() {
        if bx.bcs[j].has_dirichlet() {
            let lq = bx.lanes[j].exit_time_density(tau, start[j], cfg)?.ln();
            let ls = bx.lanes[j].survival(tau, start[j], cfg)?.ln();
            axis_rates[j] = (lq - ls).exp();
        }
    }
    let axis = categorical(&axis_rates, rng);
    let lane = &bx.lanes[axis];
    let eta: i8 = match bx.bcs[axis] {
        BoundaryPair::DD => {
            let hp = lane.one_sided_exit_density(1, tau, start[axis], cfg)?;
            let hm = lane.one_sided_exit_density(-1, tau, start[axis], cfg)?;
            let p_plus = 1.0 / (1.0 + (hm.ln() - hp.ln()).exp());
            if rng.gen::<f64>() < p_plus {
                1
            } else {
                -1
            }
        }
        BoundaryPair::DN => -1,
        BoundaryPair::ND => 1,
        BoundaryPair::NN => unreachable!("NN axis has zero exit rate"),
    };
    position[axis] = eta as f64 * bx.half_lengths[axis];
    for j in 0..bx.dim() {
        if j != axis {
            position[j] = sample_survivor_position(&bx.lanes[j], tau, start[j], cfg, rng)?;
        }
    }
    Ok(ExitSample {
        side: SideId::Lateral { axis, eta },
        tau,
        position,
        log_weight: 0.0,
        weight: 1.0,
    })
}

/// Weight-one exit sampler for a fixed start, with the per-axis exit-time
/// CDFs inverted into tables once up front. The coordinates are independent,
/// so the box exit time is the minimum of per-axis clocks and the exiting
/// axis is the argmin; each clock is a single inverse-CDF lookup instead of
/// the bisection `exact_step` runs per draw. Side choice and surviving
/// positions still come from the series, so samples remain weight one up to
/// the table round-trip error (1e-6 in the quantile).
pub struct ExactBoxSampler {
    bx: TimeSpaceBox,
    start: Vec<f64>,
    cfg: SeriesConfig,
    tau_inv: Vec<Option<InverseCdfTable>>,
}

impl ExactBoxSampler {
    pub fn new(bx: &TimeSpaceBox, start: &[f64], cfg: &SeriesConfig) -> Result<ExactBoxSampler> {
        if !bx.contains(start) {
            return Err(WalkError::PointOutsideDomain([
                start.first().copied().unwrap_or(f64::NAN),
                start.get(1).copied().unwrap_or(0.0),
                start.get(2).copied().unwrap_or(0.0),
            ]));
        }
        let mut tau_inv = Vec::with_capacity(bx.dim());
        for j in 0..bx.dim() {
            if !bx.bcs[j].has_dirichlet() {
                tau_inv.push(None);
                continue;
            }
            let lane = bx.lanes[j].clone();
            let x = start[j];
            let c = *cfg;
            let mut t_hi = (bx.half_lengths[j] * bx.half_lengths[j]).max(1e-3);
            while lane.exit_time_cdf(t_hi, x, cfg)? < 1.0 - 1e-12 {
                t_hi *= 2.0;
                if t_hi > 1e9 {
                    return Err(WalkError::NonConvergence {
                        context: "exit-time table bracket",
                    });
                }
            }
            tau_inv.push(Some(build_inverse_cdf(
                move |t| {
                    if t <= 0.0 {
                        0.0
                    } else {
                        lane.exit_time_cdf(t, x, &c).unwrap().min(1.0)
                    }
                },
                (0.0, t_hi),
                DEFAULT_TABLE_GRID,
                TableTag::ExitTime,
            )?));
        }
        Ok(ExactBoxSampler {
            bx: bx.clone(),
            start: start.to_vec(),
            cfg: *cfg,
            tau_inv,
        })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Result<ExitSample> {
        let bx = &self.bx;
        let cfg = &self.cfg;
        let mut tau = f64::INFINITY;
        let mut axis = usize::MAX;
        for (j, table) in self.tau_inv.iter().enumerate() {
            if let Some(tb) = table {
                let t = tb.eval(rng.gen());
                if t < tau {
                    tau = t;
                    axis = j;
                }
            }
        }
        let mut position = vec![0.0; bx.dim()];
        if tau >= bx.horizon {
            for j in 0..bx.dim() {
                position[j] =
                    sample_survivor_position(&bx.lanes[j], bx.horizon, self.start[j], cfg, rng)?;
            }
            return Ok(ExitSample {
                side: SideId::Horizon,
                tau: bx.horizon,
                position,
                log_weight: 0.0,
                weight: 1.0,
            });
        }
        let lane = &bx.lanes[axis];
        let eta: i8 = match bx.bcs[axis] {
            BoundaryPair::DD => {
                let hp = lane.one_sided_exit_density(1, tau, self.start[axis], cfg)?;
                let hm = lane.one_sided_exit_density(-1, tau, self.start[axis], cfg)?;
                let p_plus = 1.0 / (1.0 + (hm.ln() - hp.ln()).exp());
                if rng.gen::<f64>() < p_plus {
                    1
                } else {
                    -1
                }
            }
            BoundaryPair::DN => -1,
            BoundaryPair::ND => 1,
            BoundaryPair::NN => unreachable!("NN axis has no exit clock"),
        };
        position[axis] = eta as f64 * bx.half_lengths[axis];
        for j in 0..bx.dim() {
            if j != axis {
                position[j] = sample_survivor_position(&bx.lanes[j], tau, self.start[j], cfg, rng)?;
            }
        }
        Ok(ExitSample {
            side: SideId::Lateral { axis, eta },
            tau,
            position,
            log_weight: 0.0,
            weight: 1.0,
        })
    }
}

/// Fast importance step for the driftless canonical hypercube [-1,1]^d
/// started at the center. With probability beta the walk leaves laterally
/// before the horizon; surviving coordinates are drawn triangular and
/// reweighted by the conditional position density.
pub fn hypercube_fast_step(
    d: usize,
    t_horizon: f64,
    tables: &ExitTables,
    cfg: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<ExitSample> {
    assert!(d >= 1);
    let beta = tables.beta(t_horizon, d);
    let lateral = rng.gen::<f64>() < beta;
    let mut position = vec![0.0; d];
    let mut weight = 1.0;
    if lateral {
        let tau = tables.sample_conditional_exit_time(t_horizon, d, rng);
        let pick = rng.gen_range(0..2 * d);
        let (axis, eta) = (pick / 2, if pick % 2 == 0 { 1i8 } else { -1i8 });
        position[axis] = eta as f64;
        for j in 0..d {
            if j == axis {
                continue;
            }
            let (xi, chi) = sample_triangular(rng);
            position[j] = xi;
            weight *= survival_position_density(tau, xi, cfg)? / chi;
        }
        Ok(ExitSample {
            side: SideId::Lateral { axis, eta },
            tau,
            position,
            log_weight: weight.ln(),
            weight,
        })
    } else {
        for slot in position.iter_mut() {
            let (xi, chi) = sample_triangular(rng);
            *slot = xi;
            weight *= survival_position_density(t_horizon, xi, cfg)? / chi;
        }
        Ok(ExitSample {
            side: SideId::Horizon,
            tau: t_horizon,
            position,
            log_weight: weight.ln(),
            weight,
        })
    }
}

/// Empirical variance threshold above which the fast hypercube proposal is
/// considered unstable and the exact sampler recommended.
pub const HYPERCUBE_VARIANCE_WARNING: f64 = 0.1;

// ---------------------------------------------------------------------------
// Affine reduction to right boxes
// ---------------------------------------------------------------------------

/// Invertible affine change of coordinates x = sigma y + offset that turns a
/// general constant-coefficient diffusion into unit-diffusion coordinates.
#[derive(Debug, Clone)]
pub struct AffineMap {
    pub sigma: nalgebra::DMatrix<f64>,
    sigma_inv: nalgebra::DMatrix<f64>,
    pub offset: nalgebra::DVector<f64>,
}

impl AffineMap {
    pub fn new(sigma: nalgebra::DMatrix<f64>, offset: nalgebra::DVector<f64>) -> Result<AffineMap> {
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .ok_or(WalkError::NotPositiveDefinite)?;
        Ok(AffineMap {
            sigma,
            sigma_inv,
            offset,
        })
    }

    pub fn identity(d: usize) -> AffineMap {
        AffineMap {
            sigma: nalgebra::DMatrix::identity(d, d),
            sigma_inv: nalgebra::DMatrix::identity(d, d),
            offset: nalgebra::DVector::zeros(d),
        }
    }

    pub fn to_canonical(&self, x: &[f64]) -> Vec<f64> {
        let v = nalgebra::DVector::from_column_slice(x) - &self.offset;
        (&self.sigma_inv * v).iter().copied().collect()
    }

    pub fn to_physical(&self, y: &[f64]) -> Vec<f64> {
        let v = &self.sigma * nalgebra::DVector::from_column_slice(y) + &self.offset;
        v.iter().copied().collect()
    }

    /// Drift of the transformed process Y = sigma^{-1}(X - offset).
    pub fn drift_to_canonical(&self, b: &[f64]) -> Vec<f64> {
        (&self.sigma_inv * nalgebra::DVector::from_column_slice(b))
            .iter()
            .copied()
            .collect()
    }
}

/// Map an exit sample from canonical coordinates back through the affine map.
pub fn scale_and_shift(sample: &ExitSample, map: &AffineMap) -> ExitSample {
    ExitSample {
        side: sample.side,
        tau: sample.tau,
        position: map.to_physical(&sample.position),
        log_weight: sample.log_weight,
        weight: sample.weight,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::RngStream;
    use crate::util::Moments;

    fn cfg() -> SeriesConfig {
        SeriesConfig::default()
    }

    fn square() -> TimeSpaceBox {
        TimeSpaceBox::new(
            f64::INFINITY,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![BoundaryPair::DD, BoundaryPair::DD],
        )
        .unwrap()
    }

    #[test]
    fn proposal_on_reflecting_side_is_rejected() {
        let bx = TimeSpaceBox::new(
            f64::INFINITY,
            vec![1.0],
            vec![0.0],
            vec![BoundaryPair::DN],
        )
        .unwrap();
        let mut p = Proposal::default_for(&bx);
        assert!(p.validate(&bx).is_ok());
        p.sides[0].side = SideId::Lateral { axis: 0, eta: 1 };
        assert!(matches!(
            p.validate(&bx),
            Err(WalkError::AbsoluteContinuityViolation(_))
        ));
    }

    #[test]
    fn infinite_horizon_all_reflecting_is_invalid() {
        let r = TimeSpaceBox::new(
            f64::INFINITY,
            vec![1.0],
            vec![0.0],
            vec![BoundaryPair::NN],
        );
        assert!(matches!(r, Err(WalkError::InvalidBoundary(_))));
    }

    #[test]
    fn exact_step_side_symmetry_1d() {
        let bx = TimeSpaceBox::new(
            f64::INFINITY,
            vec![1.0],
            vec![0.0],
            vec![BoundaryPair::DD],
        )
        .unwrap();
        let c = cfg();
        let mut rng = RngStream::new(5, 0);
        let n = 20_000;
        let mut plus = 0u64;
        for _ in 0..n {
            let s = exact_step(&bx, &[0.0], &c, &mut rng).unwrap();
            assert_eq!(s.weight, 1.0);
            if s.side == (SideId::Lateral { axis: 0, eta: 1 }) {
                plus += 1;
            }
        }
        let p = plus as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{p}");
    }

    #[test]
    fn exact_step_drifted_side_frequency_matches_scale_function() {
        let mu = 0.8;
        let bx = TimeSpaceBox::new(
            f64::INFINITY,
            vec![1.0],
            vec![mu],
            vec![BoundaryPair::DD],
        )
        .unwrap();
        let c = cfg();
        let x = 0.2;
        let phi = crate::series1d::scale_function(mu, 1.0, x);
        let mut rng = RngStream::new(6, 0);
        let n = 20_000;
        let mut plus = 0u64;
        for _ in 0..n {
            let s = exact_step(&bx, &[x], &c, &mut rng).unwrap();
            if s.side == (SideId::Lateral { axis: 0, eta: 1 }) {
                plus += 1;
            }
        }
        let p = plus as f64 / n as f64;
        assert!(
            (p - phi).abs() < 3.5 * (phi * (1.0 - phi) / n as f64).sqrt(),
            "{p} vs {phi}"
        );
    }

    #[test]
    fn importance_step_mean_weight_is_one_on_square() {
        let bx = square();
        let prop = Proposal::default_for(&bx);
        prop.validate(&bx).unwrap();
        let c = cfg();
        let mut rng = RngStream::new(9, 0);
        let mut m = Moments::new();
        for _ in 0..100_000 {
            let s = importance_step(&bx, &[0.0, 0.0], &prop, &c, &mut rng).unwrap();
            assert!(s.weight.is_finite() && s.weight >= 0.0 && !s.log_weight.is_nan());
            m.push(s.weight);
        }
        assert!((m.mean - 1.0).abs() < 3.0 * m.std_error(), "{} {}", m.mean, m.std_error());
    }

    #[test]
    fn importance_step_mean_tau_matches_exact_sampler() {
        let bx = square();
        let prop = Proposal::default_for(&bx);
        let c = cfg();
        let mut rng = RngStream::new(10, 0);
        let mut imp = Moments::new();
        let mut exa = Moments::new();
        for _ in 0..60_000 {
            let s = importance_step(&bx, &[0.3, -0.2], &prop, &c, &mut rng).unwrap();
            imp.push(s.weight * s.tau);
            let e = exact_step(&bx, &[0.3, -0.2], &c, &mut rng).unwrap();
            exa.push(e.tau);
        }
        let gap = (imp.mean - exa.mean).abs();
        let se = (imp.std_error().powi(2) + exa.std_error().powi(2)).sqrt();
        assert!(gap < 3.0 * se, "imp {} exact {} se {se}", imp.mean, exa.mean);
    }

    #[test]
    fn hypercube_fast_step_weight_moments() {
        let c = cfg();
        let tables = ExitTables::new(c).unwrap();
        for &t in &[f64::INFINITY, 1.0] {
            let mut rng = RngStream::new(12, 3);
            let mut m = Moments::new();
            for _ in 0..60_000 {
                let s = hypercube_fast_step(2, t, &tables, &c, &mut rng).unwrap();
                m.push(s.weight);
            }
            assert!((m.mean - 1.0).abs() < 4.0 * m.std_error(), "T={t}: {}", m.mean);
            assert!(m.variance() < HYPERCUBE_VARIANCE_WARNING, "T={t}: {}", m.variance());
        }
    }

    #[test]
    fn affine_map_round_trip_and_exit_faces() {
        let sigma = nalgebra::DMatrix::from_row_slice(2, 2, &[2.0, 0.7, -0.3, 1.4]);
        let offset = nalgebra::DVector::from_column_slice(&[1.0, -2.0]);
        let map = AffineMap::new(sigma, offset).unwrap();
        let x = [0.3, -0.8];
        let y = map.to_canonical(&x);
        let back = map.to_physical(&y);
        assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);

        let bx = square();
        let c = cfg();
        let mut rng = RngStream::new(13, 0);
        for _ in 0..200 {
            let s = exact_step(&bx, &[0.0, 0.0], &c, &mut rng).unwrap();
            let mapped = scale_and_shift(&s, &map);
            // exit point must lie on the image of the exited face
            if let SideId::Lateral { axis, eta } = s.side {
                let canon = map.to_canonical(&mapped.position);
                assert!((canon[axis] - eta as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_step_respects_finite_horizon() {
        let bx = TimeSpaceBox::new(
            0.4,
            vec![1.0, 1.0],
            vec![0.0, 0.0],
            vec![BoundaryPair::DD, BoundaryPair::DD],
        )
        .unwrap();
        let c = cfg();
        let mut rng = RngStream::new(14, 0);
        let mut horizon = 0u64;
        let n = 5000;
        for _ in 0..n {
            let s = exact_step(&bx, &[0.0, 0.0], &c, &mut rng).unwrap();
            assert!(s.tau <= 0.4 + 1e-12);
            if s.side == SideId::Horizon {
                assert_eq!(s.tau, 0.4);
                horizon += 1;
            }
        }
        // P[horizon] = (1 - R(0.4))^2
        let surv = 1.0 - ExitTables::new(c).unwrap().r(0.4);
        let p = surv * surv;
        let phat = horizon as f64 / n as f64;
        assert!((phat - p).abs() < 3.5 * (p * (1.0 - p) / n as f64).sqrt(), "{phat} vs {p}");
    }
}
