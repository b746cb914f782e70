//! Random variates for the canonical interval laws: tabulated inverse CDFs,
//! envelope rejection for the position-given-survival density, and the cheap
//! proposal laws used by the importance samplers.

use crate::error::{Result, WalkError};
use crate::series1d::{
    survival_position_cdf, survival_position_density, BoundaryPair, Channel, Branch, SeriesConfig,
};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A reproducible random stream: `seed` identifies the experiment, `stream`
/// the particle or path. Distinct streams are independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> RngStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// What a table inverts, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TableTag {
    /// Inverse of an exit-time CDF R.
    ExitTime,
    /// Inverse of the position-given-survival CDF S(t, .) at a fixed t.
    Position { t: f64 },
    Generic,
}

/// Tabulated inverse of a monotone CDF: quantile nodes joined by a monotone
/// cubic (Fritsch-Carlson) interpolant. Nodes are spaced uniformly in
/// probability over the core of the distribution; near each end of the
/// probability range the quantile function of a light-tailed law becomes
/// near-logarithmic, so the tails are tabulated uniformly in log-probability
/// instead, which is what keeps the round-trip invariant attainable there.
pub struct InverseCdfTable {
    pub tag: TableTag,
    segments: Vec<Segment>,
    u_range: (f64, f64),
    support: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SegCoord {
    /// w = u
    Linear,
    /// w = ln(u - u0)
    LogLower,
    /// w = -ln(u1 - u)
    LogUpper,
}

#[derive(Debug, Clone)]
struct Segment {
    coord: SegCoord,
    /// probability range covered, inclusive
    u_lo: f64,
    u_hi: f64,
    w0: f64,
    h: f64,
    xs: Vec<f64>,
    /// tangents dx/dw at the nodes
    ms: Vec<f64>,
}

impl std::fmt::Debug for InverseCdfTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InverseCdfTable")
            .field("tag", &self.tag)
            .field("segments", &self.segments.len())
            .field("support", &self.support)
            .finish()
    }
}

pub const DEFAULT_TABLE_GRID: usize = 2048;
const ROUND_TRIP_TOL: f64 = 1e-6;
/// fraction of the probability range handed to each log tail
const TAIL_FRACTION: f64 = 0.01;
/// log tails reach down to this fraction of the probability range
const TAIL_FLOOR: f64 = 1e-9;

/// Fritsch-Carlson tangents for a monotone increasing sequence on a uniform
/// grid with spacing h.
fn monotone_tangents(xs: &[f64], h: f64) -> Vec<f64> {
    let n = xs.len();
    let d: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]) / h).collect();
    let mut m = vec![0.0; n];
    // parabolic endpoint tangents, clamped to keep the cubic monotone
    m[0] = if n >= 3 {
        (1.5 * d[0] - 0.5 * d[1]).clamp(0.0_f64.min(3.0 * d[0]), 0.0_f64.max(3.0 * d[0]))
    } else {
        d[0]
    };
    m[n - 1] = if n >= 3 {
        (1.5 * d[n - 2] - 0.5 * d[n - 3])
            .clamp(0.0_f64.min(3.0 * d[n - 2]), 0.0_f64.max(3.0 * d[n - 2]))
    } else {
        d[n - 2]
    };
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            // harmonic mean keeps the cubic monotone
            m[i] = 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);
        }
    }
    for i in 0..n - 1 {
        if d[i] == 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
        } else {
            let a = m[i] / d[i];
            let b = m[i + 1] / d[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                m[i] = tau * a * d[i];
                m[i + 1] = tau * b * d[i];
            }
        }
    }
    m
}

/// Quantile by bisection against the exact CDF; `lo_bound` tightens the
/// bracket when quantiles are generated in increasing order.
fn quantile_bisect(cdf: &impl Fn(f64) -> f64, u: f64, lo_bound: f64, hi: f64) -> f64 {
    let (mut a, mut b) = (lo_bound, hi);
    for _ in 0..90 {
        let m = 0.5 * (a + b);
        if cdf(m) < u {
            a = m;
        } else {
            b = m;
        }
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    0.5 * (a + b)
}

/// Build the inverse of `cdf` on `support`, validating a round-trip bound of
/// 1e-6 on a 1e4-point probability grid.
pub fn build_inverse_cdf(
    cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    support: (f64, f64),
    n_grid: usize,
    tag: TableTag,
) -> Result<InverseCdfTable> {
    if n_grid < 2 || support.0 >= support.1 {
        return Err(WalkError::NonMonotoneInput(
            "need n_grid >= 2 and a nonempty support".into(),
        ));
    }
    let (lo, hi) = support;
    let u0 = cdf(lo);
    let u1 = cdf(hi);
    if !(u0 >= -1e-9 && u1 <= 1.0 + 1e-9 && u1 > u0) {
        return Err(WalkError::NonMonotoneInput(format!(
            "cdf range [{u0}, {u1}] on the given support"
        )));
    }
    let range = u1 - u0;
    // node probabilities per segment: log tails only when the budget allows
    let tail_n = if n_grid >= 512 { n_grid / 8 } else { 0 };
    let core_n = n_grid - 2 * tail_n;
    let (core_lo, core_hi) = if tail_n > 0 {
        (u0 + TAIL_FRACTION * range, u1 - TAIL_FRACTION * range)
    } else {
        (u0, u1)
    };
    let mut segment_specs: Vec<(SegCoord, Vec<f64>)> = Vec::new();
    if tail_n > 0 {
        let w_lo = (TAIL_FLOOR * range).ln();
        let w_hi = (TAIL_FRACTION * range).ln();
        let us: Vec<f64> = (0..tail_n)
            .map(|i| u0 + (w_lo + (w_hi - w_lo) * i as f64 / (tail_n - 1) as f64).exp())
            .collect();
        segment_specs.push((SegCoord::LogLower, us));
    }
    {
        let us: Vec<f64> = (0..core_n)
            .map(|i| core_lo + (core_hi - core_lo) * i as f64 / (core_n - 1) as f64)
            .collect();
        segment_specs.push((SegCoord::Linear, us));
    }
    if tail_n > 0 {
        let w_lo = -(TAIL_FRACTION * range).ln();
        let w_hi = -(TAIL_FLOOR * range).ln();
        let us: Vec<f64> = (0..tail_n)
            .map(|i| u1 - (-(w_lo + (w_hi - w_lo) * i as f64 / (tail_n - 1) as f64)).exp())
            .collect();
        segment_specs.push((SegCoord::LogUpper, us));
    }
    let mut segments = Vec::new();
    let mut prev_x = lo;
    for (coord, us) in segment_specs {
        let mut xs = Vec::with_capacity(us.len());
        for &u in &us {
            let x = if u <= u0 {
                lo
            } else if u >= u1 {
                hi
            } else {
                quantile_bisect(&cdf, u, prev_x, hi)
            };
            if x < prev_x {
                return Err(WalkError::NonMonotoneInput(
                    "tabulated quantiles are not increasing".into(),
                ));
            }
            prev_x = x;
            xs.push(x);
        }
        let to_w = |u: f64| match coord {
            SegCoord::Linear => u,
            SegCoord::LogLower => (u - u0).ln(),
            SegCoord::LogUpper => -(u1 - u).ln(),
        };
        let w_first = to_w(us[0]);
        let h = (to_w(*us.last().unwrap()) - w_first) / (us.len() - 1) as f64;
        let ms = monotone_tangents(&xs, h);
        segments.push(Segment {
            coord,
            u_lo: us[0],
            u_hi: *us.last().unwrap(),
            w0: w_first,
            h,
            xs,
            ms,
        });
    }
    let table = InverseCdfTable {
        tag,
        segments,
        u_range: (u0, u1),
        support,
    };
    for k in 0..10_000 {
        let u = u0 + range * (k as f64 + 0.5) / 10_000.0;
        let x = table.eval(u);
        if (cdf(x) - u).abs() > ROUND_TRIP_TOL {
            return Err(WalkError::NonMonotoneInput(format!(
                "round-trip error above {ROUND_TRIP_TOL} at u={u}"
            )));
        }
    }
    Ok(table)
}

impl InverseCdfTable {
    pub fn eval(&self, u: f64) -> f64 {
        let (u0, u1) = self.u_range;
        let u = u.clamp(u0, u1);
        let seg = self
            .segments
            .iter()
            .find(|s| u <= s.u_hi)
            .unwrap_or_else(|| self.segments.last().unwrap());
        if u <= seg.u_lo {
            // below the deepest tail node: clamp (mass below TAIL_FLOOR)
            return seg.xs[0];
        }
        let w = match seg.coord {
            SegCoord::Linear => u,
            SegCoord::LogLower => (u - u0).ln(),
            SegCoord::LogUpper => -(u1 - u).ln(),
        };
        let n = seg.xs.len();
        let s = ((w - seg.w0) / seg.h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let (x0, x1) = (seg.xs[i], seg.xs[i + 1]);
        let (m0, m1) = (seg.ms[i] * seg.h, seg.ms[i + 1] * seg.h);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * m1
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }
}

// ---------------------------------------------------------------------------
// Canonical driftless exit tables (hypercube fast path)
// ---------------------------------------------------------------------------

/// Number of cached position tables across time.
pub const POSITION_T_GRID: usize = 64;
/// Time range covered by the position-table cache (canonical units); beyond
/// it the law is indistinguishable from the leading eigenmode.
pub const POSITION_T_RANGE: (f64, f64) = (0.01, 20.0);

/// Tabulated laws for the driftless DD interval started at 0: the exit-time
/// CDF R, its inverse, and position-given-survival inverses S^{-1}(t, .)
/// cached on a geometric grid of 64 times.
pub struct ExitTables {
    cfg: SeriesConfig,
    channel: Channel,
    r_inv: InverseCdfTable,
    /// time beyond which R is treated as 1 for table purposes
    pub t_max: f64,
    t_grid: Vec<f64>,
    s_inv: Vec<InverseCdfTable>,
}

impl std::fmt::Debug for ExitTables {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExitTables")
            .field("t_max", &self.t_max)
            .field("position_tables", &self.t_grid.len())
            .finish()
    }
}

impl ExitTables {
    pub fn new(cfg: SeriesConfig) -> Result<ExitTables> {
        let channel = Channel::new(BoundaryPair::DD, 0.0)?;
        // R(25) is within 1e-12 of 1
        let t_max = 25.0;
        let ch = channel.clone();
        let c = cfg;
        let r_inv = build_inverse_cdf(
            move |t| {
                if t <= 0.0 {
                    0.0
                } else {
                    ch.exit_time_cdf(t, 0.0, &c, Branch::Auto).unwrap()
                }
            },
            (0.0, t_max),
            DEFAULT_TABLE_GRID,
            TableTag::ExitTime,
        )?;
        let (t_lo, t_hi) = POSITION_T_RANGE;
        let ratio = (t_hi / t_lo).powf(1.0 / (POSITION_T_GRID - 1) as f64);
        let mut t_grid = Vec::with_capacity(POSITION_T_GRID);
        let mut s_inv = Vec::with_capacity(POSITION_T_GRID);
        for k in 0..POSITION_T_GRID {
            let t = t_lo * ratio.powi(k as i32);
            t_grid.push(t);
            let c = cfg;
            s_inv.push(build_inverse_cdf(
                move |y| survival_position_cdf(t, y, &c).unwrap(),
                (-1.0, 1.0),
                DEFAULT_TABLE_GRID,
                TableTag::Position { t },
            )?);
        }
        Ok(ExitTables {
            cfg,
            channel,
            r_inv,
            t_max,
            t_grid,
            s_inv,
        })
    }

    /// Exit-time CDF R(t) from the center, evaluated by series (exact).
    pub fn r(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t >= self.t_max {
            1.0
        } else {
            self.channel
                .exit_time_cdf(t, 0.0, &self.cfg, Branch::Auto)
                .unwrap()
        }
    }

    /// Inverse exit-time CDF.
    pub fn r_inv(&self, u: f64) -> f64 {
        self.r_inv.eval(u.clamp(0.0, 1.0))
    }

    /// Position-given-survival density s(t, y), exact by series. This is the
    /// density of what `sample_position_given_survival` draws when handed the
    /// same t, so it belongs in weight denominators.
    pub fn position_density(&self, t: f64, y: f64) -> f64 {
        survival_position_density(t, y, &self.cfg).unwrap()
    }

    /// The cached table time nearest (geometrically) to t; proposals built
    /// from tables quote this time so weights stay exact.
    pub fn nearest_table_time(&self, t: f64) -> f64 {
        let (t_lo, t_hi) = POSITION_T_RANGE;
        let tc = t.clamp(t_lo, t_hi);
        let ratio = (t_hi / t_lo).powf(1.0 / (POSITION_T_GRID - 1) as f64);
        let k = ((tc / t_lo).ln() / ratio.ln()).round() as usize;
        self.t_grid[k.min(POSITION_T_GRID - 1)]
    }

    fn table_index(&self, t: f64) -> usize {
        self.t_grid
            .iter()
            .position(|&g| (g - t).abs() < 1e-12 * (1.0 + t))
            .expect("time was produced by nearest_table_time")
    }

    /// Draw from S(t_table, .) where t_table = nearest_table_time(t);
    /// returns (position, t_table).
    pub fn sample_position_tabulated(&self, t: f64, rng: &mut impl Rng) -> (f64, f64) {
        let tt = self.nearest_table_time(t);
        let u: f64 = rng.gen();
        (self.s_inv[self.table_index(tt)].eval(u), tt)
    }

    /// Exact draw from S(t, .) by bisection on the series CDF.
    pub fn sample_position_exact(&self, t: f64, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        let cfg = self.cfg;
        crate::util::invert_monotone(
            |y| survival_position_cdf(t, y, &cfg).unwrap(),
            u,
            -1.0,
            1.0,
        )
    }

    /// tau-bar = R^{-1}(1 - (1 - U beta)^{1/d}): a draw of the first of d
    /// independent exit clocks, conditioned to ring before `t_horizon`.
    pub fn sample_conditional_exit_time(
        &self,
        t_horizon: f64,
        d: usize,
        rng: &mut impl Rng,
    ) -> f64 {
        let beta = self.beta(t_horizon, d);
        let u: f64 = rng.gen();
        let v = 1.0 - (1.0 - u * beta).powf(1.0 / d as f64);
        self.r_inv(v)
    }

    /// beta = P[min of d exit clocks < T] = 1 - (1 - R(T))^d.
    pub fn beta(&self, t_horizon: f64, d: usize) -> f64 {
        if t_horizon.is_infinite() {
            1.0
        } else {
            1.0 - (1.0 - self.r(t_horizon)).powi(d as i32)
        }
    }
}

// ---------------------------------------------------------------------------
// Position-given-survival sampler (inversion and rejection branches)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PositionMethod {
    Inversion,
    Rejection,
    /// Rejection for t in [0.25, 2], inversion outside (the rejection
    /// envelope degrades for small t).
    Auto,
}

/// Prepared sampler for the density s(t, .) at a fixed time.
pub struct PositionSampler {
    pub t: f64,
    method: PositionMethod,
    cfg: SeriesConfig,
    /// inversion branch
    table: Option<InverseCdfTable>,
    /// rejection branch: envelope constant c with s(t,x) <= c (1 - |x|)
    envelope: f64,
    pub rejection_cap: usize,
}

impl PositionSampler {
    pub fn new(t: f64, method: PositionMethod, cfg: SeriesConfig) -> Result<PositionSampler> {
        assert!(t > 0.0);
        let use_rejection = match method {
            PositionMethod::Rejection => true,
            PositionMethod::Inversion => false,
            PositionMethod::Auto => (0.25..=2.0).contains(&t),
        };
        let mut table = None;
        let mut envelope = 0.0;
        if use_rejection {
            // empirical envelope over the triangular density, with headroom
            let mut c_max: f64 = 0.0;
            for k in 0..=400 {
                let x = -0.9999 + 1.9998 * k as f64 / 400.0;
                let ratio = survival_position_density(t, x, &cfg)? / (1.0 - x.abs());
                c_max = c_max.max(ratio);
            }
            envelope = c_max * 1.05;
        } else {
            table = Some(build_inverse_cdf(
                move |y| survival_position_cdf(t, y, &cfg).unwrap(),
                (-1.0, 1.0),
                DEFAULT_TABLE_GRID,
                TableTag::Position { t },
            )?);
        }
        Ok(PositionSampler {
            t,
            method: if use_rejection {
                PositionMethod::Rejection
            } else {
                PositionMethod::Inversion
            },
            cfg,
            table,
            envelope,
            rejection_cap: 10_000,
        })
    }

    pub fn branch(&self) -> PositionMethod {
        self.method
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if let Some(table) = &self.table {
            return table.eval(rng.gen());
        }
        for _ in 0..self.rejection_cap {
            let (x, chi) = sample_triangular(rng);
            let v: f64 = rng.gen();
            if v * self.envelope * chi <= survival_position_density(self.t, x, &self.cfg).unwrap()
            {
                return x;
            }
        }
        // cap reached: fall back to one-off exact inversion
        let u: f64 = rng.gen();
        let t = self.t;
        let cfg = self.cfg;
        crate::util::invert_monotone(
            |y| survival_position_cdf(t, y, &cfg).unwrap(),
            u,
            -1.0,
            1.0,
        )
    }
}

/// One-off draw from s(t, .). Hot loops should hold a [`PositionSampler`].
pub fn sample_position_given_survival(
    t: f64,
    rng: &mut impl Rng,
    method: PositionMethod,
    cfg: &SeriesConfig,
) -> Result<f64> {
    Ok(PositionSampler::new(t, method, *cfg)?.sample(rng))
}

/// Triangular density 1 - |x| on (-1, 1): returns (x, chi) where
/// chi = sqrt(U) = 1 - |x| is the density at the returned point.
pub fn sample_triangular(rng: &mut impl Rng) -> (f64, f64) {
    let chi = rng.gen::<f64>().sqrt();
    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    (sign * (1.0 - chi), chi)
}

/// Exponential proposal time with rate alpha (the suggested rate for an axis
/// of half-length L is 1/sqrt(L/2)).
pub fn sample_exponential_proposal(alpha: f64, rng: &mut impl Rng) -> f64 {
    assert!(alpha > 0.0);
    rng.sample::<f64, _>(rand_distr::Exp1) / alpha
}

/// Suggested exponential rate for an axis of half-length l.
pub fn exponential_rate_for_half_length(l: f64) -> f64 {
    1.0 / (l / 2.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::Moments;

    #[test]
    fn identity_table_on_uniform_cdf() {
        let t = build_inverse_cdf(|x| x, (0.0, 1.0), 64, TableTag::Generic).unwrap();
        for &u in &[0.0, 0.1, 0.37, 0.5, 0.93, 1.0] {
            assert!((t.eval(u) - u).abs() < 1e-12);
        }
    }

    #[test]
    fn coarse_grid_on_curved_cdf_is_rejected() {
        let r = build_inverse_cdf(|x| x * x, (0.0, 1.0), 2, TableTag::Generic);
        assert!(matches!(r, Err(WalkError::NonMonotoneInput(_))));
    }

    #[test]
    fn nonmonotone_cdf_is_rejected() {
        let r = build_inverse_cdf(|x: f64| -x, (0.0, 1.0), 32, TableTag::Generic);
        assert!(matches!(r, Err(WalkError::NonMonotoneInput(_))));
    }

    #[test]
    fn exit_time_median_matches_bisection() {
        let cfg = SeriesConfig::default();
        let tables = ExitTables::new(cfg).unwrap();
        let median = tables.r_inv(0.5);
        let oracle = crate::util::invert_monotone(|t| tables.r(t), 0.5, 1e-6, 25.0);
        assert!((median - oracle).abs() < 1e-6, "{median} {oracle}");
    }

    #[test]
    fn conditional_exit_time_stays_below_horizon() {
        let cfg = SeriesConfig::default();
        let tables = ExitTables::new(cfg).unwrap();
        let mut rng = RngStream::new(7, 0);
        for _ in 0..2000 {
            let t = tables.sample_conditional_exit_time(0.5, 2, &mut rng);
            assert!(t >= 0.0 && t <= 0.5 + 1e-9, "{t}");
        }
        // d=1, T=inf reduces to plain inversion of R
        let t = tables.sample_conditional_exit_time(f64::INFINITY, 1, &mut rng);
        assert!(t > 0.0 && t < 25.0);
    }

    #[test]
    fn triangular_moments() {
        let mut rng = RngStream::new(11, 0);
        let mut m = Moments::new();
        let mut inner = 0u64;
        let n = 200_000;
        for _ in 0..n {
            let (x, chi) = sample_triangular(&mut rng);
            assert!((chi - (1.0 - x.abs())).abs() < 1e-15);
            m.push(x);
            if x.abs() < 0.5 {
                inner += 1;
            }
        }
        assert!(m.mean.abs() < 3.0 * m.std_error());
        let p = inner as f64 / n as f64;
        assert!((p - 0.75).abs() < 3.0 * (0.75 * 0.25 / n as f64).sqrt());
    }

    #[test]
    fn exponential_proposal_mean() {
        let mut rng = RngStream::new(3, 5);
        let mut m = Moments::new();
        for _ in 0..200_000 {
            m.push(sample_exponential_proposal(2.0, &mut rng));
        }
        assert!((m.mean - 0.5).abs() < 3.0 * m.std_error(), "{}", m.mean);
        assert!((exponential_rate_for_half_length(2.0) - 1.0).abs() < 1e-15);
        assert!((exponential_rate_for_half_length(0.5) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn position_sampler_symmetry_both_branches() {
        let cfg = SeriesConfig::default();
        for (t, want) in [(1.0, PositionMethod::Rejection), (10.0, PositionMethod::Inversion)] {
            let s = PositionSampler::new(t, PositionMethod::Auto, cfg).unwrap();
            assert_eq!(s.branch(), want);
            let mut rng = RngStream::new(19, 1);
            let mut m = Moments::new();
            for _ in 0..50_000 {
                let x = s.sample(&mut rng);
                assert!(x.abs() < 1.0);
                m.push(x);
            }
            assert!(m.mean.abs() < 3.5 * m.std_error(), "t={t}: {}", m.mean);
        }
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let mut a = RngStream::new(42, 0);
        let mut b = RngStream::new(42, 1);
        let n = 1_000_000;
        let mut dot = 0.0;
        for _ in 0..n {
            let x = a.gen::<f64>() - 0.5;
            let y = b.gen::<f64>() - 0.5;
            dot += x * y;
        }
        // correlation of two independent U(-1/2,1/2) streams: sd of the dot
        // product is sqrt(n)/12
        let sd = (n as f64).sqrt() / 12.0;
        assert!(dot.abs() < 4.0 * sd, "dot={dot} sd={sd}");
    }
}
