//! Reference schemes: a plain Euler-Maruyama path with discrete first-exit
//! killing, the mixed Euler + walk-on-squares scheme with a repulsing change
//! of measure near the boundary, and a five-point finite-difference Laplace
//! solver used as the oracle for the harmonic-measure experiments.

use crate::boxstep::sample_survivor_position;
use crate::error::{Result, WalkError};
use crate::geometry::{Domain, SideLabel};
use crate::series1d::{BoundaryPair, Lane, SeriesConfig};
use crate::sampling::RngStream;
use crate::util::{gauss_legendre, Moments};
use rayon::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

/// Diffusion coefficient sigma(x) of the SDE dX = b dt + sigma(X) dB.
#[derive(Debug, Clone)]
pub enum SigmaField {
    Identity,
    Constant(Vec<Vec<f64>>),
    /// sigma(x) = [[1, sin(x1+x2)/2], [0, 1]]
    ShearSin,
}

impl SigmaField {
    /// sigma(x) * v
    pub fn apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        match self {
            SigmaField::Identity => v.to_vec(),
            SigmaField::Constant(m) => m
                .iter()
                .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
            SigmaField::ShearSin => {
                let s = 0.5 * (x[0] + x[1]).sin();
                vec![v[0] + s * v[1], v[1]]
            }
        }
    }

    /// diagonal of a(x) = sigma sigma*
    fn diag_sd(&self, x: &[f64], d: usize) -> Vec<f64> {
        match self {
            SigmaField::Identity => vec![1.0; d],
            SigmaField::Constant(m) => (0..d)
                .map(|i| m[i].iter().map(|a| a * a).sum::<f64>().sqrt())
                .collect(),
            SigmaField::ShearSin => {
                let s = 0.5 * (x[0] + x[1]).sin();
                vec![(1.0 + s * s).sqrt(), 1.0]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Sde {
    pub drift: Vec<f64>,
    pub sigma: SigmaField,
}

impl Sde {
    pub fn brownian(d: usize) -> Sde {
        Sde {
            drift: vec![0.0; d],
            sigma: SigmaField::Identity,
        }
    }
}

/// Mixed-scheme parameters. `p` is the proposal probability of the square
/// side opposite the boundary; the other three sides get q = (1-p)/3 each.
#[derive(Debug, Clone)]
pub struct EulerConfig {
    pub h: f64,
    /// half of the boundary-square side; the square regime triggers within 2l
    pub l: f64,
    pub p: f64,
    /// biased square steps per path before falling back to the true side law
    pub n_max: usize,
}

impl EulerConfig {
    pub fn q(&self) -> f64 {
        (1.0 - self.p) / 3.0
    }

    pub fn set_p1(mut self) -> EulerConfig {
        self.p = 0.7;
        self
    }

    pub fn set_p2(mut self) -> EulerConfig {
        self.p = 0.91;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.l > 0.0) {
            return Err(WalkError::Config("h and l must be positive".into()));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(WalkError::Config("p must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

impl Default for EulerConfig {
    fn default() -> EulerConfig {
        EulerConfig {
            h: 0.0025,
            l: 0.05,
            p: 0.7,
            n_max: 5,
        }
    }
}

/// Where a path ended.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub t: f64,
    pub x: Vec<f64>,
    /// true when the path reached the horizon without leaving the domain
    pub alive: bool,
    pub log_weight: f64,
    pub repulsion_uses: usize,
    /// one entry per biased square step
    pub use_weights: Vec<f64>,
}

fn inside(domain: &Domain, x: &[f64]) -> bool {
    domain.boxes.iter().any(|b| b.strictly_inside(x, 0.0))
}

/// Euler-Maruyama with discrete first-exit killing: the path stops on the
/// first iterate outside the domain, which overestimates the exit time by
/// O(sqrt(h)); no bridge correction is applied.
pub fn euler_path(
    sde: &Sde,
    domain: &Domain,
    t0: f64,
    x0: &[f64],
    horizon: f64,
    h: f64,
    rng: &mut impl Rng,
) -> PathOutcome {
    let d = x0.len();
    let mut t = t0;
    let mut x = x0.to_vec();
    while t < horizon {
        let dt = h.min(horizon - t);
        let g: Vec<f64> = (0..d)
            .map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let noise = sde.sigma.apply(&x, &g);
        for i in 0..d {
            x[i] += sde.drift[i] * dt + noise[i];
        }
        t += dt;
        if !inside(domain, &x) {
            return PathOutcome {
                t,
                x,
                alive: false,
                log_weight: 0.0,
                repulsion_uses: 0,
                use_weights: Vec::new(),
            };
        }
    }
    PathOutcome {
        t,
        x,
        alive: true,
        log_weight: 0.0,
        repulsion_uses: 0,
        use_weights: Vec::new(),
    }
}

/// Distance from x to the global boundary, with the nearest face:
/// (distance, axis, eta, face coordinate). Faces labeled interior and face
/// points covered by a neighbouring box are not boundary.
pub fn boundary_distance(domain: &Domain, x: &[f64]) -> Option<(f64, usize, i8, f64)> {
    let d = x.len();
    let mut best: Option<(f64, usize, i8, f64)> = None;
    for (bi, b) in domain.boxes.iter().enumerate() {
        for axis in 0..d {
            for eta in [-1i8, 1] {
                if b.label(axis, eta) == SideLabel::Interior {
                    continue;
                }
                let f = b.center[axis] + eta as f64 * b.half_lengths[axis];
                let mut nearest = vec![0.0; d];
                for j in 0..d {
                    nearest[j] = if j == axis {
                        f
                    } else {
                        x[j].clamp(
                            b.center[j] - b.half_lengths[j],
                            b.center[j] + b.half_lengths[j],
                        )
                    };
                }
                // covered by another box: locally an interior interface
                if domain
                    .boxes
                    .iter()
                    .enumerate()
                    .any(|(bj, o)| bj != bi && o.strictly_inside(&nearest, 1e-12))
                {
                    continue;
                }
                let dist = x
                    .iter()
                    .zip(&nearest)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if best.is_none_or(|(bd, ..)| dist < bd) {
                    best = Some((dist, axis, eta, f));
                }
            }
        }
    }
    best
}

/// Outcome of one walk-on-squares step next to the boundary.
#[derive(Debug, Clone)]
pub struct SquareExit {
    pub t: f64,
    pub x: Vec<f64>,
    pub weight: f64,
    /// true if the exit side lies on the domain boundary (the path is killed)
    pub hit_boundary: bool,
    /// whether the repulsing proposal was applied (weight != 1 possible)
    pub biased: bool,
}

/// One exit from a 2l-square with one side on the boundary face
/// (axis, eta, face coordinate). The side is drawn from the repulsing
/// proposal (probability p on the side opposite the boundary, q elsewhere)
/// and carries the weight (true conditional side probability)/(proposal);
/// with `biased` off the true side law is used and the weight is one. The
/// exit time and position given the side follow the true law. Returns None
/// when the square cannot be placed (too close to a corner, or the particle
/// is not inside the 2l band).
///
/// The diffusion is frozen at the current point and reduced per axis by the
/// diagonal of a = sigma sigma*; the off-diagonal correlation is dropped on
/// square steps (the Euler steps away from the boundary carry the full
/// matrix).
#[allow(clippy::too_many_arguments)]
pub fn boundary_square_step(
    sde: &Sde,
    domain: &Domain,
    t: f64,
    x: &[f64],
    horizon: f64,
    face: (usize, i8, f64),
    cfg: &EulerConfig,
    biased: bool,
    series: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<Option<SquareExit>> {
    let d = x.len();
    if d != 2 {
        return Err(WalkError::Config("square steps are 2-d only".into()));
    }
    let (axis, eta, f) = face;
    let l = cfg.l;
    let depth = (f - x[axis]) * eta as f64; // distance to the face
    if depth <= 0.0 || depth >= 2.0 * l {
        return Ok(None);
    }
    let tan = 1 - axis;
    let mut center = vec![0.0; 2];
    center[axis] = f - eta as f64 * l;
    center[tan] = x[tan];
    // the square must fit in the domain: probe its corners just inside
    let eps = 1e-9 * l;
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            let mut corner = center.clone();
            corner[axis] += s1 * (l - eps);
            corner[tan] += s2 * (l - eps);
            if !inside(domain, &corner) {
                return Ok(None);
            }
        }
    }
    let sd = sde.sigma.diag_sd(x, 2);
    let half = [l / sd[0], l / sd[1]];
    let start = [
        (x[0] - center[0]) / sd[0],
        (x[1] - center[1]) / sd[1],
    ];
    let lanes = [
        Lane::new(BoundaryPair::DD, sde.drift[0] / sd[0], half[0])?,
        Lane::new(BoundaryPair::DD, sde.drift[1] / sd[1], half[1])?,
    ];
    let h_left = horizon - t;
    if !(h_left > 0.0) {
        return Ok(None);
    }
    // joint side probabilities by quadrature of h_{i,eta}(s) S_other(s)
    let t_cap = h_left.min(40.0 * half[0].max(half[1]).powi(2));
    let n_q = 64;
    let (gx, gw) = gauss_legendre(n_q);
    let mut grid_t = Vec::with_capacity(n_q);
    let mut dens = [
        Vec::with_capacity(n_q),
        Vec::with_capacity(n_q),
        Vec::with_capacity(n_q),
        Vec::with_capacity(n_q),
    ];
    // side order: (axis0,-), (axis0,+), (axis1,-), (axis1,+)
    for k in 0..n_q {
        let s = 0.5 * t_cap * (gx[k] + 1.0);
        grid_t.push(s);
        for (i, lane) in lanes.iter().enumerate() {
            let other = lanes[1 - i].survival(s, start[1 - i], series)?.value();
            for (ei, e) in [-1i8, 1].into_iter().enumerate() {
                let hh = lane.one_sided_exit_density(e, s, start[i], series)?.value();
                dens[2 * i + ei].push(hh * other);
            }
        }
    }
    let mut p_side = [0.0f64; 4];
    for si in 0..4 {
        p_side[si] = dens[si]
            .iter()
            .zip(&gw)
            .map(|(v, w)| v * w)
            .sum::<f64>()
            * 0.5
            * t_cap;
    }
    let p_horizon = if t_cap < h_left {
        // the survival beyond the cap is below the quadrature error
        0.0
    } else {
        lanes[0].survival(h_left, start[0], series)?.value()
            * lanes[1].survival(h_left, start[1], series)?.value()
    };
    let total = p_side.iter().sum::<f64>() + p_horizon;
    if !(total > 0.0) {
        return Err(WalkError::NonConvergence {
            context: "square-step side probabilities",
        });
    }
    if rng.gen::<f64>() < p_horizon / total {
        let mut y = [0.0; 2];
        for i in 0..2 {
            y[i] = sample_survivor_position(&lanes[i], h_left, start[i], series, rng)?;
        }
        return Ok(Some(SquareExit {
            t: horizon,
            x: vec![center[0] + sd[0] * y[0], center[1] + sd[1] * y[1]],
            weight: 1.0,
            hit_boundary: false,
            biased: false,
        }));
    }
    let cond: Vec<f64> = p_side.iter().map(|p| p / (total - p_horizon)).collect();
    // side index of the boundary face and of the opposite side
    let bnd_si = 2 * axis + usize::from(eta > 0);
    let opp_si = 2 * axis + usize::from(eta <= 0);
    let (si, weight) = if biased {
        let prop: Vec<f64> = (0..4)
            .map(|s| if s == opp_si { cfg.p } else { cfg.q() })
            .collect();
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut si = 3;
        for (k, pr) in prop.iter().enumerate() {
            acc += pr;
            if u <= acc {
                si = k;
                break;
            }
        }
        (si, cond[si] / prop[si])
    } else {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut si = 3;
        for (k, pr) in cond.iter().enumerate() {
            acc += pr;
            if u <= acc {
                si = k;
                break;
            }
        }
        (si, 1.0)
    };
    // exit time given the side: invert the tabulated conditional CDF
    let mut cum = Vec::with_capacity(n_q);
    let mut acc = 0.0;
    for k in 0..n_q {
        acc += dens[si][k] * gw[k];
        cum.push(acc);
    }
    let target = rng.gen::<f64>() * acc;
    let k = cum.partition_point(|&c| c < target).min(n_q - 1);
    let (c_lo, t_lo) = if k == 0 {
        (0.0, 0.0)
    } else {
        (cum[k - 1], grid_t[k - 1])
    };
    let frac = if cum[k] > c_lo {
        (target - c_lo) / (cum[k] - c_lo)
    } else {
        0.5
    };
    let tau = t_lo + frac * (grid_t[k] - t_lo);
    let exit_axis = si / 2;
    let exit_eta = if si % 2 == 0 { -1.0 } else { 1.0 };
    let mut y = [0.0; 2];
    y[exit_axis] = exit_eta * half[exit_axis];
    y[1 - exit_axis] =
        sample_survivor_position(&lanes[1 - exit_axis], tau, start[1 - exit_axis], series, rng)?;
    Ok(Some(SquareExit {
        t: t + tau,
        x: vec![center[0] + sd[0] * y[0], center[1] + sd[1] * y[1]],
        weight,
        hit_boundary: si == bnd_si,
        biased,
    }))
}

/// Mixed scheme: Euler steps away from the boundary, repulsed square steps
/// within 2l of it. The weight product corrects the repulsion bias; after
/// `n_max` biased steps the true side law takes over.
pub fn mixed_step_scheme(
    sde: &Sde,
    domain: &Domain,
    t0: f64,
    x0: &[f64],
    horizon: f64,
    cfg: &EulerConfig,
    series: &SeriesConfig,
    rng: &mut impl Rng,
) -> Result<PathOutcome> {
    cfg.validate()?;
    let mut t = t0;
    let mut x = x0.to_vec();
    let mut log_w = 0.0;
    let mut uses = 0usize;
    let mut use_weights = Vec::new();
    loop {
        if t >= horizon {
            break;
        }
        if !inside(domain, &x) {
            return Ok(PathOutcome {
                t,
                x,
                alive: false,
                log_weight: log_w,
                repulsion_uses: uses,
                use_weights,
            });
        }
        let near = boundary_distance(domain, &x).filter(|&(dist, ..)| dist < 2.0 * cfg.l);
        if let Some((_, axis, eta, f)) = near {
            let bias = uses < cfg.n_max;
            if let Some(exit) = boundary_square_step(
                sde,
                domain,
                t,
                &x,
                horizon,
                (axis, eta, f),
                cfg,
                bias,
                series,
                rng,
            )? {
                t = exit.t;
                x = exit.x;
                if exit.biased {
                    uses += 1;
                    use_weights.push(exit.weight);
                    log_w += exit.weight.ln();
                }
                if exit.hit_boundary {
                    return Ok(PathOutcome {
                        t,
                        x,
                        alive: false,
                        log_weight: log_w,
                        repulsion_uses: uses,
                        use_weights,
                    });
                }
                continue;
            }
        }
        let out = euler_one_step(sde, t, &x, horizon, cfg.h, rng);
        t = out.0;
        x = out.1;
    }
    Ok(PathOutcome {
        t,
        x,
        alive: true,
        log_weight: log_w,
        repulsion_uses: uses,
        use_weights,
    })
}

fn euler_one_step(
    sde: &Sde,
    t: f64,
    x: &[f64],
    horizon: f64,
    h: f64,
    rng: &mut impl Rng,
) -> (f64, Vec<f64>) {
    let d = x.len();
    let dt = h.min(horizon - t);
    let g: Vec<f64> = (0..d)
        .map(|_| dt.sqrt() * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let noise = sde.sigma.apply(x, &g);
    let mut nx = x.to_vec();
    for i in 0..d {
        nx[i] += sde.drift[i] * dt + noise[i];
    }
    (t + dt, nx)
}

// ---------------------------------------------------------------------------
// Finite-difference Laplace solver (2-d, axis-aligned polygons)
// ---------------------------------------------------------------------------

/// Grid solution of (1/2) lap u = 0 with the domain's Dirichlet data, on the
/// union of the domain's boxes rasterized at spacing `hgrid`.
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
    values: Vec<f64>,
    interior: Vec<bool>,
}

impl FdSolution {
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Bilinear interpolation of the grid solution.
    pub fn query(&self, x: &[f64]) -> f64 {
        let fx = ((x[0] - self.x0) / self.h).clamp(0.0, (self.nx - 1) as f64 - 1e-12);
        let fy = ((x[1] - self.y0) / self.h).clamp(0.0, (self.ny - 1) as f64 - 1e-12);
        let (i, j) = (fx as usize, fy as usize);
        let (ax, ay) = (fx - i as f64, fy - j as f64);
        let v = |i, j| self.values[self.idx(i, j)];
        (1.0 - ax) * (1.0 - ay) * v(i, j)
            + ax * (1.0 - ay) * v(i + 1, j)
            + (1.0 - ax) * ay * v(i, j + 1)
            + ax * ay * v(i + 1, j + 1)
    }

    pub fn grid_csv(&self) -> String {
        let mut s = String::from("x,y,u\n");
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.interior[self.idx(i, j)] {
                    s.push_str(&format!(
                        "{},{},{}\n",
                        self.x0 + i as f64 * self.h,
                        self.y0 + j as f64 * self.h,
                        self.values[self.idx(i, j)]
                    ));
                }
            }
        }
        s
    }
}

/// Solve the Laplace/Dirichlet problem on the rasterized domain with the
/// five-point stencil and SOR. Boundary nodes take the domain's Dirichlet
/// data; second-order accurate when the boxes are grid-aligned.
pub fn fd_laplace_solve(domain: &Domain, hgrid: f64) -> Result<FdSolution> {
    if domain.dim() != 2 {
        return Err(WalkError::Config("FD solver is 2-d only".into()));
    }
    if !(hgrid > 0.0) {
        return Err(WalkError::Config("grid spacing must be positive".into()));
    }
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_lo, mut y_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for b in &domain.boxes {
        x_lo = x_lo.min(b.center[0] - b.half_lengths[0]);
        x_hi = x_hi.max(b.center[0] + b.half_lengths[0]);
        y_lo = y_lo.min(b.center[1] - b.half_lengths[1]);
        y_hi = y_hi.max(b.center[1] + b.half_lengths[1]);
    }
    let nx = ((x_hi - x_lo) / hgrid).round() as usize + 1;
    let ny = ((y_hi - y_lo) / hgrid).round() as usize + 1;
    if nx * ny > 40_000_000 {
        return Err(WalkError::Config("FD grid too large".into()));
    }
    let tol = 1e-9 * hgrid;
    let mut interior = vec![false; nx * ny];
    let mut values = vec![0.0; nx * ny];
    let mut closure = vec![false; nx * ny];
    for j in 0..ny {
        for i in 0..nx {
            let p = [x_lo + i as f64 * hgrid, y_lo + j as f64 * hgrid];
            let k = j * nx + i;
            interior[k] = domain.boxes.iter().any(|b| b.strictly_inside(&p, tol));
            closure[k] = domain.boxes.iter().any(|b| b.contains_closure(&p, tol));
            if closure[k] && !interior[k] {
                values[k] = domain.dirichlet.eval(&p);
            }
        }
    }
    let omega = 2.0 / (1.0 + (std::f64::consts::PI / nx.max(ny) as f64).sin());
    let max_sweeps = 40 * nx.max(ny);
    for _ in 0..max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let k = j * nx + i;
                if !interior[k] {
                    continue;
                }
                let s = values[k - 1] + values[k + 1] + values[k - nx] + values[k + nx];
                let delta = omega * (0.25 * s - values[k]);
                values[k] += delta;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < 1e-14 {
            break;
        }
    }
    Ok(FdSolution {
        x0: x_lo,
        y0: y_lo,
        h: hgrid,
        nx,
        ny,
        values,
        interior,
    })
}


/// Tallies of one mixed-scheme batch: raw landing counts, weighted category
/// estimators (mean of w * indicator), per-use and whole-path weight moments.
pub struct MixedBatchStats {
    pub sim: std::collections::BTreeMap<String, usize>,
    pub est: std::collections::BTreeMap<String, Moments>,
    pub use_w: Moments,
    pub global_w: Moments,
}

/// Which absorbing face a finished path landed on ("x0-", "x1+", ...), or
/// "alive" when it reached the horizon inside the domain.
pub fn landing_category(domain: &Domain, out: &PathOutcome) -> String {
    if out.alive {
        return "alive".to_string();
    }
    match boundary_distance(domain, &out.x) {
        Some((_, axis, eta, _)) => format!("x{axis}{}", if eta > 0 { "+" } else { "-" }),
        None => "alive".to_string(),
    }
}

/// Run `n` mixed-scheme paths on their own RNG streams (offset by `base`)
/// and tally them per category. The categories list fixes which indicator
/// estimators are tracked.
#[allow(clippy::too_many_arguments)]
pub fn run_mixed_batch(
    sde: &Sde,
    domain: &Domain,
    start: &[f64],
    horizon: f64,
    cfg: &EulerConfig,
    series: &SeriesConfig,
    n: usize,
    seed: u64,
    base: u64,
    categories: &[&str],
) -> Result<MixedBatchStats> {
    const CHUNK: usize = 512;
    (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| -> Result<MixedBatchStats> {
            let mut s = MixedBatchStats {
                sim: Default::default(),
                est: Default::default(),
                use_w: Moments::new(),
                global_w: Moments::new(),
            };
            for i in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let mut rng = RngStream::new(seed, base + i as u64);
                let out = mixed_step_scheme(sde, domain, 0.0, start, horizon, cfg, series, &mut rng)?;
                let cat = landing_category(domain, &out);
                let w = out.log_weight.exp();
                *s.sim.entry(cat.clone()).or_default() += 1;
                for c in categories {
                    s.est
                        .entry(c.to_string())
                        .or_insert_with(Moments::new)
                        .push(if *c == cat { w } else { 0.0 });
                }
                s.global_w.push(w);
                for uw in out.use_weights {
                    s.use_w.push(uw);
                }
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .reduce(|mut acc, s| {
            for (k, v) in s.sim {
                *acc.sim.entry(k).or_default() += v;
            }
            for (k, v) in s.est {
                acc.est.entry(k).or_insert_with(Moments::new).merge(&v);
            }
            acc.use_w.merge(&s.use_w);
            acc.global_w.merge(&s.global_w);
            acc
        })
        .ok_or(WalkError::Config("n must be at least 1".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{ExitTables, RngStream};
    use crate::util::Moments;

    fn unit_square(dirichlet: &str) -> Domain {
        Domain::from_json(&format!(
            r#"{{
            "boxes": [{{"center": [0.0, 0.0], "half_lengths": [1.0, 1.0]}}],
            "dirichlet": {dirichlet}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn euler_zero_diffusion_is_deterministic() {
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde {
            drift: vec![2.0, 0.0],
            sigma: SigmaField::Constant(vec![vec![0.0, 0.0], vec![0.0, 0.0]]),
        };
        let mut rng = RngStream::new(1, 0);
        let out = euler_path(&sde, &dom, 0.0, &[0.0, 0.0], 10.0, 0.01, &mut rng);
        assert!(!out.alive);
        // straight line at speed 2 exits x=1 at t=0.5, within one step
        assert!((out.t - 0.5).abs() <= 0.01 + 1e-12, "{}", out.t);
        assert!((out.x[0] - 1.0).abs() <= 0.02);
    }

    #[test]
    fn euler_survival_matches_series() {
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde::brownian(2);
        let mut rng = RngStream::new(2, 0);
        let n = 20_000;
        let h = 0.002;
        let mut alive = 0u64;
        for _ in 0..n {
            if euler_path(&sde, &dom, 0.0, &[0.0, 0.0], 0.4, h, &mut rng).alive {
                alive += 1;
            }
        }
        let surv = 1.0 - ExitTables::new(SeriesConfig::default()).unwrap().r(0.4);
        let p = surv * surv;
        let phat = alive as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        // discrete killing overestimates survival by O(sqrt(h))
        let bias = 2.0 * h.sqrt();
        assert!(
            phat >= p - 3.0 * se && phat <= p + bias + 3.0 * se,
            "{phat} vs {p} (+{bias})"
        );
    }

    #[test]
    fn euler_shear_sin_smoke() {
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde {
            drift: vec![0.0, 0.0],
            sigma: SigmaField::ShearSin,
        };
        let mut rng = RngStream::new(3, 0);
        for _ in 0..200 {
            let out = euler_path(&sde, &dom, 0.0, &[0.2, -0.1], 1.0, 0.005, &mut rng);
            assert!(out.t <= 1.0 + 1e-12);
            assert!(out.x.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn boundary_distance_picks_exposed_faces() {
        let dom = Domain::from_json(
            r#"{
            "boxes": [
                {"center": [0.0, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x0+": "interior"}},
                {"center": [1.5, 0.0], "half_lengths": [1.0, 1.0],
                 "sides": {"x0-": "interior"}}
            ]
        }"#,
        )
        .unwrap();
        // near the interior interface x=1 but far from real boundary
        let (dist, axis, eta, f) = boundary_distance(&dom, &[0.9, 0.0]).unwrap();
        assert!((dist - 1.0).abs() < 1e-12, "{dist}");
        assert!(axis == 1 || (axis == 0 && eta == -1 && f == -1.0));
    }

    #[test]
    fn centered_square_uniform_proposal_has_unit_weight() {
        // particle at the square center: the true conditional side law is
        // uniform, so p = 1/4 reduces to the plain scheme
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde::brownian(2);
        let cfg = EulerConfig {
            p: 0.25,
            ..EulerConfig::default()
        };
        let series = SeriesConfig::default();
        let mut rng = RngStream::new(5, 0);
        for _ in 0..200 {
            let exit = boundary_square_step(
                &sde,
                &dom,
                0.0,
                &[0.0, 1.0 - cfg.l],
                10.0,
                (1, 1, 1.0),
                &cfg,
                true,
                &series,
                &mut rng,
            )
            .unwrap()
            .unwrap();
            assert!((exit.weight - 1.0).abs() < 1e-6, "{}", exit.weight);
        }
    }

    #[test]
    fn per_use_weight_variance_at_entry_depth() {
        // entry at 1.76 l from the wall (just inside the 2l band)
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde::brownian(2);
        let series = SeriesConfig::default();
        for (p, lo, hi) in [(0.7, 0.028, 0.052), (0.91, 0.24, 0.44)] {
            let cfg = EulerConfig {
                p,
                ..EulerConfig::default()
            };
            let mut rng = RngStream::new(6, 0);
            let mut m = Moments::new();
            for _ in 0..40_000 {
                let exit = boundary_square_step(
                    &sde,
                    &dom,
                    0.0,
                    &[0.0, 1.0 - 1.76 * cfg.l],
                    10.0,
                    (1, 1, 1.0),
                    &cfg,
                    true,
                    &series,
                    &mut rng,
                )
                .unwrap()
                .unwrap();
                m.push(exit.weight);
            }
            assert!((m.mean - 1.0).abs() < 4.0 * m.std_error(), "p={p}: {}", m.mean);
            let v = m.variance();
            assert!(v > lo && v < hi, "p={p}: var {v}");
        }
    }

    #[test]
    fn mixed_scheme_repulses_and_reweights() {
        let dom = unit_square(r#"{"type": "zero"}"#);
        let sde = Sde::brownian(2);
        let series = SeriesConfig::default();
        let horizon = 0.3;
        let n = 4000;
        let run = |p: f64, seed: u64| {
            let cfg = EulerConfig {
                p,
                n_max: 10,
                ..EulerConfig::default()
            };
            let mut rng = RngStream::new(seed, 0);
            let mut sim_alive = 0u64;
            let mut est_alive = Moments::new();
            for _ in 0..n {
                let out =
                    mixed_step_scheme(&sde, &dom, 0.0, &[0.0, 0.0], horizon, &cfg, &series, &mut rng)
                        .unwrap();
                sim_alive += out.alive as u64;
                est_alive.push(if out.alive { out.log_weight.exp() } else { 0.0 });
            }
            (sim_alive as f64 / n as f64, est_alive)
        };
        let (sim_plain, est_plain) = run(0.25, 7);
        let (sim_rep, est_rep) = run(0.7, 8);
        // repulsion raises the raw surviving fraction
        assert!(sim_rep > sim_plain, "{sim_rep} vs {sim_plain}");
        // while the weighted estimates agree
        let se = (est_plain.std_error().powi(2) + est_rep.std_error().powi(2)).sqrt();
        assert!(
            (est_plain.mean - est_rep.mean).abs() < 3.5 * se,
            "{} vs {} (se {se})",
            est_plain.mean,
            est_rep.mean
        );
    }

    #[test]
    fn fd_square_symmetry_and_linearity() {
        // one hot side out of four: the center value is 1/4
        let dom = unit_square(r#"{"type": "indicator", "axis": 0, "threshold": 0.999999}"#);
        let sol = fd_laplace_solve(&dom, 1.0 / 32.0).unwrap();
        assert!((sol.query(&[0.0, 0.0]) - 0.25).abs() < 2e-3, "{}", sol.query(&[0.0, 0.0]));

        // linear data: x0 is discretely harmonic, reproduced to solver tol
        let dom = unit_square(r#"{"type": "coordinate", "axis": 0}"#);
        let sol = fd_laplace_solve(&dom, 1.0 / 32.0).unwrap();
        for p in [[0.25, 0.5], [-0.5, -0.25], [0.125, 0.0]] {
            assert!((sol.query(&p) - p[0]).abs() < 1e-8, "{:?}", p);
        }
    }

    #[test]
    fn fd_grid_refinement_is_second_order() {
        let dom = Domain::from_json(
            r#"{
            "boxes": [
                {"center": [1.0, 1.0], "half_lengths": [1.0, 1.0]},
                {"center": [2.2, 1.0], "half_lengths": [0.4, 0.1],
                 "sides": {"x0-": "interior"}}
            ],
            "dirichlet": {"type": "indicator", "axis": 0, "threshold": 2.599}
        }"#,
        )
        .unwrap();
        let q = [1.0, 1.0];
        let u1 = fd_laplace_solve(&dom, 0.05).unwrap().query(&q);
        let u2 = fd_laplace_solve(&dom, 0.025).unwrap().query(&q);
        let u3 = fd_laplace_solve(&dom, 0.0125).unwrap().query(&q);
        let ratio = (u1 - u2).abs() / (u2 - u3).abs();
        assert!(ratio > 2.5 && ratio < 6.0, "ratio {ratio} ({u1} {u2} {u3})");
    }
}
