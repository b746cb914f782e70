//! Transition densities, exit-time laws and eigenfunction expansions for the
//! one-dimensional Brownian motion (with constant drift) on the canonical
//! interval [-1, 1], killed or reflected at the endpoints.
//!
//! Every density has two series representations: the method of images, which
//! converges quickly for small times, and a spectral expansion, efficient for
//! large times. The crossover is configurable via [`SeriesConfig`]. All sums
//! are accumulated in scaled form so that log-densities stay meaningful far
//! below the `f64` underflow threshold.

use crate::error::{Result, WalkError};
use crate::util::{bisect, Scaled, ScaledSum};
use std::f64::consts::PI;
use std::sync::Arc;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Boundary condition at one endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    Dirichlet,
    Neumann,
}

/// Boundary conditions at -1 (left) and +1 (right).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryPair {
    pub left: Bc,
    pub right: Bc,
}

impl BoundaryPair {
    pub const DD: BoundaryPair = BoundaryPair {
        left: Bc::Dirichlet,
        right: Bc::Dirichlet,
    };
    pub const NN: BoundaryPair = BoundaryPair {
        left: Bc::Neumann,
        right: Bc::Neumann,
    };
    /// Killed at -1, reflected at +1.
    pub const DN: BoundaryPair = BoundaryPair {
        left: Bc::Dirichlet,
        right: Bc::Neumann,
    };
    /// Reflected at -1, killed at +1.
    pub const ND: BoundaryPair = BoundaryPair {
        left: Bc::Neumann,
        right: Bc::Dirichlet,
    };

    pub fn has_dirichlet(&self) -> bool {
        self.left == Bc::Dirichlet || self.right == Bc::Dirichlet
    }

    pub fn is_mixed(&self) -> bool {
        self.left != self.right
    }
}

/// Series evaluation controls.
///
/// `crossover_time` is in the dimensionless time of the canonical interval;
/// below it the images representation is used, above it the spectral one.
#[derive(Debug, Clone, Copy)]
pub struct SeriesConfig {
    pub crossover_time: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            crossover_time: 0.3,
            rel_tol: 1e-12,
            max_terms: 256,
        }
    }
}

/// Which series representation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Auto,
    Images,
    Spectral,
}

/// A transition-density query on the canonical interval.
#[derive(Debug, Clone, Copy)]
pub struct DensityQuery {
    pub bc: BoundaryPair,
    pub mu: f64,
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
}

fn ln_erfc(z: f64) -> f64 {
    if z < 25.0 {
        libm::erfc(z).ln()
    } else {
        // asymptotic expansion, |error| < 1e-16 for z > 25
        let z2 = z * z;
        -z2 - (z * PI.sqrt()).ln() + (1.0 - 0.5 / z2 + 0.75 / (z2 * z2)).ln_1p()
    }
}

/// erfc(a) - erfc(b) for a < b, avoiding cancellation when both are near 2.
fn erfc_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if b <= 0.0 {
        libm::erfc(-b) - libm::erfc(-a)
    } else if a >= 0.0 {
        libm::erfc(a) - libm::erfc(b)
    } else {
        2.0 - libm::erfc(-a) - libm::erfc(b)
    }
}

/// Iterate n = 0, 1, -1, 2, -2, ... feeding signed scaled terms into `sum`,
/// stopping after two consecutive indices contribute below `rel_tol`.
fn sum_images(
    cfg: &SeriesConfig,
    mut term: impl FnMut(i64, &mut ScaledSum),
    context: &'static str,
) -> Result<Scaled> {
    let mut sum = ScaledSum::new();
    let mut small_streak = 0usize;
    let mut saw_decay = false;
    for k in 0..cfg.max_terms {
        let n = if k == 0 {
            0
        } else if k % 2 == 1 {
            ((k + 1) / 2) as i64
        } else {
            -((k / 2) as i64)
        };
        let mut probe = ScaledSum::new();
        term(n, &mut probe);
        let contribution = probe.total();
        let before = sum.total();
        sum.add(contribution.mantissa, contribution.log_scale);
        let rel = if contribution.mantissa == 0.0 {
            0.0
        } else if before.mantissa == 0.0 {
            1.0
        } else {
            let d = contribution.log_scale - before.log_scale;
            if d < -700.0 {
                0.0
            } else {
                (contribution.mantissa * d.exp() / before.mantissa).abs()
            }
        };
        if k > 0 && rel < cfg.rel_tol {
            small_streak += 1;
            // an exactly-zero term may be a trig node rather than decay; it
            // only proves convergence after a small nonzero term, or after a
            // run far longer than any node pattern produces
            if contribution.mantissa != 0.0 {
                saw_decay = true;
            }
            if (small_streak >= 4 && saw_decay) || small_streak >= 16 {
                return Ok(sum.total());
            }
        } else {
            small_streak = 0;
            saw_decay = false;
        }
    }
    Err(WalkError::NonConvergence { context })
}

/// Sum terms indexed n = start, start+1, ... with the same stopping rule.
fn sum_forward(
    cfg: &SeriesConfig,
    start: i64,
    mut term: impl FnMut(i64, &mut ScaledSum),
    context: &'static str,
) -> Result<Scaled> {
    let mut sum = ScaledSum::new();
    let mut small_streak = 0usize;
    for k in 0..cfg.max_terms {
        let n = start + k as i64;
        let mut probe = ScaledSum::new();
        term(n, &mut probe);
        let contribution = probe.total();
        let before = sum.total();
        sum.add(contribution.mantissa, contribution.log_scale);
        // Convergence is judged on the envelope, not the realized term: the
        // log_scale carries the decaying exponent, while the mantissa may sit
        // on a trig node (e.g. cos(n pi/2) ~ 1e-17) without the tail being
        // small. All callers have coefficients bounded by max(|n|, 1).
        let rel = if contribution.mantissa == 0.0 {
            // the closure skipped this index entirely (exact-zero coefficient)
            0.0
        } else if before.mantissa == 0.0 {
            1.0
        } else {
            let bound = contribution
                .mantissa
                .abs()
                .max(n.unsigned_abs() as f64)
                .max(1.0);
            let d = contribution.log_scale - before.log_scale;
            if d < -700.0 {
                0.0
            } else {
                (bound * d.exp() / before.mantissa).abs()
            }
        };
        if k > 0 && rel < cfg.rel_tol {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(sum.total());
            }
        } else {
            small_streak = 0;
        }
    }
    Err(WalkError::NonConvergence { context })
}

// ---------------------------------------------------------------------------
// Driftless densities on [-1, 1]
// ---------------------------------------------------------------------------

fn p_nn0(t: f64, x1: f64, x2: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let pref = 1.0 / (SQRT_2PI * t.sqrt());
        let s = sum_images(
            cfg,
            |n, acc| {
                let a = x1 - x2 + 4.0 * n as f64;
                let b = x1 + x2 + 4.0 * n as f64 + 2.0;
                acc.add(1.0, -a * a / (2.0 * t));
                acc.add(1.0, -b * b / (2.0 * t));
            },
            "p_nn images",
        )?;
        Ok(s.scale_by(pref))
    } else {
        sum_forward(
            cfg,
            0,
            |n, acc| {
                if n == 0 {
                    acc.add(0.5, 0.0);
                } else {
                    let nf = n as f64;
                    let c = (nf * PI / 2.0 * (x1 + 1.0)).cos() * (nf * PI / 2.0 * (x2 + 1.0)).cos();
                    acc.add(c, -nf * nf * PI * PI * t / 8.0);
                }
            },
            "p_nn spectral",
        )
    }
}

fn p_dd0(t: f64, x1: f64, x2: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let pref = 1.0 / (SQRT_2PI * t.sqrt());
        let s = sum_images(
            cfg,
            |n, acc| {
                let a = x1 - x2 + 4.0 * n as f64;
                let b = x1 + x2 + 4.0 * n as f64 + 2.0;
                acc.add(1.0, -a * a / (2.0 * t));
                acc.add(-1.0, -b * b / (2.0 * t));
            },
            "p_dd images",
        )?;
        Ok(s.scale_by(pref))
    } else {
        sum_forward(
            cfg,
            1,
            |n, acc| {
                let nf = n as f64;
                let c = (nf * PI / 2.0 * (x1 + 1.0)).sin() * (nf * PI / 2.0 * (x2 + 1.0)).sin();
                acc.add(c, -nf * nf * PI * PI * t / 8.0);
            },
            "p_dd spectral",
        )
    }
}

fn p_dn0(t: f64, x1: f64, x2: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let pref = 1.0 / (SQRT_2PI * t.sqrt());
        let s = sum_images(
            cfg,
            |n, acc| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let a = x1 - x2 + 4.0 * n as f64;
                let b = x1 + x2 + 4.0 * n as f64 + 2.0;
                acc.add(sign, -a * a / (2.0 * t));
                acc.add(-sign, -b * b / (2.0 * t));
            },
            "p_dn images",
        )?;
        Ok(s.scale_by(pref))
    } else {
        sum_forward(
            cfg,
            0,
            |n, acc| {
                let k = (2 * n + 1) as f64;
                let c = (k * PI / 4.0 * (x1 + 1.0)).sin() * (k * PI / 4.0 * (x2 + 1.0)).sin();
                acc.add(c, -k * k * PI * PI * t / 32.0);
            },
            "p_dn spectral",
        )
    }
}

/// One-sided exit density for the driftless DD interval: the (defective)
/// density of tau on the event that +1 is hit first.
fn h_plus0(t: f64, x1: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let pref = 1.0 / (SQRT_2PI * t * t.sqrt());
        let s = sum_images(
            cfg,
            |n, acc| {
                let y = 4.0 * n as f64 + 1.0 - x1;
                acc.add(y, -y * y / (2.0 * t));
            },
            "h_plus images",
        )?;
        Ok(s.scale_by(pref))
    } else {
        let s = sum_forward(
            cfg,
            1,
            |n, acc| {
                let nf = n as f64;
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                let c = sign * nf * (nf * PI / 2.0 * (x1 + 1.0)).sin();
                acc.add(c, -nf * nf * PI * PI * t / 8.0);
            },
            "h_plus spectral",
        )?;
        Ok(s.scale_by(PI / 4.0))
    }
}

fn q_dn0(t: f64, x1: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let pref = 1.0 / (SQRT_2PI * t * t.sqrt());
        let s = sum_images(
            cfg,
            |n, acc| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let y = x1 + 4.0 * n as f64 + 1.0;
                acc.add(sign * y, -y * y / (2.0 * t));
            },
            "q_dn images",
        )?;
        Ok(s.scale_by(pref))
    } else {
        let s = sum_forward(
            cfg,
            0,
            |n, acc| {
                let k = (2 * n + 1) as f64;
                let c = k * (k * PI / 4.0 * (x1 + 1.0)).sin();
                acc.add(c, -k * k * PI * PI * t / 32.0);
            },
            "q_dn spectral",
        )?;
        Ok(s.scale_by(PI / 8.0))
    }
}

/// P[tau_DN <= t] for the driftless mixed interval (killed at -1).
fn r_dn0(t: f64, x1: f64, cfg: &SeriesConfig, branch: Branch) -> Result<f64> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let s = sum_images(
            cfg,
            |n, acc| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let y = x1 + 4.0 * n as f64 + 1.0;
                let v = y.signum() * libm::erfc(y.abs() / (2.0 * t).sqrt());
                acc.add(sign * v, 0.0);
            },
            "r_dn images",
        )?;
        Ok(s.value().clamp(0.0, 1.0))
    } else {
        let s = sum_forward(
            cfg,
            0,
            |n, acc| {
                let k = (2 * n + 1) as f64;
                let c = 4.0 / (k * PI) * (k * PI / 4.0 * (x1 + 1.0)).sin();
                acc.add(c, -k * k * PI * PI * t / 32.0);
            },
            "r_dn spectral",
        )?;
        Ok((1.0 - s.value()).clamp(0.0, 1.0))
    }
}

/// P[tau_DD^mu <= t] on [-1,1] with drift mu (mu may be zero).
fn r_dd(t: f64, x1: f64, mu: f64, cfg: &SeriesConfig, branch: Branch) -> Result<f64> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    let st = (2.0 * t).sqrt();
    if images {
        let s1 = sum_images(
            cfg,
            |n, acc| {
                let base = x1 + mu * t + 4.0 * n as f64;
                let d = erfc_diff((base - 1.0) / st, (base + 1.0) / st);
                acc.add(d, 4.0 * mu * n as f64);
            },
            "r_dd images (a)",
        )?;
        let s2 = sum_images(
            cfg,
            |n, acc| {
                let base = x1 - mu * t + 4.0 * n as f64;
                let d = erfc_diff((base + 1.0) / st, (base + 3.0) / st);
                acc.add(d, -(2.0 * mu * x1 + mu * (4.0 * n as f64 + 2.0)));
            },
            "r_dd images (b)",
        )?;
        Ok((1.0 - 0.5 * s1.value() + 0.5 * s2.value()).clamp(0.0, 1.0))
    } else {
        let s = sum_forward(
            cfg,
            1,
            |n, acc| {
                let nf = n as f64;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let c = ((-mu).exp() - sign * mu.exp()) * 2.0 * nf * PI
                    / (4.0 * mu * mu + nf * nf * PI * PI)
                    * (nf * PI / 2.0 * (x1 + 1.0)).sin();
                acc.add(c, -nf * nf * PI * PI * t / 8.0);
            },
            "r_dd spectral",
        )?;
        let surv = s.scale_by_log(-mu * x1 - mu * mu * t / 2.0);
        Ok((1.0 - surv.value()).clamp(0.0, 1.0))
    }
}

// ---------------------------------------------------------------------------
// Drifted reflected (NN) density
// ---------------------------------------------------------------------------

/// Stationary density of the reflected drifted Brownian motion on [-1,1].
fn nn_stationary(mu: f64, x2: f64) -> f64 {
    if mu.abs() < 1e-8 {
        // 2mu e^{2mu x2} / (e^{2mu} - e^{-2mu}) -> 1/2 as mu -> 0
        0.5 * (1.0 + 2.0 * mu * x2)
    } else {
        mu * (2.0 * mu * x2).exp() / (2.0 * mu).sinh()
    }
}

/// Drifted reflected density; the images representation requires mu >= 0,
/// callers mirror for mu < 0.
fn p_nn_mu(t: f64, x1: f64, x2: f64, mu: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    if mu.abs() < 1e-8 {
        return p_nn0(t, x1, x2, cfg, branch);
    }
    if mu < 0.0 {
        return p_nn_mu(t, -x1, -x2, -mu, cfg, branch);
    }
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    if images {
        let mut sum = ScaledSum::new();
        sum.add(nn_stationary(mu, x2), 0.0);
        let gpref = -(SQRT_2PI * t.sqrt()).ln();
        let s1 = sum_images(
            cfg,
            |n, acc| {
                let a = x1 - x2 + mu * t + 4.0 * n as f64;
                acc.add(1.0, 4.0 * mu * n as f64 - a * a / (2.0 * t) + gpref);
            },
            "p_nn_mu images (a)",
        )?;
        sum.add(s1.mantissa, s1.log_scale);
        let s2 = sum_images(
            cfg,
            |n, acc| {
                let b = x1 + x2 - mu * t + 4.0 * n as f64 + 2.0;
                acc.add(
                    1.0,
                    -2.0 * mu * x1 - mu * (4.0 * n as f64 + 2.0) - b * b / (2.0 * t) + gpref,
                );
            },
            "p_nn_mu images (b)",
        )?;
        sum.add(s2.mantissa, s2.log_scale);
        let s3 = sum_images(
            cfg,
            |n, acc| {
                let z = (x1 + x2 + mu * t + 4.0 * n as f64 + 2.0) / (2.0 * t).sqrt();
                let le = if z > -30.0 {
                    ln_erfc(z)
                } else {
                    2.0f64.ln()
                };
                acc.add(-1.0, 2.0 * mu * x2 + mu * (4.0 * n as f64 + 2.0) + le + mu.ln());
            },
            "p_nn_mu images (erfc tail)",
        )?;
        sum.add(s3.mantissa, s3.log_scale);
        Ok(sum.total())
    } else {
        let mut sum = ScaledSum::new();
        sum.add(nn_stationary(mu, x2), 0.0);
        let lg = mu * (x2 - x1) - mu * mu * t / 2.0;
        let s = sum_forward(
            cfg,
            1,
            |n, acc| {
                let nf = n as f64;
                let a1 = nf * PI / 2.0 * (x1 + 1.0);
                let a2 = nf * PI / 2.0 * (x2 + 1.0);
                let f1 = nf * PI / 2.0 * a1.cos() + mu * a1.sin();
                let f2 = nf * PI / 2.0 * a2.cos() + mu * a2.sin();
                let c = f1 * f2 / (mu * mu + nf * nf * PI * PI / 4.0);
                acc.add(c, -nf * nf * PI * PI * t / 8.0);
            },
            "p_nn_mu spectral",
        )?;
        sum.add(s.mantissa, s.log_scale + lg);
        Ok(sum.total())
    }
}

// ---------------------------------------------------------------------------
// Dirichlet/Neumann eigensystem for nonzero drift
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModeShape {
    /// e^{-mu x} sin(omega (x+1))
    Trig { omega: f64 },
    /// e^{-mu x} sinh(kappa (x+1)), only for mu > 1/2
    Hyper { kappa: f64 },
    /// e^{-x/2} (x+1), the degenerate leading mode at mu = 1/2
    Linear,
}

/// One mode of the Dirichlet(-1)/Neumann(+1) eigenproblem
/// (1/2) psi'' + mu psi' = lambda psi, psi(-1) = 0, psi'(1) = 0.
#[derive(Debug, Clone)]
pub struct EigenMode {
    pub lambda: f64,
    shape: ModeShape,
    amplitude: f64,
    /// integral of psi(x) e^{2 mu x} dx over [-1, 1]
    pub weighted_integral: f64,
}

impl EigenMode {
    /// integral of psi(x) e^{2 mu x} dx over [-1, y]
    pub fn weighted_integral_to(&self, mu: f64, y: f64) -> f64 {
        let raw = match self.shape {
            ModeShape::Trig { omega } => {
                let f = |x: f64| {
                    (mu * x).exp() * (mu * (omega * (x + 1.0)).sin() - omega * (omega * (x + 1.0)).cos())
                        / (mu * mu + omega * omega)
                };
                f(y) - f(-1.0)
            }
            ModeShape::Hyper { kappa } => {
                let f = |x: f64| {
                    (mu * x).exp()
                        * (mu * (kappa * (x + 1.0)).sinh() - kappa * (kappa * (x + 1.0)).cosh())
                        / (mu * mu - kappa * kappa)
                };
                f(y) - f(-1.0)
            }
            ModeShape::Linear => {
                let f = |x: f64| (0.5 * x).exp() * (2.0 * x - 2.0);
                f(y) - f(-1.0)
            }
        };
        self.amplitude * raw
    }

    pub fn psi(&self, mu: f64, x: f64) -> f64 {
        let shape = match self.shape {
            ModeShape::Trig { omega } => (-mu * x).exp() * (omega * (x + 1.0)).sin(),
            ModeShape::Hyper { kappa } => (-mu * x).exp() * (kappa * (x + 1.0)).sinh(),
            ModeShape::Linear => (-0.5 * x).exp() * (x + 1.0),
        };
        self.amplitude * shape
    }
}

/// Eigenvalues and eigenfunctions for the drifted mixed-boundary interval,
/// normalized against the weight e^{2 mu x}, ordered by decreasing lambda.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub mu: f64,
    pub modes: Vec<EigenMode>,
}

const MU_HALF_TOL: f64 = 1e-8;

fn trig_mode(mu: f64, omega: f64) -> EigenMode {
    let lambda = -(mu * mu + omega * omega) / 2.0;
    let norm2 = 1.0 - (4.0 * omega).sin() / (4.0 * omega);
    let amplitude = 1.0 / norm2.sqrt();
    // integral of e^{mu x} sin(omega (x+1)) dx over [-1, 1]
    let raw = (-mu).exp()
        * ((2.0 * mu).exp() * (mu * (2.0 * omega).sin() - omega * (2.0 * omega).cos()) + omega)
        / (mu * mu + omega * omega);
    EigenMode {
        lambda,
        shape: ModeShape::Trig { omega },
        amplitude,
        weighted_integral: amplitude * raw,
    }
}

fn hyper_mode(mu: f64, kappa: f64) -> EigenMode {
    let lambda = (kappa * kappa - mu * mu) / 2.0;
    let norm2 = (4.0 * kappa).sinh() / (4.0 * kappa) - 1.0;
    let amplitude = 1.0 / norm2.sqrt();
    let raw = (-mu).exp()
        * ((2.0 * mu).exp() * (mu * (2.0 * kappa).sinh() - kappa * (2.0 * kappa).cosh()) + kappa)
        / (mu * mu - kappa * kappa);
    EigenMode {
        lambda,
        shape: ModeShape::Hyper { kappa },
        amplitude,
        weighted_integral: amplitude * raw,
    }
}

fn linear_mode() -> EigenMode {
    let amplitude = (3.0f64 / 8.0).sqrt();
    EigenMode {
        lambda: -0.125,
        shape: ModeShape::Linear,
        amplitude,
        // integral of e^{x/2} (x+1) dx over [-1, 1] = 4 e^{-1/2}
        weighted_integral: amplitude * 4.0 * (-0.5f64).exp(),
    }
}

/// Solve the mixed-boundary eigenproblem for drift `mu`, returning the
/// leading `n_modes` modes.
pub fn dn_eigensystem(mu: f64, n_modes: usize) -> Result<EigenSystem> {
    assert!(n_modes >= 1);
    let mut modes: Vec<EigenMode> = Vec::new();
    let at_half = (mu - 0.5).abs() < MU_HALF_TOL;
    if at_half {
        modes.push(linear_mode());
    } else if mu > 0.5 {
        // single hyperbolic root of kappa cosh(2 kappa) = mu sinh(2 kappa) in (0, mu)
        let g = |k: f64| k * (2.0 * k).cosh() - mu * (2.0 * k).sinh();
        let mut a = 1e-12;
        // refine the lower bracket: g < 0 just above zero
        while g(a) >= 0.0 && a < mu {
            a *= 10.0;
        }
        let root = bisect(g, a, mu).ok_or(WalkError::RootBracketFailure {
            mu,
            found: 0,
            wanted: n_modes,
        })?;
        modes.push(hyper_mode(mu, root));
    }
    // trigonometric roots of omega cos(2 omega) = mu sin(2 omega)
    let f = |w: f64| w * (2.0 * w).cos() - mu * (2.0 * w).sin();
    let omega_max = (n_modes as f64 + 4.0) * PI / 2.0;
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    if (mu - 0.5).abs() < 0.02 && mu < 0.5 - MU_HALF_TOL {
        // the leading root collapses toward zero as mu -> 1/2; scan densely
        let est = ((1.0 - 2.0 * mu) / (2.0 - 4.0 * mu / 3.0)).sqrt();
        let hi = (20.0 * est).min(0.5);
        let steps = 4000;
        let mut prev = 1e-14;
        let mut fprev = f(prev);
        for i in 1..=steps {
            let w = hi * i as f64 / steps as f64;
            let fw = f(w);
            if fprev.signum() != fw.signum() {
                brackets.push((prev, w));
            }
            prev = w;
            fprev = fw;
        }
    }
    {
        let start = brackets.last().map(|b| b.1).unwrap_or(1e-9);
        let steps = (omega_max / 0.002) as usize;
        let mut prev = start;
        let mut fprev = f(prev);
        for i in 1..=steps {
            let w = start + (omega_max - start) * i as f64 / steps as f64;
            let fw = f(w);
            if fprev.signum() != fw.signum() {
                brackets.push((prev, w));
            }
            prev = w;
            fprev = fw;
        }
    }
    for (a, b) in brackets {
        if let Some(w) = bisect(f, a, b) {
            if w > 1e-12 {
                modes.push(trig_mode(mu, w));
            }
        }
    }
    modes.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap());
    modes.dedup_by(|a, b| (a.lambda - b.lambda).abs() < 1e-12);
    if modes.len() < n_modes {
        return Err(WalkError::RootBracketFailure {
            mu,
            found: modes.len(),
            wanted: n_modes,
        });
    }
    modes.truncate(n_modes);
    Ok(EigenSystem { mu, modes })
}

impl EigenSystem {
    /// Transition density p(t, x1, x2) = sum e^{lambda t} psi(x1) psi(x2) e^{2 mu x2}.
    pub fn transition_density(&self, t: f64, x1: f64, x2: f64) -> Scaled {
        let mut s = ScaledSum::new();
        let w = (2.0 * self.mu * x2).exp();
        for m in &self.modes {
            s.add(m.psi(self.mu, x1) * m.psi(self.mu, x2) * w, m.lambda * t);
        }
        s.total()
    }

    /// Exit-time density q(t, x1) = -sum lambda e^{lambda t} psi(x1) c_k.
    pub fn exit_time_density(&self, t: f64, x1: f64) -> Scaled {
        let mut s = ScaledSum::new();
        for m in &self.modes {
            s.add(-m.lambda * m.psi(self.mu, x1) * m.weighted_integral, m.lambda * t);
        }
        s.total()
    }

    /// Survival probability P[tau > t].
    pub fn survival(&self, t: f64, x1: f64) -> Scaled {
        let mut s = ScaledSum::new();
        for m in &self.modes {
            s.add(m.psi(self.mu, x1) * m.weighted_integral, m.lambda * t);
        }
        s.total()
    }

    /// P[X_t <= y, tau > t] = sum e^{lambda t} psi(x1) int_{-1}^y psi e^{2 mu x}.
    pub fn position_cdf(&self, t: f64, x1: f64, y: f64) -> Scaled {
        let mut s = ScaledSum::new();
        for m in &self.modes {
            s.add(
                m.psi(self.mu, x1) * m.weighted_integral_to(self.mu, y),
                m.lambda * t,
            );
        }
        s.total()
    }

    /// Whether the series is adequately converged at time t: the last
    /// retained mode must be negligible against the leading one.
    pub fn converged_at(&self, t: f64, rel_tol: f64) -> bool {
        match (self.modes.first(), self.modes.last()) {
            (Some(a), Some(b)) => (b.lambda - a.lambda) * t < rel_tol.ln(),
            _ => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Sub-survival position CDFs: P[X_t <= y, tau > t]
// ---------------------------------------------------------------------------

/// DD with drift; termwise integration of the images/spectral series.
fn position_cdf_dd(
    t: f64,
    x1: f64,
    y: f64,
    mu: f64,
    cfg: &SeriesConfig,
    branch: Branch,
) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    let st = (2.0 * t).sqrt();
    if images {
        sum_images(
            cfg,
            |n, acc| {
                let c = x1 + 4.0 * n as f64;
                let d = 0.5 * erfc_diff((-1.0 - c - mu * t) / st, (y - c - mu * t) / st);
                acc.add(d, 4.0 * mu * n as f64);
                let r = -(x1 + 4.0 * n as f64 + 2.0);
                let d = 0.5 * erfc_diff((-1.0 - r - mu * t) / st, (y - r - mu * t) / st);
                acc.add(-d, -mu * (2.0 * x1 + 4.0 * n as f64 + 2.0));
            },
            "position cdf dd images",
        )
    } else {
        let s = sum_forward(
            cfg,
            1,
            |n, acc| {
                let w = n as f64 * PI / 2.0;
                let g = (mu * y).exp() * (mu * (w * (y + 1.0)).sin() - w * (w * (y + 1.0)).cos())
                    / (mu * mu + w * w)
                    + (-mu).exp() * w / (mu * mu + w * w);
                acc.add(
                    (w * (x1 + 1.0)).sin() * g,
                    -(n * n) as f64 * PI * PI * t / 8.0,
                );
            },
            "position cdf dd spectral",
        )?;
        Ok(s.scale_by_log(-mu * x1 - mu * mu * t / 2.0))
    }
}

/// Driftless DN (killed at -1, reflected at +1).
fn position_cdf_dn0(t: f64, x1: f64, y: f64, cfg: &SeriesConfig, branch: Branch) -> Result<Scaled> {
    let images = matches!(branch, Branch::Images) || (branch == Branch::Auto && t < cfg.crossover_time);
    let st = (2.0 * t).sqrt();
    if images {
        sum_images(
            cfg,
            |n, acc| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let c = x1 + 4.0 * n as f64;
                let d = 0.5 * erfc_diff((-1.0 - c) / st, (y - c) / st);
                acc.add(sign * d, 0.0);
                let r = -(x1 + 4.0 * n as f64 + 2.0);
                let d = 0.5 * erfc_diff((-1.0 - r) / st, (y - r) / st);
                acc.add(-sign * d, 0.0);
            },
            "position cdf dn images",
        )
    } else {
        sum_forward(
            cfg,
            0,
            |n, acc| {
                let k = (2 * n + 1) as f64;
                let c = (k * PI / 4.0 * (x1 + 1.0)).sin() * 4.0 / (k * PI)
                    * (1.0 - (k * PI / 4.0 * (y + 1.0)).cos());
                acc.add(c, -k * k * PI * PI * t / 32.0);
            },
            "position cdf dn spectral",
        )
    }
}

// ---------------------------------------------------------------------------
// Scale function and Doob-conditioned laws
// ---------------------------------------------------------------------------

/// Probability that the drifted Brownian motion started at `x` in [-L, L]
/// (both ends absorbing) hits +L before -L.
pub fn scale_function(mu: f64, l: f64, x: f64) -> f64 {
    let a = 2.0 * mu * l;
    if a.abs() < 1e-6 {
        // series expansion of (e^{2muL} - e^{-2mux}) / (e^{2muL} - e^{-2muL})
        let u = x / l;
        let phi0 = (u + 1.0) / 2.0;
        // first-order correction in a: phi = phi0 + a (1 - u^2)/4 + O(a^2)
        (phi0 + a * (1.0 - u * u) / 4.0).clamp(0.0, 1.0)
    } else {
        // (e^{2muL} - e^{-2mux}) / (e^{2muL} - e^{-2muL})
        //   = expm1(-2mu(x+L)) / expm1(-4muL), stable for large |2muL|
        let r = (-2.0 * mu * (x + l)).exp_m1() / (-4.0 * mu * l).exp_m1();
        r.clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Channel: a fully-specified canonical 1D law
// ---------------------------------------------------------------------------

/// A one-dimensional boundary-value channel on the canonical interval [-1, 1]
/// with constant drift. Mixed boundaries with drift carry their eigensystem,
/// built once and shared.
#[derive(Debug, Clone)]
pub struct Channel {
    pub bc: BoundaryPair,
    pub mu: f64,
    /// For DN with drift: eigensystem at mu. For ND with drift: eigensystem
    /// at -mu (the mirrored problem).
    eigen: Option<Arc<EigenSystem>>,
}

pub const DEFAULT_EIGEN_MODES: usize = 64;

impl Channel {
    pub fn new(bc: BoundaryPair, mu: f64) -> Result<Channel> {
        let eigen = if bc.is_mixed() && mu.abs() >= 1e-12 {
            let sys_mu = if bc == BoundaryPair::DN { mu } else { -mu };
            Some(Arc::new(dn_eigensystem(sys_mu, DEFAULT_EIGEN_MODES)?))
        } else {
            None
        };
        Ok(Channel { bc, mu, eigen })
    }

    pub fn eigen(&self) -> Option<&EigenSystem> {
        self.eigen.as_deref()
    }

    fn mirrored(&self) -> bool {
        self.bc == BoundaryPair::ND
    }

    /// Transition density p(t, x1, x2), as a scaled value.
    pub fn transition_density(
        &self,
        t: f64,
        x1: f64,
        x2: f64,
        cfg: &SeriesConfig,
        branch: Branch,
    ) -> Result<Scaled> {
        debug_assert!(t > 0.0 && x1.abs() <= 1.0 + 1e-12 && x2.abs() <= 1.0 + 1e-12);
        match self.bc {
            BoundaryPair::NN => p_nn_mu(t, x1, x2, self.mu, cfg, branch),
            BoundaryPair::DD => {
                let base = p_dd0(t, x1, x2, cfg, branch)?;
                Ok(base.scale_by_log(self.mu * (x2 - x1) - self.mu * self.mu * t / 2.0))
            }
            BoundaryPair::DN | BoundaryPair::ND => {
                let (y1, y2) = if self.mirrored() { (-x1, -x2) } else { (x1, x2) };
                if let Some(sys) = &self.eigen {
                    if !sys.converged_at(t, cfg.rel_tol.max(1e-14)) && t < 0.02 {
                        return Err(WalkError::NonConvergence {
                            context: "p_dn drifted eigen series at small t",
                        });
                    }
                    Ok(sys.transition_density(t, y1, y2))
                } else {
                    p_dn0(t, y1, y2, cfg, branch)
                }
            }
        }
    }

    /// Exit-time density q(t, x1). Requires at least one Dirichlet side.
    pub fn exit_time_density(
        &self,
        t: f64,
        x1: f64,
        cfg: &SeriesConfig,
        branch: Branch,
    ) -> Result<Scaled> {
        match self.bc {
            BoundaryPair::NN => Err(WalkError::InvalidBoundary(
                "NN interval has no lateral exit",
            )),
            BoundaryPair::DD => {
                let hp = self.one_sided_exit_density(1, t, x1, cfg, branch)?;
                let hm = self.one_sided_exit_density(-1, t, x1, cfg, branch)?;
                let mut s = ScaledSum::new();
                s.add(hp.mantissa, hp.log_scale);
                s.add(hm.mantissa, hm.log_scale);
                Ok(s.total())
            }
            BoundaryPair::DN | BoundaryPair::ND => {
                let y1 = if self.mirrored() { -x1 } else { x1 };
                if let Some(sys) = &self.eigen {
                    if t < 0.02 && !sys.converged_at(t, cfg.rel_tol.max(1e-14)) {
                        return Err(WalkError::NonConvergence {
                            context: "q_dn drifted eigen series at small t",
                        });
                    }
                    Ok(sys.exit_time_density(t, y1))
                } else {
                    q_dn0(t, y1, cfg, branch)
                }
            }
        }
    }

    /// Defective exit density at side `side` (+1 or -1): the density of
    /// (tau in dt, exit through that side). DD only.
    pub fn one_sided_exit_density(
        &self,
        side: i8,
        t: f64,
        x1: f64,
        cfg: &SeriesConfig,
        branch: Branch,
    ) -> Result<Scaled> {
        if self.bc != BoundaryPair::DD {
            return Err(WalkError::InvalidBoundary(
                "one-sided exit density requires Dirichlet at both ends",
            ));
        }
        let h0 = if side >= 0 {
            h_plus0(t, x1, cfg, branch)?
        } else {
            h_plus0(t, -x1, cfg, branch)?
        };
        let endpoint = if side >= 0 { 1.0 } else { -1.0 };
        Ok(h0.scale_by_log(self.mu * (endpoint - x1) - self.mu * self.mu * t / 2.0))
    }

    /// P[tau <= t].
    pub fn exit_time_cdf(&self, t: f64, x1: f64, cfg: &SeriesConfig, branch: Branch) -> Result<f64> {
        match self.bc {
            BoundaryPair::NN => Err(WalkError::InvalidBoundary(
                "NN interval has no lateral exit",
            )),
            BoundaryPair::DD => {
                if x1.abs() >= 1.0 - 1e-14 {
                    return Ok(1.0);
                }
                r_dd(t, x1, self.mu, cfg, branch)
            }
            BoundaryPair::DN | BoundaryPair::ND => {
                let y1 = if self.mirrored() { -x1 } else { x1 };
                if y1 <= -1.0 + 1e-14 {
                    return Ok(1.0);
                }
                if let Some(sys) = &self.eigen {
                    if t < 0.02 && !sys.converged_at(t, cfg.rel_tol.max(1e-14)) {
                        return Err(WalkError::NonConvergence {
                            context: "r_dn drifted eigen series at small t",
                        });
                    }
                    Ok((1.0 - sys.survival(t, y1).value()).clamp(0.0, 1.0))
                } else {
                    r_dn0(t, y1, cfg, branch)
                }
            }
        }
    }

    /// P[tau > t], in scaled form (useful deep in the tail).
    pub fn survival(&self, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        match self.bc {
            BoundaryPair::NN => Ok(Scaled::from_value(1.0)),
            BoundaryPair::DD => {
                if t < cfg.crossover_time {
                    Ok(Scaled::from_value(1.0 - r_dd(t, x1, self.mu, cfg, Branch::Images)?))
                } else {
                    let mu = self.mu;
                    let s = sum_forward(
                        cfg,
                        1,
                        |n, acc| {
                            let nf = n as f64;
                            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                            let c = ((-mu).exp() - sign * mu.exp()) * 2.0 * nf * PI
                                / (4.0 * mu * mu + nf * nf * PI * PI)
                                * (nf * PI / 2.0 * (x1 + 1.0)).sin();
                            acc.add(c, -nf * nf * PI * PI * t / 8.0);
                        },
                        "dd survival spectral",
                    )?;
                    Ok(s.scale_by_log(-mu * x1 - mu * mu * t / 2.0))
                }
            }
            BoundaryPair::DN | BoundaryPair::ND => {
                let y1 = if self.mirrored() { -x1 } else { x1 };
                if let Some(sys) = &self.eigen {
                    Ok(sys.survival(t, y1))
                } else if t < cfg.crossover_time {
                    Ok(Scaled::from_value(1.0 - r_dn0(t, y1, cfg, Branch::Images)?))
                } else {
                    let s = sum_forward(
                        cfg,
                        0,
                        |n, acc| {
                            let k = (2 * n + 1) as f64;
                            let c = 4.0 / (k * PI) * (k * PI / 4.0 * (y1 + 1.0)).sin();
                            acc.add(c, -k * k * PI * PI * t / 32.0);
                        },
                        "dn survival spectral",
                    )?;
                    Ok(s)
                }
            }
        }
    }

    /// Sub-survival position CDF P[X_t <= y, tau > t], in scaled form.
    /// Evaluates to the survival probability at y = 1. NN channels fall back
    /// to quadrature of the transition density.
    pub fn position_cdf(&self, t: f64, x1: f64, y: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        if y <= -1.0 {
            return Ok(Scaled::ZERO);
        }
        if y >= 1.0 {
            return self.survival(t, x1, cfg);
        }
        match self.bc {
            BoundaryPair::DD => position_cdf_dd(t, x1, y, self.mu, cfg, Branch::Auto),
            BoundaryPair::NN => {
                let mass = crate::util::integrate_gl(
                    |x2| {
                        self.transition_density(t, x1, x2, cfg, Branch::Auto)
                            .map(|s| s.value())
                            .unwrap_or(0.0)
                    },
                    -1.0,
                    y,
                    96,
                );
                Ok(Scaled::from_value(mass))
            }
            BoundaryPair::DN => {
                if let Some(sys) = &self.eigen {
                    Ok(sys.position_cdf(t, x1, y))
                } else {
                    position_cdf_dn0(t, x1, y, cfg, Branch::Auto)
                }
            }
            BoundaryPair::ND => {
                // P[X <= y] = P[tau > t] - P[-X <= -y] in the mirrored DN law
                let surv = self.survival(t, x1, cfg)?;
                let mirror = if let Some(sys) = &self.eigen {
                    sys.position_cdf(t, -x1, -y)
                } else {
                    position_cdf_dn0(t, -x1, -y, cfg, Branch::Auto)?
                };
                let mut s = ScaledSum::new();
                s.add(surv.mantissa, surv.log_scale);
                s.add(-mirror.mantissa, mirror.log_scale);
                Ok(s.total())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Convenience wrappers over the canonical channel
// ---------------------------------------------------------------------------

/// Transition density for a one-off query (builds the eigensystem on demand
/// for drifted mixed boundaries; hot paths should hold a [`Channel`]).
pub fn transition_density(q: &DensityQuery, cfg: &SeriesConfig) -> Result<f64> {
    let ch = Channel::new(q.bc, q.mu)?;
    Ok(ch.transition_density(q.t, q.x1, q.x2, cfg, Branch::Auto)?.value())
}

pub fn exit_time_density(bc: BoundaryPair, mu: f64, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<f64> {
    let ch = Channel::new(bc, mu)?;
    Ok(ch.exit_time_density(t, x1, cfg, Branch::Auto)?.value())
}

pub fn exit_time_cdf(bc: BoundaryPair, mu: f64, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<f64> {
    let ch = Channel::new(bc, mu)?;
    ch.exit_time_cdf(t, x1, cfg, Branch::Auto)
}

/// Density of the exit time conditioned on leaving through `side` (DD case).
pub fn conditioned_exit_time_density(
    side: i8,
    mu: f64,
    t: f64,
    x1: f64,
    cfg: &SeriesConfig,
) -> Result<f64> {
    let phi = if side >= 0 {
        scale_function(mu, 1.0, x1)
    } else {
        1.0 - scale_function(mu, 1.0, x1)
    };
    if phi <= 0.0 {
        return Err(WalkError::DegenerateStart);
    }
    let ch = Channel::new(BoundaryPair::DD, mu)?;
    let h = ch.one_sided_exit_density(side, t, x1, cfg, Branch::Auto)?;
    Ok(h.value() / phi)
}

/// P_0[W_t < y | t < tau] for the driftless DD interval started at 0.
pub fn survival_position_cdf(t: f64, y: f64, cfg: &SeriesConfig) -> Result<f64> {
    if y <= -1.0 {
        return Ok(0.0);
    }
    if y >= 1.0 {
        return Ok(1.0);
    }
    let surv = 1.0 - r_dd(t, 0.0, 0.0, cfg, Branch::Auto)?;
    let mass = if t < cfg.crossover_time {
        let st = (2.0 * t).sqrt();
        sum_images(
            cfg,
            |n, acc| {
                // integral over (-1, y) of the images terms started at 0
                let a = 4.0 * n as f64; // center of the direct image
                let b = -(4.0 * n as f64 + 2.0); // center of the reflected image
                let da = 0.5 * (libm::erf((y - a) / st) - libm::erf((-1.0 - a) / st));
                let db = 0.5 * (libm::erf((y - b) / st) - libm::erf((-1.0 - b) / st));
                acc.add(da - db, 0.0);
            },
            "survival position cdf images",
        )?
        .value()
    } else {
        sum_forward(
            cfg,
            1,
            |n, acc| {
                let nf = n as f64;
                let s1 = (nf * PI / 2.0).sin();
                if s1 != 0.0 {
                    let c = s1 * 2.0 / (nf * PI) * (1.0 - (nf * PI / 2.0 * (y + 1.0)).cos());
                    acc.add(c, -nf * nf * PI * PI * t / 8.0);
                }
            },
            "survival position cdf spectral",
        )?
        .value()
    };
    Ok((mass / surv).clamp(0.0, 1.0))
}

/// Density of W_t given survival, started at 0 (driftless DD).
pub fn survival_position_density(t: f64, y: f64, cfg: &SeriesConfig) -> Result<f64> {
    survival_position_density_scaled(t, y, cfg).map(|s| s.value())
}

pub fn survival_position_density_scaled(t: f64, y: f64, cfg: &SeriesConfig) -> Result<Scaled> {
    let ch = Channel::new(BoundaryPair::DD, 0.0)?;
    let p = ch.transition_density(t, 0.0, y, cfg, Branch::Auto)?;
    let surv = ch.survival(t, 0.0, cfg)?;
    Ok(p.scale_by_log(-surv.ln()))
}

// ---------------------------------------------------------------------------
// Rescaling to [-L, L]
// ---------------------------------------------------------------------------

/// A channel rescaled to the interval [-L, L]: densities pick up 1/L (space)
/// or 1/L^2 (time) factors, the drift rescales to L * mu.
#[derive(Debug, Clone)]
pub struct Lane {
    pub channel: Channel,
    pub half_length: f64,
    /// physical drift (canonical drift is half_length * mu_physical)
    pub mu_physical: f64,
}

impl Lane {
    pub fn new(bc: BoundaryPair, mu_physical: f64, half_length: f64) -> Result<Lane> {
        assert!(half_length > 0.0);
        Ok(Lane {
            channel: Channel::new(bc, mu_physical * half_length)?,
            half_length,
            mu_physical,
        })
    }

    pub fn bc(&self) -> BoundaryPair {
        self.channel.bc
    }

    #[inline]
    pub fn to_canonical_time(&self, t: f64) -> f64 {
        t / (self.half_length * self.half_length)
    }

    #[inline]
    pub fn to_canonical_pos(&self, x: f64) -> f64 {
        x / self.half_length
    }

    pub fn transition_density(&self, t: f64, x1: f64, x2: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        let s = self.channel.transition_density(
            self.to_canonical_time(t),
            self.to_canonical_pos(x1),
            self.to_canonical_pos(x2),
            cfg,
            Branch::Auto,
        )?;
        Ok(s.scale_by(1.0 / self.half_length))
    }

    pub fn exit_time_density(&self, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        let s = self.channel.exit_time_density(
            self.to_canonical_time(t),
            self.to_canonical_pos(x1),
            cfg,
            Branch::Auto,
        )?;
        Ok(s.scale_by(1.0 / (self.half_length * self.half_length)))
    }

    pub fn one_sided_exit_density(&self, side: i8, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        let s = self.channel.one_sided_exit_density(
            side,
            self.to_canonical_time(t),
            self.to_canonical_pos(x1),
            cfg,
            Branch::Auto,
        )?;
        Ok(s.scale_by(1.0 / (self.half_length * self.half_length)))
    }

    pub fn exit_time_cdf(&self, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<f64> {
        self.channel.exit_time_cdf(
            self.to_canonical_time(t),
            self.to_canonical_pos(x1),
            cfg,
            Branch::Auto,
        )
    }

    pub fn survival(&self, t: f64, x1: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        self.channel
            .survival(self.to_canonical_time(t), self.to_canonical_pos(x1), cfg)
    }

    /// Probability of hitting +L before -L (DD only).
    pub fn hit_right_probability(&self, x: f64) -> f64 {
        scale_function(self.mu_physical, self.half_length, x)
    }

    /// P[X_t <= y, tau > t]; dimensionless, so no density rescaling.
    pub fn position_cdf(&self, t: f64, x1: f64, y: f64, cfg: &SeriesConfig) -> Result<Scaled> {
        self.channel.position_cdf(
            self.to_canonical_time(t),
            self.to_canonical_pos(x1),
            self.to_canonical_pos(y),
            cfg,
        )
    }
}

/// One density identity with its measured violation.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IdentityCheck {
    pub name: &'static str,
    /// worst absolute violation observed over the case grid
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn check(name: &'static str, measured: f64, tolerance: f64) -> IdentityCheck {
    IdentityCheck {
        name,
        measured,
        tolerance,
        pass: measured.is_finite() && measured <= tolerance,
    }
}

/// Evaluate the full set of density identities on a fixed case grid and
/// report the worst violation of each. Used by the density-check command
/// and the release gate.
pub fn identity_suite(cfg: &SeriesConfig) -> Result<Vec<IdentityCheck>> {
    use crate::util::integrate_gl;
    let times = [0.05, 0.15, 0.3, 0.6, 1.5];
    let starts = [-0.7, -0.2, 0.0, 0.45];
    let mut out = Vec::new();

    // NN conserves mass: integral of p_NN(t, x, .) = 1
    let mut worst = 0.0f64;
    for mu in [0.0, 2.0] {
        let ch = Channel::new(BoundaryPair::NN, mu)?;
        for &t in &times {
            for &x in &starts {
                let mass = integrate_gl(
                    |y| ch.transition_density(t, x, y, cfg, Branch::Auto).unwrap().value(),
                    -1.0,
                    1.0,
                    128,
                );
                worst = worst.max((mass - 1.0).abs());
            }
        }
    }
    out.push(check("nn_normalization", worst, 1e-8));

    // DD mass balance: S(t, x) + integral_0^t q(s, x) ds = 1
    let mut worst = 0.0f64;
    for mu in [0.0, 1.0] {
        let ch = Channel::new(BoundaryPair::DD, mu)?;
        for &t in &[0.3, 0.8] {
            for &x in &starts {
                let surv = ch.survival(t, x, cfg)?.value();
                let leaked = integrate_gl(
                    |s| ch.exit_time_density(s.max(1e-9), x, cfg, Branch::Auto).unwrap().value(),
                    0.0,
                    t,
                    256,
                );
                worst = worst.max((surv + leaked - 1.0).abs());
            }
        }
    }
    out.push(check("dd_mass_balance", worst, 1e-7));

    // images and spectral branches agree across the crossover window
    let mut worst = 0.0f64;
    for bc in [BoundaryPair::NN, BoundaryPair::DD, BoundaryPair::DN] {
        let ch = Channel::new(bc, 0.0)?;
        for &t in &[0.15, 0.25, 0.4, 0.6] {
            for &x in &starts {
                for &y in &[-0.5, 0.1, 0.8] {
                    let a = ch.transition_density(t, x, y, cfg, Branch::Images)?.value();
                    let b = ch.transition_density(t, x, y, cfg, Branch::Spectral)?.value();
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    out.push(check("branch_agreement", worst, 1e-9));

    // Doob decomposition: h+ + h- = q on the DD interval
    let mut worst = 0.0f64;
    for mu in [0.0, 0.8] {
        let ch = Channel::new(BoundaryPair::DD, mu)?;
        for &t in &times {
            for &x in &starts {
                let q = ch.exit_time_density(t, x, cfg, Branch::Auto)?.value();
                let hp = ch.one_sided_exit_density(1, t, x, cfg, Branch::Auto)?.value();
                let hm = ch.one_sided_exit_density(-1, t, x, cfg, Branch::Auto)?.value();
                worst = worst.max((hp + hm - q).abs());
            }
        }
    }
    out.push(check("doob_consistency", worst, 1e-10));

    // drifted DD reduces to the driftless kernel times the Girsanov factor
    let mut worst = 0.0f64;
    let mu = 1.3;
    let drifted = Channel::new(BoundaryPair::DD, mu)?;
    let flat = Channel::new(BoundaryPair::DD, 0.0)?;
    for &t in &times {
        for &x in &starts {
            for &y in &[-0.5, 0.1, 0.8] {
                let lhs = drifted.transition_density(t, x, y, cfg, Branch::Auto)?.value();
                let girsanov = (mu * (y - x) - mu * mu * t / 2.0).exp();
                let rhs = flat.transition_density(t, x, y, cfg, Branch::Auto)?.value() * girsanov;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    out.push(check("drifted_dd_transform", worst, 1e-12));

    // degenerate mixed-boundary mode: mu = 1/2 has leading eigenvalue -1/8
    let sys = dn_eigensystem(0.5, 8)?;
    out.push(check(
        "dn_mu_half_leading_eigenvalue",
        (sys.modes[0].lambda + 0.125).abs(),
        1e-12,
    ));

    // driftless mixed boundary: lambda_n = -(2n+1)^2 pi^2 / 32
    let sys = dn_eigensystem(0.0, 8)?;
    let mut worst = 0.0f64;
    for (n, mode) in sys.modes.iter().enumerate() {
        let exact = -((2 * n + 1) as f64).powi(2) * std::f64::consts::PI.powi(2) / 32.0;
        worst = worst.max((mode.lambda - exact).abs());
    }
    out.push(check("dn_mu_zero_eigenvalues", worst, 1e-12));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::integrate_gl;

    fn cfg() -> SeriesConfig {
        SeriesConfig::default()
    }

    #[test]
    fn nn_long_time_limit_is_half() {
        let c = cfg();
        let v = p_nn0(50.0, 0.3, -0.7, &c, Branch::Auto).unwrap().value();
        assert!((v - 0.5).abs() < 1e-12, "{v}");
    }

    #[test]
    fn dd_branches_agree_at_crossover() {
        let c = cfg();
        for &t in &[0.15, 0.3, 0.45, 0.6] {
            for &(x1, x2) in &[(0.0, 0.0), (0.3, -0.5), (-0.9, 0.8)] {
                let a = p_dd0(t, x1, x2, &c, Branch::Images).unwrap().value();
                let b = p_dd0(t, x1, x2, &c, Branch::Spectral).unwrap().value();
                assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "t={t} {a} {b}");
            }
        }
    }

    #[test]
    fn nn_drifted_branches_agree() {
        let c = cfg();
        for &mu in &[0.5, 2.0, -0.7] {
            for &t in &[0.2, 0.3, 0.5] {
                for &(x1, x2) in &[(0.1, -0.4), (-0.8, 0.6)] {
                    let a = p_nn_mu(t, x1, x2, mu, &c, Branch::Images).unwrap().value();
                    let b = p_nn_mu(t, x1, x2, mu, &c, Branch::Spectral).unwrap().value();
                    assert!(
                        (a - b).abs() <= 1e-9 * (1.0 + a.abs()),
                        "mu={mu} t={t} x=({x1},{x2}) images={a} spectral={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn nn_drifted_normalizes() {
        let c = cfg();
        for &mu in &[0.0, 0.5, -0.5, 2.0, -2.0] {
            for &t in &[0.05, 0.25, 1.0, 5.0] {
                let ch = Channel::new(BoundaryPair::NN, mu).unwrap();
                let mass = integrate_gl(
                    |x2| ch.transition_density(t, 0.3, x2, &c, Branch::Auto).unwrap().value(),
                    -1.0,
                    1.0,
                    128,
                );
                assert!((mass - 1.0).abs() < 1e-8, "mu={mu} t={t} mass={mass}");
            }
        }
    }

    #[test]
    fn dd_mass_balance() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DD, 0.7).unwrap();
        for &t in &[0.1, 0.5, 2.0] {
            let mass = integrate_gl(
                |x2| ch.transition_density(t, 0.2, x2, &c, Branch::Auto).unwrap().value(),
                -1.0,
                1.0,
                128,
            );
            let cdf = ch.exit_time_cdf(t, 0.2, &c, Branch::Auto).unwrap();
            assert!((mass + cdf - 1.0).abs() < 1e-7, "t={t} mass={mass} cdf={cdf}");
        }
    }

    #[test]
    fn dd_exit_cdf_matches_density_quadrature() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DD, 0.0).unwrap();
        let q = integrate_gl(
            |s| ch.exit_time_density(s, 0.0, &c, Branch::Auto).unwrap().value(),
            1e-6,
            0.5,
            256,
        );
        let r = ch.exit_time_cdf(0.5, 0.0, &c, Branch::Auto).unwrap();
        assert!((q - r).abs() < 1e-8, "quad={q} cdf={r}");
    }

    #[test]
    fn doob_split_reassembles_total_exit_density() {
        let c = cfg();
        for &mu in &[0.0, 1.0, -0.6] {
            let ch = Channel::new(BoundaryPair::DD, mu).unwrap();
            for &(t, x1) in &[(0.2, 0.0), (0.7, 0.5), (1.5, -0.3)] {
                let q = ch.exit_time_density(t, x1, &c, Branch::Auto).unwrap().value();
                let phip = scale_function(mu, 1.0, x1);
                let qp = conditioned_exit_time_density(1, mu, t, x1, &c).unwrap();
                let qm = conditioned_exit_time_density(-1, mu, t, x1, &c).unwrap();
                let recon = phip * qp + (1.0 - phip) * qm;
                assert!((recon - q).abs() < 1e-10 * (1.0 + q), "mu={mu} t={t}");
            }
        }
    }

    #[test]
    fn dn_exit_density_integrates_to_one() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DN, 0.0).unwrap();
        let total = integrate_gl(
            |s| ch.exit_time_density(s, 0.0, &c, Branch::Auto).unwrap().value(),
            1e-6,
            80.0,
            512,
        );
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn nd_is_mirror_of_dn() {
        let c = cfg();
        let dn = Channel::new(BoundaryPair::DN, 0.8).unwrap();
        let nd = Channel::new(BoundaryPair::ND, -0.8).unwrap();
        let a = dn.transition_density(0.5, 0.2, -0.3, &c, Branch::Auto).unwrap().value();
        let b = nd.transition_density(0.5, -0.2, 0.3, &c, Branch::Auto).unwrap().value();
        assert!((a - b).abs() < 1e-9 * (1.0 + a), "{a} {b}");
    }

    #[test]
    fn eigen_mu_zero_matches_closed_form() {
        let sys = dn_eigensystem(0.0, 6).unwrap();
        for (n, m) in sys.modes.iter().enumerate() {
            let k = (2 * n + 1) as f64;
            assert!((m.lambda + k * k * PI * PI / 32.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn eigen_mu_half_leading_mode() {
        let sys = dn_eigensystem(0.5, 4).unwrap();
        assert!((sys.modes[0].lambda + 0.125).abs() < 1e-14);
        // eigenfunction proportional to e^{-x/2}(x+1)
        let r = sys.modes[0].psi(0.5, 0.3) / ((-0.15f64).exp() * 1.3);
        let r2 = sys.modes[0].psi(0.5, -0.6) / ((0.3f64).exp() * 0.4);
        assert!((r - r2).abs() < 1e-12);
    }

    #[test]
    fn eigen_orthonormal_under_exponential_weight() {
        let sys = dn_eigensystem(2.0, 10).unwrap();
        for i in 0..10 {
            for j in i..10 {
                let v = integrate_gl(
                    |x| sys.modes[i].psi(2.0, x) * sys.modes[j].psi(2.0, x) * (4.0 * x).exp(),
                    -1.0,
                    1.0,
                    256,
                );
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-8, "({i},{j}): {v}");
            }
        }
    }

    #[test]
    fn eigen_boundary_conditions_hold() {
        for &mu in &[-1.5, 0.2, 0.499, 0.5, 0.501, 3.0] {
            let sys = dn_eigensystem(mu, 5).unwrap();
            for m in &sys.modes {
                assert!(m.psi(mu, -1.0).abs() < 1e-12, "mu={mu}");
                let h = 1e-6;
                let d = (m.psi(mu, 1.0 + h) - m.psi(mu, 1.0 - h)) / (2.0 * h);
                assert!(d.abs() < 1e-6, "mu={mu} dpsi(1)={d}");
                assert!(m.lambda < 0.0);
            }
            // strictly decreasing eigenvalues
            for w in sys.modes.windows(2) {
                assert!(w[1].lambda < w[0].lambda + 1e-12);
            }
        }
    }

    #[test]
    fn drifted_dn_normalization_and_mass_balance() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DN, 1.0).unwrap();
        for &t in &[0.3, 1.0, 3.0] {
            let mass = integrate_gl(
                |x2| ch.transition_density(t, 0.1, x2, &c, Branch::Auto).unwrap().value(),
                -1.0,
                1.0,
                256,
            );
            let cdf = ch.exit_time_cdf(t, 0.1, &c, Branch::Auto).unwrap();
            assert!((mass + cdf - 1.0).abs() < 1e-7, "t={t}: {mass} + {cdf}");
        }
    }

    #[test]
    fn scale_function_basics() {
        assert!((scale_function(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        assert!((scale_function(1.3, 2.0, 2.0) - 1.0).abs() < 1e-15);
        assert!(scale_function(1.3, 2.0, -2.0).abs() < 1e-15);
        // smooth mu -> 0 limit
        let a = scale_function(1e-7, 1.0, 0.4);
        let b = scale_function(1e-6, 1.0, 0.4);
        assert!((a - b).abs() < 1e-6);
        // monotone in x
        let mut prev = -1.0;
        for i in 0..=20 {
            let x = -1.0 + i as f64 / 10.0;
            let v = scale_function(-0.8, 1.0, x);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn survival_position_cdf_symmetric_and_consistent() {
        let c = cfg();
        for &t in &[0.1, 0.5, 1.0, 10.0] {
            let v = survival_position_cdf(t, 0.0, &c).unwrap();
            assert!((v - 0.5).abs() < 1e-9, "t={t}: {v}");
        }
        // s = dS/dy numerically
        let t = 0.7;
        let h = 1e-5;
        let num = (survival_position_cdf(t, 0.5 + h, &c).unwrap()
            - survival_position_cdf(t, 0.5 - h, &c).unwrap())
            / (2.0 * h);
        let s = survival_position_density(t, 0.5, &c).unwrap();
        assert!((num - s).abs() < 1e-6, "{num} {s}");
    }

    #[test]
    fn brownian_scaling_of_lane() {
        let c = cfg();
        let lane = Lane::new(BoundaryPair::DD, 0.0, 2.0).unwrap();
        let a = lane.exit_time_cdf(4.0 * 0.3, 0.0, &c).unwrap();
        let unit = Lane::new(BoundaryPair::DD, 0.0, 1.0).unwrap();
        let b = unit.exit_time_cdf(0.3, 0.0, &c).unwrap();
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn lane_density_normalizes_for_any_half_length() {
        let c = cfg();
        let lane = Lane::new(BoundaryPair::NN, 0.4, 3.0).unwrap();
        let mass = integrate_gl(
            |x2| lane.transition_density(2.0, 1.0, x2, &c).unwrap().value(),
            -3.0,
            3.0,
            256,
        );
        assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    }

    #[test]
    fn long_time_decay_rate_is_leading_eigenvalue() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DD, 0.0).unwrap();
        let t = 5.0;
        let d = 0.5;
        let a = ch.transition_density(t, 0.0, 0.0, &c, Branch::Auto).unwrap().ln();
        let b = ch.transition_density(t + d, 0.0, 0.0, &c, Branch::Auto).unwrap().ln();
        let rate = (a - b) / d;
        assert!((rate - PI * PI / 8.0).abs() < 1e-6 * rate, "{rate}");
    }

    #[test]
    fn drifted_dd_transform_identity() {
        let c = cfg();
        let mu = 0.7;
        let ch = Channel::new(BoundaryPair::DD, mu).unwrap();
        let ch0 = Channel::new(BoundaryPair::DD, 0.0).unwrap();
        for &(t, x1, x2) in &[(0.2, 0.1, -0.5), (1.0, -0.3, 0.4)] {
            let a = ch.transition_density(t, x1, x2, &c, Branch::Auto).unwrap().value();
            let b = ch0.transition_density(t, x1, x2, &c, Branch::Auto).unwrap().value()
                * (mu * (x2 - x1) - mu * mu * t / 2.0).exp();
            assert!((a - b).abs() < 1e-12 * (1.0 + a), "{a} {b}");
        }
    }

    #[test]
    fn position_cdf_caps_at_survival_and_differentiates_to_density() {
        let c = cfg();
        for &(bc, mu) in &[
            (BoundaryPair::DD, 0.0),
            (BoundaryPair::DD, 0.9),
            (BoundaryPair::NN, 0.6),
            (BoundaryPair::DN, 0.0),
            (BoundaryPair::DN, 1.2),
            (BoundaryPair::ND, -0.4),
            (BoundaryPair::ND, 0.0),
        ] {
            let ch = Channel::new(bc, mu).unwrap();
            for &t in &[0.2, 0.8] {
                let x1 = 0.15;
                let cap = ch.position_cdf(t, x1, 1.0, &c).unwrap().value();
                let surv = ch.survival(t, x1, &c).unwrap().value();
                assert!((cap - surv).abs() < 1e-8 * (1.0 + surv), "{bc:?} mu={mu} t={t}");
                // derivative in y recovers the transition density
                let y = -0.2;
                let h = 1e-5;
                let num = (ch.position_cdf(t, x1, y + h, &c).unwrap().value()
                    - ch.position_cdf(t, x1, y - h, &c).unwrap().value())
                    / (2.0 * h);
                let p = ch.transition_density(t, x1, y, &c, Branch::Auto).unwrap().value();
                assert!(
                    (num - p).abs() < 1e-5 * (1.0 + p),
                    "{bc:?} mu={mu} t={t}: {num} vs {p}"
                );
                // monotone in y
                let mut prev = 0.0;
                for k in 0..=20 {
                    let v = ch
                        .position_cdf(t, x1, -1.0 + k as f64 / 10.0, &c)
                        .unwrap()
                        .value();
                    assert!(v >= prev - 1e-12, "{bc:?} mu={mu}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn position_cdf_matches_center_start_special_case() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DD, 0.0).unwrap();
        for &t in &[0.1, 0.5, 2.0] {
            for &y in &[-0.7, 0.0, 0.4] {
                let a = ch.position_cdf(t, 0.0, y, &c).unwrap().value()
                    / ch.survival(t, 0.0, &c).unwrap().value();
                let b = survival_position_cdf(t, y, &c).unwrap();
                assert!((a - b).abs() < 1e-9, "t={t} y={y}: {a} {b}");
            }
        }
    }

    #[test]
    fn small_time_log_density_stays_finite() {
        let c = cfg();
        let ch = Channel::new(BoundaryPair::DD, 0.0).unwrap();
        let v = ch.transition_density(1e-4, 0.0, 0.9, &c, Branch::Auto).unwrap();
        assert!(v.ln().is_finite());
        assert!(v.ln() < -1000.0); // far below f64 underflow as a plain value
    }
}
