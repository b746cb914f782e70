//! Small numerical helpers shared across modules.

/// A nonnegative quantity kept as `mantissa * exp(log_scale)` so that series
/// built from widely-scaled Gaussian terms neither underflow nor overflow.
#[derive(Debug, Clone, Copy)]
pub struct Scaled {
    pub log_scale: f64,
    pub mantissa: f64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        log_scale: f64::NEG_INFINITY,
        mantissa: 0.0,
    };

    pub fn from_value(v: f64) -> Scaled {
        Scaled {
            log_scale: 0.0,
            mantissa: v,
        }
    }

    pub fn value(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    /// Natural log; `-inf` when the value is zero or (from roundoff) negative.
    pub fn ln(&self) -> f64 {
        if self.mantissa <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + self.mantissa.ln()
        }
    }

    pub fn scale_by_log(&self, dl: f64) -> Scaled {
        Scaled {
            log_scale: self.log_scale + dl,
            mantissa: self.mantissa,
        }
    }

    pub fn scale_by(&self, c: f64) -> Scaled {
        Scaled {
            log_scale: self.log_scale,
            mantissa: self.mantissa * c,
        }
    }
}

/// Accumulates `sum of c_k * exp(e_k)` while tracking the largest exponent
/// seen, so the running sum stays in a representable range.
#[derive(Debug, Clone)]
pub struct ScaledSum {
    log_scale: f64,
    sum: f64,
}

impl ScaledSum {
    pub fn new() -> ScaledSum {
        ScaledSum {
            log_scale: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    /// Add `c * exp(e)`; returns the magnitude of the added term relative to
    /// the current partial sum (used for truncation tests).
    pub fn add(&mut self, c: f64, e: f64) -> f64 {
        if c == 0.0 || e == f64::NEG_INFINITY {
            return 0.0;
        }
        if e > self.log_scale {
            self.sum = self.sum * (self.log_scale - e).exp() + c;
            self.log_scale = e;
            if self.sum == 0.0 {
                c.abs()
            } else {
                (c / self.sum).abs()
            }
        } else {
            let term = c * (e - self.log_scale).exp();
            self.sum += term;
            if self.sum == 0.0 {
                term.abs()
            } else {
                (term / self.sum).abs()
            }
        }
    }

    pub fn total(&self) -> Scaled {
        Scaled {
            log_scale: if self.log_scale.is_finite() {
                self.log_scale
            } else {
                0.0
            },
            mantissa: self.sum,
        }
    }
}

impl Default for ScaledSum {
    fn default() -> Self {
        Self::new()
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Chebyshev-based initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            pp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / pp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrate `f` over `[a, b]` with an `n`-point Gauss-Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (xs, ws) = gauss_legendre(n);
    let c = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    xs.iter()
        .zip(&ws)
        .map(|(&x, &w)| w * f(mid + c * x))
        .sum::<f64>()
        * c
}

/// Bisection followed by a few Newton polish steps.
/// `f` must change sign on `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> Option<f64> {
    let (mut fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-16 * (1.0 + a.abs() + b.abs()) {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Solve `f(x) = target` on `[a, b]` for monotone `f`.
pub fn invert_monotone(f: impl Fn(f64) -> f64, target: f64, a: f64, b: f64) -> f64 {
    bisect(|x| f(x) - target, a, b).unwrap_or(0.5 * (a + b))
}

/// Streaming mean/variance accumulator (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
    pub min: f64,
    pub max: f64,
}

impl Moments {
    pub fn new() -> Moments {
        Moments {
            n: 0,
            mean: 0.0,
            m2: 0.0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        if x < self.min {
            self.min = x;
        }
        if x > self.max {
            self.max = x;
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n as f64 - 1.0)
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let v = integrate_gl(|x| x * x * x * x, -1.0, 1.0, 8);
        assert!((v - 0.4).abs() < 1e-14);
        let v = integrate_gl(|x| (3.0 * x).exp(), 0.0, 2.0, 32);
        assert!((v - ((6.0f64).exp() - 1.0) / 3.0).abs() < 1e-10);
    }

    #[test]
    fn scaled_sum_handles_tiny_exponents() {
        let mut s = ScaledSum::new();
        s.add(1.0, -2000.0);
        s.add(2.0, -2000.0);
        let t = s.total();
        assert!((t.ln() - (-2000.0 + 3.0f64.ln())).abs() < 1e-12);
        assert_eq!(t.value(), 0.0); // below f64 range, but the log survives
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| (i as f64).sin()).collect();
        let mut all = Moments::new();
        for &x in &xs {
            all.push(x);
        }
        let mut a = Moments::new();
        let mut b = Moments::new();
        for &x in &xs[..37] {
            a.push(x);
        }
        for &x in &xs[37..] {
            b.push(x);
        }
        a.merge(&b);
        assert!((a.mean - all.mean).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }
}
