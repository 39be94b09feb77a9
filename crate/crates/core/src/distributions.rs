//! PDF-bounded value distributions on `[0, 1]`.
//!
//! A [`DistributionSpec`] describes a non-atomic law whose density stays
//! inside `[alpha, beta]` on the whole unit interval. All sampling goes
//! through the quantile function, so each draw consumes exactly one uniform
//! deviate from its [`RngStream`]. That makes the range-conditioned law
//! `D_{<=c}` and the max-of-`k` law `D^max(k)` one formula:
//! `quantile(cdf(c) * U^(1/k))`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Bisection width for quantiles without a closed form.
const QUANTILE_TOL: f64 = 1e-12;
/// Tolerance on the total mass of a piecewise-linear density.
const MASS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum DistributionKind {
    Uniform,
    /// Normal(mu, sigma) restricted to `[0, 1]` and renormalized.
    TruncatedNormal {
        mu: f64,
        sigma: f64,
    },
    /// Density interpolated linearly between `(x, density)` knots.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    kind: DistributionKind,
    alpha: f64,
    beta: f64,
    shape: Shape,
}

/// Precomputed per-kind data.
#[derive(Debug, Clone, PartialEq)]
enum Shape {
    Uniform,
    TruncNorm {
        mu: f64,
        sigma: f64,
        /// standardized lower edge `-mu/sigma`
        lo: f64,
        /// normalizing mass `Phi(hi) - Phi(lo)`
        mass: f64,
    },
    Pwl {
        xs: Vec<f64>,
        /// densities rescaled to integrate to exactly the trapezoid total 1
        ds: Vec<f64>,
        /// cumulative mass at each knot
        cum: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanAndBounds {
    pub mean: f64,
    pub alpha: f64,
    pub beta: f64,
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `Phi(hi) - Phi(lo)` using whichever of erf/erfc avoids cancellation.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if lo >= 0.0 {
        0.5 * (libm::erfc(lo * s) - libm::erfc(hi * s))
    } else if hi <= 0.0 {
        0.5 * (libm::erfc(-hi * s) - libm::erfc(-lo * s))
    } else {
        0.5 * (libm::erf(hi * s) - libm::erf(lo * s))
    }
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {x} outside [0, 1]")))
    }
}

impl DistributionSpec {
    pub fn uniform() -> Self {
        Self {
            kind: DistributionKind::Uniform,
            alpha: 1.0,
            beta: 1.0,
            shape: Shape::Uniform,
        }
    }

    pub fn truncated_normal(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "truncnorm needs finite mu and sigma > 0, got ({mu}, {sigma})"
            )));
        }
        let lo = -mu / sigma;
        let hi = (1.0 - mu) / sigma;
        let mass = normal_mass(lo, hi);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "truncnorm({mu}, {sigma}) has no mass on [0, 1]"
            )));
        }
        let density = |x: f64| std_normal_pdf((x - mu) / sigma) / (sigma * mass);
        let peak = density(mu.clamp(0.0, 1.0));
        let floor = density(0.0).min(density(1.0));
        if !(floor > 0.0) || !peak.is_finite() {
            return Err(Error::InvalidDistribution(format!(
                "truncnorm({mu}, {sigma}) density is not bounded away from 0 and infinity"
            )));
        }
        Ok(Self {
            kind: DistributionKind::TruncatedNormal { mu, sigma },
            alpha: floor.min(1.0),
            beta: peak.max(1.0),
            shape: Shape::TruncNorm {
                mu,
                sigma,
                lo,
                mass,
            },
        })
    }

    pub fn piecewise_linear(knots: Vec<(f64, f64)>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        if knots.len() < 2 {
            return bad("pwl needs at least two knots".into());
        }
        if knots.first().map(|k| k.0) != Some(0.0) || knots.last().map(|k| k.0) != Some(1.0) {
            return bad("pwl knots must start at x = 0 and end at x = 1".into());
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return bad(format!(
                    "pwl knot positions must strictly increase ({} then {})",
                    w[0].0, w[1].0
                ));
            }
        }
        for &(x, d) in &knots {
            if !d.is_finite() || d <= 0.0 {
                return bad(format!(
                    "pwl density at x = {x} must be finite and > 0, got {d}"
                ));
            }
        }
        let total: f64 = knots
            .windows(2)
            .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
            .sum();
        if (total - 1.0).abs() > MASS_TOL {
            return bad(format!("pwl density integrates to {total}, not 1"));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ds: Vec<f64> = knots.iter().map(|k| k.1 / total).collect();
        let mut cum = Vec::with_capacity(xs.len());
        cum.push(0.0);
        for k in 0..xs.len() - 1 {
            let seg = 0.5 * (ds[k] + ds[k + 1]) * (xs[k + 1] - xs[k]);
            cum.push(cum[k] + seg);
        }
        let alpha = ds.iter().copied().fold(f64::INFINITY, f64::min);
        let beta = ds.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            kind: DistributionKind::PiecewiseLinear { knots },
            alpha: alpha.min(1.0),
            beta: beta.max(1.0),
            shape: Shape::Pwl { xs, ds, cum },
        })
    }

    pub fn kind(&self) -> &DistributionKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.shape, Shape::Uniform)
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.pdf_unchecked(x))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_unit("x", x)?;
        Ok(self.cdf_unchecked(x))
    }

    /// Least `x` with `cdf(x) >= p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        check_unit("p", p)?;
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn pdf_unchecked(&self, x: f64) -> f64 {
        match &self.shape {
            Shape::Uniform => 1.0,
            Shape::TruncNorm {
                mu, sigma, mass, ..
            } => std_normal_pdf((x - mu) / sigma) / (sigma * mass),
            Shape::Pwl { xs, ds, .. } => {
                let k = segment_of(xs, x);
                let t = (x - xs[k]) / (xs[k + 1] - xs[k]);
                ds[k] + t * (ds[k + 1] - ds[k])
            }
        }
    }

    pub(crate) fn cdf_unchecked(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::Uniform => x,
            Shape::TruncNorm {
                mu,
                sigma,
                lo,
                mass,
            } => (normal_mass(*lo, (x - mu) / sigma) / mass).clamp(0.0, 1.0),
            Shape::Pwl { xs, ds, cum } => {
                let k = segment_of(xs, x);
                let h = x - xs[k];
                let slope = (ds[k + 1] - ds[k]) / (xs[k + 1] - xs[k]);
                (cum[k] + ds[k] * h + 0.5 * slope * h * h).min(1.0)
            }
        }
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        match &self.shape {
            Shape::Uniform => p,
            Shape::TruncNorm { .. } => {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                while hi - lo > QUANTILE_TOL {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if self.cdf_unchecked(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
            Shape::Pwl { xs, ds, cum } => {
                // first segment whose right-end mass reaches p
                let k = cum[1..].partition_point(|&c| c < p).min(xs.len() - 2);
                let rest = p - cum[k];
                let width = xs[k + 1] - xs[k];
                let slope = (ds[k + 1] - ds[k]) / width;
                // root of ds[k] h + slope h^2 / 2 = rest, cancellation-free form
                let disc = (ds[k] * ds[k] + 2.0 * slope * rest).max(0.0);
                let h = 2.0 * rest / (ds[k] + disc.sqrt());
                (xs[k] + h.clamp(0.0, width)).min(1.0)
            }
        }
    }

    /// Closed-form mean for uniform and truncated normal; per-segment Simpson
    /// (exact for the quadratic `x * pdf(x)`) for piecewise-linear.
    pub fn mean_and_bounds(&self) -> MeanAndBounds {
        let mean = match &self.shape {
            Shape::Uniform => 0.5,
            Shape::TruncNorm {
                mu,
                sigma,
                lo,
                mass,
            } => {
                let hi = (1.0 - mu) / sigma;
                mu + sigma * (std_normal_pdf(*lo) - std_normal_pdf(hi)) / mass
            }
            Shape::Pwl { xs, ds, .. } => xs
                .windows(2)
                .zip(ds.windows(2))
                .map(|(x, d)| {
                    let mid_x = 0.5 * (x[0] + x[1]);
                    let mid_d = 0.5 * (d[0] + d[1]);
                    (x[1] - x[0]) / 6.0 * (x[0] * d[0] + 4.0 * mid_x * mid_d + x[1] * d[1])
                })
                .sum(),
        };
        MeanAndBounds {
            mean,
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    /// Deterministic core of [`sample_conditional_max`]: maps a uniform
    /// `u` in `[0, 1)` to a draw from `(D_{<=c})^max(k)`.
    pub fn conditional_max_from_uniform(&self, k: u64, c: f64, u: f64) -> Result<f64> {
        if k == 0 {
            return Err(Error::Precondition("k must be positive".into()));
        }
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::Domain(format!("cap c = {c} outside (0, 1]")));
        }
        let fc = self.cdf_unchecked(c);
        if !(fc > 0.0) {
            return Err(Error::Precondition(format!("cdf({c}) = 0")));
        }
        Ok(self.conditional_max_unchecked(k, c, fc, u))
    }

    #[inline]
    pub(crate) fn conditional_max_unchecked(&self, k: u64, c: f64, fc: f64, u: f64) -> f64 {
        let v = if k == 1 { u } else { u.powf(1.0 / k as f64) };
        let x = match self.shape {
            Shape::Uniform => c * v,
            _ => self.quantile_unchecked(fc * v),
        };
        x.min(c)
    }

    /// One plain draw from `D`.
    #[inline]
    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = rng.uniform();
        self.conditional_max_unchecked(1, 1.0, 1.0, u)
    }
}

/// Index `k` of the segment `[xs[k], xs[k+1]]` containing `x`.
fn segment_of(xs: &[f64], x: f64) -> usize {
    xs.partition_point(|&k| k <= x)
        .saturating_sub(1)
        .min(xs.len() - 2)
}

/// Draws from `D` conditioned on `<= c`, maximized over `k` i.i.d. copies.
/// The law has CDF `(F(x) / F(c))^k` on `[0, c]`.
pub fn sample_conditional_max(
    spec: &DistributionSpec,
    k: u64,
    c: f64,
    rng: &mut RngStream,
) -> Result<f64> {
    let u = rng.uniform();
    spec.conditional_max_from_uniform(k, c, u)
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DistributionKind::Uniform => write!(f, "uniform"),
            DistributionKind::TruncatedNormal { mu, sigma } => write!(f, "truncnorm:{mu},{sigma}"),
            DistributionKind::PiecewiseLinear { knots } => {
                write!(f, "pwl:")?;
                for (ix, (x, d)) in knots.iter().enumerate() {
                    if ix > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{x},{d}")?;
                }
                Ok(())
            }
        }
    }
}

fn parse_real(s: &str) -> Result<f64> {
    let ok = !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'));
    if !ok {
        return Err(Error::Parse(format!("`{s}` is not a decimal real")));
    }
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("`{s}` is not a decimal real")))
}

fn parse_pair(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected `<a>,<b>`, got `{s}`")))?;
    Ok((parse_real(a)?, parse_real(b)?))
}

/// Grammar: `uniform`, `truncnorm:<mu>,<sigma>`, `pwl:<x0>,<d0>;<x1>,<d1>;...`.
impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "uniform" {
            return Ok(Self::uniform());
        }
        if let Some(rest) = s.strip_prefix("truncnorm:") {
            let (mu, sigma) = parse_pair(rest)?;
            return Self::truncated_normal(mu, sigma);
        }
        if let Some(rest) = s.strip_prefix("pwl:") {
            let knots = rest
                .split(';')
                .map(parse_pair)
                .collect::<Result<Vec<_>>>()?;
            return Self::piecewise_linear(knots);
        }
        Err(Error::Parse(format!("unknown distribution `{s}`")))
    }
}
