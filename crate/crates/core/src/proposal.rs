//! Beta-annealing proposal distribution.
//!
//! A coordinate is proposed by mapping the current value into the unit
//! interval, building a Beta distribution whose mean and standard deviation
//! interpolate between the uniform distribution (`φ = 0`) and a point mass at
//! the current value (`φ → 1`), sampling it, and mapping the draw back.
//!
//! With `υ` the current unit position:
//!
//! ```text
//! μ  = φ·υ + (1 − φ)·½
//! σ  = (1 − φ)/√12
//! c₁ = μ/(1 − μ)
//! c₂ = σ²(c₁ + 1)²
//! β  = (c₁ − c₂)/(c₂(c₁ + 1))
//! α  = c₁·β
//! ```
//!
//! Before solving, `μ` is clamped to `[1e-6, 1 − 1e-6]` and `σ` to at most
//! `0.999·√(μ(1 − μ))`, the region where a Beta with those moments exists.
//!
//! Draws use Cheng's (1978) exact rejection samplers BB/BC as implemented by
//! `rand_distr::Beta`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::ObjectiveSpec;
use crate::scalar::Scalar;

pub const DEFAULT_PHI_CAP: f64 = 0.999;
const MU_EPS: f64 = 1e-6;
const SIGMA_VALIDITY: f64 = 0.999;

/// Per-dimension interval proposals are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalDomain<S> {
    intervals: Vec<(S, S)>,
}

impl<S: Scalar> ProposalDomain<S> {
    pub fn new(intervals: Vec<(S, S)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(invalid("proposal domain needs at least one dimension"));
        }
        if intervals
            .iter()
            .any(|&(a, b)| !(a.is_finite() && b.is_finite() && a < b))
        {
            return Err(invalid("proposal domain intervals must satisfy a < b"));
        }
        Ok(Self { intervals })
    }

    /// The same interval `[a, b]` in every dimension.
    pub fn uniform(dim: usize, a: S, b: S) -> Result<Self> {
        Self::new(vec![(a, b); dim])
    }

    /// `[−3, 3]` in every dimension, the range used for architecture weights.
    pub fn architecture(dim: usize) -> Result<Self> {
        Self::uniform(dim, S::lit(-3.0), S::lit(3.0))
    }

    pub fn from_spec(spec: &ObjectiveSpec<S>) -> Self {
        Self {
            intervals: spec.domain().to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn interval(&self, dim: usize) -> (S, S) {
        self.intervals[dim]
    }
}

/// Cosine schedule for the concentration `φ`, rising from 0 towards 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationSchedule<S> {
    pub total_steps: usize,
    pub phi_cap: S,
}

impl<S: Scalar> ConcentrationSchedule<S> {
    pub fn new(total_steps: usize, phi_cap: S) -> Result<Self> {
        if total_steps == 0 {
            return Err(invalid("schedule length must be positive"));
        }
        if !(phi_cap > S::zero() && phi_cap < S::one()) {
            return Err(invalid("phi cap must lie in (0, 1)"));
        }
        Ok(Self {
            total_steps,
            phi_cap,
        })
    }

    pub fn with_default_cap(total_steps: usize) -> Result<Self> {
        Self::new(total_steps, S::lit(DEFAULT_PHI_CAP))
    }

    /// `min(phi_cap, ½(1 − cos(π·step/total)))`.
    pub fn phi_at(&self, step: usize) -> Result<S> {
        if step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        let frac = step as f64 / self.total_steps as f64;
        let phi = S::lit(0.5 * (1.0 - (PI * frac).cos()));
        Ok(phi.min(self.phi_cap))
    }
}

/// Min-max normalizes `x` into `[0, 1]` using the domain's interval for `dim`,
/// clamping values outside the interval.
pub fn to_unit<S: Scalar>(domain: &ProposalDomain<S>, x: S, dim: usize) -> S {
    let (a, b) = domain.interval(dim);
    ((x - a) / (b - a)).max(S::zero()).min(S::one())
}

pub fn from_unit<S: Scalar>(domain: &ProposalDomain<S>, u: S, dim: usize) -> S {
    let (a, b) = domain.interval(dim);
    (a + u * (b - a)).max(a).min(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaParams<S> {
    pub alpha: S,
    pub beta: S,
}

impl<S: Scalar> BetaParams<S> {
    pub fn mean(&self) -> S {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> S {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + S::one()))
    }

    /// Fourth central moment, used to size standard errors of sample variances.
    pub fn fourth_central_moment(&self) -> S {
        let (a, b) = (self.alpha, self.beta);
        let s = a + b;
        let two = S::lit(2.0);
        let three = S::lit(3.0);
        let excess = S::lit(6.0) * ((a - b) * (a - b) * (s + S::one()) - a * b * (s + two))
            / (a * b * (s + two) * (s + three));
        let var = self.variance();
        (excess + three) * var * var
    }
}

/// Post-clamp target moments `(μ, σ)` for unit position `upsilon` and concentration `phi`.
pub fn target_moments<S: Scalar>(upsilon: S, phi: S) -> Result<(S, S)> {
    if !(upsilon >= S::zero() && upsilon <= S::one()) {
        return Err(invalid("unit position must lie in [0, 1]"));
    }
    if !(phi >= S::zero()) {
        return Err(invalid("concentration must be non-negative"));
    }
    if phi >= S::one() {
        return Err(invalid(
            "concentration must be below 1; the point-mass limit is not a Beta",
        ));
    }
    let half = S::lit(0.5);
    let mu = phi * upsilon + (S::one() - phi) * half;
    let sigma = (S::one() - phi) / S::lit(12.0).sqrt();
    let mu = mu.max(S::lit(MU_EPS)).min(S::one() - S::lit(MU_EPS));
    let sigma = sigma.min(S::lit(SIGMA_VALIDITY) * (mu * (S::one() - mu)).sqrt());
    Ok((mu, sigma))
}

/// Solves for the Beta parameters matching the interpolated moments.
pub fn beta_params<S: Scalar>(upsilon: S, phi: S) -> Result<BetaParams<S>> {
    let (mu, sigma) = target_moments(upsilon, phi)?;
    let c1 = mu / (S::one() - mu);
    let c2 = sigma * sigma * (c1 + S::one()) * (c1 + S::one());
    let beta = (c1 - c2) / (c2 * (c1 + S::one()));
    let alpha = c1 * beta;
    if !(alpha > S::zero() && beta > S::zero() && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::NonFinite("beta parameters"));
    }
    Ok(BetaParams { alpha, beta })
}

/// Draws a unit-interval sample from `Beta(alpha, beta)`.
pub fn sample_beta<S: Scalar, R: Rng + ?Sized>(params: BetaParams<S>, rng: &mut R) -> Result<S> {
    let dist = rand_distr::Beta::new(params.alpha.to_f64_lossy(), params.beta.to_f64_lossy())
        .map_err(|e| invalid(format!("beta distribution: {e}")))?;
    let u: f64 = dist.sample(rng);
    Ok(S::lit(u).max(S::zero()).min(S::one()))
}

/// Proposes a new value for coordinate `dim` given its `current` value.
pub fn sample_proposal<S: Scalar, R: Rng + ?Sized>(
    current: S,
    dim: usize,
    domain: &ProposalDomain<S>,
    phi: S,
    rng: &mut R,
) -> Result<S> {
    let upsilon = to_unit(domain, current, dim);
    let params = beta_params(upsilon, phi)?;
    let u = sample_beta(params, rng)?;
    Ok(from_unit(domain, u, dim))
}
