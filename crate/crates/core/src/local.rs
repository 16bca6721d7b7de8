//! Adam and learning-rate schedules for the local step.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig<S> {
    pub beta1: S,
    pub beta2: S,
    pub eps: S,
}

impl<S: Scalar> Default for AdamConfig<S> {
    fn default() -> Self {
        Self {
            beta1: S::lit(0.9),
            beta2: S::lit(0.999),
            eps: S::lit(1e-8),
        }
    }
}

/// Moment estimates and step count of a running Adam optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig<S>,
    m: Vec<S>,
    v: Vec<S>,
    t: u64,
}

impl<S: Scalar> AdamState<S> {
    pub fn new(dim: usize, config: AdamConfig<S>) -> Self {
        Self {
            config,
            m: vec![S::zero(); dim],
            v: vec![S::zero(); dim],
            t: 0,
        }
    }

    pub fn with_defaults(dim: usize) -> Self {
        Self::new(dim, AdamConfig::default())
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[S] {
        &self.m
    }

    pub fn second_moment(&self) -> &[S] {
        &self.v
    }

    /// Zeroes the moments and the step counter.
    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|m| *m = S::zero());
        self.v.iter_mut().for_each(|v| *v = S::zero());
        self.t = 0;
    }

    /// Bias-corrected Adam update of `x` in place:
    /// `x ← x − lr·m̂/(√v̂ + eps)`.
    ///
    /// A non-finite gradient leaves both `x` and the state untouched.
    pub fn step(&mut self, x: &mut [S], grad: &[S], lr: S) -> Result<()> {
        let dim = self.dim();
        for len in [x.len(), grad.len()] {
            if len != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: len,
                });
            }
        }
        if !(lr > S::zero() && lr.is_finite()) {
            return Err(invalid("learning rate must be positive and finite"));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        let AdamConfig { beta1, beta2, eps } = self.config;
        self.t += 1;
        let t = self.t.min(i32::MAX as u64) as i32;
        let bc1 = S::one() - beta1.powi(t);
        let bc2 = S::one() - beta2.powi(t);
        for i in 0..dim {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (S::one() - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (S::one() - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            x[i] = x[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}

/// Functional form of [`AdamState::step`].
pub fn adam_step<S: Scalar>(
    state: &AdamState<S>,
    x: &[S],
    grad: &[S],
    lr: S,
) -> Result<(AdamState<S>, Vec<S>)> {
    let mut next = state.clone();
    let mut y = x.to_vec();
    next.step(&mut y, grad, lr)?;
    Ok((next, y))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrKind {
    Constant,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule<S> {
    pub kind: LrKind,
    pub lr_start: S,
    pub lr_end: S,
    pub total_steps: usize,
}

impl<S: Scalar> LrSchedule<S> {
    pub fn constant(lr: S, total_steps: usize) -> Result<Self> {
        Self::build(LrKind::Constant, lr, lr, total_steps)
    }

    pub fn linear(lr_start: S, lr_end: S, total_steps: usize) -> Result<Self> {
        Self::build(LrKind::Linear, lr_start, lr_end, total_steps)
    }

    fn build(kind: LrKind, lr_start: S, lr_end: S, total_steps: usize) -> Result<Self> {
        if !(lr_start > S::zero()
            && lr_end > S::zero()
            && lr_start.is_finite()
            && lr_end.is_finite())
        {
            return Err(invalid("learning rates must be positive and finite"));
        }
        if total_steps == 0 {
            return Err(invalid("schedule length must be positive"));
        }
        Ok(Self {
            kind,
            lr_start,
            lr_end,
            total_steps,
        })
    }

    pub fn lr_at(&self, step: usize) -> Result<S> {
        if step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        Ok(match self.kind {
            LrKind::Constant => self.lr_start,
            LrKind::Linear => {
                let frac = S::from_usize(step).unwrap() / S::from_usize(self.total_steps).unwrap();
                self.lr_start + (self.lr_end - self.lr_start) * frac
            }
        })
    }
}

/// Length-free learning-rate setting, as written on the command line and in
/// configs: a bare number (`0.01`) or `linear:START:END`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LrSpec<S> {
    Constant(S),
    Linear { start: S, end: S },
}

impl<S: Scalar> LrSpec<S> {
    pub fn schedule(&self, total_steps: usize) -> Result<LrSchedule<S>> {
        match *self {
            LrSpec::Constant(lr) => LrSchedule::constant(lr, total_steps),
            LrSpec::Linear { start, end } => LrSchedule::linear(start, end, total_steps),
        }
    }
}

impl<S: Scalar> fmt::Display for LrSpec<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LrSpec::Constant(lr) => write!(f, "{lr}"),
            LrSpec::Linear { start, end } => write!(f, "linear:{start}:{end}"),
        }
    }
}

impl<S: Scalar> FromStr for LrSpec<S> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let num = |t: &str| -> Result<S> {
            let v: f64 = t
                .trim()
                .parse()
                .map_err(|_| invalid(format!("bad learning rate `{t}`")))?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("learning rate `{t}` must be positive")));
            }
            Ok(S::lit(v))
        };
        match s.split(':').collect::<Vec<_>>().as_slice() {
            ["linear", a, b] => Ok(LrSpec::Linear {
                start: num(a)?,
                end: num(b)?,
            }),
            [v] => Ok(LrSpec::Constant(num(v)?)),
            _ => Err(invalid(format!(
                "bad learning-rate spec `{s}`; expected X or linear:A:B"
            ))),
        }
    }
}

impl<S: Scalar> Serialize for LrSpec<S> {
    fn serialize<Ser: serde::Serializer>(
        &self,
        ser: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        ser.collect_str(self)
    }
}

impl<'de, S: Scalar> Deserialize<'de> for LrSpec<S> {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(v) if v > 0.0 && v.is_finite() => Ok(LrSpec::Constant(S::lit(v))),
            Raw::Num(v) => Err(serde::de::Error::custom(format!(
                "learning rate {v} must be positive"
            ))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{gradient, Benchmark, BenchmarkFunction, Objective};
    use approx::assert_abs_diff_eq;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let s = AdamState::<f64>::with_defaults(3);
        let (s1, x) = adam_step(&s, &[1.0, 1.0, 1.0], &[3.0, -0.5, 200.0], 0.01).unwrap();
        assert_eq!(s1.steps(), 1);
        for (xi, sign) in x.iter().zip([1.0, -1.0, 1.0]) {
            assert_abs_diff_eq!(*xi, 1.0 - 0.01 * sign, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_gradient_leaves_position() {
        let s = AdamState::<f64>::with_defaults(2);
        let (_, x) = adam_step(&s, &[0.3, -0.7], &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(x, vec![0.3, -0.7]);
    }

    #[test]
    fn non_finite_gradient_rejected_without_side_effects() {
        let mut s = AdamState::<f64>::with_defaults(2);
        let mut x = vec![1.0, 2.0];
        s.step(&mut x, &[1.0, 1.0], 0.1).unwrap();
        let (snapshot, xs) = (s.clone(), x.clone());
        assert!(matches!(
            s.step(&mut x, &[f64::NAN, 1.0], 0.1),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(s, snapshot);
        assert_eq!(x, xs);
        assert!(s.step(&mut x, &[1.0], 0.1).is_err());
        assert!(s.step(&mut x, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn converges_to_stationary_point() {
        let f = Benchmark::<f64>::new(BenchmarkFunction::StyblinskiTang, 2).unwrap();
        let mut s = AdamState::with_defaults(2);
        let mut x = vec![1.0, 1.0];
        for _ in 0..1000 {
            let g = f.gradient(&x);
            s.step(&mut x, &g, 0.01).unwrap();
        }
        let g = gradient(&f, &x).unwrap();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-4, "gradient norm {norm} at {x:?}");
    }

    #[test]
    fn quadratic_sanity_bound() {
        let mut s = AdamState::<f64>::with_defaults(1);
        let mut x = [1.0];
        let mut reached = None;
        for k in 1..=2000 {
            let g = [2.0 * x[0]];
            s.step(&mut x, &g, 0.01).unwrap();
            if x[0].abs() < 1e-3 {
                reached = Some(k);
                break;
            }
        }
        assert!(reached.is_some());
    }

    #[test]
    fn reset_clears_moments() {
        let mut s = AdamState::<f32>::with_defaults(2);
        let mut x = [1.0f32, 1.0];
        s.step(&mut x, &[1.0, 2.0], 0.1).unwrap();
        s.reset();
        assert_eq!(s, AdamState::with_defaults(2));
    }

    #[test]
    fn schedules() {
        let c = LrSchedule::constant(0.01f64, 100).unwrap();
        assert_eq!(c.lr_at(0).unwrap(), 0.01);
        assert_eq!(c.lr_at(77).unwrap(), 0.01);
        let l = LrSchedule::linear(0.1f64, 0.001, 1000).unwrap();
        assert_eq!(l.lr_at(0).unwrap(), 0.1);
        assert_abs_diff_eq!(l.lr_at(500).unwrap(), 0.0505, epsilon = 1e-15);
        assert_abs_diff_eq!(l.lr_at(1000).unwrap(), 0.001, epsilon = 1e-15);
        assert!(l.lr_at(1001).is_err());
        assert!(LrSchedule::constant(0.0f64, 10).is_err());
        assert!(LrSchedule::linear(0.1f64, 0.01, 0).is_err());
    }

    #[test]
    fn lr_spec_parsing() {
        assert_eq!(
            "0.01".parse::<LrSpec<f64>>().unwrap(),
            LrSpec::Constant(0.01)
        );
        assert_eq!(
            "linear:0.1:0.001".parse::<LrSpec<f64>>().unwrap(),
            LrSpec::Linear {
                start: 0.1,
                end: 0.001
            }
        );
        assert!("linear:0.1".parse::<LrSpec<f64>>().is_err());
        assert!("-1".parse::<LrSpec<f64>>().is_err());
        let j: LrSpec<f64> = serde_json::from_str("0.1").unwrap();
        assert_eq!(j, LrSpec::Constant(0.1));
        let j: LrSpec<f64> = serde_json::from_str("\"linear:0.001:0.1\"").unwrap();
        assert_eq!(serde_json::to_string(&j).unwrap(), "\"linear:0.001:0.1\"");
    }
}
