//! Objective functions.
//!
//! [`Objective`] is the pluggable interface the optimizers consume. Two
//! multimodal benchmark functions are provided through [`Benchmark`]:
//!
//! - Styblinski-Tang, `f(x) = ½ Σ (x_i⁴ − 16x_i² + 5x_i)` on `[−5, 5]^d`.
//! - Schwefel, `f(x) = 418.9829·d − Σ x_i sin(√|x_i|)` on `[−500, 500]^d`.
//!
//! Evaluation is not clamped to the box; positions outside it are valid
//! inputs.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// A point in an objective's search space. All coordinates are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Position<S>(Vec<S>);

impl<S: Scalar> Position<S> {
    pub fn new(coords: Vec<S>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("position"));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }
}

impl<S> std::ops::Index<usize> for Position<S> {
    type Output = S;

    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

/// Name, dimension, box domain and evaluation budget of an objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec<S> {
    pub name: String,
    domain: Vec<(S, S)>,
    pub eval_count_budget: usize,
}

impl<S: Scalar> ObjectiveSpec<S> {
    pub fn new(
        name: impl Into<String>,
        domain: Vec<(S, S)>,
        eval_count_budget: usize,
    ) -> Result<Self> {
        if domain.is_empty() {
            return Err(invalid("objective dimension must be at least 1"));
        }
        for (i, &(lo, hi)) in domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!(
                    "domain interval {i} is not a proper finite interval"
                )));
            }
        }
        if eval_count_budget == 0 {
            return Err(invalid("evaluation budget must be positive"));
        }
        Ok(Self {
            name: name.into(),
            domain,
            eval_count_budget,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.len()
    }

    pub fn domain(&self) -> &[(S, S)] {
        &self.domain
    }
}

/// A real-valued function with an analytic gradient.
///
/// `value` and `gradient` take raw slices and may assume the length is
/// [`Objective::dim`]; the checked entry points are [`evaluate`] and
/// [`gradient`].
pub trait Objective<S: Scalar> {
    fn dim(&self) -> usize;

    fn value(&self, x: &[S]) -> S;

    fn gradient(&self, x: &[S]) -> Vec<S>;
}

impl<S: Scalar, T: Objective<S> + ?Sized> Objective<S> for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, x: &[S]) -> S {
        (**self).value(x)
    }

    fn gradient(&self, x: &[S]) -> Vec<S> {
        (**self).gradient(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkFunction {
    StyblinskiTang,
    Schwefel,
}

impl BenchmarkFunction {
    pub fn name(self) -> &'static str {
        match self {
            BenchmarkFunction::StyblinskiTang => "styblinski-tang",
            BenchmarkFunction::Schwefel => "schwefel",
        }
    }

    /// Per-coordinate box of the standard domain.
    pub fn bounds(self) -> (f64, f64) {
        match self {
            BenchmarkFunction::StyblinskiTang => (-5.0, 5.0),
            BenchmarkFunction::Schwefel => (-500.0, 500.0),
        }
    }
}

impl fmt::Display for BenchmarkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "styblinski-tang" | "styblinski_tang" => Ok(BenchmarkFunction::StyblinskiTang),
            "schwefel" => Ok(BenchmarkFunction::Schwefel),
            other => Err(Error::Unknown {
                kind: "objective",
                name: other.to_string(),
            }),
        }
    }
}

const SCHWEFEL_OFFSET: f64 = 418.9829;

/// One of the two benchmark functions at a given dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark<S> {
    function: BenchmarkFunction,
    spec: ObjectiveSpec<S>,
}

impl<S: Scalar> Benchmark<S> {
    /// Default budget is 20,000 evaluations; override with [`Self::with_budget`].
    pub fn new(function: BenchmarkFunction, dim: usize) -> Result<Self> {
        let (lo, hi) = function.bounds();
        let spec =
            ObjectiveSpec::new(function.name(), vec![(S::lit(lo), S::lit(hi)); dim], 20_000)?;
        Ok(Self { function, spec })
    }

    pub fn with_budget(mut self, budget: usize) -> Result<Self> {
        if budget == 0 {
            return Err(invalid("evaluation budget must be positive"));
        }
        self.spec.eval_count_budget = budget;
        Ok(self)
    }

    pub fn function(&self) -> BenchmarkFunction {
        self.function
    }

    pub fn spec(&self) -> &ObjectiveSpec<S> {
        &self.spec
    }
}

/// One-dimensional Styblinski-Tang term `½(x⁴ − 16x² + 5x)`.
pub fn styblinski_tang_term<S: Scalar>(x: S) -> S {
    let x2 = x * x;
    S::lit(0.5) * (x2 * x2 - S::lit(16.0) * x2 + S::lit(5.0) * x)
}

fn styblinski_tang_term_grad<S: Scalar>(x: S) -> S {
    (S::lit(4.0) * x * x * x - S::lit(32.0) * x + S::lit(5.0)) * S::lit(0.5)
}

fn schwefel_term_grad<S: Scalar>(x: S) -> S {
    if x == S::zero() {
        // removable singularity; both one-sided limits are 0
        return S::zero();
    }
    let r = x.abs().sqrt();
    -r.sin() - x * r.cos() * x.signum() / (S::lit(2.0) * r)
}

impl<S: Scalar> Objective<S> for Benchmark<S> {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn value(&self, x: &[S]) -> S {
        match self.function {
            BenchmarkFunction::StyblinskiTang => x.iter().map(|&xi| styblinski_tang_term(xi)).sum(),
            BenchmarkFunction::Schwefel => {
                let d = S::from_usize(x.len()).unwrap();
                let s: S = x.iter().map(|&xi| xi * xi.abs().sqrt().sin()).sum();
                S::lit(SCHWEFEL_OFFSET) * d - s
            }
        }
    }

    fn gradient(&self, x: &[S]) -> Vec<S> {
        match self.function {
            BenchmarkFunction::StyblinskiTang => {
                x.iter().map(|&xi| styblinski_tang_term_grad(xi)).collect()
            }
            BenchmarkFunction::Schwefel => x.iter().map(|&xi| schwefel_term_grad(xi)).collect(),
        }
    }
}

fn check_point<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x: &[S]) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("position"));
    }
    Ok(())
}

/// Evaluates `obj` at `x` after checking dimension and finiteness.
pub fn evaluate<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x: &[S]) -> Result<S> {
    check_point(obj, x)?;
    Ok(obj.value(x))
}

/// Analytic gradient of `obj` at `x`.
pub fn gradient<S: Scalar, O: Objective<S> + ?Sized>(obj: &O, x: &[S]) -> Result<Vec<S>> {
    check_point(obj, x)?;
    Ok(obj.gradient(x))
}

/// Central-difference gradient `(f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn finite_diff_gradient<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    x: &[S],
    h: S,
) -> Result<Vec<S>> {
    if !(h > S::zero()) {
        return Err(invalid("finite-difference step must be positive"));
    }
    check_point(obj, x)?;
    let mut probe = x.to_vec();
    let two_h = h + h;
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = obj.value(&probe);
        probe[i] = orig - h;
        let down = obj.value(&probe);
        probe[i] = orig;
        grad.push((up - down) / two_h);
    }
    Ok(grad)
}

/// Draws one coordinate uniformly from `[lo, hi]`.
pub(crate) fn uniform_in<S: Scalar, R: Rng + ?Sized>(lo: S, hi: S, rng: &mut R) -> S {
    let u: f64 = rng.random();
    let v = lo + S::lit(u) * (hi - lo);
    v.min(hi)
}

/// A position with every coordinate drawn independently and uniformly from the box.
pub fn sample_uniform_position<S: Scalar, R: Rng + ?Sized>(
    spec: &ObjectiveSpec<S>,
    rng: &mut R,
) -> Position<S> {
    Position(
        spec.domain()
            .iter()
            .map(|&(lo, hi)| uniform_in(lo, hi, rng))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use approx::assert_abs_diff_eq;

    fn st(dim: usize) -> Benchmark<f64> {
        Benchmark::new(BenchmarkFunction::StyblinskiTang, dim).unwrap()
    }

    fn sw(dim: usize) -> Benchmark<f64> {
        Benchmark::new(BenchmarkFunction::Schwefel, dim).unwrap()
    }

    #[test]
    fn values_at_origin() {
        assert_eq!(evaluate(&st(2), &[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            evaluate(&sw(2), &[0.0, 0.0]).unwrap(),
            837.9658,
            epsilon = 1e-12
        );
    }

    #[test]
    fn styblinski_tang_two_dim_minimum() {
        let v = evaluate(&st(2), &[-2.903534, -2.903534]).unwrap();
        assert_abs_diff_eq!(v, -78.3323, epsilon = 1e-4);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(gradient(&st(2), &[0.0, 0.0]).unwrap(), vec![2.5, 2.5]);
        assert_eq!(gradient(&sw(1), &[0.0]).unwrap(), vec![0.0]);
        assert_eq!(gradient(&st(2), &[1.0, -1.0]).unwrap(), vec![-11.5, 16.5]);
    }

    #[test]
    fn dimension_and_finiteness_rejected() {
        assert!(matches!(
            evaluate(&st(2), &[0.0]),
            Err(Error::DimensionMismatch {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            evaluate(&st(2), &[0.0, f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            gradient(&st(3), &[0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Position::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn finite_diff_rejects_bad_step() {
        assert!(finite_diff_gradient(&st(2), &[0.0, 0.0], 0.0).is_err());
        assert!(finite_diff_gradient(&st(2), &[0.0, 0.0], -1e-3).is_err());
    }

    #[test]
    fn finite_diff_at_origin() {
        let g = finite_diff_gradient(&st(2), &[0.0, 0.0], 1e-5).unwrap();
        for gi in g {
            assert_abs_diff_eq!(gi, 2.5, epsilon = 1e-8);
        }
    }

    #[test]
    fn schwefel_stationary_at_minimizer() {
        let g = finite_diff_gradient(&sw(1), &[420.9687], 1e-5).unwrap();
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-4);
    }

    #[test]
    fn out_of_box_evaluation_is_defined() {
        assert!(evaluate(&st(1), &[7.5]).unwrap().is_finite());
        assert!(evaluate(&sw(1), &[-900.0]).unwrap().is_finite());
    }

    #[test]
    fn spec_validation() {
        assert!(ObjectiveSpec::<f64>::new("x", vec![], 10).is_err());
        assert!(ObjectiveSpec::new("x", vec![(1.0, 1.0)], 10).is_err());
        assert!(ObjectiveSpec::new("x", vec![(0.0, 1.0)], 0).is_err());
        assert!(Benchmark::<f64>::new(BenchmarkFunction::Schwefel, 0).is_err());
    }

    #[test]
    fn function_names_parse() {
        assert_eq!(
            "styblinski-tang".parse::<BenchmarkFunction>().unwrap(),
            BenchmarkFunction::StyblinskiTang
        );
        assert_eq!(
            "schwefel".parse::<BenchmarkFunction>().unwrap(),
            BenchmarkFunction::Schwefel
        );
        assert!("rastrigin".parse::<BenchmarkFunction>().is_err());
    }

    #[test]
    fn uniform_sampling_in_box_and_deterministic() {
        let b = sw(7);
        let a = sample_uniform_position(b.spec(), &mut rng_from_seed(11));
        let c = sample_uniform_position(b.spec(), &mut rng_from_seed(11));
        assert_eq!(a, c);
        assert!(a.as_slice().iter().all(|&v| (-500.0..=500.0).contains(&v)));
    }

    #[test]
    fn uniform_sampling_mean() {
        let spec = ObjectiveSpec::new("box", vec![(-5.0, 5.0), (0.0, 2.0)], 1).unwrap();
        let mut rng = rng_from_seed(3);
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        for _ in 0..n {
            let p = sample_uniform_position(&spec, &mut rng);
            sums[0] += p[0];
            sums[1] += p[1];
        }
        for (i, &(lo, hi)) in spec.domain().iter().enumerate() {
            let se = (hi - lo) / 12f64.sqrt() / (n as f64).sqrt();
            let mean = sums[i] / n as f64;
            assert!(
                (mean - (lo + hi) / 2.0).abs() < 3.0 * se,
                "dim {i}: mean {mean}"
            );
        }
    }

    #[test]
    fn f32_instantiation() {
        let b = Benchmark::<f32>::new(BenchmarkFunction::StyblinskiTang, 2).unwrap();
        assert_eq!(b.value(&[0.0, 0.0]), 0.0f32);
        assert_eq!(b.gradient(&[1.0, -1.0]), vec![-11.5f32, 16.5]);
    }
}
