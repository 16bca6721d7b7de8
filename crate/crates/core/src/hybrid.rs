//! Local optimisation with global backtracking.
//!
//! A run alternates between Adam steps on a current position and DSCD steps
//! on the best position. The mode toggles once `T` consecutive steps of the
//! same kind have been taken *and* the most recent step did not strictly
//! improve the current loss. After a global step the current position is
//! reset to the best one.
//!
//! Every step costs exactly one objective evaluation; the initial evaluation
//! of the starting point is evaluation 0, so a run with budget `N` records
//! `N` evaluations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::global::{Dscd, DEFAULT_WINDOW};
use crate::local::{AdamConfig, AdamState, LrSchedule, LrSpec};
use crate::objective::{evaluate, uniform_in, Objective, ObjectiveSpec, Position};
use crate::proposal::{ConcentrationSchedule, ProposalDomain, DEFAULT_PHI_CAP};
use crate::scalar::Scalar;

pub const DEFAULT_SWITCH_AFTER: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Init,
    Local,
    Global,
    Uniform,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Init => "init",
            Mode::Local => "local",
            Mode::Global => "global",
            Mode::Uniform => "uniform",
        }
    }
}

/// Step-type state machine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlternationState<S> {
    pub mode: Mode,
    /// Steps taken in the current mode.
    pub consecutive: usize,
    pub last_loss: S,
    /// Whether the most recent step's loss was strictly below the one before it.
    pub improved_last: bool,
}

impl<S: Scalar> AlternationState<S> {
    pub fn new(mode: Mode, initial_loss: S) -> Self {
        Self {
            mode,
            consecutive: 0,
            last_loss: initial_loss,
            improved_last: false,
        }
    }

    /// Registers the current loss after a step in the current mode.
    pub fn record(&mut self, loss: S) {
        self.improved_last = loss < self.last_loss;
        self.last_loss = loss;
        self.consecutive += 1;
    }

    pub fn toggle(&mut self) {
        self.mode = match self.mode {
            Mode::Local => Mode::Global,
            _ => Mode::Local,
        };
        self.consecutive = 0;
    }
}

/// True iff at least `switch_after` same-mode steps were taken and the last
/// one did not improve. `None` never switches.
pub fn should_switch<S: Scalar>(state: &AlternationState<S>, switch_after: Option<usize>) -> bool {
    match switch_after {
        Some(t) => state.consecutive >= t && !state.improved_last,
        None => false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
pub struct HybridConfig<S> {
    /// Total objective evaluations, including the initial one.
    pub budget: usize,
    /// Alternation threshold `T`; `None` disables switching.
    pub switch_after: Option<usize>,
    /// Loss window length `K`.
    pub window: usize,
    pub lr: LrSpec<S>,
    #[serde(default)]
    pub adam: AdamConfig<S>,
    pub initial_mode: Mode,
    pub phi_cap: S,
    #[serde(default)]
    pub reset_moments_on_switch: bool,
}

impl<S: Scalar> HybridConfig<S> {
    /// Local start, `T = 50`, `K = 1000`, `phi_cap = 0.999`.
    pub fn new(budget: usize, lr: LrSpec<S>) -> Self {
        Self {
            budget,
            switch_after: Some(DEFAULT_SWITCH_AFTER),
            window: DEFAULT_WINDOW,
            lr,
            adam: AdamConfig::default(),
            initial_mode: Mode::Local,
            phi_cap: S::lit(DEFAULT_PHI_CAP),
            reset_moments_on_switch: false,
        }
    }

    /// Adam only: starts local and never switches.
    pub fn pure_local(budget: usize, lr: LrSpec<S>) -> Self {
        Self {
            switch_after: None,
            ..Self::new(budget, lr)
        }
    }

    /// DSCD only: starts global and never switches.
    pub fn pure_global(budget: usize) -> Self {
        Self {
            switch_after: None,
            initial_mode: Mode::Global,
            ..Self::new(budget, LrSpec::Constant(S::lit(1e-3)))
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(invalid("budget must be at least 1"));
        }
        if self.switch_after == Some(0) {
            return Err(invalid("alternation threshold T must be at least 1"));
        }
        if self.window == 0 {
            return Err(invalid("window K must be at least 1"));
        }
        if !matches!(self.initial_mode, Mode::Local | Mode::Global) {
            return Err(invalid("initial mode must be local or global"));
        }
        self.lr.schedule(self.budget)?;
        ConcentrationSchedule::new(self.budget, self.phi_cap)?;
        Ok(())
    }
}

/// One row of a run trace, one per objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord<S> {
    pub eval_index: usize,
    pub mode: Mode,
    /// Coordinate resampled by a global step.
    pub dimension: Option<usize>,
    pub loss: S,
    /// Running minimum over all finite losses so far.
    pub best_so_far: S,
    /// Loss-window minimum after this evaluation; empty when no window is in play.
    pub window_best: Option<S>,
    pub phi: S,
    /// Whether this evaluation replaced the best position.
    pub accepted: bool,
    /// Learning rate of a local step.
    pub lr: Option<S>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace<S> {
    pub records: Vec<TraceRecord<S>>,
    pub x_best: Vec<S>,
    pub y_best: S,
}

impl<S: Scalar> RunTrace<S> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn best_so_far(&self) -> impl Iterator<Item = S> + '_ {
        self.records.iter().map(|r| r.best_so_far)
    }

    pub fn final_best(&self) -> Option<S> {
        self.records.last().map(|r| r.best_so_far)
    }
}

fn running_min<S: Scalar>(best: S, loss: S) -> S {
    if loss.is_finite() && !(best <= loss) {
        loss
    } else {
        best
    }
}

/// A hybrid run advanced one evaluation at a time.
///
/// The objective is passed to every [`Hybrid::step`], so callers whose
/// objective changes between steps (e.g. a bilevel search updating inner
/// weights) can drive the same state machine.
#[derive(Debug, Clone)]
pub struct Hybrid<S> {
    config: HybridConfig<S>,
    dscd: Dscd<S>,
    adam: AdamState<S>,
    x_current: Vec<S>,
    y_current: S,
    alternation: AlternationState<S>,
    lr_schedule: LrSchedule<S>,
    phi_schedule: ConcentrationSchedule<S>,
    global_steps: usize,
    evals: usize,
    best_so_far: S,
}

impl<S: Scalar> Hybrid<S> {
    /// Evaluates the starting point; returns the state and evaluation 0.
    pub fn start<O: Objective<S> + ?Sized>(
        obj: &O,
        x0: Position<S>,
        config: HybridConfig<S>,
    ) -> Result<(Self, TraceRecord<S>)> {
        config.validate()?;
        let y0 = evaluate(obj, x0.as_slice())?;
        let lr_schedule = config.lr.schedule(config.budget)?;
        let phi_schedule = ConcentrationSchedule::new(config.budget, config.phi_cap)?;
        let dscd = Dscd::new(x0.clone(), y0, config.window)?;
        let state = Self {
            adam: AdamState::new(x0.dim(), config.adam),
            x_current: x0.into_inner(),
            y_current: y0,
            alternation: AlternationState::new(config.initial_mode, y0),
            lr_schedule,
            phi_schedule,
            global_steps: 0,
            evals: 1,
            best_so_far: running_min(S::infinity(), y0),
            dscd,
            config,
        };
        let record = TraceRecord {
            eval_index: 0,
            mode: Mode::Init,
            dimension: None,
            loss: y0,
            best_so_far: state.best_so_far,
            window_best: state.window_best(),
            phi: S::zero(),
            accepted: true,
            lr: None,
        };
        Ok((state, record))
    }

    /// Minimum of the loss window, or `None` when the configuration can never
    /// take a global step and the window plays no part in the run.
    pub fn window_best(&self) -> Option<S> {
        let global_reachable =
            self.config.switch_after.is_some() || self.config.initial_mode == Mode::Global;
        if global_reachable {
            self.dscd.window().min()
        } else {
            None
        }
    }

    pub fn is_done(&self) -> bool {
        self.evals >= self.config.budget
    }

    pub fn evals(&self) -> usize {
        self.evals
    }

    pub fn mode(&self) -> Mode {
        self.alternation.mode
    }

    pub fn alternation(&self) -> &AlternationState<S> {
        &self.alternation
    }

    pub fn x_best(&self) -> &[S] {
        self.dscd.x_best()
    }

    pub fn y_best(&self) -> S {
        self.dscd.y_best()
    }

    pub fn x_current(&self) -> &[S] {
        &self.x_current
    }

    pub fn phi(&self) -> S {
        self.phi_schedule
            .phi_at(self.global_steps)
            .unwrap_or(self.config.phi_cap)
    }

    /// Takes one local or global step. Callers must stop at [`Self::is_done`].
    pub fn step<O, R>(
        &mut self,
        obj: &O,
        domain: &ProposalDomain<S>,
        rng: &mut R,
    ) -> Result<TraceRecord<S>>
    where
        O: Objective<S> + ?Sized,
        R: Rng + ?Sized,
    {
        if self.is_done() {
            return Err(invalid("evaluation budget exhausted"));
        }
        if should_switch(&self.alternation, self.config.switch_after) {
            self.alternation.toggle();
            if self.alternation.mode == Mode::Local && self.config.reset_moments_on_switch {
                self.adam.reset();
            }
        }
        let eval_index = self.evals;
        let record = match self.alternation.mode {
            Mode::Global => {
                let phi = self.phi_schedule.phi_at(self.global_steps)?;
                let step = self.dscd.step(obj, domain, phi, rng)?;
                self.global_steps += 1;
                self.x_current.clear();
                self.x_current.extend_from_slice(self.dscd.x_best());
                self.y_current = self.dscd.y_best();
                TraceRecord {
                    eval_index,
                    mode: Mode::Global,
                    dimension: Some(step.dimension),
                    loss: step.loss,
                    best_so_far: running_min(self.best_so_far, step.loss),
                    window_best: self.window_best(),
                    phi,
                    accepted: step.accepted,
                    lr: None,
                }
            }
            _ => {
                let lr = self.lr_schedule.lr_at(eval_index)?;
                let grad = obj.gradient(&self.x_current);
                self.adam.step(&mut self.x_current, &grad, lr)?;
                let loss = obj.value(&self.x_current);
                self.dscd.observe(loss);
                self.y_current = loss;
                let accepted = loss.is_finite() && loss < self.dscd.y_best();
                if accepted {
                    self.dscd.set_best(&self.x_current, loss);
                }
                TraceRecord {
                    eval_index,
                    mode: Mode::Local,
                    dimension: None,
                    loss,
                    best_so_far: running_min(self.best_so_far, loss),
                    window_best: self.window_best(),
                    phi: self.phi_schedule.phi_at(self.global_steps)?,
                    accepted,
                    lr: Some(lr),
                }
            }
        };
        self.alternation.record(self.y_current);
        self.best_so_far = record.best_so_far;
        self.evals += 1;
        Ok(record)
    }
}

/// Runs the hybrid scheme from `x0` until the evaluation budget is spent.
pub fn run_hybrid<S, O, R>(
    obj: &O,
    x0: Position<S>,
    domain: &ProposalDomain<S>,
    config: HybridConfig<S>,
    rng: &mut R,
) -> Result<RunTrace<S>>
where
    S: Scalar,
    O: Objective<S> + ?Sized,
    R: Rng + ?Sized,
{
    let (mut run, first) = Hybrid::start(obj, x0, config)?;
    let mut records = Vec::with_capacity(run.config.budget);
    records.push(first);
    while !run.is_done() {
        records.push(run.step(obj, domain, rng)?);
    }
    Ok(RunTrace {
        records,
        x_best: run.x_best().to_vec(),
        y_best: run.y_best(),
    })
}

/// Plain Adam from `x0`: `budget − 1` steps after the initial evaluation.
pub fn run_adam<S: Scalar, O: Objective<S> + ?Sized>(
    obj: &O,
    x0: Position<S>,
    lr: &LrSchedule<S>,
    adam: AdamConfig<S>,
    budget: usize,
) -> Result<RunTrace<S>> {
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let mut x = x0.into_inner();
    let y0 = evaluate(obj, &x)?;
    let mut state = AdamState::new(x.len(), adam);
    let (mut x_best, mut y_best, mut best) = (x.clone(), y0, running_min(S::infinity(), y0));
    let mut records = vec![TraceRecord {
        eval_index: 0,
        mode: Mode::Init,
        dimension: None,
        loss: y0,
        best_so_far: best,
        window_best: None,
        phi: S::zero(),
        accepted: true,
        lr: None,
    }];
    for k in 1..budget {
        let rate = lr.lr_at(k)?;
        let g = obj.gradient(&x);
        state.step(&mut x, &g, rate)?;
        let y = obj.value(&x);
        let accepted = y.is_finite() && y < y_best;
        if accepted {
            x_best.clone_from(&x);
            y_best = y;
        }
        best = running_min(best, y);
        records.push(TraceRecord {
            eval_index: k,
            mode: Mode::Local,
            dimension: None,
            loss: y,
            best_so_far: best,
            window_best: None,
            phi: S::zero(),
            accepted,
            lr: Some(rate),
        });
    }
    Ok(RunTrace {
        records,
        x_best,
        y_best,
    })
}

/// Plain DSCD from `x0` with `φ` advancing once per step over a
/// `budget`-length cosine schedule.
pub fn run_dscd<S, O, R>(
    obj: &O,
    x0: Position<S>,
    domain: &ProposalDomain<S>,
    window: usize,
    phi_cap: S,
    budget: usize,
    rng: &mut R,
) -> Result<RunTrace<S>>
where
    S: Scalar,
    O: Objective<S> + ?Sized,
    R: Rng + ?Sized,
{
    let schedule = ConcentrationSchedule::new(budget, phi_cap)?;
    let mut dscd = Dscd::initialize(obj, x0, window)?;
    let y0 = dscd.y_best();
    let mut best = running_min(S::infinity(), y0);
    let mut records = vec![TraceRecord {
        eval_index: 0,
        mode: Mode::Init,
        dimension: None,
        loss: y0,
        best_so_far: best,
        window_best: dscd.window().min(),
        phi: S::zero(),
        accepted: true,
        lr: None,
    }];
    for k in 1..budget {
        let phi = schedule.phi_at(k - 1)?;
        let step = dscd.step(obj, domain, phi, rng)?;
        best = running_min(best, step.loss);
        records.push(TraceRecord {
            eval_index: k,
            mode: Mode::Global,
            dimension: Some(step.dimension),
            loss: step.loss,
            best_so_far: best,
            window_best: dscd.window().min(),
            phi,
            accepted: step.accepted,
            lr: None,
        });
    }
    Ok(RunTrace {
        records,
        x_best: dscd.x_best().to_vec(),
        y_best: dscd.y_best(),
    })
}

/// `budget` independent uniform samples over the objective's box.
pub fn run_baseline_uniform<S, O, R>(
    obj: &O,
    spec: &ObjectiveSpec<S>,
    budget: usize,
    rng: &mut R,
) -> Result<RunTrace<S>>
where
    S: Scalar,
    O: Objective<S> + ?Sized,
    R: Rng + ?Sized,
{
    if budget == 0 {
        return Err(invalid("budget must be at least 1"));
    }
    let mut x = vec![S::zero(); spec.dim()];
    let mut x_best = Vec::new();
    let mut y_best = S::infinity();
    let mut records = Vec::with_capacity(budget);
    for k in 0..budget {
        for (xi, &(lo, hi)) in x.iter_mut().zip(spec.domain()) {
            *xi = uniform_in(lo, hi, rng);
        }
        let y = evaluate(obj, &x)?;
        let accepted = y.is_finite() && (x_best.is_empty() || y < y_best);
        if accepted {
            x_best.clone_from(&x);
            y_best = y;
        }
        records.push(TraceRecord {
            eval_index: k,
            mode: Mode::Uniform,
            dimension: None,
            loss: y,
            best_so_far: y_best,
            window_best: None,
            phi: S::zero(),
            accepted,
            lr: None,
        });
    }
    Ok(RunTrace {
        records,
        x_best,
        y_best,
    })
}
