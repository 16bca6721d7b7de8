//! Doubly stochastic coordinate descent (DSCD), the global step.
//!
//! Each step picks one coordinate uniformly at random, redraws it from the
//! Beta-annealed proposal around the best position, evaluates the objective
//! and accepts the move only if the loss is strictly below the minimum of the
//! last `K` observed losses.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::objective::{evaluate, Objective, Position};
use crate::proposal::{sample_proposal, ProposalDomain};
use crate::scalar::Scalar;

pub const DEFAULT_WINDOW: usize = 1000;

/// The last `capacity` finite losses, with an O(1) amortized minimum.
///
/// A monotone deque of `(push index, loss)` pairs with increasing losses
/// sits alongside the ring buffer; its front is the window minimum.
#[derive(Debug, Clone)]
pub struct LossWindow<S> {
    capacity: usize,
    entries: VecDeque<S>,
    mono: VecDeque<(u64, S)>,
    pushed: u64,
}

impl<S: Scalar> LossWindow<S> {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(invalid("loss window capacity must be positive"));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity.min(1 << 16)),
            mono: VecDeque::new(),
            pushed: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored losses, oldest first.
    pub fn iter(&self) -> impl Iterator<Item = &S> {
        self.entries.iter()
    }

    pub fn push(&mut self, loss: S) -> Result<()> {
        if !loss.is_finite() {
            return Err(Error::NonFinite("loss window entry"));
        }
        let idx = self.pushed;
        self.pushed += 1;
        self.entries.push_back(loss);
        if self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
        while matches!(self.mono.back(), Some(&(_, v)) if v >= loss) {
            self.mono.pop_back();
        }
        self.mono.push_back((idx, loss));
        let oldest = self.pushed.saturating_sub(self.capacity as u64);
        while matches!(self.mono.front(), Some(&(i, _)) if i < oldest) {
            self.mono.pop_front();
        }
        Ok(())
    }

    pub fn min(&self) -> Option<S> {
        self.mono.front().map(|&(_, v)| v)
    }

    pub fn window_best(&self) -> Result<S> {
        self.min().ok_or(Error::Empty("loss window"))
    }
}

/// Outcome of one DSCD step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<S> {
    pub dimension: usize,
    pub proposed: S,
    pub loss: S,
    pub accepted: bool,
    /// Window minimum before the proposal's loss was pushed.
    pub threshold: Option<S>,
}

/// Best position, its loss, and the acceptance window.
///
/// `y_best` is the loss at `x_best`. When eviction raises the window minimum
/// above it, `x_best` is kept; the window only gates acceptance.
#[derive(Debug, Clone)]
pub struct Dscd<S> {
    x_best: Vec<S>,
    y_best: S,
    window: LossWindow<S>,
}

impl<S: Scalar> Dscd<S> {
    /// Starts from a known `(x, y)` pair; `y` enters the window if finite.
    pub fn new(x_best: Position<S>, y_best: S, window_capacity: usize) -> Result<Self> {
        let mut window = LossWindow::new(window_capacity)?;
        if y_best.is_finite() {
            window.push(y_best)?;
        }
        Ok(Self {
            x_best: x_best.into_inner(),
            y_best,
            window,
        })
    }

    /// Evaluates `x0` and starts from it.
    pub fn initialize<O: Objective<S> + ?Sized>(
        obj: &O,
        x0: Position<S>,
        window_capacity: usize,
    ) -> Result<Self> {
        let y0 = evaluate(obj, x0.as_slice())?;
        Self::new(x0, y0, window_capacity)
    }

    pub fn x_best(&self) -> &[S] {
        &self.x_best
    }

    pub fn y_best(&self) -> S {
        self.y_best
    }

    pub fn window(&self) -> &LossWindow<S> {
        &self.window
    }

    /// Records an evaluation made outside DSCD (e.g. a local step) in the window.
    pub fn observe(&mut self, loss: S) {
        if loss.is_finite() {
            let _ = self.window.push(loss);
        }
    }

    pub fn set_best(&mut self, x: &[S], y: S) {
        self.x_best.clear();
        self.x_best.extend_from_slice(x);
        self.y_best = y;
    }

    /// One DSCD step at concentration `phi`.
    ///
    /// Non-finite losses are reported but never accepted and never enter the
    /// window.
    pub fn step<O, R>(
        &mut self,
        obj: &O,
        domain: &ProposalDomain<S>,
        phi: S,
        rng: &mut R,
    ) -> Result<StepRecord<S>>
    where
        O: Objective<S> + ?Sized,
        R: Rng + ?Sized,
    {
        let dim = self.x_best.len();
        if obj.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: obj.dim(),
            });
        }
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: domain.dim(),
            });
        }
        let d = rng.random_range(0..dim);
        let proposed = sample_proposal(self.x_best[d], d, domain, phi, rng)?;
        let mut candidate = self.x_best.clone();
        candidate[d] = proposed;
        let loss = obj.value(&candidate);
        let threshold = self.window.min();
        let accepted = loss.is_finite() && threshold.is_none_or(|m| loss < m);
        if loss.is_finite() {
            self.window.push(loss)?;
        }
        if accepted {
            self.x_best = candidate;
            self.y_best = loss;
        }
        Ok(StepRecord {
            dimension: d,
            proposed,
            loss,
            accepted,
            threshold,
        })
    }
}
