use serde::{Deserialize, Serialize};

use super::{
    architecture_gradient_at, discretize, validity_check, CellStructure, Mixing, OpKind, SplitData,
    ToyCell, DEFAULT_THRESHOLD,
};
use crate::error::{invalid, Error, Result};
use crate::global::DEFAULT_WINDOW;
use crate::hybrid::{Hybrid, HybridConfig, Mode, RunTrace, DEFAULT_SWITCH_AFTER};
use crate::local::{AdamState, LrSpec};
use crate::objective::{Objective, Position};
use crate::proposal::{ProposalDomain, DEFAULT_PHI_CAP};
use crate::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchOptimizer {
    /// Adam on the architecture weights only.
    Darts,
    /// Adam alternating with DSCD on the architecture weights.
    Hybrid,
}

/// Toy search configuration, read from JSON. Missing keys take defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilevelConfig {
    pub seed: u64,
    pub nodes: usize,
    pub feature_dim: usize,
    pub ops: Vec<OpKind>,
    pub mixing: Mixing,
    pub n_train: usize,
    pub n_val: usize,
    pub noise: f64,
    /// Architecture steps; each is followed by one weight step.
    pub steps: usize,
    pub optimizer: SearchOptimizer,
    pub lr_alpha: f64,
    pub lr_w: f64,
    pub xi: f64,
    pub switch_after: Option<usize>,
    pub window: usize,
    pub phi_cap: f64,
    pub checkpoint_every: usize,
    pub threshold: f64,
    pub init_alpha: f64,
    pub w_scale: f64,
}

impl Default for BilevelConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            nodes: 4,
            feature_dim: 2,
            ops: vec![OpKind::Linear, OpKind::Skip],
            mixing: Mixing::Sigmoid,
            n_train: 64,
            n_val: 64,
            noise: 0.05,
            steps: 1000,
            optimizer: SearchOptimizer::Hybrid,
            lr_alpha: 0.01,
            lr_w: 0.01,
            xi: 0.0,
            switch_after: Some(DEFAULT_SWITCH_AFTER),
            window: DEFAULT_WINDOW,
            phi_cap: DEFAULT_PHI_CAP,
            checkpoint_every: 100,
            threshold: DEFAULT_THRESHOLD,
            init_alpha: 0.0,
            w_scale: 0.5,
        }
    }
}

impl BilevelConfig {
    pub fn structure(&self) -> Result<CellStructure> {
        CellStructure::new(self.nodes, self.ops.clone(), self.feature_dim)
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if self.checkpoint_every == 0 {
            return Err(invalid("checkpoint_every must be at least 1"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid("threshold must lie in (0, 1)"));
        }
        if !(self.lr_w > 0.0) {
            return Err(invalid("lr_w must be positive"));
        }
        if !(self.xi >= 0.0) {
            return Err(invalid("xi must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub normal: f64,
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    pub group_means: GroupMeans,
    pub valid_after_discretization: bool,
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    /// One record per validation-loss evaluation of the architecture weights.
    pub trace: RunTrace<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub cell: ToyCell<f64>,
    pub data: SplitData<f64>,
}

/// `α ↦ L_val(α, w)` with the approximate architecture gradient, for fixed `w`.
struct ArchObjective<'a> {
    cell: &'a ToyCell<f64>,
    data: &'a SplitData<f64>,
    xi: f64,
}

impl Objective<f64> for ArchObjective<'_> {
    fn dim(&self) -> usize {
        self.cell.structure.alpha_len()
    }

    fn value(&self, alpha: &[f64]) -> f64 {
        self.cell.loss_at(alpha, &self.cell.w, &self.data.val)
    }

    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        architecture_gradient_at(self.cell, alpha, &self.cell.w, self.data, self.xi)
            .unwrap_or_else(|_| vec![f64::NAN; alpha.len()])
    }
}

fn checkpoint(step: usize, cell: &ToyCell<f64>, threshold: f64) -> Result<Checkpoint> {
    let mask = discretize(&cell.alpha, threshold);
    Ok(Checkpoint {
        step,
        group_means: cell.group_means(),
        valid_after_discretization: validity_check(&mask, &cell.structure)?.is_valid(),
    })
}

/// Runs the toy architecture search.
///
/// Each iteration takes one architecture step on `L_val` (Adam, or the
/// hybrid local/global scheme over the `[−3, 3]` proposal domain) and then
/// one Adam step on `w` against `L_train` at the updated architecture.
pub fn run_search(config: &BilevelConfig) -> Result<SearchResult> {
    config.validate()?;
    let structure = config.structure()?;
    let teacher = ToyCell::teacher(structure.clone(), config.mixing, config.seed)?;
    let data = SplitData::generate(
        &teacher,
        config.n_train,
        config.n_val,
        config.noise,
        config.seed.wrapping_add(1),
    )?;
    let mut rng = rng_from_seed(config.seed.wrapping_add(2));
    let mut cell = ToyCell::random(
        structure,
        config.mixing,
        config.init_alpha,
        config.w_scale,
        &mut rng,
    )?;

    let mut hybrid_cfg = HybridConfig::new(config.steps + 1, LrSpec::Constant(config.lr_alpha));
    hybrid_cfg.window = config.window;
    hybrid_cfg.phi_cap = config.phi_cap;
    hybrid_cfg.initial_mode = Mode::Local;
    hybrid_cfg.switch_after = match config.optimizer {
        SearchOptimizer::Darts => None,
        SearchOptimizer::Hybrid => config.switch_after,
    };
    let domain = ProposalDomain::architecture(cell.structure.alpha_len())?;
    let mut w_adam = AdamState::<f64>::with_defaults(cell.structure.w_len());

    let x0 = Position::new(cell.alpha.clone())?;
    let (mut run, first) = {
        let obj = ArchObjective {
            cell: &cell,
            data: &data,
            xi: config.xi,
        };
        Hybrid::start(&obj, x0, hybrid_cfg)?
    };
    let mut records = Vec::with_capacity(config.steps + 1);
    records.push(first);
    let mut checkpoints = vec![checkpoint(0, &cell, config.threshold)?];

    for step in 1..=config.steps {
        let rec = {
            let obj = ArchObjective {
                cell: &cell,
                data: &data,
                xi: config.xi,
            };
            run.step(&obj, &domain, &mut rng)?
        };
        records.push(rec);
        cell.alpha.copy_from_slice(run.x_current());
        let g_w = cell.grad_w_train(&data);
        w_adam.step(&mut cell.w, &g_w, config.lr_w)?;
        if cell.w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("operation weights"));
        }
        if step % config.checkpoint_every == 0 || step == config.steps {
            checkpoints.push(checkpoint(step, &cell, config.threshold)?);
        }
    }

    let trace = RunTrace {
        records,
        x_best: run.x_best().to_vec(),
        y_best: run.y_best(),
    };
    Ok(SearchResult {
        trace,
        checkpoints,
        cell,
        data,
    })
}
