use dscd::bilevel::{run_search, BilevelConfig, Mixing, SearchOptimizer};
use dscd::hybrid::Mode;

fn config(optimizer: SearchOptimizer, mixing: Mixing) -> BilevelConfig {
    BilevelConfig {
        steps: 400,
        checkpoint_every: 40,
        n_train: 32,
        n_val: 32,
        optimizer,
        mixing,
        switch_after: Some(10),
        lr_alpha: 0.05,
        ..BilevelConfig::default()
    }
}

#[test]
fn hybrid_search_monitors_every_checkpoint() {
    for mixing in [Mixing::Sigmoid, Mixing::Softmax] {
        let r = run_search(&config(SearchOptimizer::Hybrid, mixing)).unwrap();
        assert_eq!(r.checkpoints.len(), 11);
        for c in &r.checkpoints {
            for m in [c.group_means.normal, c.group_means.reduction] {
                assert!(m.is_finite() && (0.0..=1.0).contains(&m));
            }
        }
        assert!(r.trace.records.iter().any(|rec| rec.mode == Mode::Global));
        assert!(r.cell.alpha.iter().all(|a| a.is_finite()));
        let best: Vec<f64> = r.trace.best_so_far().collect();
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn darts_search_never_takes_global_steps() {
    let r = run_search(&config(SearchOptimizer::Darts, Mixing::Sigmoid)).unwrap();
    assert!(r.trace.records[1..]
        .iter()
        .all(|rec| rec.mode == Mode::Local));
    let first = r.trace.records[0].loss;
    assert!(r.trace.y_best < first);
}

#[test]
fn unrolled_search_runs() {
    let cfg = BilevelConfig {
        xi: 0.01,
        steps: 30,
        ..config(SearchOptimizer::Hybrid, Mixing::Sigmoid)
    };
    let r = run_search(&cfg).unwrap();
    assert_eq!(r.trace.len(), 31);
    assert_eq!(r.checkpoints.last().unwrap().step, 30);
}
