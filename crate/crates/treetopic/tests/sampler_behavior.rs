//! Chain-level behavior on synthetic two-branch data: trace stabilization
//! and the value of the clustering initialization.

mod common;

use rayon::prelude::*;

use treetopic::experiments::{derive_seed, random_generating_params};
use treetopic::gibbs::{run_chain, ChainOpts, Hyper, InitStrategy};
use treetopic::model::sample_corpus;

#[test]
fn running_max_stabilizes_on_synthetic_data() {
    let drt = common::exp1_drt();
    let truth = random_generating_params(&drt, 10, 0.8, 12345);
    let hyper = Hyper::new(0.8, 0.1, 1.0).unwrap();
    let iters = 1500usize;
    let window = 500usize;

    let stable: Vec<bool> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let (corpus, _) = sample_corpus(&truth, 200, 50, derive_seed(7, &[seed]));
            let chain = run_chain(
                &corpus,
                &drt,
                hyper,
                ChainOpts {
                    iters,
                    burnin: iters - 10,
                    thin: 10,
                    strategy: InitStrategy::Random,
                    seed: derive_seed(8, &[seed]),
                },
            )
            .unwrap();
            let mut running = f64::NEG_INFINITY;
            let mut max_at_window_start = f64::NEG_INFINITY;
            for (it, &ll) in chain.loglik_trace.iter().enumerate() {
                running = running.max(ll);
                if it + 1 == iters - window {
                    max_at_window_start = running;
                }
            }
            // Relative growth of the running maximum over the last sweep
            // window (log-likelihoods are negative; compare magnitudes).
            let growth = (running - max_at_window_start).abs() / max_at_window_start.abs();
            growth < 0.001
        })
        .collect();
    let ok = stable.iter().filter(|&&s| s).count();
    assert!(ok >= 8, "only {ok}/10 chains stabilized");
}

#[test]
fn cluster_init_beats_random_in_majority_of_paired_runs() {
    let drt = common::exp1_drt();
    let truth = random_generating_params(&drt, 10, 0.8, 54321);
    let hyper = Hyper::new(0.8, 0.1, 1.0).unwrap();

    let wins: Vec<bool> = (0..10u64)
        .into_par_iter()
        .map(|seed| {
            let (corpus, _) = sample_corpus(&truth, 200, 50, derive_seed(17, &[seed]));
            let opts = |strategy| ChainOpts {
                iters: 600,
                burnin: 500,
                thin: 10,
                strategy,
                seed: derive_seed(18, &[seed]),
            };
            let clustered =
                run_chain(&corpus, &drt, hyper, opts(InitStrategy::LdaCluster)).unwrap();
            let random = run_chain(&corpus, &drt, hyper, opts(InitStrategy::Random)).unwrap();
            let final_clustered = *clustered.loglik_trace.last().unwrap();
            let final_random = *random.loglik_trace.last().unwrap();
            final_clustered > final_random
        })
        .collect();
    let won = wins.iter().filter(|&&w| w).count();
    assert!(
        won >= 6,
        "clustering init won only {won}/10 paired runs"
    );
}
