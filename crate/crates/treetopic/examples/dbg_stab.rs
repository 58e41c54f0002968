use treetopic::experiments::{derive_seed, random_generating_params};
use treetopic::gibbs::{run_chain, ChainOpts, Hyper, InitStrategy};
use treetopic::model::sample_corpus;

fn main() {
    let drt = treetopic::drt::Drt::build(&[(2, 1), (3, 1), (4, 2), (5, 3)].into_iter().collect(), 1).unwrap();
    let truth = random_generating_params(&drt, 10, 0.8, 12345);
    let hyper = Hyper::new(0.8, 0.1, 1.0).unwrap();
    let iters = 1500usize;
    let window = 500usize;
    for seed in 0..10u64 {
        let (corpus, _) = sample_corpus(&truth, 200, 50, derive_seed(7, &[seed]));
        let chain = run_chain(&corpus, &drt, hyper, ChainOpts {
            iters, burnin: iters - 10, thin: 10, strategy: InitStrategy::Random,
            seed: derive_seed(8, &[seed]),
        }).unwrap();
        let mut running = f64::NEG_INFINITY;
        let mut start = f64::NEG_INFINITY;
        for (it, &ll) in chain.loglik_trace.iter().enumerate() {
            running = running.max(ll);
            if it + 1 == iters - window { start = running; }
        }
        let growth = (running - start).abs() / start.abs();
        println!("seed {seed}: start {start:.2} final {running:.2} growth {growth:.6}");
    }
}
