//! Exactness checks for the collapsed sampler on fully enumerable instances:
//! sweep conditionals against enumerated conditionals, the empirical label
//! distribution against the exact posterior, and the collapsed joint against
//! an independent quadrature route to the marginal likelihood.

mod common;

use statrs::function::gamma::ln_gamma;

use common::{gauss_beta_rule, two_path_drt};
use treetopic::gibbs::{
    heldout_loglik, run_chain, state_at_sample, ChainOpts, ChainSample, Estimates, FoldInOpts,
    GibbsState, Hyper, InitStrategy,
};
use treetopic::model::{doc_loglik, Corpus, LikMode};

const M: usize = 2;
const N: usize = 2;
const V: usize = 2;
const I: usize = 2;
const J: usize = 2;

fn tiny_corpus() -> Corpus {
    // Documents (1, 2) and (2, 2) over a two-word vocabulary.
    Corpus::from_docs(V, vec![vec![1, 2], vec![2, 2]]).unwrap()
}

fn tiny_hyper() -> Hyper {
    Hyper::new(0.8, 0.6, 1.3).unwrap()
}

fn sample_from(c: Vec<usize>, l: Vec<Vec<u8>>) -> ChainSample {
    ChainSample {
        c,
        l,
        joint_loglik: 0.0,
        loglik_x: 0.0,
        estimates: Estimates {
            pi_hat: Vec::new(),
            beta_hat: Vec::new(),
            theta_hat: Vec::new(),
        },
    }
}

/// All (C, L) configurations of the tiny instance.
fn all_configs() -> Vec<(Vec<usize>, Vec<Vec<u8>>)> {
    let mut out = Vec::new();
    for c0 in 0..I {
        for c1 in 0..I {
            for l00 in 0..J as u8 {
                for l01 in 0..J as u8 {
                    for l10 in 0..J as u8 {
                        for l11 in 0..J as u8 {
                            out.push((vec![c0, c1], vec![vec![l00, l01], vec![l10, l11]]));
                        }
                    }
                }
            }
        }
    }
    out
}

fn joint_of(corpus: &Corpus, c: Vec<usize>, l: Vec<Vec<u8>>) -> f64 {
    let state = state_at_sample(corpus, &two_path_drt(), tiny_hyper(), &sample_from(c, l)).unwrap();
    state.joint_loglik()
}

#[test]
fn sweep_conditionals_match_enumeration() {
    let corpus = tiny_corpus();
    let drt = two_path_drt();
    for (c, l) in all_configs() {
        let mut state =
            state_at_sample(&corpus, &drt, tiny_hyper(), &sample_from(c.clone(), l.clone()))
                .unwrap();
        // Depth-label conditionals at every position.
        for i in 0..M {
            for j in 0..N {
                let got = state.l_conditional(i, j);
                let mut joints = Vec::new();
                for depth in 0..J as u8 {
                    let mut l2 = l.clone();
                    l2[i][j] = depth;
                    joints.push(joint_of(&corpus, c.clone(), l2));
                }
                let max = joints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let weights: Vec<f64> = joints.iter().map(|&x| (x - max).exp()).collect();
                let total: f64 = weights.iter().sum();
                for (g, w) in got.iter().zip(&weights) {
                    assert!(
                        (g - w / total).abs() < 1e-12,
                        "L conditional mismatch at c={c:?} l={l:?}: {got:?} vs enumerated"
                    );
                }
            }
        }
        // Path-label conditionals for both documents.
        for i in 0..M {
            let got = state.c_conditional(i);
            let mut joints = Vec::new();
            for cand in 0..I {
                let mut c2 = c.clone();
                c2[i] = cand;
                joints.push(joint_of(&corpus, c2, l.clone()));
            }
            let max = joints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = joints.iter().map(|&x| (x - max).exp()).collect();
            let total: f64 = weights.iter().sum();
            for (g, w) in got.iter().zip(&weights) {
                assert!(
                    (g - w / total).abs() < 1e-12,
                    "C conditional mismatch at c={c:?} l={l:?}"
                );
            }
        }
        assert!(state.check_invariants());
    }
}

#[test]
fn empirical_label_distribution_matches_posterior() {
    let corpus = tiny_corpus();
    let drt = two_path_drt();
    let configs = all_configs();
    let mut exact: std::collections::HashMap<(Vec<usize>, Vec<Vec<u8>>), f64> =
        std::collections::HashMap::new();
    let joints: Vec<f64> = configs
        .iter()
        .map(|(c, l)| joint_of(&corpus, c.clone(), l.clone()))
        .collect();
    let max = joints.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = joints.iter().map(|&x| (x - max).exp()).sum();
    for ((c, l), &j) in configs.iter().zip(&joints) {
        exact.insert((c.clone(), l.clone()), (j - max).exp() / total);
    }

    let mut state =
        GibbsState::init(&corpus, &drt, tiny_hyper(), InitStrategy::Random, 97).unwrap();
    for _ in 0..1000 {
        state.sweep_l();
        state.sweep_c();
    }
    let kept = 100_000usize;
    let mut counts: std::collections::HashMap<(Vec<usize>, Vec<Vec<u8>>), usize> =
        std::collections::HashMap::new();
    for _ in 0..kept {
        state.sweep_l();
        state.sweep_c();
        *counts.entry((state.c.clone(), state.l.clone())).or_insert(0) += 1;
    }
    let mut tv = 0.0;
    for (config, &p) in &exact {
        let emp = counts.get(config).copied().unwrap_or(0) as f64 / kept as f64;
        tv += 0.5 * (p - emp).abs();
    }
    assert!(tv < 0.05, "posterior TV {tv}");
}

/// Per-path mixed likelihood by brute force over topic assignments; used both
/// to calibrate against the library and inside the quadrature oracle.
fn raw_lda_lik(topics: &[[f64; V]], alpha: f64, words: &[usize]) -> f64 {
    let j = topics.len();
    let n = words.len();
    let mut total = 0.0;
    for code in 0..j.pow(n as u32) {
        let mut z = Vec::with_capacity(n);
        let mut cc = code;
        for _ in 0..n {
            z.push(cc % j);
            cc /= j;
        }
        let mut counts = vec![0u32; j];
        let mut lp = ln_gamma(j as f64 * alpha) - ln_gamma(j as f64 * alpha + n as f64);
        for (&zi, &w) in z.iter().zip(words) {
            counts[zi] += 1;
            lp += topics[zi][w - 1].ln();
        }
        for &ck in &counts {
            lp += ln_gamma(alpha + ck as f64) - ln_gamma(alpha);
        }
        total += lp.exp();
    }
    total
}

#[test]
fn collapsed_joint_sums_to_quadrature_evidence() {
    let corpus = tiny_corpus();
    let hyper = tiny_hyper();

    // Route 1: sum the collapsed joint over every label configuration.
    let mut sum = 0.0;
    for (c, l) in all_configs() {
        sum += joint_of(&corpus, c, l).exp();
    }

    // Route 2: integrate the document densities over the topic and path
    // priors with Gauss quadrature (exact for these polynomial integrands).
    // Topic k has distribution (t_k, 1 - t_k) with t_k ~ Beta(eta, eta); the
    // path probability is (p, 1 - p) with p ~ Beta(pi0, pi0).
    let (tn, tw) = gauss_beta_rule(hyper.eta, hyper.eta, 10);
    let (pn, pw) = gauss_beta_rule(hyper.pi0, hyper.pi0, 8);
    let alpha = hyper.alpha;
    let mut evidence = 0.0;
    for (&t1, &w1) in tn.iter().zip(&tw) {
        for (&t2, &w2) in tn.iter().zip(&tw) {
            for (&t3, &w3) in tn.iter().zip(&tw) {
                let theta = [[t1, 1.0 - t1], [t2, 1.0 - t2], [t3, 1.0 - t3]];
                for (&p, &wp) in pn.iter().zip(&pw) {
                    let mut lik = 1.0;
                    for doc in &corpus.docs {
                        let path1 = [theta[0], theta[1]];
                        let path2 = [theta[0], theta[2]];
                        lik *= p * raw_lda_lik(&path1, alpha, doc)
                            + (1.0 - p) * raw_lda_lik(&path2, alpha, doc);
                    }
                    evidence += w1 * w2 * w3 * wp * lik;
                }
            }
        }
    }
    let rel = (sum - evidence).abs() / evidence;
    assert!(
        rel < 1e-9,
        "collapsed sum {sum} vs quadrature evidence {evidence} (rel {rel})"
    );
}

#[test]
fn raw_oracle_matches_library_likelihood() {
    // Calibrates the test-side brute-force likelihood against the library on
    // a generic (injective) parameter set.
    let topics = [[0.75, 0.25], [0.4, 0.6]];
    let words = vec![1usize, 2, 2];
    let raw = raw_lda_lik(&topics, 0.9, &words);
    let params = common::params_from_topics(
        &common::chain_drt(2),
        topics.iter().map(|t| t.to_vec()).collect(),
        vec![1.0],
        0.9,
    );
    let lib = doc_loglik(&params, &[1, 2], LikMode::Exact).unwrap().exp();
    assert!((raw - lib).abs() < 1e-13, "raw {raw} vs lib {lib}");
}

#[test]
fn single_word_marginal_is_uniform() {
    // One single-word document: every topic integrates to its prior mean, so
    // the marginal over both labels is exactly 1/V.
    let corpus = Corpus::from_docs(V, vec![vec![1]]).unwrap();
    let mut sum = 0.0;
    for c in 0..I {
        for l in 0..J as u8 {
            sum += joint_of(&corpus, vec![c], vec![vec![l]]).exp();
        }
    }
    assert!((sum - 1.0 / V as f64).abs() < 1e-12, "marginal {sum}");
}

#[test]
fn foldin_prefers_training_like_documents() {
    // Train on documents dominated by word 1 on one branch and word 4 on the
    // other; a held-out replica of a training document must score higher
    // than its vocabulary-shuffled twin.
    let v = 4;
    let mut docs = Vec::new();
    for _ in 0..10 {
        docs.push(vec![1, 1, 1, 2, 1, 1, 2, 1]);
        docs.push(vec![4, 4, 3, 4, 4, 3, 4, 4]);
    }
    let train = Corpus::from_docs(v, docs).unwrap();
    let drt = two_path_drt();
    let hyper = Hyper::new(0.8, 0.1, 1.0).unwrap();
    let chain = run_chain(
        &train,
        &drt,
        hyper,
        ChainOpts {
            iters: 400,
            burnin: 300,
            thin: 10,
            strategy: InitStrategy::Random,
            seed: 5,
        },
    )
    .unwrap();
    let state = state_at_sample(&train, &drt, hyper, &chain.samples[chain.best_sample]).unwrap();

    let replica = Corpus::from_docs(v, vec![vec![1, 1, 1, 2, 1, 1, 2, 1]]).unwrap();
    // Word identities permuted by 1 -> 3, 2 -> 4: unseen pattern.
    let shuffled = Corpus::from_docs(v, vec![vec![3, 3, 3, 4, 3, 3, 4, 3]]).unwrap();
    let opts = FoldInOpts {
        samples: 40,
        burnin: 100,
        thin: 2,
        feedback: true,
        seed: 11,
    };
    let good = heldout_loglik(&state, &drt, &replica, opts).unwrap();
    let bad = heldout_loglik(&state, &drt, &shuffled, opts).unwrap();
    assert!(good.is_finite() && bad.is_finite());
    assert!(good > bad, "replica {good} should beat shuffled {bad}");
}

#[test]
fn foldin_single_sample_is_plugin_value() {
    let train = Corpus::from_docs(2, vec![vec![1, 2], vec![2, 2]]).unwrap();
    let drt = two_path_drt();
    let hyper = tiny_hyper();
    let chain = run_chain(
        &train,
        &drt,
        hyper,
        ChainOpts {
            iters: 50,
            burnin: 40,
            thin: 2,
            strategy: InitStrategy::Random,
            seed: 3,
        },
    )
    .unwrap();
    let state = state_at_sample(&train, &drt, hyper, &chain.samples[chain.best_sample]).unwrap();
    let heldout = Corpus::from_docs(2, vec![vec![1, 1]]).unwrap();
    let one = heldout_loglik(
        &state,
        &drt,
        &heldout,
        FoldInOpts {
            samples: 1,
            burnin: 30,
            thin: 1,
            feedback: true,
            seed: 13,
        },
    )
    .unwrap();
    assert!(one.is_finite());
}
