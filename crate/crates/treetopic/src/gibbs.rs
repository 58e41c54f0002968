//! Collapsed Gibbs sampler over path labels `C` and depth labels `L`.
//!
//! Topics, per-document mixtures and path probabilities are integrated out by
//! Dirichlet-multinomial conjugacy; the sampler alternates a sweep over all
//! depth labels with a sweep over all document path labels, maintaining the
//! count matrices
//!
//! - `M[c]`: documents on path `c`,
//! - `N[v][k]`: occurrences of word `v` assigned to node `k`,
//! - `Ntilde[i][k]`: words of document `i` assigned to node `k` (nonzero only
//!   on the document's current path).
//!
//! The module requires every maximal path to have the same length `J`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::drt::{Drt, PathTable};
use crate::error::GibbsError;
use crate::geometry::min_cost_assignment;
use crate::model::{log_sum_exp, sample_categorical, Corpus, ModelParams};

/// Prior concentrations: document-depth `alpha`, topic-word `eta`, path `pi0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyper {
    pub alpha: f64,
    pub eta: f64,
    pub pi0: f64,
}

impl Hyper {
    pub fn new(alpha: f64, eta: f64, pi0: f64) -> Result<Self, GibbsError> {
        if !(alpha > 0.0 && eta > 0.0 && pi0 > 0.0) {
            return Err(GibbsError::Invalid {
                detail: "hyperparameters must be positive".into(),
            });
        }
        Ok(Hyper { alpha, eta, pi0 })
    }
}

/// Initialization strategy for a chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitStrategy {
    /// Uniform random labels.
    Random,
    /// Flat topic-model fit followed by agglomerative clustering of the
    /// sparsified per-document mixtures; falls back to random (with a flag)
    /// when the documents cannot be grouped into one cluster per path.
    LdaCluster,
}

/// Mutable sampler state bound to one corpus and one tree.
pub struct GibbsState<'a> {
    corpus: &'a Corpus,
    /// 0-based node index at `[path][depth]`.
    z: Vec<Vec<usize>>,
    path_count: usize,
    depth: usize,
    node_count: usize,
    vocab: usize,
    hyper: Hyper,
    pub c: Vec<usize>,
    pub l: Vec<Vec<u8>>,
    m_counts: Vec<u32>,
    n_counts: Vec<u32>,
    n_col: Vec<u32>,
    ntilde: Vec<u32>,
    /// Frozen background counts added to `N` during fold-in evaluation.
    base_n: Vec<u32>,
    base_col: Vec<u32>,
    /// Whether fold-in overlay counts feed back into the word-node terms.
    feedback: bool,
    rng: ChaCha8Rng,
    pub init_fallback: bool,
}

/// Posterior-mean parameter estimates given `(C, L)`.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub pi_hat: Vec<f64>,
    /// Per-document mixture over nodes; zero off the document's path.
    pub beta_hat: Vec<Vec<f64>>,
    /// Topic-word table, `theta_hat[k][v]`.
    pub theta_hat: Vec<Vec<f64>>,
}

/// One retained posterior sample.
#[derive(Debug, Clone)]
pub struct ChainSample {
    pub c: Vec<usize>,
    pub l: Vec<Vec<u8>>,
    pub joint_loglik: f64,
    /// `log p(X | C, L)`, the term averaged by the harmonic-mean estimator.
    pub loglik_x: f64,
    pub estimates: Estimates,
}

/// Output of a single chain.
#[derive(Debug, Clone)]
pub struct ChainResult {
    pub samples: Vec<ChainSample>,
    pub loglik_trace: Vec<f64>,
    pub best_sample: usize,
    /// Harmonic-mean estimate of the data log-likelihood over the samples.
    pub harmonic_mean_loglik: f64,
    pub init_fallback: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct ChainOpts {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub strategy: InitStrategy,
    pub seed: u64,
}

impl Default for ChainOpts {
    fn default() -> Self {
        ChainOpts {
            iters: 5500,
            burnin: 5000,
            thin: 10,
            strategy: InitStrategy::Random,
            seed: 0,
        }
    }
}

fn uniform_depth_of(table: &PathTable) -> Result<usize, GibbsError> {
    table.uniform_depth().ok_or_else(|| GibbsError::Invalid {
        detail: "the sampler requires all paths to share one length".into(),
    })
}

impl<'a> GibbsState<'a> {
    /// Builds a state with labels drawn by `strategy`, counts rebuilt from
    /// the labels and verified.
    pub fn init(
        corpus: &'a Corpus,
        drt: &Drt,
        hyper: Hyper,
        strategy: InitStrategy,
        seed: u64,
    ) -> Result<Self, GibbsError> {
        let (table, _) = drt.enumerate_paths();
        let depth = uniform_depth_of(&table)?;
        let path_count = table.path_count();
        let node_count = drt.node_count();
        let vocab = corpus.vocab_size;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let m = corpus.doc_count();
        let mut init_fallback = false;
        let c: Vec<usize> = if path_count == 1 {
            vec![0; m]
        } else {
            match strategy {
                InitStrategy::Random => (0..m)
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..path_count))
                    .collect(),
                InitStrategy::LdaCluster => {
                    match lda_cluster_labels(corpus, drt, hyper, depth, seed ^ 0x5eed) {
                        Ok(labels) => labels,
                        Err(GibbsError::Shape { .. }) => {
                            init_fallback = true;
                            (0..m)
                                .map(|_| rand::Rng::gen_range(&mut rng, 0..path_count))
                                .collect()
                        }
                        Err(e) => return Err(e),
                    }
                }
            }
        };
        let l: Vec<Vec<u8>> = corpus
            .docs
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|_| rand::Rng::gen_range(&mut rng, 0..depth) as u8)
                    .collect()
            })
            .collect();

        let z: Vec<Vec<usize>> = table
            .paths()
            .iter()
            .map(|p| p.iter().map(|&v| v - 1).collect())
            .collect();
        let mut state = GibbsState {
            corpus,
            z,
            path_count,
            depth,
            node_count,
            vocab,
            hyper,
            c,
            l,
            m_counts: vec![0; path_count],
            n_counts: vec![0; vocab * node_count],
            n_col: vec![0; node_count],
            ntilde: vec![0; m * node_count],
            base_n: vec![0; vocab * node_count],
            base_col: vec![0; node_count],
            feedback: true,
            rng,
            init_fallback,
        };
        state.rebuild_counts();
        debug_assert!(state.check_invariants());
        Ok(state)
    }

    fn rebuild_counts(&mut self) {
        self.m_counts.iter_mut().for_each(|x| *x = 0);
        self.n_counts.iter_mut().for_each(|x| *x = 0);
        self.n_col.iter_mut().for_each(|x| *x = 0);
        self.ntilde.iter_mut().for_each(|x| *x = 0);
        for i in 0..self.corpus.doc_count() {
            self.m_counts[self.c[i]] += 1;
            for (j, &w) in self.corpus.docs[i].iter().enumerate() {
                let k = self.z[self.c[i]][self.l[i][j] as usize];
                self.n_counts[(w - 1) * self.node_count + k] += 1;
                self.n_col[k] += 1;
                self.ntilde[i * self.node_count + k] += 1;
            }
        }
    }

    /// Verifies the count matrices against the labels.
    pub fn check_invariants(&self) -> bool {
        let m = self.corpus.doc_count();
        let mut m_chk = vec![0u32; self.path_count];
        let mut n_chk = vec![0u32; self.vocab * self.node_count];
        let mut nt_chk = vec![0u32; m * self.node_count];
        for i in 0..m {
            m_chk[self.c[i]] += 1;
            for (j, &w) in self.corpus.docs[i].iter().enumerate() {
                let k = self.z[self.c[i]][self.l[i][j] as usize];
                n_chk[(w - 1) * self.node_count + k] += 1;
                nt_chk[i * self.node_count + k] += 1;
            }
        }
        let col_ok = (0..self.node_count).all(|k| {
            let s: u32 = (0..self.vocab)
                .map(|v| self.n_counts[v * self.node_count + k])
                .sum();
            s == self.n_col[k]
        });
        let off_path_ok = (0..m).all(|i| {
            (0..self.node_count).all(|k| {
                self.ntilde[i * self.node_count + k] == 0 || self.z[self.c[i]].contains(&k)
            })
        });
        m_chk == self.m_counts && n_chk == self.n_counts && nt_chk == self.ntilde
            && col_ok
            && off_path_ok
    }

    pub fn hyper(&self) -> Hyper {
        self.hyper
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn path_count(&self) -> usize {
        self.path_count
    }

    #[inline]
    fn n_at(&self, v0: usize, k: usize) -> u32 {
        self.base_n[v0 * self.node_count + k]
            + if self.feedback {
                self.n_counts[v0 * self.node_count + k]
            } else {
                0
            }
    }

    #[inline]
    fn col_at(&self, k: usize) -> u32 {
        self.base_col[k] + if self.feedback { self.n_col[k] } else { 0 }
    }

    /// One full sweep over all depth labels, documents and words in index
    /// order.
    pub fn sweep_l(&mut self) {
        let eta = self.hyper.eta;
        let alpha = self.hyper.alpha;
        let veta = self.vocab as f64 * eta;
        let mut weights = vec![0.0f64; self.depth];
        for i in 0..self.corpus.doc_count() {
            let zc = &self.z[self.c[i]];
            for j in 0..self.corpus.docs[i].len() {
                let w0 = self.corpus.docs[i][j] - 1;
                let k_old = zc[self.l[i][j] as usize];
                self.n_counts[w0 * self.node_count + k_old] -= 1;
                self.n_col[k_old] -= 1;
                self.ntilde[i * self.node_count + k_old] -= 1;

                for (d, &k) in zc.iter().enumerate() {
                    let word_term = (self.n_at(w0, k) as f64 + eta)
                        / (self.col_at(k) as f64 + veta);
                    let doc_term = self.ntilde[i * self.node_count + k] as f64 + alpha;
                    weights[d] = word_term * doc_term;
                }
                let d_new = sample_categorical(&weights, &mut self.rng);
                let k_new = zc[d_new];
                self.l[i][j] = d_new as u8;
                self.n_counts[w0 * self.node_count + k_new] += 1;
                self.n_col[k_new] += 1;
                self.ntilde[i * self.node_count + k_new] += 1;
            }
        }
    }

    /// One full sweep over all path labels in document order.
    pub fn sweep_c(&mut self) {
        if self.path_count == 1 {
            return;
        }
        for i in 0..self.corpus.doc_count() {
            let logw = self.c_logweights_with_doc_removed(i);
            let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = logw.iter().map(|&x| (x - max).exp()).collect();
            let c_new = sample_categorical(&weights, &mut self.rng);
            self.attach_doc(i, c_new);
        }
    }

    /// Removes document `i` from the counts and returns the log-weights of
    /// its path conditional. The caller must re-attach with [`attach_doc`].
    fn c_logweights_with_doc_removed(&mut self, i: usize) -> Vec<f64> {
        let c_old = self.c[i];
        self.m_counts[c_old] -= 1;
        for (j, &w) in self.corpus.docs[i].iter().enumerate() {
            let k = self.z[c_old][self.l[i][j] as usize];
            self.n_counts[(w - 1) * self.node_count + k] -= 1;
            self.n_col[k] -= 1;
            self.ntilde[i * self.node_count + k] -= 1;
        }

        // Depth-grouped word counts of the document under its current labels.
        let mut depth_words: Vec<Vec<(usize, u32)>> = vec![Vec::new(); self.depth];
        let mut depth_totals = vec![0u32; self.depth];
        for (j, &w) in self.corpus.docs[i].iter().enumerate() {
            let d = self.l[i][j] as usize;
            depth_totals[d] += 1;
            let bucket = &mut depth_words[d];
            match bucket.iter_mut().find(|(v, _)| *v == w - 1) {
                Some((_, c)) => *c += 1,
                None => bucket.push((w - 1, 1)),
            }
        }

        let eta = self.hyper.eta;
        let veta = self.vocab as f64 * eta;
        let pi0 = self.hyper.pi0;
        (0..self.path_count)
            .map(|cand| {
                let mut lw = (self.m_counts[cand] as f64 + pi0).ln();
                for d in 0..self.depth {
                    if depth_totals[d] == 0 {
                        continue;
                    }
                    let k = self.z[cand][d];
                    for &(v0, cnt) in &depth_words[d] {
                        let base = self.n_at(v0, k) as f64 + eta;
                        for t in 0..cnt {
                            lw += (base + t as f64).ln();
                        }
                    }
                    let base = self.col_at(k) as f64 + veta;
                    for t in 0..depth_totals[d] {
                        lw -= (base + t as f64).ln();
                    }
                }
                lw
            })
            .collect()
    }

    /// Re-attaches document `i` on path `c_new`, rerouting its counts.
    fn attach_doc(&mut self, i: usize, c_new: usize) {
        self.c[i] = c_new;
        self.m_counts[c_new] += 1;
        for (j, &w) in self.corpus.docs[i].iter().enumerate() {
            let k = self.z[c_new][self.l[i][j] as usize];
            self.n_counts[(w - 1) * self.node_count + k] += 1;
            self.n_col[k] += 1;
            self.ntilde[i * self.node_count + k] += 1;
        }
    }

    /// Normalized conditional of one depth label given everything else.
    pub fn l_conditional(&mut self, i: usize, j: usize) -> Vec<f64> {
        let zc = &self.z[self.c[i]];
        let w0 = self.corpus.docs[i][j] - 1;
        let k_old = zc[self.l[i][j] as usize];
        self.n_counts[w0 * self.node_count + k_old] -= 1;
        self.n_col[k_old] -= 1;
        self.ntilde[i * self.node_count + k_old] -= 1;

        let eta = self.hyper.eta;
        let veta = self.vocab as f64 * eta;
        let alpha = self.hyper.alpha;
        let mut weights: Vec<f64> = self.z[self.c[i]]
            .iter()
            .map(|&k| {
                (self.n_at(w0, k) as f64 + eta) / (self.col_at(k) as f64 + veta)
                    * (self.ntilde[i * self.node_count + k] as f64 + alpha)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= total);

        let zc = &self.z[self.c[i]];
        let k_back = zc[self.l[i][j] as usize];
        self.n_counts[w0 * self.node_count + k_back] += 1;
        self.n_col[k_back] += 1;
        self.ntilde[i * self.node_count + k_back] += 1;
        weights
    }

    /// Normalized conditional of one path label given everything else.
    pub fn c_conditional(&mut self, i: usize) -> Vec<f64> {
        let c_old = self.c[i];
        let logw = self.c_logweights_with_doc_removed(i);
        self.attach_doc(i, c_old);
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut weights: Vec<f64> = logw.iter().map(|&x| (x - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|x| *x /= total);
        weights
    }

    /// `log p(X | C, L)` from the word-node counts.
    pub fn loglik_x(&self) -> f64 {
        let eta = self.hyper.eta;
        let veta = self.vocab as f64 * eta;
        let ln_g_eta = ln_gamma(eta);
        let ln_g_veta = ln_gamma(veta);
        let mut lp = 0.0;
        for k in 0..self.node_count {
            lp += ln_g_veta - ln_gamma(self.n_col[k] as f64 + veta);
        }
        for v in 0..self.vocab {
            for k in 0..self.node_count {
                let n = self.n_counts[v * self.node_count + k];
                if n > 0 {
                    lp += ln_gamma(n as f64 + eta) - ln_g_eta;
                }
            }
        }
        lp
    }

    /// `log p(C, L)` from the path and depth counts.
    pub fn loglik_cl(&self) -> f64 {
        let m = self.corpus.doc_count();
        let pi0 = self.hyper.pi0;
        let alpha = self.hyper.alpha;
        let i_count = self.path_count as f64;
        let j_count = self.depth as f64;

        let mut lp = ln_gamma(i_count * pi0) - i_count * ln_gamma(pi0)
            - ln_gamma(m as f64 + i_count * pi0);
        for &mc in &self.m_counts {
            lp += ln_gamma(mc as f64 + pi0);
        }

        let per_doc_norm = ln_gamma(j_count * alpha) - j_count * ln_gamma(alpha);
        for i in 0..m {
            let n_i = self.corpus.docs[i].len() as f64;
            lp += per_doc_norm - ln_gamma(n_i + j_count * alpha);
            for &k in &self.z[self.c[i]] {
                lp += ln_gamma(self.ntilde[i * self.node_count + k] as f64 + alpha);
            }
        }
        lp
    }

    /// Joint collapsed log-likelihood `log p(X | C, L) + log p(C, L)`.
    pub fn joint_loglik(&self) -> f64 {
        self.loglik_x() + self.loglik_cl()
    }

    /// Posterior-mean estimates at the current labels.
    pub fn estimate_params(&self) -> Estimates {
        let m = self.corpus.doc_count();
        let i_count = self.path_count as f64;
        let j_count = self.depth as f64;
        let pi0 = self.hyper.pi0;
        let alpha = self.hyper.alpha;
        let eta = self.hyper.eta;
        let veta = self.vocab as f64 * eta;

        let pi_hat: Vec<f64> = self
            .m_counts
            .iter()
            .map(|&mc| (mc as f64 + pi0) / (m as f64 + i_count * pi0))
            .collect();
        let beta_hat: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let n_i = self.corpus.docs[i].len() as f64;
                let mut row = vec![0.0; self.node_count];
                for &k in &self.z[self.c[i]] {
                    row[k] = (self.ntilde[i * self.node_count + k] as f64 + alpha)
                        / (n_i + j_count * alpha);
                }
                row
            })
            .collect();
        let theta_hat: Vec<Vec<f64>> = (0..self.node_count)
            .map(|k| {
                let denom = self.n_col[k] as f64 + veta;
                (0..self.vocab)
                    .map(|v| (self.n_counts[v * self.node_count + k] as f64 + eta) / denom)
                    .collect()
            })
            .collect();
        Estimates {
            pi_hat,
            beta_hat,
            theta_hat,
        }
    }

    fn snapshot(&self) -> ChainSample {
        ChainSample {
            c: self.c.clone(),
            l: self.l.clone(),
            joint_loglik: self.joint_loglik(),
            loglik_x: self.loglik_x(),
            estimates: self.estimate_params(),
        }
    }
}

/// Runs one chain: per iteration a full `L` sweep then a full `C` sweep,
/// recording the joint log-likelihood and keeping every `thin`-th state after
/// `burnin`.
pub fn run_chain(
    corpus: &Corpus,
    drt: &Drt,
    hyper: Hyper,
    opts: ChainOpts,
) -> Result<ChainResult, GibbsError> {
    if opts.iters <= opts.burnin {
        return Err(GibbsError::Invalid {
            detail: "iters must exceed burnin".into(),
        });
    }
    if opts.thin == 0 {
        return Err(GibbsError::Invalid {
            detail: "thin must be at least 1".into(),
        });
    }
    let mut state = GibbsState::init(corpus, drt, hyper, opts.strategy, opts.seed)?;
    let mut trace = Vec::with_capacity(opts.iters);
    let mut samples = Vec::new();
    for it in 1..=opts.iters {
        state.sweep_l();
        state.sweep_c();
        trace.push(state.joint_loglik());
        if it > opts.burnin && (it - opts.burnin) % opts.thin == 0 {
            samples.push(state.snapshot());
        }
    }
    let best_sample = samples
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.joint_loglik.partial_cmp(&b.1.joint_loglik).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let harmonic_mean_loglik = harmonic_mean_log(
        &samples.iter().map(|s| s.loglik_x).collect::<Vec<_>>(),
    );
    Ok(ChainResult {
        samples,
        loglik_trace: trace,
        best_sample,
        harmonic_mean_loglik,
        init_fallback: state.init_fallback,
        seed: opts.seed,
    })
}

/// Harmonic mean of likelihoods given on the log scale.
pub fn harmonic_mean_log(logliks: &[f64]) -> f64 {
    if logliks.is_empty() {
        return f64::NEG_INFINITY;
    }
    let negated: Vec<f64> = logliks.iter().map(|&x| -x).collect();
    -(log_sum_exp(&negated) - (logliks.len() as f64).ln())
}

/// Chain mixture for multi-chain runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainStrategy {
    AllRandom,
    /// Half the chains (rounding up) use the clustering initialization.
    Mixed,
}

#[derive(Debug, Clone, Copy)]
pub struct MultiChainOpts {
    pub chains: usize,
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub strategy: ChainStrategy,
    pub seed: u64,
}

impl Default for MultiChainOpts {
    fn default() -> Self {
        MultiChainOpts {
            chains: 8,
            iters: 5500,
            burnin: 5000,
            thin: 10,
            strategy: ChainStrategy::Mixed,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiChainResult {
    pub chains: Vec<ChainResult>,
    /// Index of the chain with the highest harmonic-mean data log-likelihood.
    pub best_chain: usize,
}

impl MultiChainResult {
    pub fn best(&self) -> &ChainResult {
        &self.chains[self.best_chain]
    }
}

/// Runs independent chains in parallel and selects by harmonic-mean data
/// log-likelihood.
pub fn run_chains(
    corpus: &Corpus,
    drt: &Drt,
    hyper: Hyper,
    opts: MultiChainOpts,
) -> Result<MultiChainResult, GibbsError> {
    if opts.chains == 0 {
        return Err(GibbsError::Invalid {
            detail: "need at least one chain".into(),
        });
    }
    let chain_opts: Vec<ChainOpts> = (0..opts.chains)
        .map(|idx| ChainOpts {
            iters: opts.iters,
            burnin: opts.burnin,
            thin: opts.thin,
            strategy: match opts.strategy {
                ChainStrategy::AllRandom => InitStrategy::Random,
                ChainStrategy::Mixed => {
                    if idx % 2 == 0 {
                        InitStrategy::LdaCluster
                    } else {
                        InitStrategy::Random
                    }
                }
            },
            seed: opts.seed.wrapping_add(1_000_003u64.wrapping_mul(idx as u64 + 1)),
        })
        .collect();
    let chains: Result<Vec<ChainResult>, GibbsError> = chain_opts
        .into_par_iter()
        .map(|co| run_chain(corpus, drt, hyper, co))
        .collect();
    let chains = chains?;
    let best_chain = chains
        .iter()
        .enumerate()
        .max_by(|a, b| {
            a.1.harmonic_mean_loglik
                .partial_cmp(&b.1.harmonic_mean_loglik)
                .unwrap()
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(MultiChainResult { chains, best_chain })
}

/// Rebuilds a sampler state at a retained sample.
pub fn state_at_sample<'a>(
    corpus: &'a Corpus,
    drt: &Drt,
    hyper: Hyper,
    sample: &ChainSample,
) -> Result<GibbsState<'a>, GibbsError> {
    let mut state = GibbsState::init(corpus, drt, hyper, InitStrategy::Random, 0)?;
    state.c = sample.c.clone();
    state.l = sample.l.clone();
    state.rebuild_counts();
    Ok(state)
}

/// Averages the per-sample estimates of a chain.
pub fn posterior_mean_estimates(chain: &ChainResult) -> Estimates {
    let s = chain.samples.len().max(1) as f64;
    let first = &chain.samples[0].estimates;
    let mut pi_hat = vec![0.0; first.pi_hat.len()];
    let mut beta_hat = vec![vec![0.0; first.beta_hat[0].len()]; first.beta_hat.len()];
    let mut theta_hat = vec![vec![0.0; first.theta_hat[0].len()]; first.theta_hat.len()];
    for sample in &chain.samples {
        for (a, b) in pi_hat.iter_mut().zip(&sample.estimates.pi_hat) {
            *a += b / s;
        }
        for (row_a, row_b) in beta_hat.iter_mut().zip(&sample.estimates.beta_hat) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b / s;
            }
        }
        for (row_a, row_b) in theta_hat.iter_mut().zip(&sample.estimates.theta_hat) {
            for (a, b) in row_a.iter_mut().zip(row_b) {
                *a += b / s;
            }
        }
    }
    Estimates {
        pi_hat,
        beta_hat,
        theta_hat,
    }
}

/// Fold-in evaluation settings.
#[derive(Debug, Clone, Copy)]
pub struct FoldInOpts {
    /// Retained samples for the harmonic mean.
    pub samples: usize,
    /// Burn-in sweeps before retaining.
    pub burnin: usize,
    /// Sweeps between retained samples.
    pub thin: usize,
    /// Whether held-out counts feed back into the word-node probabilities
    /// while sampling held-out labels.
    pub feedback: bool,
    pub seed: u64,
}

impl Default for FoldInOpts {
    fn default() -> Self {
        FoldInOpts {
            samples: 50,
            burnin: 200,
            thin: 5,
            feedback: true,
            seed: 0,
        }
    }
}

/// Held-out per-document log-likelihood by fold-in: training counts are
/// frozen, held-out labels are Gibbs-sampled against them, and the marginal
/// likelihood of the held-out words is the harmonic mean of their predictive
/// likelihood over the retained samples.
pub fn heldout_loglik(
    train: &GibbsState<'_>,
    drt: &Drt,
    heldout: &Corpus,
    opts: FoldInOpts,
) -> Result<f64, GibbsError> {
    if heldout.vocab_size != train.vocab {
        return Err(GibbsError::Domain {
            detail: "held-out vocabulary differs from training".into(),
        });
    }
    if heldout.doc_count() == 0 {
        return Err(GibbsError::Domain {
            detail: "held-out corpus is empty".into(),
        });
    }
    let mut state = GibbsState::init(heldout, drt, train.hyper, InitStrategy::Random, opts.seed)?;
    state.base_n = train.n_counts.clone();
    for (b, t) in state.base_n.iter_mut().zip(&train.base_n) {
        *b += *t;
    }
    state.base_col = train.n_col.clone();
    for (b, t) in state.base_col.iter_mut().zip(&train.base_col) {
        *b += *t;
    }
    state.feedback = opts.feedback;

    for _ in 0..opts.burnin {
        state.sweep_l();
        state.sweep_c();
    }
    let mut predictive = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        for _ in 0..opts.thin {
            state.sweep_l();
            state.sweep_c();
        }
        predictive.push(predictive_loglik(&state));
    }
    Ok(harmonic_mean_log(&predictive) / heldout.doc_count() as f64)
}

/// `log p(X_heldout | C, L, frozen training counts)`: the predictive
/// likelihood of the overlay counts against the frozen background.
fn predictive_loglik(state: &GibbsState<'_>) -> f64 {
    let eta = state.hyper.eta;
    let veta = state.vocab as f64 * eta;
    let mut lp = 0.0;
    for k in 0..state.node_count {
        let overlay_col = state.n_col[k];
        if overlay_col == 0 {
            continue;
        }
        let base = state.base_col[k] as f64 + veta;
        lp -= ln_gamma(base + overlay_col as f64) - ln_gamma(base);
        for v in 0..state.vocab {
            let overlay = state.n_counts[v * state.node_count + k];
            if overlay == 0 {
                continue;
            }
            let base = state.base_n[v * state.node_count + k] as f64 + eta;
            lp += ln_gamma(base + overlay as f64) - ln_gamma(base);
        }
    }
    lp
}

/// Result of matching estimated topics to the truth.
#[derive(Debug, Clone)]
pub struct MatchCheck {
    /// `sigma[k]` is the 0-based estimated row matched to true node `k + 1`.
    pub sigma: Vec<usize>,
    pub d_l2: f64,
    /// Whether the matched topics occupy the same tree roles: the image of
    /// every true path node-set under `sigma` is an estimated path node-set.
    pub sharing_ok: bool,
}

/// Optimal matching of estimated topics to true topics with a
/// sharing-structure check and the assignment-based topic distance.
pub fn match_and_check(
    truth: &ModelParams,
    theta_hat: &[Vec<f64>],
    est_drt: &Drt,
) -> Result<MatchCheck, GibbsError> {
    let k = truth.hierarchy.drt.node_count();
    if theta_hat.len() != k || est_drt.node_count() != k {
        return Err(GibbsError::Domain {
            detail: "node counts differ between truth and estimate".into(),
        });
    }
    let truth_topics = truth.hierarchy.topic_map.topics();
    let mut cost = vec![vec![0.0f64; k]; k];
    for (a, row) in cost.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = crate::geometry::dist(&truth_topics[a], &theta_hat[b]);
        }
    }
    let (sigma, _) = min_cost_assignment(&cost);

    let (true_table, _) = truth.hierarchy.drt.enumerate_paths();
    let (est_table, _) = est_drt.enumerate_paths();
    let mut mapped: Vec<Vec<usize>> = true_table
        .paths()
        .iter()
        .map(|p| {
            let mut s: Vec<usize> = p.iter().map(|&v| sigma[v - 1] + 1).collect();
            s.sort_unstable();
            s
        })
        .collect();
    let mut est_sets: Vec<Vec<usize>> = est_table
        .paths()
        .iter()
        .map(|p| {
            let mut s = p.clone();
            s.sort_unstable();
            s
        })
        .collect();
    mapped.sort();
    est_sets.sort();
    let sharing_ok = mapped == est_sets;

    let d_l2 = d_l2_tables(
        truth_topics,
        theta_hat,
        &truth.hierarchy.drt,
    )
    .map_err(|e| GibbsError::Domain {
        detail: e.to_string(),
    })?;
    Ok(MatchCheck {
        sigma,
        d_l2,
        sharing_ok,
    })
}

/// Assignment-based topic distance on raw tables (no injectivity demands on
/// the estimate).
pub fn d_l2_tables(
    ta: &[Vec<f64>],
    tb: &[Vec<f64>],
    drt: &Drt,
) -> Result<f64, GibbsError> {
    let (table, _) = drt.enumerate_paths();
    let paths = table.paths();
    let n = paths.len();
    let mut cost = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            cost[i][j] = if paths[i].len() == paths[j].len() {
                let jlen = paths[i].len();
                if jlen == 1 {
                    crate::geometry::dist(&ta[paths[i][0] - 1], &tb[paths[j][0] - 1])
                } else {
                    let mut inner = vec![vec![0.0f64; jlen]; jlen];
                    for (x, &na) in paths[i].iter().enumerate() {
                        for (y, &nb) in paths[j].iter().enumerate() {
                            inner[x][y] = crate::geometry::dist(&ta[na - 1], &tb[nb - 1]);
                        }
                    }
                    min_cost_assignment(&inner).1
                }
            } else {
                crate::geometry::assignment::FORBIDDEN
            };
        }
    }
    let (_, total) = min_cost_assignment(&cost);
    if total >= crate::geometry::assignment::FORBIDDEN / 2.0 {
        return Err(GibbsError::Domain {
            detail: "no length-compatible path matching".into(),
        });
    }
    Ok(total)
}

/// Clustering-based initial path labels: fit a flat chain-tree model, keep
/// each document's strongest `depth` node weights, cluster the sparsified
/// mixtures bottom-up with average linkage and cut to one cluster per path.
fn lda_cluster_labels(
    corpus: &Corpus,
    drt: &Drt,
    hyper: Hyper,
    depth: usize,
    seed: u64,
) -> Result<Vec<usize>, GibbsError> {
    let (table, _) = drt.enumerate_paths();
    let path_count = table.path_count();
    let m = corpus.doc_count();
    if m < path_count {
        return Err(GibbsError::Shape {
            detail: format!("{m} documents cannot fill {path_count} paths"),
        });
    }
    let k = drt.node_count();
    let chain_parents: std::collections::BTreeMap<usize, usize> =
        (2..=k).map(|v| (v, v - 1)).collect();
    let chain = Drt::build(&chain_parents, 1).expect("chain tree is valid");
    // The top-`depth` truncation below supplies the sparsity; a collapsed
    // concentration here would pin each document to one node and erase the
    // path structure the clustering needs.
    let flat_hyper = Hyper {
        alpha: 1.0,
        eta: hyper.eta,
        pi0: 1.0,
    };
    let flat = run_chain(
        corpus,
        &chain,
        flat_hyper,
        ChainOpts {
            iters: 500,
            burnin: 400,
            thin: 10,
            strategy: InitStrategy::Random,
            seed,
        },
    )?;
    let best = &flat.samples[flat.best_sample];
    let mut vectors: Vec<Vec<f64>> = best.estimates.beta_hat.clone();
    for v in &mut vectors {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap());
        for &i in idx.iter().skip(depth) {
            v[i] = 0.0;
        }
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            v.iter_mut().for_each(|x| *x /= s);
        }
    }

    // Cap the clustering problem; stragglers join the nearest cluster mean.
    let cap = 2000usize.min(m);
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc1u64);
    for i in (1..order.len()).rev() {
        let j = rand::Rng::gen_range(&mut rng, 0..=i);
        order.swap(i, j);
    }
    let core: Vec<usize> = order[..cap].to_vec();
    let core_vecs: Vec<&Vec<f64>> = core.iter().map(|&i| &vectors[i]).collect();
    let clusters = average_linkage_cut(&core_vecs, path_count);

    let mut means: Vec<Vec<f64>> = vec![vec![0.0; k]; path_count];
    let mut sizes = vec![0usize; path_count];
    for (pos, &cl) in clusters.iter().enumerate() {
        sizes[cl] += 1;
        for (a, b) in means[cl].iter_mut().zip(core_vecs[pos]) {
            *a += b;
        }
    }
    if sizes.iter().any(|&s| s == 0) {
        return Err(GibbsError::Shape {
            detail: "clustering produced an empty group".into(),
        });
    }
    for (mean, &s) in means.iter_mut().zip(&sizes) {
        mean.iter_mut().for_each(|x| *x /= s as f64);
    }
    // Largest cluster takes the first path, and so on.
    let mut by_size: Vec<usize> = (0..path_count).collect();
    by_size.sort_by_key(|&c| std::cmp::Reverse(sizes[c]));
    let mut cluster_to_path = vec![0usize; path_count];
    for (path, &cl) in by_size.iter().enumerate() {
        cluster_to_path[cl] = path;
    }

    let labels: Vec<usize> = (0..m)
        .map(|i| {
            let v = &vectors[i];
            let mut best_c = 0;
            let mut best_d = f64::INFINITY;
            for (cl, mean) in means.iter().enumerate() {
                let d: f64 = v
                    .iter()
                    .zip(mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d < best_d {
                    best_d = d;
                    best_c = cl;
                }
            }
            cluster_to_path[best_c]
        })
        .collect();
    Ok(labels)
}

/// Average-linkage agglomerative clustering cut to `target` clusters.
/// Nearest-neighbor-chain merging with Lance-Williams updates.
fn average_linkage_cut(vectors: &[&Vec<f64>], target: usize) -> Vec<usize> {
    let n = vectors.len();
    assert!(n >= target && target >= 1);
    if target == n {
        return (0..n).collect();
    }
    let mut d = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dist: f64 = vectors[i]
                .iter()
                .zip(vectors[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d[i * n + j] = dist;
            d[j * n + i] = dist;
        }
    }
    let mut active: Vec<bool> = vec![true; n];
    let mut size = vec![1usize; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();

    for _ in 0..n - 1 {
        if chain.is_empty() {
            let start = active.iter().position(|&a| a).expect("clusters remain");
            chain.push(start);
        }
        loop {
            let top = *chain.last().unwrap();
            let mut nn = usize::MAX;
            let mut nn_d = f64::INFINITY;
            for j in 0..n {
                if j != top && active[j] {
                    let dj = d[top * n + j];
                    if dj < nn_d {
                        nn_d = dj;
                        nn = j;
                    }
                }
            }
            if chain.len() >= 2 && chain[chain.len() - 2] == nn {
                // Reciprocal nearest neighbors: merge nn into top.
                chain.pop();
                chain.pop();
                let (a, b) = (top.min(nn), top.max(nn));
                merges.push((a, b, nn_d));
                let (sa, sb) = (size[a] as f64, size[b] as f64);
                for j in 0..n {
                    if j != a && j != b && active[j] {
                        let upd = (sa * d[a * n + j] + sb * d[b * n + j]) / (sa + sb);
                        d[a * n + j] = upd;
                        d[j * n + a] = upd;
                    }
                }
                size[a] += size[b];
                active[b] = false;
                break;
            }
            chain.push(nn);
        }
    }

    // Cut: apply all but the target-1 highest merges.
    let mut order: Vec<usize> = (0..merges.len()).collect();
    order.sort_by(|&x, &y| merges[x].2.partial_cmp(&merges[y].2).unwrap());
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for &mi in order.iter().take(n - target) {
        let (a, b, _) = merges[mi];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[rb] = ra;
        }
    }
    let mut label_of_root: std::collections::BTreeMap<usize, usize> =
        std::collections::BTreeMap::new();
    let mut labels = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        let next = label_of_root.len();
        let lab = *label_of_root.entry(r).or_insert(next);
        labels[i] = lab;
    }
    labels
}
