//! The generative tree-directed topic model.
//!
//! A document first draws a maximal path of the tree with probability `pi`,
//! then mixes the topics along that path with Dirichlet weights and emits
//! words i.i.d. from the mixed distribution. The document density is a
//! mixture of per-path LDA densities sharing topics through the tree.
//!
//! Exact document likelihoods integrate the Dirichlet weights analytically by
//! summing Dirichlet moments over topic-count compositions, which keeps small
//! instances (used as oracles for the sampler and the identifiability tests)
//! exact to machine precision.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::ModelError;
use crate::geometry::HierarchyParams;

/// Hierarchy plus per-path symmetric Dirichlet concentrations.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub hierarchy: HierarchyParams,
    pub alpha: Vec<f64>,
}

impl ModelParams {
    pub fn new(hierarchy: HierarchyParams, alpha: Vec<f64>) -> Result<Self, ModelError> {
        if alpha.len() != hierarchy.path_count() {
            return Err(ModelError::Invalid {
                detail: format!(
                    "{} alpha values for {} paths",
                    alpha.len(),
                    hierarchy.path_count()
                ),
            });
        }
        if alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(ModelError::Invalid {
                detail: "alpha values must be positive".into(),
            });
        }
        Ok(ModelParams { hierarchy, alpha })
    }

    /// Broadcasts one concentration to every path.
    pub fn with_scalar_alpha(hierarchy: HierarchyParams, alpha: f64) -> Result<Self, ModelError> {
        let i = hierarchy.path_count();
        Self::new(hierarchy, vec![alpha; i])
    }

    pub fn path_count(&self) -> usize {
        self.hierarchy.path_count()
    }

    pub fn vocab_size(&self) -> usize {
        self.hierarchy.topic_map.vocab_size()
    }

    /// Topics along path `i` in depth order, as row views.
    fn path_topics(&self, path: usize) -> Vec<&[f64]> {
        let (table, _) = self.hierarchy.drt.enumerate_paths();
        table.paths()[path]
            .iter()
            .map(|&v| self.hierarchy.topic_map.topic(v))
            .collect()
    }
}

/// A corpus of documents over a 1-based word vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub vocab_size: usize,
    /// Word-id sequences, one per document.
    pub docs: Vec<Vec<usize>>,
    /// Per-document word counts, `counts[doc][word - 1]`.
    pub counts: Vec<Vec<u32>>,
}

impl Corpus {
    pub fn from_docs(vocab_size: usize, docs: Vec<Vec<usize>>) -> Result<Self, ModelError> {
        let mut counts = Vec::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            let mut c = vec![0u32; vocab_size];
            for &w in doc {
                if w == 0 || w > vocab_size {
                    return Err(ModelError::Invalid {
                        detail: format!("document {i}: word id {w} outside 1..={vocab_size}"),
                    });
                }
                c[w - 1] += 1;
            }
            counts.push(c);
        }
        Ok(Corpus {
            vocab_size,
            docs,
            counts,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.docs.len()
    }

    pub fn total_words(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn subset(&self, indices: &[usize]) -> Corpus {
        let docs: Vec<Vec<usize>> = indices.iter().map(|&i| self.docs[i].clone()).collect();
        Corpus::from_docs(self.vocab_size, docs).expect("subset of a valid corpus")
    }
}

/// The latent variables behind a sampled corpus.
#[derive(Debug, Clone)]
pub struct LatentTruth {
    /// Path index (canonical order, 0-based) per document.
    pub path_indices: Vec<usize>,
    /// Dirichlet mixture over the path's depths, per document.
    pub betas: Vec<Vec<f64>>,
    /// Mixed word distribution per document.
    pub etas: Vec<Vec<f64>>,
}

/// Draws a corpus of `m` documents with `n` words each. Reproducible from the
/// seed; each document uses its own derived stream.
pub fn sample_corpus(
    params: &ModelParams,
    m: usize,
    n: usize,
    seed: u64,
) -> (Corpus, LatentTruth) {
    let v = params.vocab_size();
    let mut path_indices = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m);
    let mut etas = Vec::with_capacity(m);
    let mut docs = Vec::with_capacity(m);

    for doc in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(doc as u64 + 1);
        let path = sample_categorical(&params.hierarchy.pi, &mut rng);
        let topics = params.path_topics(path);
        let beta = sample_symmetric_dirichlet(topics.len(), params.alpha[path], &mut rng);
        let mut eta = vec![0.0f64; v];
        for (t, &b) in topics.iter().zip(&beta) {
            for (e, &x) in eta.iter_mut().zip(*t) {
                *e += b * x;
            }
        }
        let words: Vec<usize> = (0..n)
            .map(|_| sample_categorical(&eta, &mut rng) + 1)
            .collect();
        path_indices.push(path);
        betas.push(beta);
        etas.push(eta);
        docs.push(words);
    }
    let corpus = Corpus::from_docs(v, docs).expect("sampled words are in range");
    (
        corpus,
        LatentTruth {
            path_indices,
            betas,
            etas,
        },
    )
}

pub(crate) fn sample_categorical<R: Rng>(p: &[f64], rng: &mut R) -> usize {
    let total: f64 = p.iter().sum();
    let mut u = rng.gen_range(0.0..total);
    for (i, &w) in p.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    p.len() - 1
}

pub(crate) fn sample_symmetric_dirichlet<R: Rng>(dim: usize, alpha: f64, rng: &mut R) -> Vec<f64> {
    if dim == 1 {
        return vec![1.0];
    }
    let gamma = Gamma::new(alpha, 1.0).expect("alpha > 0");
    loop {
        let draws: Vec<f64> = (0..dim).map(|_| gamma.sample(rng)).collect();
        let s: f64 = draws.iter().sum();
        if s > 0.0 && s.is_finite() {
            return draws.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Likelihood evaluation mode.
#[derive(Debug, Clone, Copy)]
pub enum LikMode {
    /// Analytic integration over the Dirichlet weights.
    Exact,
    /// Average over Monte-Carlo draws of the weights.
    MonteCarlo { samples: usize, seed: u64 },
}

const EXACT_ASSIGNMENT_CAP: f64 = 1e7;

/// Log-likelihood of one document given as a word-count vector.
pub fn doc_loglik(
    params: &ModelParams,
    doc_counts: &[u32],
    mode: LikMode,
) -> Result<f64, ModelError> {
    if doc_counts.len() != params.vocab_size() {
        return Err(ModelError::Invalid {
            detail: "count vector length differs from vocabulary size".into(),
        });
    }
    let n: u32 = doc_counts.iter().sum();
    let mut terms = Vec::with_capacity(params.path_count());
    for i in 0..params.path_count() {
        if params.hierarchy.pi[i] == 0.0 {
            continue;
        }
        let topics = params.path_topics(i);
        let lp = match mode {
            LikMode::Exact => {
                let j = topics.len();
                if (j as f64).powi(n as i32) > EXACT_ASSIGNMENT_CAP {
                    return Err(ModelError::Size {
                        detail: format!("{j}^{n} latent assignments exceed the exact-mode cap"),
                    });
                }
                lda_loglik_exact(&topics, params.alpha[i], doc_counts)
            }
            LikMode::MonteCarlo { samples, seed } => {
                lda_loglik_mc(&topics, params.alpha[i], doc_counts, samples, seed ^ i as u64).0
            }
        };
        terms.push(params.hierarchy.pi[i].ln() + lp);
    }
    Ok(log_sum_exp(&terms))
}

/// Monte-Carlo document log-likelihood with a delta-method standard error on
/// the log scale.
pub fn doc_loglik_mc(
    params: &ModelParams,
    doc_counts: &[u32],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), ModelError> {
    if doc_counts.len() != params.vocab_size() {
        return Err(ModelError::Invalid {
            detail: "count vector length differs from vocabulary size".into(),
        });
    }
    let mut mean = 0.0f64;
    let mut var = 0.0f64;
    for i in 0..params.path_count() {
        let topics = params.path_topics(i);
        let (lp, se_lin) =
            lda_loglik_mc(&topics, params.alpha[i], doc_counts, samples, seed ^ i as u64);
        let pi_i = params.hierarchy.pi[i];
        mean += pi_i * lp.exp();
        var += (pi_i * se_lin).powi(2);
    }
    Ok((mean.ln(), var.sqrt() / mean))
}

/// Exact per-path LDA log-likelihood: dynamic program over per-word-value
/// topic-count compositions, each weighted by the matching Dirichlet moment.
fn lda_loglik_exact(topics: &[&[f64]], alpha: f64, counts: &[u32]) -> f64 {
    let j = topics.len();
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    if j == 1 {
        return counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| c as f64 * topics[0][v].ln())
            .sum();
    }

    // states: total per-topic counts -> sum of products of multinomial
    // coefficients and topic powers.
    let mut states: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
    states.insert(vec![0u16; j], 1.0);
    let mut comp = vec![0u32; j];
    for (v, &m_v) in counts.iter().enumerate() {
        if m_v == 0 {
            continue;
        }
        let mut next: BTreeMap<Vec<u16>, f64> = BTreeMap::new();
        let theta_v: Vec<f64> = topics.iter().map(|t| t[v]).collect();
        for_each_composition(m_v, j, &mut comp, &mut |c: &[u32]| {
            let mut w = multinomial_ln(m_v, c);
            for (k, &ck) in c.iter().enumerate() {
                if ck > 0 {
                    w += ck as f64 * theta_v[k].ln();
                }
            }
            let w = w.exp();
            if w == 0.0 {
                return;
            }
            for (state, &sw) in &states {
                let mut key = state.clone();
                for (kk, &ck) in key.iter_mut().zip(c) {
                    *kk += ck as u16;
                }
                *next.entry(key).or_insert(0.0) += sw * w;
            }
        });
        states = next;
    }

    let ln_gamma_alpha = ln_gamma(alpha);
    let prefix = ln_gamma(j as f64 * alpha) - ln_gamma(j as f64 * alpha + n as f64);
    let terms: Vec<f64> = states
        .iter()
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| {
            let moment: f64 = c
                .iter()
                .map(|&ck| ln_gamma(alpha + ck as f64) - ln_gamma_alpha)
                .sum();
            w.ln() + prefix + moment
        })
        .collect();
    log_sum_exp(&terms)
}

fn lda_loglik_mc(
    topics: &[&[f64]],
    alpha: f64,
    counts: &[u32],
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let j = topics.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    for _ in 0..samples {
        let beta = sample_symmetric_dirichlet(j, alpha, &mut rng);
        let mut lp = 0.0;
        for (v, &m_v) in counts.iter().enumerate() {
            if m_v == 0 {
                continue;
            }
            let mix: f64 = topics.iter().zip(&beta).map(|(t, &b)| b * t[v]).sum();
            lp += m_v as f64 * mix.ln();
        }
        let y = lp.exp();
        sum += y;
        sum_sq += y * y;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    (mean.ln(), (var / samples as f64).sqrt())
}

fn multinomial_ln(n: u32, parts: &[u32]) -> f64 {
    let mut acc = ln_gamma(n as f64 + 1.0);
    for &p in parts {
        acc -= ln_gamma(p as f64 + 1.0);
    }
    acc
}

/// Calls `f` with every way of writing `n` as an ordered sum of `parts`
/// nonnegative integers.
fn for_each_composition<F: FnMut(&[u32])>(n: u32, parts: usize, buf: &mut [u32], f: &mut F) {
    fn rec<F: FnMut(&[u32])>(rem: u32, idx: usize, buf: &mut [u32], f: &mut F) {
        if idx == buf.len() - 1 {
            buf[idx] = rem;
            f(buf);
            return;
        }
        for take in 0..=rem {
            buf[idx] = take;
            rec(rem - take, idx + 1, buf, f);
        }
    }
    debug_assert_eq!(buf.len(), parts);
    rec(n, 0, buf, f);
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

const ENUMERATION_CAP: f64 = 1e6;
const NORMALIZATION_TOL: f64 = 1e-9;

/// Exact total variation and KL divergence between the document distributions
/// of two parameterizations at document length `n`, by enumeration of all
/// outcomes. Both densities are checked to normalize.
pub fn tv_kl_exact(pa: &ModelParams, pb: &ModelParams, n: u32) -> Result<(f64, f64), ModelError> {
    let v = pa.vocab_size();
    if pb.vocab_size() != v {
        return Err(ModelError::Invalid {
            detail: "vocabulary sizes differ".into(),
        });
    }
    if (v as f64).powi(n as i32) > ENUMERATION_CAP {
        return Err(ModelError::Size {
            detail: format!("{v}^{n} outcomes exceed the enumeration cap"),
        });
    }

    let mut tv = 0.0f64;
    let mut kl = 0.0f64;
    let mut mass_a = 0.0f64;
    let mut mass_b = 0.0f64;
    let mut infinite_kl = false;
    let mut comp = vec![0u32; v];
    let mut err: Option<ModelError> = None;
    for_each_composition(n, v, &mut comp, &mut |counts: &[u32]| {
        if err.is_some() {
            return;
        }
        let mult = multinomial_ln(n, counts).exp();
        let la = match doc_loglik(pa, counts, LikMode::Exact) {
            Ok(x) => x,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let lb = match doc_loglik(pb, counts, LikMode::Exact) {
            Ok(x) => x,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        let p = la.exp();
        let q = lb.exp();
        mass_a += mult * p;
        mass_b += mult * q;
        tv += 0.5 * mult * (p - q).abs();
        if p > 0.0 {
            if q > 0.0 {
                kl += mult * p * (la - lb);
            } else {
                infinite_kl = true;
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    if (mass_a - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ModelError::Normalization { sum: mass_a });
    }
    if (mass_b - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ModelError::Normalization { sum: mass_b });
    }
    if infinite_kl {
        return Err(ModelError::InfiniteKl { tv });
    }
    Ok((tv, kl))
}

/// Outcome of the coupling-based KL upper bound check.
#[derive(Debug, Clone)]
pub struct KlBoundCheck {
    pub kl: f64,
    pub bound: f64,
    pub holds: bool,
}

const FLOOR_MIN: f64 = 1e-6;

/// Checks the analytic KL upper bound
/// `KL <= (n/c0) sum_i pi_i W1_i + (1/c1) sum_i pi_i |pi_i - pi'_i|`
/// with the shared-weight coupling cost `W1_i <= (1/J_i) sum_j ||theta_ij -
/// theta'_ij||` standing in for the Wasserstein distance, under the identity
/// path matching. `c0` floors every topic coordinate, `c1` every path
/// probability, across both parameterizations.
pub fn kl_upper_bound_check(
    pa: &ModelParams,
    pb: &ModelParams,
    n: u32,
) -> Result<KlBoundCheck, ModelError> {
    if pa.hierarchy.drt.parent_map() != pb.hierarchy.drt.parent_map()
        || pa.hierarchy.drt.root() != pb.hierarchy.drt.root()
    {
        return Err(ModelError::Invalid {
            detail: "both parameterizations must share the same tree".into(),
        });
    }
    let c0 = [pa, pb]
        .iter()
        .flat_map(|p| p.hierarchy.topic_map.topics().iter().flatten())
        .copied()
        .fold(f64::INFINITY, f64::min);
    let c1 = pa
        .hierarchy
        .pi
        .iter()
        .chain(&pb.hierarchy.pi)
        .copied()
        .fold(f64::INFINITY, f64::min);
    if c0 < FLOOR_MIN {
        return Err(ModelError::Floor {
            detail: format!("topic floor c0 = {c0}"),
        });
    }
    if c1 < FLOOR_MIN {
        return Err(ModelError::Floor {
            detail: format!("path floor c1 = {c1}"),
        });
    }

    let (table, _) = pa.hierarchy.drt.enumerate_paths();
    let mut transport = 0.0f64;
    let mut pi_gap = 0.0f64;
    for (i, path) in table.paths().iter().enumerate() {
        let j = path.len() as f64;
        let w1: f64 = path
            .iter()
            .map(|&v| {
                crate::geometry::dist(
                    pa.hierarchy.topic_map.topic(v),
                    pb.hierarchy.topic_map.topic(v),
                )
            })
            .sum::<f64>()
            / j;
        transport += pa.hierarchy.pi[i] * w1;
        pi_gap += pa.hierarchy.pi[i] * (pa.hierarchy.pi[i] - pb.hierarchy.pi[i]).abs();
    }
    let bound = (n as f64 / c0) * transport + pi_gap / c1;
    let (_, kl) = tv_kl_exact(pa, pb, n)?;
    Ok(KlBoundCheck {
        kl,
        bound,
        holds: kl <= bound + 1e-9,
    })
}

/// First and second moments of the node-weight vector `h`, the sparse mixture
/// placing Dirichlet weights on one path at a time.
#[derive(Debug, Clone)]
pub struct MomentPair {
    pub m1: Vec<f64>,
    pub m2: Vec<Vec<f64>>,
}

impl MomentPair {
    /// Expected single-word distribution over the vocabulary.
    pub fn observable_first(&self, params: &ModelParams) -> Vec<f64> {
        let tm = &params.hierarchy.topic_map;
        let v = tm.vocab_size();
        let mut out = vec![0.0; v];
        for (k, &w) in self.m1.iter().enumerate() {
            for (o, &t) in out.iter_mut().zip(tm.topic(k + 1)) {
                *o += w * t;
            }
        }
        out
    }

    /// Expected outer product of two words from the same document.
    pub fn observable_second(&self, params: &ModelParams) -> Vec<Vec<f64>> {
        let tm = &params.hierarchy.topic_map;
        let v = tm.vocab_size();
        let k = self.m1.len();
        let mut out = vec![vec![0.0; v]; v];
        for k1 in 0..k {
            for k2 in 0..k {
                let w = self.m2[k1][k2];
                if w == 0.0 {
                    continue;
                }
                let t1 = tm.topic(k1 + 1);
                let t2 = tm.topic(k2 + 1);
                for (row, &a) in out.iter_mut().zip(t1) {
                    for (cell, &b) in row.iter_mut().zip(t2) {
                        *cell += w * a * b;
                    }
                }
            }
        }
        out
    }
}

/// Closed-form moments of the node weights under the model.
pub fn moments(params: &ModelParams) -> MomentPair {
    let (table, _) = params.hierarchy.drt.enumerate_paths();
    let k = params.hierarchy.drt.node_count();
    let mut m1 = vec![0.0f64; k];
    let mut m2 = vec![vec![0.0f64; k]; k];
    for (i, path) in table.paths().iter().enumerate() {
        let pi_i = params.hierarchy.pi[i];
        let a = params.alpha[i];
        let j = path.len() as f64;
        let diag = pi_i * (a + 1.0) / (j * (j * a + 1.0));
        let off = pi_i * a / (j * (j * a + 1.0));
        for &v1 in path {
            m1[v1 - 1] += pi_i / j;
            for &v2 in path {
                m2[v1 - 1][v2 - 1] += if v1 == v2 { diag } else { off };
            }
        }
    }
    MomentPair { m1, m2 }
}

/// Small-ball mass exponent for the push-forward of a symmetric Dirichlet
/// onto a polytope of intrinsic dimension `p` spanned by `k` points.
pub fn small_ball_exponent(k: usize, p: usize, alpha: f64) -> f64 {
    assert!(
        (1..k).contains(&p),
        "intrinsic dimension must satisfy 1 <= p <= k - 1"
    );
    if alpha <= 1.0 {
        p as f64 + alpha * (k - p - 1) as f64
    } else {
        alpha * k as f64 - 1.0
    }
}
