//! Shared helpers for the integration suites: random parameter generators
//! and independent numerical oracles. Everything here is deliberately kept
//! away from the library's own computation paths.

#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

use treetopic::drt::Drt;
use treetopic::geometry::{HierarchyParams, TopicMap};
use treetopic::model::ModelParams;

pub fn random_simplex_point<R: Rng>(v: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..v).map(|_| -rng.gen_range(0.0f64..1.0).ln()).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Random interior simplex point bounded away from the boundary.
pub fn random_smoothed_point<R: Rng>(v: usize, mix: f64, rng: &mut R) -> Vec<f64> {
    random_simplex_point(v, rng)
        .into_iter()
        .map(|x| (1.0 - mix) * x + mix / v as f64)
        .collect()
}

pub fn random_topic_map<R: Rng>(k: usize, v: usize, rng: &mut R) -> TopicMap {
    loop {
        let topics: Vec<Vec<f64>> = (0..k).map(|_| random_simplex_point(v, rng)).collect();
        if let Ok(tm) = TopicMap::new(topics) {
            return tm;
        }
    }
}

pub fn random_smoothed_topic_map<R: Rng>(k: usize, v: usize, mix: f64, rng: &mut R) -> TopicMap {
    loop {
        let topics: Vec<Vec<f64>> = (0..k)
            .map(|_| random_smoothed_point(v, mix, rng))
            .collect();
        if let Ok(tm) = TopicMap::new(topics) {
            return tm;
        }
    }
}

pub fn chain_drt(k: usize) -> Drt {
    let parents: BTreeMap<usize, usize> = (2..=k).map(|v| (v, v - 1)).collect();
    Drt::build(&parents, 1).unwrap()
}

pub fn two_path_drt() -> Drt {
    Drt::build(&[(2, 1), (3, 1)].into_iter().collect(), 1).unwrap()
}

/// The two-branch depth-3 tree on five nodes: paths (1,2,4) and (1,3,5).
pub fn exp1_drt() -> Drt {
    Drt::build(&[(2, 1), (3, 1), (4, 2), (5, 3)].into_iter().collect(), 1).unwrap()
}

pub fn params_from_topics(drt: &Drt, topics: Vec<Vec<f64>>, pi: Vec<f64>, alpha: f64) -> ModelParams {
    let tm = TopicMap::new(topics).unwrap();
    let h = HierarchyParams::new(drt.clone(), tm, pi).unwrap();
    ModelParams::with_scalar_alpha(h, alpha).unwrap()
}

/// A pair of parameterizations with different tree sizes inducing exactly the
/// same document distribution.
///
/// Topics: an apex plus the two ends of a base segment, with a fourth topic
/// at the base midpoint. Splitting the big triangle along the median through
/// the midpoint yields two equal-area components; with unit concentration
/// each component carries the uniform distribution, so the half-and-half
/// mixture is the uniform distribution on the big triangle, which the
/// single-path model produces directly.
pub struct DegeneratePair {
    pub split: ModelParams,
    pub whole: ModelParams,
    /// The same split model with the fourth topic pushed off the base line.
    pub split_perturbed: ModelParams,
    pub whole_perturbed: ModelParams,
}

pub fn median_split_pair() -> DegeneratePair {
    let base_left = vec![0.7, 0.15, 0.15];
    let apex = vec![0.15, 0.7, 0.15];
    let base_right = vec![0.15, 0.15, 0.7];
    let midpoint: Vec<f64> = base_left
        .iter()
        .zip(&base_right)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();

    // Two paths sharing the prefix (midpoint, apex): root 1 -> 3 -> {2, 4}.
    let split_tree = Drt::build(&[(3, 1), (2, 3), (4, 3)].into_iter().collect(), 1).unwrap();
    let split = params_from_topics(
        &split_tree,
        vec![
            midpoint.clone(),
            base_left.clone(),
            apex.clone(),
            base_right.clone(),
        ],
        vec![0.5, 0.5],
        1.0,
    );
    let whole = params_from_topics(
        &chain_drt(3),
        vec![base_left.clone(), apex.clone(), base_right.clone()],
        vec![1.0],
        1.0,
    );

    // Push the right base corner off the base line by 0.05 within the
    // simplex plane (towards the apex).
    let toward_apex: Vec<f64> = {
        let d: Vec<f64> = apex
            .iter()
            .zip(&midpoint)
            .map(|(a, b)| a - b)
            .collect();
        let norm: f64 = d.iter().map(|x| x * x).sum::<f64>().sqrt();
        d.into_iter().map(|x| 0.05 * x / norm).collect()
    };
    let base_right_moved: Vec<f64> = base_right
        .iter()
        .zip(&toward_apex)
        .map(|(a, b)| a + b)
        .collect();
    let split_perturbed = params_from_topics(
        &split_tree,
        vec![
            midpoint.clone(),
            base_left.clone(),
            apex.clone(),
            base_right_moved.clone(),
        ],
        vec![0.5, 0.5],
        1.0,
    );
    let whole_perturbed = params_from_topics(
        &chain_drt(3),
        vec![base_left, apex, base_right_moved],
        vec![1.0],
        1.0,
    );
    DegeneratePair {
        split,
        whole,
        split_perturbed,
        whole_perturbed,
    }
}

/// Two parameterizations on the same tree shape splitting one parallelogram
/// along its two diagonals: identical document distributions from different
/// topic hierarchies.
pub fn parallelogram_pair() -> (ModelParams, ModelParams) {
    let t1 = vec![0.6, 0.2, 0.2];
    let t2 = vec![0.4, 0.4, 0.2];
    let t3 = vec![0.2, 0.4, 0.4];
    let t4 = vec![0.4, 0.2, 0.4];
    // Diagonal (t1, t3): root 1 -> 3 -> {2, 4}.
    let tree_a = Drt::build(&[(3, 1), (2, 3), (4, 3)].into_iter().collect(), 1).unwrap();
    let a = params_from_topics(
        &tree_a,
        vec![t1.clone(), t2.clone(), t3.clone(), t4.clone()],
        vec![0.5, 0.5],
        1.0,
    );
    // Diagonal (t2, t4): root 2 -> 4 -> {1, 3}.
    let tree_b = Drt::build(&[(4, 2), (1, 4), (3, 4)].into_iter().collect(), 2).unwrap();
    let b = params_from_topics(&tree_b, vec![t1, t2, t3, t4], vec![0.5, 0.5], 1.0);
    (a, b)
}

/// Gauss-Jacobi quadrature for Beta(a, b) expectations on [0, 1]:
/// returns nodes and weights such that `sum_i w_i f(x_i)` approximates
/// `E[f(T)]`, exactly for polynomials of degree < 2 q.
pub fn gauss_beta_rule(a: f64, b: f64, q: usize) -> (Vec<f64>, Vec<f64>) {
    // Jacobi weight (1-x)^A (1+x)^B on [-1, 1] with A = b-1, B = a-1.
    let aa = b - 1.0;
    let bb = a - 1.0;
    let mut diag = vec![0.0f64; q];
    let mut off = vec![0.0f64; q.saturating_sub(1)];
    for (k, d) in diag.iter_mut().enumerate() {
        let k = k as f64;
        let denom = (2.0 * k + aa + bb) * (2.0 * k + aa + bb + 2.0);
        *d = if denom.abs() < 1e-300 {
            0.0
        } else {
            (bb * bb - aa * aa) / denom
        };
    }
    for (k, o) in off.iter_mut().enumerate() {
        let k = (k + 1) as f64;
        let num = 4.0 * k * (k + aa) * (k + bb) * (k + aa + bb);
        let den = (2.0 * k + aa + bb).powi(2) * (2.0 * k + aa + bb + 1.0) * (2.0 * k + aa + bb - 1.0);
        *o = (num / den).sqrt();
    }
    let mut m = DMatrix::zeros(q, q);
    for i in 0..q {
        m[(i, i)] = diag[i];
        if i + 1 < q {
            m[(i, i + 1)] = off[i];
            m[(i + 1, i)] = off[i];
        }
    }
    let eig = SymmetricEigen::new(m);
    // mu0 = integral of the Jacobi weight over [-1, 1].
    let ln_mu0 = (aa + bb + 1.0) * 2f64.ln() + ln_gamma(aa + 1.0) + ln_gamma(bb + 1.0)
        - ln_gamma(aa + bb + 2.0);
    let ln_beta = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let mut pairs: Vec<(f64, f64)> = (0..q)
        .map(|i| {
            let x = eig.eigenvalues[i];
            let v0 = eig.eigenvectors[(0, i)];
            let w = (ln_mu0.exp() * v0 * v0) / (2f64.powf(aa + bb + 1.0) * ln_beta.exp());
            ((1.0 + x) / 2.0, w)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn beta_rule_reproduces_moments() {
        for (a, b) in [(1.0, 1.0), (0.5, 2.0), (0.1, 0.1), (3.0, 1.5)] {
            let (x, w) = gauss_beta_rule(a, b, 12);
            let total: f64 = w.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "weights sum {total}");
            let mean: f64 = x.iter().zip(&w).map(|(xi, wi)| xi * wi).sum();
            assert!((mean - a / (a + b)).abs() < 1e-10);
            let m2: f64 = x.iter().zip(&w).map(|(xi, wi)| xi * xi * wi).sum();
            let expect = a * (a + 1.0) / ((a + b) * (a + b + 1.0));
            assert!((m2 - expect).abs() < 1e-10);
        }
    }
}
