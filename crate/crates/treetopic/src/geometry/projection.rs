//! Euclidean projection onto a convex polytope given by its vertices.
//!
//! The projection is computed as a quadratic program over barycentric weights
//! `w` in the probability simplex, `min 0.5 ||V^T w - x||^2`, solved by
//! accelerated projected gradient with exact simplex projection per step.

use crate::error::GeometryError;

const GRAD_MAP_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 100_000;

/// Result of projecting a point onto a polytope.
#[derive(Debug, Clone)]
pub struct Projection {
    pub distance: f64,
    pub point: Vec<f64>,
    /// Barycentric weights over the polytope vertices recovering `point`.
    pub weights: Vec<f64>,
}

/// Exact Euclidean projection of `y` onto the probability simplex.
pub fn project_to_simplex(y: &[f64]) -> Vec<f64> {
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cumsum += v;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    debug_assert!(rho > 0);
    let _ = rho;
    y.iter().map(|&v| (v - theta).max(0.0)).collect()
}

fn combine(vertices: &[Vec<f64>], w: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (vi, &wi) in vertices.iter().zip(w) {
        for (o, &v) in out.iter_mut().zip(vi) {
            *o += wi * v;
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projects `x` onto the convex hull of `vertices`.
pub fn project_to_hull(x: &[f64], vertices: &[Vec<f64>]) -> Result<Projection, GeometryError> {
    let r = vertices.len();
    assert!(r > 0, "polytope needs at least one vertex");
    let dim = x.len();
    assert!(vertices.iter().all(|v| v.len() == dim));

    if r == 1 {
        let point = vertices[0].clone();
        let distance = dist(x, &point);
        return Ok(Projection {
            distance,
            point,
            weights: vec![1.0],
        });
    }
    if r == 2 {
        // Segment: closed form.
        let a = &vertices[0];
        let b = &vertices[1];
        let mut ab2 = 0.0;
        let mut dot = 0.0;
        for i in 0..dim {
            let d = b[i] - a[i];
            ab2 += d * d;
            dot += (x[i] - a[i]) * d;
        }
        let t = if ab2 > 0.0 {
            (dot / ab2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let point: Vec<f64> = (0..dim).map(|i| a[i] + t * (b[i] - a[i])).collect();
        let distance = dist(x, &point);
        return Ok(Projection {
            distance,
            point,
            weights: vec![1.0 - t, t],
        });
    }

    // Gram matrix G = V V^T; gradient of 0.5||V^T w - x||^2 is G w - V x.
    let mut gram = vec![0.0f64; r * r];
    for i in 0..r {
        for j in i..r {
            let g: f64 = vertices[i]
                .iter()
                .zip(&vertices[j])
                .map(|(a, b)| a * b)
                .sum();
            gram[i * r + j] = g;
            gram[j * r + i] = g;
        }
    }
    let vx: Vec<f64> = vertices
        .iter()
        .map(|v| v.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect();

    // Lipschitz constant: spectral norm of G by power iteration, with a
    // trace fallback as upper bound.
    let lip = spectral_norm(&gram, r).max(1e-12);

    let mut w = vec![1.0 / r as f64; r];
    let mut y = w.clone();
    let mut t_k = 1.0f64;
    let mut grad = vec![0.0f64; r];
    let mut obj_prev = f64::INFINITY;
    let mut point = vec![0.0f64; dim];

    for iter in 0..MAX_ITERS {
        gradient(&gram, &vx, &y, &mut grad, r);
        let step: Vec<f64> = y
            .iter()
            .zip(&grad)
            .map(|(&yi, &gi)| yi - gi / lip)
            .collect();
        let w_next = project_to_simplex(&step);

        // Gradient mapping at y; small norm certifies optimality.
        let gm: f64 = y
            .iter()
            .zip(&w_next)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            * lip;
        if gm < GRAD_MAP_TOL {
            combine(vertices, &w_next, &mut point);
            let distance = dist(x, &point);
            return Ok(Projection {
                distance,
                point,
                weights: w_next,
            });
        }

        combine(vertices, &w_next, &mut point);
        let obj = 0.5 * point.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        if obj > obj_prev {
            // Restart the momentum sequence when it overshoots.
            t_k = 1.0;
            y = w.clone();
            obj_prev = f64::INFINITY;
            continue;
        }
        obj_prev = obj;

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let beta = (t_k - 1.0) / t_next;
        y = w_next
            .iter()
            .zip(&w)
            .map(|(&wn, &wp)| wn + beta * (wn - wp))
            .collect();
        w = w_next;
        t_k = t_next;
        let _ = iter;
    }
    Err(GeometryError::NonConvergence {
        iterations: MAX_ITERS,
    })
}

fn gradient(gram: &[f64], vx: &[f64], w: &[f64], out: &mut [f64], r: usize) {
    for i in 0..r {
        let mut g = -vx[i];
        let row = &gram[i * r..(i + 1) * r];
        for (gij, &wj) in row.iter().zip(w) {
            g += gij * wj;
        }
        out[i] = g;
    }
}

fn spectral_norm(gram: &[f64], r: usize) -> f64 {
    let mut v = vec![1.0 / (r as f64).sqrt(); r];
    let mut lambda = 0.0;
    for _ in 0..60 {
        let mut next = vec![0.0; r];
        for i in 0..r {
            let row = &gram[i * r..(i + 1) * r];
            next[i] = row.iter().zip(&v).map(|(a, b)| a * b).sum();
        }
        let n = norm2(&next);
        if n <= 1e-300 {
            return gram.iter().step_by(r + 1).sum::<f64>().max(1e-12);
        }
        lambda = n;
        for x in &mut next {
            *x /= n;
        }
        v = next;
    }
    // Slight inflation keeps the step a valid 1/L step under estimation error.
    lambda * 1.0001
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
