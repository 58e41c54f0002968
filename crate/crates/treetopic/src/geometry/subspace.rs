//! Affine hulls, principal angles and per-polytope diagnostics.

use nalgebra::DMatrix;

use crate::error::GeometryError;
use crate::geometry::projection::{dist, project_to_hull};
use crate::geometry::Polytope;

/// Singular values below this are treated as zero when determining affine
/// dimension.
pub const RANK_TOL: f64 = 1e-8;

/// An affine subspace through `centroid` spanned by orthonormal `basis`
/// directions (each of ambient dimension `centroid.len()`).
#[derive(Debug, Clone)]
pub struct AffineHull {
    pub centroid: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl AffineHull {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Distance from `x` to the hull: residual after removing the component
    /// inside the span.
    pub fn distance(&self, x: &[f64]) -> f64 {
        let mut resid: Vec<f64> = x
            .iter()
            .zip(&self.centroid)
            .map(|(a, b)| a - b)
            .collect();
        for b in &self.basis {
            let c: f64 = resid.iter().zip(b).map(|(r, v)| r * v).sum();
            for (r, v) in resid.iter_mut().zip(b) {
                *r -= c * v;
            }
        }
        resid.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Two hulls are equal when they have the same dimension and each one's
    /// anchor points lie in the other.
    pub fn same_as(&self, other: &AffineHull, tol: f64) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        if other.distance(&self.centroid) > tol || self.distance(&other.centroid) > tol {
            return false;
        }
        let shifted = |hull: &AffineHull, dir: &[f64]| -> Vec<f64> {
            hull.centroid
                .iter()
                .zip(dir)
                .map(|(c, d)| c + d)
                .collect()
        };
        self.basis
            .iter()
            .all(|d| other.distance(&shifted(self, d)) <= tol)
            && other
                .basis
                .iter()
                .all(|d| self.distance(&shifted(other, d)) <= tol)
    }
}

/// Affine hull of a point set via SVD of the centered matrix.
pub fn affine_hull(points: &[Vec<f64>]) -> AffineHull {
    let n = points.len();
    assert!(n > 0);
    let d = points[0].len();
    let mut centroid = vec![0.0; d];
    for p in points {
        for (c, v) in centroid.iter_mut().zip(p) {
            *c += v / n as f64;
        }
    }
    if n == 1 {
        return AffineHull {
            centroid,
            basis: Vec::new(),
        };
    }
    let centered = DMatrix::from_fn(n, d, |i, j| points[i][j] - centroid[j]);
    let svd = centered.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut basis = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s > RANK_TOL {
            basis.push(vt.row(i).iter().copied().collect());
        }
    }
    AffineHull { centroid, basis }
}

/// Principal angles (ascending) between the spans of two orthonormal bases.
pub fn principal_angles(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let m = DMatrix::from_fn(a.len(), b.len(), |i, j| {
        a[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>()
    });
    let svd = m.svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect()
}

/// Largest principal angle between the affine-hull direction subspaces of two
/// polytopes. Zero-dimensional hulls (points) give angle 0.
pub fn grassmann_angle(a: &Polytope, b: &Polytope) -> f64 {
    let ha = affine_hull(a.vertices());
    let hb = affine_hull(b.vertices());
    principal_angles(&ha.basis, &hb.basis)
        .last()
        .copied()
        .unwrap_or(0.0)
}

/// Per-polytope diagnostics against a set of companion polytopes.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Minimum distance from a vertex to the affine hull of the remaining
    /// vertices.
    pub width: f64,
    /// Minimum pairwise vertex distance.
    pub min_edge: f64,
    /// Minimum projection distance of an own non-shared vertex onto another
    /// polytope; 0 when every vertex is shared, None without companions.
    pub min_projection_to_others: Option<f64>,
    /// Minimum over companions of the largest principal angle between
    /// affine hulls.
    pub grassmann_angle_to_others: Option<f64>,
}

pub fn polytope_diagnostics(
    p: &Polytope,
    others: &[&Polytope],
) -> Result<Diagnostics, GeometryError> {
    let verts = p.vertices();
    if verts.len() < 2 {
        return Err(GeometryError::Degenerate {
            detail: "width needs a polytope of affine dimension >= 1".into(),
        });
    }
    let mut width = f64::INFINITY;
    for i in 0..verts.len() {
        let rest: Vec<Vec<f64>> = verts
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, v)| v.clone())
            .collect();
        width = width.min(affine_hull(&rest).distance(&verts[i]));
    }
    let mut min_edge = f64::INFINITY;
    for i in 0..verts.len() {
        for j in i + 1..verts.len() {
            min_edge = min_edge.min(dist(&verts[i], &verts[j]));
        }
    }

    let mut min_proj: Option<f64> = None;
    let mut min_gr: Option<f64> = None;
    for other in others {
        let gr = grassmann_angle(p, other);
        min_gr = Some(min_gr.map_or(gr, |g: f64| g.min(gr)));
        let mut proj_for_other: Option<f64> = None;
        let mut any_unshared = false;
        for v in verts {
            let shared = other
                .vertices()
                .iter()
                .any(|u| dist(u, v) <= 1e-12);
            if shared {
                continue;
            }
            any_unshared = true;
            let d = project_to_hull(v, other.vertices())?.distance;
            proj_for_other = Some(proj_for_other.map_or(d, |p: f64| p.min(d)));
        }
        let d = if any_unshared {
            proj_for_other.unwrap()
        } else {
            0.0
        };
        min_proj = Some(min_proj.map_or(d, |p: f64| p.min(d)));
    }

    Ok(Diagnostics {
        width,
        min_edge,
        min_projection_to_others: min_proj,
        grassmann_angle_to_others: min_gr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polytope;

    fn simplex_point(v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }

    #[test]
    fn equilateral_triangle_width_and_edge() {
        // Equilateral triangle with side sqrt(2): the simplex corners.
        let p = Polytope::new(vec![
            simplex_point(&[1.0, 0.0, 0.0]),
            simplex_point(&[0.0, 1.0, 0.0]),
            simplex_point(&[0.0, 0.0, 1.0]),
        ])
        .unwrap();
        let d = polytope_diagnostics(&p, &[]).unwrap();
        let s = 2.0f64.sqrt();
        assert!((d.min_edge - s).abs() < 1e-9);
        assert!((d.width - s * 3.0f64.sqrt() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn self_comparison_is_zero() {
        let p = Polytope::new(vec![
            simplex_point(&[0.7, 0.2, 0.1]),
            simplex_point(&[0.1, 0.8, 0.1]),
            simplex_point(&[0.2, 0.2, 0.6]),
        ])
        .unwrap();
        let d = polytope_diagnostics(&p, &[&p]).unwrap();
        assert_eq!(d.min_projection_to_others, Some(0.0));
        assert!(d.grassmann_angle_to_others.unwrap() < 1e-6);
    }

    #[test]
    fn orthogonal_segments_make_right_angle() {
        // Directions (1,-1,0)/sqrt(2) and (1,1,-2)/sqrt(6) are orthogonal.
        let a = Polytope::new(vec![
            simplex_point(&[0.6, 0.2, 0.2]),
            simplex_point(&[0.2, 0.6, 0.2]),
        ])
        .unwrap();
        let b = Polytope::new(vec![
            simplex_point(&[0.4, 0.4, 0.2]),
            simplex_point(&[0.2, 0.2, 0.6]),
        ])
        .unwrap();
        let angle = grassmann_angle(&a, &b);
        assert!((angle - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn single_point_width_is_degenerate() {
        let p = Polytope::new(vec![simplex_point(&[0.5, 0.3, 0.2])]).unwrap();
        assert!(matches!(
            polytope_diagnostics(&p, &[]),
            Err(GeometryError::Degenerate { .. })
        ));
    }

    #[test]
    fn affine_hull_equality() {
        let pts1 = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
        ];
        let pts2 = vec![
            vec![0.75, 0.25, 0.0],
            vec![0.25, 0.75, 0.0],
        ];
        let pts3 = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]];
        let h1 = affine_hull(&pts1);
        let h2 = affine_hull(&pts2);
        let h3 = affine_hull(&pts3);
        assert!(h1.same_as(&h2, 1e-8));
        assert!(!h1.same_as(&h3, 1e-8));
    }
}
