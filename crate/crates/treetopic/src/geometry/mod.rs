//! Convex-polytope geometry and the metric suite on topic hierarchies.
//!
//! Topics are points of the vocabulary simplex; a path of the tree spans a
//! component topic polytope (the convex hull of its topics). Distances
//! between parameterizations compare these polytopes: component-wise
//! Hausdorff under an optimal path matching, Hausdorff between unions, and an
//! assignment-based sum of topic distances.

pub mod assignment;
pub mod projection;
pub mod subspace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::drt::Drt;
use crate::error::GeometryError;
pub use assignment::min_cost_assignment;
pub use projection::{dist, project_to_hull, project_to_simplex, Projection};
pub use subspace::{
    affine_hull, grassmann_angle, polytope_diagnostics, principal_angles, AffineHull, Diagnostics,
};

const SIMPLEX_SUM_TOL: f64 = 1e-9;
const DUPLICATE_TOL: f64 = 1e-12;

/// A convex polytope inside the vocabulary simplex, stored by its vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    vertices: Vec<Vec<f64>>,
}

impl Polytope {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if vertices.is_empty() {
            return Err(GeometryError::Invalid {
                detail: "polytope needs at least one vertex".into(),
            });
        }
        let dim = vertices[0].len();
        for v in &vertices {
            if v.len() != dim {
                return Err(GeometryError::Invalid {
                    detail: "vertices have mixed dimensions".into(),
                });
            }
            check_simplex_point(v)?;
        }
        for i in 0..vertices.len() {
            for j in i + 1..vertices.len() {
                if dist(&vertices[i], &vertices[j]) <= DUPLICATE_TOL {
                    return Err(GeometryError::Invalid {
                        detail: format!("duplicate vertices {i} and {j}"),
                    });
                }
            }
        }
        Ok(Polytope { vertices })
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }
}

fn check_simplex_point(v: &[f64]) -> Result<(), GeometryError> {
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_SUM_TOL || v.iter().any(|&x| x < -SIMPLEX_SUM_TOL) {
        return Err(GeometryError::Invalid {
            detail: format!("point is not in the simplex (sum {sum})"),
        });
    }
    Ok(())
}

/// An injective assignment of tree nodes to topics (rows of a K x V
/// row-stochastic table); node id `k` owns row `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMap {
    topics: Vec<Vec<f64>>,
}

impl TopicMap {
    pub fn new(topics: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if topics.is_empty() {
            return Err(GeometryError::Invalid {
                detail: "topic map needs at least one topic".into(),
            });
        }
        let v = topics[0].len();
        for t in &topics {
            if t.len() != v {
                return Err(GeometryError::Invalid {
                    detail: "topics have mixed vocabulary sizes".into(),
                });
            }
            check_simplex_point(t)?;
        }
        for i in 0..topics.len() {
            for j in i + 1..topics.len() {
                if dist(&topics[i], &topics[j]) <= DUPLICATE_TOL {
                    return Err(GeometryError::Invalid {
                        detail: format!("topic map not injective: nodes {} and {}", i + 1, j + 1),
                    });
                }
            }
        }
        Ok(TopicMap { topics })
    }

    pub fn node_count(&self) -> usize {
        self.topics.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.topics[0].len()
    }

    pub fn topic(&self, node: usize) -> &[f64] {
        &self.topics[node - 1]
    }

    pub fn topics(&self) -> &[Vec<f64>] {
        &self.topics
    }

    /// Component topic polytope of one path: convex hull of its topics.
    pub fn path_polytope(&self, path: &[usize]) -> Result<Polytope, GeometryError> {
        Polytope::new(path.iter().map(|&v| self.topic(v).to_vec()).collect())
    }

    /// All component polytopes of `drt` in canonical path order.
    pub fn component_polytopes(&self, drt: &Drt) -> Result<Vec<Polytope>, GeometryError> {
        let (table, _) = drt.enumerate_paths();
        table
            .paths()
            .iter()
            .map(|p| self.path_polytope(p))
            .collect()
    }
}

/// A full topic-hierarchy parameterization: tree, topic map and path
/// probabilities in canonical path order.
#[derive(Debug, Clone)]
pub struct HierarchyParams {
    pub drt: Drt,
    pub topic_map: TopicMap,
    pub pi: Vec<f64>,
}

impl HierarchyParams {
    pub fn new(drt: Drt, topic_map: TopicMap, pi: Vec<f64>) -> Result<Self, GeometryError> {
        let (table, _) = drt.enumerate_paths();
        if pi.len() != table.path_count() {
            return Err(GeometryError::Invalid {
                detail: format!(
                    "pi has {} entries but the tree has {} paths",
                    pi.len(),
                    table.path_count()
                ),
            });
        }
        check_simplex_point(&pi)?;
        if topic_map.node_count() != drt.node_count() {
            return Err(GeometryError::Invalid {
                detail: format!(
                    "topic map covers {} nodes, tree has {}",
                    topic_map.node_count(),
                    drt.node_count()
                ),
            });
        }
        Ok(HierarchyParams { drt, topic_map, pi })
    }

    pub fn component_polytopes(&self) -> Result<Vec<Polytope>, GeometryError> {
        self.topic_map.component_polytopes(&self.drt)
    }

    pub fn path_count(&self) -> usize {
        self.pi.len()
    }
}

/// Hausdorff distance between convex polytopes. The point-to-set distance is
/// convex, so each directed term is attained at a vertex and the value is
/// exact.
pub fn hausdorff_polytopes(a: &Polytope, b: &Polytope) -> Result<f64, GeometryError> {
    let mut d = 0.0f64;
    for v in a.vertices() {
        d = d.max(project_to_hull(v, b.vertices())?.distance);
    }
    for v in b.vertices() {
        d = d.max(project_to_hull(v, a.vertices())?.distance);
    }
    Ok(d)
}

/// Minimal-matching distance: symmetrized max over vertices of the distance
/// to the nearest opposing vertex.
pub fn minimal_matching_dist(a: &Polytope, b: &Polytope) -> f64 {
    let directed = |from: &Polytope, to: &Polytope| {
        from.vertices()
            .iter()
            .map(|u| {
                to.vertices()
                    .iter()
                    .map(|v| dist(u, v))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0f64, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

/// Permutation-optimal sum of component Hausdorff distances plus path
/// probability gaps. Costs are additive across components, so the assignment
/// solver recovers the exact minimum over permutations.
pub fn augmented_tree_hausdorff(
    wa: &HierarchyParams,
    wb: &HierarchyParams,
) -> Result<f64, GeometryError> {
    let sa = wa.component_polytopes()?;
    let sb = wb.component_polytopes()?;
    if sa.len() != sb.len() {
        return Err(GeometryError::Domain {
            detail: format!("leaf counts differ: {} vs {}", sa.len(), sb.len()),
        });
    }
    let n = sa.len();
    let mut cost = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            cost[i][j] = hausdorff_polytopes(&sa[i], &sb[j])? + (wa.pi[i] - wb.pi[j]).abs();
        }
    }
    let (_, total) = min_cost_assignment(&cost);
    Ok(total)
}

/// Monte-Carlo estimate of the Hausdorff distance between the unions of the
/// two parameterizations' component polytopes.
///
/// Points are sampled inside every polytope with Dirichlet(1) barycentric
/// weights (vertices included), and each is projected exactly onto the
/// opposing union. The maximum is a lower bound of the true metric; the
/// returned slack is the observed shift when doubling from half the sample
/// budget, a sample-count sensitivity estimate.
pub fn union_hausdorff(
    ra: &TopicMap,
    rb: &TopicMap,
    drt: &Drt,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), GeometryError> {
    let sa = ra.component_polytopes(drt)?;
    let sb = rb.component_polytopes(drt)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let directed = |from: &[Polytope], to: &[Polytope], rng: &mut ChaCha8Rng| {
        let mut max_full = 0.0f64;
        let mut max_half = 0.0f64;
        let mut count = 0usize;
        let total = from.iter().map(|p| p.vertices().len() + samples).sum::<usize>();
        for p in from {
            let mut points: Vec<Vec<f64>> = p.vertices().to_vec();
            for _ in 0..samples {
                points.push(dirichlet_point(p.vertices(), rng));
            }
            for x in points {
                let mut dmin = f64::INFINITY;
                for q in to {
                    dmin = dmin.min(project_to_hull(&x, q.vertices())?.distance);
                    if dmin == 0.0 {
                        break;
                    }
                }
                max_full = max_full.max(dmin);
                count += 1;
                if count <= total / 2 {
                    max_half = max_half.max(dmin);
                }
            }
        }
        Ok::<(f64, f64), GeometryError>((max_full, max_half))
    };

    let (ab_full, ab_half) = directed(&sa, &sb, &mut rng)?;
    let (ba_full, ba_half) = directed(&sb, &sa, &mut rng)?;
    let estimate = ab_full.max(ba_full);
    let slack = (ab_full - ab_half).max(ba_full - ba_half).max(0.0);
    Ok((estimate, slack))
}

fn dirichlet_point<R: rand::Rng>(vertices: &[Vec<f64>], rng: &mut R) -> Vec<f64> {
    // Dirichlet(1) weights via normalized exponentials.
    let mut w: Vec<f64> = (0..vertices.len()).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    for x in &mut w {
        *x /= s;
    }
    let mut out = vec![0.0; vertices[0].len()];
    for (v, &wi) in vertices.iter().zip(&w) {
        for (o, &x) in out.iter_mut().zip(v) {
            *o += wi * x;
        }
    }
    out
}

/// Assignment-based topic distance: optimal matching of paths, and within
/// each matched pair an optimal matching of the topics along the paths,
/// summing Euclidean topic distances. Paths may only match paths of the same
/// length.
pub fn d_l2(ra: &TopicMap, rb: &TopicMap, drt: &Drt) -> Result<f64, GeometryError> {
    let (table, _) = drt.enumerate_paths();
    let paths = table.paths();
    let n = paths.len();
    let mut lens_a: Vec<usize> = paths.iter().map(Vec::len).collect();
    let mut lens_b = lens_a.clone();
    lens_a.sort_unstable();
    lens_b.sort_unstable();
    if lens_a != lens_b {
        return Err(GeometryError::Domain {
            detail: "path length multisets differ".into(),
        });
    }

    let mut cost = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in 0..n {
            cost[i][j] = if paths[i].len() == paths[j].len() {
                path_match_cost(ra, &paths[i], rb, &paths[j])
            } else {
                assignment::FORBIDDEN
            };
        }
    }
    let (_, total) = min_cost_assignment(&cost);
    if total >= assignment::FORBIDDEN / 2.0 {
        return Err(GeometryError::Domain {
            detail: "no length-compatible path matching exists".into(),
        });
    }
    Ok(total)
}

fn path_match_cost(ra: &TopicMap, pa: &[usize], rb: &TopicMap, pb: &[usize]) -> f64 {
    let j = pa.len();
    if j == 1 {
        return dist(ra.topic(pa[0]), rb.topic(pb[0]));
    }
    let mut cost = vec![vec![0.0f64; j]; j];
    for (x, &na) in pa.iter().enumerate() {
        for (y, &nb) in pb.iter().enumerate() {
            cost[x][y] = dist(ra.topic(na), rb.topic(nb));
        }
    }
    min_cost_assignment(&cost).1
}

/// Extreme-point check: every topic on every path must be an extreme point of
/// its component polytope (projection onto the hull of the remaining vertices
/// stays bounded away from it).
pub fn check_extreme_points(tm: &TopicMap, drt: &Drt) -> Result<bool, GeometryError> {
    let (table, _) = drt.enumerate_paths();
    for path in table.paths() {
        if path.len() < 2 {
            continue;
        }
        for (i, &node) in path.iter().enumerate() {
            let rest: Vec<Vec<f64>> = path
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, &v)| tm.topic(v).to_vec())
                .collect();
            if project_to_hull(tm.topic(node), &rest)?.distance <= subspace::RANK_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Distinct-components check: no two component polytopes coincide.
pub fn check_distinct_components(tm: &TopicMap, drt: &Drt) -> Result<bool, GeometryError> {
    let polys = tm.component_polytopes(drt)?;
    for i in 0..polys.len() {
        for j in i + 1..polys.len() {
            if hausdorff_polytopes(&polys[i], &polys[j])? <= subspace::RANK_TOL {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Affine-hull separation check: equal-dimension component polytopes must
/// span different affine hulls.
pub fn check_affine_separation(tm: &TopicMap, drt: &Drt) -> Result<bool, GeometryError> {
    let polys = tm.component_polytopes(drt)?;
    let hulls: Vec<AffineHull> = polys.iter().map(|p| affine_hull(p.vertices())).collect();
    for i in 0..hulls.len() {
        for j in i + 1..hulls.len() {
            if hulls[i].dim() == hulls[j].dim() && hulls[i].same_as(&hulls[j], subspace::RANK_TOL) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Positive path-probability check.
pub fn check_positive_paths(pi: &[f64], floor: f64) -> bool {
    pi.iter().all(|&p| p >= floor)
}
