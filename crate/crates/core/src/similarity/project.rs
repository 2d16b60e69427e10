//! 2D projection of topology groups.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{group, Embedding, StructuralFeatures, TopologyGroup, TopologyKey};
use crate::tree::Corpus;

pub const TSNE_ITERATIONS: usize = 500;
const EXAGGERATION: f64 = 12.0;
const EXAGGERATION_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Tsne,
    Pca,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tsne" | "t-sne" => Ok(Method::Tsne),
            "pca" => Ok(Method::Pca),
            other => Err(format!("unknown projection method `{other}` (expected tsne or pca)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPoint {
    pub key: TopologyKey,
    pub x: f64,
    pub y: f64,
    /// Number of member trees.
    pub n: usize,
    pub members: Vec<String>,
}

/// One point per topology group, in order of first appearance.
pub fn project(corpus: &Corpus, method: Method, seed: u64) -> Vec<ProjectionPoint> {
    project_with(&group(corpus), &StructuralFeatures, method, seed)
}

pub fn project_with(
    groups: &[TopologyGroup],
    embedding: &dyn Embedding,
    method: Method,
    seed: u64,
) -> Vec<ProjectionPoint> {
    let coords: Vec<[f64; 2]> = match groups.len() {
        0 => Vec::new(),
        1 => vec![[0.0, 0.0]],
        2 => vec![[-1.0, 0.0], [1.0, 0.0]],
        _ => {
            let x = normalized(groups.iter().map(|g| embedding.embed(&g.representative)).collect());
            let y = match method {
                Method::Tsne => tsne(&x, seed),
                Method::Pca => pca(&x, seed),
            };
            if y.iter().flatten().all(|v| v.is_finite()) {
                y
            } else {
                pca(&x, seed)
            }
        }
    };
    groups
        .iter()
        .zip(coords)
        .map(|(g, [x, y])| ProjectionPoint {
            key: g.key.clone(),
            x,
            y,
            n: g.member_tree_ids.len(),
            members: g.member_tree_ids.clone(),
        })
        .collect()
}

/// `[{"key", "x", "y", "n", "members"}]`
pub fn projection_json(points: &[ProjectionPoint]) -> String {
    serde_json::to_string(points).expect("projection serializes")
}

/// Min-max scaling per dimension; constant dimensions become 0.
fn normalized(mut rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let dims = rows.first().map_or(0, Vec::len);
    for d in 0..dims {
        let lo = rows.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
        for r in &mut rows {
            r[d] = if hi > lo { (r[d] - lo) / (hi - lo) } else { 0.0 };
        }
    }
    rows
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Conditional affinities of row `i` at the precision matching `log_perp`.
fn row_affinities(d: &[f64], i: usize, log_perp: f64) -> Vec<f64> {
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut p = vec![0.0; d.len()];
    for _ in 0..64 {
        let mut sum = 0.0;
        for (j, pj) in p.iter_mut().enumerate() {
            *pj = if j == i { 0.0 } else { (-beta * d[j]).exp() };
            sum += *pj;
        }
        if sum <= 0.0 {
            // every other point is far: loosen
            hi = beta;
            beta = (lo + hi) / 2.0;
            continue;
        }
        let weighted: f64 = p.iter().zip(d).map(|(pj, dj)| pj * dj).sum();
        let entropy = sum.ln() + beta * weighted / sum;
        p.iter_mut().for_each(|pj| *pj /= sum);
        let diff = entropy - log_perp;
        if diff.abs() < 1e-5 {
            break;
        }
        if diff > 0.0 {
            lo = beta;
            beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = (beta + lo) / 2.0;
        }
    }
    p
}

/// Exact t-SNE with fixed iteration count.
fn tsne(x: &[Vec<f64>], seed: u64) -> Vec<[f64; 2]> {
    let n = x.len();
    let perplexity = (n as f64 / 4.0).clamp(1.0, 30.0);
    let dist: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| sq_dist(a, b)).collect()).collect();
    let cond: Vec<Vec<f64>> = (0..n).map(|i| row_affinities(&dist[i], i, perplexity.ln())).collect();
    let mut p = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect();
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let learning_rate = (n as f64 / EXAGGERATION / 4.0).max(50.0);
    let mut q = vec![vec![0.0; n]; n];

    for iter in 0..TSNE_ITERATIONS {
        let exaggeration = if iter < EXAGGERATION_ITERATIONS {
            EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < 250 { 0.5 } else { 0.8 };
        let mut z = 0.0;
        for i in 0..n {
            for j in 0..n {
                q[i][j] = if i == j {
                    0.0
                } else {
                    1.0 / (1.0 + sq_dist(&y[i], &y[j]))
                };
                z += q[i][j];
            }
        }
        for i in 0..n {
            let mut grad = [0.0; 2];
            for j in 0..n {
                let mult = (exaggeration * p[i][j] - q[i][j] / z) * q[i][j];
                grad[0] += 4.0 * mult * (y[i][0] - y[j][0]);
                grad[1] += 4.0 * mult * (y[i][1] - y[j][1]);
            }
            for d in 0..2 {
                gains[i][d] = if (grad[d] > 0.0) != (velocity[i][d] > 0.0) {
                    gains[i][d] + 0.2
                } else {
                    (gains[i][d] * 0.8).max(0.01)
                };
                velocity[i][d] = momentum * velocity[i][d] - learning_rate * gains[i][d] * grad[d];
            }
        }
        for (yi, vi) in y.iter_mut().zip(&velocity) {
            yi[0] += vi[0];
            yi[1] += vi[1];
        }
        let mean = [
            y.iter().map(|v| v[0]).sum::<f64>() / n as f64,
            y.iter().map(|v| v[1]).sum::<f64>() / n as f64,
        ];
        for yi in &mut y {
            yi[0] -= mean[0];
            yi[1] -= mean[1];
        }
    }
    y
}

/// First two principal components by power iteration with deflation.
fn pca(x: &[Vec<f64>], seed: u64) -> Vec<[f64; 2]> {
    let n = x.len();
    let dims = x.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..dims)
        .map(|d| x.iter().map(|r| r[d]).sum::<f64>() / n as f64)
        .collect();
    let centered: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![vec![0.0; dims]; dims];
    for r in &centered {
        for a in 0..dims {
            for b in 0..dims {
                cov[a][b] += r[a] * r[b] / n as f64;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let mut components = Vec::new();
    for _ in 0..2 {
        let mut v: Vec<f64> = (0..dims).map(|_| normal.sample(&mut rng)).collect();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = cov
                .iter()
                .map(|row| row.iter().zip(&v).map(|(c, x)| c * x).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-12 {
                lambda = 0.0;
                break;
            }
            let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
            let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            lambda = norm;
            if delta < 1e-12 {
                break;
            }
        }
        if lambda == 0.0 {
            v.iter_mut().for_each(|x| *x = 0.0);
        } else {
            // fix the sign so the largest loading is positive
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            for a in 0..dims {
                for b in 0..dims {
                    cov[a][b] -= lambda * v[a] * v[b];
                }
            }
        }
        components.push(v);
    }
    centered
        .iter()
        .map(|r| {
            let dot = |c: &[f64]| r.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [dot(&components[0]), dot(&components[1])]
        })
        .collect()
}
