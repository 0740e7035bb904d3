//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Plug-in MI in bits from a joint histogram keyed by (bin, label).
pub fn brute_force_mi(x: &[f64], y: &[bool], bins: usize) -> f64 {
    let n = x.len() as f64;
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let bin = |v: f64| -> usize {
        if hi == lo {
            0
        } else {
            (((v - lo) / (hi - lo) * bins as f64).floor() as usize).min(bins - 1)
        }
    };
    let mut joint: HashMap<(usize, bool), f64> = HashMap::new();
    let mut px: HashMap<usize, f64> = HashMap::new();
    let mut py: HashMap<bool, f64> = HashMap::new();
    for (&v, &c) in x.iter().zip(y) {
        let b = bin(v);
        *joint.entry((b, c)).or_default() += 1.0;
        *px.entry(b).or_default() += 1.0;
        *py.entry(c).or_default() += 1.0;
    }
    let mut keys: Vec<_> = joint.keys().copied().collect();
    keys.sort();
    keys.into_iter()
        .map(|(b, c)| {
            let pxy = joint[&(b, c)] / n;
            pxy * (pxy / ((px[&b] / n) * (py[&c] / n))).log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Singular values from nalgebra, sorted non-increasing.
pub fn reference_singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let p = rows.len();
    let n = rows[0].len();
    let a = DMatrix::from_fn(p, n, |i, j| rows[i][j]);
    let mut s: Vec<f64> = a
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn random_matrix(rng: &mut ChaCha8Rng, p: usize, n: usize, density: f64) -> Vec<Vec<f64>> {
    (0..p)
        .map(|_| {
            (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < density {
                        rng.gen::<f64>()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, z)| (x - z).powi(2)).sum();
    (-gamma * d).exp()
}

/// Dense solution of the unit-box ν-SVC dual.
pub struct QpSolution {
    pub alpha: Vec<f64>,
    pub r: f64,
    pub rho: f64,
    points: Vec<Vec<f64>>,
    y: Vec<i8>,
    gamma: f64,
}

impl QpSolution {
    pub fn decision(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .points
            .iter()
            .zip(&self.alpha)
            .zip(&self.y)
            .map(|((p, a), &y)| a * f64::from(y) * rbf(p, x, self.gamma))
            .sum();
        (s - self.rho) / self.r
    }
}

/// Projection of `v` onto `{0 ≤ a ≤ 1, Σa = s}` by bisection on a shift.
fn project_group(v: &[f64], s: f64) -> Vec<f64> {
    let clamp_sum = |t: f64| v.iter().map(|x| (x - t).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clamp_sum(mid) > s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    v.iter().map(|x| (x - t).clamp(0.0, 1.0)).collect()
}

fn project(v: &DVector<f64>, groups: &[Vec<usize>; 2], s: f64) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for g in groups {
        let sub: Vec<f64> = g.iter().map(|&i| v[i]).collect();
        for (&i, a) in g.iter().zip(project_group(&sub, s)) {
            out[i] = a;
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Debug)]
enum State {
    Lower,
    Upper,
    Free,
}

/// FISTA on the dual followed by exact active-set refinement.
pub fn nu_svc_oracle(points: &[Vec<f64>], y: &[i8], nu: f64, gamma: f64) -> QpSolution {
    let m = points.len();
    let q = DMatrix::from_fn(m, m, |i, j| {
        f64::from(y[i]) * f64::from(y[j]) * rbf(&points[i], &points[j], gamma)
    });
    let s = nu * m as f64 / 2.0;
    let groups: [Vec<usize>; 2] = [
        (0..m).filter(|&i| y[i] > 0).collect(),
        (0..m).filter(|&i| y[i] < 0).collect(),
    ];
    let group_of = |i: usize| usize::from(y[i] < 0);

    let lipschitz = q.clone().symmetric_eigen().eigenvalues.max();
    let mut x = project(&DVector::zeros(m), &groups, s);
    let mut z = x.clone();
    let mut t = 1.0f64;
    for _ in 0..100_000 {
        let g = &q * &z;
        let next = project(&(&z - g / lipschitz), &groups, s);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &next + (&next - &x) * ((t - 1.0) / t_next);
        let step = (&next - &x).amax();
        x = next;
        t = t_next;
        if step < 1e-14 {
            break;
        }
    }

    let tol = 1e-7;
    let mut state: Vec<State> = x
        .iter()
        .map(|&a| {
            if a <= tol {
                State::Lower
            } else if a >= 1.0 - tol {
                State::Upper
            } else {
                State::Free
            }
        })
        .collect();

    for _ in 0..500 {
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == State::Free).collect();
        let has_free = [0, 1].map(|g| free.iter().any(|&i| group_of(i) == g));
        let lambda_col: Vec<Option<usize>> = {
            let mut next = free.len();
            [0, 1]
                .map(|g| {
                    has_free[g].then(|| {
                        next += 1;
                        next - 1
                    })
                })
                .to_vec()
        };
        let dim = free.len() + has_free.iter().filter(|&&h| h).count();
        let mut alpha: Vec<f64> = state
            .iter()
            .map(|s| if *s == State::Upper { 1.0 } else { 0.0 })
            .collect();
        let mut lambda = [f64::NAN; 2];

        if dim > 0 {
            let mut a = DMatrix::zeros(dim, dim);
            let mut b = DVector::zeros(dim);
            for (r, &i) in free.iter().enumerate() {
                for (c, &j) in free.iter().enumerate() {
                    a[(r, c)] = q[(i, j)];
                }
                a[(r, lambda_col[group_of(i)].unwrap())] = -1.0;
                b[r] = -(0..m)
                    .filter(|&j| state[j] == State::Upper)
                    .map(|j| q[(i, j)])
                    .sum::<f64>();
            }
            for g in 0..2 {
                if let Some(row) = lambda_col[g] {
                    for (c, &i) in free.iter().enumerate() {
                        if group_of(i) == g {
                            a[(row, c)] = 1.0;
                        }
                    }
                    let uppers = groups[g]
                        .iter()
                        .filter(|&&i| state[i] == State::Upper)
                        .count();
                    b[row] = s - uppers as f64;
                }
            }
            let sol = a.lu().solve(&b).expect("KKT system is nonsingular");
            for (r, &i) in free.iter().enumerate() {
                alpha[i] = sol[r];
            }
            for g in 0..2 {
                if let Some(row) = lambda_col[g] {
                    lambda[g] = sol[row];
                }
            }
        }

        // free variables that left the box go to the nearer bound
        if let Some((i, _)) = free
            .iter()
            .map(|&i| (i, (-alpha[i]).max(alpha[i] - 1.0)))
            .filter(|&(_, v)| v > 1e-12)
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            state[i] = if alpha[i] < 0.0 {
                State::Lower
            } else {
                State::Upper
            };
            continue;
        }

        let grad: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|j| q[(i, j)] * alpha[j]).sum())
            .collect();
        for g in 0..2 {
            if lambda[g].is_nan() {
                let ub = groups[g]
                    .iter()
                    .filter(|&&i| state[i] == State::Lower)
                    .map(|&i| grad[i])
                    .fold(f64::INFINITY, f64::min);
                let lb = groups[g]
                    .iter()
                    .filter(|&&i| state[i] == State::Upper)
                    .map(|&i| grad[i])
                    .fold(f64::NEG_INFINITY, f64::max);
                lambda[g] = match (ub.is_finite(), lb.is_finite()) {
                    (true, true) => 0.5 * (ub + lb),
                    (false, true) => lb,
                    _ => ub,
                };
            }
        }
        let violation = |i: usize| -> f64 {
            let d = grad[i] - lambda[group_of(i)];
            match state[i] {
                State::Lower => -d,
                State::Upper => d,
                State::Free => 0.0,
            }
        };
        match (0..m)
            .map(|i| (i, violation(i)))
            .filter(|&(_, v)| v > 1e-12)
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            Some((i, _)) => state[i] = State::Free,
            None => {
                return QpSolution {
                    alpha,
                    r: 0.5 * (lambda[0] + lambda[1]),
                    rho: 0.5 * (lambda[0] - lambda[1]),
                    points: points.to_vec(),
                    y: y.to_vec(),
                    gamma,
                }
            }
        }
    }
    panic!("active-set refinement did not settle");
}

/// Two overlapping 2-D Gaussian blobs; both classes hold at least 40% of
/// the points so every ν ≤ 0.8 is feasible.
pub fn random_binary_problem(rng: &mut ChaCha8Rng, m: usize) -> (Vec<Vec<f64>>, Vec<i8>) {
    let pos = (m as f64 * rng.gen_range(0.4..=0.6)).round() as usize;
    let sep = rng.gen_range(0.5..2.5);
    let mut points = Vec::with_capacity(m);
    let mut y = Vec::with_capacity(m);
    for i in 0..m {
        let label: i8 = if i < pos { 1 } else { -1 };
        let c = f64::from(label) * sep / 2.0;
        let gauss = |rng: &mut ChaCha8Rng| {
            // Box-Muller
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
        };
        points.push(vec![c + gauss(rng), gauss(rng)]);
        y.push(label);
    }
    (points, y)
}

/// 10 × 10 lattice over the bounding box of `points`, padded by one unit.
pub fn probe_grid(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let lo = |d: usize| points.iter().map(|p| p[d]).fold(f64::INFINITY, f64::min) - 1.0;
    let hi = |d: usize| {
        points
            .iter()
            .map(|p| p[d])
            .fold(f64::NEG_INFINITY, f64::max)
            + 1.0
    };
    let (x0, x1, y0, y1) = (lo(0), hi(0), lo(1), hi(1));
    (0..10)
        .flat_map(|i| {
            (0..10).map(move |j| {
                vec![
                    x0 + (x1 - x0) * i as f64 / 9.0,
                    y0 + (y1 - y0) * j as f64 / 9.0,
                ]
            })
        })
        .collect()
}
