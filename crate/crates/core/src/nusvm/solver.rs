//! Decomposition solver for the ν-SVC dual
//!
//! ```text
//! min ½ αᵀQα   s.t.  Σ_{y=+1} α = Σ_{y=-1} α = ν·W/2,   0 ≤ α_i ≤ C_i
//! ```
//!
//! with `Q_ij = y_i y_j K(x_i, x_j)`, per-class bounds `C_i` (the class
//! weights, 1 when unweighted) and `W = Σ C_i`. Because both equality
//! constraints act within one label group, every working pair is taken from
//! the same group; the pair is the maximal violator of that group plus the
//! partner giving the largest second-order decrease.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelCache, RbfKernel};
use super::SvmError;

const TAU: f64 = 1e-12;
const MIN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stopping tolerance on the maximal KKT violation.
    pub eps: f64,
    pub max_iter: usize,
    /// Kernel column cache budget in megabytes.
    pub cache_mb: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            max_iter: 10_000_000,
            cache_mb: 100,
        }
    }
}

/// Raw dual solution.
#[derive(Debug, Clone, PartialEq)]
pub struct NuSolution {
    pub alpha: Vec<f64>,
    /// `Qα` at the solution.
    pub gradient: Vec<f64>,
    pub upper: Vec<f64>,
    /// Margin scale; decision values are `(Σ α_i y_i K(x_i, x) − rho) / r`.
    pub r: f64,
    pub rho: f64,
    pub iterations: usize,
}

impl NuSolution {
    pub fn is_upper(&self, i: usize) -> bool {
        self.alpha[i] >= self.upper[i]
    }

    pub fn is_lower(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0
    }

    /// Largest KKT violation over both label groups.
    pub fn kkt_violation(&self, y: &[i8]) -> f64 {
        let mut worst: f64 = 0.0;
        for group in [1i8, -1] {
            let mut max_g = f64::NEG_INFINITY;
            let mut min_g = f64::INFINITY;
            for i in (0..y.len()).filter(|&i| y[i] == group) {
                if !self.is_lower(i) {
                    max_g = max_g.max(self.gradient[i]);
                }
                if !self.is_upper(i) {
                    min_g = min_g.min(self.gradient[i]);
                }
            }
            if max_g.is_finite() && min_g.is_finite() {
                worst = worst.max(max_g - min_g);
            }
        }
        worst
    }
}

pub fn solve_nu_svc(
    points: &[&[f64]],
    y: &[i8],
    upper: &[f64],
    nu: f64,
    kernel: RbfKernel,
    config: &SolverConfig,
) -> Result<NuSolution, SvmError> {
    let l = points.len();
    debug_assert_eq!(y.len(), l);
    debug_assert_eq!(upper.len(), l);

    let total: f64 = upper.iter().sum();
    let mut remaining = [nu * total / 2.0; 2];
    let mut alpha = vec![0.0; l];
    for i in 0..l {
        let g = group(y[i]);
        alpha[i] = upper[i].min(remaining[g]);
        remaining[g] -= alpha[i];
    }

    let mut cache = KernelCache::new(kernel, points, config.cache_mb.max(1) << 20);
    let mut grad = vec![0.0; l];
    for i in 0..l {
        if alpha[i] > 0.0 {
            let col = cache.column(i);
            for k in 0..l {
                grad[k] += alpha[i] * q(y, &col, i, k);
            }
        }
    }

    let mut iterations = 0;
    let mut eps = config.eps;
    loop {
        let Some((i, j)) = select_working_set(&alpha, &grad, y, upper, eps, &mut cache) else {
            // a loose stop can leave r unresolved when the true margin is tiny
            let (r, _) = margin_offsets(&alpha, &grad, y, upper);
            if r > 0.0 || eps <= MIN_EPS {
                break;
            }
            eps = (eps * 1e-2).max(MIN_EPS);
            continue;
        };
        if iterations >= config.max_iter {
            return Err(SvmError::NoConvergence { iterations });
        }
        iterations += 1;

        let qi = cache.column(i);
        let qj = cache.column(j);
        let (ci, cj) = (upper[i], upper[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);

        // y_i == y_j, so Q_ij = K_ij and the pair sum is invariant.
        let mut quad = 2.0 - 2.0 * qi[j];
        if quad <= 0.0 {
            quad = TAU;
        }
        let delta = (grad[i] - grad[j]) / quad;
        let sum = alpha[i] + alpha[j];
        alpha[i] -= delta;
        alpha[j] += delta;
        if sum > ci {
            if alpha[i] > ci {
                alpha[i] = ci;
                alpha[j] = sum - ci;
            }
        } else if alpha[j] < 0.0 {
            alpha[j] = 0.0;
            alpha[i] = sum;
        }
        if sum > cj {
            if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = sum - cj;
            }
        } else if alpha[i] < 0.0 {
            alpha[i] = 0.0;
            alpha[j] = sum;
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for k in 0..l {
            grad[k] += q(y, &qi, i, k) * di + q(y, &qj, j, k) * dj;
        }
    }

    let (r, rho) = margin_offsets(&alpha, &grad, y, upper);
    if !(r.is_finite() && r > 0.0) {
        return Err(SvmError::Degenerate(format!(
            "margin scale r = {r}; the kernel does not separate the classes at all"
        )));
    }
    Ok(NuSolution {
        alpha,
        gradient: grad,
        upper: upper.to_vec(),
        r,
        rho,
        iterations,
    })
}

#[inline]
fn group(y: i8) -> usize {
    if y > 0 {
        0
    } else {
        1
    }
}

#[inline]
fn q(y: &[i8], kcol: &[f64], i: usize, k: usize) -> f64 {
    let s = if y[i] == y[k] { 1.0 } else { -1.0 };
    s * kcol[k]
}

fn select_working_set(
    alpha: &[f64],
    grad: &[f64],
    y: &[i8],
    upper: &[f64],
    eps: f64,
    cache: &mut KernelCache<'_>,
) -> Option<(usize, usize)> {
    let l = alpha.len();
    // Per group: the index that can move up with the steepest descent.
    let mut gmax = [f64::NEG_INFINITY; 2];
    let mut gmax_idx: [Option<usize>; 2] = [None; 2];
    for t in 0..l {
        let g = group(y[t]);
        let can_rise = alpha[t] < upper[t];
        // Moving α_t up decreases the objective at rate −G_t.
        let score = if g == 0 { -grad[t] } else { grad[t] };
        let movable = if g == 0 { can_rise } else { alpha[t] > 0.0 };
        if movable && score >= gmax[g] {
            gmax[g] = score;
            gmax_idx[g] = Some(t);
        }
    }

    let cols = [
        gmax_idx[0].map(|i| cache.column(i)),
        gmax_idx[1].map(|i| cache.column(i)),
    ];
    let mut gmax2 = [f64::NEG_INFINITY; 2];
    let mut best = (f64::INFINITY, None::<usize>);
    for j in 0..l {
        let g = group(y[j]);
        if g == 0 {
            if alpha[j] <= 0.0 {
                continue;
            }
            gmax2[0] = gmax2[0].max(grad[j]);
            let diff = gmax[0] + grad[j];
            if diff > 0.0 {
                if let (Some(ip), Some(col)) = (gmax_idx[0], &cols[0]) {
                    let quad = quad_coef(col[ip], col[j]);
                    let obj = -diff * diff / quad;
                    if obj <= best.0 {
                        best = (obj, Some(j));
                    }
                }
            }
        } else {
            if alpha[j] >= upper[j] {
                continue;
            }
            gmax2[1] = gmax2[1].max(-grad[j]);
            let diff = gmax[1] - grad[j];
            if diff > 0.0 {
                if let (Some(in_), Some(col)) = (gmax_idx[1], &cols[1]) {
                    let quad = quad_coef(col[in_], col[j]);
                    let obj = -diff * diff / quad;
                    if obj <= best.0 {
                        best = (obj, Some(j));
                    }
                }
            }
        }
    }

    if (gmax[0] + gmax2[0]).max(gmax[1] + gmax2[1]) < eps {
        return None;
    }
    let j = best.1?;
    let i = gmax_idx[group(y[j])]?;
    Some((i, j))
}

/// `K_ii + K_jj − 2 K_ij` for RBF, whose diagonal is 1.
#[inline]
fn quad_coef(kii: f64, kij: f64) -> f64 {
    let c = kii + 1.0 - 2.0 * kij;
    if c > 0.0 {
        c
    } else {
        TAU
    }
}

/// `(r, rho)` from the group multipliers: the mean gradient of free variables,
/// or the midpoint of the feasible interval when a group has none free.
fn margin_offsets(alpha: &[f64], grad: &[f64], y: &[i8], upper: &[f64]) -> (f64, f64) {
    let mut mult = [0.0; 2];
    for (g, m) in mult.iter_mut().enumerate() {
        let mut ub = f64::INFINITY;
        let mut lb = f64::NEG_INFINITY;
        let mut free_sum = 0.0;
        let mut free = 0usize;
        for i in (0..alpha.len()).filter(|&i| group(y[i]) == g) {
            if alpha[i] >= upper[i] {
                lb = lb.max(grad[i]);
            } else if alpha[i] <= 0.0 {
                ub = ub.min(grad[i]);
            } else {
                free += 1;
                free_sum += grad[i];
            }
        }
        *m = if free > 0 {
            free_sum / free as f64
        } else if ub.is_finite() && lb.is_finite() {
            (ub + lb) / 2.0
        } else if lb.is_finite() {
            lb
        } else {
            ub
        };
    }
    ((mult[0] + mult[1]) / 2.0, (mult[0] - mult[1]) / 2.0)
}
