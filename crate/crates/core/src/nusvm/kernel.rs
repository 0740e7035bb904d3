use std::collections::VecDeque;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::SvmError;

/// Gaussian kernel `exp(-γ‖x − z‖²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbfKernel {
    pub gamma: f64,
}

impl RbfKernel {
    pub fn new(gamma: f64) -> Result<Self, SvmError> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(SvmError::InvalidParameter(format!(
                "gamma must be finite and non-negative, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
        (-self.gamma * d2).exp()
    }
}

pub fn rbf(x: &[f64], z: &[f64], gamma: f64) -> Result<f64, SvmError> {
    if x.len() != z.len() {
        return Err(SvmError::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    Ok(RbfKernel::new(gamma)?.eval(x, z))
}

/// Least-recently-used cache of kernel matrix columns, bounded in bytes.
pub(crate) struct KernelCache<'a> {
    kernel: RbfKernel,
    points: &'a [&'a [f64]],
    columns: Vec<Option<Rc<[f64]>>>,
    recent: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    pub(crate) fn new(kernel: RbfKernel, points: &'a [&'a [f64]], cache_bytes: usize) -> Self {
        let l = points.len().max(1);
        let capacity = (cache_bytes / (l * std::mem::size_of::<f64>())).max(2);
        Self {
            kernel,
            points,
            columns: vec![None; points.len()],
            recent: VecDeque::new(),
            capacity,
        }
    }

    pub(crate) fn column(&mut self, i: usize) -> Rc<[f64]> {
        if let Some(col) = &self.columns[i] {
            let col = col.clone();
            if let Some(pos) = self.recent.iter().position(|&c| c == i) {
                self.recent.remove(pos);
            }
            self.recent.push_back(i);
            return col;
        }
        let xi = self.points[i];
        let col: Rc<[f64]> = self
            .points
            .iter()
            .map(|xk| self.kernel.eval(xi, xk))
            .collect();
        self.columns[i] = Some(col.clone());
        self.recent.push_back(i);
        while self.recent.len() > self.capacity {
            if let Some(old) = self.recent.pop_front() {
                self.columns[old] = None;
            }
        }
        col
    }
}
