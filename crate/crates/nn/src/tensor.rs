//! Named parameter tensors and the store that owns them.

use rand::rngs::StdRng;
use rand::Rng;

use crate::error::{NnError, Result};

/// Index of a parameter inside its [`ParamStore`]. Stable for the lifetime
/// of the store.
pub type ParamId = usize;

/// A named learnable tensor with its gradient accumulator.
///
/// `grad` always has the same length as `values`; both are row-major
/// `rows x cols` (vectors are `1 x cols`).
#[derive(Debug, Clone)]
pub struct ParamTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
    pub grad: Vec<f64>,
}

impl ParamTensor {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }
}

/// Flat collection of uniquely named [`ParamTensor`]s.
///
/// Models allocate their tensors here and keep only [`ParamId`]s; the store
/// can then be snapshotted, soft-updated, checkpointed and optimized as one
/// unit. Iteration order is allocation order, which keeps every downstream
/// operation deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    tensors: Vec<ParamTensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Allocates a tensor filled by `init`. Names must be unique.
    pub fn alloc_with(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        init: impl FnMut() -> f64,
    ) -> Result<ParamId> {
        if self.tensors.iter().any(|t| t.name == name) {
            return Err(NnError::DuplicateName(name.to_string()));
        }
        let n = rows * cols;
        let mut init = init;
        let values: Vec<f64> = (0..n).map(|_| init()).collect();
        self.tensors.push(ParamTensor {
            name: name.to_string(),
            rows,
            cols,
            values,
            grad: vec![0.0; n],
        });
        Ok(self.tensors.len() - 1)
    }

    /// Weight-matrix init: uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`.
    pub fn alloc_weight(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        rng: &mut StdRng,
    ) -> Result<ParamId> {
        let bound = 1.0 / (rows as f64).sqrt();
        self.alloc_with(name, rows, cols, || rng.gen_range(-bound..=bound))
    }

    /// Bias / offset init: zeros.
    pub fn alloc_zeros(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.alloc_with(name, rows, cols, || 0.0)
    }

    /// Constant fill (layer-norm gains start at 1).
    pub fn alloc_const(&mut self, name: &str, rows: usize, cols: usize, v: f64) -> Result<ParamId> {
        self.alloc_with(name, rows, cols, || v)
    }

    pub fn get(&self, id: ParamId) -> &ParamTensor {
        &self.tensors[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut ParamTensor {
        &mut self.tensors[id]
    }

    pub fn id_of(&self, name: &str) -> Result<ParamId> {
        self.tensors
            .iter()
            .position(|t| t.name == name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &ParamTensor)> {
        self.tensors.iter().enumerate()
    }

    pub fn zero_grads(&mut self) {
        for t in &mut self.tensors {
            t.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Ids of parameters whose name starts with `prefix`.
    pub fn ids_with_prefix(&self, prefix: &str) -> Vec<ParamId> {
        self.tensors
            .iter()
            .enumerate()
            .filter(|(_, t)| t.name.starts_with(prefix))
            .map(|(i, _)| i)
            .collect()
    }

    /// Total number of scalar entries across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    /// Soft update `target <- tau * self + (1 - tau) * target`.
    ///
    /// Both stores must share the same layout (names, shapes, order), which
    /// holds for clones of one model.
    pub fn soft_update_into(&self, target: &mut ParamStore, tau: f64) {
        assert_eq!(self.tensors.len(), target.tensors.len(), "store layout mismatch");
        for (src, dst) in self.tensors.iter().zip(target.tensors.iter_mut()) {
            debug_assert_eq!(src.name, dst.name);
            for (v, t) in src.values.iter().zip(dst.values.iter_mut()) {
                *t = tau * v + (1.0 - tau) * *t;
            }
        }
    }

    /// True when every value of every tensor is finite.
    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.values.iter().all(|v| v.is_finite()))
    }
}
