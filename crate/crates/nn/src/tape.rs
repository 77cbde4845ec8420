//! Computation tape: matrix-level forward recording and reverse replay.

use crate::tensor::{ParamId, ParamStore};

/// Index of a value buffer on the tape.
pub type BufId = usize;

/// Row-major matrix buffer. Vectors are `1 x cols`, scalars `1 x 1`.
#[derive(Debug, Clone)]
pub struct Buf {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Buf {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

type BackwardFn = Box<dyn Fn(&[Buf], &mut [Vec<f64>])>;

/// Records primitive operations of one forward pass and replays them in
/// reverse to populate parameter gradients.
///
/// The tape is bound to a single [`ParamStore`] per pass: [`Tape::param`]
/// leases a parameter's values onto the tape (once per id, so a batch of
/// sub-graphs shares one buffer) and [`Tape::grads_into_store`] moves the
/// accumulated gradients back after [`Tape::backward`].
///
/// With `recording = false` the same ops run the same arithmetic but skip
/// building backward nodes; this is the evaluation mode used for rollouts.
pub struct Tape {
    bufs: Vec<Buf>,
    grads: Vec<Vec<f64>>,
    nodes: Vec<BackwardFn>,
    param_bufs: Vec<(ParamId, BufId)>,
    param_lookup: Vec<Option<BufId>>,
    recording: bool,
}

impl Tape {
    pub fn new() -> Self {
        Self::with_mode(true)
    }

    /// Evaluation-only tape: identical forward math, no backward nodes.
    pub fn eval() -> Self {
        Self::with_mode(false)
    }

    fn with_mode(recording: bool) -> Self {
        Tape {
            bufs: Vec::new(),
            grads: Vec::new(),
            nodes: Vec::new(),
            param_bufs: Vec::new(),
            param_lookup: Vec::new(),
            recording,
        }
    }

    pub fn recording(&self) -> bool {
        self.recording
    }

    pub fn buf(&self, id: BufId) -> &Buf {
        &self.bufs[id]
    }

    pub fn grad(&self, id: BufId) -> &[f64] {
        &self.grads[id]
    }

    pub fn rows(&self, id: BufId) -> usize {
        self.bufs[id].rows
    }

    pub fn cols(&self, id: BufId) -> usize {
        self.bufs[id].cols
    }

    pub fn value(&self, id: BufId) -> f64 {
        debug_assert_eq!(self.bufs[id].len(), 1, "value() expects a scalar buffer");
        self.bufs[id].data[0]
    }

    pub fn data(&self, id: BufId) -> &[f64] {
        &self.bufs[id].data
    }

    pub(crate) fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> BufId {
        debug_assert_eq!(data.len(), rows * cols);
        if self.recording {
            self.grads.push(vec![0.0; data.len()]);
        }
        self.bufs.push(Buf { rows, cols, data });
        self.bufs.len() - 1
    }

    pub(crate) fn push_node(&mut self, f: impl Fn(&[Buf], &mut [Vec<f64>]) + 'static) {
        if self.recording {
            self.nodes.push(Box::new(f));
        }
    }

    /// Leases a constant (non-parameter) input onto the tape.
    pub fn constant(&mut self, rows: usize, cols: usize, data: Vec<f64>) -> BufId {
        assert_eq!(data.len(), rows * cols, "constant data length mismatch");
        self.push(rows, cols, data)
    }

    pub fn scalar(&mut self, v: f64) -> BufId {
        self.push(1, 1, vec![v])
    }

    /// Leases parameter `id` from `store` onto the tape. Repeated calls for
    /// the same id return the same buffer so gradients accumulate.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> BufId {
        if self.param_lookup.len() < store.len() {
            self.param_lookup.resize(store.len(), None);
        }
        if let Some(b) = self.param_lookup[id] {
            return b;
        }
        let t = store.get(id);
        let b = self.push(t.rows, t.cols, t.values.clone());
        self.param_lookup[id] = Some(b);
        self.param_bufs.push((id, b));
        b
    }

    /// Seeds `d loss / d loss = 1` and replays all nodes in reverse.
    pub fn backward(&mut self, loss: BufId) {
        assert!(self.recording, "backward() on an evaluation tape");
        assert_eq!(self.bufs[loss].len(), 1, "backward seed must be scalar");
        self.grads[loss][0] = 1.0;
        for node in self.nodes.iter().rev() {
            node(&self.bufs, &mut self.grads);
        }
    }

    /// Accumulates parameter gradients gathered by [`Tape::backward`] into
    /// the store's `grad` fields (adds; callers zero grads between steps).
    pub fn grads_into_store(&self, store: &mut ParamStore) {
        for &(pid, bid) in &self.param_bufs {
            let g = &self.grads[bid];
            let t = store.get_mut(pid);
            debug_assert_eq!(t.len(), g.len());
            for (dst, src) in t.grad.iter_mut().zip(g.iter()) {
                *dst += *src;
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}
