//! Global critic: Q(s, a_1..a_n) as an MLP over the concatenated global
//! state and joint action.

use rand::rngs::StdRng;

use tpa_agent::LinearParams;
use tpa_nn::{BufId, ParamStore, Tape};

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub struct Critic {
    l1: LinearParams,
    l2: LinearParams,
    head: LinearParams,
    pub in_dim: usize,
}

impl Critic {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        rng: &mut StdRng,
    ) -> Result<Critic> {
        Ok(Critic {
            l1: LinearParams::alloc(store, &format!("{prefix}.l1"), in_dim, hidden, rng)?,
            l2: LinearParams::alloc(store, &format!("{prefix}.l2"), hidden, hidden, rng)?,
            head: LinearParams::alloc(store, &format!("{prefix}.head"), hidden, 1, rng)?,
            in_dim,
        })
    }

    /// Batched forward: `input` is `batch x in_dim`, output `batch x 1`.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, input: BufId) -> Result<BufId> {
        let h = self.l1.apply(tape, store, input)?;
        let h = tpa_nn::relu(tape, h);
        let h = self.l2.apply(tape, store, h)?;
        let h = tpa_nn::relu(tape, h);
        Ok(self.head.apply(tape, store, h)?)
    }

    /// Q values at the current parameters without recording.
    pub fn eval(&self, store: &ParamStore, input: Vec<f64>, batch: usize) -> Result<Vec<f64>> {
        let mut tape = Tape::eval();
        let x = tape.constant(batch, self.in_dim, input);
        let q = self.forward(&mut tape, store, x)?;
        Ok(tape.data(q).to_vec())
    }
}
