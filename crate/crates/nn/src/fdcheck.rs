//! Central finite-difference verification of analytic gradients.

use crate::error::{NnError, Result};
use crate::tensor::ParamStore;

/// A parameterized scalar function whose gradient can be checked.
///
/// `loss` must be a pure function of the store's current values (plus
/// whatever fixed inputs the implementor froze at construction).
pub trait DiffModel {
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    /// Forward evaluation at the current parameter values.
    fn loss(&mut self) -> Result<f64>;
    /// Forward + backward; leaves gradients in the store.
    fn loss_and_grad(&mut self) -> Result<f64>;
}

/// Compares the analytic gradient of every parameter entry against the
/// central difference `(f(p + step) - f(p - step)) / (2 step)` and returns
/// the worst relative error.
///
/// Errors are relative to `max(|analytic|, |numeric|)`. Entries where both
/// sides are below 1e-6 are compared absolutely instead: central
/// differences cannot resolve gradients near the f64 noise floor, and a
/// ratio of two such numbers says nothing about correctness.
pub fn finite_difference_check(model: &mut dyn DiffModel, step: f64) -> Result<f64> {
    if step <= 0.0 {
        return Err(NnError::Argument(format!("step must be positive, got {step}")));
    }
    model.store_mut().zero_grads();
    let base = model.loss_and_grad()?;
    if !base.is_finite() {
        return Err(NnError::NonFinite("finite_difference_check loss"));
    }
    let analytic: Vec<Vec<f64>> = model
        .store()
        .iter()
        .map(|(_, t)| t.grad.clone())
        .collect();

    let n_params = model.store().len();
    let mut worst: f64 = 0.0;
    for pid in 0..n_params {
        let n = model.store().get(pid).len();
        for e in 0..n {
            let orig = model.store().get(pid).values[e];

            model.store_mut().get_mut(pid).values[e] = orig + step;
            let f_plus = model.loss()?;
            model.store_mut().get_mut(pid).values[e] = orig - step;
            let f_minus = model.loss()?;
            model.store_mut().get_mut(pid).values[e] = orig;

            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(NnError::NonFinite("finite_difference_check perturbed loss"));
            }
            let numeric = (f_plus - f_minus) / (2.0 * step);
            let a = analytic[pid][e];
            let denom = a.abs().max(numeric.abs());
            let err = if denom < 1e-6 {
                (a - numeric).abs()
            } else {
                (a - numeric).abs() / denom
            };
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ops;
    use crate::tape::Tape;
    use crate::tensor::ParamId;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    /// loss = sum of squares of the single parameter tensor.
    struct Quadratic {
        store: ParamStore,
        p: ParamId,
    }

    impl DiffModel for Quadratic {
        fn store(&self) -> &ParamStore {
            &self.store
        }
        fn store_mut(&mut self) -> &mut ParamStore {
            &mut self.store
        }
        fn loss(&mut self) -> Result<f64> {
            let mut tape = Tape::eval();
            let p = tape.param(&self.store, self.p);
            let sq = ops::square(&mut tape, p);
            let s = ops::sum_all(&mut tape, sq);
            Ok(tape.value(s))
        }
        fn loss_and_grad(&mut self) -> Result<f64> {
            let mut tape = Tape::new();
            let p = tape.param(&self.store, self.p);
            let sq = ops::square(&mut tape, p);
            let s = ops::sum_all(&mut tape, sq);
            tape.backward(s);
            tape.grads_into_store(&mut self.store);
            Ok(tape.value(s))
        }
    }

    #[test]
    fn quadratic_agrees_to_machine_precision_scale() {
        let mut rng = StdRng::seed_from_u64(17);
        let mut store = ParamStore::new();
        let p = store.alloc_weight("p", 3, 4, &mut rng).unwrap();
        let mut model = Quadratic { store, p };
        let err = finite_difference_check(&mut model, 1e-5).unwrap();
        assert!(err < 1e-9, "relative error {err}");
    }

    struct Constant {
        store: ParamStore,
    }

    impl DiffModel for Constant {
        fn store(&self) -> &ParamStore {
            &self.store
        }
        fn store_mut(&mut self) -> &mut ParamStore {
            &mut self.store
        }
        fn loss(&mut self) -> Result<f64> {
            Ok(4.5)
        }
        fn loss_and_grad(&mut self) -> Result<f64> {
            Ok(4.5)
        }
    }

    #[test]
    fn constant_function_reports_zero() {
        let mut store = ParamStore::new();
        store.alloc_const("p", 2, 2, 1.0).unwrap();
        let mut model = Constant { store };
        let err = finite_difference_check(&mut model, 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn nonpositive_step_rejected() {
        let mut model = Constant {
            store: ParamStore::new(),
        };
        assert!(finite_difference_check(&mut model, 0.0).is_err());
    }
}
