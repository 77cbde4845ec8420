//! Global temporal prototype bank: similarity matching, season classifier,
//! and the cluster / separation / diversity losses.

use rand::rngs::StdRng;

use tpa_nn::{BufId, ParamId, ParamStore, Tape};

use crate::encoder::LinearParams;
use crate::error::Result;

pub const N_PROTOTYPES: usize = 24;
pub const PROTOTYPES_PER_SEASON: usize = 6;

/// Loss weights and similarity constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrototypeHyper {
    /// Similarity stabilizer (guards the pole at zero distance).
    pub eps: f64,
    /// Cosine threshold of the diversity loss.
    pub xi: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl Default for PrototypeHyper {
    fn default() -> Self {
        PrototypeHyper { eps: 1e-4, xi: 0.3, lambda1: 0.1, lambda2: 0.05, lambda3: 0.001 }
    }
}

/// The 24-slot bank. Slots are season-blocked: slot `i` belongs to season
/// `i / 6` (spring, summer, fall, winter). `frozen` banks are excluded from
/// optimizer updates (the transferability workflow).
#[derive(Debug, Clone)]
pub struct PrototypeBank {
    pub param: ParamId,
    pub dim: usize,
    pub frozen: bool,
}

impl PrototypeBank {
    /// Season of slot `i`.
    pub fn season_of_slot(slot: usize) -> usize {
        slot / PROTOTYPES_PER_SEASON
    }

    /// `[start, end)` slot range of season `k`.
    pub fn season_block(k: usize) -> (usize, usize) {
        (k * PROTOTYPES_PER_SEASON, (k + 1) * PROTOTYPES_PER_SEASON)
    }

    pub fn season_blocks() -> Vec<(usize, usize)> {
        (0..4).map(Self::season_block).collect()
    }

    /// Registers a bank tensor from explicit values (24 rows of `dim`).
    pub fn from_values(store: &mut ParamStore, dim: usize, values: Vec<f64>) -> Result<Self> {
        assert_eq!(values.len(), N_PROTOTYPES * dim);
        let mut it = values.into_iter();
        let param = store.alloc_with("prototypes.bank", N_PROTOTYPES, dim, || {
            it.next().expect("sized above")
        })?;
        Ok(PrototypeBank { param, dim, frozen: false })
    }

    pub fn values<'s>(&self, store: &'s ParamStore) -> &'s [f64] {
        &store.get(self.param).values
    }
}

/// Eq. of the prototype similarity:
/// `sim = ln((||p - f||^2 + 1) / (||p - f||^2 + eps))`.
pub fn similarity(p: &[f64], f: &[f64], eps: f64) -> f64 {
    debug_assert_eq!(p.len(), f.len());
    let d: f64 = p.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum();
    ((d + 1.0) / (d + eps)).ln()
}

/// Similarity of every prototype to `f_z`: `s_i = sim(p_i, F_z)` and the
/// argmax slot (ties break to the lowest index).
pub fn match_prototype(
    store: &ParamStore,
    bank: &PrototypeBank,
    f_z: &[f64],
    eps: f64,
) -> (usize, Vec<f64>) {
    let vals = bank.values(store);
    let mut sims = Vec::with_capacity(N_PROTOTYPES);
    let mut best = 0usize;
    let mut best_sim = f64::NEG_INFINITY;
    for i in 0..N_PROTOTYPES {
        let s = similarity(&vals[i * bank.dim..(i + 1) * bank.dim], f_z, eps);
        if s > best_sim {
            best_sim = s;
            best = i;
        }
        sims.push(s);
    }
    (best, sims)
}

/// Tape-side similarity vector (`1 x 24`), differentiable w.r.t. the bank
/// and `f_z`.
pub fn prototype_sims_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    f_z: BufId,
    eps: f64,
) -> BufId {
    let bank_buf = tape.param(store, bank.param);
    let d = tpa_nn::sq_dist_rows(tape, bank_buf, f_z);
    tpa_nn::log_similarity(tape, d, eps)
}

/// Dense 24 -> 4 season classifier over the similarity vector.
#[derive(Debug, Clone, Copy)]
pub struct SeasonClassifier {
    pub linear: LinearParams,
}

impl SeasonClassifier {
    pub fn alloc(store: &mut ParamStore, rng: &mut StdRng) -> Result<SeasonClassifier> {
        Ok(SeasonClassifier {
            linear: LinearParams::alloc(store, "classifier", N_PROTOTYPES, 4, rng)?,
        })
    }
}

/// Season logits (`1 x 4`) from encoded features through the prototype
/// layer (similarity vector) and the classifier.
pub fn season_logits_on_tape(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    classifier: &SeasonClassifier,
    f_z: BufId,
    eps: f64,
) -> Result<BufId> {
    let sims = prototype_sims_on_tape(tape, store, bank, f_z, eps);
    classifier.linear.apply(tape, store, sims)
}

/// Cluster cost: mean over the batch of the squared distance to the nearest
/// own-season prototype.
pub fn loss_cluster(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    features: &[(BufId, usize)],
) -> BufId {
    let bank_buf = tape.param(store, bank.param);
    let mut mins = Vec::with_capacity(features.len());
    for &(f_z, season) in features {
        let d = tpa_nn::sq_dist_rows(tape, bank_buf, f_z);
        let (lo, hi) = PrototypeBank::season_block(season);
        let own = tpa_nn::slice_cols(tape, d, lo, hi);
        mins.push((tpa_nn::row_min(tape, own), 1.0 / features.len() as f64));
    }
    tpa_nn::add_weighted(tape, &mins)
}

/// Separation cost: negated mean distance to the nearest other-season
/// prototype (always <= 0).
pub fn loss_separation(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    features: &[(BufId, usize)],
) -> BufId {
    let bank_buf = tape.param(store, bank.param);
    let mut mins = Vec::with_capacity(features.len());
    for &(f_z, season) in features {
        let d = tpa_nn::sq_dist_rows(tape, bank_buf, f_z);
        let (lo, hi) = PrototypeBank::season_block(season);
        // distances of the three other-season blocks, stitched together
        let mut other: Option<BufId> = None;
        if lo > 0 {
            other = Some(tpa_nn::slice_cols(tape, d, 0, lo));
        }
        if hi < N_PROTOTYPES {
            let right = tpa_nn::slice_cols(tape, d, hi, N_PROTOTYPES);
            other = Some(match other {
                Some(left) => tpa_nn::concat_cols(tape, left, right),
                None => right,
            });
        }
        let other = other.expect("a season never covers the whole bank");
        mins.push((
            tpa_nn::row_min(tape, other),
            -1.0 / features.len() as f64,
        ));
    }
    tpa_nn::add_weighted(tape, &mins)
}

/// Diversity cost: hinge on pairwise cosine similarity over ordered pairs
/// within each season block (each unordered pair counts twice).
pub fn loss_diversity(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    xi: f64,
) -> BufId {
    let bank_buf = tape.param(store, bank.param);
    let unit = tpa_nn::l2_normalize_rows(tape, bank_buf);
    let gram = tpa_nn::matmul_nt(tape, unit, unit);
    tpa_nn::hinge_offdiag_blocks(tape, gram, PrototypeBank::season_blocks(), xi)
}

/// Total prototype-learning objective: season cross-entropy plus the three
/// weighted structure losses, averaged over the feature batch.
pub fn loss_prototype_total(
    tape: &mut Tape,
    store: &ParamStore,
    bank: &PrototypeBank,
    classifier: &SeasonClassifier,
    features: &[(BufId, usize)],
    hyper: &PrototypeHyper,
) -> Result<BufId> {
    let mut ce_terms = Vec::with_capacity(features.len());
    for &(f_z, season) in features {
        let logits = season_logits_on_tape(tape, store, bank, classifier, f_z, hyper.eps)?;
        let ce = tpa_nn::cross_entropy_logits(tape, logits, season);
        ce_terms.push((ce, 1.0 / features.len() as f64));
    }
    let ce = tpa_nn::add_weighted(tape, &ce_terms);
    let clst = loss_cluster(tape, store, bank, features);
    let sep = loss_separation(tape, store, bank, features);
    let div = loss_diversity(tape, store, bank, hyper.xi);
    Ok(tpa_nn::add_weighted(
        tape,
        &[
            (ce, 1.0),
            (clst, hyper.lambda1),
            (sep, hyper.lambda2),
            (div, hyper.lambda3),
        ],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn bank_with(store: &mut ParamStore, dim: usize, rows: Vec<Vec<f64>>) -> PrototypeBank {
        let mut values = Vec::with_capacity(N_PROTOTYPES * dim);
        for r in rows {
            assert_eq!(r.len(), dim);
            values.extend(r);
        }
        PrototypeBank::from_values(store, dim, values).unwrap()
    }

    #[test]
    fn similarity_exact_values() {
        let eps = 1e-4;
        // zero distance: ln(1/eps) = ln(10000) = 9.2103...
        let sim_zero = similarity(&[1.0, 2.0], &[1.0, 2.0], eps);
        assert_eq!(sim_zero, (1.0f64 / eps).ln());
        assert!((sim_zero - 9.210340371976184).abs() < 1e-12);
        // squared distance 1: ln(2 / 1.0001)
        let sim_one = similarity(&[1.0, 0.0], &[0.0, 0.0], eps);
        assert!((sim_one - (2.0f64 / 1.0001).ln()).abs() < 1e-15);
        assert!((sim_one - 0.693047185559612).abs() < 1e-12);
        // huge distance: sim -> 0+
        let sim_far = similarity(&[1e6, 0.0], &[0.0, 0.0], eps);
        assert!(sim_far > 0.0 && sim_far < 1e-9, "sim_far = {sim_far}");
    }

    #[test]
    fn similarity_strictly_decreasing_in_distance() {
        let eps = 1e-4;
        let mut prev = f64::INFINITY;
        for k in 0..100 {
            let d = 0.05 * k as f64;
            let s = similarity(&[d, 0.0], &[0.0, 0.0], eps);
            assert!(s < prev, "not strictly decreasing at k = {k}");
            prev = s;
        }
    }

    #[test]
    fn match_finds_exact_prototype() {
        let mut store = ParamStore::new();
        let dim = 4;
        let mut rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
            .map(|i| vec![10.0 + i as f64, -5.0, 3.0, 0.5])
            .collect();
        rows[7] = vec![0.1, 0.2, 0.3, 0.4];
        let bank = bank_with(&mut store, dim, rows);
        let (best, sims) = match_prototype(&store, &bank, &[0.1, 0.2, 0.3, 0.4], 1e-4);
        assert_eq!(best, 7);
        assert_eq!(sims.len(), 24);
        assert_eq!(sims[7], (1.0f64 / 1e-4).ln());
    }

    #[test]
    fn argmax_similarity_equals_argmin_distance() {
        let mut rng = StdRng::seed_from_u64(31);
        for _ in 0..200 {
            let dim = 6;
            let mut store = ParamStore::new();
            let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
                .map(|_| (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let bank = bank_with(&mut store, dim, rows.clone());
            let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (best, _) = match_prototype(&store, &bank, &f, 1e-4);
            let dist = |r: &Vec<f64>| -> f64 {
                r.iter().zip(&f).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            let arg_min = (0..N_PROTOTYPES)
                .min_by(|&a, &b| dist(&rows[a]).partial_cmp(&dist(&rows[b])).unwrap())
                .unwrap();
            assert_eq!(best, arg_min);
        }
    }

    #[test]
    fn scaling_distances_preserves_argmax() {
        let mut rng = StdRng::seed_from_u64(37);
        let dim = 4;
        for _ in 0..50 {
            let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let f: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let mut store_a = ParamStore::new();
            let bank_a = bank_with(&mut store_a, dim, rows.clone());
            let (best_a, _) = match_prototype(&store_a, &bank_a, &f, 1e-4);

            // scale everything away from f by 3x: distances scale by 9
            let scaled: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| r.iter().zip(&f).map(|(a, b)| b + 3.0 * (a - b)).collect())
                .collect();
            let mut store_b = ParamStore::new();
            let bank_b = bank_with(&mut store_b, dim, scaled);
            let (best_b, _) = match_prototype(&store_b, &bank_b, &f, 1e-4);
            assert_eq!(best_a, best_b);
        }
    }

    #[test]
    fn cluster_loss_zero_at_exact_matches_and_hand_value() {
        let dim = 2;
        let mut store = ParamStore::new();
        let mut rows: Vec<Vec<f64>> = (0..N_PROTOTYPES).map(|i| vec![i as f64 * 10.0, 50.0]).collect();
        rows[0] = vec![1.0, 1.0]; // spring slot
        let bank = bank_with(&mut store, dim, rows);

        let mut tape = Tape::new();
        let f_exact = tape.constant(1, 2, vec![1.0, 1.0]);
        let l = loss_cluster(&mut tape, &store, &bank, &[(f_exact, 0)]);
        assert_eq!(tape.value(l), 0.0);

        // distance 2 (squared 4) from the nearest own-season prototype
        let mut tape = Tape::new();
        let f_off = tape.constant(1, 2, vec![1.0, 3.0]);
        let l = loss_cluster(&mut tape, &store, &bank, &[(f_off, 0)]);
        assert!((tape.value(l) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cluster_loss_batch_order_invariant() {
        let mut rng = StdRng::seed_from_u64(5);
        let dim = 3;
        let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut store = ParamStore::new();
        let bank = bank_with(&mut store, dim, rows);
        let feats: Vec<(Vec<f64>, usize)> = (0..6)
            .map(|k| ((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), k % 4))
            .collect();

        let eval = |order: &[usize]| -> f64 {
            let mut tape = Tape::new();
            let refs: Vec<(BufId, usize)> = order
                .iter()
                .map(|&i| (tape.constant(1, dim, feats[i].0.clone()), feats[i].1))
                .collect();
            let l = loss_cluster(&mut tape, &store, &bank, &refs);
            tape.value(l)
        };
        let a = eval(&[0, 1, 2, 3, 4, 5]);
        let b = eval(&[5, 3, 1, 0, 4, 2]);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn separation_loss_nonpositive_and_worst_at_coincidence() {
        let dim = 2;
        let mut store = ParamStore::new();
        let mut rows: Vec<Vec<f64>> = (0..N_PROTOTYPES).map(|_| vec![100.0, 100.0]).collect();
        rows[6] = vec![0.0, 0.0]; // summer prototype at origin
        let bank = bank_with(&mut store, dim, rows);

        // spring feature coinciding with the summer prototype: min distance 0
        let mut tape = Tape::new();
        let f = tape.constant(1, 2, vec![0.0, 0.0]);
        let l = loss_separation(&mut tape, &store, &bank, &[(f, 0)]);
        assert_eq!(tape.value(l), 0.0);

        // farther other-season prototypes decrease the loss
        let mut prev = 0.0;
        for k in 1..10 {
            let mut store = ParamStore::new();
            let mut rows: Vec<Vec<f64>> =
                (0..N_PROTOTYPES).map(|_| vec![100.0, 100.0]).collect();
            rows[6] = vec![k as f64, 0.0];
            let bank = bank_with(&mut store, dim, rows);
            let mut tape = Tape::new();
            let f = tape.constant(1, 2, vec![0.0, 0.0]);
            let l = loss_separation(&mut tape, &store, &bank, &[(f, 0)]);
            let v = tape.value(l);
            assert!(v <= 0.0);
            assert!(v < prev, "pushing prototypes away must decrease the loss");
            prev = v;
        }
    }

    #[test]
    fn diversity_loss_hand_cases() {
        let xi = 0.3;
        let dim = 8;
        // orthogonal within-season prototypes: zero
        {
            let mut store = ParamStore::new();
            let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
                .map(|i| {
                    let mut r = vec![0.0; dim];
                    r[i % PROTOTYPES_PER_SEASON] = 1.0 + i as f64; // distinct, orthogonal in-season
                    r
                })
                .collect();
            let bank = bank_with(&mut store, dim, rows);
            let mut tape = Tape::new();
            let l = loss_diversity(&mut tape, &store, &bank, xi);
            assert_eq!(tape.value(l), 0.0);
        }
        // duplicated pair inside one season: both orderings count, 2 * (1 - xi)
        {
            let mut store = ParamStore::new();
            let mut rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
                .map(|i| {
                    let mut r = vec![0.0; dim];
                    r[i % PROTOTYPES_PER_SEASON] = 1.0;
                    r
                })
                .collect();
            rows[1] = rows[0].clone();
            let bank = bank_with(&mut store, dim, rows);
            let mut tape = Tape::new();
            let l = loss_diversity(&mut tape, &store, &bank, xi);
            assert!((tape.value(l) - 2.0 * (1.0 - xi)).abs() < 1e-12);
        }
        // identical vectors in different seasons contribute nothing
        {
            let mut store = ParamStore::new();
            let mut rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
                .map(|i| {
                    let mut r = vec![0.0; dim];
                    r[i % PROTOTYPES_PER_SEASON] = 1.0;
                    r
                })
                .collect();
            rows[6] = rows[0].clone(); // spring slot 0 == summer slot 6
            let bank = bank_with(&mut store, dim, rows);
            let mut tape = Tape::new();
            let l = loss_diversity(&mut tape, &store, &bank, xi);
            assert_eq!(tape.value(l), 0.0);
        }
    }

    #[test]
    fn total_loss_recomposition_and_weight_zeroing() {
        let mut rng = StdRng::seed_from_u64(8);
        let dim = 6;
        let mut store = ParamStore::new();
        let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = bank_with(&mut store, dim, rows);
        let classifier = SeasonClassifier::alloc(&mut store, &mut rng).unwrap();
        let feats: Vec<(Vec<f64>, usize)> = (0..5)
            .map(|k| ((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(), k % 4))
            .collect();
        let hyper = PrototypeHyper::default();

        let build_feats = |tape: &mut Tape| -> Vec<(BufId, usize)> {
            feats
                .iter()
                .map(|(f, s)| (tape.constant(1, dim, f.clone()), *s))
                .collect()
        };

        let mut tape = Tape::new();
        let refs = build_feats(&mut tape);
        let total = loss_prototype_total(&mut tape, &store, &bank, &classifier, &refs, &hyper)
            .unwrap();
        let total_v = tape.value(total);

        // recomposition from independently computed parts
        let mut tape = Tape::new();
        let refs = build_feats(&mut tape);
        let mut ce_sum = 0.0;
        for &(f, s) in &refs {
            let logits =
                season_logits_on_tape(&mut tape, &store, &bank, &classifier, f, hyper.eps)
                    .unwrap();
            let ce = tpa_nn::cross_entropy_logits(&mut tape, logits, s);
            ce_sum += tape.value(ce);
        }
        let clst = loss_cluster(&mut tape, &store, &bank, &refs);
        let sep = loss_separation(&mut tape, &store, &bank, &refs);
        let div = loss_diversity(&mut tape, &store, &bank, hyper.xi);
        let expect = ce_sum / refs.len() as f64
            + hyper.lambda1 * tape.value(clst)
            + hyper.lambda2 * tape.value(sep)
            + hyper.lambda3 * tape.value(div);
        assert!((total_v - expect).abs() < 1e-12, "{total_v} vs {expect}");

        // zeroed weights leave only the cross-entropy
        let zeroed = PrototypeHyper { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0, ..hyper };
        let mut tape = Tape::new();
        let refs = build_feats(&mut tape);
        let ce_only =
            loss_prototype_total(&mut tape, &store, &bank, &classifier, &refs, &zeroed).unwrap();
        assert!((tape.value(ce_only) - ce_sum / refs.len() as f64).abs() < 1e-12);
    }

    #[test]
    fn zero_classifier_gives_uniform_probabilities() {
        let mut rng = StdRng::seed_from_u64(9);
        let dim = 4;
        let mut store = ParamStore::new();
        let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = bank_with(&mut store, dim, rows);
        let classifier = SeasonClassifier::alloc(&mut store, &mut rng).unwrap();
        store.get_mut(classifier.linear.w).values.iter_mut().for_each(|v| *v = 0.0);
        store.get_mut(classifier.linear.b).values.iter_mut().for_each(|v| *v = 0.0);

        let mut tape = Tape::new();
        let f = tape.constant(1, dim, vec![0.3, -0.2, 0.8, 0.1]);
        let logits =
            season_logits_on_tape(&mut tape, &store, &bank, &classifier, f, 1e-4).unwrap();
        let probs = tpa_nn::softmax_rows(&mut tape, logits);
        for &p in tape.data(probs) {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn ce_gradient_reaches_bank_when_sims_have_spread() {
        let mut rng = StdRng::seed_from_u64(10);
        let dim = 4;
        let mut store = ParamStore::new();
        let rows: Vec<Vec<f64>> = (0..N_PROTOTYPES)
            .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let bank = bank_with(&mut store, dim, rows);
        let classifier = SeasonClassifier::alloc(&mut store, &mut rng).unwrap();

        let mut tape = Tape::new();
        let f = tape.constant(1, dim, vec![0.4, 0.1, -0.3, 0.2]);
        let logits =
            season_logits_on_tape(&mut tape, &store, &bank, &classifier, f, 1e-4).unwrap();
        let ce = tpa_nn::cross_entropy_logits(&mut tape, logits, 2);
        tape.backward(ce);
        store.zero_grads();
        tape.grads_into_store(&mut store);
        let bank_grad_norm: f64 = store.get(bank.param).grad.iter().map(|g| g * g).sum();
        assert!(bank_grad_norm > 0.0, "bank must receive CE gradient");
    }
}
