//! Prototype bank initialization: representative-day LSTM encoding or
//! seeded random fill.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tpa_env::{calendar::days_of_month, ProfileSet, Season, SeasonCalendar};
use tpa_nn::{lstm_final_hidden, LstmParams, ParamStore, Tape};

use crate::error::{AgentError, Result};
use crate::prototype::{N_PROTOTYPES, PROTOTYPES_PER_SEASON};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitMode {
    /// Encode 24 representative days (6 evenly spaced per season) of
    /// `[total load p, total load q, total pv p]` through a dedicated LSTM.
    Data,
    /// I.i.d. uniform fill, same scale rule as network weights.
    Random,
}

/// Days of `season` drawn evenly across its three months.
fn representative_days(season: Season) -> Vec<usize> {
    let mut days: Vec<usize> = (1..=12)
        .filter(|&m| SeasonCalendar::season_of_month(m) == season)
        .flat_map(|m| {
            let (start, end) = days_of_month(m);
            start..end
        })
        .collect();
    days.sort_unstable();
    (0..PROTOTYPES_PER_SEASON)
        .map(|j| days[(2 * j + 1) * days.len() / (2 * PROTOTYPES_PER_SEASON)])
        .collect()
}

/// Builds the 24 prototype vectors (row-major `24 x dim`). Deterministic
/// under `seed`; the caller registers them as the `prototypes.bank` tensor.
pub fn init_prototypes(
    profiles: &ProfileSet,
    mode: InitMode,
    dim: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    match mode {
        InitMode::Random => {
            let mut rng = StdRng::seed_from_u64(seed);
            let bound = 1.0 / (dim as f64).sqrt();
            Ok((0..N_PROTOTYPES * dim)
                .map(|_| rng.gen_range(-bound..=bound))
                .collect())
        }
        InitMode::Data => {
            if profiles.horizon_days < tpa_env::DAYS_PER_YEAR {
                return Err(AgentError::InsufficientDays {
                    needed: tpa_env::DAYS_PER_YEAR,
                    available: profiles.horizon_days,
                });
            }
            let mut rng = StdRng::seed_from_u64(seed);
            // transient encoder: LSTM over the day sequence + projection
            let hidden = 32usize;
            let mut store = ParamStore::new();
            let lstm = LstmParams::alloc(&mut store, "init.lstm", 3, hidden, &mut rng)?;
            let proj = store.alloc_weight("init.proj", hidden, dim, &mut rng)?;

            // channel scales keep the untrained LSTM in its linear regime
            let mut day_data: Vec<Vec<[f64; 3]>> = Vec::with_capacity(N_PROTOTYPES);
            for k in 0..4 {
                for &day in &representative_days(Season::from_index(k)) {
                    day_data.push(profiles.day_summary(day));
                }
            }
            let mut scale = [1e-9f64; 3];
            for day in &day_data {
                for row in day {
                    for c in 0..3 {
                        scale[c] = scale[c].max(row[c].abs());
                    }
                }
            }

            let mut bank = Vec::with_capacity(N_PROTOTYPES * dim);
            for day in &day_data {
                let seq: Vec<f64> = day
                    .iter()
                    .flat_map(|row| [row[0] / scale[0], row[1] / scale[1], row[2] / scale[2]])
                    .collect();
                let mut tape = Tape::eval();
                let seq_buf = tape.constant(day.len(), 3, seq);
                let h = lstm_final_hidden(&mut tape, &store, seq_buf, lstm, hidden, false)?;
                let proj_buf = tape.param(&store, proj);
                let p = tpa_nn::matmul(&mut tape, h, proj_buf);
                bank.extend_from_slice(tape.data(p));
            }
            Ok(bank)
        }
    }
}
