//! Synthetic seasonal/diurnal load and PV profiles plus CSV exchange and
//! episode slicing.

use std::fmt::Write as _;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};

use tpa_grid::FeederTopology;

use crate::calendar::{
    days_of_month, parse_timestamp, timestamp_of, Cursor, Season, DAYS_PER_YEAR, STEPS_PER_DAY,
};
use crate::error::{EnvError, Result};

/// Knobs of the synthetic year. Defaults are calibrated so the default
/// feeder shows nighttime undervoltage in winter and noon overvoltage in
/// summer while staying solvable.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    /// Load power factor (lagging); q = p * tan(acos(pf)).
    pub power_factor: f64,
    /// Multiplicative PV noise amplitude (the cloud factor is
    /// `clamp(1 + noise * ar1, 0, 1)`).
    pub noise: f64,
    /// Lognormal sigma of the load noise.
    pub load_noise_sigma: f64,
    /// Peak active load per load bus, p.u.
    pub load_peak: f64,
    /// Seasonal PV availability, indexed by season (spring, summer, fall,
    /// winter) as a fraction of `s_max`.
    pub pv_season: [f64; 4],
    /// Seasonal load factor, same indexing.
    pub load_season: [f64; 4],
    /// Horizon in days (episode splitting expects a full year).
    pub horizon_days: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            power_factor: 0.95,
            noise: 0.15,
            load_noise_sigma: 0.10,
            load_peak: 0.066,
            pv_season: [0.66, 0.94, 0.56, 0.34],
            load_season: [0.98, 0.86, 1.10, 1.32],
            horizon_days: DAYS_PER_YEAR,
        }
    }
}

/// Immutable time-series bundle: per load bus `(p, q)` and per PV bus the
/// available active power, all p.u. at 3-minute resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub horizon_days: usize,
    pub load_bus_ids: Vec<usize>,
    pub pv_bus_ids: Vec<usize>,
    /// `[load][t]`, demand positive.
    pub load_p: Vec<Vec<f64>>,
    pub load_q: Vec<Vec<f64>>,
    /// `[pv][t]`, available PV active power.
    pub pv_p_max: Vec<Vec<f64>>,
    pub seed: u64,
    pub params: GeneratorParams,
}

impl ProfileSet {
    pub fn n_steps(&self) -> usize {
        self.horizon_days * STEPS_PER_DAY
    }

    pub fn load_at(&self, load_idx: usize, cursor: Cursor) -> (f64, f64) {
        let t = cursor.global_step();
        (self.load_p[load_idx][t], self.load_q[load_idx][t])
    }

    pub fn pv_at(&self, pv_idx: usize, cursor: Cursor) -> f64 {
        self.pv_p_max[pv_idx][cursor.global_step()]
    }

    /// Whole-day coarse summary `[total load p, total load q, total pv p]`
    /// per step; the prototype initializer consumes these.
    pub fn day_summary(&self, day: usize) -> Vec<[f64; 3]> {
        let start = day * STEPS_PER_DAY;
        (0..STEPS_PER_DAY)
            .map(|k| {
                let t = start + k;
                let p: f64 = self.load_p.iter().map(|s| s[t]).sum();
                let q: f64 = self.load_q.iter().map(|s| s[t]).sum();
                let pv: f64 = self.pv_p_max.iter().map(|s| s[t]).sum();
                [p, q, pv]
            })
            .collect()
    }

    /// Mean daily PV energy (p.u.-steps) of the days in `season`.
    pub fn mean_daily_pv_energy(&self, season: Season) -> f64 {
        let mut total = 0.0;
        let mut days = 0usize;
        for day in 0..self.horizon_days.min(DAYS_PER_YEAR) {
            if Cursor::new(day, 0).season() != season {
                continue;
            }
            days += 1;
            let start = day * STEPS_PER_DAY;
            for t in start..start + STEPS_PER_DAY {
                total += self.pv_p_max.iter().map(|s| s[t]).sum::<f64>();
            }
        }
        if days == 0 {
            0.0
        } else {
            total / days as f64
        }
    }
}

fn split_seed(master: u64, stream: u64) -> u64 {
    // splitmix64 finalizer; keeps per-bus streams independent of ordering
    let mut z = master ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Daylight hours vary sinusoidally through the year, +-2 h around the
/// 12-hour equinox day; solar noon is fixed at 12:00.
fn daylight_hours(day: usize) -> f64 {
    let equinox = 79.0; // ~March 21st
    12.0 + 2.0 * (2.0 * std::f64::consts::PI * (day as f64 - equinox) / 365.0).sin()
}

fn sun_elevation_factor(day: usize, hour: f64) -> f64 {
    let daylight = daylight_hours(day);
    let sunrise = 12.0 - daylight / 2.0;
    (std::f64::consts::PI * (hour - sunrise) / daylight).sin().max(0.0)
}

/// Double-peak diurnal demand shape, dimensionless in (0, 1].
fn load_shape(hour: f64) -> f64 {
    let morning = 0.30 * (-((hour - 8.5) / 2.0_f64).powi(2)).exp();
    let evening = 0.52 * (-((hour - 19.5) / 2.3_f64).powi(2)).exp();
    0.40 + morning + evening
}

/// Deterministic synthetic year for `topology` under `seed`.
pub fn generate_synthetic_year(
    topology: &FeederTopology,
    params: &GeneratorParams,
    seed: u64,
) -> Result<ProfileSet> {
    if !(params.power_factor > 0.0 && params.power_factor <= 1.0) {
        return Err(EnvError::BadParams(format!(
            "power factor must be in (0, 1], got {}",
            params.power_factor
        )));
    }
    if params.noise < 0.0 || params.load_noise_sigma < 0.0 {
        return Err(EnvError::BadParams("noise amplitudes must be nonnegative".into()));
    }
    if params.horizon_days == 0 || params.horizon_days > DAYS_PER_YEAR {
        return Err(EnvError::BadParams(format!(
            "horizon must be 1..={DAYS_PER_YEAR} days, got {}",
            params.horizon_days
        )));
    }
    tpa_grid::validate_radial(topology)?;

    let n_steps = params.horizon_days * STEPS_PER_DAY;
    let tan_phi = params.power_factor.acos().tan();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let ar1_rho = 0.9_f64;
    let innov_scale = (1.0 - ar1_rho * ar1_rho).sqrt();

    let load_ids: Vec<usize> = topology
        .load_buses()
        .iter()
        .map(|&i| topology.buses[i].id)
        .collect();
    let pv: Vec<(usize, f64)> = topology
        .pv_buses()
        .iter()
        .map(|&i| (topology.buses[i].id, topology.buses[i].s_max.unwrap()))
        .collect();

    let mut load_p = Vec::with_capacity(load_ids.len());
    let mut load_q = Vec::with_capacity(load_ids.len());
    for (k, &bus) in load_ids.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(split_seed(seed, 0x10_00 + bus as u64 + k as u64));
        let mut ar = 0.0_f64;
        let mut p_series = Vec::with_capacity(n_steps);
        let mut q_series = Vec::with_capacity(n_steps);
        for t in 0..n_steps {
            let cursor = Cursor::from_global_step(t);
            ar = ar1_rho * ar + innov_scale * normal.sample(&mut rng);
            let season = cursor.season().index();
            let noise = (params.load_noise_sigma * ar
                - 0.5 * params.load_noise_sigma * params.load_noise_sigma)
                .exp();
            let p = params.load_peak
                * params.load_season[season]
                * load_shape(cursor.hour())
                * noise;
            p_series.push(p);
            q_series.push(p * tan_phi);
        }
        load_p.push(p_series);
        load_q.push(q_series);
    }

    let mut pv_p_max = Vec::with_capacity(pv.len());
    for (k, &(bus, s_max)) in pv.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(split_seed(seed, 0x20_00 + bus as u64 + k as u64));
        // cloud fronts have momentum: an AR(1) slope integrated into the
        // level gives coherent ramps over tens of minutes, so the recent
        // history genuinely predicts the next step
        let slope_rho = 0.97_f64;
        let slope_innov = (1.0 - slope_rho * slope_rho).sqrt();
        let mut slope = 0.0_f64;
        let mut level = 0.0_f64;
        let mut series = Vec::with_capacity(n_steps);
        for t in 0..n_steps {
            let cursor = Cursor::from_global_step(t);
            slope = slope_rho * slope + slope_innov * normal.sample(&mut rng);
            level = (0.995 * level + 0.12 * slope).clamp(-2.5, 2.5);
            let cloud = (1.0 + params.noise * level).clamp(0.0, 1.0);
            let season = cursor.season().index();
            let p = s_max
                * params.pv_season[season]
                * sun_elevation_factor(cursor.day, cursor.hour())
                * cloud;
            series.push(p.clamp(0.0, s_max));
        }
        pv_p_max.push(series);
    }

    Ok(ProfileSet {
        horizon_days: params.horizon_days,
        load_bus_ids: load_ids,
        pv_bus_ids: pv.iter().map(|&(id, _)| id).collect(),
        load_p,
        load_q,
        pv_p_max,
        seed,
        params: params.clone(),
    })
}

// ---- CSV exchange ----

/// Writes the documented schema: header
/// `timestamp,<bus>:pl,<bus>:ql,...,<pv_bus>:pv`, ISO-8601 timestamps at
/// 3-minute spacing, shortest-round-trip float formatting.
pub fn save_profiles_csv(profiles: &ProfileSet, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("timestamp");
    for id in &profiles.load_bus_ids {
        let _ = write!(out, ",{id}:pl,{id}:ql");
    }
    for id in &profiles.pv_bus_ids {
        let _ = write!(out, ",{id}:pv");
    }
    out.push('\n');
    for t in 0..profiles.n_steps() {
        out.push_str(&timestamp_of(t));
        for k in 0..profiles.load_bus_ids.len() {
            let _ = write!(out, ",{},{}", profiles.load_p[k][t], profiles.load_q[k][t]);
        }
        for k in 0..profiles.pv_bus_ids.len() {
            let _ = write!(out, ",{}", profiles.pv_p_max[k][t]);
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Parses and validates a profile CSV against `topology`: bus coverage,
/// 3-minute spacing, finite nonnegative PV, full-day row count.
pub fn load_profiles_csv(path: &Path, topology: &FeederTopology) -> Result<ProfileSet> {
    let text = std::fs::read_to_string(path)?;
    let pstr = path.display().to_string();
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| EnvError::ParseCsv {
        path: pstr.clone(),
        line: 1,
        detail: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"timestamp") {
        return Err(EnvError::ParseCsv {
            path: pstr,
            line: 1,
            detail: "first column must be `timestamp`".into(),
        });
    }

    let mut load_ids = Vec::new();
    let mut pv_ids = Vec::new();
    let mut i = 1;
    while i < cols.len() {
        let col = cols[i];
        if let Some(bus) = col.strip_suffix(":pl") {
            let bus: usize = bus.parse().map_err(|_| EnvError::ParseCsv {
                path: pstr.clone(),
                line: 1,
                detail: format!("bad column name {col}"),
            })?;
            let ql = format!("{bus}:ql");
            if cols.get(i + 1) != Some(&ql.as_str()) {
                return Err(EnvError::ParseCsv {
                    path: pstr,
                    line: 1,
                    detail: format!("column {col} must be followed by {ql}"),
                });
            }
            load_ids.push(bus);
            i += 2;
        } else if let Some(bus) = col.strip_suffix(":pv") {
            pv_ids.push(bus.parse().map_err(|_| EnvError::ParseCsv {
                path: pstr.clone(),
                line: 1,
                detail: format!("bad column name {col}"),
            })?);
            i += 1;
        } else {
            return Err(EnvError::ParseCsv {
                path: pstr,
                line: 1,
                detail: format!("unrecognized column {col}"),
            });
        }
    }

    let expect_loads: Vec<usize> = topology
        .load_buses()
        .iter()
        .map(|&i| topology.buses[i].id)
        .collect();
    let expect_pv: Vec<usize> = topology
        .pv_buses()
        .iter()
        .map(|&i| topology.buses[i].id)
        .collect();
    if load_ids != expect_loads || pv_ids != expect_pv {
        return Err(EnvError::ParseCsv {
            path: pstr,
            line: 1,
            detail: format!(
                "columns cover loads {load_ids:?} / pv {pv_ids:?} but the topology needs loads {expect_loads:?} / pv {expect_pv:?}"
            ),
        });
    }

    let width = 1 + 2 * load_ids.len() + pv_ids.len();
    let mut load_p = vec![Vec::new(); load_ids.len()];
    let mut load_q = vec![Vec::new(); load_ids.len()];
    let mut pv_p_max = vec![Vec::new(); pv_ids.len()];
    let mut rows = 0usize;
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(EnvError::ParseCsv {
                path: pstr,
                line: lineno + 1,
                detail: format!("expected {width} fields, found {}", fields.len()),
            });
        }
        let g = parse_timestamp(fields[0]).ok_or_else(|| EnvError::ParseCsv {
            path: pstr.clone(),
            line: lineno + 1,
            detail: format!("bad timestamp {}", fields[0]),
        })?;
        if g != rows {
            return Err(EnvError::ParseCsv {
                path: pstr,
                line: lineno + 1,
                detail: format!("timestamp {} breaks 3-minute spacing", fields[0]),
            });
        }
        let parse = |s: &str, what: &str, lineno: usize| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| EnvError::ParseCsv {
                path: pstr.clone(),
                line: lineno + 1,
                detail: format!("bad {what} value {s}"),
            })?;
            if !v.is_finite() {
                return Err(EnvError::ParseCsv {
                    path: pstr.clone(),
                    line: lineno + 1,
                    detail: format!("non-finite {what} value"),
                });
            }
            Ok(v)
        };
        for k in 0..load_ids.len() {
            load_p[k].push(parse(fields[1 + 2 * k], "load p", lineno)?);
            load_q[k].push(parse(fields[2 + 2 * k], "load q", lineno)?);
        }
        for k in 0..pv_ids.len() {
            let v = parse(fields[1 + 2 * load_ids.len() + k], "pv", lineno)?;
            if v < 0.0 {
                return Err(EnvError::ParseCsv {
                    path: pstr,
                    line: lineno + 1,
                    detail: format!("negative pv power {v}"),
                });
            }
            pv_p_max[k].push(v);
        }
        rows += 1;
    }
    if rows == 0 || rows % STEPS_PER_DAY != 0 {
        let expected = (rows / STEPS_PER_DAY + 1) * STEPS_PER_DAY;
        return Err(EnvError::Length { expected, found: rows });
    }

    Ok(ProfileSet {
        horizon_days: rows / STEPS_PER_DAY,
        load_bus_ids: load_ids,
        pv_bus_ids: pv_ids,
        load_p,
        load_q,
        pv_p_max,
        seed: 0,
        params: GeneratorParams {
            horizon_days: rows / STEPS_PER_DAY,
            ..GeneratorParams::default()
        },
    })
}

// ---- episode slicing ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Disjoint day partition of a full synthetic year: per month, 1 validation
/// day and 10 test days are drawn by seed, the rest train. Train cursors
/// come at half-day alignment; validation and test cursors at day starts.
pub fn slice_episodes(profiles: &ProfileSet, split: Split, seed: u64) -> Result<Vec<Cursor>> {
    if profiles.horizon_days != DAYS_PER_YEAR {
        return Err(EnvError::Split {
            horizon: profiles.horizon_days,
            detail: format!("seasonal splits need the full {DAYS_PER_YEAR}-day year"),
        });
    }
    let mut val_days = Vec::new();
    let mut test_days = Vec::new();
    let mut train_days = Vec::new();
    for month in 1..=12 {
        let (start, end) = days_of_month(month);
        let mut days: Vec<usize> = (start..end).collect();
        let mut rng = StdRng::seed_from_u64(split_seed(seed, 0x5111_CE00 + month as u64));
        // Fisher-Yates keeps the draw order independent of Vec internals
        for i in (1..days.len()).rev() {
            let j = rng.gen_range(0..=i);
            days.swap(i, j);
        }
        val_days.push(days[0]);
        test_days.extend_from_slice(&days[1..11]);
        train_days.extend_from_slice(&days[11..]);
    }
    let mut cursors = match split {
        Split::Val => val_days.into_iter().map(|d| Cursor::new(d, 0)).collect::<Vec<_>>(),
        Split::Test => test_days.into_iter().map(|d| Cursor::new(d, 0)).collect(),
        Split::Train => {
            let mut v = Vec::with_capacity(train_days.len() * 2);
            for d in train_days {
                v.push(Cursor::new(d, 0));
                v.push(Cursor::new(d, STEPS_PER_DAY / 2));
            }
            v
        }
    };
    cursors.sort();
    Ok(cursors)
}

/// The desk-scale default feeder: 12 buses, 8 loads, 3 PV agents in 3 zones.
///
/// A trunk (0-1-4-8) feeds three laterals; impedances are sized so the far
/// buses swing outside the 0.95..1.05 band under the default profiles.
pub fn default_feeder() -> FeederTopology {
    use tpa_grid::{BranchSpec, BusSpec};
    let bus = |id: usize, zone: usize, load: bool, pv: bool, s_max: Option<f64>| BusSpec {
        id,
        zone: Some(zone),
        load,
        pv,
        s_max,
    };
    let br = |from: usize, to: usize, r: f64, x: f64| BranchSpec { from, to, r, x };
    let s_max = Some(0.31);
    FeederTopology {
        base_mva: 1.0,
        slack_bus: 0,
        buses: vec![
            BusSpec { id: 0, zone: None, load: false, pv: false, s_max: None },
            bus(1, 0, false, false, None),
            bus(2, 0, true, false, None),
            bus(3, 0, true, true, s_max),
            bus(4, 1, false, false, None),
            bus(5, 1, true, false, None),
            bus(6, 1, true, false, None),
            bus(7, 1, true, true, s_max),
            bus(8, 2, false, false, None),
            bus(9, 2, true, false, None),
            bus(10, 2, true, false, None),
            bus(11, 2, true, true, s_max),
        ],
        branches: vec![
            br(0, 1, 0.04, 0.08),
            br(1, 2, 0.05, 0.10),
            br(2, 3, 0.06, 0.12),
            br(1, 4, 0.04, 0.08),
            br(4, 5, 0.05, 0.10),
            br(5, 6, 0.05, 0.10),
            br(6, 7, 0.06, 0.12),
            br(4, 8, 0.04, 0.08),
            br(8, 9, 0.05, 0.10),
            br(9, 10, 0.05, 0.10),
            br(10, 11, 0.06, 0.12),
        ],
    }
}

/// A second, smaller feeder (8 buses, 5 loads, 2 PV agents in 2 zones) for
/// cross-network transfer studies.
pub fn transfer_feeder() -> FeederTopology {
    use tpa_grid::{BranchSpec, BusSpec};
    let bus = |id: usize, zone: usize, load: bool, pv: bool, s_max: Option<f64>| BusSpec {
        id,
        zone: Some(zone),
        load,
        pv,
        s_max,
    };
    let br = |from: usize, to: usize, r: f64, x: f64| BranchSpec { from, to, r, x };
    let s_max = Some(0.31);
    FeederTopology {
        base_mva: 1.0,
        slack_bus: 0,
        buses: vec![
            BusSpec { id: 0, zone: None, load: false, pv: false, s_max: None },
            bus(1, 0, false, false, None),
            bus(2, 0, true, false, None),
            bus(3, 0, true, true, s_max),
            bus(4, 1, true, false, None),
            bus(5, 1, true, false, None),
            bus(6, 1, false, false, None),
            bus(7, 1, true, true, s_max),
        ],
        branches: vec![
            br(0, 1, 0.05, 0.10),
            br(1, 2, 0.06, 0.12),
            br(2, 3, 0.07, 0.14),
            br(1, 4, 0.05, 0.10),
            br(4, 5, 0.06, 0.12),
            br(5, 6, 0.06, 0.12),
            br(6, 7, 0.07, 0.14),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::SEASONS;

    #[test]
    fn pv_is_dark_at_midnight() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 30;
        let p = generate_synthetic_year(&topo, &params, 7).unwrap();
        for day in 0..30 {
            for pv in 0..p.pv_bus_ids.len() {
                assert_eq!(p.pv_at(pv, Cursor::new(day, 0)), 0.0, "day {day}");
            }
        }
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 10;
        let a = generate_synthetic_year(&topo, &params, 42).unwrap();
        let b = generate_synthetic_year(&topo, &params, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_year(&topo, &params, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn seasonal_pv_energy_ordering() {
        let topo = default_feeder();
        let p = generate_synthetic_year(&topo, &GeneratorParams::default(), 0).unwrap();
        let e: Vec<f64> = SEASONS.iter().map(|&s| p.mean_daily_pv_energy(s)).collect();
        let (spring, summer, fall, winter) = (e[0], e[1], e[2], e[3]);
        assert!(summer / winter >= 1.5, "summer/winter = {}", summer / winter);
        assert!(summer > spring && summer > fall, "summer not the peak: {e:?}");
        assert!(spring > winter && fall > winter, "winter not the trough: {e:?}");
        assert!(
            (spring / fall - 1.0).abs() < 0.35,
            "spring and fall should be comparable: {e:?}"
        );
    }

    #[test]
    fn generated_values_in_bounds() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 60;
        let p = generate_synthetic_year(&topo, &params, 3).unwrap();
        let s_max = 0.30;
        for series in &p.pv_p_max {
            assert!(series.iter().all(|&v| (0.0..=s_max).contains(&v)));
        }
        for series in p.load_p.iter().chain(&p.load_q) {
            assert!(series.iter().all(|&v| v.is_finite() && v >= 0.0));
        }
    }

    #[test]
    fn bad_params_rejected() {
        let topo = default_feeder();
        let mut p = GeneratorParams::default();
        p.power_factor = 0.0;
        assert!(generate_synthetic_year(&topo, &p, 0).is_err());
        let mut p = GeneratorParams::default();
        p.noise = -0.1;
        assert!(generate_synthetic_year(&topo, &p, 0).is_err());
    }

    #[test]
    fn csv_round_trip_exact() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 3;
        let p = generate_synthetic_year(&topo, &params, 11).unwrap();
        let dir = std::env::temp_dir().join("tpa_env_profiles_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("profiles.csv");
        save_profiles_csv(&p, &path).unwrap();
        let loaded = load_profiles_csv(&path, &topo).unwrap();
        assert_eq!(loaded.load_p, p.load_p);
        assert_eq!(loaded.load_q, p.load_q);
        assert_eq!(loaded.pv_p_max, p.pv_p_max);
        assert_eq!(loaded.load_bus_ids, p.load_bus_ids);
        assert_eq!(loaded.pv_bus_ids, p.pv_bus_ids);
    }

    #[test]
    fn csv_negative_pv_rejected() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 1;
        let p = generate_synthetic_year(&topo, &params, 11).unwrap();
        let dir = std::env::temp_dir().join("tpa_env_profiles_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("neg.csv");
        save_profiles_csv(&p, &path).unwrap();
        let mut text = std::fs::read_to_string(&path).unwrap();
        // last column of the second data row is a PV value
        let lines: Vec<&str> = text.lines().collect();
        let mut row2: Vec<String> = lines[2].split(',').map(String::from).collect();
        let last = row2.len() - 1;
        row2[last] = "-0.5".into();
        let patched = row2.join(",");
        text = text.replace(lines[2], &patched);
        std::fs::write(&path, text).unwrap();
        match load_profiles_csv(&path, &topo) {
            Err(EnvError::ParseCsv { line: 3, .. }) => {}
            other => panic!("expected row-3 parse error, got {other:?}"),
        }
    }

    #[test]
    fn csv_truncated_reports_length() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 1;
        let p = generate_synthetic_year(&topo, &params, 11).unwrap();
        let dir = std::env::temp_dir().join("tpa_env_profiles_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.csv");
        save_profiles_csv(&p, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let keep: Vec<&str> = text.lines().take(101).collect();
        std::fs::write(&path, keep.join("\n")).unwrap();
        match load_profiles_csv(&path, &topo) {
            Err(EnvError::Length { expected: 480, found: 100 }) => {}
            other => panic!("expected length error, got {other:?}"),
        }
    }

    #[test]
    fn splits_are_disjoint_and_sized() {
        let topo = default_feeder();
        let p = generate_synthetic_year(&topo, &GeneratorParams::default(), 1).unwrap();
        let val = slice_episodes(&p, Split::Val, 5).unwrap();
        let test = slice_episodes(&p, Split::Test, 5).unwrap();
        let train = slice_episodes(&p, Split::Train, 5).unwrap();
        assert_eq!(val.len(), 12);
        assert_eq!(test.len(), 120);

        let val_days: std::collections::BTreeSet<usize> = val.iter().map(|c| c.day).collect();
        let test_days: std::collections::BTreeSet<usize> = test.iter().map(|c| c.day).collect();
        let train_days: std::collections::BTreeSet<usize> = train.iter().map(|c| c.day).collect();
        assert!(val_days.is_disjoint(&test_days));
        assert!(val_days.is_disjoint(&train_days));
        assert!(test_days.is_disjoint(&train_days));
        assert_eq!(val_days.len() + test_days.len() + train_days.len(), 365);

        // determinism and half-day alignment
        assert_eq!(train, slice_episodes(&p, Split::Train, 5).unwrap());
        assert!(train.iter().all(|c| c.step == 0 || c.step == STEPS_PER_DAY / 2));
        assert_ne!(val, slice_episodes(&p, Split::Val, 6).unwrap());
    }

    #[test]
    fn short_horizon_cannot_split() {
        let topo = default_feeder();
        let mut params = GeneratorParams::default();
        params.horizon_days = 40;
        let p = generate_synthetic_year(&topo, &params, 1).unwrap();
        assert!(matches!(
            slice_episodes(&p, Split::Val, 0),
            Err(EnvError::Split { horizon: 40, .. })
        ));
    }
}
