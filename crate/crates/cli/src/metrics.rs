//! Controllable rate and reactive-generation loss.

use tpa_env::{Season, VoltageBand, SEASONS};

/// Fraction of steps where every controlled bus stays inside the band
/// (inclusive at both edges).
pub fn compute_cr(v_steps: &[Vec<f64>], controlled: &[usize], band: &VoltageBand) -> f64 {
    if v_steps.is_empty() {
        return 0.0;
    }
    let ok = v_steps
        .iter()
        .filter(|v| controlled.iter().all(|&i| band.contains(v[i])))
        .count();
    ok as f64 / v_steps.len() as f64
}

/// Mean over steps of the per-agent mean absolute reactive generation.
pub fn compute_ql(q_steps: &[Vec<f64>]) -> f64 {
    if q_steps.is_empty() {
        return 0.0;
    }
    q_steps
        .iter()
        .map(|qs| qs.iter().map(|q| q.abs()).sum::<f64>() / qs.len() as f64)
        .sum::<f64>()
        / q_steps.len() as f64
}

/// Per-episode metrics of one evaluation rollout.
#[derive(Debug, Clone)]
pub struct EpisodeMetrics {
    pub cr: f64,
    pub ql: f64,
    pub season: Season,
    pub steps: usize,
}

/// One row of the seasonal report.
#[derive(Debug, Clone)]
pub struct SeasonRow {
    pub label: String,
    pub cr_mean: f64,
    pub cr_std: Option<f64>,
    pub ql_mean: f64,
    pub ql_std: Option<f64>,
    pub episodes: usize,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, Some(var.sqrt()))
}

/// Groups episode metrics into the four seasons plus an average row.
/// Seasons with no episodes are omitted; episode counts partition exactly.
pub fn season_table(episodes: &[EpisodeMetrics]) -> Vec<SeasonRow> {
    let mut rows = Vec::with_capacity(5);
    for season in SEASONS {
        let crs: Vec<f64> = episodes
            .iter()
            .filter(|e| e.season == season)
            .map(|e| e.cr)
            .collect();
        if crs.is_empty() {
            continue;
        }
        let qls: Vec<f64> = episodes
            .iter()
            .filter(|e| e.season == season)
            .map(|e| e.ql)
            .collect();
        let (cr_mean, cr_std) = mean_std(&crs);
        let (ql_mean, ql_std) = mean_std(&qls);
        rows.push(SeasonRow {
            label: season.name().to_string(),
            cr_mean,
            cr_std,
            ql_mean,
            ql_std,
            episodes: crs.len(),
        });
    }
    let crs: Vec<f64> = episodes.iter().map(|e| e.cr).collect();
    let qls: Vec<f64> = episodes.iter().map(|e| e.ql).collect();
    let (cr_mean, cr_std) = mean_std(&crs);
    let (ql_mean, ql_std) = mean_std(&qls);
    rows.push(SeasonRow {
        label: "average".to_string(),
        cr_mean,
        cr_std,
        ql_mean,
        ql_std,
        episodes: episodes.len(),
    });
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band() -> VoltageBand {
        VoltageBand::default()
    }

    #[test]
    fn perfect_control_is_one() {
        let v = vec![vec![1.0, 1.0, 1.0]; 240];
        assert_eq!(compute_cr(&v, &[1, 2], &band()), 1.0);
    }

    #[test]
    fn definition_ratio() {
        let mut v = vec![vec![1.0, 1.0]; 240];
        for row in v.iter_mut().take(40) {
            row[1] = 1.2;
        }
        let cr = compute_cr(&v, &[0, 1], &band());
        assert!((cr - 200.0 / 240.0).abs() < 1e-12);
    }

    #[test]
    fn single_violation_costs_exactly_one_step() {
        let mut v = vec![vec![1.0, 1.0, 1.0]; 100];
        v[57][2] = 0.94;
        let cr = compute_cr(&v, &[0, 1, 2], &band());
        assert!((cr - 0.99).abs() < 1e-12);
    }

    #[test]
    fn band_edges_count_as_controlled() {
        let v = vec![vec![0.95, 1.05]; 10];
        assert_eq!(compute_cr(&v, &[0, 1], &band()), 1.0);
    }

    #[test]
    fn ql_basics_and_homogeneity() {
        assert_eq!(compute_ql(&vec![vec![0.0, 0.0]; 50]), 0.0);
        assert!((compute_ql(&vec![vec![0.1, -0.1]; 50]) - 0.1).abs() < 1e-12);
        let q: Vec<Vec<f64>> = (0..30)
            .map(|k| vec![0.01 * k as f64, -0.02 * k as f64, 0.005])
            .collect();
        let doubled: Vec<Vec<f64>> = q
            .iter()
            .map(|row| row.iter().map(|x| 2.0 * x).collect())
            .collect();
        assert!((compute_ql(&doubled) - 2.0 * compute_ql(&q)).abs() < 1e-12);
    }

    #[test]
    fn season_table_partitions_episodes() {
        let episodes: Vec<EpisodeMetrics> = (0..20)
            .map(|k| EpisodeMetrics {
                cr: 0.9,
                ql: 0.1,
                season: SEASONS[k % 4],
                steps: 480,
            })
            .collect();
        let table = season_table(&episodes);
        assert_eq!(table.len(), 5);
        let sum: usize = table.iter().take(4).map(|r| r.episodes).sum();
        assert_eq!(sum, 20);
        assert_eq!(table[4].label, "average");
        assert_eq!(table[4].episodes, 20);
    }
}
