//! Feeder topology: buses, branches, zones, and radial validation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};

/// One bus. `zone` is required for every non-slack bus and ignored on the
/// slack bus. `s_max` (p.u. apparent-power rating) is required where
/// `pv = true`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BusSpec {
    pub id: usize,
    #[serde(default)]
    pub zone: Option<usize>,
    #[serde(default)]
    pub load: bool,
    #[serde(default)]
    pub pv: bool,
    #[serde(default)]
    pub s_max: Option<f64>,
}

/// One branch with series impedance `r + jx` in p.u.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchSpec {
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
}

/// Radial feeder rooted at `slack_bus` (fixed 1.0 p.u. voltage).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeederTopology {
    pub base_mva: f64,
    pub slack_bus: usize,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
}

impl FeederTopology {
    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Contiguous index of bus `id` within `buses`.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Number of zones (zone indices are contiguous from 0 after validation).
    pub fn n_zones(&self) -> usize {
        self.buses
            .iter()
            .filter_map(|b| b.zone)
            .max()
            .map_or(0, |z| z + 1)
    }

    /// Bus indices (not ids) of zone `z`, ascending by bus id.
    pub fn zone_buses(&self, z: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.id != self.slack_bus && b.zone == Some(z))
            .map(|(i, _)| i)
            .collect();
        v.sort_by_key(|&i| self.buses[i].id);
        v
    }

    /// Bus indices with a PV inverter, ascending by bus id.
    pub fn pv_buses(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.pv)
            .map(|(i, _)| i)
            .collect();
        v.sort_by_key(|&i| self.buses[i].id);
        v
    }

    /// Bus indices with a load, ascending by bus id.
    pub fn load_buses(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.load)
            .map(|(i, _)| i)
            .collect();
        v.sort_by_key(|&i| self.buses[i].id);
        v
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string_pretty(self).map_err(|e| GridError::Parse {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Loads and validates a topology file, failing on any unknown field so
    /// typos cannot silently change a study. The error lists every unknown
    /// field it found.
    pub fn load_json(path: &Path) -> Result<FeederTopology> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| GridError::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        let unknown = collect_unknown_fields(&value);
        if !unknown.is_empty() {
            return Err(GridError::UnknownFields {
                path: path.display().to_string(),
                fields: unknown.join(", "),
            });
        }
        let topo: FeederTopology =
            serde_json::from_value(value).map_err(|e| GridError::Parse {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        validate_radial(&topo)?;
        Ok(topo)
    }
}

fn collect_unknown_fields(value: &serde_json::Value) -> Vec<String> {
    const TOP: &[&str] = &["base_mva", "slack_bus", "buses", "branches"];
    const BUS: &[&str] = &["id", "zone", "load", "pv", "s_max"];
    const BRANCH: &[&str] = &["from", "to", "r", "x"];
    let mut unknown = Vec::new();
    if let Some(obj) = value.as_object() {
        for key in obj.keys() {
            if !TOP.contains(&key.as_str()) {
                unknown.push(key.clone());
            }
        }
        for (field, allowed) in [("buses", BUS), ("branches", BRANCH)] {
            if let Some(items) = obj.get(field).and_then(|v| v.as_array()) {
                for (i, item) in items.iter().enumerate() {
                    if let Some(o) = item.as_object() {
                        for key in o.keys() {
                            if !allowed.contains(&key.as_str()) {
                                unknown.push(format!("{field}[{i}].{key}"));
                            }
                        }
                    }
                }
            }
        }
    }
    unknown
}

/// BFS tree view of a validated feeder: `order` lists bus indices with every
/// parent before its children; `parent[i]` is `None` only for the slack.
#[derive(Debug, Clone)]
pub struct RadialIndex {
    pub slack: usize,
    pub order: Vec<usize>,
    pub parent: Vec<Option<usize>>,
    pub parent_branch: Vec<Option<usize>>,
}

/// Confirms the tree property, connectivity, positive impedances, zone
/// partition and PV capacities; returns the traversal used by the solver.
pub fn validate_radial(topo: &FeederTopology) -> Result<RadialIndex> {
    let n = topo.buses.len();
    let mut seen = BTreeSet::new();
    for b in &topo.buses {
        if !seen.insert(b.id) {
            return Err(GridError::DuplicateBus(b.id));
        }
    }
    let slack = topo
        .index_of(topo.slack_bus)
        .ok_or(GridError::MissingSlack(topo.slack_bus))?;
    {
        let sb = &topo.buses[slack];
        if sb.load || sb.pv {
            return Err(GridError::SlackDevice(sb.id));
        }
    }

    let expected = n.saturating_sub(1);
    if topo.branches.len() != expected {
        return Err(GridError::BranchCount {
            buses: n,
            expected,
            found: topo.branches.len(),
        });
    }

    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (bi, br) in topo.branches.iter().enumerate() {
        if br.r <= 0.0 || br.x <= 0.0 {
            return Err(GridError::NonpositiveImpedance {
                from: br.from,
                to: br.to,
                r: br.r,
                x: br.x,
            });
        }
        let f = topo.index_of(br.from).ok_or(GridError::UnknownBus {
            from: br.from,
            to: br.to,
            unknown: br.from,
        })?;
        let t = topo.index_of(br.to).ok_or(GridError::UnknownBus {
            from: br.from,
            to: br.to,
            unknown: br.to,
        })?;
        if f == t {
            return Err(GridError::Cycle { from: br.from, to: br.to });
        }
        adj[f].push((t, bi));
        adj[t].push((f, bi));
    }

    // BFS from the slack; a revisit means a cycle, a miss means disconnection
    let mut parent = vec![None; n];
    let mut parent_branch = vec![None; n];
    let mut visited = vec![false; n];
    let mut order = vec![slack];
    visited[slack] = true;
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        head += 1;
        for &(v, bi) in &adj[u] {
            if Some(bi) == parent_branch[u] {
                continue;
            }
            if visited[v] {
                let br = &topo.branches[bi];
                return Err(GridError::Cycle { from: br.from, to: br.to });
            }
            visited[v] = true;
            parent[v] = Some(u);
            parent_branch[v] = Some(bi);
            order.push(v);
        }
    }
    if let Some(miss) = (0..n).find(|&i| !visited[i]) {
        return Err(GridError::Disconnected(topo.buses[miss].id));
    }

    for b in &topo.buses {
        if b.id == topo.slack_bus {
            continue;
        }
        if b.zone.is_none() {
            return Err(GridError::MissingZone(b.id));
        }
        if b.pv && b.s_max.map_or(true, |s| s <= 0.0) {
            return Err(GridError::MissingCapacity(b.id));
        }
    }
    for z in 0..topo.n_zones() {
        if topo.zone_buses(z).is_empty() {
            return Err(GridError::EmptyZone(z));
        }
    }

    Ok(RadialIndex {
        slack,
        order,
        parent,
        parent_branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus() -> FeederTopology {
        FeederTopology {
            base_mva: 1.0,
            slack_bus: 0,
            buses: vec![
                BusSpec { id: 0, zone: None, load: false, pv: false, s_max: None },
                BusSpec { id: 1, zone: Some(0), load: true, pv: false, s_max: None },
            ],
            branches: vec![BranchSpec { from: 0, to: 1, r: 0.01, x: 0.02 }],
        }
    }

    #[test]
    fn minimal_feeder_validates() {
        assert!(validate_radial(&two_bus()).is_ok());
    }

    #[test]
    fn loop_is_rejected_as_cycle() {
        let topo = FeederTopology {
            base_mva: 1.0,
            slack_bus: 0,
            buses: (0..3)
                .map(|id| BusSpec {
                    id,
                    zone: if id == 0 { None } else { Some(0) },
                    load: false,
                    pv: false,
                    s_max: None,
                })
                .collect(),
            branches: vec![
                BranchSpec { from: 0, to: 1, r: 0.01, x: 0.01 },
                BranchSpec { from: 1, to: 2, r: 0.01, x: 0.01 },
                BranchSpec { from: 2, to: 0, r: 0.01, x: 0.01 },
            ],
        };
        // three branches over three buses contradicts |E| = |V| - 1
        assert!(matches!(
            validate_radial(&topo),
            Err(GridError::BranchCount { .. })
        ));
    }

    #[test]
    fn nonpositive_impedance_names_branch() {
        let mut topo = two_bus();
        topo.branches[0].r = 0.0;
        match validate_radial(&topo) {
            Err(GridError::NonpositiveImpedance { from: 0, to: 1, .. }) => {}
            other => panic!("expected impedance error, got {other:?}"),
        }
    }

    #[test]
    fn disconnected_bus_named() {
        let mut topo = two_bus();
        topo.buses.push(BusSpec { id: 7, zone: Some(0), load: false, pv: false, s_max: None });
        topo.branches.push(BranchSpec { from: 7, to: 7, r: 0.01, x: 0.01 });
        assert!(matches!(validate_radial(&topo), Err(GridError::Cycle { .. })));

        // replace the self-loop with a second parallel branch: cycle again
        topo.branches[1] = BranchSpec { from: 0, to: 1, r: 0.01, x: 0.01 };
        assert!(matches!(validate_radial(&topo), Err(GridError::Cycle { .. })));
    }

    #[test]
    fn pv_without_capacity_rejected() {
        let mut topo = two_bus();
        topo.buses[1].pv = true;
        assert!(matches!(
            validate_radial(&topo),
            Err(GridError::MissingCapacity(1))
        ));
    }

    #[test]
    fn json_round_trip_and_unknown_field_listing() {
        let dir = std::env::temp_dir().join("tpa_grid_topo_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("feeder.json");
        two_bus().save_json(&path).unwrap();
        let loaded = FeederTopology::load_json(&path).unwrap();
        assert_eq!(loaded.n_buses(), 2);

        let bad = dir.join("bad.json");
        std::fs::write(
            &bad,
            r#"{"base_mva":1.0,"slack_bus":0,"frequency":50,
                "buses":[{"id":0,"colour":"red"},{"id":1,"zone":0}],
                "branches":[{"from":0,"to":1,"r":0.01,"x":0.02}]}"#,
        )
        .unwrap();
        match FeederTopology::load_json(&bad) {
            Err(GridError::UnknownFields { fields, .. }) => {
                assert!(fields.contains("frequency"), "{fields}");
                assert!(fields.contains("buses[0].colour"), "{fields}");
            }
            other => panic!("expected unknown-field error, got {other:?}"),
        }
    }
}
