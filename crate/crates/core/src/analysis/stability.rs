use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use super::alias::RouterObservation;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum StabilityError {
    #[error("need at least two scans, got {0}")]
    TooFewScans(usize),
    #[error("scan {0} probed a different target set than scan 0")]
    TargetMismatch(usize),
    #[error("router row {row} has {got} entries, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("no targets to compare")]
    NoTargets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Always,
    /// Responded in `k` of the scans, `0 < k < n`.
    Sometimes(u32),
    Never,
}

pub fn classify_visibility(row: &[bool]) -> Visibility {
    let k = row.iter().filter(|&&b| b).count();
    match k {
        0 => Visibility::Never,
        k if k == row.len() => Visibility::Always,
        k => Visibility::Sometimes(k as u32),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub scans: u32,
    pub routers: u64,
    pub always: u64,
    pub never: u64,
    /// Number of routers that answered in exactly `k` scans.
    pub sometimes: BTreeMap<u32, u64>,
}

/// Classifies each router row (one flag per scan) of a re-probe matrix.
pub fn visibility(matrix: &[Vec<bool>]) -> Result<VisibilityReport, StabilityError> {
    let n = matrix.first().map(Vec::len).unwrap_or(0);
    if n < 2 {
        return Err(StabilityError::TooFewScans(n));
    }
    let mut r = VisibilityReport {
        scans: n as u32,
        routers: matrix.len() as u64,
        ..Default::default()
    };
    for (row_idx, row) in matrix.iter().enumerate() {
        if row.len() != n {
            return Err(StabilityError::Ragged {
                row: row_idx,
                got: row.len(),
                expected: n,
            });
        }
        match classify_visibility(row) {
            Visibility::Always => r.always += 1,
            Visibility::Never => r.never += 1,
            Visibility::Sometimes(k) => *r.sometimes.entry(k).or_default() += 1,
        }
    }
    Ok(r)
}

/// Builds the router × scan matrix for `routers` from the sets of addresses
/// that answered direct probes in each scan.
pub fn reprobe_matrix(routers: &BTreeSet<Ipv6Addr>, responded: &[HashSet<Ipv6Addr>]) -> Vec<Vec<bool>> {
    routers
        .iter()
        .map(|r| responded.iter().map(|s| s.contains(r)).collect())
        .collect()
}

/// Which earlier scan a scan is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    First,
    Previous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStability {
    pub scan: usize,
    pub same: u64,
    pub changed: u64,
    pub no_response: u64,
    pub same_fraction: f64,
    pub changed_fraction: f64,
    pub no_response_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub baseline: Baseline,
    pub scans: Vec<ScanStability>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visibility: Option<VisibilityReport>,
}

/// Target → answering router (if any) for one scan.
pub type ResponderMap = BTreeMap<Ipv6Addr, Option<Ipv6Addr>>;

/// For every scan after the first, splits targets into those answered by
/// the same router as the baseline scan, by a different router (including
/// targets silent in the baseline), and not answered at all.
pub fn sra_stability(scans: &[ResponderMap], baseline: Baseline) -> Result<StabilityReport, StabilityError> {
    if scans.len() < 2 {
        return Err(StabilityError::TooFewScans(scans.len()));
    }
    if scans[0].is_empty() {
        return Err(StabilityError::NoTargets);
    }
    for (i, s) in scans.iter().enumerate().skip(1) {
        if s.len() != scans[0].len() || !s.keys().eq(scans[0].keys()) {
            return Err(StabilityError::TargetMismatch(i));
        }
    }
    let total = scans[0].len() as f64;
    let rows = (1..scans.len())
        .map(|k| {
            let base = match baseline {
                Baseline::First => &scans[0],
                Baseline::Previous => &scans[k - 1],
            };
            let (mut same, mut changed, mut no_response) = (0u64, 0u64, 0u64);
            for ((_, now), (_, before)) in scans[k].iter().zip(base) {
                match now {
                    None => no_response += 1,
                    Some(r) if Some(r) == before.as_ref() => same += 1,
                    Some(_) => changed += 1,
                }
            }
            ScanStability {
                scan: k,
                same,
                changed,
                no_response,
                same_fraction: same as f64 / total,
                changed_fraction: changed as f64 / total,
                no_response_fraction: no_response as f64 / total,
            }
        })
        .collect();
    Ok(StabilityReport {
        baseline,
        scans: rows,
        visibility: None,
    })
}

/// Target → Echo Reply source for one scan, using alias-filtered
/// observations. When several routers answered one target the lowest
/// address is taken.
pub fn responders<'a>(
    targets: impl IntoIterator<Item = Ipv6Addr>,
    observations: impl IntoIterator<Item = &'a RouterObservation>,
) -> ResponderMap {
    let mut map: ResponderMap = targets.into_iter().map(|t| (t, None)).collect();
    for obs in observations {
        for (t, kind) in &obs.elicited_by {
            if !kind.is_echo_reply() {
                continue;
            }
            if let Some(slot) = map.get_mut(t) {
                match slot {
                    Some(cur) if *cur <= obs.router_ip => {}
                    _ => *slot = Some(obs.router_ip),
                }
            }
        }
    }
    map
}
