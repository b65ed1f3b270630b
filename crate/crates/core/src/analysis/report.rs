//! CSV tables for plotting.

use std::collections::{BTreeMap, HashSet};
use std::net::Ipv6Addr;

use serde::Serialize;

use super::loops::LoopReport;
use super::stability::{StabilityReport, VisibilityReport};
use super::summary::ScanSummary;

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

#[derive(Serialize)]
struct ReplyClassRow<'a> {
    dataset: &'a str,
    targets: u64,
    replies: u64,
    reply_rate: f64,
    echo_replies: u64,
    error_replies: u64,
    routers: u64,
    echo_only: u64,
    error_only: u64,
    ambiguous: u64,
    echo_only_ratio: f64,
    error_only_ratio: f64,
    ambiguous_ratio: f64,
}

/// Reply and router-class breakdown per dataset.
pub fn reply_classes_csv(rows: &[(String, ScanSummary)]) -> String {
    to_csv(rows.iter().map(|(name, s)| {
        let (eo, er, am) = s.class_ratios();
        ReplyClassRow {
            dataset: name,
            targets: s.targets_probed,
            replies: s.replies_total,
            reply_rate: s.reply_rate,
            echo_replies: s.echo_replies,
            error_replies: s.error_replies,
            routers: s.distinct_router_ips,
            echo_only: s.echo_only,
            error_only: s.error_only,
            ambiguous: s.ambiguous,
            echo_only_ratio: eo,
            error_only_ratio: er,
            ambiguous_ratio: am,
        }
    }))
}

#[derive(Serialize)]
struct DiscoveryRow<'a> {
    dataset: &'a str,
    routers: u64,
    new_routers: u64,
    cumulative: u64,
}

/// Routers per dataset and how many each adds over the datasets before it.
pub fn discovery_csv(datasets: &[(String, HashSet<Ipv6Addr>)]) -> String {
    let mut seen: HashSet<Ipv6Addr> = HashSet::new();
    to_csv(datasets.iter().map(|(name, set)| {
        let new = set.iter().filter(|a| seen.insert(**a)).count() as u64;
        DiscoveryRow {
            dataset: name,
            routers: set.len() as u64,
            new_routers: new,
            cumulative: seen.len() as u64,
        }
    }))
}

#[derive(Serialize)]
struct VisibilityRow {
    category: &'static str,
    scans_responded: u32,
    routers: u64,
}

pub fn visibility_csv(v: &VisibilityReport) -> String {
    let mut rows = vec![VisibilityRow {
        category: "always",
        scans_responded: v.scans,
        routers: v.always,
    }];
    rows.extend(v.sometimes.iter().rev().map(|(k, n)| VisibilityRow {
        category: "sometimes",
        scans_responded: *k,
        routers: *n,
    }));
    rows.push(VisibilityRow {
        category: "never",
        scans_responded: 0,
        routers: v.never,
    });
    to_csv(rows)
}

pub fn stability_csv(r: &StabilityReport) -> String {
    to_csv(&r.scans)
}

/// One row per router that reported an expired probe.
pub fn amplification_csv(r: &LoopReport) -> String {
    to_csv(&r.routers)
}

#[derive(Serialize)]
struct LabelRow<'a> {
    label: &'a str,
    looping_subnets: u64,
}

pub fn loop_labels_csv(by_label: &BTreeMap<String, u64>) -> String {
    to_csv(by_label.iter().map(|(label, n)| LabelRow {
        label,
        looping_subnets: *n,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{sra_stability, visibility, Baseline, ResponderMap};

    #[test]
    fn discovery_counts_new_routers() {
        let a = |i: u16| Ipv6Addr::new(0x2001, 0xdb8, 0, 0, 0, 0, 0, i);
        let csv = discovery_csv(&[
            ("bgp".into(), [a(1), a(2)].into_iter().collect()),
            ("hitlist".into(), [a(2), a(3)].into_iter().collect()),
        ]);
        assert_eq!(
            csv,
            "dataset,routers,new_routers,cumulative\nbgp,2,2,2\nhitlist,2,1,3\n"
        );
    }

    #[test]
    fn visibility_rows() {
        let v = visibility(&[vec![true, true, true], vec![true, false, true], vec![false; 3]]).unwrap();
        assert_eq!(
            visibility_csv(&v),
            "category,scans_responded,routers\nalways,3,1\nsometimes,2,1\nnever,0,1\n"
        );
    }

    #[test]
    fn stability_rows() {
        let t = Ipv6Addr::LOCALHOST;
        let s: ResponderMap = [(t, Some(t))].into_iter().collect();
        let r = sra_stability(&[s.clone(), s], Baseline::First).unwrap();
        assert_eq!(
            stability_csv(&r),
            "scan,same,changed,no_response,same_fraction,changed_fraction,no_response_fraction\n1,1,0,0,1.0,0.0,0.0\n"
        );
    }

    #[test]
    fn class_rows_have_header() {
        let csv = reply_classes_csv(&[("x".into(), ScanSummary::default())]);
        assert!(csv.starts_with("dataset,targets,replies,reply_rate,"));
        assert_eq!(csv.lines().count(), 2);
    }
}
