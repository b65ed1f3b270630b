use std::collections::{BTreeSet, HashSet};
use std::fs::{self, File};
use std::io::Write;
use std::net::Ipv6Addr;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use srascan::analysis::report::{amplification_csv, loop_labels_csv, reply_classes_csv, stability_csv, visibility_csv};
use srascan::analysis::{
    alias_filter, compare_by_label, compare_datasets, detect_loops, match_replies, reprobe_matrix, responders,
    sra_stability, summarize, visibility, Baseline, LoopOptions, Outcomes, PrefixTable,
};
use srascan::io::{read_addresses, read_prefixes, read_replies, read_targets};
use srascan::ProbeTarget;

use crate::util::{create, in_file, open};

#[derive(Subcommand, Debug)]
pub enum AnalyzeCommand {
    /// Reply counts and router classes for one scan.
    Summarize(SummarizeArgs),
    /// Routing loops and amplifying routers.
    Loops(LoopsArgs),
    /// How consistently the same router answers each target across scans.
    Stability(StabilityArgs),
    /// Which routers answer direct probes in every, some or no scan.
    Visibility(VisibilityArgs),
    /// Overlap between address sets.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct ScanInput {
    /// Targets that were probed, including those that drew no reply.
    #[arg(long)]
    targets: PathBuf,
    /// Reply file written by `scan`.
    #[arg(long)]
    replies: PathBuf,
    /// Aliased prefixes; replies from inside them are discarded.
    #[arg(long)]
    aliased: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    #[command(flatten)]
    input: ScanInput,
    /// Dataset name used in the CSV row.
    #[arg(long, default_value = "scan")]
    name: String,
    /// JSON summary destination.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// One JSON line per router that survived alias filtering.
    #[arg(long)]
    observations: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LoopsArgs {
    #[arg(long)]
    targets: PathBuf,
    #[arg(long)]
    replies: PathBuf,
    /// Time Exceeded replies per probe needed to call its subnet looping.
    #[arg(long, default_value_t = 1)]
    threshold: usize,
    #[arg(long, default_value_t = 48)]
    subnet_len: u8,
    /// `prefix,label` CSV used to group looping subnets.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    labels_csv: Option<PathBuf>,
    #[arg(long)]
    amplification_csv: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BaselineArg {
    First,
    Previous,
}

#[derive(Args, Debug)]
pub struct StabilityArgs {
    #[arg(long)]
    targets: PathBuf,
    /// Reply files in scan order; at least two.
    #[arg(long = "replies", required = true, num_args = 1..)]
    replies: Vec<PathBuf>,
    #[arg(long)]
    aliased: Option<PathBuf>,
    /// Compare each scan with the first one or with the one before it.
    #[arg(long, value_enum, default_value = "first")]
    baseline: BaselineArg,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VisibilityArgs {
    /// Router addresses that were probed directly.
    #[arg(long)]
    routers: PathBuf,
    /// Reply files in scan order; at least two.
    #[arg(long = "replies", required = true, num_args = 1..)]
    replies: Vec<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// NAME=FILE with one address per line; repeat for each set.
    #[arg(long = "set", required = true, value_parser = parse_named)]
    sets: Vec<(String, PathBuf)>,
    /// `prefix,label` CSV; compares label sets instead of addresses.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    exclusive_csv: Option<PathBuf>,
    #[arg(long)]
    pairwise_csv: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), path.into())),
        _ => Err(format!("expected NAME=FILE, got {s:?}")),
    }
}

pub fn run(cmd: AnalyzeCommand) -> Result<()> {
    match cmd {
        AnalyzeCommand::Summarize(a) => run_summarize(a),
        AnalyzeCommand::Loops(a) => run_loops(a),
        AnalyzeCommand::Stability(a) => run_stability(a),
        AnalyzeCommand::Visibility(a) => run_visibility(a),
        AnalyzeCommand::Compare(a) => run_compare(a),
    }
}

fn load_targets(path: &Path) -> Result<Vec<Ipv6Addr>> {
    let ts: Vec<ProbeTarget> = in_file(path, read_targets(open(path)?))?;
    Ok(ts.into_iter().map(|t| t.address).collect())
}

fn load_outcomes(targets: &[Ipv6Addr], replies: &Path) -> Result<Outcomes> {
    let rs = in_file(replies, read_replies(open(replies)?))?;
    Ok(match_replies(targets.iter().copied(), rs))
}

fn load_aliased(path: Option<&Path>) -> Result<PrefixTable<()>> {
    Ok(match path {
        Some(p) => in_file(p, read_prefixes(open(p)?))?.into_iter().collect(),
        None => PrefixTable::default(),
    })
}

fn load_labels(path: &Path) -> Result<PrefixTable> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    PrefixTable::from_csv(f).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn scan_label(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn run_summarize(a: SummarizeArgs) -> Result<()> {
    let targets = load_targets(&a.input.targets)?;
    let outcomes = load_outcomes(&targets, &a.input.replies)?;
    let aliased = load_aliased(a.input.aliased.as_deref())?;
    let obs = alias_filter(&outcomes, &aliased, &a.name);
    let summary = summarize(&outcomes, &obs);
    if let Some(p) = &a.observations {
        let mut w = create(p)?;
        for o in &obs {
            serde_json::to_writer(&mut w, o)?;
            writeln!(w)?;
        }
        w.flush()?;
    }
    if let Some(p) = &a.csv {
        write_text(p, &reply_classes_csv(&[(a.name.clone(), summary.clone())]))?;
    }
    write_json(&a.out, &summary)
}

fn run_loops(a: LoopsArgs) -> Result<()> {
    if a.subnet_len > 128 {
        bail!("--subnet-len must be at most 128");
    }
    if a.threshold == 0 {
        bail!("--threshold must be at least 1");
    }
    let targets = load_targets(&a.targets)?;
    let outcomes = load_outcomes(&targets, &a.replies)?;
    let report = detect_loops(
        &outcomes,
        &LoopOptions {
            threshold: a.threshold,
            subnet_len: a.subnet_len,
        },
    );
    eprintln!(
        "{} looping subnets, {} amplifying routers",
        report.looping_subnets.len(),
        report.amplifying().count()
    );
    if let Some(p) = &a.amplification_csv {
        write_text(p, &amplification_csv(&report))?;
    }
    match (&a.labels, &a.labels_csv) {
        (Some(l), Some(out)) => write_text(out, &loop_labels_csv(&report.by_label(&load_labels(l)?)))?,
        (None, Some(_)) => bail!("--labels-csv needs --labels"),
        _ => {}
    }
    write_json(&a.out, &report)
}

fn run_stability(a: StabilityArgs) -> Result<()> {
    if a.replies.len() < 2 {
        bail!("stability needs at least two reply files");
    }
    let targets = load_targets(&a.targets)?;
    let aliased = load_aliased(a.aliased.as_deref())?;
    let scans = a
        .replies
        .iter()
        .map(|p| {
            let outcomes = load_outcomes(&targets, p)?;
            let obs = alias_filter(&outcomes, &aliased, &scan_label(p));
            Ok(responders(targets.iter().copied(), &obs))
        })
        .collect::<Result<Vec<_>>>()?;
    let baseline = match a.baseline {
        BaselineArg::First => Baseline::First,
        BaselineArg::Previous => Baseline::Previous,
    };
    let report = sra_stability(&scans, baseline)?;
    if let Some(p) = &a.csv {
        write_text(p, &stability_csv(&report))?;
    }
    write_json(&a.out, &report)
}

fn run_visibility(a: VisibilityArgs) -> Result<()> {
    let routers: BTreeSet<Ipv6Addr> = in_file(&a.routers, read_addresses(open(&a.routers)?))?
        .into_iter()
        .collect();
    if routers.is_empty() {
        bail!("{}: no router addresses", a.routers.display());
    }
    let responded = a
        .replies
        .iter()
        .map(|p| {
            let rs = in_file(p, read_replies(open(p)?))?;
            Ok(rs
                .into_iter()
                .filter(|r| r.kind.is_echo_reply())
                .filter_map(|r| r.embedded_target)
                .collect::<HashSet<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let report = visibility(&reprobe_matrix(&routers, &responded))?;
    if let Some(p) = &a.csv {
        write_text(p, &visibility_csv(&report))?;
    }
    write_json(&a.out, &report)
}

fn run_compare(a: CompareArgs) -> Result<()> {
    let mut names = HashSet::new();
    let sets = a
        .sets
        .iter()
        .map(|(name, path)| {
            if !names.insert(name.as_str()) {
                return Err(anyhow!("set name {name:?} given twice"));
            }
            let addrs = in_file(path, read_addresses(open(path)?))?;
            Ok((name.clone(), addrs.into_iter().collect::<HashSet<_>>()))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = match &a.labels {
        Some(l) => compare_by_label(&sets, &load_labels(l)?)?,
        None => compare_datasets(&sets)?,
    };
    if let Some(p) = &a.exclusive_csv {
        write_text(p, &table.exclusive_csv())?;
    }
    if let Some(p) = &a.pairwise_csv {
        write_text(p, &table.pairwise_csv())?;
    }
    write_json(&a.out, &table)
}
