use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::Ipv6Addr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use chrono::{DateTime, SecondsFormat, Utc};
use clap::{Args, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use srascan::io::{read_prefixes, read_targets, write_reply};
use srascan::lpm::PrefixTable;
use srascan::manifest::{scan_id, sha256_hex, FileDigest, PassRecord, ScanManifest, MANIFEST_VERSION};
use srascan::netsim::{SimTopology, SimTransport};
use srascan::probe::{run_scan, ProbeConfig, ScanError, ScanStats, Transport, DEFAULT_COOLDOWN};
use srascan::ProbeTarget;

use crate::util::{in_file, open};

pub const SCAN_CONFIG_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    Live,
    Sim,
}

#[derive(Args, Debug, Default)]
pub struct ScanArgs {
    /// Versioned JSON file with any of the options below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target file (plain addresses or JSON lines).
    #[arg(long)]
    targets: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Probes per second.
    #[arg(long)]
    rate: Option<u64>,
    #[arg(long)]
    hop_limit: Option<u8>,
    /// Capture time after the last probe, in milliseconds.
    #[arg(long = "cooldown", visible_alias = "cooldown-ms", value_name = "MS")]
    cooldown_ms: Option<u64>,
    /// Payload authentication key.
    #[arg(long, env = "SRASCAN_SECRET", hide_env_values = true)]
    secret: Option<u64>,
    /// Source address for outgoing probes.
    #[arg(long)]
    source: Option<Ipv6Addr>,
    #[arg(long, value_enum)]
    transport: Option<TransportKind>,
    /// Topology JSON for `--transport sim`.
    #[arg(long)]
    sim_topology: Option<PathBuf>,
    /// Number of times the target list is scanned.
    #[arg(long)]
    passes: Option<u32>,
    /// Prefixes that must never be probed.
    #[arg(long)]
    exclude: Option<PathBuf>,
    /// Seed for the per-pass probe order.
    #[arg(long)]
    seed: Option<u64>,
    /// Required for `--transport live`.
    #[arg(long)]
    i_understand_live: bool,
}

/// On-disk form of the scan options. Relative paths resolve against the
/// file's directory.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanFile {
    pub version: u32,
    pub targets: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub rate: Option<u64>,
    pub hop_limit: Option<u8>,
    pub cooldown_ms: Option<u64>,
    pub source: Option<Ipv6Addr>,
    pub transport: Option<TransportKind>,
    pub sim_topology: Option<PathBuf>,
    pub passes: Option<u32>,
    pub exclude: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Settings recorded in the manifest.
#[derive(Debug, Serialize)]
struct Effective {
    targets: PathBuf,
    out_dir: PathBuf,
    transport: TransportKind,
    sim_topology: Option<PathBuf>,
    exclude: Option<PathBuf>,
    passes: u32,
    seed: u64,
    probe: ProbeConfig,
}

fn resolve(a: ScanArgs) -> Result<(Effective, Option<PathBuf>)> {
    let file = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let f: ScanFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            if f.version != SCAN_CONFIG_VERSION {
                bail!("{}: unsupported config version {}", p.display(), f.version);
            }
            f
        }
        None => ScanFile::default(),
    };
    let base = a.config.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
    let rel = |p: Option<PathBuf>| p.map(|p| if p.is_absolute() { p } else { base.join(p) });

    let targets = a
        .targets
        .or(rel(file.targets))
        .ok_or_else(|| anyhow!("no target file given (--targets)"))?;
    let out_dir = a
        .out_dir
        .or(rel(file.out_dir))
        .ok_or_else(|| anyhow!("no output directory given (--out-dir)"))?;
    let transport = a.transport.or(file.transport).unwrap_or(TransportKind::Live);
    let sim_topology = a.sim_topology.or(rel(file.sim_topology));
    let defaults = ProbeConfig::default();
    let probe = ProbeConfig {
        send_rate: a.rate.or(file.rate).unwrap_or(defaults.send_rate),
        hop_limit: a.hop_limit.or(file.hop_limit).unwrap_or(defaults.hop_limit),
        cooldown: a
            .cooldown_ms
            .or(file.cooldown_ms)
            .map(Duration::from_millis)
            .unwrap_or(DEFAULT_COOLDOWN),
        secret: match a.secret {
            Some(s) => s,
            None => {
                eprintln!("no secret given; using a random one");
                rand::random()
            }
        },
        source_address: a.source.or(file.source).unwrap_or(defaults.source_address),
        ..defaults
    };
    probe.validate()?;
    let eff = Effective {
        targets,
        out_dir,
        transport,
        sim_topology,
        exclude: a.exclude.or(rel(file.exclude)),
        passes: a.passes.or(file.passes).unwrap_or(1),
        seed: a.seed.or(file.seed).unwrap_or(0),
        probe,
    };
    if eff.passes == 0 || eff.passes > u16::MAX as u32 {
        bail!("--passes must be between 1 and {}", u16::MAX);
    }
    match eff.transport {
        TransportKind::Live if !a.i_understand_live => {
            bail!("live scanning sends real packets; pass --i-understand-live to proceed")
        }
        TransportKind::Sim if eff.sim_topology.is_none() => bail!("--transport sim needs --sim-topology"),
        _ => {}
    }
    Ok((eff, a.config))
}

fn rfc3339(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Nanos, true)
}

/// Simulated scans are stamped with virtual time counted from the epoch so
/// that their manifests are reproducible.
fn virtual_time(ns: u64) -> String {
    rfc3339(DateTime::from_timestamp_nanos(ns as i64))
}

fn open_live(eff: &Effective) -> Result<Box<dyn Transport>> {
    #[cfg(target_os = "linux")]
    {
        use srascan::probe::{LiveTransport, TransportError};
        match LiveTransport::open(eff.probe.source_address) {
            Ok(t) => Ok(Box::new(t)),
            Err(TransportError::Permission(e)) => {
                bail!("opening a raw ICMPv6 socket needs root or CAP_NET_RAW: {e}")
            }
            Err(e) => Err(e.into()),
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = eff;
        bail!("live transport is only available on Linux")
    }
}

struct PassOutcome {
    record: PassRecord,
    error: Option<ScanError>,
}

fn run_pass(
    eff: &Effective,
    topology: Option<&SimTopology>,
    targets: &[ProbeTarget],
    pass: u32,
    id: String,
) -> Result<PassOutcome> {
    let mut order = targets.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(eff.seed);
    rng.set_stream(pass as u64);
    order.shuffle(&mut rng);

    let cfg = ProbeConfig {
        scan_tag: pass as u16,
        ..eff.probe.clone()
    };
    let path = eff.out_dir.join(format!("replies-{id}.ndjson"));
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
    let mut write_err = None;
    let mut last_ts = 0u64;

    let wall_start = Utc::now();
    let transport: Box<dyn Transport> = match topology {
        Some(t) => Box::new(SimTransport::new(t.clone(), cfg.send_rate)?),
        None => open_live(eff)?,
    };
    let result = run_scan(order, &*transport, &cfg, |r| {
        last_ts = last_ts.max(r.timestamp_ns);
        if write_err.is_none() {
            if let Err(e) = write_reply(&mut w, &r) {
                write_err = Some(e);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e).with_context(|| format!("writing {}", path.display()));
    }
    w.flush()?;
    drop(w);

    let (stats, error) = match result {
        Ok(s) => (s, None),
        Err(ScanError::Transport { source, stats }) => (stats.clone(), Some(ScanError::Transport { source, stats })),
        Err(e) => return Err(e.into()),
    };
    let ScanStats { sent, replies, .. } = stats;
    let (started_at, finished_at) = if topology.is_some() {
        (virtual_time(0), virtual_time(last_ts))
    } else {
        (rfc3339(wall_start), rfc3339(Utc::now()))
    };
    eprintln!("pass {pass} ({id}): {sent} probes sent, {replies} replies");
    Ok(PassOutcome {
        record: PassRecord {
            scan_id: id,
            pass,
            started_at,
            finished_at,
            probes_sent: sent,
            replies,
            output: FileDigest::of(&path, &eff.out_dir)?,
        },
        error,
    })
}

pub fn run(a: ScanArgs) -> Result<()> {
    let (eff, config_path) = resolve(a)?;
    let wall_start = Utc::now();

    let mut targets = in_file(&eff.targets, read_targets(open(&eff.targets)?))?;
    if let Some(ex) = &eff.exclude {
        let table: PrefixTable<()> = in_file(ex, read_prefixes(open(ex)?))?.into_iter().collect();
        let before = targets.len();
        targets.retain(|t| !table.contains(t.address));
        eprintln!("{} of {before} targets excluded", before - targets.len());
    }
    let topology = match (&eff.transport, &eff.sim_topology) {
        (TransportKind::Sim, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(SimTopology::from_json(&text).with_context(|| format!("loading {}", p.display()))?)
        }
        _ => None,
    };
    fs::create_dir_all(&eff.out_dir).with_context(|| format!("creating {}", eff.out_dir.display()))?;

    let mut inputs = vec![FileDigest::of(&eff.targets, &eff.out_dir)?];
    for p in [&eff.exclude, &eff.sim_topology, &config_path].into_iter().flatten() {
        inputs.push(FileDigest::of(p, &eff.out_dir)?);
    }
    let config = serde_json::to_value(&eff)?;
    // Scan ids depend on file contents and settings, not on where files live.
    let mut keyed = config.clone();
    for k in ["targets", "out_dir", "sim_topology", "exclude"] {
        keyed[k] = serde_json::Value::Null;
    }
    let digests: Vec<&str> = inputs.iter().map(|d| d.sha256.as_str()).collect();
    let config_digest = sha256_hex(format!("{keyed}\n{}", digests.join("\n")));

    let mut passes = Vec::new();
    let mut failure = None;
    for pass in 1..=eff.passes {
        let out = run_pass(&eff, topology.as_ref(), &targets, pass, scan_id(&config_digest, pass))?;
        passes.push(out.record);
        if out.error.is_some() {
            failure = out.error;
            break;
        }
    }

    let (started_at, finished_at) = if topology.is_some() {
        (
            passes
                .first()
                .map(|p| p.started_at.clone())
                .unwrap_or_else(|| virtual_time(0)),
            passes
                .last()
                .map(|p| p.finished_at.clone())
                .unwrap_or_else(|| virtual_time(0)),
        )
    } else {
        (rfc3339(wall_start), rfc3339(Utc::now()))
    };
    let manifest = ScanManifest {
        version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        secret_sha256: sha256_hex(eff.probe.secret.to_be_bytes()),
        inputs,
        passes,
        started_at,
        finished_at,
    };
    let mpath = eff.out_dir.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("writing {}", mpath.display()))?;
    eprintln!("manifest written to {}", mpath.display());
    match failure {
        Some(e) => Err(e).context("scan stopped early; partial results were kept"),
        None => Ok(()),
    }
}

pub fn verify(path: &Path) -> Result<bool> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: ScanManifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let problems = m.verify(base);
    for p in &problems {
        eprintln!("{p}");
    }
    if problems.is_empty() {
        eprintln!("{} files verified", m.files().count());
    }
    Ok(problems.is_empty())
}
