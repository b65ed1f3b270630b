use std::fs;
use std::io::Write;
use std::net::Ipv6Addr;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;

use srascan::io::{read_targets, write_reply};
use srascan::netsim::{SimTopology, Simulator, Transcript, DEFAULT_EVENT_CAP};
use srascan::probe::{build_echo_request, classify_icmp, ProbeConfig};

use crate::util::{create, in_file, open};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    targets: PathBuf,
    /// Probes per second of virtual time.
    #[arg(long, default_value_t = 1000)]
    rate: u64,
    #[arg(long, default_value_t = 64)]
    hop_limit: u8,
    #[arg(long, env = "SRASCAN_SECRET", hide_env_values = true, default_value_t = 0)]
    secret: u64,
    #[arg(long, default_value = "3fff:ffff::1")]
    source: Ipv6Addr,
    /// Stop after this many simulator events.
    #[arg(long, default_value_t = DEFAULT_EVENT_CAP)]
    event_cap: u64,
    /// Transcript of every packet in and out, as NDJSON.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Classified replies in the same format `scan` writes.
    #[arg(long)]
    replies: Option<PathBuf>,
}

pub fn run(a: SimulateArgs) -> Result<()> {
    if a.rate == 0 {
        bail!("--rate must be positive");
    }
    let text = fs::read_to_string(&a.topology).with_context(|| format!("reading {}", a.topology.display()))?;
    let topology = SimTopology::from_json(&text).with_context(|| format!("loading {}", a.topology.display()))?;
    let targets = in_file(&a.targets, read_targets(open(&a.targets)?))?;
    let cfg = ProbeConfig {
        send_rate: a.rate,
        hop_limit: a.hop_limit,
        secret: a.secret,
        source_address: a.source,
        ..ProbeConfig::default()
    };
    cfg.validate()?;

    let interval = 1_000_000_000 / a.rate;
    let mut sim = Simulator::new(topology)?.with_event_cap(a.event_cap);
    let mut sent = Vec::with_capacity(targets.len());
    for (i, t) in targets.iter().enumerate() {
        let at = i as u64 * interval;
        sim.run_until(at.saturating_sub(1));
        let p = build_echo_request(t, &cfg);
        sim.inject(at, p.clone())?;
        sent.push((at, p));
    }
    sim.run();
    let received = sim.take_emitted();
    let stats = sim.stats().clone();

    if let Some(path) = &a.replies {
        let mut w = create(path)?;
        for e in &received {
            if let Some(mut r) = classify_icmp(&e.packet, a.secret) {
                r.timestamp_ns = e.time_ns;
                write_reply(&mut w, &r)?;
            }
        }
        w.flush()?;
    }
    let transcript = Transcript::from_parts(sent, received, &sim);
    let mut w = create(&a.out)?;
    w.write_all(transcript.to_ndjson().as_bytes())?;
    w.flush()?;

    eprintln!(
        "{} probes, {} packets out ({} echo replies, {} errors, {} suppressed), {} events",
        stats.injected,
        stats.emitted(),
        stats.echo_replies,
        stats.errors_sent,
        stats.errors_suppressed,
        stats.events
    );
    if stats.truncated {
        eprintln!("warning: event cap of {} reached; results are incomplete", a.event_cap);
    }
    Ok(())
}
