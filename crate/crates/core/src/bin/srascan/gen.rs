use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};

use srascan::io::{read_addresses, read_prefixes, write_target};
use srascan::manifest::{FileDigest, MANIFEST_VERSION};
use srascan::target_gen::{
    gen_bgp_combined, gen_from_hitlist, gen_route6, gen_stage1, gen_stage2, gen_stage3, GenerationConfig,
};
use srascan::ProbeTarget;

use crate::util::{create, in_file, open};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Source {
    Bgp,
    Route6,
    Hitlist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StageArg {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "3")]
    Three,
    All,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    source: Source,
    /// BGP stage; ignored for other sources.
    #[arg(long, value_enum, default_value = "2")]
    stage: StageArg,
    /// Prefix list (bgp, route6) or address list (hitlist); `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    /// Output file; `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Seed for Route(6) sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random /64s drawn per Route(6) prefix.
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long)]
    max_targets: Option<u64>,
    /// Write one JSON object per target with origin prefix and stage.
    #[arg(long)]
    provenance: bool,
    /// Count targets without writing them.
    #[arg(long)]
    count_only: bool,
    /// Write a JSON record of inputs, settings and output digest here.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn emit(targets: impl Iterator<Item = ProbeTarget>, out: &mut Option<Box<dyn Write>>, provenance: bool) -> Result<u64> {
    let mut n = 0u64;
    match out {
        Some(w) => {
            for t in targets {
                write_target(&mut *w, &t, provenance)?;
                n += 1;
            }
        }
        None => n = targets.count() as u64,
    }
    Ok(n)
}

pub fn run(a: GenArgs) -> Result<()> {
    let cfg = GenerationConfig {
        route6_samples_per_prefix: a.samples,
        rng_seed: a.seed,
        max_targets: a.max_targets,
    };
    cfg.validate()?;
    if a.count_only && a.manifest.is_some() {
        bail!("--manifest needs an output file; drop --count-only");
    }
    let mut out = if a.count_only { None } else { Some(create(&a.out)?) };

    let total = match a.source {
        Source::Bgp => {
            let prefixes = in_file(&a.input, read_prefixes(open(&a.input)?))?;
            eprintln!("{} prefixes read", prefixes.len());
            match a.stage {
                StageArg::One => emit(cfg.cap(gen_stage1(prefixes)), &mut out, a.provenance)?,
                StageArg::Two => emit(cfg.cap(gen_stage2(prefixes)), &mut out, a.provenance)?,
                StageArg::Three => emit(cfg.cap(gen_stage3(prefixes)), &mut out, a.provenance)?,
                StageArg::All => {
                    let s1 = gen_stage1(prefixes.iter().copied()).count();
                    let s2 = gen_stage2(prefixes.iter().copied()).count();
                    let s3 = gen_stage3(prefixes.iter().copied()).count();
                    eprintln!("stage 1: {s1}, stage 2: {s2}, stage 3: {s3} targets before cross-stage dedup");
                    emit(cfg.cap(gen_bgp_combined(prefixes)), &mut out, a.provenance)?
                }
            }
        }
        Source::Route6 => {
            let prefixes = in_file(&a.input, read_prefixes(open(&a.input)?))?;
            eprintln!("{} route objects read", prefixes.len());
            emit(cfg.cap(gen_route6(prefixes, &cfg)?), &mut out, a.provenance)?
        }
        Source::Hitlist => {
            let addrs = in_file(&a.input, read_addresses(open(&a.input)?))?;
            let n = addrs.len();
            let emitted = emit(cfg.cap(gen_from_hitlist(addrs)), &mut out, a.provenance)?;
            if a.max_targets.is_none() {
                eprintln!(
                    "{n} addresses, {emitted} distinct /64s, {} duplicates removed",
                    n as u64 - emitted
                );
            }
            emitted
        }
    };
    if let Some(mut w) = out {
        w.flush()?;
    }
    eprintln!("{total} targets");

    if let Some(m) = &a.manifest {
        write_manifest(m, &a, &cfg, total)?;
    }
    Ok(())
}

fn value_name(v: impl ValueEnum) -> String {
    v.to_possible_value()
        .map(|p| p.get_name().to_string())
        .unwrap_or_default()
}

fn write_manifest(path: &Path, a: &GenArgs, cfg: &GenerationConfig, total: u64) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let digest = |p: &Path| -> Result<Option<FileDigest>> {
        if p == Path::new("-") {
            return Ok(None);
        }
        Ok(Some(
            FileDigest::of(p, base).with_context(|| format!("hashing {}", p.display()))?,
        ))
    };
    let record = serde_json::json!({
        "version": MANIFEST_VERSION,
        "command": "gen-targets",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "source": value_name(a.source),
        "stage": value_name(a.stage),
        "provenance": a.provenance,
        "config": cfg,
        "inputs": [digest(&a.input)?],
        "outputs": [digest(&a.out)?],
        "targets": total,
    });
    std::fs::write(path, serde_json::to_string_pretty(&record)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
