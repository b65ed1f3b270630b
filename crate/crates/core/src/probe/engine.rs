//! Stateless send/receive scan loop.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use super::pacing::Pacer;
use super::packet::{build_echo_request, classify_icmp, ReplyRecord};
use super::transport::{Transport, TransportError};
use super::{ConfigError, ProbeConfig};
use crate::target_gen::ProbeTarget;

const POLL: Duration = Duration::from_millis(5);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub sent: u64,
    /// Packets handed to the sink.
    pub replies: u64,
    /// Captured packets that were not Echo Replies or ICMPv6 errors.
    pub ignored: u64,
    pub send_elapsed: Duration,
}

#[derive(Debug, thiserror::Error)]
pub enum ScanError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("transport failed after {} probes: {source}", stats.sent)]
    Transport { source: TransportError, stats: ScanStats },
}

/// Sends one Echo Request per target and streams every classified reply into
/// `sink`.
///
/// Sending and receiving run on separate threads. Capture continues for
/// `cfg.cooldown` after the final send, or until the transport reports it is
/// drained. On a transport failure everything captured so far has already been
/// passed to `sink`.
pub fn run_scan<T, I, F>(targets: I, transport: &T, cfg: &ProbeConfig, mut sink: F) -> Result<ScanStats, ScanError>
where
    T: Transport + ?Sized,
    I: IntoIterator<Item = ProbeTarget>,
    F: FnMut(ReplyRecord) + Send,
{
    cfg.validate()?;
    let sending_done = AtomicBool::new(false);
    let abort = AtomicBool::new(false);
    let replies = AtomicU64::new(0);
    let ignored = AtomicU64::new(0);
    let recv_error: Mutex<Option<TransportError>> = Mutex::new(None);

    let mut sent = 0u64;
    let mut send_error = None;
    let mut send_elapsed = Duration::ZERO;

    std::thread::scope(|scope| {
        scope.spawn(|| {
            let mut deadline: Option<Instant> = None;
            loop {
                let aborting = abort.load(Ordering::Acquire);
                if sending_done.load(Ordering::Acquire) && !aborting {
                    let d = *deadline.get_or_insert_with(|| Instant::now() + cfg.cooldown);
                    if Instant::now() >= d || transport.drained() {
                        break;
                    }
                }
                let timeout = if aborting { Duration::ZERO } else { POLL };
                match transport.receive(timeout) {
                    Ok(Some(captured)) => match classify_icmp(&captured.packet, cfg.secret) {
                        Some(mut record) => {
                            record.timestamp_ns = captured.timestamp_ns;
                            sink(record);
                            replies.fetch_add(1, Ordering::Relaxed);
                        }
                        None => {
                            ignored.fetch_add(1, Ordering::Relaxed);
                        }
                    },
                    Ok(None) if aborting => break,
                    Ok(None) => {}
                    Err(e) => {
                        *recv_error.lock().unwrap() = Some(e);
                        abort.store(true, Ordering::Release);
                        break;
                    }
                }
            }
        });

        let mut pacer = Pacer::new(cfg.send_rate);
        let start = Instant::now();
        for target in targets {
            if abort.load(Ordering::Acquire) {
                break;
            }
            pacer.acquire();
            let packet = build_echo_request(&target, cfg);
            if let Err(e) = transport.send(&packet) {
                send_error = Some(e);
                abort.store(true, Ordering::Release);
                break;
            }
            sent += 1;
        }
        send_elapsed = start.elapsed();
        transport.finish();
        sending_done.store(true, Ordering::Release);
    });

    let stats = ScanStats {
        sent,
        replies: replies.into_inner(),
        ignored: ignored.into_inner(),
        send_elapsed,
    };
    match send_error.or_else(|| recv_error.into_inner().unwrap()) {
        Some(source) => Err(ScanError::Transport { source, stats }),
        None => Ok(stats),
    }
}
