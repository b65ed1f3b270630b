use std::io;
use std::time::Duration;

/// A packet taken off the wire with its capture time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Captured {
    /// Full IPv6 packet, header included.
    pub packet: Vec<u8>,
    pub timestamp_ns: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum TransportError {
    #[error("raw socket access denied (needs CAP_NET_RAW): {0}")]
    Permission(io::Error),
    #[error("transport I/O: {0}")]
    Io(#[from] io::Error),
    #[error("malformed outgoing packet: {0}")]
    Malformed(&'static str),
    #[error("simulator: {0}")]
    Sim(String),
}

/// Where probes go and replies come from.
///
/// `send` and `receive` are called concurrently from one sender and one
/// receiver thread. The two remaining hooks have no-op defaults: `finish`
/// marks the end of sending, and `drained` lets a transport that knows no
/// reply is still in flight end the cooldown early.
pub trait Transport: Sync {
    fn send(&self, packet: &[u8]) -> Result<(), TransportError>;

    /// Waits up to `timeout` for the next packet.
    fn receive(&self, timeout: Duration) -> Result<Option<Captured>, TransportError>;

    fn finish(&self) {}

    fn drained(&self) -> bool {
        false
    }
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, packet: &[u8]) -> Result<(), TransportError> {
        (**self).send(packet)
    }

    fn receive(&self, timeout: Duration) -> Result<Option<Captured>, TransportError> {
        (**self).receive(timeout)
    }

    fn finish(&self) {
        (**self).finish()
    }

    fn drained(&self) -> bool {
        (**self).drained()
    }
}
