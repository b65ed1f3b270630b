use std::collections::VecDeque;
use std::net::Ipv6Addr;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::sim::{Emitted, SimError, SimStats, Simulator, Transcript};
use super::topology::SimTopology;
use crate::probe::{Captured, Transport, TransportError};

struct State {
    sim: Simulator,
    clock_ns: u64,
    ready: VecDeque<Captured>,
    finished: bool,
    sent: Vec<(u64, Vec<u8>)>,
    received: Vec<Emitted>,
}

impl State {
    fn release(&mut self, until: u64) {
        for e in self.sim.take_emitted_until(until) {
            self.ready.push_back(Captured {
                packet: e.packet.clone(),
                timestamp_ns: e.time_ns,
            });
            self.received.push(e);
        }
    }
}

/// Transport backed by an in-process simulation.
///
/// Each send advances a virtual clock by one send interval; replies become
/// receivable once the clock passes their arrival time. `finish` runs the
/// simulation to quiescence, after which the transport drains.
pub struct SimTransport {
    state: Mutex<State>,
    ready_cv: Condvar,
    interval_ns: u64,
}

impl SimTransport {
    pub fn new(topology: SimTopology, send_rate: u64) -> Result<Self, SimError> {
        Ok(Self::from_simulator(Simulator::new(topology)?, send_rate))
    }

    pub fn from_simulator(sim: Simulator, send_rate: u64) -> Self {
        Self {
            state: Mutex::new(State {
                sim,
                clock_ns: 0,
                ready: VecDeque::new(),
                finished: false,
                sent: Vec::new(),
                received: Vec::new(),
            }),
            ready_cv: Condvar::new(),
            interval_ns: (1_000_000_000 / send_rate.max(1)).max(1),
        }
    }

    /// Destinations of every packet sent, in send order.
    pub fn sent_destinations(&self) -> Vec<Ipv6Addr> {
        let st = self.state.lock().unwrap();
        st.sent
            .iter()
            .map(|(_, p)| Ipv6Addr::from(<[u8; 16]>::try_from(&p[24..40]).expect("validated on send")))
            .collect()
    }

    pub fn stats(&self) -> SimStats {
        self.state.lock().unwrap().sim.stats().clone()
    }

    pub fn transcript(&self) -> Transcript {
        let st = self.state.lock().unwrap();
        Transcript::from_parts(st.sent.clone(), st.received.clone(), &st.sim)
    }
}

impl Transport for SimTransport {
    fn send(&self, packet: &[u8]) -> Result<(), TransportError> {
        let mut st = self.state.lock().unwrap();
        let now = st.clock_ns;
        st.sim
            .inject(now, packet.to_vec())
            .map_err(|e| TransportError::Sim(e.to_string()))?;
        st.sent.push((now, packet.to_vec()));
        st.sim.run_until(now);
        st.release(now);
        st.clock_ns = now + self.interval_ns;
        drop(st);
        self.ready_cv.notify_one();
        Ok(())
    }

    fn receive(&self, timeout: Duration) -> Result<Option<Captured>, TransportError> {
        let mut st = self.state.lock().unwrap();
        if st.ready.is_empty() && !st.finished && !timeout.is_zero() {
            st = self.ready_cv.wait_timeout(st, timeout).unwrap().0;
        }
        Ok(st.ready.pop_front())
    }

    fn finish(&self) {
        let mut st = self.state.lock().unwrap();
        st.sim.run();
        st.release(u64::MAX);
        st.finished = true;
        drop(st);
        self.ready_cv.notify_all();
    }

    fn drained(&self) -> bool {
        let st = self.state.lock().unwrap();
        st.finished && st.ready.is_empty()
    }
}
