//! Raw ICMPv6 socket transport.
//!
//! The kernel strips the IPv6 header on raw ICMPv6 sockets and fills in the
//! ICMPv6 checksum on send. Outgoing packets are therefore split into
//! destination, hop limit and ICMPv6 message; incoming ones get a synthetic
//! IPv6 header rebuilt from the peer address and the received hop limit.

use std::io;
use std::mem::{size_of, zeroed};
use std::net::Ipv6Addr;
use std::os::fd::{AsRawFd, FromRawFd, OwnedFd};
use std::sync::atomic::{AtomicI32, Ordering};
use std::time::{Duration, Instant};

use super::packet::{IPV6_HEADER_LEN, NEXT_HEADER_ICMPV6};
use super::transport::{Captured, Transport, TransportError};

pub struct LiveTransport {
    fd: OwnedFd,
    source: Ipv6Addr,
    hop_limit: AtomicI32,
    epoch: Instant,
}

fn check(ret: libc::c_int) -> io::Result<libc::c_int> {
    if ret < 0 {
        Err(io::Error::last_os_error())
    } else {
        Ok(ret)
    }
}

fn sockaddr(addr: Ipv6Addr) -> libc::sockaddr_in6 {
    // SAFETY: sockaddr_in6 is plain old data; all-zero is a valid value.
    let mut sa: libc::sockaddr_in6 = unsafe { zeroed() };
    sa.sin6_family = libc::AF_INET6 as libc::sa_family_t;
    sa.sin6_addr.s6_addr = addr.octets();
    sa
}

impl LiveTransport {
    /// Opens a raw ICMPv6 socket bound to `source` (unbound when unspecified).
    pub fn open(source: Ipv6Addr) -> Result<Self, TransportError> {
        // SAFETY: plain socket(2) call; the descriptor is owned below.
        let raw = unsafe {
            libc::socket(
                libc::AF_INET6,
                libc::SOCK_RAW | libc::SOCK_CLOEXEC,
                libc::IPPROTO_ICMPV6,
            )
        };
        if raw < 0 {
            let e = io::Error::last_os_error();
            return Err(match e.kind() {
                io::ErrorKind::PermissionDenied => TransportError::Permission(e),
                _ => TransportError::Io(e),
            });
        }
        // SAFETY: `raw` is a fresh descriptor nobody else owns.
        let fd = unsafe { OwnedFd::from_raw_fd(raw) };
        let on: libc::c_int = 1;
        // SAFETY: option value points at a live c_int of the declared size.
        check(unsafe {
            libc::setsockopt(
                fd.as_raw_fd(),
                libc::IPPROTO_IPV6,
                libc::IPV6_RECVHOPLIMIT,
                &on as *const _ as *const libc::c_void,
                size_of::<libc::c_int>() as libc::socklen_t,
            )
        })?;
        if !source.is_unspecified() {
            let sa = sockaddr(source);
            // SAFETY: `sa` is a valid sockaddr_in6 for the duration of the call.
            check(unsafe {
                libc::bind(
                    fd.as_raw_fd(),
                    &sa as *const _ as *const libc::sockaddr,
                    size_of::<libc::sockaddr_in6>() as libc::socklen_t,
                )
            })?;
        }
        Ok(Self {
            fd,
            source,
            hop_limit: AtomicI32::new(-1),
            epoch: Instant::now(),
        })
    }

    fn set_hop_limit(&self, hops: u8) -> io::Result<()> {
        let hops = hops as libc::c_int;
        if self.hop_limit.load(Ordering::Relaxed) == hops {
            return Ok(());
        }
        // SAFETY: option value points at a live c_int of the declared size.
        check(unsafe {
            libc::setsockopt(
                self.fd.as_raw_fd(),
                libc::IPPROTO_IPV6,
                libc::IPV6_UNICAST_HOPS,
                &hops as *const _ as *const libc::c_void,
                size_of::<libc::c_int>() as libc::socklen_t,
            )
        })?;
        self.hop_limit.store(hops, Ordering::Relaxed);
        Ok(())
    }
}

impl Transport for LiveTransport {
    fn send(&self, packet: &[u8]) -> Result<(), TransportError> {
        if packet.len() < IPV6_HEADER_LEN || packet[0] >> 4 != 6 {
            return Err(TransportError::Malformed("not an IPv6 packet"));
        }
        if packet[6] != NEXT_HEADER_ICMPV6 {
            return Err(TransportError::Malformed("not ICMPv6"));
        }
        self.set_hop_limit(packet[7])?;
        let dst: [u8; 16] = packet[24..40].try_into().expect("length checked");
        let sa = sockaddr(Ipv6Addr::from(dst));
        let body = &packet[IPV6_HEADER_LEN..];
        // SAFETY: buffer and address are valid for the duration of the call.
        let n = unsafe {
            libc::sendto(
                self.fd.as_raw_fd(),
                body.as_ptr() as *const libc::c_void,
                body.len(),
                0,
                &sa as *const _ as *const libc::sockaddr,
                size_of::<libc::sockaddr_in6>() as libc::socklen_t,
            )
        };
        if n < 0 {
            return Err(io::Error::last_os_error().into());
        }
        Ok(())
    }

    fn receive(&self, timeout: Duration) -> Result<Option<Captured>, TransportError> {
        let mut pfd = libc::pollfd {
            fd: self.fd.as_raw_fd(),
            events: libc::POLLIN,
            revents: 0,
        };
        let ms = timeout.as_millis().min(i32::MAX as u128) as libc::c_int;
        // SAFETY: one valid pollfd.
        let ready = check(unsafe { libc::poll(&mut pfd, 1, ms) })?;
        if ready == 0 {
            return Ok(None);
        }

        let mut buf = vec![0u8; 65_536];
        let mut control = [0u8; 128];
        // SAFETY: zeroed POD structs, filled in by recvmsg.
        let mut peer: libc::sockaddr_in6 = unsafe { zeroed() };
        let mut iov = libc::iovec {
            iov_base: buf.as_mut_ptr() as *mut libc::c_void,
            iov_len: buf.len(),
        };
        let mut msg: libc::msghdr = unsafe { zeroed() };
        msg.msg_name = &mut peer as *mut _ as *mut libc::c_void;
        msg.msg_namelen = size_of::<libc::sockaddr_in6>() as libc::socklen_t;
        msg.msg_iov = &mut iov;
        msg.msg_iovlen = 1;
        msg.msg_control = control.as_mut_ptr() as *mut libc::c_void;
        msg.msg_controllen = control.len() as _;
        // SAFETY: msg points at buffers that outlive the call.
        let n = unsafe { libc::recvmsg(self.fd.as_raw_fd(), &mut msg, libc::MSG_DONTWAIT) };
        if n < 0 {
            let e = io::Error::last_os_error();
            if e.kind() == io::ErrorKind::WouldBlock {
                return Ok(None);
            }
            return Err(e.into());
        }
        let timestamp_ns = self.epoch.elapsed().as_nanos() as u64;
        let n = n as usize;

        let mut hop_limit = 0u8;
        // SAFETY: walking the control buffer recvmsg just filled, using the
        // libc CMSG helpers.
        unsafe {
            let mut cmsg = libc::CMSG_FIRSTHDR(&msg);
            while !cmsg.is_null() {
                if (*cmsg).cmsg_level == libc::IPPROTO_IPV6 && (*cmsg).cmsg_type == libc::IPV6_HOPLIMIT {
                    let v = std::ptr::read_unaligned(libc::CMSG_DATA(cmsg) as *const libc::c_int);
                    hop_limit = v.clamp(0, 255) as u8;
                }
                cmsg = libc::CMSG_NXTHDR(&msg, cmsg);
            }
        }

        let mut packet = Vec::with_capacity(IPV6_HEADER_LEN + n);
        packet.extend_from_slice(&[0x60, 0, 0, 0]);
        packet.extend_from_slice(&(n.min(u16::MAX as usize) as u16).to_be_bytes());
        packet.push(NEXT_HEADER_ICMPV6);
        packet.push(hop_limit);
        packet.extend_from_slice(&peer.sin6_addr.s6_addr);
        packet.extend_from_slice(&self.source.octets());
        packet.extend_from_slice(&buf[..n]);
        Ok(Some(Captured { packet, timestamp_ns }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_ipv6_before_touching_the_network() {
        // Opening may legitimately fail without CAP_NET_RAW.
        match LiveTransport::open(Ipv6Addr::UNSPECIFIED) {
            Ok(t) => {
                assert!(matches!(t.send(&[0x45; 60]), Err(TransportError::Malformed(_))));
                assert!(matches!(t.send(&[0x60; 10]), Err(TransportError::Malformed(_))));
            }
            Err(TransportError::Permission(_)) | Err(TransportError::Io(_)) => {}
            Err(e) => panic!("unexpected {e}"),
        }
    }
}
