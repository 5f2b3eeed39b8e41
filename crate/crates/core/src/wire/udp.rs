use std::io;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr, SocketAddr, ToSocketAddrs, UdpSocket};
use std::time::Duration;

use thiserror::Error;

const MAX_DATAGRAM: usize = 65_536;

#[derive(Debug, Error)]
pub enum EndpointError {
    #[error("cannot resolve {0}")]
    Resolve(String),
    #[error("bind to {addr} failed: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("send to {addr} failed: {source}")]
    Send { addr: SocketAddr, source: io::Error },
    #[error("receive failed: {0}")]
    Receive(io::Error),
}

fn resolve(address: &str, port: u16) -> Result<SocketAddr, EndpointError> {
    (address, port)
        .to_socket_addrs()
        .map_err(|_| EndpointError::Resolve(format!("{address}:{port}")))?
        .next()
        .ok_or_else(|| EndpointError::Resolve(format!("{address}:{port}")))
}

/// Newest-wins admission: a sequence number at or below the highest one
/// already admitted is stale.
#[derive(Debug, Clone, Default)]
pub struct StaleFilter {
    highest: Option<u32>,
    dropped: u64,
}

impl StaleFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn admit(&mut self, seq: u32) -> bool {
        match self.highest {
            Some(h) if seq <= h => {
                self.dropped += 1;
                false
            }
            _ => {
                self.highest = Some(seq);
                true
            }
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn highest(&self) -> Option<u32> {
        self.highest
    }
}

/// Both datagram formats start with a little-endian u32 sequence number.
pub fn datagram_seq(bytes: &[u8]) -> Option<u32> {
    bytes
        .get(..4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Sending half of a link: one datagram per call.
#[derive(Debug)]
pub struct DatagramSender {
    socket: UdpSocket,
    target: SocketAddr,
}

impl DatagramSender {
    pub fn open(address: &str, port: u16) -> Result<Self, EndpointError> {
        Self::to_addr(resolve(address, port)?)
    }

    pub fn to_addr(target: SocketAddr) -> Result<Self, EndpointError> {
        let local = match target.ip() {
            IpAddr::V4(_) => SocketAddr::new(Ipv4Addr::UNSPECIFIED.into(), 0),
            IpAddr::V6(_) => SocketAddr::new(Ipv6Addr::UNSPECIFIED.into(), 0),
        };
        let socket = UdpSocket::bind(local).map_err(|source| EndpointError::Bind {
            addr: local.to_string(),
            source,
        })?;
        Ok(DatagramSender { socket, target })
    }

    pub fn send(&self, bytes: &[u8]) -> Result<(), EndpointError> {
        self.socket
            .send_to(bytes, self.target)
            .map(|_| ())
            .map_err(|source| EndpointError::Send {
                addr: self.target,
                source,
            })
    }

    pub fn target(&self) -> SocketAddr {
        self.target
    }
}

/// Receiving half of a link with the stale-drop policy applied.
///
/// Datagrams shorter than a sequence number are discarded and counted.
#[derive(Debug)]
pub struct DatagramReceiver {
    socket: UdpSocket,
    stale: StaleFilter,
    runts: u64,
    buf: Vec<u8>,
}

impl DatagramReceiver {
    /// Port 0 picks an ephemeral port; see [`DatagramReceiver::local_addr`].
    pub fn bind(address: &str, port: u16) -> Result<Self, EndpointError> {
        let addr = resolve(address, port)?;
        let socket = UdpSocket::bind(addr).map_err(|source| EndpointError::Bind {
            addr: addr.to_string(),
            source,
        })?;
        Ok(DatagramReceiver {
            socket,
            stale: StaleFilter::new(),
            runts: 0,
            buf: vec![0; MAX_DATAGRAM],
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.socket
            .local_addr()
            .expect("bound socket has an address")
    }

    pub fn stale_dropped(&self) -> u64 {
        self.stale.dropped()
    }

    pub fn runts_dropped(&self) -> u64 {
        self.runts
    }

    fn admit_current(&mut self, len: usize) -> Option<Vec<u8>> {
        let bytes = &self.buf[..len];
        match datagram_seq(bytes) {
            None => {
                self.runts += 1;
                None
            }
            Some(seq) if self.stale.admit(seq) => Some(bytes.to_vec()),
            Some(_) => None,
        }
    }

    /// Drains everything queued on the socket without blocking and returns
    /// the newest admissible datagram, or `None` if nothing new arrived.
    pub fn try_latest(&mut self) -> Result<Option<Vec<u8>>, EndpointError> {
        self.socket
            .set_nonblocking(true)
            .map_err(EndpointError::Receive)?;
        let mut latest = None;
        loop {
            match self.socket.recv_from(&mut self.buf) {
                Ok((len, _)) => {
                    if let Some(d) = self.admit_current(len) {
                        latest = Some(d);
                    }
                }
                Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                Err(e) => return Err(EndpointError::Receive(e)),
            }
        }
        Ok(latest)
    }

    /// Blocks until the next admissible datagram arrives. With a timeout,
    /// returns `None` once it elapses.
    pub fn next(&mut self, timeout: Option<Duration>) -> Result<Option<Vec<u8>>, EndpointError> {
        self.socket
            .set_nonblocking(false)
            .map_err(EndpointError::Receive)?;
        self.socket
            .set_read_timeout(timeout)
            .map_err(EndpointError::Receive)?;
        loop {
            match self.socket.recv_from(&mut self.buf) {
                Ok((len, _)) => {
                    if let Some(d) = self.admit_current(len) {
                        return Ok(Some(d));
                    }
                }
                Err(e)
                    if e.kind() == io::ErrorKind::WouldBlock
                        || e.kind() == io::ErrorKind::TimedOut =>
                {
                    return Ok(None)
                }
                Err(e) => return Err(EndpointError::Receive(e)),
            }
        }
    }
}
