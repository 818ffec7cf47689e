//! Ordered byte channels between the parties.
//!
//! Both backends move the same frame bytes, so a run produces byte-identical
//! transcripts whichever one carries it. The in-process backend is a pair of
//! queues; the socket backend writes frames to a `TcpStream`.

use std::io::{Read, Write};
use std::net::TcpStream;
use std::sync::mpsc;
use std::time::Instant;

use crate::error::{Error, Result};

/// One endpoint of an ordered, reliable, bidirectional byte channel carrying
/// whole frames.
pub trait Channel: Send {
    fn send(&mut self, frame_bytes: &[u8]) -> Result<()>;
    fn recv(&mut self) -> Result<Vec<u8>>;
    /// Cumulative time spent inside `send` (serialization + hand-off).
    fn send_seconds(&self) -> f64;
}

/// Queue-backed endpoint for same-process runs.
pub struct InProcessChannel {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
    send_secs: f64,
}

/// Connected pair of in-process endpoints.
pub fn in_process_pair() -> (InProcessChannel, InProcessChannel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        InProcessChannel {
            tx: tx_a,
            rx: rx_a,
            send_secs: 0.0,
        },
        InProcessChannel {
            tx: tx_b,
            rx: rx_b,
            send_secs: 0.0,
        },
    )
}

impl Channel for InProcessChannel {
    fn send(&mut self, frame_bytes: &[u8]) -> Result<()> {
        let t = Instant::now();
        self.tx
            .send(frame_bytes.to_vec())
            .map_err(|_| Error::protocol("peer hung up"))?;
        self.send_secs += t.elapsed().as_secs_f64();
        Ok(())
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        self.rx.recv().map_err(|_| Error::protocol("peer hung up"))
    }

    fn send_seconds(&self) -> f64 {
        self.send_secs
    }
}

/// Socket-backed endpoint with the same framing.
pub struct TcpChannel {
    stream: TcpStream,
    send_secs: f64,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Self {
        stream.set_nodelay(true).ok();
        TcpChannel {
            stream,
            send_secs: 0.0,
        }
    }
}

impl Channel for TcpChannel {
    fn send(&mut self, frame_bytes: &[u8]) -> Result<()> {
        let t = Instant::now();
        self.stream.write_all(frame_bytes)?;
        self.send_secs += t.elapsed().as_secs_f64();
        Ok(())
    }

    fn recv(&mut self) -> Result<Vec<u8>> {
        // Frame = 4-byte length, 1-byte kind, payload.
        let mut header = [0u8; 5];
        self.stream.read_exact(&mut header)?;
        let len = u32::from_be_bytes(header[0..4].try_into().unwrap()) as usize;
        let mut out = vec![0u8; 5 + len];
        out[..5].copy_from_slice(&header);
        self.stream.read_exact(&mut out[5..])?;
        Ok(out)
    }

    fn send_seconds(&self) -> f64 {
        self.send_secs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_process_pair_moves_frames_in_order() {
        let (mut a, mut b) = in_process_pair();
        a.send(&[0, 0, 0, 1, 7, 42]).unwrap();
        a.send(&[0, 0, 0, 0, 9]).unwrap();
        assert_eq!(b.recv().unwrap(), vec![0, 0, 0, 1, 7, 42]);
        assert_eq!(b.recv().unwrap(), vec![0, 0, 0, 0, 9]);
        b.send(&[0, 0, 0, 0, 1]).unwrap();
        assert_eq!(a.recv().unwrap(), vec![0, 0, 0, 0, 1]);
    }

    #[test]
    fn tcp_channel_reassembles_frames() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut ch = TcpChannel::new(stream);
            let got = ch.recv().unwrap();
            ch.send(&got).unwrap();
        });
        let mut ch = TcpChannel::new(TcpStream::connect(addr).unwrap());
        let frame = crate::wire::Frame {
            kind: 3,
            payload: vec![1, 2, 3, 4, 5],
        }
        .encode();
        ch.send(&frame).unwrap();
        assert_eq!(ch.recv().unwrap(), frame);
        handle.join().unwrap();
    }
}
