//! `.evt` replay files: event datagram payloads concatenated back to back.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::event::{EventPacket, EVENT_BYTES};
use crate::wire::{frame_events, parse_event_header, parse_events, WireError, EVENT_HEADER_BYTES};

#[derive(Debug, Error)]
pub enum EventFileError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("truncated frame at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("bad frame at byte offset {offset}: {source}")]
    BadFrame { offset: u64, source: WireError },
}

impl EventFileError {
    pub fn offset(&self) -> Option<u64> {
        match self {
            EventFileError::Io(_) => None,
            EventFileError::Truncated { offset } | EventFileError::BadFrame { offset, .. } => {
                Some(*offset)
            }
        }
    }
}

pub struct EventFileWriter<W: Write> {
    inner: W,
}

impl<W: Write> EventFileWriter<W> {
    pub fn new(inner: W) -> Self {
        EventFileWriter { inner }
    }

    pub fn write_packet(&mut self, packet: &EventPacket) -> Result<(), EventFileError> {
        let frame = frame_events(packet)
            .map_err(|source| EventFileError::BadFrame { offset: 0, source })?;
        self.inner.write_all(&frame)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, EventFileError> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Streaming frame reader. Yields packets until end of input; after the
/// first error it yields nothing more.
pub struct EventFileReader<R: Read> {
    inner: R,
    offset: u64,
    done: bool,
}

impl<R: Read> EventFileReader<R> {
    pub fn new(inner: R) -> Self {
        EventFileReader {
            inner,
            offset: 0,
            done: false,
        }
    }

    /// Fills `buf` completely, or returns how many bytes were available
    /// before end of input.
    fn fill(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut got = 0;
        while got < buf.len() {
            match self.inner.read(&mut buf[got..]) {
                Ok(0) => break,
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e),
            }
        }
        Ok(got)
    }

    fn read_frame(&mut self) -> Result<Option<EventPacket>, EventFileError> {
        let start = self.offset;
        let mut header = [0u8; EVENT_HEADER_BYTES];
        let got = self.fill(&mut header)?;
        if got == 0 {
            return Ok(None);
        }
        if got < EVENT_HEADER_BYTES {
            return Err(EventFileError::Truncated { offset: start });
        }
        let (_, count) =
            parse_event_header(&header).map_err(|source| EventFileError::BadFrame {
                offset: start,
                source,
            })?;
        let mut frame = vec![0u8; EVENT_HEADER_BYTES + EVENT_BYTES * count];
        frame[..EVENT_HEADER_BYTES].copy_from_slice(&header);
        let body = self.fill(&mut frame[EVENT_HEADER_BYTES..])?;
        if body < count * EVENT_BYTES {
            // offset of the first event word that is incomplete
            let whole = body / EVENT_BYTES;
            let offset = start + (EVENT_HEADER_BYTES + whole * EVENT_BYTES) as u64;
            return Err(EventFileError::Truncated { offset });
        }
        self.offset = start + frame.len() as u64;
        match parse_events(&frame) {
            Ok(p) => Ok(Some(p)),
            Err(WireError::Event { index, source }) => Err(EventFileError::BadFrame {
                offset: start + (EVENT_HEADER_BYTES + index * EVENT_BYTES) as u64,
                source: WireError::Event { index, source },
            }),
            Err(source) => Err(EventFileError::BadFrame {
                offset: start,
                source,
            }),
        }
    }
}

impl<R: Read> Iterator for EventFileReader<R> {
    type Item = Result<EventPacket, EventFileError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.read_frame() {
            Ok(Some(p)) => Some(Ok(p)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

pub fn read_event_file(
    path: impl AsRef<Path>,
) -> Result<EventFileReader<BufReader<File>>, EventFileError> {
    Ok(EventFileReader::new(BufReader::new(File::open(path)?)))
}

pub fn write_event_file<'a>(
    path: impl AsRef<Path>,
    packets: impl IntoIterator<Item = &'a EventPacket>,
) -> Result<(), EventFileError> {
    let mut w = EventFileWriter::new(BufWriter::new(File::create(path)?));
    for p in packets {
        w.write_packet(p)?;
    }
    w.finish()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, Polarity};

    fn sample_packets() -> Vec<EventPacket> {
        (0..3u32)
            .map(|s| {
                let events = (0..(s as u16 + 2))
                    .map(|i| Event::new(i, i + 1, s * 100 + i as u32, Polarity::On).unwrap())
                    .collect();
                EventPacket::new(s, events)
            })
            .collect()
    }

    fn to_bytes(packets: &[EventPacket]) -> Vec<u8> {
        let mut w = EventFileWriter::new(Vec::new());
        for p in packets {
            w.write_packet(p).unwrap();
        }
        w.finish().unwrap()
    }

    #[test]
    fn roundtrip_three_packets() {
        let packets = sample_packets();
        let bytes = to_bytes(&packets);
        let back: Vec<_> = EventFileReader::new(&bytes[..])
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back, packets);
    }

    #[test]
    fn roundtrip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.evt");
        let packets = sample_packets();
        write_event_file(&path, &packets).unwrap();
        let back: Vec<_> = read_event_file(&path)
            .unwrap()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back, packets);
    }

    #[test]
    fn empty_input_is_empty_stream() {
        assert_eq!(EventFileReader::new(&[][..]).count(), 0);
    }

    #[test]
    fn truncation_mid_event_names_offset() {
        let bytes = to_bytes(&sample_packets());
        // frame 0: 8 + 16 bytes, frame 1: 8 + 24 bytes starting at 24.
        // cut inside frame 1's second event (which starts at 24 + 8 + 8 = 40).
        let cut = &bytes[..43];
        let results: Vec<_> = EventFileReader::new(cut).collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_ok());
        let err = results[1].as_ref().unwrap_err();
        assert!(matches!(err, EventFileError::Truncated { offset: 40 }));
        assert!(err.to_string().contains("40"));
    }

    #[test]
    fn truncation_mid_header() {
        let bytes = to_bytes(&sample_packets());
        let results: Vec<_> = EventFileReader::new(&bytes[..27]).collect();
        assert!(matches!(
            results[1],
            Err(EventFileError::Truncated { offset: 24 })
        ));
    }

    #[test]
    fn corrupted_event_names_offset() {
        let mut bytes = to_bytes(&sample_packets());
        // x field of frame 1, event 0 (offset 32)
        bytes[32] = 0xff;
        bytes[33] = 0x01;
        let err = EventFileReader::new(&bytes[..])
            .find_map(|r| r.err())
            .unwrap();
        assert_eq!(err.offset(), Some(32));
    }

    #[test]
    fn within_packet_order_preserved() {
        let bytes = to_bytes(&sample_packets());
        for p in EventFileReader::new(&bytes[..]) {
            assert!(p.unwrap().is_time_ordered());
        }
    }
}
