//! Input sources and output sinks.

use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::model::Anomaly;
use crate::wire::{frames, Frames};

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("input: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("output: {0}")]
    Io(#[from] io::Error),
}

/// Pull source of raw messages in stream order. Messages borrow from storage
/// that outlives the run.
pub trait MessageSource<'a> {
    fn next_message(&mut self) -> Option<Result<&'a [u8], TransportError>>;
}

/// In-memory sequence of messages.
#[derive(Debug, Clone)]
pub struct MemorySource<'a> {
    messages: std::slice::Iter<'a, Vec<u8>>,
}

impl<'a> MemorySource<'a> {
    pub fn new(messages: &'a [Vec<u8>]) -> Self {
        Self { messages: messages.iter() }
    }
}

impl<'a> MessageSource<'a> for MemorySource<'a> {
    fn next_message(&mut self) -> Option<Result<&'a [u8], TransportError>> {
        self.messages.next().map(|m| Ok(m.as_slice()))
    }
}

impl<'a> MessageSource<'a> for Frames<'a> {
    fn next_message(&mut self) -> Option<Result<&'a [u8], TransportError>> {
        self.next().map(Ok)
    }
}

/// A replay file held in memory; [`Replay::source`] frames it lazily.
#[derive(Debug, Clone)]
pub struct Replay {
    data: Vec<u8>,
}

impl Replay {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, TransportError> {
        Ok(Self { data: std::fs::read(path)? })
    }

    pub fn from_bytes(data: Vec<u8>) -> Self {
        Self { data }
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn source(&self) -> Frames<'_> {
        frames(&self.data)
    }
}

/// Push sink of emitted anomalies.
pub trait AnomalySink {
    fn emit(&mut self, anomaly: &Anomaly) -> Result<(), SinkError>;

    fn finish(&mut self) -> Result<(), SinkError> {
        Ok(())
    }
}

impl AnomalySink for Vec<Anomaly> {
    fn emit(&mut self, anomaly: &Anomaly) -> Result<(), SinkError> {
        self.push(*anomaly);
        Ok(())
    }
}

impl<S: AnomalySink + ?Sized> AnomalySink for &mut S {
    fn emit(&mut self, anomaly: &Anomaly) -> Result<(), SinkError> {
        (**self).emit(anomaly)
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        (**self).finish()
    }
}

/// One tab-separated line per anomaly.
#[derive(Debug)]
pub struct TextSink<W: Write> {
    out: W,
}

impl<W: Write> TextSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> AnomalySink for TextSink<W> {
    fn emit(&mut self, anomaly: &Anomaly) -> Result<(), SinkError> {
        writeln!(self.out, "{}", anomaly.to_line())?;
        Ok(())
    }

    fn finish(&mut self) -> Result<(), SinkError> {
        self.out.flush()?;
        Ok(())
    }
}

/// Counts anomalies and discards them.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink {
    pub count: u64,
}

impl AnomalySink for NullSink {
    fn emit(&mut self, _anomaly: &Anomaly) -> Result<(), SinkError> {
        self.count += 1;
        Ok(())
    }
}

/// Writes anomalies in the output file format.
pub fn write_anomalies<W: Write>(out: W, anomalies: &[Anomaly]) -> Result<(), SinkError> {
    let mut sink = TextSink::new(out);
    for a in anomalies {
        sink.emit(a)?;
    }
    sink.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_sink_lines() {
        let a = Anomaly { id: 3, machine: 1, property: 2, timestamp: 40, probability: 0.25 };
        let mut buf = Vec::new();
        write_anomalies(&mut buf, &[a]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "3\t1\t2\t40\t0.25\n");
    }

    #[test]
    fn memory_source_in_order() {
        let msgs = vec![b"a".to_vec(), b"b".to_vec()];
        let mut src = MemorySource::new(&msgs);
        assert_eq!(src.next_message().unwrap().unwrap(), b"a");
        assert_eq!(src.next_message().unwrap().unwrap(), b"b");
        assert!(src.next_message().is_none());
    }
}
