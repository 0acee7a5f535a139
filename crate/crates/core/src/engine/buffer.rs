use std::collections::VecDeque;

use crate::rdf::TimestampedTriple;

/// Whether a buffer holds plain input triples or a query's encoded results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BufferKind {
    Raw,
    Derived { producer: String },
}

/// `true` iff `t` lies in the half-open window `(fire_time - range, fire_time]`.
pub fn in_window(t: u64, fire_time: u64, range: u64) -> bool {
    t <= fire_time && t.saturating_add(range) > fire_time
}

/// Time-ordered buffer of one stream's elements.
#[derive(Debug, Clone)]
pub struct StreamBuffer {
    iri: String,
    kind: BufferKind,
    elements: VecDeque<TimestampedTriple>,
    watermark: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("timestamp {timestamp} is older than the watermark {watermark}")]
pub struct OutOfOrder {
    pub timestamp: u64,
    pub watermark: u64,
}

impl StreamBuffer {
    pub fn new(iri: impl Into<String>, kind: BufferKind) -> Self {
        StreamBuffer {
            iri: iri.into(),
            kind,
            elements: VecDeque::new(),
            watermark: None,
        }
    }

    pub fn iri(&self) -> &str {
        &self.iri
    }

    pub fn kind(&self) -> &BufferKind {
        &self.kind
    }

    pub fn is_derived(&self) -> bool {
        matches!(self.kind, BufferKind::Derived { .. })
    }

    /// Last ingested timestamp.
    pub fn watermark(&self) -> Option<u64> {
        self.watermark
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> impl Iterator<Item = &TimestampedTriple> {
        self.elements.iter()
    }

    pub fn push(&mut self, element: TimestampedTriple) -> Result<(), OutOfOrder> {
        if let Some(watermark) = self.watermark {
            if element.timestamp < watermark {
                return Err(OutOfOrder {
                    timestamp: element.timestamp,
                    watermark,
                });
            }
        }
        self.watermark = Some(element.timestamp);
        self.elements.push_back(element);
        Ok(())
    }

    /// Elements in `(fire_time - range, fire_time]`, in arrival order.
    pub fn window(&self, fire_time: u64, range: u64) -> impl Iterator<Item = &TimestampedTriple> {
        let lower = fire_time.saturating_sub(range);
        let exclusive_floor = fire_time >= range;
        let start = self
            .elements
            .partition_point(|e| if exclusive_floor { e.timestamp <= lower } else { false });
        let end = self.elements.partition_point(|e| e.timestamp <= fire_time);
        self.elements.range(start..end.max(start))
    }

    /// Drops elements with `timestamp <= cutoff`; returns how many.
    pub fn evict_through(&mut self, cutoff: u64) -> usize {
        let n = self.elements.partition_point(|e| e.timestamp <= cutoff);
        self.elements.drain(..n);
        n
    }
}
