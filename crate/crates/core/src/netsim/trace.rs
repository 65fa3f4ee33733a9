//! Append-only event log: one canonical-encoded event per line.

use std::fmt::Write as _;

use serde::Serialize;

use crate::claims::LogicalTime;
use crate::crypto::Digest;
use crate::wire::{WireError, WireType};
use crate::{canonical_enum, canonical_struct, wire_type};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Message handed to the messaging plane.
    Send,
    /// Message lost on a messaging link; it is retransmitted.
    Drop,
    /// Transaction delivered to the ledger's pending pool.
    Submit,
    /// Transaction lost on its way to the ledger.
    LedgerDrop,
    /// Ledger refused the transaction.
    LedgerReject,
    Confirm,
    /// Free-text annotation.
    Note,
    /// Scenario outcome summary.
    Outcome,
}

canonical_enum!(EventKind {
    Send = 0,
    Drop = 1,
    Submit = 2,
    LedgerDrop = 3,
    LedgerReject = 4,
    Confirm = 5,
    Note = 6,
    Outcome = 7,
});

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::Send => "send",
            EventKind::Drop => "drop",
            EventKind::Submit => "submit",
            EventKind::LedgerDrop => "ldrop",
            EventKind::LedgerReject => "reject",
            EventKind::Confirm => "confirm",
            EventKind::Note => "note",
            EventKind::Outcome => "outcome",
        }
    }
}

/// `payload` holds a tagged wire value, except for notes, which carry UTF-8.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub tick: LogicalTime,
    pub kind: EventKind,
    pub from: String,
    pub to: String,
    #[serde(serialize_with = "crate::claims::render::hex_vec")]
    pub payload: Vec<u8>,
}

canonical_struct!(TraceEvent {
    seq,
    tick,
    kind,
    from,
    to,
    payload
});
wire_type!(TraceEvent, 0x50);

impl TraceEvent {
    /// Name of the payload's wire type, or `note` for text.
    pub fn payload_name(&self) -> &'static str {
        if self.kind == EventKind::Note {
            return "note";
        }
        self.payload
            .first()
            .and_then(|t| crate::vectors::type_name(*t))
            .unwrap_or("unknown")
    }

    pub fn render(&self) -> String {
        let mut line = format!(
            "t={:06} #{:05} {:<7} {} -> {}",
            self.tick,
            self.seq,
            self.kind.label(),
            self.from,
            self.to
        );
        if self.kind == EventKind::Note {
            let _ = write!(line, " {}", String::from_utf8_lossy(&self.payload));
        } else {
            let _ = write!(
                line,
                " {} {}B {}",
                self.payload_name(),
                self.payload.len(),
                &Digest::of(&self.payload).to_hex()[..12]
            );
        }
        line
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    events: Vec<TraceEvent>,
}

impl Trace {
    pub fn new() -> Trace {
        Trace::default()
    }

    pub fn push(
        &mut self,
        tick: LogicalTime,
        kind: EventKind,
        from: &str,
        to: &str,
        payload: Vec<u8>,
    ) {
        let seq = self.events.len() as u64;
        self.events.push(TraceEvent {
            seq,
            tick,
            kind,
            from: from.into(),
            to: to.into(),
            payload,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Line-delimited hex of each event's canonical bytes.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&hex::encode(e.to_bytes()));
            out.push('\n');
        }
        out
    }

    pub fn render_human(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.render());
            out.push('\n');
        }
        out
    }

    /// Parses [`Trace::to_lines`] output. Blank lines are ignored.
    pub fn from_lines(text: &str) -> Result<Trace, TraceParseError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bytes = hex::decode(line).map_err(|_| TraceParseError {
                line: i + 1,
                error: None,
            })?;
            let event = TraceEvent::from_bytes(&bytes).map_err(|e| TraceParseError {
                line: i + 1,
                error: Some(e),
            })?;
            events.push(event);
        }
        Ok(Trace { events })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {}", match error { Some(e) => e.to_string(), None => "not hex".into() })]
pub struct TraceParseError {
    pub line: usize,
    pub error: Option<WireError>,
}
