use serde::{Deserialize, Serialize};

use super::{AgentId, Message, Run};

/// One line of a JSONL trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seq: usize,
    pub kind: String,
    pub agent: Option<AgentId>,
    pub payload: serde_json::Value,
}

impl TraceRecord {
    pub fn from_message(seq: usize, message: &Message) -> Self {
        let (kind, agent, payload) = match message {
            Message::Factual { agent, payload } => ("factual", Some(*agent), to_value(payload)),
            Message::Ledger { agent, payload } => ("ledger", Some(*agent), to_value(payload)),
            Message::Broadcast { output } => ("broadcast", None, to_value(output)),
        };
        TraceRecord {
            seq,
            kind: kind.to_string(),
            agent,
            payload,
        }
    }
}

fn to_value<T: Serialize>(value: &T) -> serde_json::Value {
    // Payload types only contain strings, arrays and single-key maps.
    serde_json::to_value(value).expect("payloads serialize infallibly")
}

pub fn trace_records(run: &Run) -> Vec<TraceRecord> {
    run.messages
        .iter()
        .enumerate()
        .map(|(i, m)| TraceRecord::from_message(i + 1, m))
        .collect()
}

/// Line-delimited JSON, one record per message, trailing newline included.
/// Keys are sorted so that traces compare byte-for-byte.
pub fn trace_jsonl(run: &Run) -> String {
    let mut out = String::new();
    for record in trace_records(run) {
        out.push_str(&to_value(&record).to_string());
        out.push('\n');
    }
    out
}
