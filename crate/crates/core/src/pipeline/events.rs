use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::DecisionArray;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "lowercase")]
pub enum EventAction {
    Continue,
    /// A single flagged tile was re-checked. A confirmed re-check escalates
    /// to an alert and carries the complete-frame reference.
    Reprocessed { tile: usize, confirmed: bool, image_ref: Option<String> },
    Alert { image_ref: String },
}

/// One record per sampled frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvent {
    pub frame: usize,
    /// Seconds since the start of the stream, `frame / fps`.
    pub timestamp: f64,
    #[serde(flatten)]
    pub action: EventAction,
    pub decisions: DecisionArray,
    /// Sub-tile verdicts of the re-check, when one ran.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sub_decisions: Option<DecisionArray>,
}

impl PipelineEvent {
    pub fn is_alert(&self) -> bool {
        matches!(self.action, EventAction::Alert { .. } | EventAction::Reprocessed { confirmed: true, .. })
    }

    pub fn alert_ref(&self) -> Option<&str> {
        match &self.action {
            EventAction::Alert { image_ref } => Some(image_ref),
            EventAction::Reprocessed { image_ref: Some(r), .. } => Some(r),
            _ => None,
        }
    }
}

pub trait EventSink {
    fn emit(&mut self, event: &PipelineEvent) -> io::Result<()>;
}

impl EventSink for Vec<PipelineEvent> {
    fn emit(&mut self, event: &PipelineEvent) -> io::Result<()> {
        self.push(event.clone());
        Ok(())
    }
}

/// One JSON object per line, flushed after every event.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> EventSink for JsonLinesSink<W> {
    fn emit(&mut self, event: &PipelineEvent) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_line_shape() {
        let e = PipelineEvent {
            frame: 40,
            timestamp: 40.0 / 60.0,
            action: EventAction::Alert { image_ref: "frame:40".into() },
            decisions: DecisionArray::from_verdicts(vec![false; 12]),
            sub_decisions: None,
        };
        let mut sink = JsonLinesSink::new(Vec::new());
        sink.emit(&e).unwrap();
        let line = String::from_utf8(sink.into_inner()).unwrap();
        assert!(line.ends_with('\n') && line.matches('\n').count() == 1);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["action"], "alert");
        assert_eq!(v["image_ref"], "frame:40");
        assert_eq!(v["decisions"]["verdicts"].as_array().unwrap().len(), 12);
        let back: PipelineEvent = serde_json::from_str(&line).unwrap();
        assert_eq!(back, e);
        assert!(back.is_alert());
    }
}
