//! Per-step records emitted by the transforms.

use serde::Serialize;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub player: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resource: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_delta: Option<Rational>,
}

impl TraceEvent {
    pub fn new(step: &str) -> Self {
        TraceEvent { step: step.to_string(), player: None, resource: None, cost_delta: None }
    }

    pub fn player(mut self, i: usize) -> Self {
        self.player = Some(i);
        self
    }

    pub fn resource(mut self, e: usize) -> Self {
        self.resource = Some(e);
        self
    }

    pub fn delta(mut self, d: Rational) -> Self {
        self.cost_delta = Some(d);
        self
    }
}
