use serde::{Deserialize, Serialize};

use super::episode::TwinTrace;
use crate::bridge::BridgeAction;

/// Lag of the twin behind the reference agent within one damage event.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Delay {
    Steps {
        steps: usize,
    },
    /// The trace ended first; `remaining` steps were observed after the reference action.
    Censored {
        remaining: usize,
    },
    /// The event closed without the twin ever selecting the action.
    Missed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionDelay {
    pub action: BridgeAction,
    pub event_start: usize,
    pub event_end: usize,
    pub reference_step: usize,
    pub twin_step: Option<usize>,
    pub delay: Delay,
}

impl ActionDelay {
    /// `Some(true)` when the twin acted within `bound` steps, `None` when censored too early to tell.
    pub fn within(&self, bound: usize) -> Option<bool> {
        match self.delay {
            Delay::Steps { steps } => Some(steps <= bound),
            Delay::Censored { remaining } if remaining < bound => None,
            Delay::Censored { .. } | Delay::Missed => Some(false),
        }
    }
}

/// Contiguous damaged stretches of ground truth; each closes at a twin MA or the next healthy step.
fn damage_events(trace: &TwinTrace) -> Vec<(usize, usize, bool)> {
    let mut events = Vec::new();
    let mut start: Option<usize> = None;
    for (t, s) in trace.steps.iter().enumerate() {
        if s.truth.y == 0 {
            if let Some(b) = start.take() {
                events.push((b, t - 1, true));
            }
            continue;
        }
        let b = *start.get_or_insert(t);
        if s.action == BridgeAction::MA {
            events.push((b, t, true));
            start = None;
        }
    }
    if let Some(b) = start {
        events.push((b, trace.len() - 1, false));
    }
    events
}

/// Per-event delays of the twin's first RO and MA relative to the reference agent's first.
pub fn action_delay(trace: &TwinTrace) -> Vec<ActionDelay> {
    let mut out = Vec::new();
    for (start, end, closed) in damage_events(trace) {
        let window = &trace.steps[start..=end];
        for action in [BridgeAction::RO, BridgeAction::MA] {
            let Some(reference_step) = window
                .iter()
                .find(|s| s.reference_action == action)
                .map(|s| s.step)
            else {
                continue;
            };
            let twin_step = window.iter().find(|s| s.action == action).map(|s| s.step);
            let delay = match twin_step {
                Some(t) => Delay::Steps {
                    steps: t.saturating_sub(reference_step),
                },
                None if closed => Delay::Missed,
                None => Delay::Censored {
                    remaining: trace.len() - 1 - reference_step,
                },
            };
            out.push(ActionDelay {
                action,
                event_start: start,
                event_end: end,
                reference_step,
                twin_step,
                delay,
            });
        }
    }
    out
}

/// First step strictly after `after` at which the twin selected `action`.
pub fn first_action_after(trace: &TwinTrace, action: BridgeAction, after: usize) -> Option<usize> {
    trace
        .steps
        .iter()
        .find(|s| s.step > after && s.action == action)
        .map(|s| s.step)
}
