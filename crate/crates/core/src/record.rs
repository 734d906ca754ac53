//! Line-delimited JSON trial files.
//!
//! A file holds one `header` line, one `cycle` line per planning cycle and a
//! closing `summary` line. No field depends on wall-clock time, so reruns
//! of the same trial produce identical bytes.

use serde::{Deserialize, Serialize};

use crate::control::{ControllerKind, CycleRecord, ThresholdOutcome, TrialRecord};
use crate::dynamics::BodyState;
use crate::error::{config_err, Result};
use crate::params::PhysParams;

pub const TRIAL_SCHEMA: &str = "svdro-trial/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub schema: String,
    pub env: String,
    pub controller: ControllerKind,
    pub seed: u64,
    pub true_params: PhysParams,
    pub initial_state: BodyState,
    pub initial_distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub outcomes: Vec<ThresholdOutcome>,
    pub final_distance: f64,
    pub final_heading_error: f64,
    pub steps: usize,
    pub cycles: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Line {
    Header(Header),
    Cycle(CycleRecord),
    Summary(Summary),
}

pub fn header_of(r: &TrialRecord) -> Header {
    Header {
        schema: TRIAL_SCHEMA.into(),
        env: r.env.clone(),
        controller: r.controller,
        seed: r.seed,
        true_params: r.true_params,
        initial_state: r.initial_state.clone(),
        initial_distance: r.initial_distance,
    }
}

pub fn summary_of(r: &TrialRecord) -> Summary {
    Summary {
        outcomes: r.outcomes.clone(),
        final_distance: r.final_distance,
        final_heading_error: r.final_heading_error,
        steps: r.steps,
        cycles: r.cycles.len(),
        failure: r.failure.clone(),
    }
}

fn to_line(line: &Line) -> Result<String> {
    serde_json::to_string(line).map_err(|e| config_err(format!("encoding trial record: {e}")))
}

/// Encodes a trial as newline-terminated JSON lines.
pub fn encode_trial(r: &TrialRecord) -> Result<String> {
    let mut out = to_line(&Line::Header(header_of(r)))?;
    out.push('\n');
    for c in &r.cycles {
        out.push_str(&to_line(&Line::Cycle(c.clone()))?);
        out.push('\n');
    }
    out.push_str(&to_line(&Line::Summary(summary_of(r)))?);
    out.push('\n');
    Ok(out)
}

/// Parses and checks a trial file: header first, summary last, cycles in
/// order in between, and a summary consistent with the cycles.
pub fn decode_trial(text: &str) -> Result<TrialRecord> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<Line>(l)
                .map_err(|e| config_err(format!("line {}: {e}", i + 1)))
        });
    let header = match lines.next().transpose()? {
        Some(Line::Header(h)) => h,
        Some(_) => return Err(config_err("first record must be the header")),
        None => return Err(config_err("empty trial file")),
    };
    if header.schema != TRIAL_SCHEMA {
        return Err(config_err(format!(
            "unsupported schema `{}`, expected `{TRIAL_SCHEMA}`",
            header.schema
        )));
    }
    let mut cycles = Vec::new();
    let mut summary = None;
    for line in lines {
        if summary.is_some() {
            return Err(config_err("records after the summary"));
        }
        match line? {
            Line::Header(_) => return Err(config_err("second header record")),
            Line::Cycle(c) => {
                if c.cycle != cycles.len() {
                    return Err(config_err(format!(
                        "cycle {} out of order (expected {})",
                        c.cycle,
                        cycles.len()
                    )));
                }
                cycles.push(c);
            }
            Line::Summary(s) => summary = Some(s),
        }
    }
    let s = summary.ok_or_else(|| config_err("missing summary record"))?;
    if s.cycles != cycles.len() {
        return Err(config_err(format!(
            "summary counts {} cycles but the file has {}",
            s.cycles,
            cycles.len()
        )));
    }
    let steps: usize = cycles.iter().map(|c| c.distances.len()).sum();
    if s.steps != steps {
        return Err(config_err(format!(
            "summary counts {} steps but the cycles hold {steps}",
            s.steps
        )));
    }
    Ok(TrialRecord {
        env: header.env,
        controller: header.controller,
        seed: header.seed,
        true_params: header.true_params,
        initial_state: header.initial_state,
        initial_distance: header.initial_distance,
        cycles,
        outcomes: s.outcomes,
        final_distance: s.final_distance,
        final_heading_error: s.final_heading_error,
        steps: s.steps,
        failure: s.failure,
    })
}
