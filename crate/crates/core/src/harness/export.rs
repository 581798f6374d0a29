use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::episode::{Outcome, PolicyScore, StepRecord, TwinTrace};
use crate::bridge::{
    delta_labels, BridgeAction, BridgeConfig, GroundTruthState, N_DELTA_STATES, N_REGIONS,
};
use crate::categorical::Categorical;
use crate::error::{Error, Result};
use crate::inference::ObservationBundle;
use crate::model::Belief;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    /// One CSV row per step.
    Rows,
    /// JSON with the full per-step records.
    Document,
}

impl TraceFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rows" | "csv" => Some(TraceFormat::Rows),
            "document" | "json" => Some(TraceFormat::Document),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TraceFormat::Rows => "csv",
            TraceFormat::Document => "json",
        }
    }
}

pub fn row_header() -> Vec<String> {
    let mut h: Vec<String> = ["step", "y", "delta", "restricted", "obs_od", "obs_u"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=N_REGIONS).map(|r| format!("d_omega_{r}")));
    h.extend(delta_labels().iter().map(|l| format!("d_delta_{l}")));
    h.extend(["d_epi_epi", "d_epi_nonepi", "vfe"].map(String::from));
    h.extend(
        BridgeAction::ALL
            .iter()
            .map(|a| format!("q_u_{}", a.name())),
    );
    h.extend(
        [
            "action",
            "reference_action",
            "delta_g",
            "top_policies",
            "full_g",
            "failed_next",
        ]
        .map(String::from),
    );
    h
}

fn opt(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn encode_policies(ps: &[PolicyScore]) -> String {
    ps.iter()
        .map(|p| {
            let names: Vec<&str> = p.actions.iter().map(|a| a.name()).collect();
            format!(
                "{}:{}:{}:{}:{}",
                names.join("-"),
                p.g,
                p.probability,
                p.epistemic,
                p.pragmatic
            )
        })
        .collect::<Vec<_>>()
        .join("|")
}

fn row(trace: &TwinTrace, s: &StepRecord) -> Vec<String> {
    let mut r = vec![
        s.step.to_string(),
        s.truth.y.to_string(),
        s.truth.delta.to_string(),
        s.truth.restricted.to_string(),
        opt(s.observation.get(0)),
        opt(s.observation.get(1)),
    ];
    for q in &s.posterior.factors {
        r.extend(q.probs().iter().map(|p| p.to_string()));
    }
    r.push(s.vfe.to_string());
    r.extend(s.action_posterior.probs().iter().map(|p| p.to_string()));
    r.push(s.action.name().to_string());
    r.push(s.reference_action.name().to_string());
    r.push(s.delta_g.to_string());
    r.push(encode_policies(&s.top_policies));
    r.push(
        s.full_g
            .as_ref()
            .map(|g| {
                g.iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(";")
            })
            .unwrap_or_default(),
    );
    let last = s.step + 1 == trace.len();
    r.push((last && trace.failed()).to_string());
    r
}

/// Writes a header plus one row per step; belief columns are named `d_<factor>_<state>`.
pub fn write_rows<W: Write>(trace: &TwinTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(row_header())?;
    for s in &trace.steps {
        w.write_record(row(trace, s))?;
    }
    w.flush()?;
    Ok(())
}

struct Fields<'a> {
    record: &'a csv::StringRecord,
    line: usize,
    pos: usize,
}

impl<'a> Fields<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Schema {
            path: format!("row {}/column {}", self.line, self.pos),
            message: message.into(),
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        let v = self
            .record
            .get(self.pos)
            .ok_or_else(|| self.err("missing column"))?;
        self.pos += 1;
        Ok(v)
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let v = self.next()?;
        v.parse().map_err(|_| Error::Schema {
            path: format!("row {}/column {}", self.line, self.pos - 1),
            message: format!("cannot parse {v:?}"),
        })
    }

    fn optional(&mut self) -> Result<Option<usize>> {
        if self.record.get(self.pos) == Some("") {
            self.pos += 1;
            return Ok(None);
        }
        self.parse().map(Some)
    }

    fn probs(&mut self, n: usize) -> Result<Categorical> {
        let v = (0..n)
            .map(|_| self.parse::<f64>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Categorical::from_vec_unchecked(v))
    }

    fn action(&mut self) -> Result<BridgeAction> {
        let v = self.next()?;
        BridgeAction::parse(v).ok_or_else(|| self.err(format!("unknown action {v:?}")))
    }
}

fn decode_policies(s: &str, f: &Fields) -> Result<Vec<PolicyScore>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let num = |x: &str| {
        x.parse::<f64>()
            .map_err(|_| f.err(format!("bad number {x:?}")))
    };
    s.split('|')
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').collect();
            if parts.len() != 5 {
                return Err(f.err(format!("bad policy entry {entry:?}")));
            }
            let actions = parts[0]
                .split('-')
                .map(|a| {
                    BridgeAction::parse(a).ok_or_else(|| f.err(format!("unknown action {a:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PolicyScore {
                actions,
                g: num(parts[1])?,
                probability: num(parts[2])?,
                epistemic: num(parts[3])?,
                pragmatic: num(parts[4])?,
            })
        })
        .collect()
}

/// Parses rows written by [`write_rows`]; the configuration is not part of the row format.
pub fn read_rows<R: Read>(reader: R, config: BridgeConfig) -> Result<TwinTrace> {
    let mut rd = csv::Reader::from_reader(reader);
    let header = rd.headers()?.clone();
    if header.iter().ne(row_header().iter().map(String::as_str)) {
        return Err(Error::Schema {
            path: "header".into(),
            message: "unexpected column layout".into(),
        });
    }
    let mut steps = Vec::new();
    let mut failed = false;
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let mut f = Fields {
            record: &rec,
            line: line + 1,
            pos: 0,
        };
        let step = f.parse()?;
        let truth = GroundTruthState {
            y: f.parse()?,
            delta: f.parse()?,
            restricted: f.parse()?,
        };
        let observation = ObservationBundle(vec![f.optional()?, f.optional()?]);
        let posterior = Belief::new(vec![
            f.probs(N_REGIONS)?,
            f.probs(N_DELTA_STATES)?,
            f.probs(2)?,
        ]);
        let vfe = f.parse()?;
        let action_posterior = f.probs(BridgeAction::ALL.len())?;
        let action = f.action()?;
        let reference_action = f.action()?;
        let delta_g = f.parse()?;
        let top_policies = decode_policies(f.next()?, &f)?;
        let full_g_field = f.next()?;
        let full_g = if full_g_field.is_empty() {
            None
        } else {
            Some(
                full_g_field
                    .split(';')
                    .map(|x| {
                        x.parse::<f64>()
                            .map_err(|_| f.err(format!("bad number {x:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        failed = f.parse()?;
        steps.push(StepRecord {
            step,
            truth,
            observation,
            posterior,
            vfe,
            top_policies,
            full_g,
            action_posterior,
            action,
            reference_action,
            delta_g,
        });
    }
    let outcome = if failed {
        Outcome::Failed {
            at_step: steps.len(),
        }
    } else {
        Outcome::Completed
    };
    Ok(TwinTrace {
        config,
        steps,
        outcome,
    })
}

pub fn write_document<W: Write>(trace: &TwinTrace, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, trace)?;
    writer.write_all(b"\n")?;
    Ok(())
}

pub fn read_document<R: Read>(reader: R) -> Result<TwinTrace> {
    Ok(serde_json::from_reader(reader)?)
}

/// Writes `trace` to `path` in the given format.
pub fn export_trace(trace: &TwinTrace, path: &Path, format: TraceFormat) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    match format {
        TraceFormat::Rows => write_rows(trace, file),
        TraceFormat::Document => write_document(trace, file),
    }
}

pub fn import_trace(path: &Path, format: TraceFormat, config: BridgeConfig) -> Result<TwinTrace> {
    let file = BufReader::new(File::open(path)?);
    match format {
        TraceFormat::Rows => read_rows(file, config),
        TraceFormat::Document => read_document(file),
    }
}
