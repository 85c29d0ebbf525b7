//! Scenario files and CSV exports.
//!
//! Scenarios are TOML:
//!
//! ```toml
//! sequence = [1, 2, 3]
//! initial_uncertainty = [0.0, 0.0, 0.0]
//!
//! [[targets]]
//! id = 1
//! x = 0.0
//! y = 0.0
//! A = 1.0
//! B = 20.0
//! r = 3.0
//! ```

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coordinator::CycleRecord;
use crate::model::{validate_scenario, Point, RawScenario, Scenario, ScenarioError, TargetSpec};
use crate::sim::TrajectorySample;

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {message}", location(.line, .column))]
    Parse {
        line: Option<usize>,
        column: Option<usize>,
        message: String,
    },
    #[error(transparent)]
    Invalid(#[from] ScenarioError),
}

fn location(line: &Option<usize>, column: &Option<usize>) -> String {
    match (line, column) {
        (Some(l), Some(c)) => format!("line {l}, column {c}"),
        _ => "scenario file".to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetEntry {
    id: u32,
    x: f64,
    y: f64,
    #[serde(rename = "A")]
    growth_rate: f64,
    #[serde(rename = "B")]
    sensing_gain: f64,
    r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    sequence: Vec<u32>,
    initial_uncertainty: Vec<f64>,
    targets: Vec<TargetEntry>,
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, LoadError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => {
                let before = &text[..span.start.min(text.len())];
                let line = before.matches('\n').count() + 1;
                let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
                (Some(line), Some(column))
            }
            None => (None, None),
        };
        LoadError::Parse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let targets = file
        .targets
        .into_iter()
        .map(|t| TargetSpec {
            id: t.id,
            position: Point::new(t.x, t.y),
            growth_rate: t.growth_rate,
            sensing_gain: t.sensing_gain,
            sensing_radius: t.r,
        })
        .collect();
    Ok(validate_scenario(RawScenario {
        targets,
        sequence: file.sequence,
        initial_uncertainty: file.initial_uncertainty,
    })?)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, LoadError> {
    let text = fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario(&text)
}

/// TOML text that [`parse_scenario`] reads back to an equal scenario.
pub fn scenario_to_toml(scenario: &Scenario) -> String {
    let raw = scenario.to_raw();
    let file = ScenarioFile {
        sequence: raw.sequence,
        initial_uncertainty: raw.initial_uncertainty,
        targets: raw
            .targets
            .iter()
            .map(|t| TargetEntry {
                id: t.id,
                x: t.position.x,
                y: t.position.y,
                growth_rate: t.growth_rate,
                sensing_gain: t.sensing_gain,
                r: t.sensing_radius,
            })
            .collect(),
    };
    toml::to_string(&file).expect("scenario serializes")
}

pub fn save_scenario(path: &Path, scenario: &Scenario) -> io::Result<()> {
    fs::write(path, scenario_to_toml(scenario))
}

/// Formats with 9 significant digits, switching to exponent notation for
/// very large or small magnitudes.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn csv_error(e: csv::Error) -> io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => e,
        other => io::Error::other(format!("{other:?}")),
    }
}

/// Columns `t,s_x,s_y,u_x,u_y,phase,R_1..R_M`.
pub fn write_trajectory_csv<W: Write>(out: W, samples: &[TrajectorySample], num_targets: usize) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["t", "s_x", "s_y", "u_x", "u_y", "phase"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=num_targets).map(|i| format!("R_{i}")));
    w.write_record(&header).map_err(csv_error)?;
    for s in samples {
        let mut row = vec![
            format_sig(s.t),
            format_sig(s.s.x),
            format_sig(s.s.y),
            format_sig(s.u.x),
            format_sig(s.u.y),
            s.phase.to_string(),
        ];
        row.extend(s.r.iter().map(|&v| format_sig(v)));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
}

/// Columns `cycle,T,grad_norm,phi_1..phi_K,psi_1..psi_K,R_resid`.
pub fn write_history_csv<W: Write>(out: W, history: &[CycleRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let k = history.first().map_or(0, |c| c.angles.len());
    let mut header = vec!["cycle".to_string(), "T".to_string(), "grad_norm".to_string()];
    header.extend((1..=k).map(|i| format!("phi_{i}")));
    header.extend((1..=k).map(|i| format!("psi_{i}")));
    header.push("R_resid".to_string());
    w.write_record(&header).map_err(csv_error)?;
    for c in history {
        let mut row = vec![c.cycle.to_string(), format_sig(c.period), format_sig(c.grad_norm)];
        row.extend(c.angles.phi.iter().chain(&c.angles.psi).map(|&v| format_sig(v)));
        row.push(format_sig(c.uncertainty_residual));
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush()
}

/// Columns `cycle,visit,target_id,cpu_seconds`. Timing data is kept out of
/// the other exports so those stay reproducible.
pub fn write_cpu_times_csv<W: Write>(out: W, history: &[CycleRecord]) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cycle", "visit", "target_id", "cpu_seconds"]).map_err(csv_error)?;
    for c in history {
        for (k, (v, secs)) in c.visits.iter().zip(&c.cpu_seconds).enumerate() {
            w.write_record([c.cycle.to_string(), (k + 1).to_string(), v.target_id.to_string(), format!("{secs:.6}")])
                .map_err(csv_error)?;
        }
    }
    w.flush()
}
