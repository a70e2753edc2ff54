//! Reading and writing measures, couplings, plans and experiment tables.
//!
//! Measures are stored as CSV with header `position,weight` or as JSON
//! `{"atoms":[[x,w],...]}`. Couplings are stored as joint atoms in CSV with
//! header `x,y,mass` or by rows in JSON `{"rows":[{"x":..,"w":..,"kernel":[[y,w],...]}]}`.
//! Numbers are written in shortest round-trip form, so reading back a
//! written file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::DiscreteMeasure;
use crate::pipeline::{ExperimentConfig, ExperimentRow};
use crate::transport::{Coupling, TransportPlan};

/// File encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// JSON for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// What a data file holds, judged from its header or top-level key.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Measure(DiscreteMeasure),
    Coupling(Coupling),
}

pub const MEASURE_HEADER: [&str; 2] = ["position", "weight"];
pub const COUPLING_HEADER: [&str; 3] = ["x", "y", "mass"];
pub const EXPERIMENT_HEADER: [&str; 6] = ["level", "w1_mu", "w1_nu", "aw1", "fallbacks", "ms"];

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn json_err(e: serde_json::Error) -> Error {
    parse_err(e.line(), e.to_string())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Numeric CSV records below the expected header, with their line numbers.
fn csv_records(text: &str, header: &[&str]) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let found = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let values = record
            .iter()
            .zip(header)
            .map(|(field, name)| {
                field.parse::<f64>().map_err(|_| parse_err(line, format!("{name}: `{field}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(parse_err(line, format!("non-finite value {v}")));
        }
        out.push((line, values));
    }
    Ok(out)
}

pub fn parse_measure(text: &str, format: Format) -> Result<DiscreteMeasure> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(json_err),
        Format::Csv => {
            let records = csv_records(text, &MEASURE_HEADER)?;
            for (k, (line, v)) in records.iter().enumerate() {
                if v[1] < 0.0 {
                    return Err(parse_err(
                        *line,
                        format!("atom {}: negative weight {} at position {}", k + 1, v[1], v[0]),
                    ));
                }
            }
            DiscreteMeasure::new(records.into_iter().map(|(_, v)| (v[0], v[1])))
        }
    }
}

pub fn parse_coupling(text: &str, format: Format) -> Result<Coupling> {
    match format {
        Format::Json => serde_json::from_str(text).map_err(json_err),
        Format::Csv => {
            let records = csv_records(text, &COUPLING_HEADER)?;
            for (k, (line, v)) in records.iter().enumerate() {
                if v[2] <= 0.0 {
                    let kind = if v[2] < 0.0 { "negative" } else { "zero" };
                    return Err(parse_err(
                        *line,
                        format!("row {}: {kind} mass {} at (x, y) = ({}, {})", k + 1, v[2], v[0], v[1]),
                    ));
                }
            }
            Coupling::from_joint(records.into_iter().map(|(_, v)| (v[0], v[1], v[2])))
        }
    }
}

/// Parses a measure or a coupling, deciding by the CSV header or the JSON key.
pub fn parse_document(text: &str, format: Format) -> Result<Document> {
    match format {
        Format::Json => {
            let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
            if value.get("atoms").is_some() {
                Ok(Document::Measure(serde_json::from_value(value).map_err(|e| parse_err(1, e.to_string()))?))
            } else if value.get("rows").is_some() {
                Ok(Document::Coupling(serde_json::from_value(value).map_err(|e| parse_err(1, e.to_string()))?))
            } else {
                Err(parse_err(1, "expected a top-level `atoms` or `rows` key"))
            }
        }
        Format::Csv => {
            let first = text.lines().next().unwrap_or("");
            let fields: Vec<&str> = first.split(',').map(str::trim).collect();
            if fields == MEASURE_HEADER {
                parse_measure(text, format).map(Document::Measure)
            } else {
                parse_coupling(text, format).map(Document::Coupling)
            }
        }
    }
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure> {
    parse_measure(&read_text(path)?, Format::from_path(path)).map_err(|e| in_file(path, e))
}

pub fn read_coupling(path: &Path) -> Result<Coupling> {
    parse_coupling(&read_text(path)?, Format::from_path(path)).map_err(|e| in_file(path, e))
}

pub fn read_document(path: &Path) -> Result<Document> {
    parse_document(&read_text(path)?, Format::from_path(path)).map_err(|e| in_file(path, e))
}

/// Reads an experiment config; a relative coupling path is resolved against the config's directory.
pub fn read_experiment_config(path: &Path) -> Result<ExperimentConfig> {
    let mut config: ExperimentConfig =
        serde_json::from_str(&read_text(path)?).map_err(|e| in_file(path, json_err(e)))?;
    let coupling = Path::new(&config.coupling);
    if coupling.is_relative() {
        if let Some(dir) = path.parent() {
            config.coupling = dir.join(coupling).to_string_lossy().into_owned();
        }
    }
    Ok(config)
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        Error::Domain(m) => Error::Domain(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serialisable value");
    s.push('\n');
    s
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(f64::to_string).collect();
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

pub fn measure_to_string(m: &DiscreteMeasure, format: Format) -> String {
    match format {
        Format::Json => to_json(m),
        Format::Csv => csv_table(&MEASURE_HEADER, m.atoms().iter().map(|a| vec![a.position, a.weight])),
    }
}

pub fn coupling_to_string(p: &Coupling, format: Format) -> String {
    match format {
        Format::Json => to_json(p),
        Format::Csv => csv_table(&COUPLING_HEADER, p.joint_measure().into_iter().map(|(x, y, w)| vec![x, y, w])),
    }
}

#[derive(Serialize)]
struct PlanRepr<'a> {
    distance: f64,
    objective: f64,
    plan: Vec<(f64, f64, f64)>,
    inner_costs: &'a [Vec<f64>],
}

/// The outer plan of an adapted Wasserstein computation as `(x, x', mass)` triples.
pub fn plan_to_string(distance: f64, plan: &TransportPlan, inner_costs: &[Vec<f64>], format: Format) -> String {
    match format {
        Format::Json => to_json(&PlanRepr { distance, objective: plan.objective, plan: plan.triples(), inner_costs }),
        Format::Csv => csv_table(&["x", "x_prime", "mass"], plan.triples().into_iter().map(|(a, b, w)| vec![a, b, w])),
    }
}

pub fn json_string<T: Serialize>(value: &T) -> String {
    to_json(value)
}

pub fn experiment_to_string(rows: &[ExperimentRow], format: Format) -> String {
    match format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut s = EXPERIMENT_HEADER.join(",");
            s.push('\n');
            for r in rows {
                let _ = writeln!(s, "{},{},{},{},{},{}", r.level, r.w1_mu, r.w1_nu, r.aw1, r.fallbacks, r.ms);
            }
            s
        }
    }
}

/// Writes `text` to `path`, or to standard output without a path.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display()))))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_csv_round_trip() {
        let m = DiscreteMeasure::new([(-0.1, 1.0 / 3.0), (2.5e-17, 2.0 / 3.0)]).unwrap();
        let text = measure_to_string(&m, Format::Csv);
        assert!(text.starts_with("position,weight\n"));
        assert_eq!(parse_measure(&text, Format::Csv).unwrap(), m);
    }

    #[test]
    fn measure_json_round_trip() {
        let m = DiscreteMeasure::new([(0.1, 0.7), (3.0, 0.3)]).unwrap();
        let text = measure_to_string(&m, Format::Json);
        assert_eq!(text, "{\"atoms\":[[0.1,0.7],[3.0,0.3]]}\n");
        assert_eq!(parse_measure(&text, Format::Json).unwrap(), m);
    }

    #[test]
    fn coupling_round_trips() {
        let p = Coupling::from_joint([(0.0, -1.0, 0.25), (0.0, 1.0, 0.25), (1.0, 1.0, 0.5)]).unwrap();
        for f in [Format::Csv, Format::Json] {
            assert_eq!(parse_coupling(&coupling_to_string(&p, f), f).unwrap(), p);
        }
    }

    #[test]
    fn negative_mass_names_row() {
        let err = parse_coupling("x,y,mass\n0,0,0.5\n1,1,-0.5\n", Format::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{msg}");
        assert!(msg.contains("row 2") && msg.contains("negative mass"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_number_has_line() {
        let err = parse_measure("position,weight\n0,0.5\n1,abc\n", Format::Csv).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(matches!(parse_measure("x,w\n0,1\n", Format::Csv), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn json_error_has_line() {
        let err = parse_measure("{\n\"atoms\": [[0, 1],\n oops]}", Format::Json).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn document_kind_detected() {
        assert!(matches!(parse_document("position,weight\n0,1\n", Format::Csv), Ok(Document::Measure(_))));
        assert!(matches!(parse_document("x,y,mass\n0,0,1\n", Format::Csv), Ok(Document::Coupling(_))));
        assert!(matches!(parse_document("{\"rows\":[]}", Format::Json), Ok(Document::Coupling(_))));
        assert!(matches!(parse_document("{\"atoms\":[]}", Format::Json), Ok(Document::Measure(_))));
    }

    #[test]
    fn experiment_csv_header() {
        let text = experiment_to_string(&[], Format::Csv);
        assert_eq!(text, "level,w1_mu,w1_nu,aw1,fallbacks,ms\n");
    }
}
