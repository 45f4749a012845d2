use super::{read_text, write_text, IoError};
use crate::functions::Side;
use crate::measurement::{Coordinates, Measurement, MeasurementError, MeasurementKind, MeasurementSet};
use std::path::Path;

const HEADER: [&str; 8] = ["id", "kind", "element", "side", "value", "variance", "status", "coordinates"];

fn side_text(s: Option<Side>) -> &'static str {
    match s {
        Some(Side::From) => "from",
        Some(Side::To) => "to",
        None => "-",
    }
}

fn coordinates_text(c: Option<Coordinates>) -> &'static str {
    match c {
        Some(Coordinates::Polar) => "polar",
        Some(Coordinates::Rectangular) => "rect",
        None => "-",
    }
}

pub fn measurements_to_csv(set: &MeasurementSet) -> String {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    w.write_record(HEADER).expect("in-memory write");
    for m in set.measurements() {
        w.write_record([
            m.id.as_str(),
            m.kind.name(),
            &m.element.to_string(),
            side_text(m.side),
            &m.value.to_string(),
            &m.variance.to_string(),
            if m.in_service { "1" } else { "0" },
            coordinates_text(m.coordinates),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

fn field_err(line: usize, message: String) -> IoError {
    IoError::Parse { line, message }
}

/// Parses the measurement CSV. Errors carry the 1-based file line.
pub fn measurements_from_csv(text: &str) -> Result<MeasurementSet, IoError> {
    let mut r = ::csv::ReaderBuilder::new().trim(::csv::Trim::All).from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| field_err(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(field_err(1, format!("expected header '{}'", HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| field_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != HEADER.len() {
            return Err(field_err(line, format!("expected {} fields, found {}", HEADER.len(), rec.len())));
        }
        let kind: MeasurementKind = rec[1].parse().map_err(|e: MeasurementError| field_err(line, e.to_string()))?;
        let number = |k: usize| -> Result<f64, IoError> {
            rec[k]
                .parse::<f64>()
                .map_err(|_| field_err(line, format!("{} '{}' is not a number", HEADER[k], &rec[k])))
        };
        let element = rec[2]
            .parse::<usize>()
            .map_err(|_| field_err(line, format!("element '{}' is not an index", &rec[2])))?;
        let side = match &rec[3] {
            "from" => Some(Side::From),
            "to" => Some(Side::To),
            "-" | "" => None,
            s => return Err(field_err(line, format!("invalid side '{s}'"))),
        };
        let in_service = match &rec[6] {
            "1" => true,
            "0" => false,
            s => return Err(field_err(line, format!("invalid status '{s}'"))),
        };
        let coordinates = match &rec[7] {
            "polar" => Some(Coordinates::Polar),
            "rect" => Some(Coordinates::Rectangular),
            "-" | "" => None,
            s => return Err(field_err(line, format!("invalid coordinates '{s}'"))),
        };
        if kind.is_phasor() != coordinates.is_some() {
            return Err(field_err(line, "coordinates apply to phasor kinds only".into()));
        }
        let variance = number(5)?;
        if !(variance > 0.0) {
            return Err(field_err(line, format!("variance {variance} must be positive")));
        }
        out.push(Measurement {
            id: rec[0].to_string(),
            kind,
            element,
            side,
            value: number(4)?,
            variance,
            in_service,
            coordinates,
            neglect_covariance: true,
        });
    }
    Ok(MeasurementSet::new(out)?)
}

pub fn write_measurements_csv(path: &Path, set: &MeasurementSet) -> Result<(), IoError> {
    write_text(path, &measurements_to_csv(set))
}

pub fn read_measurements_csv(path: &Path) -> Result<MeasurementSet, IoError> {
    measurements_from_csv(&read_text(path)?)
}
