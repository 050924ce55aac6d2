//! CSV formats for datasets, bounds tables, sweeps and validation reports.
//!
//! Files carry a header line; lines starting with `#` are comments. Floats
//! are written with 17 significant digits (bounds tables with 12).

use std::io::{Read, Write};

use super::{CostRiskRow, SweepRow, TrialResult, ValidationReport};
use crate::error::DataError;
use crate::risk_bounds::RiskInterval;
use crate::sv_models::Dataset;

fn full(v: f64) -> String {
    format!("{v:.16e}")
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_f64(field: &str, line: usize, column: &str) -> Result<f64, DataError> {
    field.parse::<f64>().map_err(|_| DataError::Parse {
        line,
        message: format!("column {column:?}: cannot parse {field:?} as a number"),
    })
}

fn parse_usize(field: &str, line: usize, column: &str) -> Result<usize, DataError> {
    field.parse::<usize>().map_err(|_| DataError::Parse {
        line,
        message: format!("column {column:?}: cannot parse {field:?} as a count"),
    })
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn(name.into()))
}

/// Writes a dataset with columns `m` (or `m1, m2, …` for vector inputs) and
/// `y` when outputs are present.
pub fn write_dataset_csv<W: Write>(out: W, data: &Dataset) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let dim = data.input_dim().unwrap_or(1);
    let mut header: Vec<String> = if dim == 1 {
        vec!["m".into()]
    } else {
        (1..=dim).map(|i| format!("m{i}")).collect()
    };
    if data.outputs().is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    for (i, x) in data.inputs().iter().enumerate() {
        let mut rec: Vec<String> = x.iter().map(|&v| full(v)).collect();
        if let Some(y) = data.outputs() {
            rec.push(full(y[i]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset. Input columns are `m` or `m1, m2, …`; the `y` column is
/// optional.
pub fn read_dataset_csv<R: Read>(input: R) -> Result<Dataset, DataError> {
    let mut r = reader(input);
    let headers = r.headers()?.clone();
    let input_cols: Vec<usize> = match headers.iter().position(|h| h == "m") {
        Some(i) => vec![i],
        None => {
            let mut cols = Vec::new();
            let mut k = 1;
            while let Some(i) = headers.iter().position(|h| h == format!("m{k}")) {
                cols.push(i);
                k += 1;
            }
            if cols.is_empty() {
                return Err(DataError::MissingColumn("m".into()));
            }
            cols
        }
    };
    let y_col = headers.iter().position(|h| h == "y");
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let x = input_cols
            .iter()
            .map(|&c| parse_f64(&rec[c], line, &headers[c]))
            .collect::<Result<Vec<_>, _>>()?;
        inputs.push(x);
        if let Some(c) = y_col {
            outputs.push(parse_f64(&rec[c], line, "y")?);
        }
    }
    if inputs.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(Dataset::new(inputs, y_col.map(|_| outputs))?)
}

/// One row of a bounds table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsRow {
    pub k: usize,
    pub eps_lower: f64,
    pub eps_upper: f64,
}

pub fn write_bounds_csv<W: Write>(out: W, rows: &[RiskInterval]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k", "eps_lower", "eps_upper"])?;
    for r in rows {
        w.write_record([
            r.query.complexity().to_string(),
            format!("{:.11e}", r.lower),
            format!("{:.11e}", r.upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_bounds_csv<R: Read>(input: R) -> Result<Vec<BoundsRow>, DataError> {
    let mut r = reader(input);
    let h = r.headers()?.clone();
    let (ck, cl, cu) = (column_index(&h, "k")?, column_index(&h, "eps_lower")?, column_index(&h, "eps_upper")?);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = record_line(&rec);
        rows.push(BoundsRow {
            k: parse_usize(&rec[ck], line, "k")?,
            eps_lower: parse_f64(&rec[cl], line, "eps_lower")?,
            eps_upper: parse_f64(&rec[cu], line, "eps_upper")?,
        });
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(rows)
}

/// Failed rows are written with `NaN` in every column but `rho`.
pub fn write_sweep_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rho", "cost", "tube", "s_star", "eps_lower", "eps_upper"])?;
    for row in rows {
        match row {
            Ok(r) => w.write_record([
                full(r.rho),
                full(r.cost),
                full(r.tube),
                r.complexity.to_string(),
                full(r.eps_lower),
                full(r.eps_upper),
            ])?,
            Err(f) => w.write_record([full(f.rho), "NaN".into(), "NaN".into(), "NaN".into(), "NaN".into(), "NaN".into()])?,
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a sweep table; rows marked as failed are skipped.
pub fn read_sweep_csv<R: Read>(input: R) -> Result<Vec<CostRiskRow>, DataError> {
    let mut r = reader(input);
    let h = r.headers()?.clone();
    let names = ["rho", "cost", "tube", "s_star", "eps_lower", "eps_upper"];
    let idx = names.iter().map(|n| column_index(&h, n)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    let mut seen = 0;
    for rec in r.records() {
        let rec = rec?;
        seen += 1;
        let line = record_line(&rec);
        if &rec[idx[3]] == "NaN" {
            continue;
        }
        rows.push(CostRiskRow {
            rho: parse_f64(&rec[idx[0]], line, "rho")?,
            cost: parse_f64(&rec[idx[1]], line, "cost")?,
            tube: parse_f64(&rec[idx[2]], line, "tube")?,
            complexity: parse_usize(&rec[idx[3]], line, "s_star")?,
            eps_lower: parse_f64(&rec[idx[4]], line, "eps_lower")?,
            eps_upper: parse_f64(&rec[idx[5]], line, "eps_upper")?,
        });
    }
    if seen == 0 {
        return Err(DataError::Empty);
    }
    Ok(rows)
}

pub fn write_validation_csv<W: Write>(mut out: W, report: &ValidationReport) -> Result<(), DataError> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["trial", "s_star", "empirical_risk", "eps_lower", "eps_upper", "covered"])?;
        for t in &report.trials {
            w.write_record([
                t.trial.to_string(),
                t.complexity.to_string(),
                full(t.empirical_risk),
                full(t.eps_lower),
                full(t.eps_upper),
                (t.covered as u8).to_string(),
            ])?;
        }
        w.flush()?;
    }
    writeln!(out, "# coverage {}/{}", report.coverage_count, report.n_trials)?;
    Ok(())
}

pub fn read_validation_csv<R: Read>(input: R) -> Result<ValidationReport, DataError> {
    let mut r = reader(input);
    let h = r.headers()?.clone();
    let names = ["trial", "s_star", "empirical_risk", "eps_lower", "eps_upper", "covered"];
    let idx = names.iter().map(|n| column_index(&h, n)).collect::<Result<Vec<_>, _>>()?;
    let mut trials = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = record_line(&rec);
        let covered = match &rec[idx[5]] {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(DataError::Parse {
                    line,
                    message: format!("column \"covered\": expected 0 or 1, got {other:?}"),
                })
            }
        };
        trials.push(TrialResult {
            trial: parse_usize(&rec[idx[0]], line, "trial")?,
            complexity: parse_usize(&rec[idx[1]], line, "s_star")?,
            empirical_risk: parse_f64(&rec[idx[2]], line, "empirical_risk")?,
            eps_lower: parse_f64(&rec[idx[3]], line, "eps_lower")?,
            eps_upper: parse_f64(&rec[idx[4]], line, "eps_upper")?,
            covered,
        });
    }
    if trials.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(ValidationReport {
        coverage_count: trials.iter().filter(|t| t.covered).count(),
        n_trials: trials.len(),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::RowFailure;
    use crate::risk_bounds::epsilon_table;

    #[test]
    fn dataset_round_trip() {
        let d = Dataset::from_scalars(&[0.1, -2.5], &[1.0 / 3.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &d).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("m,y\n"));
        assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn vector_inputs_without_outputs() {
        let d = Dataset::new(vec![vec![1.0, 2.0], vec![3.0, 4.0]], None).unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &d).unwrap();
        assert_eq!(read_dataset_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn parse_error_names_line() {
        let text = "m,y\n0.5,1\nabc,2\n";
        match read_dataset_csv(text.as_bytes()) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(read_dataset_csv("m,y\n".as_bytes()), Err(DataError::Empty)));
        assert!(matches!(
            read_dataset_csv("x,y\n1,2\n".as_bytes()),
            Err(DataError::MissingColumn(_))
        ));
    }

    #[test]
    fn bounds_table_has_header_and_rows() {
        let rows = epsilon_table(10, 0.05).unwrap();
        let mut buf = Vec::new();
        write_bounds_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 12);
        let back = read_bounds_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 11);
        assert_eq!(back[10].eps_upper, 1.0);
    }

    #[test]
    fn sweep_failures_are_marked() {
        let rows: Vec<SweepRow> = vec![
            Ok(CostRiskRow {
                rho: 0.5,
                cost: 0.3,
                tube: 0.29,
                complexity: 12,
                eps_lower: 0.01,
                eps_upper: 0.2,
            }),
            Err(RowFailure {
                rho: 0.25,
                message: "x".into(),
            }),
        ];
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(2).unwrap().contains("NaN"));
        let back = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], *rows[0].as_ref().unwrap());
    }

    #[test]
    fn validation_round_trip() {
        let report = ValidationReport {
            trials: vec![TrialResult {
                trial: 0,
                complexity: 3,
                empirical_risk: 0.125,
                eps_lower: 0.01,
                eps_upper: 0.3,
                covered: true,
            }],
            coverage_count: 1,
            n_trials: 1,
        };
        let mut buf = Vec::new();
        write_validation_csv(&mut buf, &report).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("# coverage 1/1\n"));
        assert_eq!(read_validation_csv(text.as_bytes()).unwrap(), report);
    }
}
