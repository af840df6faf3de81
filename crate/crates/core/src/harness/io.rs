//! CSV input and output for datasets and diagnostic tables.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::BinTable;

/// Float formatting used in every written table: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["y".to_string(), "d".to_string()];
    header.extend((1..=data.p()).map(|j| format!("x{j}")));
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![fmt_f64(data.y()[i]), format!("{}", data.d()[i] as u8)];
        rec.extend((0..data.p()).map(|j| fmt_f64(data.x()[(i, j)])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a `y,d,x1,...,xp` table. Row numbers in errors count data rows from 1.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let yi = col("y")?;
    let di = col("d")?;
    let p = header.iter().filter(|h| h.starts_with('x')).count();
    if p == 0 {
        return Err(Error::MissingColumn("x1".into()));
    }
    let xi: Vec<usize> = (1..=p)
        .map(|j| col(&format!("x{j}")))
        .collect::<Result<_>>()?;
    if let Some(extra) = header.iter().find(|h| {
        let known = *h == "y" || *h == "d" || h.starts_with('x');
        !known
    }) {
        return Err(Error::InvalidData(format!("unexpected column `{extra}`")));
    }
    let (mut y, mut d, mut xs) = (Vec::new(), Vec::new(), Vec::new());
    for (k, rec) in r.records().enumerate() {
        let row = k + 1;
        let rec = rec.map_err(|e| Error::Ingest {
            row,
            msg: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Ingest {
                row,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let num = |c: usize| -> Result<f64> {
            let v: f64 = rec[c].parse().map_err(|_| Error::Ingest {
                row,
                msg: format!("column `{}`: cannot parse `{}`", header[c], &rec[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::Ingest {
                    row,
                    msg: format!("column `{}` is not finite", header[c]),
                });
            }
            Ok(v)
        };
        y.push(num(yi)?);
        let dv = num(di)?;
        if dv != 0.0 && dv != 1.0 {
            return Err(Error::Ingest {
                row,
                msg: format!("d = {dv} is not 0 or 1"),
            });
        }
        d.push(dv);
        for &c in &xi {
            xs.push(num(c)?);
        }
    }
    if y.is_empty() {
        return Err(Error::Ingest {
            row: 0,
            msg: "no data rows".into(),
        });
    }
    let x = DMatrix::from_row_slice(y.len(), p, &xs);
    Dataset::new(y, d, x)
}

/// Reads a single-column score file (header optional).
pub fn read_scores_csv(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = rec.get(0).unwrap_or("");
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            Ok(_) => {
                return Err(Error::Ingest {
                    row: k + 1,
                    msg: "score is not finite".into(),
                })
            }
            Err(_) if k == 0 => {}
            Err(_) => {
                return Err(Error::Ingest {
                    row: k + 1,
                    msg: format!("cannot parse score `{field}`"),
                })
            }
        }
    }
    Ok(out)
}

pub fn write_bins_csv(path: &Path, table: &BinTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "bin",
        "lower",
        "upper",
        "count",
        "treated_count",
        "mean_prediction",
        "treated_fraction",
    ])?;
    for (b, r) in table.rows.iter().enumerate() {
        w.write_record([
            b.to_string(),
            fmt_f64(r.lower),
            fmt_f64(r.upper),
            r.count.to_string(),
            r.treated_count.to_string(),
            fmt_f64(r.mean_prediction),
            fmt_f64(r.treated_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_smd_csv(path: &Path, smd: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["covariate", "smd"])?;
    for (k, v) in smd.iter().enumerate() {
        w.write_record([format!("x{}", k + 1), fmt_f64(*v)])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
