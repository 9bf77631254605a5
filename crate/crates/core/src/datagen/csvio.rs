//! CSV layout: `x0,…,x{d−1},t,y[,mu0,…,mu{m−1}]`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::Dataset;
use crate::numkit::Matrix;
use crate::{Error, Result};

pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Floats use the shortest representation that round-trips exactly.
pub fn write_csv_to<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let d = ds.covariates();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("t".into());
    header.push("y".into());
    if ds.truth.is_some() {
        header.extend((0..ds.arms).map(|k| format!("mu{k}")));
    }
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..ds.len() {
        rec.clear();
        rec.extend(ds.x.row(i).iter().map(|v| v.to_string()));
        rec.push(ds.t[i].to_string());
        rec.push(ds.y[i].to_string());
        if let Some(truth) = &ds.truth {
            rec.extend(truth.row(i).iter().map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset. `arms` is inferred as `max(t) + 1` unless declared, in
/// which case every `t` must be below it.
pub fn read_csv(path: impl AsRef<Path>, arms: Option<usize>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let t_col = col("t").ok_or_else(|| Error::Parse {
        row: 0,
        msg: "missing column `t`".into(),
    })?;
    let y_col = col("y").ok_or_else(|| Error::Parse {
        row: 0,
        msg: "missing column `y`".into(),
    })?;
    let mut x_cols = Vec::new();
    while let Some(c) = col(&format!("x{}", x_cols.len())) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(Error::Parse {
            row: 0,
            msg: "missing covariate columns x0..".into(),
        });
    }
    let mut mu_cols = Vec::new();
    while let Some(c) = col(&format!("mu{}", mu_cols.len())) {
        mu_cols.push(c);
    }

    let d = x_cols.len();
    let mut x = Vec::new();
    let mut t = Vec::new();
    let mut y = Vec::new();
    let mut mu = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let field = |c: usize| {
            rec.get(c).ok_or_else(|| Error::Parse {
                row,
                msg: format!("missing field {}", header[c]),
            })
        };
        let float = |c: usize| -> Result<f64> {
            let s = field(c)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    row,
                    msg: format!("{} = {s:?} is not a finite number", header[c]),
                })
        };
        for &c in &x_cols {
            x.push(float(c)?);
        }
        let ts = field(t_col)?;
        let tv: usize = ts.parse().map_err(|_| Error::Parse {
            row,
            msg: format!("t = {ts:?} is not a non-negative integer"),
        })?;
        if let Some(m) = arms {
            if tv >= m {
                return Err(Error::Parse {
                    row,
                    msg: format!("t = {tv} out of range for {m} arms"),
                });
            }
        }
        t.push(tv);
        let ys = field(y_col)?;
        match ys {
            "0" => y.push(0),
            "1" => y.push(1),
            _ => {
                return Err(Error::Parse {
                    row,
                    msg: format!("y = {ys:?} is not 0 or 1"),
                })
            }
        }
        for &c in &mu_cols {
            mu.push(float(c)?);
        }
    }
    let n = t.len();
    let arms = match arms {
        Some(m) => m,
        None => t.iter().max().map_or(0, |&k| k + 1).max(mu_cols.len()),
    };
    let truth = if mu_cols.is_empty() {
        None
    } else {
        if mu_cols.len() != arms {
            return Err(Error::Parse {
                row: 0,
                msg: format!("{} truth columns for {arms} arms", mu_cols.len()),
            });
        }
        Some(Matrix::from_vec(n, arms, mu)?)
    };
    Dataset::new(Matrix::from_vec(n, d, x)?, t, y, truth, arms)
}
