//! Labeled-data CSV: header `x_1,...,x_d,y`, labels 1-based.

use std::path::Path;

use anyhow::{bail, Context, Result};
use permlearn::LabeledSample;

pub fn to_csv(data: &[LabeledSample], dim: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (1..=dim).map(|i| format!("x_{i}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for s in data {
        let mut row: Vec<String> = s.x.iter().map(|v| v.to_string()).collect();
        row.push((s.y + 1).to_string());
        w.write_record(&row)?;
    }
    w.into_inner().context("flushing csv")
}

pub fn read_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let header = r.headers()?.clone();
    let dim = header.len().saturating_sub(1);
    let expected: Vec<String> = (1..=dim)
        .map(|i| format!("x_{i}"))
        .chain(std::iter::once("y".to_string()))
        .collect();
    if dim == 0
        || header
            .iter()
            .map(str::trim)
            .ne(expected.iter().map(String::as_str))
    {
        bail!(
            "{}: header must be x_1,...,x_d,y; found {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        );
    }
    let mut out = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let row = line + 2;
        let x = record
            .iter()
            .take(dim)
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}:{row}: bad coordinate", path.display()))?;
        let y: usize = record[dim]
            .trim()
            .parse()
            .with_context(|| format!("{}:{row}: bad label", path.display()))?;
        if y == 0 {
            bail!("{}:{row}: labels are 1-based", path.display());
        }
        out.push(
            LabeledSample::new(x, y - 1).with_context(|| format!("{}:{row}", path.display()))?,
        );
    }
    if out.is_empty() {
        bail!("{}: no labeled samples", path.display());
    }
    Ok(out)
}
