//! File formats shared by the command-line front end.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::core::{AssetUniverse, Portfolio, RiskBudget};
use crate::error::{Error, Result};
use crate::linalg::mat_from_rows;
use crate::measures::DiscreteLoss;
use crate::optimizers::BlViews;

pub fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

pub fn read_universe(path: &Path) -> Result<AssetUniverse> {
    AssetUniverse::from_json(&read_text(path)?)
}

fn reader(text: &str, headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(headers).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn parse_num(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::invalid(format!("bad number '{s}'")))
}

/// Portfolio CSV with header `name,weight`.
pub fn parse_portfolio_csv(text: &str) -> Result<Portfolio> {
    let mut rdr = reader(text, true);
    let h = rdr.headers()?.clone();
    if h.iter().collect::<Vec<_>>() != ["name", "weight"] {
        return Err(Error::invalid("portfolio CSV header must be name,weight"));
    }
    let mut names = Vec::new();
    let mut w = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        names.push(rec[0].to_string());
        w.push(parse_num(&rec[1])?);
    }
    Portfolio::new(names, DVector::from_vec(w))
}

pub fn portfolio_csv(p: &Portfolio) -> String {
    let mut s = String::from("name,weight\n");
    for (n, w) in p.names.iter().zip(p.weights.iter()) {
        s += &format!("{n},{w}\n");
    }
    s
}

/// Single-column loss samples; a non-numeric first line is treated as a header.
pub fn parse_samples(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, rec) in reader(text, false).records().enumerate() {
        let rec = rec?;
        let v = rec.get(0).unwrap_or("");
        match v.parse::<f64>() {
            Ok(x) => out.push(x),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(Error::invalid(format!("bad sample '{v}'"))),
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    Ok(out)
}

/// Discrete distribution CSV with header `loss,prob`.
pub fn parse_discrete_loss(text: &str) -> Result<DiscreteLoss> {
    let mut rdr = reader(text, true);
    let h = rdr.headers()?.clone();
    if h.iter().collect::<Vec<_>>() != ["loss", "prob"] {
        return Err(Error::invalid("discrete loss CSV header must be loss,prob"));
    }
    let mut atoms = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        atoms.push((parse_num(&rec[0])?, parse_num(&rec[1])?));
    }
    DiscreteLoss::from_atoms(&atoms)
}

/// Matrix CSV whose first record is `rows,cols`.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut recs = reader(text, false).into_records();
    let dims = recs.next().ok_or_else(|| Error::invalid("empty matrix file"))??;
    if dims.len() != 2 {
        return Err(Error::invalid("matrix CSV must start with rows,cols"));
    }
    let rows = parse_num(&dims[0])? as usize;
    let cols = parse_num(&dims[1])? as usize;
    let mut values = Vec::with_capacity(rows * cols);
    for rec in recs {
        let rec = rec?;
        Error::check_dim(cols, rec.len())?;
        for v in rec.iter() {
            values.push(parse_num(v)?);
        }
    }
    Error::check_dim(rows * cols, values.len())?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut s = format!("{},{}\n", m.nrows(), m.ncols());
    for r in m.row_iter() {
        s += &r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        s.push('\n');
    }
    s
}

/// Comma-separated numbers, as given on the command line.
pub fn parse_list(s: &str) -> Result<DVector<f64>> {
    let v: Result<Vec<f64>> = s.split(',').map(|t| parse_num(t.trim())).collect();
    Ok(DVector::from_vec(v?))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetMeasure {
    Volatility,
    Es { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetFile {
    pub budgets: RiskBudget,
    pub measure: BudgetMeasure,
    pub signs: Option<DVector<f64>>,
}

#[derive(Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasureJson {
    Volatility,
    Es { alpha: f64 },
}

#[derive(Deserialize)]
struct BudgetJson {
    budgets: Vec<f64>,
    #[serde(default)]
    measure: Option<MeasureJson>,
    #[serde(default)]
    signs: Option<Vec<f64>>,
}

/// `{"budgets":[..], "measure":"volatility" | {"es":{"alpha":..}}, "signs":[±1]}`.
pub fn parse_budget_json(text: &str) -> Result<BudgetFile> {
    let j: BudgetJson = serde_json::from_str(text)?;
    let measure = match j.measure {
        None | Some(MeasureJson::Volatility) => BudgetMeasure::Volatility,
        Some(MeasureJson::Es { alpha }) => BudgetMeasure::Es { alpha },
    };
    if let Some(s) = &j.signs {
        if s.len() != j.budgets.len() || s.iter().any(|v| v.abs() != 1.0) {
            return Err(Error::invalid("signs must be ±1, one per budget"));
        }
    }
    Ok(BudgetFile {
        budgets: RiskBudget::new(DVector::from_vec(j.budgets))?,
        measure,
        signs: j.signs.map(DVector::from_vec),
    })
}

#[derive(Deserialize)]
struct ViewsJson {
    #[serde(rename = "P")]
    p: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    q: Vec<f64>,
    #[serde(rename = "Omega")]
    omega: Vec<Vec<f64>>,
    tau: f64,
}

/// `{"P":[[..]],"Q":[..],"Omega":[[..]],"tau":num}`.
pub fn parse_views_json(text: &str) -> Result<BlViews> {
    let j: ViewsJson = serde_json::from_str(text)?;
    BlViews::new(mat_from_rows(&j.p)?, DVector::from_vec(j.q), mat_from_rows(&j.omega)?, j.tau)
}
