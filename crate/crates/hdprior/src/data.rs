//! CSV ingestion: formula-driven design matrices with reference-level dummy
//! coding, plus current-data-anchored standardization.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::formula::Formula;
use crate::glm::{Dataset, Role};

/// Design-matrix metadata shared by every data set loaded under one formula.
#[derive(Debug, Clone)]
pub struct DesignInfo {
    pub coef_names: Vec<String>,
    /// Per design column: continuous covariate, eligible for standardization.
    /// The intercept, binary columns, and dummy columns are excluded.
    pub continuous: Vec<bool>,
}

/// Recorded transform for one standardized column, for back-transformation.
#[derive(Debug, Clone)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

struct Table {
    label: String,
    headers: Vec<String>,
    /// column-major raw cells, aligned with `headers`
    columns: Vec<Vec<String>>,
    rows: usize,
}

impl Table {
    fn column(&self, name: &str) -> Result<&[String]> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("{}: no column named {name:?}", self.label)))?;
        Ok(&self.columns[idx])
    }
}

fn read_table<R: std::io::Read>(label: &str, input: R) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("{label}: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut columns = vec![Vec::new(); headers.len()];
    let mut rows = 0usize;
    for record in reader.records() {
        let r = record.map_err(|e| Error::Data(format!("{label}: {e}")))?;
        if r.len() != headers.len() {
            return Err(Error::Data(format!(
                "{label}: row {} has {} fields, header has {}",
                rows + 1,
                r.len(),
                headers.len()
            )));
        }
        for (c, field) in r.iter().enumerate() {
            columns[c].push(field.to_string());
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data(format!("{label}: no data rows")));
    }
    Ok(Table { label: label.to_string(), headers, columns, rows })
}

fn check_missing(table: &Table, name: &str) -> Result<()> {
    let missing: Vec<usize> = table
        .column(name)?
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_empty() || *v == "NA")
        .map(|(i, _)| i + 1)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Data(format!(
            "{}: missing cell in column {name:?} at row(s) {missing:?}",
            table.label
        )))
    }
}

fn numeric_column(table: &Table, name: &str) -> Result<Vec<f64>> {
    check_missing(table, name)?;
    table
        .column(name)?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.parse().map_err(|_| {
                Error::Data(format!(
                    "{}: non-numeric value {v:?} in column {name:?} at row {}",
                    table.label,
                    i + 1
                ))
            })
        })
        .collect()
}

fn all_numeric(tables: &[Table], name: &str) -> Result<bool> {
    for t in tables {
        check_missing(t, name)?;
        if t.column(name)?.iter().any(|v| v.parse::<f64>().is_err()) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Load one CSV per data set (first is current) under a shared formula.
/// String-valued term columns are dummy-expanded against the union of levels
/// across all files, with the alphabetically first level as reference.
pub fn load_datasets<P: AsRef<Path>>(
    paths: &[P],
    formula: &Formula,
    offset_column: Option<&str>,
) -> Result<(Vec<Dataset>, DesignInfo)> {
    let tables = paths
        .iter()
        .map(|p| {
            let label = p.as_ref().display().to_string();
            let file = std::fs::File::open(p.as_ref())
                .map_err(|e| Error::Data(format!("{label}: {e}")))?;
            read_table(&label, file)
        })
        .collect::<Result<Vec<_>>>()?;
    build_datasets(&tables, formula, offset_column)
}

fn build_datasets(
    tables: &[Table],
    formula: &Formula,
    offset_column: Option<&str>,
) -> Result<(Vec<Dataset>, DesignInfo)> {
    if tables.is_empty() {
        return Err(Error::Data("no data sets given".into()));
    }

    // decide each term's coding once, from all files together
    enum Coding {
        Numeric { continuous: bool },
        Dummy { levels: Vec<String> },
    }
    let mut codings = Vec::with_capacity(formula.terms.len());
    for term in &formula.terms {
        if all_numeric(tables, term)? {
            let mut binary = true;
            for t in tables {
                binary &= numeric_column(t, term)?.iter().all(|&v| v == 0.0 || v == 1.0);
            }
            codings.push(Coding::Numeric { continuous: !binary });
        } else {
            let levels: BTreeSet<String> = tables
                .iter()
                .map(|t| t.column(term).map(|c| c.iter().cloned()))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .flatten()
                .collect();
            if levels.len() < 2 {
                return Err(Error::Data(format!(
                    "categorical column {term:?} has a single level {:?}",
                    levels.iter().next()
                )));
            }
            codings.push(Coding::Dummy { levels: levels.into_iter().collect() });
        }
    }

    let mut coef_names = Vec::new();
    let mut continuous = Vec::new();
    if formula.intercept {
        coef_names.push("intercept".to_string());
        continuous.push(false);
    }
    for (term, coding) in formula.terms.iter().zip(&codings) {
        match coding {
            Coding::Numeric { continuous: c } => {
                coef_names.push(term.clone());
                continuous.push(*c);
            }
            Coding::Dummy { levels } => {
                for level in &levels[1..] {
                    coef_names.push(format!("{term}:{level}"));
                    continuous.push(false);
                }
            }
        }
    }

    let mut datasets = Vec::with_capacity(tables.len());
    for (k, t) in tables.iter().enumerate() {
        let y = DVector::from_vec(numeric_column(t, &formula.response)?);
        let mut x = DMatrix::zeros(t.rows, coef_names.len());
        let mut col = 0usize;
        if formula.intercept {
            x.column_mut(0).fill(1.0);
            col = 1;
        }
        for (term, coding) in formula.terms.iter().zip(&codings) {
            match coding {
                Coding::Numeric { .. } => {
                    let v = numeric_column(t, term)?;
                    x.column_mut(col).copy_from_slice(&v);
                    col += 1;
                }
                Coding::Dummy { levels } => {
                    let raw = t.column(term)?;
                    for level in &levels[1..] {
                        for (i, cell) in raw.iter().enumerate() {
                            x[(i, col)] = f64::from(cell == level);
                        }
                        col += 1;
                    }
                }
            }
        }
        let offset = offset_column
            .map(|name| numeric_column(t, name).map(DVector::from_vec))
            .transpose()?;
        let role = if k == 0 { Role::Current } else { Role::Historical(k) };
        datasets.push(Dataset::new(y, x, offset, role)?);
    }
    Ok((datasets, DesignInfo { coef_names, continuous }))
}

/// Load survival records (time, 0/1 event flag, numeric covariates) from CSV.
pub fn load_survival<P: AsRef<Path>>(
    path: P,
    time_column: &str,
    event_column: &str,
    covariate_columns: &[String],
) -> Result<Vec<crate::survival::SurvivalRecord>> {
    let label = path.as_ref().display().to_string();
    let file = std::fs::File::open(path.as_ref()).map_err(|e| Error::Data(format!("{label}: {e}")))?;
    let table = read_table(&label, file)?;
    let times = numeric_column(&table, time_column)?;
    let events = numeric_column(&table, event_column)?;
    let covs: Vec<Vec<f64>> = covariate_columns
        .iter()
        .map(|c| numeric_column(&table, c))
        .collect::<Result<_>>()?;
    times
        .iter()
        .zip(&events)
        .enumerate()
        .map(|(i, (&t, &e))| {
            if e != 0.0 && e != 1.0 {
                return Err(Error::Data(format!(
                    "{label}: event indicator must be 0 or 1, got {e} at row {}",
                    i + 1
                )));
            }
            crate::survival::SurvivalRecord::new(t, e == 1.0, covs.iter().map(|c| c[i]).collect())
        })
        .collect()
}

/// Center and scale continuous columns in every data set using the CURRENT
/// data set's mean and (sample) standard deviation.
pub fn standardize(datasets: &mut [Dataset], info: &DesignInfo) -> Result<Vec<ColumnStats>> {
    let Some(current) = datasets.first() else {
        return Err(Error::Data("no data sets to standardize".into()));
    };
    let mut stats = Vec::new();
    let transforms: Vec<Option<(f64, f64)>> = (0..info.coef_names.len())
        .map(|j| {
            if !info.continuous[j] {
                return Ok(None);
            }
            let col = current.x.column(j);
            let n = col.len() as f64;
            let mean = col.sum() / n;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            if sd == 0.0 || !sd.is_finite() {
                return Err(Error::Data(format!(
                    "column {:?} is constant in the current data set",
                    info.coef_names[j]
                )));
            }
            stats.push(ColumnStats { name: info.coef_names[j].clone(), mean, sd });
            Ok(Some((mean, sd)))
        })
        .collect::<Result<_>>()?;
    for d in datasets {
        for (j, t) in transforms.iter().enumerate() {
            if let Some((mean, sd)) = t {
                for v in d.x.column_mut(j).iter_mut() {
                    *v = (*v - mean) / sd;
                }
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use approx::assert_relative_eq;

    fn table(label: &str, csv: &str) -> Table {
        read_table(label, csv.as_bytes()).unwrap()
    }

    #[test]
    fn binary_numeric_column_is_not_expanded() {
        let t = table("cur", "y,treatment\n1,0\n0,1\n1,1\n");
        let f = parse_formula("y ~ treatment").unwrap();
        let (ds, info) = build_datasets(&[t], &f, None).unwrap();
        assert_eq!(info.coef_names, ["intercept", "treatment"]);
        assert_eq!(info.continuous, [false, false]);
        assert_eq!(ds[0].x.column(1).as_slice(), [0.0, 1.0, 1.0]);
    }

    #[test]
    fn two_level_string_column_gets_one_dummy() {
        let t = table("cur", "y,race\n1,white\n0,black\n1,white\n");
        let f = parse_formula("y ~ race").unwrap();
        let (ds, info) = build_datasets(&[t], &f, None).unwrap();
        // black is the alphabetical reference level
        assert_eq!(info.coef_names, ["intercept", "race:white"]);
        assert_eq!(ds[0].x.column(1).as_slice(), [1.0, 0.0, 1.0]);
    }

    #[test]
    fn dummy_levels_union_across_datasets() {
        let cur = table("cur", "y,site\n1,a\n0,b\n");
        let hist = table("hist", "y,site\n1,c\n0,a\n");
        let f = parse_formula("y ~ site").unwrap();
        let (ds, info) = build_datasets(&[cur, hist], &f, None).unwrap();
        assert_eq!(info.coef_names, ["intercept", "site:b", "site:c"]);
        assert_eq!(ds[1].x.row(0).iter().copied().collect::<Vec<_>>(), [1.0, 0.0, 1.0]);
        assert!(matches!(ds[1].role, Role::Historical(1)));
    }

    #[test]
    fn missing_cell_names_the_row() {
        let mut rows = String::from("y,x\n");
        for i in 1..=10 {
            if i == 7 {
                rows.push_str("1,\n");
            } else {
                rows.push_str(&format!("1,{i}\n"));
            }
        }
        let t = table("cur", &rows);
        let f = parse_formula("y ~ x").unwrap();
        let e = build_datasets(&[t], &f, None).unwrap_err();
        assert!(e.to_string().contains("row(s) [7]"), "{e}");
    }

    #[test]
    fn non_numeric_response_is_rejected() {
        let t = table("cur", "y,x\nyes,1\nno,2\nyes,3\n");
        let f = parse_formula("y ~ x").unwrap();
        let e = build_datasets(&[t], &f, None).unwrap_err();
        assert!(e.to_string().contains("non-numeric"), "{e}");
    }

    #[test]
    fn standardize_uses_current_statistics() {
        let cur = table("cur", "y,age\n1,26\n0,34\n1,42\n");
        let hist = table("hist", "y,age\n1,42\n0,34\n1,34\n");
        let f = parse_formula("y ~ age").unwrap();
        let (mut ds, info) = build_datasets(&[cur, hist], &f, None).unwrap();
        let stats = standardize(&mut ds, &info).unwrap();
        assert_eq!(stats.len(), 1);
        assert_relative_eq!(stats[0].mean, 34.0);
        assert_relative_eq!(stats[0].sd, 8.0);
        // historical value 42 maps through the current transform
        assert_relative_eq!(ds[1].x[(0, 1)], 1.0);
        // intercept column untouched
        assert!(ds[0].x.column(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn standardized_input_is_a_fixed_point() {
        let cur = table("cur", "y,z\n1,-1\n0,0\n1,1\n");
        let f = parse_formula("y ~ z").unwrap();
        let (mut ds, info) = build_datasets(&[cur], &f, None).unwrap();
        let before = ds[0].x.clone();
        standardize(&mut ds, &info).unwrap();
        assert_relative_eq!(ds[0].x, before, epsilon = 1e-12);
    }

    #[test]
    fn constant_column_cannot_be_standardized() {
        let cur = table("cur", "y,z\n1,5\n0,5\n1,5\n");
        let f = parse_formula("y ~ z").unwrap();
        let (mut ds, info) = build_datasets(&[cur], &f, None).unwrap();
        let e = standardize(&mut ds, &info).unwrap_err();
        assert!(e.to_string().contains("constant"), "{e}");
    }

    #[test]
    fn offset_column_is_loaded() {
        let t = table("cur", "y,x,expo\n2,1.5,0.7\n0,2.5,1.1\n");
        let f = parse_formula("y ~ x").unwrap();
        let (ds, _) = build_datasets(&[t], &f, Some("expo")).unwrap();
        assert_eq!(ds[0].offset.as_slice(), [0.7, 1.1]);
    }
}
