//! Long-format panel CSV input.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use twfe_core::{BalanceMode, BalancedPanel, PanelBuilder};

use crate::AppError;

/// Maps CSV columns to panel roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub unit: String,
    pub time: String,
    /// Cluster column for standard errors; defaults to the unit.
    #[serde(default)]
    pub cluster: Option<String>,
    /// Numeric columns to load. `None` loads every other column.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default)]
    pub balance: BalanceMode,
}

fn default_delimiter() -> char {
    ','
}

impl Schema {
    pub fn new(unit: &str, time: &str) -> Self {
        Self {
            unit: unit.into(),
            time: time.into(),
            cluster: None,
            columns: None,
            delimiter: default_delimiter(),
            balance: BalanceMode::Strict,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadedPanel {
    pub panel: BalancedPanel,
    pub rows: usize,
    /// Units removed under [`BalanceMode::DropUnits`].
    pub dropped_units: usize,
}

pub fn load_panel(path: &Path, schema: &Schema) -> Result<BalancedPanel, AppError> {
    read_panel(path, schema).map(|l| l.panel)
}

pub fn read_panel(path: &Path, schema: &Schema) -> Result<LoadedPanel, AppError> {
    let csv_err = |source| AppError::Csv { path: path.to_path_buf(), source };
    if !schema.delimiter.is_ascii() {
        return Err(AppError::Config(format!("delimiter `{}` is not a single ASCII character", schema.delimiter)));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
    };
    let unit_col = find(&schema.unit)?;
    let time_col = find(&schema.time)?;
    let cluster_col = schema.cluster.as_deref().map(find).transpose()?;

    let variables: Vec<String> = match &schema.columns {
        Some(cols) => cols.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != unit_col && *j != time_col && Some(*j) != cluster_col)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let var_cols = variables.iter().map(|v| find(v)).collect::<Result<Vec<_>, _>>()?;

    let mut builder = PanelBuilder::new(variables.clone());
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let row = record.position().map_or(0, |p| p.line());
        let parse_err = |column: &str, message: String| AppError::Parse {
            path: path.to_path_buf(),
            row,
            column: column.to_string(),
            message,
        };
        let field = |j: usize| record.get(j).unwrap_or("");
        let unit = field(unit_col);
        if unit.is_empty() {
            return Err(parse_err(&schema.unit, "empty unit identifier".into()));
        }
        let period: i64 = field(time_col)
            .parse()
            .map_err(|_| parse_err(&schema.time, format!("`{}` is not an integer period", field(time_col))))?;
        let mut values = Vec::with_capacity(var_cols.len());
        for (name, &j) in variables.iter().zip(&var_cols) {
            let raw = field(j);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => return Err(parse_err(name, format!("`{raw}` is not a finite number"))),
            }
        }
        let cluster = cluster_col.map(field);
        builder
            .push(unit, period, cluster, values)
            .map_err(|source| AppError::Panel { path: path.to_path_buf(), source })?;
        rows += 1;
    }
    let (panel, dropped_units) =
        builder.build(schema.balance).map_err(|source| AppError::Panel { path: path.to_path_buf(), source })?;
    Ok(LoadedPanel { panel, rows, dropped_units })
}

/// Load the main panel and, if given, attach a presample panel used only for
/// pre-trend covariates.
pub fn load_with_presample(
    path: &Path,
    presample: Option<&PathBuf>,
    schema: &Schema,
) -> Result<BalancedPanel, AppError> {
    let panel = load_panel(path, schema)?;
    match presample {
        None => Ok(panel),
        Some(pre) => {
            let pre_schema = Schema { columns: None, ..schema.clone() };
            Ok(panel.with_presample(load_panel(pre, &pre_schema)?))
        }
    }
}
