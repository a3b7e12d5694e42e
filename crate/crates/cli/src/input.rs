// SPDX-License-Identifier: MIT OR Apache-2.0

//! CSV series input: UTF-8, '.' decimal separator, one value per line or a
//! 1-based --column of a comma-delimited file.

use std::path::Path;

use crate::CliError;

pub fn read_series(
    path: &Path,
    column: Option<usize>,
    header: bool,
) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    if let Some(0) = column {
        return Err(CliError::Tuning("--column is 1-based".to_string()));
    }
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if header && idx == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let field = match column {
            None => line,
            Some(c) => line.split(',').nth(c - 1).ok_or_else(|| {
                CliError::Parse(format!(
                    "{}: line {line_no}: no column {c}",
                    path.display()
                ))
            })?,
        };
        let value: f64 = field.trim().parse().map_err(|_| {
            CliError::Parse(format!(
                "{}: line {line_no}: '{field}' is not a number",
                path.display()
            ))
        })?;
        values.push(value);
    }
    Ok(values)
}
