use super::{GridCell, GridTable, ParseError, TableFormat};

/// Parse a pipe-delimited table: one line per row, one field per `|`.
///
/// Blank lines are skipped. Rows shorter than the widest row are padded with
/// empty cells and reported in [`GridTable::warnings`].
pub fn parse_pipe_csv_table(raw: &str) -> Result<GridTable, ParseError> {
    let lines: Vec<&str> = raw
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(ParseError::Empty);
    }
    let rows: Vec<Vec<&str>> = lines.iter().map(|l| l.split('|').collect()).collect();
    let n_cols = rows.iter().map(Vec::len).max().unwrap_or(0);

    let mut cells = Vec::with_capacity(rows.len() * n_cols);
    let mut warnings = Vec::new();
    for (r, fields) in rows.iter().enumerate() {
        for (c, field) in fields.iter().enumerate() {
            cells.push(GridCell::from_fragment(field, field, r, c));
        }
        if fields.len() < n_cols {
            warnings.push(format!(
                "row {r} has {} of {n_cols} fields; padded with empty cells",
                fields.len()
            ));
            cells.extend((fields.len()..n_cols).map(|c| GridCell::empty(r, c)));
        }
    }
    Ok(GridTable::from_cells(cells, TableFormat::PipeCsv, warnings))
}
