//! Target-cell detection and the condensed single-cell view.

use super::{CellRef, GridCell, GridTable, TableFormat};

/// Marker placed next to the query cell in a condensed table.
pub const SELECT_MARKER: &str = "<select>";

/// Which cells become extraction targets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum DetectorPolicy {
    /// Every cell carrying a numeric value.
    #[default]
    NumericCells,
    /// Positions supplied by an external detector.
    ExternalList(Vec<(usize, usize)>),
}

/// Target cells in left-right, top-down order.
pub fn detect_target_cells(table: &GridTable, policy: &DetectorPolicy) -> Vec<CellRef> {
    let to_ref = |c: &GridCell| CellRef::new(c.row, c.col, c.plain_text.clone());
    match policy {
        DetectorPolicy::NumericCells => table
            .cells
            .iter()
            .filter(|c| !c.placeholder && c.numeric_value.is_some())
            .map(to_ref)
            .collect(),
        DetectorPolicy::ExternalList(positions) => {
            let mut positions = positions.clone();
            positions.sort_unstable();
            positions.dedup();
            positions
                .into_iter()
                .filter_map(|(r, c)| {
                    let cell = table.cell(r, c).filter(|cell| !cell.placeholder);
                    if cell.is_none() {
                        log::warn!(
                            "external detector position ({r},{c}) is not a cell of {}",
                            table.source_id
                        );
                    }
                    cell.map(to_ref)
                })
                .collect()
        }
    }
}

/// Serialize the header rows (0 and 1) plus the query's row, with
/// [`SELECT_MARKER`] placed right before the query cell's content.
///
/// Returns `None` when `query` is not a cell of `table`.
pub fn condense_table(table: &GridTable, query: &CellRef) -> Option<String> {
    table.cell(query.row, query.col)?;
    let mut rows = vec![0, 1, query.row];
    rows.retain(|r| *r < table.n_rows);
    rows.sort_unstable();
    rows.dedup();

    let lines: Vec<String> = rows
        .into_iter()
        .map(|r| {
            let cells = table
                .row(r)
                .filter(|c| table.format == TableFormat::Latex || !c.placeholder);
            let fields: Vec<String> = cells
                .map(|c| {
                    let selected = c.row == query.row && c.col == query.col;
                    render_cell(c, table.format, selected)
                })
                .collect();
            match table.format {
                TableFormat::Latex => format!("{} \\\\", fields.join(" & ")),
                TableFormat::Xml => format!("<tr>{}</tr>", fields.concat()),
                TableFormat::PipeCsv | TableFormat::Html => fields.join("|"),
            }
        })
        .collect();
    Some(lines.join("\n"))
}

fn render_cell(cell: &GridCell, format: TableFormat, selected: bool) -> String {
    match format {
        TableFormat::Latex => {
            let raw = cell.raw_text.trim();
            if selected {
                format!("{SELECT_MARKER} {raw}")
            } else {
                raw.to_string()
            }
        }
        TableFormat::Xml => {
            if !selected {
                return cell.raw_text.clone();
            }
            match cell.raw_text.find('>') {
                Some(i) if !cell.raw_text.trim_end().ends_with("/>") => format!(
                    "{}{SELECT_MARKER} {}",
                    &cell.raw_text[..=i],
                    &cell.raw_text[i + 1..]
                ),
                _ => format!("<td>{SELECT_MARKER} {}</td>", cell.plain_text),
            }
        }
        TableFormat::PipeCsv | TableFormat::Html => {
            if selected {
                format!("{SELECT_MARKER} {}", cell.plain_text)
            } else {
                cell.plain_text.clone()
            }
        }
    }
}
