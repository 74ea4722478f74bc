//! XML tables (JATS/PubMed `<tr>`/`<td>`, CALS `<row>`/`<entry>`).

use super::{GridCell, GridTable, ParseError, TableFormat};
use std::collections::HashSet;

const ROW_TAGS: &[&str] = &["tr", "row"];
const CELL_TAGS: &[&str] = &["td", "th", "entry", "cell"];

/// HTML named entities that show up in exported XML but are undefined there.
const HTML_ENTITIES: &[(&str, &str)] = &[
    ("&nbsp;", "&#160;"),
    ("&plusmn;", "&#177;"),
    ("&times;", "&#215;"),
    ("&micro;", "&#181;"),
    ("&deg;", "&#176;"),
    ("&minus;", "&#8722;"),
    ("&le;", "&#8804;"),
    ("&ge;", "&#8805;"),
    ("&middot;", "&#183;"),
    ("&ndash;", "&#8211;"),
    ("&mdash;", "&#8212;"),
];

/// Parse an XML table. Row and cell elements are matched by local name, so
/// namespaced documents work too.
pub fn parse_xml_table(raw: &str) -> Result<GridTable, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut text = raw.to_string();
    for (from, to) in HTML_ENTITIES {
        if text.contains(from) {
            text = text.replace(from, to);
        }
    }
    let doc = roxmltree::Document::parse(&text).map_err(|e| ParseError::Xml {
        position: e.pos().to_string(),
        message: e.to_string(),
    })?;

    let root = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "table")
        .unwrap_or_else(|| doc.root_element());

    let rows: Vec<roxmltree::Node> = root
        .descendants()
        .filter(|n| n.is_element() && ROW_TAGS.contains(&n.tag_name().name()))
        .filter(|n| nearest_table(*n) == nearest_table_of_root(root))
        .collect();
    if rows.is_empty() {
        return Err(ParseError::NoRows);
    }

    let n_rows = rows.len();
    let mut occupied: HashSet<(usize, usize)> = HashSet::new();
    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        let mut col = 0usize;
        for node in row
            .children()
            .filter(|n| n.is_element() && CELL_TAGS.contains(&n.tag_name().name()))
        {
            while occupied.contains(&(r, col)) {
                col += 1;
            }
            let col_span = span_attr(node, "colspan").unwrap_or(1);
            let mut row_span = span_attr(node, "rowspan")
                .or_else(|| span_attr(node, "morerows").map(|m| m + 1))
                .unwrap_or(1);
            if node.attribute("morerows") == Some("0") {
                row_span = 1;
            }
            if r + row_span > n_rows {
                warnings.push(format!(
                    "rowspan at ({r},{col}) runs past the last row; clamped"
                ));
                row_span = n_rows - r;
            }
            let raw_cell = &text[node.range()];
            let inner = inner_markup(raw_cell);
            let mut cell = GridCell::from_fragment(raw_cell, inner, r, col);
            cell.row_span = row_span;
            cell.col_span = col_span;
            for rr in r..r + row_span {
                for cc in col..col + col_span {
                    occupied.insert((rr, cc));
                }
                if rr > r {
                    cells.push(GridCell::covered(rr, col, col_span));
                }
            }
            cells.push(cell);
            col += col_span;
        }
    }

    let n_cols = occupied.iter().map(|(_, c)| c + 1).max().unwrap_or(0);
    for r in 0..n_rows {
        let mut padded = false;
        for c in 0..n_cols {
            if !occupied.contains(&(r, c)) {
                cells.push(GridCell::empty(r, c));
                padded = true;
            }
        }
        if padded {
            warnings.push(format!("row {r} is shorter than the table; padded"));
        }
    }
    let mut grid = GridTable::from_cells(cells, TableFormat::Xml, warnings);
    grid.n_rows = n_rows;
    Ok(grid)
}

fn nearest_table(node: roxmltree::Node) -> Option<roxmltree::NodeId> {
    node.ancestors()
        .skip(1)
        .find(|a| a.is_element() && a.tag_name().name() == "table")
        .map(|a| a.id())
}

fn nearest_table_of_root(root: roxmltree::Node) -> Option<roxmltree::NodeId> {
    if root.tag_name().name() == "table" {
        Some(root.id())
    } else {
        None
    }
}

fn span_attr(node: roxmltree::Node, name: &str) -> Option<usize> {
    node.attribute(name)
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|v| *v >= 1)
}

/// Markup between a cell's start and end tags.
fn inner_markup(element: &str) -> &str {
    if element.trim_end().ends_with("/>") {
        return "";
    }
    let open_end = element.find('>').map_or(0, |i| i + 1);
    let close_start = element.rfind("</").unwrap_or(element.len());
    if close_start < open_end {
        return "";
    }
    &element[open_end..close_start]
}
