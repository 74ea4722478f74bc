//! LaTeX `tabular` parsing: rows split on `\\`, columns on `&`.

use super::{GridCell, GridTable, ParseError, TableFormat};

const TABULAR_ENVS: &[&str] = &[
    "tabular",
    "tabular*",
    "tabularx",
    "tabulary",
    "longtable",
    "array",
    "supertabular",
    "tabu",
    "NiceTabular",
];

/// Envs whose first mandatory argument is a width, not the column spec.
const WIDTH_FIRST: &[&str] = &["tabular*", "tabularx", "tabulary"];

/// Row-level commands removed before splitting: (name, braced arg count).
const RULES: &[(&str, usize)] = &[
    ("toprule", 0),
    ("midrule", 0),
    ("bottomrule", 0),
    ("hline", 0),
    ("hhline", 1),
    ("cline", 1),
    ("cmidrule", 1),
    ("specialrule", 3),
    ("addlinespace", 0),
    ("morecmidrules", 0),
    ("endhead", 0),
    ("endfirsthead", 0),
    ("endfoot", 0),
    ("endlastfoot", 0),
    ("noalign", 1),
    ("caption", 1),
    ("label", 1),
];

/// Parse a LaTeX table (a full `table`/`tabular` environment or a bare body).
pub fn parse_latex_table(raw: &str) -> Result<GridTable, ParseError> {
    if raw.trim().is_empty() {
        return Err(ParseError::Latex {
            line: 1,
            message: "empty table source".into(),
        });
    }
    let text = strip_comments(raw);
    let chars: Vec<char> = text.chars().collect();
    let lines = LineIndex::new(&chars);
    let (body_start, body_end) = locate_body(&chars, &lines)?;
    let rows = split_rows(&chars, body_start, body_end);

    let mut cells = Vec::new();
    let mut warnings = Vec::new();
    let mut row_index = 0usize;
    for (row_start, row_chars) in rows {
        let cleaned = remove_rules(&row_chars);
        if cleaned.iter().all(|c| c.is_whitespace()) {
            continue;
        }
        let mut col = 0usize;
        for field in split_fields(&cleaned) {
            let raw_field: String = field.iter().collect::<String>().trim().to_string();
            let spec = parse_spans(&raw_field);
            let mut cell = GridCell::from_fragment(&raw_field, &spec.content, row_index, col);
            cell.col_span = spec.col_span;
            if spec.row_span < 0 {
                warnings.push(format!(
                    "line {}: upward \\multirow{{{}}} treated as a single row",
                    lines.line_of(row_start),
                    spec.row_span
                ));
            } else {
                cell.row_span = spec.row_span.max(1) as usize;
            }
            col += cell.col_span;
            cells.push(cell);
        }
        row_index += 1;
    }
    if row_index == 0 {
        return Err(ParseError::Latex {
            line: lines.line_of(body_start),
            message: "no table rows found".into(),
        });
    }

    let mut grid = GridTable::from_cells(cells, TableFormat::Latex, warnings);
    pad_rows(&mut grid);
    mark_multirow_coverage(&mut grid);
    Ok(grid)
}

/// Plain-text content of the first `\caption{...}`.
pub fn latex_caption(raw: &str) -> Option<String> {
    let (start, end) = find_caption(raw)?;
    let inner = &raw[start..end];
    let open = inner.find('{')?;
    let text = super::strip_style(&inner[open + 1..inner.len() - 1]).plain_text;
    (!text.is_empty()).then_some(text)
}

/// The source with every `\caption{...}` removed.
pub fn remove_latex_caption(raw: &str) -> String {
    let mut out = raw.to_string();
    while let Some((start, end)) = find_caption(&out) {
        out.replace_range(start..end, "");
    }
    out
}

/// Byte range of `\caption[..]{..}` including the command.
fn find_caption(s: &str) -> Option<(usize, usize)> {
    let start = s.find("\\caption")?;
    let bytes = s.as_bytes();
    let mut i = start + "\\caption".len();
    if bytes.get(i) == Some(&b'*') {
        i += 1;
    }
    while bytes.get(i).is_some_and(|b| b.is_ascii_whitespace()) {
        i += 1;
    }
    if bytes.get(i) == Some(&b'[') {
        i += s[i..].find(']')? + 1;
    }
    while bytes.get(i).is_some_and(|b| b.is_ascii_whitespace()) {
        i += 1;
    }
    if bytes.get(i) != Some(&b'{') {
        return None;
    }
    let mut depth = 0usize;
    let mut escaped = false;
    for (off, c) in s[i..].char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match c {
            '\\' => escaped = true,
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some((start, i + off + 1));
                }
            }
            _ => {}
        }
    }
    None
}

fn strip_comments(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    for (i, line) in raw.split('\n').enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let mut escaped = false;
        for c in line.chars() {
            if c == '%' && !escaped {
                break;
            }
            escaped = c == '\\' && !escaped;
            out.push(c);
        }
    }
    out
}

struct LineIndex {
    newlines: Vec<usize>,
}

impl LineIndex {
    fn new(chars: &[char]) -> Self {
        Self {
            newlines: chars
                .iter()
                .enumerate()
                .filter(|(_, c)| **c == '\n')
                .map(|(i, _)| i)
                .collect(),
        }
    }

    /// 1-based line of a char offset.
    fn line_of(&self, offset: usize) -> usize {
        self.newlines.partition_point(|&n| n < offset) + 1
    }
}

fn starts_with_at(chars: &[char], at: usize, pat: &str) -> bool {
    (at..)
        .zip(pat.chars())
        .all(|(i, p)| chars.get(i) == Some(&p))
}

/// Find `\begin{env}` / `\end{env}` markers for tabular-like envs: (offset,
/// is_begin, env name, offset after the marker).
fn env_markers(chars: &[char]) -> Vec<(usize, bool, String, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\\' {
            for (kw, is_begin) in [("\\begin{", true), ("\\end{", false)] {
                if starts_with_at(chars, i, kw) {
                    let name_start = i + kw.chars().count();
                    if let Some(close) = chars[name_start..].iter().position(|c| *c == '}') {
                        let name: String = chars[name_start..name_start + close].iter().collect();
                        if TABULAR_ENVS.contains(&name.as_str()) {
                            out.push((i, is_begin, name, name_start + close + 1));
                        }
                    }
                }
            }
            i += 2;
        } else {
            i += 1;
        }
    }
    out
}

fn locate_body(chars: &[char], lines: &LineIndex) -> Result<(usize, usize), ParseError> {
    let markers = env_markers(chars);
    let Some(first) = markers.first() else {
        return Ok((0, chars.len()));
    };
    let (begin_at, is_begin, name, after) = first.clone();
    if !is_begin {
        return Err(ParseError::Latex {
            line: lines.line_of(begin_at),
            message: format!("unbalanced environment: \\end{{{name}}} without \\begin"),
        });
    }
    match markers.get(1) {
        None => Err(ParseError::Latex {
            line: lines.line_of(begin_at),
            message: format!("unbalanced environment: \\begin{{{name}}} is never closed"),
        }),
        Some((at, true, inner, _)) => Err(ParseError::Latex {
            line: lines.line_of(*at),
            message: format!("nested \\begin{{{inner}}} inside {name} is not supported"),
        }),
        Some((at, false, end_name, _)) => {
            if *end_name != name {
                return Err(ParseError::Latex {
                    line: lines.line_of(*at),
                    message: format!("\\begin{{{name}}} closed by \\end{{{end_name}}}"),
                });
            }
            let body_start = skip_env_args(chars, after, &name);
            Ok((body_start, *at))
        }
    }
}

/// Skip the optional position argument and the column spec (plus width).
fn skip_env_args(chars: &[char], mut i: usize, env: &str) -> usize {
    let skip_ws = |i: &mut usize| {
        while chars.get(*i).is_some_and(|c| c.is_whitespace()) {
            *i += 1;
        }
    };
    let skip_group = |i: &mut usize, open: char, close: char| -> bool {
        skip_ws(i);
        if chars.get(*i) != Some(&open) {
            return false;
        }
        let mut depth = 0usize;
        while let Some(&c) = chars.get(*i) {
            *i += 1;
            if c == open {
                depth += 1;
            } else if c == close {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
        }
        true
    };
    let mandatory = if WIDTH_FIRST.contains(&env) { 2 } else { 1 };
    let save = i;
    skip_group(&mut i, '[', ']');
    let mut j = i;
    for _ in 0..mandatory {
        if !skip_group(&mut j, '{', '}') {
            return save.max(i);
        }
    }
    j
}

/// Split the body on `\\` (and `\tabularnewline`) outside braces. Returns
/// each row's start offset and its characters.
fn split_rows(chars: &[char], start: usize, end: usize) -> Vec<(usize, Vec<char>)> {
    let mut rows = Vec::new();
    let mut current = Vec::new();
    let mut row_start = start;
    let mut depth = 0usize;
    let mut i = start;
    while i < end {
        let c = chars[i];
        match c {
            '{' => {
                depth += 1;
                current.push(c);
                i += 1;
            }
            '}' => {
                depth = depth.saturating_sub(1);
                current.push(c);
                i += 1;
            }
            '\\' => {
                let breaks = depth == 0
                    && (chars.get(i + 1) == Some(&'\\')
                        || starts_with_at(chars, i, "\\tabularnewline"));
                if breaks {
                    i += if chars[i + 1] == '\\' {
                        2
                    } else {
                        "\\tabularnewline".len()
                    };
                    if chars.get(i) == Some(&'*') {
                        i += 1;
                    }
                    // optional vertical space: \\[2pt]
                    let mut j = i;
                    while j < end && chars[j].is_whitespace() {
                        j += 1;
                    }
                    if j < end && chars[j] == '[' {
                        if let Some(close) = chars[j..end].iter().position(|c| *c == ']') {
                            i = j + close + 1;
                        }
                    }
                    rows.push((row_start, std::mem::take(&mut current)));
                    row_start = i;
                } else {
                    current.push(c);
                    if let Some(&n) = chars.get(i + 1) {
                        current.push(n);
                    }
                    i += 2;
                }
            }
            _ => {
                current.push(c);
                i += 1;
            }
        }
    }
    rows.push((row_start, current));
    rows
}

fn remove_rules(row: &[char]) -> Vec<char> {
    let mut out = Vec::with_capacity(row.len());
    let mut i = 0;
    'outer: while i < row.len() {
        if row[i] == '\\' {
            let name_len = row[i + 1..]
                .iter()
                .take_while(|c| c.is_ascii_alphabetic())
                .count();
            let name: String = row[i + 1..i + 1 + name_len].iter().collect();
            if let Some(&(_, args)) = RULES.iter().find(|(r, _)| *r == name) {
                let mut j = i + 1 + name_len;
                // optional (trim) and [width] arguments
                loop {
                    let mut k = j;
                    while k < row.len() && row[k].is_whitespace() {
                        k += 1;
                    }
                    let close = match row.get(k) {
                        Some('(') => ')',
                        Some('[') => ']',
                        _ => break,
                    };
                    match row[k..].iter().position(|c| *c == close) {
                        Some(p) => j = k + p + 1,
                        None => break,
                    }
                }
                for _ in 0..args {
                    while j < row.len() && row[j].is_whitespace() {
                        j += 1;
                    }
                    if row.get(j) != Some(&'{') {
                        break;
                    }
                    let mut depth = 0usize;
                    while j < row.len() {
                        match row[j] {
                            '{' => depth += 1,
                            '}' => {
                                depth -= 1;
                                if depth == 0 {
                                    j += 1;
                                    break;
                                }
                            }
                            _ => {}
                        }
                        j += 1;
                    }
                }
                i = j;
                continue 'outer;
            }
            out.push(row[i]);
            if let Some(&n) = row.get(i + 1) {
                out.push(n);
            }
            i += 2;
            continue;
        }
        out.push(row[i]);
        i += 1;
    }
    out
}

fn split_fields(row: &[char]) -> Vec<Vec<char>> {
    let mut fields = vec![Vec::new()];
    let mut depth = 0usize;
    let mut i = 0;
    while i < row.len() {
        let c = row[i];
        match c {
            '\\' => {
                fields.last_mut().unwrap().push(c);
                if let Some(&n) = row.get(i + 1) {
                    fields.last_mut().unwrap().push(n);
                }
                i += 2;
                continue;
            }
            '{' => depth += 1,
            '}' => depth = depth.saturating_sub(1),
            '&' if depth == 0 => {
                fields.push(Vec::new());
                i += 1;
                continue;
            }
            _ => {}
        }
        fields.last_mut().unwrap().push(c);
        i += 1;
    }
    fields
}

struct SpanSpec {
    content: String,
    col_span: usize,
    row_span: i64,
}

/// Peel `\multicolumn{n}{spec}{..}` and `\multirow[..]{n}[..]{w}[..]{..}`
/// wrappers off a field, in any nesting order.
fn parse_spans(field: &str) -> SpanSpec {
    let mut spec = SpanSpec {
        content: field.to_string(),
        col_span: 1,
        row_span: 1,
    };
    loop {
        let text = spec.content.trim();
        if let Some(rest) = text.strip_prefix("\\multicolumn") {
            let Some((args, tail)) = take_args(rest, 3) else {
                break;
            };
            if !tail.trim().is_empty() {
                break;
            }
            spec.col_span = args[0].trim().parse::<usize>().unwrap_or(1).max(1);
            spec.content = args[2].clone();
        } else if let Some(rest) = text.strip_prefix("\\multirow") {
            let Some((args, tail)) = take_args(rest, 3) else {
                break;
            };
            if !tail.trim().is_empty() {
                break;
            }
            spec.row_span = args[0].trim().parse::<i64>().unwrap_or(1);
            spec.content = args[2].clone();
        } else {
            break;
        }
    }
    spec
}

/// Read `n` braced arguments, skipping interleaved `[..]` optionals.
fn take_args(s: &str, n: usize) -> Option<(Vec<String>, &str)> {
    let mut rest = s;
    let mut args = Vec::with_capacity(n);
    while args.len() < n {
        rest = rest.trim_start();
        if let Some(after) = rest.strip_prefix('[') {
            rest = &after[after.find(']')? + 1..];
            continue;
        }
        let after = rest.strip_prefix('{')?;
        let mut depth = 1usize;
        let mut end = None;
        let mut escaped = false;
        for (i, c) in after.char_indices() {
            if escaped {
                escaped = false;
                continue;
            }
            match c {
                '\\' => escaped = true,
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end?;
        args.push(after[..end].to_string());
        rest = &after[end + 1..];
    }
    Some((args, rest))
}

fn pad_rows(grid: &mut GridTable) {
    let mut extra = Vec::new();
    for r in 0..grid.n_rows {
        let width: usize = grid.row(r).map(|c| c.col_span).sum();
        for c in width..grid.n_cols {
            extra.push(GridCell::empty(r, c));
        }
    }
    if !extra.is_empty() {
        grid.cells.extend(extra);
        grid.cells.sort_by_key(|c| (c.row, c.col));
    }
}

fn mark_multirow_coverage(grid: &mut GridTable) {
    let spans: Vec<(usize, usize, usize, usize)> = grid
        .cells
        .iter()
        .filter(|c| c.row_span > 1)
        .map(|c| (c.row, c.col, c.row_span, c.col_span))
        .collect();
    for (row, col, row_span, col_span) in spans {
        let last = (row + row_span).min(grid.n_rows);
        if row + row_span > grid.n_rows {
            grid.warnings.push(format!(
                "multirow at ({row},{col}) spans past the last row; clamped"
            ));
            if let Some(origin) = grid.cells.iter_mut().find(|c| c.row == row && c.col == col) {
                origin.row_span = last - row;
            }
        }
        for cell in grid.cells.iter_mut() {
            if cell.row > row && cell.row < last && cell.col >= col && cell.col < col + col_span {
                if !cell.plain_text.is_empty() {
                    grid.warnings.push(format!(
                        "cell ({},{}) under multirow ({row},{col}) has content; ignored",
                        cell.row, cell.col
                    ));
                }
                cell.placeholder = true;
                cell.numeric_value = None;
                cell.is_bold = false;
            }
        }
    }
}
