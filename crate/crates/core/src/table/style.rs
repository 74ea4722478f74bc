//! Removal of presentational markup from cell fragments.
//!
//! Recognized LaTeX wrappers (the fixed allowlist below) are unwrapped, math
//! delimiters and sub/superscript operators are dropped, a handful of symbol
//! commands become their Unicode characters, and markup tags are removed.
//! Unknown commands are kept verbatim; braces around their arguments go.

use super::numeric::first_numeric;

/// Result of [`strip_style`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stripped {
    pub plain_text: String,
    pub is_bold: bool,
}

/// One-argument wrappers whose content is bold.
const BOLD_WRAPPERS: &[&str] = &["textbf", "mathbf", "boldsymbol", "bm", "pmb", "mathbfit"];

/// One-argument wrappers whose content is kept as is.
const WRAPPERS: &[&str] = &[
    "textit",
    "emph",
    "underline",
    "uline",
    "textsc",
    "texttt",
    "textrm",
    "textsf",
    "textmd",
    "textup",
    "textsl",
    "textnormal",
    "mathit",
    "mathrm",
    "mathsf",
    "mathtt",
    "mathcal",
    "mathbb",
    "mathnormal",
    "text",
    "mbox",
    "hbox",
    "textsubscript",
    "textsuperscript",
    "ensuremath",
    "overline",
    "underbar",
    "widetilde",
    "tilde",
    "hat",
    "bar",
    "textup",
    "makecell",
    "shortstack",
];

/// Switches that restyle the rest of the group; bold ones are listed first.
const BOLD_DECLARATIONS: &[&str] = &["bf", "bfseries", "boldmath"];
const DECLARATIONS: &[&str] = &[
    "it",
    "itshape",
    "em",
    "sl",
    "slshape",
    "sc",
    "scshape",
    "rm",
    "rmfamily",
    "sf",
    "sffamily",
    "tt",
    "ttfamily",
    "md",
    "mdseries",
    "normalfont",
    "upshape",
    "unboldmath",
    "tiny",
    "scriptsize",
    "footnotesize",
    "small",
    "normalsize",
    "large",
    "Large",
    "LARGE",
    "huge",
    "Huge",
    "centering",
    "raggedright",
    "raggedleft",
    "displaystyle",
    "textstyle",
    "scriptstyle",
    "left",
    "right",
    "big",
    "Big",
    "bigl",
    "bigr",
    "Bigl",
    "Bigr",
    "quad",
    "qquad",
    "hfill",
    "noindent",
    "relax",
    "strut",
    "null",
    "nobreak",
    "xspace",
];

/// Commands dropped together with their braced arguments: (name, arg count).
const DROPPED: &[(&str, usize)] = &[
    ("color", 1),
    ("cellcolor", 1),
    ("rowcolor", 1),
    ("columncolor", 1),
    ("label", 1),
    ("cite", 1),
    ("citep", 1),
    ("citet", 1),
    ("ref", 1),
    ("eqref", 1),
    ("footnote", 1),
    ("tnote", 1),
    ("vspace", 1),
    ("hspace", 1),
    ("phantom", 1),
    ("hphantom", 1),
    ("vphantom", 1),
    ("rule", 2),
];

/// Wrappers whose last argument is content and earlier ones are dropped.
const LAST_ARG_WRAPPERS: &[(&str, usize)] = &[
    ("textcolor", 2),
    ("colorbox", 2),
    ("href", 2),
    ("raisebox", 2),
    ("scalebox", 2),
    ("fcolorbox", 3),
    ("resizebox", 3),
];

fn symbol(name: &str) -> Option<&'static str> {
    Some(match name {
        "pm" | "textpm" => "±",
        "mp" => "∓",
        "times" | "texttimes" => "×",
        "approx" => "≈",
        "sim" | "textasciitilde" => "~",
        "leq" | "le" => "≤",
        "geq" | "ge" => "≥",
        "lt" | "textless" => "<",
        "gt" | "textgreater" => ">",
        "neq" | "ne" => "≠",
        "cdot" => "·",
        "dagger" | "textdagger" => "†",
        "ddagger" | "textdaggerdbl" => "‡",
        "ast" => "*",
        "star" => "⋆",
        "degree" | "textdegree" => "°",
        "circ" => "∘",
        "textminus" => "−",
        "infty" => "∞",
        "ldots" | "dots" | "cdots" => "...",
        "checkmark" | "cmark" => "✓",
        "xmark" => "✗",
        "uparrow" => "↑",
        "downarrow" => "↓",
        "rightarrow" | "to" => "→",
        "leftarrow" => "←",
        "alpha" => "α",
        "beta" => "β",
        "gamma" => "γ",
        "delta" => "δ",
        "Delta" => "Δ",
        "epsilon" => "ε",
        "theta" => "θ",
        "lambda" => "λ",
        "mu" | "textmu" => "μ",
        "sigma" => "σ",
        "tau" => "τ",
        "textbackslash" => "\\",
        "textbar" => "|",
        "S" => "§",
        _ => return None,
    })
}

fn entity(name: &str) -> Option<char> {
    if let Some(num) = name.strip_prefix('#') {
        let code = match num.strip_prefix(['x', 'X']) {
            Some(hex) => u32::from_str_radix(hex, 16).ok()?,
            None => num.parse().ok()?,
        };
        return char::from_u32(code);
    }
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" | "thinsp" | "ensp" | "emsp" => ' ',
        "plusmn" => '±',
        "minus" => '−',
        "times" => '×',
        "le" => '≤',
        "ge" => '≥',
        "micro" => 'µ',
        "deg" => '°',
        "middot" => '·',
        _ => return None,
    })
}

/// Strip recognized style markup from a cell fragment.
///
/// `is_bold` reports whether a bold wrapper (`\textbf`, `\bf`, `<b>`,
/// `<strong>`, `<bold>`) covers the first numeric token; for cells without a
/// number it reports whether all visible text is bold.
pub fn strip_style(raw_text: &str) -> Stripped {
    let mut s = Stripper {
        chars: raw_text.chars().collect(),
        pos: 0,
        out: Vec::new(),
        html_bold: 0,
        math: false,
    };
    s.group(false, false);
    finish(s.out)
}

fn finish(out: Vec<(char, bool)>) -> Stripped {
    // collapse whitespace runs and trim, keeping bold flags aligned
    let mut chars: Vec<(char, bool)> = Vec::with_capacity(out.len());
    for (c, b) in out {
        if c.is_whitespace() {
            if chars.last().is_some_and(|(p, _)| *p != ' ') {
                chars.push((' ', b));
            }
        } else {
            chars.push((c, b));
        }
    }
    while chars.last().is_some_and(|(c, _)| *c == ' ') {
        chars.pop();
    }
    let plain_text: String = chars.iter().map(|(c, _)| *c).collect();
    let is_bold = match first_numeric(&plain_text) {
        Some(m) => chars[m.start..m.end]
            .iter()
            .any(|(c, b)| *b && c.is_ascii_digit()),
        None => {
            let mut visible = chars.iter().filter(|(c, _)| *c != ' ').peekable();
            visible.peek().is_some() && visible.all(|(_, b)| *b)
        }
    };
    Stripped {
        plain_text,
        is_bold,
    }
}

struct Stripper {
    chars: Vec<char>,
    pos: usize,
    out: Vec<(char, bool)>,
    html_bold: usize,
    math: bool,
}

impl Stripper {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn emit(&mut self, c: char, bold: bool) {
        self.out.push((c, bold || self.html_bold > 0));
    }

    fn emit_str(&mut self, s: &str, bold: bool) {
        for c in s.chars() {
            self.emit(c, bold);
        }
    }

    /// Process until end of input, or until the matching `}` when `braced`.
    fn group(&mut self, mut bold: bool, braced: bool) {
        while let Some(c) = self.peek() {
            match c {
                '}' if braced => {
                    self.pos += 1;
                    return;
                }
                '{' => {
                    self.pos += 1;
                    self.group(bold, true);
                }
                '}' => self.pos += 1,
                '\\' => {
                    self.pos += 1;
                    if let Some(declared) = self.command(bold) {
                        bold = declared;
                    }
                }
                '$' => {
                    self.pos += 1;
                    self.math = !self.math;
                }
                '^' | '_' if self.math => self.pos += 1,
                '~' => {
                    self.pos += 1;
                    self.emit(' ', bold);
                }
                '<' if self.tag_ahead() => self.tag(),
                '&' => {
                    if !self.entity(bold) {
                        self.pos += 1;
                        self.emit('&', bold);
                    }
                }
                _ => {
                    self.pos += 1;
                    self.emit(c, bold);
                }
            }
        }
    }

    /// Handle a command after its backslash. Returns a new bold state when the
    /// command was a declaration.
    fn command(&mut self, bold: bool) -> Option<bool> {
        let Some(first) = self.peek() else {
            self.emit('\\', bold);
            return None;
        };
        if !first.is_ascii_alphabetic() {
            self.pos += 1;
            match first {
                '%' | '&' | '_' | '#' | '$' | '{' | '}' => self.emit(first, bold),
                ',' | ';' | ':' | ' ' | '\\' => self.emit(' ', bold),
                '!' | '/' => {}
                '(' | '[' => self.math = true,
                ')' | ']' => self.math = false,
                other => {
                    self.emit('\\', bold);
                    self.emit(other, bold);
                }
            }
            return None;
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        // starred variants behave like the plain command
        if self.peek() == Some('*') && name != "ast" {
            self.pos += 1;
        }

        if BOLD_DECLARATIONS.contains(&name.as_str()) {
            return Some(true);
        }
        if DECLARATIONS.contains(&name.as_str()) {
            return Some(bold && name != "normalfont" && name != "unboldmath");
        }
        if BOLD_WRAPPERS.contains(&name.as_str()) {
            self.skip_optional();
            self.argument(true);
            return None;
        }
        if WRAPPERS.contains(&name.as_str()) {
            self.skip_optional();
            self.argument(bold);
            return None;
        }
        if let Some(&(_, n)) = DROPPED.iter().find(|(d, _)| *d == name) {
            self.skip_optional();
            for _ in 0..n {
                self.skip_argument();
            }
            return None;
        }
        if let Some(&(_, n)) = LAST_ARG_WRAPPERS.iter().find(|(d, _)| *d == name) {
            self.skip_optional();
            for _ in 0..n - 1 {
                self.skip_argument();
                self.skip_optional();
            }
            self.argument(bold);
            return None;
        }
        if let Some(sym) = symbol(&name) {
            self.emit_str(sym, bold);
            return None;
        }
        // unknown: keep the command name, its braces are handled by the group
        self.emit('\\', bold);
        self.emit_str(&name, bold);
        None
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn skip_optional(&mut self) {
        let save = self.pos;
        self.skip_ws();
        if self.peek() != Some('[') {
            self.pos = save;
            return;
        }
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                '[' | '{' => depth += 1,
                ']' | '}' => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 && c == ']' {
                        return;
                    }
                }
                _ => {}
            }
        }
    }

    /// Process the next argument (braced group or single token) as content.
    fn argument(&mut self, bold: bool) {
        self.skip_ws();
        match self.peek() {
            Some('{') => {
                self.pos += 1;
                self.group(bold, true);
            }
            Some('\\') => {
                self.pos += 1;
                self.command(bold);
            }
            Some(c) => {
                self.pos += 1;
                self.emit(c, bold);
            }
            None => {}
        }
    }

    fn skip_argument(&mut self) {
        self.skip_ws();
        match self.peek() {
            Some('{') => {
                let mut depth = 0usize;
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    match c {
                        '{' => depth += 1,
                        '}' => {
                            depth -= 1;
                            if depth == 0 {
                                return;
                            }
                        }
                        _ => {}
                    }
                }
            }
            Some(_) => self.pos += 1,
            None => {}
        }
    }

    fn tag_ahead(&self) -> bool {
        let next = self.chars.get(self.pos + 1).copied();
        let opens = match next {
            Some('/') | Some('!') | Some('?') => true,
            Some(c) => c.is_ascii_alphabetic(),
            None => false,
        };
        opens
            && self.chars[self.pos + 1..]
                .iter()
                .take_while(|c| **c != '<' && **c != '\n')
                .any(|c| *c == '>')
    }

    fn tag(&mut self) {
        let start = self.pos + 1;
        let mut end = start;
        while self.chars[end] != '>' {
            end += 1;
        }
        self.pos = end + 1;
        let body: String = self.chars[start..end].iter().collect();
        let closing = body.starts_with('/');
        let name: String = body
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        let self_closing = body.ends_with('/');
        match name.as_str() {
            "b" | "strong" | "bold" if !self_closing => {
                if closing {
                    self.html_bold = self.html_bold.saturating_sub(1);
                } else {
                    self.html_bold += 1;
                }
            }
            "br" | "td" | "th" | "p" | "div" | "li" | "tr" => self.out.push((' ', false)),
            _ => {}
        }
    }

    fn entity(&mut self, bold: bool) -> bool {
        let semi = self.chars[self.pos + 1..]
            .iter()
            .take(10)
            .position(|c| *c == ';');
        let Some(len) = semi else { return false };
        let name: String = self.chars[self.pos + 1..self.pos + 1 + len]
            .iter()
            .collect();
        match entity(&name) {
            Some(c) => {
                self.pos += len + 2;
                self.emit(c, bold);
                true
            }
            None => false,
        }
    }
}
