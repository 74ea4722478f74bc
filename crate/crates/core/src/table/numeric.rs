//! First-numeric-value extraction.
//!
//! Grammar: optional sign, digits with `,` thousands separators (a comma
//! counts only when exactly three digits follow), optional fractional part,
//! optional exponent, optional trailing `%`. A number must not be glued to
//! a word: `F1`, `v1.1`, `GPT-2` and compound labels like `5a` carry no
//! numeric value. Magnitude suffixes (`110M`, `7B`, `3x`) are allowed.

/// Location and value of the first numeric token in a string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NumericMatch {
    /// Char index where the token starts (sign included).
    pub start: usize,
    /// Char index one past the token's last char.
    pub end: usize,
    pub value: f64,
}

/// First numeric value in `plain_text`, or `None` when there is none.
pub fn extract_numeric(plain_text: &str) -> Option<f64> {
    first_numeric(plain_text).map(|m| m.value)
}

fn is_sign(c: char) -> bool {
    matches!(c, '-' | '+' | '\u{2212}')
}

/// Letters that may directly follow a number without making it a word.
const MAGNITUDE_SUFFIXES: &[char] = &['K', 'k', 'M', 'B', 'G', 'T', 'x', 'X'];

fn glues_to_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.'
}

pub(crate) fn first_numeric(text: &str) -> Option<NumericMatch> {
    let chars: Vec<char> = text.chars().collect();
    let digit_at = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_digit());
    let starts_unsigned = |i: usize| digit_at(i) || (chars.get(i) == Some(&'.') && digit_at(i + 1));

    for i in 0..chars.len() {
        let prev = i.checked_sub(1).map(|p| chars[p]);
        let c = chars[i];
        let free_before = prev.is_none_or(|p| !glues_to_word(p) && !is_sign(p));

        if is_sign(c) && starts_unsigned(i + 1) && prev.is_none_or(|p| !glues_to_word(p)) {
            if let Some(m) = scan_from(&chars, i + 1) {
                let negative = c != '+';
                return Some(NumericMatch {
                    start: i,
                    value: if negative { -m.value } else { m.value },
                    ..m
                });
            }
        }
        if starts_unsigned(i) && free_before {
            if let Some(m) = scan_from(&chars, i) {
                return Some(m);
            }
        }
    }
    None
}

fn scan_from(chars: &[char], start: usize) -> Option<NumericMatch> {
    let digit_at = |i: usize| chars.get(i).is_some_and(|c| c.is_ascii_digit());
    let mut i = start;
    let mut literal = String::new();

    while digit_at(i) {
        literal.push(chars[i]);
        i += 1;
        // thousands separator: ",ddd" not followed by another digit
        if chars.get(i) == Some(&',')
            && digit_at(i + 1)
            && digit_at(i + 2)
            && digit_at(i + 3)
            && !digit_at(i + 4)
            && !literal.is_empty()
        {
            literal.extend(&chars[i + 1..i + 4]);
            i += 4;
            while chars.get(i) == Some(&',')
                && digit_at(i + 1)
                && digit_at(i + 2)
                && digit_at(i + 3)
                && !digit_at(i + 4)
            {
                literal.extend(&chars[i + 1..i + 4]);
                i += 4;
            }
            break;
        }
    }
    if chars.get(i) == Some(&'.') && digit_at(i + 1) {
        if literal.is_empty() {
            literal.push('0');
        }
        literal.push('.');
        i += 1;
        while digit_at(i) {
            literal.push(chars[i]);
            i += 1;
        }
    }
    if literal.is_empty() {
        return None;
    }
    if matches!(chars.get(i), Some('e' | 'E')) {
        let mut j = i + 1;
        let mut exp = String::from("e");
        if let Some(&s) = chars.get(j).filter(|c| is_sign(**c)) {
            exp.push(if s == '+' { '+' } else { '-' });
            j += 1;
        }
        if digit_at(j) {
            while digit_at(j) {
                exp.push(chars[j]);
                j += 1;
            }
            literal.push_str(&exp);
            i = j;
        }
    }
    if chars.get(i) == Some(&'%') {
        i += 1;
    } else if let Some(&next) = chars.get(i).filter(|c| c.is_alphabetic()) {
        let suffix_alone = !chars.get(i + 1).is_some_and(|c| c.is_alphanumeric());
        if !(MAGNITUDE_SUFFIXES.contains(&next) && suffix_alone) {
            return None;
        }
    }
    if digit_at(i) || chars.get(i) == Some(&'_') {
        return None;
    }
    let value: f64 = literal.parse().ok()?;
    Some(NumericMatch {
        start,
        end: i,
        value,
    })
}
