//! Praat TextGrid reader for the long and short text variants.
//!
//! Both variants carry the same value sequence; the long one merely adds
//! `key = ` labels and `item [n]:` headers. The tokenizer keeps numbers,
//! quoted strings and `<flag>`s, and drops everything else, so a single
//! grammar covers both.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhoneInterval {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl PhoneInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// A named interval tier. Intervals are sorted, non-overlapping and gap-free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTier {
    pub name: String,
    pub intervals: Vec<PhoneInterval>,
}

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Number(f64),
    Text(String),
    Flag(String),
}

#[derive(Debug, Clone)]
struct Token {
    value: Value,
    line: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1;
    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '"' => {
                let start_line = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') if chars.peek() == Some(&'"') => {
                            chars.next();
                            s.push('"');
                        }
                        Some('"') => break,
                        Some(ch) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                        None => {
                            return Err(Error::parse(
                                format!("TextGrid line {start_line}"),
                                "unterminated string",
                            ))
                        }
                    }
                }
                tokens.push(Token {
                    value: Value::Text(s),
                    line: start_line,
                });
            }
            '<' => {
                chars.next();
                let flag: String = chars.by_ref().take_while(|&ch| ch != '>').collect();
                tokens.push(Token {
                    value: Value::Flag(flag),
                    line,
                });
            }
            '[' => {
                // `item [3]:` style headers
                for ch in chars.by_ref() {
                    if ch == ']' {
                        break;
                    }
                }
            }
            '!' => {
                while let Some(&ch) = chars.peek() {
                    if ch == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            _ => {
                let mut word = String::new();
                while let Some(&ch) = chars.peek() {
                    if ch.is_whitespace() || matches!(ch, '"' | '<' | '[' | '!') {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                }
                if let Ok(v) = word.parse::<f64>() {
                    tokens.push(Token {
                        value: Value::Number(v),
                        line,
                    });
                }
            }
        }
    }
    Ok(tokens)
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map_or(1, |t| t.line)
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(format!("TextGrid line {}", self.line()), message)
    }

    fn next(&mut self, what: &str) -> Result<Token> {
        let t = self
            .tokens
            .get(self.pos)
            .cloned()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))?;
        self.pos += 1;
        Ok(t)
    }

    fn number(&mut self, what: &str) -> Result<f64> {
        let t = self.next(what)?;
        match t.value {
            Value::Number(v) => Ok(v),
            other => Err(Error::parse(
                format!("TextGrid line {}", t.line),
                format!("expected {what}, found {other:?}"),
            )),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        let line = self.line();
        let v = self.number(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(Error::parse(
                format!("TextGrid line {line}"),
                format!("{what} must be a non-negative integer, got {v}"),
            ));
        }
        Ok(v as usize)
    }

    fn text(&mut self, what: &str) -> Result<String> {
        let t = self.next(what)?;
        match t.value {
            Value::Text(s) => Ok(s),
            other => Err(Error::parse(
                format!("TextGrid line {}", t.line),
                format!("expected {what}, found {other:?}"),
            )),
        }
    }
}

/// Detects the byte-order mark and decodes UTF-8 or UTF-16 (LE/BE) text.
pub fn decode_textgrid_bytes(bytes: &[u8]) -> Result<String> {
    let utf16 = |body: &[u8], le: bool| -> Result<String> {
        if body.len() % 2 != 0 {
            return Err(Error::parse("TextGrid encoding", "odd byte count in UTF-16 input"));
        }
        let units: Vec<u16> = body
            .chunks_exact(2)
            .map(|c| if le { u16::from_le_bytes([c[0], c[1]]) } else { u16::from_be_bytes([c[0], c[1]]) })
            .collect();
        String::from_utf16(&units).map_err(|e| Error::parse("TextGrid encoding", e.to_string()))
    };
    match bytes {
        [0xFF, 0xFE, rest @ ..] => utf16(rest, true),
        [0xFE, 0xFF, rest @ ..] => utf16(rest, false),
        [0xEF, 0xBB, 0xBF, rest @ ..] => std::str::from_utf8(rest)
            .map(str::to_owned)
            .map_err(|e| Error::parse("TextGrid encoding", e.to_string())),
        _ => std::str::from_utf8(bytes)
            .map(str::to_owned)
            .map_err(|e| Error::parse("TextGrid encoding", e.to_string())),
    }
}

/// Parses every interval tier of a TextGrid; point tiers are skipped.
pub fn parse_textgrid(text: &str) -> Result<Vec<AlignmentTier>> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut cur = Cursor {
        tokens: tokenize(text)?,
        pos: 0,
    };
    let file_type = cur.text("file type")?;
    if file_type != "ooTextFile" {
        return Err(cur.err(format!("unsupported file type {file_type:?}")));
    }
    let class = cur.text("object class")?;
    if class != "TextGrid" {
        return Err(cur.err(format!("object class {class:?} is not TextGrid")));
    }
    cur.number("xmin")?;
    cur.number("xmax")?;
    let exists = match cur.next("tiers flag")?.value {
        Value::Flag(f) => f == "exists",
        other => return Err(cur.err(format!("expected <exists> or <absent>, found {other:?}"))),
    };
    let tier_count = if exists { cur.count("tier count")? } else { 0 };

    let mut tiers = Vec::new();
    for _ in 0..tier_count {
        let class = cur.text("tier class")?;
        let name = cur.text("tier name")?;
        cur.number("tier xmin")?;
        cur.number("tier xmax")?;
        let n = cur.count("interval count")?;
        match class.as_str() {
            "IntervalTier" => {
                let mut raw = Vec::with_capacity(n);
                for _ in 0..n {
                    let line = cur.line();
                    let start = cur.number("interval xmin")?;
                    let end = cur.number("interval xmax")?;
                    let label = cur.text("interval text")?;
                    if !(start < end) {
                        return Err(Error::parse(
                            format!("TextGrid line {line}"),
                            format!("interval xmin {start} is not below xmax {end}"),
                        ));
                    }
                    raw.push((line, PhoneInterval {
                        label: label.trim().to_owned(),
                        start,
                        end,
                    }));
                }
                tiers.push(AlignmentTier {
                    name,
                    intervals: normalize_intervals(raw)?,
                });
            }
            "TextTier" => {
                for _ in 0..n {
                    cur.number("point time")?;
                    cur.text("point mark")?;
                }
            }
            other => return Err(cur.err(format!("unknown tier class {other:?}"))),
        }
    }
    if cur.pos != cur.tokens.len() {
        return Err(cur.err("trailing content after last tier"));
    }
    if tiers.is_empty() {
        return Err(Error::EmptyInput("TextGrid has no interval tiers".into()));
    }
    Ok(tiers)
}

fn normalize_intervals(mut raw: Vec<(usize, PhoneInterval)>) -> Result<Vec<PhoneInterval>> {
    raw.sort_by(|a, b| a.1.start.total_cmp(&b.1.start));
    let mut out: Vec<PhoneInterval> = Vec::with_capacity(raw.len());
    for (line, iv) in raw {
        if let Some(prev) = out.last() {
            if iv.start < prev.end - TIME_EPS {
                return Err(Error::parse(
                    format!("TextGrid line {line}"),
                    format!("interval [{}, {}] overlaps previous ending at {}", iv.start, iv.end, prev.end),
                ));
            }
            if iv.start > prev.end + TIME_EPS {
                let gap = PhoneInterval {
                    label: String::new(),
                    start: prev.end,
                    end: iv.start,
                };
                out.push(gap);
            }
        }
        out.push(iv);
    }
    Ok(out)
}

impl AlignmentTier {
    /// Finds a tier by exact name.
    pub fn find<'a>(tiers: &'a [AlignmentTier], name: &str) -> Option<&'a AlignmentTier> {
        tiers.iter().find(|t| t.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LONG: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

xmin = 0
xmax = 0.3
tiers? <exists>
size = 2
item []:
    item [1]:
        class = "IntervalTier"
        name = "phones"
        xmin = 0
        xmax = 0.3
        intervals: size = 2
        intervals [1]:
            xmin = 0
            xmax = 0.1
            text = "sil"
        intervals [2]:
            xmin = 0.1
            xmax = 0.3
            text = "AY1"
    item [2]:
        class = "TextTier"
        name = "events"
        xmin = 0
        xmax = 0.3
        points: size = 1
        points [1]:
            number = 0.2
            mark = "click"
"#;

    const SHORT: &str = r#"File type = "ooTextFile"
Object class = "TextGrid"

0
0.3
<exists>
2
"IntervalTier"
"phones"
0
0.3
2
0
0.1
"sil"
0.1
0.3
"AY1"
"TextTier"
"events"
0
0.3
1
0.2
"click"
"#;

    #[test]
    fn long_format() {
        let tiers = parse_textgrid(LONG).unwrap();
        assert_eq!(tiers.len(), 1);
        assert_eq!(tiers[0].name, "phones");
        assert_eq!(
            tiers[0].intervals,
            vec![
                PhoneInterval { label: "sil".into(), start: 0.0, end: 0.1 },
                PhoneInterval { label: "AY1".into(), start: 0.1, end: 0.3 },
            ]
        );
    }

    #[test]
    fn short_format_matches_long() {
        assert_eq!(parse_textgrid(SHORT).unwrap(), parse_textgrid(LONG).unwrap());
    }

    #[test]
    fn reversed_interval_is_an_error() {
        let bad = SHORT.replace("0\n0.1\n\"sil\"", "0.2\n0.1\n\"sil\"");
        match parse_textgrid(&bad).unwrap_err() {
            Error::Parse { context, message } => {
                assert_eq!(context, "TextGrid line 13");
                assert!(message.contains("xmin"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn utf16_with_bom() {
        let mut bytes = vec![0xFF, 0xFE];
        for u in SHORT.encode_utf16() {
            bytes.extend_from_slice(&u.to_le_bytes());
        }
        let text = decode_textgrid_bytes(&bytes).unwrap();
        assert_eq!(parse_textgrid(&text).unwrap(), parse_textgrid(SHORT).unwrap());
    }

    #[test]
    fn escaped_quotes_and_multiline_labels() {
        let src = SHORT.replace("\"AY1\"", "\"a \"\"b\"\"\nc\"");
        let tiers = parse_textgrid(&src).unwrap();
        assert_eq!(tiers[0].intervals[1].label, "a \"b\"\nc");
    }

    #[test]
    fn no_interval_tiers() {
        let src = "File type = \"ooTextFile\"\nObject class = \"TextGrid\"\n0\n1\n<absent>\n";
        assert!(matches!(parse_textgrid(src), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn truncated_file_reports_line() {
        let src: String = SHORT.lines().take(14).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_textgrid(&src), Err(Error::Parse { .. })));
    }

    #[test]
    fn gaps_are_filled() {
        let src = SHORT.replace("0.1\n0.3\n\"AY1\"", "0.15\n0.3\n\"AY1\"");
        let tiers = parse_textgrid(&src).unwrap();
        let labels: Vec<_> = tiers[0].intervals.iter().map(|i| i.label.as_str()).collect();
        assert_eq!(labels, ["sil", "", "AY1"]);
    }
}
