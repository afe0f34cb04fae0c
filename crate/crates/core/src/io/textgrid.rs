use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::IoError;
use crate::alignment::RecordingAlignment;
use crate::detect::{Feature, SuspicionRegion};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierClass {
    Interval,
    Point,
}

/// An interval, or a point when `xmin == xmax` on a point tier.
#[derive(Debug, Clone, PartialEq)]
pub struct TierItem {
    pub xmin: f64,
    pub xmax: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tier {
    pub name: String,
    pub class: TierClass,
    pub xmin: f64,
    pub xmax: f64,
    pub items: Vec<TierItem>,
}

impl Tier {
    /// Labeled (non-empty) intervals.
    pub fn labeled(&self) -> impl Iterator<Item = &TierItem> {
        self.items.iter().filter(|i| !i.text.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<Tier>,
}

impl TextGrid {
    pub fn tier(&self, name: &str) -> Option<&Tier> {
        self.tiers.iter().find(|t| t.name == name)
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

/// Renders a TextGrid in Praat's long text format.
pub fn write_textgrid(grid: &TextGrid) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "File type = \"ooTextFile\"");
    let _ = writeln!(w, "Object class = \"TextGrid\"");
    let _ = writeln!(w);
    let _ = writeln!(w, "xmin = {} ", grid.xmin);
    let _ = writeln!(w, "xmax = {} ", grid.xmax);
    let _ = writeln!(w, "tiers? <exists> ");
    let _ = writeln!(w, "size = {} ", grid.tiers.len());
    let _ = writeln!(w, "item []: ");
    for (t, tier) in grid.tiers.iter().enumerate() {
        let _ = writeln!(w, "    item [{}]:", t + 1);
        let (class, items, item) = match tier.class {
            TierClass::Interval => ("IntervalTier", "intervals", "intervals"),
            TierClass::Point => ("TextTier", "points", "points"),
        };
        let _ = writeln!(w, "        class = \"{class}\" ");
        let _ = writeln!(w, "        name = {} ", quote(&tier.name));
        let _ = writeln!(w, "        xmin = {} ", tier.xmin);
        let _ = writeln!(w, "        xmax = {} ", tier.xmax);
        let _ = writeln!(w, "        {items}: size = {} ", tier.items.len());
        for (i, it) in tier.items.iter().enumerate() {
            let _ = writeln!(w, "        {item} [{}]:", i + 1);
            match tier.class {
                TierClass::Interval => {
                    let _ = writeln!(w, "            xmin = {} ", it.xmin);
                    let _ = writeln!(w, "            xmax = {} ", it.xmax);
                    let _ = writeln!(w, "            text = {} ", quote(&it.text));
                }
                TierClass::Point => {
                    let _ = writeln!(w, "            number = {} ", it.xmin);
                    let _ = writeln!(w, "            mark = {} ", quote(&it.text));
                }
            }
        }
    }
    out
}

#[derive(Debug, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Exists,
}

/// Splits a TextGrid into its meaningful tokens: quoted strings, bare
/// numbers and `<exists>`. Everything else (keys, `=`, `[1]:`) is layout.
/// The long and short formats yield the same token stream.
fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, IoError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c == '\n' {
            line += 1;
            chars.next();
        } else if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let start_line = line;
            let mut s = String::new();
            loop {
                match chars.next() {
                    None => return Err(IoError::parse(start_line, "unterminated string")),
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
                }
            }
            out.push((start_line, Token::Str(s)));
        } else if c == '!' {
            // comment to end of line
            while chars.peek().is_some_and(|&ch| ch != '\n') {
                chars.next();
            }
        } else {
            let mut word = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '"' {
                    break;
                }
                word.push(ch);
                chars.next();
            }
            if word == "<exists>" {
                out.push((line, Token::Exists));
            } else if let Ok(v) = word.parse::<f64>() {
                if v.is_finite() {
                    out.push((line, Token::Num(v)));
                }
            }
        }
    }
    Ok(out)
}

struct Cursor {
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl Cursor {
    fn line(&self) -> usize {
        self.tokens.get(self.pos).or(self.tokens.last()).map_or(1, |t| t.0)
    }

    fn next(&mut self, what: &str) -> Result<Token, IoError> {
        let line = self.line();
        let tok = self.tokens.get_mut(self.pos).map(|t| std::mem::replace(&mut t.1, Token::Exists));
        self.pos += 1;
        tok.ok_or_else(|| IoError::parse(line, format!("unexpected end of file, expected {what}")))
    }

    fn num(&mut self, what: &str) -> Result<f64, IoError> {
        let line = self.line();
        match self.next(what)? {
            Token::Num(v) => Ok(v),
            _ => Err(IoError::parse(line, format!("expected number ({what})"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, IoError> {
        let line = self.line();
        let v = self.num(what)?;
        if v < 0.0 || v.fract() != 0.0 || v > 1e9 {
            return Err(IoError::parse(line, format!("bad count {v}")));
        }
        Ok(v as usize)
    }

    fn string(&mut self, what: &str) -> Result<String, IoError> {
        let line = self.line();
        match self.next(what)? {
            Token::Str(s) => Ok(s),
            _ => Err(IoError::parse(line, format!("expected string ({what})"))),
        }
    }
}

/// Parses a Praat TextGrid in long or short text format.
pub fn parse_textgrid(text: &str) -> Result<TextGrid, IoError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut c = Cursor { tokens: tokenize(text)?, pos: 0 };
    if c.string("file type")? != "ooTextFile" {
        return Err(IoError::parse(1, "not an ooTextFile"));
    }
    if c.string("object class")? != "TextGrid" {
        return Err(IoError::parse(1, "not a TextGrid"));
    }
    let xmin = c.num("xmin")?;
    let xmax = c.num("xmax")?;
    let line = c.line();
    if c.next("<exists>")? != Token::Exists {
        return Err(IoError::parse(line, "expected <exists>"));
    }
    let n_tiers = c.count("tier count")?;
    let mut tiers = Vec::with_capacity(n_tiers.min(1024));
    for _ in 0..n_tiers {
        let line = c.line();
        let class = match c.string("tier class")?.as_str() {
            "IntervalTier" => TierClass::Interval,
            "TextTier" => TierClass::Point,
            other => return Err(IoError::parse(line, format!("unknown tier class {other:?}"))),
        };
        let name = c.string("tier name")?;
        let tmin = c.num("tier xmin")?;
        let tmax = c.num("tier xmax")?;
        let n = c.count("item count")?;
        let mut items = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let item = match class {
                TierClass::Interval => {
                    let a = c.num("interval xmin")?;
                    let b = c.num("interval xmax")?;
                    TierItem { xmin: a, xmax: b, text: c.string("interval text")? }
                }
                TierClass::Point => {
                    let a = c.num("point time")?;
                    TierItem { xmin: a, xmax: a, text: c.string("point mark")? }
                }
            };
            items.push(item);
        }
        tiers.push(Tier { name, class, xmin: tmin, xmax: tmax, items });
    }
    Ok(TextGrid { xmin, xmax, tiers })
}

/// Interval tier covering `[0, total]`, gaps filled with empty intervals.
/// Items must be sorted; zero-length and overlapping pieces are trimmed.
fn filled_tier(name: &str, total: f64, labeled: impl IntoIterator<Item = (f64, f64, String)>) -> Tier {
    let mut items = Vec::new();
    let mut cursor = 0.0;
    for (s, e, text) in labeled {
        let s = s.max(cursor);
        let e = e.min(total);
        if e <= s {
            continue;
        }
        if s > cursor {
            items.push(TierItem { xmin: cursor, xmax: s, text: String::new() });
        }
        items.push(TierItem { xmin: s, xmax: e, text });
        cursor = e;
    }
    if cursor < total || items.is_empty() {
        items.push(TierItem { xmin: cursor, xmax: total, text: String::new() });
    }
    Tier { name: name.to_string(), class: TierClass::Interval, xmin: 0.0, xmax: total, items }
}

/// Builds the phone tier, word tier and one tier per feature in `features`
/// (alphabetical by name), with `regions` as labeled intervals.
///
/// Overlapping regions of one feature are merged.
pub fn regions_textgrid(
    rec: &RecordingAlignment,
    regions: &[SuspicionRegion],
    features: &[Feature],
) -> Result<TextGrid, IoError> {
    let total = rec.total_duration_s();
    for r in regions {
        if !(r.start_s >= 0.0 && r.end_s <= total && r.start_s <= r.end_s) {
            return Err(IoError::RegionOutOfBounds { start_s: r.start_s, end_s: r.end_s, total_s: total });
        }
    }
    let mut tiers = vec![
        filled_tier("phone", total, rec.phones().iter().map(|p| (p.start_s, p.end_s, p.label.clone()))),
        filled_tier("word", total, rec.words().iter().map(|w| (w.start_s, w.end_s, w.label.clone()))),
    ];
    let names: BTreeSet<&str> = features.iter().map(|f| f.name()).collect();
    for name in names {
        let mut spans: Vec<(f64, f64)> =
            regions.iter().filter(|r| r.feature.name() == name).map(|r| (r.start_s, r.end_s)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (s, e) in spans {
            match merged.last_mut() {
                Some(last) if s < last.1 => last.1 = last.1.max(e),
                _ => merged.push((s, e)),
            }
        }
        tiers.push(filled_tier(name, total, merged.into_iter().map(|(s, e)| (s, e, name.to_string()))));
    }
    Ok(TextGrid { xmin: 0.0, xmax: total, tiers })
}

/// Phone and word tiers plus one tier per feature that has regions.
pub fn write_textgrid_regions(rec: &RecordingAlignment, regions: &[SuspicionRegion]) -> Result<String, IoError> {
    let features: Vec<Feature> = regions.iter().map(|r| r.feature).collect();
    Ok(write_textgrid(&regions_textgrid(rec, regions, &features)?))
}
