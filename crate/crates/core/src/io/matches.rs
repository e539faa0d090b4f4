use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;

use super::{parse_f64, parse_usize};
use crate::error::{Error, Result};
use crate::matching::{Match, MatchSet};

/// `MATCHES v1 <count> <w1> <h1> <w2> <h2>` followed by `count` lines
/// `x1 y1 x2 y2`. Values are written in shortest round-trip form.
pub fn format_matches(set: &MatchSet) -> String {
    let (s1, s2) = (set.size1, set.size2);
    let mut out = format!("MATCHES v1 {} {} {} {} {}\n", set.len(), s1.0, s1.1, s2.0, s2.1);
    for m in set.iter() {
        let _ = writeln!(out, "{:?} {:?} {:?} {:?}", m.p.x, m.p.y, m.q.x, m.q.y);
    }
    out
}

pub fn parse_matches(text: &str) -> Result<MatchSet> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::HeaderMismatch("empty match file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 7 || tokens[0] != "MATCHES" || tokens[1] != "v1" {
        return Err(Error::HeaderMismatch(format!("expected \"MATCHES v1 <count> <w1> <h1> <w2> <h2>\", got {header:?}")));
    }
    let n: Vec<usize> = tokens[2..].iter().map(|t| parse_usize(t, "field")).collect::<Result<_>>()?;
    let count = n[0];
    let mut matches = Vec::with_capacity(count);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v = line.split_whitespace().map(|t| parse_f64(t, i + 1)).collect::<Result<Vec<_>>>()?;
        if v.len() != 4 {
            return Err(Error::MalformedLine { line: i + 1, reason: format!("expected 4 numbers, found {}", v.len()) });
        }
        matches.push(Match::new(Vector2::new(v[0], v[1]), Vector2::new(v[2], v[3])));
    }
    if matches.len() != count {
        return Err(Error::CountMismatch { expected: count, found: matches.len() });
    }
    Ok(MatchSet::new(matches, (n[1], n[2]), (n[3], n[4])))
}

pub fn read_match_file(path: impl AsRef<Path>) -> Result<MatchSet> {
    parse_matches(&std::fs::read_to_string(path)?)
}

pub fn write_match_file(path: impl AsRef<Path>, set: &MatchSet) -> Result<()> {
    Ok(std::fs::write(path, format_matches(set))?)
}
