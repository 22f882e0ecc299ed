//! Plain-text formats for matrices, supports and observations.
//!
//! Matrix: a line with `m`, then `m` rows of `m` whitespace-separated values.
//! Support: a line with `m`, then one `i j` pair per line (1-based).
//! Lines starting with `#` are comments in both formats.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ggm::ObservationSet;
use crate::symmat::{SupportPattern, SymmetricMatrix};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_dim(line: Option<(usize, &str)>) -> Result<usize> {
    let (n, l) = line.ok_or(Error::Parse { line: 1, message: "missing dimension line".into() })?;
    let dim: usize = l.parse().map_err(|_| Error::Parse { line: n, message: format!("bad dimension {l:?}") })?;
    if dim == 0 {
        return Err(Error::Parse { line: n, message: "dimension must be at least 1".into() });
    }
    Ok(dim)
}

pub fn parse_matrix(text: &str) -> Result<SymmetricMatrix> {
    let mut lines = content_lines(text);
    let dim = parse_dim(lines.next())?;
    let mut rows = Vec::with_capacity(dim);
    for (n, l) in lines {
        let row: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| Error::Parse { line: n, message: format!("bad number {t:?}") }))
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(Error::Parse { line: n, message: format!("expected {dim} values, found {}", row.len()) });
        }
        rows.push(row);
    }
    if rows.len() != dim {
        return Err(Error::Parse { line: 0, message: format!("expected {dim} rows, found {}", rows.len()) });
    }
    SymmetricMatrix::from_rows(&rows)
}

/// Values are written with Rust's shortest round-trip formatting.
pub fn format_matrix(a: &SymmetricMatrix, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        for l in h.lines() {
            out.push_str("# ");
            out.push_str(l);
            out.push('\n');
        }
    }
    out.push_str(&format!("{}\n", a.dim()));
    for r in 0..a.dim() {
        let row: Vec<String> = (0..a.dim()).map(|c| format!("{}", a.get(r, c))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_support(text: &str) -> Result<SupportPattern> {
    let mut lines = content_lines(text);
    let dim = parse_dim(lines.next())?;
    let mut pairs = Vec::new();
    for (n, l) in lines {
        let idx: Vec<usize> = l
            .split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|_| Error::Parse { line: n, message: format!("bad index {t:?}") }))
            .collect::<Result<_>>()?;
        if idx.len() != 2 {
            return Err(Error::Parse { line: n, message: "expected `i j`".into() });
        }
        if idx.iter().any(|&k| k == 0 || k > dim) {
            return Err(Error::Parse { line: n, message: format!("index out of range 1..={dim}") });
        }
        pairs.push((idx[0], idx[1]));
    }
    SupportPattern::from_pairs(dim, pairs)
}

pub fn format_support(s: &SupportPattern) -> String {
    let mut out = format!("{}\n", s.dim());
    for p in s.pairs() {
        out.push_str(&format!("{} {}\n", p.i, p.j));
    }
    out
}

/// One sample per row, comma separated, no header.
pub fn format_observations(obs: &ObservationSet) -> String {
    let mut out = String::new();
    for x in obs.samples() {
        let row: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn parse_observations(text: &str, seed: Option<u64>) -> Result<ObservationSet> {
    let mut samples = Vec::new();
    for (n, l) in content_lines(text) {
        let row: Vec<f64> = l
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse { line: n, message: format!("bad number {t:?}") }))
            .collect::<Result<_>>()?;
        samples.push(row);
    }
    ObservationSet::new(samples, seed)
}

/// `fs::read_to_string` with the path in the error message.
pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

pub fn read_matrix(path: &Path) -> Result<SymmetricMatrix> {
    parse_matrix(&read_text(path)?)
}

pub fn write_matrix(path: &Path, a: &SymmetricMatrix, header: Option<&str>) -> Result<()> {
    Ok(fs::write(path, format_matrix(a, header))?)
}

pub fn read_support(path: &Path) -> Result<SupportPattern> {
    parse_support(&read_text(path)?)
}

pub fn write_support(path: &Path, s: &SupportPattern) -> Result<()> {
    Ok(fs::write(path, format_support(s))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_exact() {
        let a = SymmetricMatrix::from_rows(&[vec![0.1, -1e-20], vec![-1e-20, 3.0 / 7.0]]).unwrap();
        let text = format_matrix(&a, Some("variant: test"));
        assert!(text.starts_with("# variant: test\n2\n"));
        assert_eq!(parse_matrix(&text).unwrap(), a);
    }

    #[test]
    fn matrix_reader_rejects_bad_input() {
        assert!(parse_matrix("2\n1 0.5\n0.6 1\n").is_err());
        assert!(parse_matrix("2\n1 0\n").is_err());
        assert!(parse_matrix("2\n1 0 0\n0 1\n").is_err());
        assert!(parse_matrix("x\n").is_err());
        assert!(parse_matrix("").is_err());
    }

    #[test]
    fn support_round_trip() {
        let s = SupportPattern::from_pairs(4, [(1, 1), (3, 1), (2, 4)]).unwrap();
        let text = format_support(&s);
        assert_eq!(text, "4\n1 1\n3 1\n4 2\n");
        assert_eq!(parse_support(&text).unwrap(), s);
        assert!(parse_support("3\n1 4\n").is_err());
        assert!(parse_support("3\n1\n").is_err());
    }

    #[test]
    fn observations_round_trip() {
        let obs = ObservationSet::new(vec![vec![1.0, -2.5], vec![0.125, 3.0]], Some(4)).unwrap();
        let back = parse_observations(&format_observations(&obs), Some(4)).unwrap();
        assert_eq!(back, obs);
        assert!(parse_observations("1,2\n3\n", None).is_err());
    }
}
