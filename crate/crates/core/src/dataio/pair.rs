//! View pairing files: a count line, then per reference view an id line and
//! a line `n id0 score0 id1 score1 ...` ranking its source views.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{parse_err, DataError};

/// One reference view and its ranked source views.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEntry {
    pub reference: usize,
    pub sources: Vec<(usize, f64)>,
}

pub fn read_pair(path: &Path) -> Result<Vec<PairEntry>, DataError> {
    let text = fs::read_to_string(path)?;
    let lines: Vec<&str> = text.lines().collect();
    let expect_line = |i: usize| -> Result<&str, DataError> {
        lines.get(i).copied().ok_or_else(|| parse_err(path, i + 1, "unexpected end of file"))
    };

    let count: usize = expect_line(0)?
        .trim()
        .parse()
        .map_err(|_| parse_err(path, 1, "expected the number of reference views"))?;
    let mut entries = Vec::with_capacity(count);
    for e in 0..count {
        let id_line = 1 + 2 * e;
        let reference: usize = expect_line(id_line)?
            .trim()
            .parse()
            .map_err(|_| parse_err(path, id_line + 1, "expected a view id"))?;
        let src_line = id_line + 1;
        let tokens: Vec<&str> = expect_line(src_line)?.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(parse_err(path, src_line + 1, "expected a source count"));
        }
        let n: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(path, src_line + 1, "invalid source count"))?;
        if tokens.len() != 1 + 2 * n {
            return Err(parse_err(
                path,
                src_line + 1,
                format!("declared {n} sources but found {} tokens", tokens.len() - 1),
            ));
        }
        let mut sources = Vec::with_capacity(n);
        for pair in tokens[1..].chunks_exact(2) {
            let id: usize = pair[0]
                .parse()
                .map_err(|_| parse_err(path, src_line + 1, format!("invalid source id {:?}", pair[0])))?;
            let score: f64 = pair[1]
                .parse()
                .map_err(|_| parse_err(path, src_line + 1, format!("invalid score {:?}", pair[1])))?;
            if id == reference {
                return Err(parse_err(path, src_line + 1, "a reference cannot be its own source"));
            }
            sources.push((id, score));
        }
        entries.push(PairEntry { reference, sources });
    }
    Ok(entries)
}

pub fn write_pair(path: &Path, entries: &[PairEntry]) -> Result<(), DataError> {
    let mut out = format!("{}\n", entries.len());
    for e in entries {
        writeln!(out, "{}", e.reference).unwrap();
        write!(out, "{}", e.sources.len()).unwrap();
        for (id, score) in &e.sources {
            write!(out, " {id} {score}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_view_symmetric_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.txt");
        std::fs::write(&path, "2\n0\n1 1 0.8\n1\n1 0 0.8\n").unwrap();
        let entries = read_pair(&path).unwrap();
        assert_eq!(entries.len(), 2);
        assert_eq!(entries[0], PairEntry { reference: 0, sources: vec![(1, 0.8)] });
        assert_eq!(entries[1], PairEntry { reference: 1, sources: vec![(0, 0.8)] });
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.txt");
        let entries = vec![
            PairEntry { reference: 0, sources: vec![(1, 12.5), (2, 3.25)] },
            PairEntry { reference: 1, sources: vec![(0, 12.5)] },
            PairEntry { reference: 2, sources: vec![] },
        ];
        write_pair(&path, &entries).unwrap();
        assert_eq!(read_pair(&path).unwrap(), entries);
    }

    #[test]
    fn truncated_source_line_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.txt");
        std::fs::write(&path, "1\n0\n2 1 0.8\n").unwrap();
        match read_pair(&path) {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_entry_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pair.txt");
        std::fs::write(&path, "2\n0\n1 1 0.8\n").unwrap();
        assert!(read_pair(&path).is_err());
    }
}
