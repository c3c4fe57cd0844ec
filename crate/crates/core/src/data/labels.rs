use crate::error::{Error, Result};
use std::path::Path;

/// Reads one non-negative integer label per line; blank lines are skipped.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, path)
}

pub(crate) fn parse_labels(text: &str, origin: &Path) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::format(origin, format!("line {}: {:?} is not a label", i + 1, l)))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut s = String::with_capacity(labels.len() * 2);
    for l in labels {
        s.push_str(&l.to_string());
        s.push('\n');
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_reject() {
        assert_eq!(parse_labels("1\n0\n\n3\n", Path::new("l")).unwrap(), vec![1, 0, 3]);
        assert!(parse_labels("1\n-2\n", Path::new("l")).is_err());
    }
}
