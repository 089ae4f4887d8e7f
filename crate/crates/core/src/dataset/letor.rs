//! LETOR / SVMlight text format.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::{Error, Result};

/// A single-label dataset exactly as read from a LETOR file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub groups: Vec<RawGroup>,
    pub feature_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawGroup {
    pub query_id: String,
    pub labels: Vec<f64>,
    pub features: Vec<Vec<f64>>,
}

impl RawDataset {
    pub fn num_items(&self) -> usize {
        self.groups.iter().map(|g| g.labels.len()).sum()
    }
}

struct SparseLine {
    label: f64,
    entries: Vec<(usize, f64)>,
}

/// Parse `label qid:<id> idx:val ...` lines. Indices are 1-based and strictly
/// increasing within a line; missing indices are densified to `0.0` and the
/// feature dimension is the largest index seen. Text after `#` is ignored.
/// Items are grouped by qid in order of first appearance, keeping file order
/// within each group.
pub fn parse_letor<R: BufRead>(reader: R) -> Result<RawDataset> {
    let mut grouped: IndexMap<String, Vec<SparseLine>> = IndexMap::new();
    let mut max_index = 0usize;

    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line.as_str(),
        };
        let mut tokens = content.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let err = |message: String| Error::Parse { line: line_no, message };

        let label = parse_finite(label_tok).ok_or_else(|| err(format!("invalid label {label_tok:?}")))?;
        let qid_tok = tokens.next().ok_or_else(|| err("missing qid".into()))?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .filter(|q| !q.is_empty())
            .ok_or_else(|| err(format!("expected qid:<id>, found {qid_tok:?}")))?;

        let mut entries = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| err(format!("expected idx:val, found {tok:?}")))?;
            let idx: usize = idx.parse().map_err(|_| err(format!("invalid feature index {idx:?}")))?;
            if idx == 0 {
                return Err(err("feature indices start at 1".into()));
            }
            if idx <= last {
                return Err(err(format!("feature index {idx} is not increasing")));
            }
            let val = parse_finite(val).ok_or_else(|| err(format!("invalid feature value {val:?}")))?;
            entries.push((idx, val));
            last = idx;
        }
        max_index = max_index.max(last);
        grouped.entry(qid.to_string()).or_default().push(SparseLine { label, entries });
    }

    if grouped.is_empty() {
        return Err(Error::EmptyInput);
    }

    let feature_dim = max_index;
    let groups = grouped
        .into_iter()
        .map(|(query_id, lines)| {
            let mut labels = Vec::with_capacity(lines.len());
            let mut features = Vec::with_capacity(lines.len());
            for line in lines {
                let mut dense = vec![0.0; feature_dim];
                for (idx, val) in line.entries {
                    dense[idx - 1] = val;
                }
                labels.push(line.label);
                features.push(dense);
            }
            RawGroup { query_id, labels, features }
        })
        .collect();
    Ok(RawDataset { groups, feature_dim })
}

fn parse_finite(tok: &str) -> Option<f64> {
    tok.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn parse_letor_file(path: impl AsRef<Path>) -> Result<RawDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    parse_letor(BufReader::new(file))
}

/// Write a dense LETOR file. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn write_letor<W: Write>(data: &RawDataset, mut out: W) -> Result<()> {
    for group in &data.groups {
        for (label, features) in group.labels.iter().zip(&group.features) {
            write!(out, "{} qid:{}", label, group.query_id)?;
            for (i, v) in features.iter().enumerate() {
                write!(out, " {}:{}", i + 1, v)?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_str(s: &str) -> Result<RawDataset> {
        parse_letor(s.as_bytes())
    }

    #[test]
    fn single_sparse_line() {
        let d = parse_str("2 qid:1 1:0.5 3:1.0").unwrap();
        assert_eq!(d.feature_dim, 3);
        assert_eq!(d.groups.len(), 1);
        assert_eq!(d.groups[0].labels, vec![2.0]);
        assert_eq!(d.groups[0].features[0], vec![0.5, 0.0, 1.0]);
    }

    #[test]
    fn two_queries() {
        let d = parse_str("1 qid:1 1:1\n0 qid:2 1:2\n").unwrap();
        assert_eq!(d.groups.len(), 2);
        assert!(d.groups.iter().all(|g| g.labels.len() == 1));
    }

    #[test]
    fn interleaved_qids_keep_first_appearance_order() {
        let d = parse_str("1 qid:b 1:1\n0 qid:a 1:2\n2 qid:b 1:3 # trailing comment\n").unwrap();
        assert_eq!(d.groups[0].query_id, "b");
        assert_eq!(d.groups[0].labels, vec![1.0, 2.0]);
        assert_eq!(d.groups[1].query_id, "a");
    }

    #[test]
    fn malformed_line_names_line_number() {
        match parse_str("x qid:1 1:a") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_str("1 qid:1 1:0.5\n1 qid:1 2:0.5 1:0.1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_str("1 1:0.5"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(matches!(parse_str(""), Err(Error::EmptyInput)));
        assert!(matches!(parse_str("\n  \n# only comments\n"), Err(Error::EmptyInput)));
    }

    fn raw_dataset() -> impl Strategy<Value = RawDataset> {
        (1usize..5, 1usize..4).prop_flat_map(|(p, m)| {
            let group = (1usize..5).prop_flat_map(move |n| {
                (
                    prop::collection::vec(-10.0f64..10.0, n),
                    prop::collection::vec(prop::collection::vec(-1e6f64..1e6, p), n),
                )
            });
            prop::collection::vec(group, m).prop_map(move |groups| RawDataset {
                feature_dim: p,
                groups: groups
                    .into_iter()
                    .enumerate()
                    .map(|(i, (labels, features))| RawGroup { query_id: format!("q{i}"), labels, features })
                    .collect(),
            })
        })
    }

    proptest! {
        #[test]
        fn write_then_parse_round_trips(data in raw_dataset()) {
            let mut buf = Vec::new();
            write_letor(&data, &mut buf).unwrap();
            let back = parse_letor(buf.as_slice()).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}
