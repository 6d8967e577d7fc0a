//! Graph documents (`.fgwg`).
//!
//! A graph document is a single JSON object:
//!
//! ```json
//! {"version": 1, "n": 2, "d": 1, "C": [0.0, 1.0, 1.0, 0.0], "F": [1.0, 0.0]}
//! ```
//!
//! `C` and `F` are stored row-major. Floats are written in shortest
//! round-trip form and parsed exactly, so documents round-trip bit for bit.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabeledGraph, MeasureGraph, RelaxedGraph};

pub const GRAPH_DOC_VERSION: u32 = 1;
pub const GRAPH_EXTENSION: &str = "fgwg";

#[derive(Debug, Serialize, Deserialize)]
struct GraphDocument {
    version: u32,
    n: usize,
    d: usize,
    #[serde(rename = "C")]
    c: Vec<f64>,
    #[serde(rename = "F")]
    f: Vec<f64>,
}

pub(crate) fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub(crate) fn from_row_major(rows: usize, cols: usize, data: &[f64]) -> Result<DMatrix<f64>> {
    if data.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} values for a {rows}x{cols} matrix, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, data))
}

pub fn serialize<G: MeasureGraph>(g: &G) -> String {
    let doc = GraphDocument {
        version: GRAPH_DOC_VERSION,
        n: g.order(),
        d: g.feature_dim(),
        c: row_major(g.adjacency()),
        f: row_major(g.features()),
    };
    serde_json::to_string(&doc).expect("graph documents always serialize")
}

fn parse(text: &str) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let doc: GraphDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if doc.version != GRAPH_DOC_VERSION {
        return Err(Error::SchemaVersionMismatch {
            found: doc.version,
            expected: GRAPH_DOC_VERSION,
        });
    }
    let c = from_row_major(doc.n, doc.n, &doc.c)?;
    let f = from_row_major(doc.n, doc.d, &doc.f)?;
    Ok((c, f))
}

pub fn deserialize_labeled(text: &str) -> Result<LabeledGraph> {
    let (c, f) = parse(text)?;
    LabeledGraph::new(c, f)
}

pub fn deserialize_relaxed(text: &str) -> Result<RelaxedGraph> {
    let (c, f) = parse(text)?;
    RelaxedGraph::new(c, f)
}

pub fn write_graph<G: MeasureGraph>(path: &Path, g: &G) -> Result<()> {
    let mut text = serialize(g);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_labeled(path: &Path) -> Result<LabeledGraph> {
    deserialize_labeled(&fs::read_to_string(path)?)
}

pub fn read_relaxed(path: &Path) -> Result<RelaxedGraph> {
    deserialize_relaxed(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn relaxed_quarter_round_trips() {
        let z = RelaxedGraph::new(dmatrix![0.0, 0.25; 0.25, 1.0], dmatrix![0.1, 0.2; 0.3, 1.0 / 3.0])
            .unwrap();
        let back = deserialize_relaxed(&serialize(&z)).unwrap();
        assert_eq!(back, z);
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(deserialize_labeled("{not json"), Err(Error::Parse(_))));
        assert!(matches!(
            deserialize_labeled(r#"{"version":1,"n":2,"d":1,"C":[0,1,1],"F":[0,0]}"#),
            Err(Error::Parse(_))
        ));
        assert!(matches!(
            deserialize_labeled(r#"{"version":7,"n":1,"d":1,"C":[0],"F":[0]}"#),
            Err(Error::SchemaVersionMismatch { found: 7, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.fgwg");
        let g = LabeledGraph::new(dmatrix![0.0, 1.0; 1.0, 0.0], dmatrix![2.0; 5.0]).unwrap();
        write_graph(&path, &g).unwrap();
        assert_eq!(read_labeled(&path).unwrap(), g);
    }

    proptest! {
        #[test]
        fn labeled_round_trip_is_exact(
            n in 1usize..8,
            d in 0usize..4,
            bits in proptest::collection::vec(any::<bool>(), 64),
            feats in proptest::collection::vec(-1e6f64..1e6, 32),
        ) {
            let c = DMatrix::from_fn(n, n, |i, j| {
                let (a, b) = if i <= j { (i, j) } else { (j, i) };
                if bits[a * 8 + b] { 1.0 } else { 0.0 }
            });
            let f = DMatrix::from_fn(n, d, |i, k| feats[(i * 4 + k) % 32] / 7.0);
            let g = LabeledGraph::new(c, f).unwrap();
            let back = deserialize_labeled(&serialize(&g)).unwrap();
            prop_assert_eq!(back, g);
        }
    }
}
