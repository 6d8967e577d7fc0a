//! Dataset manifests.
//!
//! A dataset directory holds `manifest.tsv` and one graph document per sample
//! under `graphs/`. The manifest is tab-separated with the header
//! `input<TAB>graph_path`. The input column is either a comma-separated
//! vector or a path (relative to the manifest) of a file holding one; graph
//! paths are relative to the manifest.
//!
//! Candidate sets use the same layout with the header `input_id<TAB>graph_path`,
//! one row per candidate.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::LabeledGraph;
use crate::io::{read_labeled, write_graph, GRAPH_EXTENSION};

pub const MANIFEST_NAME: &str = "manifest.tsv";
pub const CANDIDATES_NAME: &str = "candidates.tsv";
const MANIFEST_HEADER: &str = "input\tgraph_path";
const CANDIDATES_HEADER: &str = "input_id\tgraph_path";

/// Inputs and target graphs of a supervised graph prediction task.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub graphs: Vec<LabeledGraph>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// The samples at `indices`, in order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            graphs: indices.iter().map(|&i| self.graphs[i].clone()).collect(),
        }
    }
}

/// Formats a vector as comma-separated shortest round-trip floats.
pub fn format_vector(x: &[f64]) -> String {
    let mut s = String::new();
    for (i, v) in x.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{v}").unwrap();
    }
    s
}

/// Parses floats separated by commas and/or whitespace.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let values = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad number {t:?}: {e}"))))
        .collect::<Result<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(Error::Parse("empty input vector".into()));
    }
    Ok(values)
}

fn base_dir(manifest: &Path) -> PathBuf {
    manifest.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn table_rows<'a>(text: &'a str, header: &str, path: &Path) -> Result<Vec<(usize, &'a str, &'a str)>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == header => {}
        _ => {
            return Err(Error::Parse(format!("{}: expected header {header:?}", path.display())));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(Error::Parse(format!("{}:{}: expected two columns", path.display(), lineno + 1)));
        };
        rows.push((lineno + 1, a, b.trim_end()));
    }
    Ok(rows)
}

fn parse_input(field: &str, base: &Path) -> Result<Vec<f64>> {
    match parse_vector(field) {
        Ok(v) => Ok(v),
        Err(_) => parse_vector(&fs::read_to_string(base.join(field))?),
    }
}

/// Writes `dir/manifest.tsv` and `dir/graphs/gNNNNN.fgwg`.
pub fn write_dataset(dir: &Path, data: &Dataset) -> Result<PathBuf> {
    if data.inputs.len() != data.graphs.len() {
        return Err(Error::SizeMismatch { expected: data.inputs.len(), got: data.graphs.len() });
    }
    fs::create_dir_all(dir.join("graphs"))?;
    let mut manifest = String::from(MANIFEST_HEADER);
    manifest.push('\n');
    for (i, (x, g)) in data.inputs.iter().zip(&data.graphs).enumerate() {
        let rel = format!("graphs/g{i:05}.{GRAPH_EXTENSION}");
        write_graph(&dir.join(&rel), g)?;
        writeln!(manifest, "{}\t{rel}", format_vector(x)).unwrap();
    }
    let path = dir.join(MANIFEST_NAME);
    fs::write(&path, manifest)?;
    Ok(path)
}

/// Reads a dataset from a manifest file or a directory containing `manifest.tsv`.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let manifest = if path.is_dir() { path.join(MANIFEST_NAME) } else { path.to_path_buf() };
    let text = fs::read_to_string(&manifest)?;
    let base = base_dir(&manifest);
    let mut inputs = Vec::new();
    let mut graphs = Vec::new();
    let mut dim = None;
    for (lineno, input, graph) in table_rows(&text, MANIFEST_HEADER, &manifest)? {
        let x = parse_input(input, &base)?;
        if *dim.get_or_insert(x.len()) != x.len() {
            return Err(Error::Parse(format!(
                "{}:{lineno}: input has {} values, expected {}",
                manifest.display(),
                x.len(),
                dim.unwrap()
            )));
        }
        inputs.push(x);
        graphs.push(read_labeled(&base.join(graph))?);
    }
    if inputs.is_empty() {
        return Err(Error::Parse(format!("{}: dataset has no samples", manifest.display())));
    }
    Ok(Dataset { inputs, graphs })
}

/// Candidate graphs per test input id.
pub type CandidateSets = BTreeMap<usize, Vec<LabeledGraph>>;

/// Writes `dir/candidates.tsv` and `dir/candidates/cIIIII_JJJ.fgwg`.
pub fn write_candidates(dir: &Path, sets: &CandidateSets) -> Result<PathBuf> {
    fs::create_dir_all(dir.join("candidates"))?;
    let mut manifest = String::from(CANDIDATES_HEADER);
    manifest.push('\n');
    for (id, graphs) in sets {
        for (j, g) in graphs.iter().enumerate() {
            let rel = format!("candidates/c{id:05}_{j:03}.{GRAPH_EXTENSION}");
            write_graph(&dir.join(&rel), g)?;
            writeln!(manifest, "{id}\t{rel}").unwrap();
        }
    }
    let path = dir.join(CANDIDATES_NAME);
    fs::write(&path, manifest)?;
    Ok(path)
}

/// Reads a candidate manifest; rows keep their file order within each id.
pub fn read_candidates(path: &Path) -> Result<CandidateSets> {
    let manifest = if path.is_dir() { path.join(CANDIDATES_NAME) } else { path.to_path_buf() };
    let text = fs::read_to_string(&manifest)?;
    let base = base_dir(&manifest);
    let mut sets = CandidateSets::new();
    for (lineno, id, graph) in table_rows(&text, CANDIDATES_HEADER, &manifest)? {
        let id: usize = id
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("{}:{lineno}: bad input id: {e}", manifest.display())))?;
        sets.entry(id).or_default().push(read_labeled(&base.join(graph))?);
    }
    Ok(sets)
}
