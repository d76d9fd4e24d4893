//! File formats: tensor, pattern, graph and matrix JSON, and headerless CSV
//! data. Indices and vertex labels are 1-based on disk.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::SampleMatrix;
use crate::patterns::{
    diagonal_pattern, mean_independence_pattern, pattern_from_graph, pattern_from_partition, reflectional_pattern,
    IndependenceGraph, PartitionSpec, PatternKind, ZeroPattern,
};
use crate::tensor::{MultiIndex, SymmetricTensor};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryJson {
    idx: Vec<usize>,
    val: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorJson {
    order: usize,
    dim: usize,
    entries: Vec<EntryJson>,
}

/// Parses tensor JSON. Missing entries are zero; an index listed twice with
/// different values is an error.
pub fn tensor_from_json(text: &str) -> Result<SymmetricTensor> {
    let raw: TensorJson = serde_json::from_str(text)?;
    let entries = raw
        .entries
        .iter()
        .map(|e| Ok((MultiIndex::from_one_based(&e.idx)?, e.val)))
        .collect::<Result<Vec<_>>>()?;
    SymmetricTensor::from_entries(raw.order, raw.dim, &entries)
}

/// Serializes every canonical entry in colex order.
pub fn tensor_to_json(t: &SymmetricTensor) -> Result<String> {
    let raw = TensorJson {
        order: t.order(),
        dim: t.dim(),
        entries: t
            .entries()
            .map(|(idx, val)| EntryJson {
                idx: idx.iter().map(|i| i + 1).collect(),
                val,
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternJson {
    kind: String,
    order: usize,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    blocks: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    edges: Option<Vec<[usize; 2]>>,
}

fn one_based_blocks(d: usize, blocks: &[Vec<usize>]) -> Result<PartitionSpec> {
    let zero_based = blocks
        .iter()
        .map(|b| {
            b.iter()
                .map(|&v| {
                    v.checked_sub(1)
                        .ok_or_else(|| Error::InvalidPartition("vertex labels are 1-based".into()))
                })
                .collect()
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    PartitionSpec::new(d, zero_based)
}

fn one_based_edges(d: usize, edges: &[[usize; 2]]) -> Result<IndependenceGraph> {
    let zero_based = edges
        .iter()
        .map(|&[u, v]| match (u.checked_sub(1), v.checked_sub(1)) {
            (Some(u), Some(v)) => Ok((u, v)),
            _ => Err(Error::InvalidGraph("vertex labels are 1-based".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    IndependenceGraph::from_edges(d, &zero_based)
}

fn edges_to_json(g: &IndependenceGraph) -> Vec<[usize; 2]> {
    g.edges().into_iter().map(|(u, v)| [u + 1, v + 1]).collect()
}

pub fn pattern_from_json(text: &str) -> Result<ZeroPattern> {
    let raw: PatternJson = serde_json::from_str(text)?;
    let (d, r) = (raw.dim, raw.order);
    let needs = |field: &str, present: bool, other: bool| {
        if !present || other {
            Err(Error::InvalidInput(format!(
                "pattern kind '{}' requires exactly the '{field}' field",
                raw.kind
            )))
        } else {
            Ok(())
        }
    };
    let neither = |present: bool| {
        if present {
            Err(Error::InvalidInput(format!(
                "pattern kind '{}' takes neither blocks nor edges",
                raw.kind
            )))
        } else {
            Ok(())
        }
    };
    let has_blocks = raw.blocks.is_some();
    let has_edges = raw.edges.is_some();
    match raw.kind.as_str() {
        "partition" => {
            needs("blocks", has_blocks, has_edges)?;
            pattern_from_partition(&one_based_blocks(d, raw.blocks.as_deref().unwrap_or_default())?, r)
        }
        "graph" => {
            needs("edges", has_edges, has_blocks)?;
            pattern_from_graph(&one_based_edges(d, raw.edges.as_deref().unwrap_or_default())?, r)
        }
        "diagonal" => {
            neither(has_blocks || has_edges)?;
            diagonal_pattern(d, r)
        }
        "reflectional" => {
            neither(has_blocks || has_edges)?;
            reflectional_pattern(d, r)
        }
        "mean_independence" => {
            neither(has_blocks || has_edges)?;
            mean_independence_pattern(d, r)
        }
        other => Err(Error::InvalidInput(format!("unknown pattern kind '{other}'"))),
    }
}

pub fn pattern_to_json(p: &ZeroPattern) -> Result<String> {
    let (blocks, edges) = match p.kind() {
        PatternKind::Partition(spec) => (
            Some(spec.blocks().iter().map(|b| b.iter().map(|v| v + 1).collect()).collect()),
            None,
        ),
        PatternKind::Graph(g) => (None, Some(edges_to_json(g))),
        PatternKind::Union(_) => {
            return Err(Error::InvalidInput("union patterns have no file format".into()));
        }
        _ => (None, None),
    };
    let raw = PatternJson {
        kind: p.kind().name().to_string(),
        order: p.order(),
        dim: p.dim(),
        blocks,
        edges,
    };
    Ok(serde_json::to_string_pretty(&raw)?)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphJson {
    dim: usize,
    edges: Vec<[usize; 2]>,
}

/// Graph JSON: `{"dim": d, "edges": [[u, v], ...]}`.
pub fn graph_from_json(text: &str) -> Result<IndependenceGraph> {
    let raw: GraphJson = serde_json::from_str(text)?;
    one_based_edges(raw.dim, &raw.edges)
}

pub fn graph_to_json(g: &IndependenceGraph) -> Result<String> {
    Ok(serde_json::to_string_pretty(&GraphJson {
        dim: g.d(),
        edges: edges_to_json(g),
    })?)
}

pub fn read_text(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(text.as_bytes())?;
    if !text.ends_with('\n') {
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &serde_json::to_string_pretty(value)?)
}

/// Reads headerless comma-separated rows; the column count fixes `d`.
pub fn read_csv<R: Read>(reader: R) -> Result<SampleMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut values = Vec::new();
    let mut d = None;
    let mut n = 0;
    for record in rdr.records() {
        let record = record?;
        match d {
            None => d = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    found: record.len(),
                })
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::InvalidInput(format!("row {}: '{field}' is not a number", n + 1)))?;
            values.push(v);
        }
        n += 1;
    }
    let d = d.ok_or_else(|| Error::InvalidInput("data file has no rows".into()))?;
    SampleMatrix::new(n, d, values)
}

pub fn read_csv_file(path: &Path) -> Result<SampleMatrix> {
    read_csv(BufReader::new(File::open(path)?))
}

/// Writes one row per observation using the shortest round-tripping decimal
/// form of each value.
pub fn write_csv<W: Write>(writer: W, x: &SampleMatrix) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    let mut fields = Vec::with_capacity(x.d());
    for row in x.rows() {
        fields.clear();
        fields.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, x: &SampleMatrix) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), x)
}
