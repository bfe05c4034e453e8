//! Edge-list and manifest files.
//!
//! The edge-list format is the whitespace-separated two-column layout used
//! by common network repositories: `#` starts a comment, duplicate edges
//! and self-loops are dropped (and counted). Writers emit one `# nodes: N`
//! comment so graphs with trailing isolated nodes survive a save/load round
//! trip; other tools treat it as a comment. When that header is present and
//! every node id is an integer below `N`, ids are taken literally, so a
//! save/load round trip preserves the labeling exactly. Otherwise (foreign
//! files) ids are arbitrary whitespace-free strings compacted to `0..n` in
//! order of first appearance.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graphs::Graph;

/// A parsed edge list plus what was dropped to make the graph simple.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Original node ids, indexed by compacted node index.
    pub node_ids: Vec<String>,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

/// Reads a whitespace edge list. Fails on unparseable lines (with the line
/// number) and on files that define neither edges nor a node count.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);

    let mut raw: Vec<(String, String)> = Vec::new();
    let mut declared_nodes: Option<usize> = None;

    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(rest) = comment.trim().strip_prefix("nodes:") {
                if let Ok(n) = rest.trim().parse::<usize>() {
                    declared_nodes = Some(declared_nodes.unwrap_or(0).max(n));
                }
            }
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        match (tokens.next(), tokens.next(), tokens.next()) {
            (Some(a), Some(b), None) => raw.push((a.to_string(), b.to_string())),
            _ => {
                return Err(Error::ParseEdgeList {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    msg: format!("expected two whitespace-separated node ids, got {trimmed:?}"),
                })
            }
        }
    }

    // Our own files: declared size plus in-range integer ids, taken
    // literally. Anything else compacts ids by first appearance.
    let literal_ids = declared_nodes.filter(|&n| {
        raw.iter().all(|(a, b)| {
            [a, b]
                .iter()
                .all(|tok| tok.parse::<usize>().is_ok_and(|v| v < n))
        })
    });

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut seen: std::collections::HashSet<(u32, u32)> = std::collections::HashSet::new();
    let mut pairs: Vec<(u32, u32)> = Vec::new();
    let mut self_loops = 0usize;
    let mut duplicates = 0usize;
    for (a, b) in &raw {
        let mut intern = |tok: &str| -> u32 {
            if let Some(&i) = index.get(tok) {
                i
            } else {
                let i = ids.len() as u32;
                ids.push(tok.to_string());
                index.insert(tok.to_string(), i);
                i
            }
        };
        let (ia, ib) = if literal_ids.is_some() {
            (
                a.parse::<u32>().expect("checked above"),
                b.parse::<u32>().expect("checked above"),
            )
        } else {
            (intern(a), intern(b))
        };
        if ia == ib {
            self_loops += 1;
            continue;
        }
        let key = if ia < ib { (ia, ib) } else { (ib, ia) };
        if seen.insert(key) {
            pairs.push(key);
        } else {
            duplicates += 1;
        }
    }

    let n = match literal_ids {
        Some(n) => n,
        None => declared_nodes.unwrap_or(0).max(ids.len()),
    };
    if n == 0 {
        return Err(Error::EmptyEdgeList {
            path: path.to_path_buf(),
        });
    }
    if literal_ids.is_some() {
        ids = (0..n).map(|i| i.to_string()).collect();
    }
    let graph = Graph::from_edges(n, pairs.into_iter().map(|(a, b)| (a as usize, b as usize)))?;
    Ok(LoadedGraph {
        graph,
        node_ids: ids,
        self_loops_dropped: self_loops,
        duplicates_dropped: duplicates,
    })
}

/// Writes the edge list: a `# nodes: N` header, then one `i j` line per
/// edge with `i < j`, pairs ascending. `load_edge_list` inverts this
/// exactly.
pub fn save_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    writeln!(w, "# nodes: {}", g.n()).map_err(io_err)?;
    for (a, b) in g.edges() {
        writeln!(w, "{a} {b}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

/// One row of a collection manifest: a graph file and an optional integer
/// class label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: Option<usize>,
}

/// Reads a `path,label` CSV manifest. The label column may be empty when
/// ground truth is unknown.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
    {
        let headers = reader.headers().map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let names: Vec<&str> = headers.iter().collect();
        if names.first() != Some(&"path") || names.get(1) != Some(&"label") {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("expected header \"path,label\", got {:?}", names.join(",")),
            });
        }
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            msg: format!("row {}: {e}", i + 2),
        })?;
        let file = record.get(0).unwrap_or("");
        if file.is_empty() {
            return Err(Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("row {}: empty path", i + 2),
            });
        }
        let label = match record.get(1) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<usize>().map_err(|_| Error::Manifest {
                path: path.to_path_buf(),
                msg: format!("row {}: label {s:?} is not a non-negative integer", i + 2),
            })?),
        };
        entries.push(ManifestEntry {
            path: PathBuf::from(file),
            label,
        });
    }
    if entries.is_empty() {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            msg: "manifest lists no graphs".into(),
        });
    }
    Ok(entries)
}

pub fn save_manifest(entries: &[ManifestEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let write_err = |e: csv::Error| Error::Manifest {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    w.write_record(["path", "label"]).map_err(write_err)?;
    for entry in entries {
        let label = entry.label.map(|l| l.to_string()).unwrap_or_default();
        w.write_record([entry.path.to_string_lossy().as_ref(), &label])
            .map_err(write_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
