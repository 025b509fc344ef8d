//! Edge-list text formats.
//!
//! The canonical format is one edge per line, `src<TAB>dst<TAB>level`, with
//! `#` comment lines. Levels are integers or one of the four trust level
//! names. Conversion from raw dumps additionally accepts whitespace
//! separated columns and Graphviz-style lines such as
//! `"alice" -> "bob" [level="Master"];`.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{Edge, TrustGraph};
use crate::error::{Error, Result};

pub const LEVEL_NAMES: [&str; 4] = ["observer", "apprentice", "journeyer", "master"];

pub fn parse_level(raw: &str, num_relations: usize) -> std::result::Result<usize, String> {
    let raw = raw.trim().trim_matches('"');
    let level = match raw.parse::<usize>() {
        Ok(v) => v,
        Err(_) => LEVEL_NAMES
            .iter()
            .position(|n| n.eq_ignore_ascii_case(raw))
            .ok_or_else(|| format!("unknown trust level `{raw}`"))?,
    };
    if level >= num_relations {
        return Err(format!("level {level} outside 0..{num_relations}"));
    }
    Ok(level)
}

struct Builder {
    num_relations: usize,
    ids: HashMap<String, usize>,
    names: Vec<String>,
    edges: Vec<Edge>,
    seen: HashMap<(usize, usize), usize>,
}

impl Builder {
    fn new(num_relations: usize) -> Self {
        Self {
            num_relations,
            ids: HashMap::new(),
            names: Vec::new(),
            edges: Vec::new(),
            seen: HashMap::new(),
        }
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.ids.insert(name.to_string(), id);
        self.names.push(name.to_string());
        id
    }

    fn push(&mut self, line: usize, src: &str, dst: &str, level: &str) -> Result<()> {
        let parse_err = |msg: String| Error::Parse { line, msg };
        if src.is_empty() || dst.is_empty() {
            return Err(parse_err("empty node id".into()));
        }
        let rel = parse_level(level, self.num_relations).map_err(parse_err)?;
        if src == dst {
            return Err(parse_err(format!("self-loop on `{src}`")));
        }
        let (s, d) = (self.intern(src), self.intern(dst));
        match self.seen.get(&(s, d)) {
            Some(&prev) if prev == rel => Ok(()),
            Some(&prev) => Err(parse_err(format!(
                "`{src}` -> `{dst}` already has level {prev}, got {rel}"
            ))),
            None => {
                self.seen.insert((s, d), rel);
                self.edges.push(Edge::new(s, d, rel));
                Ok(())
            }
        }
    }

    fn finish(self) -> Result<TrustGraph> {
        TrustGraph::with_node_ids(self.names, self.num_relations, self.edges)
    }
}

fn is_skippable(line: &str) -> bool {
    let t = line.trim();
    t.is_empty() || t.starts_with('#')
}

/// Parses `"a" -> "b" [level="Master"];`.
fn parse_dot_line(line: &str) -> Option<(String, String, String)> {
    let (lhs, rest) = line.split_once("->")?;
    let src = lhs.trim().trim_matches('"').to_string();
    let (dst_part, attrs) = match rest.split_once('[') {
        Some((d, a)) => (d, a),
        None => return None,
    };
    let dst = dst_part.trim().trim_matches('"').to_string();
    let after = attrs.split_once("level")?.1;
    let value = after.split_once('=')?.1;
    let value = value
        .trim()
        .trim_start_matches('"')
        .split(['"', ']', ',', ';'])
        .next()?
        .trim()
        .to_string();
    Some((src, dst, value))
}

impl TrustGraph {
    /// Reads a TSV edge list. When the `.nodes.tsv` sidecar exists the ids
    /// are dense indices into it; otherwise they are arbitrary strings.
    pub fn load(path: impl AsRef<Path>, num_relations: usize) -> Result<TrustGraph> {
        let path = path.as_ref();
        let file = fs::File::open(path)?;
        let sidecar = sidecar_path(path);
        if sidecar.is_file() {
            Self::read_dense(file, load_node_map(sidecar)?, num_relations)
        } else {
            Self::read_tsv(file, num_relations)
        }
    }

    /// [`TrustGraph::load`], falling back to [`TrustGraph::read_raw`] when the
    /// file is not a TSV edge list. The TSV error is reported if both fail.
    pub fn load_any(path: impl AsRef<Path>, num_relations: usize) -> Result<TrustGraph> {
        let path = path.as_ref();
        match Self::load(path, num_relations) {
            Err(tsv_err @ Error::Parse { .. }) => {
                Self::read_raw(fs::File::open(path)?, num_relations).map_err(|_| tsv_err)
            }
            other => other,
        }
    }

    /// Reads the canonical format whose ids index `node_ids`.
    pub fn read_dense(reader: impl Read, node_ids: Vec<String>, num_relations: usize) -> Result<TrustGraph> {
        let n = node_ids.len();
        let mut edges = Vec::new();
        let mut seen = HashMap::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if is_skippable(&line) {
                continue;
            }
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            let [s, d, l] = fields.as_slice() else {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let id = |raw: &str| -> Result<usize> {
                match raw.trim().parse::<usize>() {
                    Ok(v) if v < n => Ok(v),
                    _ => Err(err(format!("node `{raw}` is not a dense id below {n}"))),
                }
            };
            let (s, d) = (id(s)?, id(d)?);
            let rel = parse_level(l, num_relations).map_err(err)?;
            if s == d {
                return Err(err(format!("self-loop on {s}")));
            }
            match seen.insert((s, d), rel) {
                Some(prev) if prev != rel => {
                    return Err(err(format!("{s} -> {d} already has level {prev}, got {rel}")))
                }
                Some(_) => {}
                None => edges.push(Edge::new(s, d, rel)),
            }
        }
        TrustGraph::with_node_ids(node_ids, num_relations, edges)
    }

    pub fn read_tsv(reader: impl Read, num_relations: usize) -> Result<TrustGraph> {
        let mut b = Builder::new(num_relations);
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if is_skippable(&line) {
                continue;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
                });
            }
            b.push(i + 1, fields[0].trim(), fields[1].trim(), fields[2])?;
        }
        b.finish()
    }

    /// Reads raw edge dumps: tab or whitespace separated columns, or
    /// Graphviz edge statements. Lines that are neither (graph headers,
    /// braces) are skipped when they contain no `->`.
    pub fn read_raw(reader: impl Read, num_relations: usize) -> Result<TrustGraph> {
        let mut b = Builder::new(num_relations);
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line?;
            if is_skippable(&line) {
                continue;
            }
            let line = line.trim_end_matches('\r');
            let trimmed = line.trim();
            if trimmed.starts_with("digraph") || trimmed.starts_with("graph") || trimmed == "}" {
                continue;
            }
            if line.contains("->") {
                let (s, d, l) = parse_dot_line(line).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    msg: "could not parse edge statement".into(),
                })?;
                b.push(i + 1, &s, &d, &l)?;
                continue;
            }
            let fields: Vec<&str> = if line.contains('\t') {
                line.split('\t').map(str::trim).collect()
            } else {
                line.split_whitespace().collect()
            };
            match fields.as_slice() {
                [s, d, l] => b.push(i + 1, s, d, l)?,
                _ => {
                    return Err(Error::Parse {
                        line: i + 1,
                        msg: format!("expected `src dst level`, found {} fields", fields.len()),
                    })
                }
            }
        }
        b.finish()
    }

    /// Writes the canonical format with dense ids.
    pub fn write_tsv(&self, mut w: impl Write) -> Result<()> {
        for e in self.edges() {
            writeln!(w, "{}\t{}\t{}", e.src, e.dst, e.rel)?;
        }
        Ok(())
    }

    pub fn write_node_map(&self, mut w: impl Write) -> Result<()> {
        for (i, id) in self.node_ids().iter().enumerate() {
            writeln!(w, "{i}\t{id}")?;
        }
        Ok(())
    }

    /// Writes `path` and its `.nodes.tsv` sidecar.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_tsv(&mut buf)?;
        fs::write(path, buf)?;
        let mut map = Vec::new();
        self.write_node_map(&mut map)?;
        fs::write(sidecar_path(path), map)?;
        Ok(())
    }
}

/// `data/advogato.tsv` -> `data/advogato.nodes.tsv`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("nodes.tsv")
}

/// Reads a `dense_id<TAB>original_id` map. Dense ids must be `0..n` in order.
pub fn load_node_map(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if is_skippable(line) {
            continue;
        }
        let (id, orig) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: "expected `dense_id<TAB>original_id`".into(),
        })?;
        let id: usize = id.trim().parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad dense id `{id}`"),
        })?;
        if id != out.len() {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("dense id {id} out of order, expected {}", out.len()),
            });
        }
        out.push(orig.to_string());
    }
    Ok(out)
}
