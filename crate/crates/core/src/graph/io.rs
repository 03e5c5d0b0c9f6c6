//! Text formats for graphs and partitions.
//!
//! Graph file: a header line `N E d`, then `E` lines `i j weight` with
//! 1-based node indices. Partition file: one cluster id per line, node order,
//! ids 1-based. Blank lines and lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use super::{EmpiricalGraph, Partition};
use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn field<T: std::str::FromStr>(tok: Option<&str>, name: &str, src: &str, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(src, line, format!("missing field `{name}`")))?;
    tok.parse()
        .map_err(|_| Error::parse(src, line, format!("field `{name}`: cannot parse `{tok}`")))
}

/// Parses a graph file; returns the graph and the signal dimension `d` from the header.
pub fn parse_graph(text: &str, src: &str) -> Result<(EmpiricalGraph, usize)> {
    let mut lines = content_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(src, 1, "missing header `N E d`"))?;
    let mut toks = header.split_whitespace();
    let n: usize = field(toks.next(), "N", src, hline)?;
    let e: usize = field(toks.next(), "E", src, hline)?;
    let d: usize = field(toks.next(), "d", src, hline)?;
    if d == 0 {
        return Err(Error::parse(src, hline, "dimension d must be positive"));
    }
    let mut edges = Vec::with_capacity(e);
    for (line, l) in lines {
        let mut toks = l.split_whitespace();
        let i: usize = field(toks.next(), "i", src, line)?;
        let j: usize = field(toks.next(), "j", src, line)?;
        let w: f64 = field(toks.next(), "weight", src, line)?;
        if i == 0 || j == 0 {
            return Err(Error::parse(src, line, "node indices are 1-based"));
        }
        edges.push((i - 1, j - 1, w));
    }
    if edges.len() != e {
        return Err(Error::parse(
            src,
            hline,
            format!("header declares {e} edges, file has {}", edges.len()),
        ));
    }
    let g = EmpiricalGraph::new(n, &edges).map_err(|err| Error::parse(src, hline, err.to_string()))?;
    Ok((g, d))
}

pub fn format_graph(g: &EmpiricalGraph, dim: usize) -> String {
    let mut out = String::new();
    writeln!(out, "{} {} {}", g.node_count(), g.edge_count(), dim).unwrap();
    for e in g.edges() {
        writeln!(out, "{} {} {}", e.low + 1, e.high + 1, e.weight).unwrap();
    }
    out
}

pub fn read_graph(path: &Path) -> Result<(EmpiricalGraph, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_graph(&text, &path.display().to_string())
}

pub fn write_graph(path: &Path, g: &EmpiricalGraph, dim: usize) -> Result<()> {
    std::fs::write(path, format_graph(g, dim)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn parse_partition(text: &str, src: &str) -> Result<Partition> {
    let mut assignment = Vec::new();
    for (line, l) in content_lines(text) {
        let id: usize = field(Some(l), "cluster id", src, line)?;
        if id == 0 {
            return Err(Error::parse(src, line, "cluster ids are 1-based"));
        }
        assignment.push(id - 1);
    }
    Partition::new(assignment).map_err(|err| Error::parse(src, 1, err.to_string()))
}

pub fn format_partition(p: &Partition) -> String {
    p.assignment().iter().map(|c| format!("{}\n", c + 1)).collect()
}

pub fn read_partition(path: &Path) -> Result<Partition> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_partition(&text, &path.display().to_string())
}

pub fn write_partition(path: &Path, p: &Partition) -> Result<()> {
    std::fs::write(path, format_partition(p)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
