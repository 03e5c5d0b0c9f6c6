//! Instance bundles: one learning problem stored as a directory.
//!
//! ```text
//! bundle.json     {"model": "gaussian" | "logistic", "dim": d, "nodes": N}
//! graph.txt       graph file (header `N E d`, 1-based edge list)
//! attributes.csv  node_id,y,x_1..x_d[,sigma2]; an empty y marks an unobserved node
//! training.txt    one 1-based node id per line
//! truth.csv       optional, node_id,w_1..w_d
//! partition.txt   optional, one 1-based cluster id per line
//! ```
//!
//! Logistic labels are written as `-1`/`1`; `0`/`1` is accepted on input.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{AnyModel, GaussianLinearModel, LogisticModel};
use crate::graph::io::{format_graph, format_partition, parse_graph, read_partition};
use crate::graph::{EmpiricalGraph, Partition};
use crate::signal::NodeSignal;
use crate::training::TrainingSet;

pub const META_FILE: &str = "bundle.json";
pub const GRAPH_FILE: &str = "graph.txt";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const TRAINING_FILE: &str = "training.txt";
pub const TRUTH_FILE: &str = "truth.csv";
pub const PARTITION_FILE: &str = "partition.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gaussian,
    Logistic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleMeta {
    model: ModelKind,
    dim: usize,
    nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    manifest: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Bundle {
    pub graph: EmpiricalGraph,
    pub model: AnyModel,
    pub training: TrainingSet,
    pub truth: Option<NodeSignal>,
    pub partition: Option<Partition>,
}

impl Bundle {
    pub fn kind(&self) -> ModelKind {
        match self.model {
            AnyModel::Gaussian(_) => ModelKind::Gaussian,
            AnyModel::Logistic(_) => ModelKind::Logistic,
        }
    }

    pub fn dim(&self) -> usize {
        self.model.as_dyn().dim()
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<String>> {
        self.write_annotated(dir, None)
    }

    /// Writes the bundle files and returns their names. With `manifest`
    /// set, every file names it (a `#` comment, or a field in the JSON).
    pub fn write_annotated(&self, dir: &Path, manifest: Option<&str>) -> Result<Vec<String>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, body: String| -> Result<()> {
            let text = match manifest {
                Some(m) if name != META_FILE => format!("# manifest: {m}\n{body}"),
                _ => body,
            };
            write_text(&dir.join(name), &text)?;
            written.push(name.to_string());
            Ok(())
        };
        let meta = BundleMeta {
            model: self.kind(),
            dim: self.dim(),
            nodes: self.graph.node_count(),
            manifest: manifest.map(str::to_string),
        };
        let json = serde_json::to_string_pretty(&meta).map_err(|source| Error::Json {
            context: "bundle metadata".into(),
            source,
        })?;
        put(META_FILE, json + "\n")?;
        put(GRAPH_FILE, format_graph(&self.graph, self.dim()))?;
        put(ATTRIBUTES_FILE, format_attributes(&self.model))?;
        let mut training = String::new();
        for i in self.training.iter() {
            writeln!(training, "{}", i + 1).expect("writing to a String");
        }
        put(TRAINING_FILE, training)?;
        if let Some(truth) = &self.truth {
            put(TRUTH_FILE, format_weights(truth))?;
        }
        if let Some(p) = &self.partition {
            put(PARTITION_FILE, format_partition(p))?;
        }
        Ok(written)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let meta: BundleMeta = serde_json::from_str(&read_text(&meta_path)?).map_err(|source| Error::Json {
            context: meta_path.display().to_string(),
            source,
        })?;
        let graph_path = dir.join(GRAPH_FILE);
        let (graph, dim) = parse_graph(&read_text(&graph_path)?, &graph_path.display().to_string())?;
        if dim != meta.dim || graph.node_count() != meta.nodes {
            return Err(Error::Config(format!(
                "{}: graph header (N = {}, d = {dim}) disagrees with {META_FILE} (N = {}, d = {})",
                graph_path.display(),
                graph.node_count(),
                meta.nodes,
                meta.dim
            )));
        }
        let attr_path = dir.join(ATTRIBUTES_FILE);
        let model = parse_attributes(
            &read_text(&attr_path)?,
            &attr_path.display().to_string(),
            meta.model,
            meta.nodes,
            meta.dim,
        )?;
        let training_path = dir.join(TRAINING_FILE);
        let training = parse_training(
            &read_text(&training_path)?,
            &training_path.display().to_string(),
            meta.nodes,
        )?;
        let truth_path = dir.join(TRUTH_FILE);
        let truth = if truth_path.exists() {
            let w = parse_weights(&read_text(&truth_path)?, &truth_path.display().to_string())?;
            w.check_shape(meta.nodes, Some(meta.dim))?;
            Some(w)
        } else {
            None
        };
        let partition_path = dir.join(PARTITION_FILE);
        let partition = if partition_path.exists() {
            let p = read_partition(&partition_path)?;
            if p.node_count() != meta.nodes {
                return Err(Error::Config(format!(
                    "{}: {} entries for {} nodes",
                    partition_path.display(),
                    p.node_count(),
                    meta.nodes
                )));
            }
            p.validate(&graph)?;
            Some(p)
        } else {
            None
        };
        Ok(Self {
            graph,
            model,
            training,
            truth,
            partition,
        })
    }
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Data rows of a CSV file with their 1-based line numbers; the header row,
/// blank lines and `#` comments are skipped.
pub(crate) fn csv_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .skip(1)
        .map(|(k, l)| (k, l.split(',').map(str::trim).collect()))
}

fn number(tok: &str, column: &str, src: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::parse(src, line, format!("column `{column}`: `{tok}` is not a finite number")))
}

fn node_id(tok: &str, nodes: usize, src: &str, line: usize) -> Result<usize> {
    match tok.parse::<usize>() {
        Ok(id) if (1..=nodes).contains(&id) => Ok(id - 1),
        _ => Err(Error::parse(src, line, format!("node id `{tok}` is not in 1..={nodes}"))),
    }
}

/// `node_id,w_1..w_d`, one row per node.
pub fn format_weights(w: &NodeSignal) -> String {
    let mut out = String::from("node_id");
    for k in 1..=w.dim() {
        write!(out, ",w_{k}").expect("writing to a String");
    }
    out.push('\n');
    for (i, block) in w.blocks().enumerate() {
        write!(out, "{}", i + 1).expect("writing to a String");
        for v in block {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Inverse of [`format_weights`]; rows must appear in node order.
pub fn parse_weights(text: &str, src: &str) -> Result<NodeSignal> {
    let mut data = Vec::new();
    let mut dim = None;
    for (expected, (line, fields)) in csv_rows(text).enumerate() {
        if fields.len() < 2 {
            return Err(Error::parse(src, line, "expected node_id and at least one weight"));
        }
        let d = *dim.get_or_insert(fields.len() - 1);
        if fields.len() - 1 != d {
            return Err(Error::parse(src, line, format!("expected {} fields, found {}", d + 1, fields.len())));
        }
        if fields[0] != (expected + 1).to_string() {
            return Err(Error::parse(src, line, format!("expected node id {}, found `{}`", expected + 1, fields[0])));
        }
        for (k, tok) in fields[1..].iter().enumerate() {
            data.push(number(tok, &format!("w_{}", k + 1), src, line)?);
        }
    }
    let dim = dim.ok_or_else(|| Error::parse(src, 1, "no weight rows"))?;
    NodeSignal::from_flat(dim, data)
}

fn format_attributes(model: &AnyModel) -> String {
    let m = model.as_dyn();
    let d = m.dim();
    let mut out = String::from("node_id,y");
    for k in 1..=d {
        write!(out, ",x_{k}").expect("writing to a String");
    }
    let variances = match model {
        AnyModel::Gaussian(g) => Some(g.variances()),
        AnyModel::Logistic(_) => None,
    };
    if variances.is_some() {
        out.push_str(",sigma2");
    }
    out.push('\n');
    for i in 0..m.node_count() {
        let y = match model {
            AnyModel::Gaussian(g) => g.label(i),
            AnyModel::Logistic(l) => l.label(i),
        };
        write!(out, "{}", i + 1).expect("writing to a String");
        if y.is_nan() {
            out.push(',');
        } else {
            write!(out, ",{y}").expect("writing to a String");
        }
        for x in m.features(i).expect("built-in models expose features") {
            write!(out, ",{x}").expect("writing to a String");
        }
        if let Some(v) = variances {
            write!(out, ",{}", v[i]).expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Parses a node-attribute CSV. Gaussian files may carry a trailing
/// `sigma2` column; rows must cover every node exactly once.
pub fn parse_attributes(text: &str, src: &str, kind: ModelKind, nodes: usize, dim: usize) -> Result<AnyModel> {
    let header = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty() && !l.starts_with('#'))
        .ok_or_else(|| Error::parse(src, 1, "empty attribute file"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_variance = columns.len() == dim + 3 && columns.last() == Some(&"sigma2");
    if columns.len() != dim + 2 && !with_variance {
        return Err(Error::parse(
            src,
            1,
            format!("expected columns node_id,y,x_1..x_{dim}[,sigma2], found {}", columns.len()),
        ));
    }
    if with_variance && kind == ModelKind::Logistic {
        return Err(Error::parse(src, 1, "sigma2 column is only meaningful for gaussian models"));
    }
    let mut features = vec![f64::NAN; nodes * dim];
    let mut labels = vec![f64::NAN; nodes];
    let mut variances = vec![1.0; nodes];
    let mut seen = vec![false; nodes];
    for (line, fields) in csv_rows(text) {
        if fields.len() != columns.len() {
            return Err(Error::parse(
                src,
                line,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        let i = node_id(fields[0], nodes, src, line)?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(Error::parse(src, line, format!("node {} listed twice", i + 1)));
        }
        if !fields[1].is_empty() {
            labels[i] = number(fields[1], "y", src, line)?;
        }
        for k in 0..dim {
            features[i * dim + k] = number(fields[2 + k], columns[2 + k], src, line)?;
        }
        if with_variance {
            variances[i] = number(fields[dim + 2], "sigma2", src, line)?;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::parse(src, 1, format!("node {} has no attribute row", missing + 1)));
    }
    let wrap = |e: Error| Error::parse(src, 1, e.to_string());
    Ok(match kind {
        ModelKind::Gaussian => {
            AnyModel::Gaussian(GaussianLinearModel::new(dim, features, labels, Some(variances)).map_err(wrap)?)
        }
        ModelKind::Logistic => {
            AnyModel::Logistic(LogisticModel::from_binary_labels(dim, features, &labels).map_err(wrap)?)
        }
    })
}

/// One 1-based node id per line.
pub fn parse_training(text: &str, src: &str, nodes: usize) -> Result<TrainingSet> {
    let mut ids = Vec::new();
    for (k, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        ids.push(node_id(l, nodes, src, k + 1)?);
    }
    TrainingSet::new(nodes, ids).map_err(|e| Error::parse(src, 1, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_two_cluster, TwoClusterSpec};
    use crate::family::ExpFamilyModel;

    #[test]
    fn round_trip_preserves_everything() {
        let inst = gen_two_cluster(&TwoClusterSpec {
            noise: 0.1,
            seed: 3,
            ..TwoClusterSpec::default()
        })
        .unwrap();
        let bundle = Bundle {
            graph: inst.graph,
            model: AnyModel::Gaussian(inst.model),
            training: inst.training,
            truth: Some(inst.truth),
            partition: Some(inst.partition),
        };
        let dir = tempfile::tempdir().unwrap();
        bundle.write_annotated(dir.path(), Some("manifest.json")).unwrap();
        let back = Bundle::read(dir.path()).unwrap();
        assert_eq!(back.graph.edges(), bundle.graph.edges());
        assert_eq!(back.training, bundle.training);
        assert_eq!(back.truth, bundle.truth);
        assert_eq!(back.partition, bundle.partition);
        match (&back.model, &bundle.model) {
            (AnyModel::Gaussian(a), AnyModel::Gaussian(b)) => {
                assert_eq!(a.labels(), b.labels());
                for i in 0..80 {
                    assert_eq!(a.features(i), b.features(i));
                }
            }
            _ => panic!("model kind changed"),
        }
    }

    #[test]
    fn logistic_accepts_zero_one_labels() {
        let text = "node_id,y,x_1\n1,0,0.5\n2,1,-0.5\n3,,1\n";
        let m = parse_attributes(text, "a.csv", ModelKind::Logistic, 3, 1).unwrap();
        match m {
            AnyModel::Logistic(l) => {
                assert_eq!(l.label(0), -1.0);
                assert_eq!(l.label(1), 1.0);
                assert!(l.label(2).is_nan());
            }
            _ => panic!(),
        }
    }

    #[test]
    fn attribute_errors_name_the_line() {
        let text = "node_id,y,x_1\n1,0.5,1\n1,0.5,1\n";
        let err = parse_attributes(text, "a.csv", ModelKind::Gaussian, 2, 1).unwrap_err();
        assert!(err.to_string().starts_with("a.csv:3:"), "{err}");
        let text = "node_id,y,x_1\n1,0.5,abc\n";
        let err = parse_attributes(text, "a.csv", ModelKind::Gaussian, 1, 1).unwrap_err();
        assert!(err.to_string().contains("x_1"), "{err}");
    }

    #[test]
    fn training_ids_are_one_based() {
        assert!(parse_training("0\n", "t", 3).is_err());
        let t = parse_training("3\n1\n", "t", 3).unwrap();
        assert_eq!(t.nodes(), &[0, 2]);
    }

    #[test]
    fn weights_round_trip() {
        let w = NodeSignal::from_flat(2, vec![0.1, -2.5, 1e-17, 3.0]).unwrap();
        assert_eq!(parse_weights(&format_weights(&w), "w").unwrap(), w);
    }
}
