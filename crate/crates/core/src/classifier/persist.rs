//! Plain-text model files.
//!
//! ```text
//! lvseg-forest v1
//! feature_dim 9801
//! hyper <toml of ForestHyper on one line per key, terminated by "end">
//! tree <n_nodes>
//! S <feature> <threshold> <left> <right>
//! L <basal> <mid> <apical>
//! ```
//! Thresholds use the shortest round-trip decimal form, so reloading is
//! lossless.

use std::io::{BufRead, BufReader, Read, Write};

use super::{DecisionTree, ForestHyper, Node, RandomForestModel};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "lvseg-forest v1";

fn werr(e: std::io::Error) -> Error {
    Error::io("<model>", e)
}

pub fn write_model<T: Real, W: Write>(mut w: W, model: &RandomForestModel<T>) -> Result<()> {
    let hyper = toml::to_string(&model.hyper).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("feature_dim {}\n", model.feature_dim));
    out.push_str("hyper\n");
    out.push_str(&hyper);
    out.push_str("end\n");
    out.push_str(&format!("trees {}\n", model.trees.len()));
    for t in &model.trees {
        out.push_str(&format!("tree {}\n", t.nodes.len()));
        for n in &t.nodes {
            match n {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => out.push_str(&format!("S {feature} {threshold} {left} {right}\n")),
                Node::Leaf { counts } => out.push_str(&format!("L {} {} {}\n", counts[0], counts[1], counts[2])),
            }
        }
    }
    w.write_all(out.as_bytes()).map_err(werr)
}

struct Lines<R> {
    inner: std::io::Lines<BufReader<R>>,
    no: usize,
}

impl<R: Read> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.no += 1;
        match self.inner.next() {
            Some(l) => l.map_err(werr),
            None => Err(self.bad("unexpected end of file")),
        }
    }

    fn bad(&self, what: &str) -> Error {
        Error::Parse(format!("model file line {}: {what}", self.no))
    }

    fn keyed(&mut self, key: &str) -> Result<usize> {
        let line = self.next()?;
        line.strip_prefix(key)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| self.bad(&format!("expected `{key} <count>`")))
    }
}

pub fn read_model<T: Real, R: Read>(r: R) -> Result<RandomForestModel<T>> {
    let mut lines = Lines {
        inner: BufReader::new(r).lines(),
        no: 0,
    };
    if lines.next()?.trim() != MAGIC {
        return Err(lines.bad("not an lvseg forest model"));
    }
    let feature_dim = lines.keyed("feature_dim")?;
    if lines.next()?.trim() != "hyper" {
        return Err(lines.bad("expected `hyper`"));
    }
    let mut hyper_text = String::new();
    loop {
        let l = lines.next()?;
        if l.trim() == "end" {
            break;
        }
        hyper_text.push_str(&l);
        hyper_text.push('\n');
    }
    let hyper: ForestHyper = toml::from_str(&hyper_text).map_err(|e| Error::Parse(e.to_string()))?;
    let n_trees = lines.keyed("trees")?;
    let mut trees = Vec::with_capacity(n_trees);
    for _ in 0..n_trees {
        let n_nodes = lines.keyed("tree")?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let line = lines.next()?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            let int = |s: &str| s.parse::<usize>().ok();
            let node = match tok.as_slice() {
                ["S", f, t, l, r] => {
                    let (Some(feature), Some(left), Some(right)) = (int(f), int(l), int(r)) else {
                        return Err(lines.bad("bad split node"));
                    };
                    let threshold = t.parse::<f64>().map_err(|_| lines.bad("bad threshold"))?;
                    if feature >= feature_dim || left >= n_nodes || right >= n_nodes {
                        return Err(lines.bad("split node index out of range"));
                    }
                    Node::Split {
                        feature,
                        threshold: T::lit(threshold),
                        left,
                        right,
                    }
                }
                ["L", a, b, c] => match (int(a), int(b), int(c)) {
                    (Some(a), Some(b), Some(c)) => Node::Leaf { counts: [a, b, c] },
                    _ => return Err(lines.bad("bad leaf node")),
                },
                _ => return Err(lines.bad("expected a node line")),
            };
            nodes.push(node);
        }
        if nodes.is_empty() {
            return Err(lines.bad("empty tree"));
        }
        trees.push(DecisionTree { nodes });
    }
    if trees.is_empty() {
        return Err(lines.bad("model has no trees"));
    }
    Ok(RandomForestModel {
        trees,
        hyper,
        feature_dim,
    })
}
