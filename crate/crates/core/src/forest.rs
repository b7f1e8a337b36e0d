//! Isolation trees and forests.
//!
//! Trees are grown without a depth cap until every build point sits alone in
//! a leaf. A point's score is its average depth over the forest; lower means
//! more anomalous.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Redraws of a split value that fell on the column maximum before the
/// midpoint is used instead.
const MAX_SPLIT_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Node {
    Leaf { size: u32 },
    Split { attr: u32, value: f64, left: u32, right: u32 },
}

/// A single isolation tree, stored as a flat arena with the root at slot 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ITree {
    nodes: Vec<Node>,
    dim: usize,
}

impl ITree {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self.nodes[0], Node::Leaf { .. })
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Root split as `(attribute, value)`, if the root is not a leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { attr, value, .. } => Some((attr as usize, value)),
            Node::Leaf { .. } => None,
        }
    }

    /// Depth of `point`: number of splits on the path from the root to its leaf.
    pub fn depth(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        Ok(self.depth_unchecked(point))
    }

    fn depth_unchecked(&self, point: &[f64]) -> usize {
        let mut at = 0usize;
        let mut depth = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return depth,
                Node::Split { attr, value, left, right } => {
                    depth += 1;
                    at = if point[attr as usize] <= value { left } else { right } as usize;
                }
            }
        }
    }

    fn to_nested(&self, at: usize) -> NestedNode {
        match self.nodes[at] {
            Node::Leaf { size } => NestedNode::Leaf { size },
            Node::Split { attr, value, left, right } => NestedNode::Split {
                attr,
                split: value,
                left: Box::new(self.to_nested(left as usize)),
                right: Box::new(self.to_nested(right as usize)),
            },
        }
    }

    fn from_nested(root: &NestedNode, dim: usize) -> Result<Self> {
        fn push(node: &NestedNode, dim: usize, nodes: &mut Vec<Node>) -> Result<u32> {
            let slot = nodes.len();
            match node {
                NestedNode::Leaf { size } => nodes.push(Node::Leaf { size: *size }),
                NestedNode::Split { attr, split, left, right } => {
                    if *attr as usize >= dim {
                        return Err(Error::DimensionMismatch { expected: dim, got: *attr as usize + 1 });
                    }
                    nodes.push(Node::Leaf { size: 0 });
                    let l = push(left, dim, nodes)?;
                    let r = push(right, dim, nodes)?;
                    nodes[slot] = Node::Split { attr: *attr, value: *split, left: l, right: r };
                }
            }
            Ok(slot as u32)
        }
        let mut nodes = Vec::new();
        push(root, dim, &mut nodes)?;
        Ok(Self { nodes, dim })
    }
}

/// Grows a tree over every row of `data`.
pub fn build_tree(data: &Dataset, rng: &mut Stream) -> ITree {
    let mut idx: Vec<usize> = (0..data.n()).collect();
    build_on(data, &mut idx, rng)
}

fn build_on(data: &Dataset, idx: &mut [usize], rng: &mut Stream) -> ITree {
    let mut nodes = Vec::with_capacity(2 * idx.len());
    grow(data, idx, rng, &mut nodes);
    ITree { nodes, dim: data.d() }
}

fn grow(data: &Dataset, idx: &mut [usize], rng: &mut Stream, nodes: &mut Vec<Node>) -> u32 {
    let slot = nodes.len();
    let leaf = Node::Leaf { size: idx.len() as u32 };
    if idx.len() <= 1 {
        nodes.push(leaf);
        return slot as u32;
    }

    // attributes that still take more than one value in this node
    let mut candidates: Vec<(usize, f64, f64)> = Vec::with_capacity(data.d());
    for j in 0..data.d() {
        let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            let v = data.value(r, j);
            (lo.min(v), hi.max(v))
        });
        if lo < hi {
            candidates.push((j, lo, hi));
        }
    }
    if candidates.is_empty() {
        nodes.push(leaf);
        return slot as u32;
    }

    let (attr, lo, hi) = candidates[rng.random_range(0..candidates.len())];
    let value = draw_split(lo, hi, rng);

    let mut cut = 0;
    for k in 0..idx.len() {
        if data.value(idx[k], attr) <= value {
            idx.swap(k, cut);
            cut += 1;
        }
    }

    nodes.push(leaf);
    let (left_idx, right_idx) = idx.split_at_mut(cut);
    let left = grow(data, left_idx, rng, nodes);
    let right = grow(data, right_idx, rng, nodes);
    nodes[slot] = Node::Split { attr: attr as u32, value, left, right };
    slot as u32
}

/// Uniform split in `[lo, hi]` that leaves at least one point on the right.
fn draw_split(lo: f64, hi: f64, rng: &mut Stream) -> f64 {
    for _ in 0..MAX_SPLIT_REDRAWS {
        let s = rng.random_range(lo..=hi);
        if s < hi {
            return s;
        }
    }
    lo + 0.5 * (hi - lo)
}

/// Indices of the rows a tree is built on: a uniform subsample without
/// replacement of size `min(psi, n)`. With `psi >= n` all rows are used and
/// the stream is left untouched.
pub fn draw_subsample(rng: &mut Stream, n: usize, psi: usize) -> Vec<usize> {
    if psi >= n {
        (0..n).collect()
    } else {
        rand::seq::index::sample(rng, n, psi).into_vec()
    }
}

/// The stream tree `m` of a forest with `seed` is built from.
pub fn tree_stream(seed: u64, m: usize) -> Stream {
    stream(seed, m as u64)
}

/// An ensemble of isolation trees.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<ITree>,
    subsample_size: usize,
    base_seed: u64,
    n_train: usize,
    dim: usize,
}

/// Fits `m_trees` trees, tree `m` on a subsample drawn from the stream keyed
/// by `(seed, m)`. The forest for a given seed is a prefix of any larger
/// forest with the same seed.
pub fn fit_forest(data: &Dataset, m_trees: usize, psi: usize, seed: u64) -> Result<Forest> {
    if m_trees == 0 {
        return Err(Error::InvalidParams("number of trees must be at least 1".into()));
    }
    if psi == 0 {
        return Err(Error::InvalidParams("subsample size must be at least 1".into()));
    }
    let n = data.n();
    let trees = (0..m_trees)
        .into_par_iter()
        .map(|m| {
            let mut rng = tree_stream(seed, m);
            let mut idx = draw_subsample(&mut rng, n, psi);
            build_on(data, &mut idx, &mut rng)
        })
        .collect();
    Ok(Forest { trees, subsample_size: psi.min(n), base_seed: seed, n_train: n, dim: data.d() })
}

impl Forest {
    pub fn trees(&self) -> &[ITree] {
        &self.trees
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn subsample_size(&self) -> usize {
        self.subsample_size
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        Ok(())
    }

    /// Per-tree depths of `point`, in tree order.
    pub fn depths(&self, point: &[f64]) -> Result<Vec<usize>> {
        self.check_dim(point)?;
        Ok(self.trees.iter().map(|t| t.depth_unchecked(point)).collect())
    }

    /// Mean depth of `point` over the first `m` trees.
    pub fn score_prefix(&self, point: &[f64], m: usize) -> Result<f64> {
        self.check_dim(point)?;
        let m = m.min(self.trees.len());
        if m == 0 {
            return Err(Error::InvalidParams("empty tree prefix".into()));
        }
        let total: usize = self.trees[..m].iter().map(|t| t.depth_unchecked(point)).sum();
        Ok(total as f64 / m as f64)
    }

    /// Scores every row of `data`, in row order.
    pub fn score_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        if data.d() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: data.d() });
        }
        Ok((0..data.n()).into_par_iter().map(|r| self.score_prefix(data.row(r), self.trees.len()).unwrap()).collect())
    }

    pub fn to_document(&self) -> ForestDocument {
        ForestDocument {
            format: FOREST_FORMAT.to_string(),
            version: FOREST_VERSION,
            subsample_size: self.subsample_size,
            base_seed: self.base_seed,
            n_train: self.n_train,
            dim: self.dim,
            trees: self.trees.iter().map(|t| t.to_nested(0)).collect(),
        }
    }

    pub fn from_document(doc: &ForestDocument) -> Result<Self> {
        if doc.version != FOREST_VERSION {
            return Err(Error::UnsupportedVersion(doc.version));
        }
        if doc.trees.is_empty() {
            return Err(Error::InvalidParams("forest document has no trees".into()));
        }
        let trees = doc.trees.iter().map(|t| ITree::from_nested(t, doc.dim)).collect::<Result<_>>()?;
        Ok(Self {
            trees,
            subsample_size: doc.subsample_size,
            base_seed: doc.base_seed,
            n_train: doc.n_train,
            dim: doc.dim,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// Mean depth of `point` over the forest.
pub fn score(forest: &Forest, point: &[f64]) -> Result<f64> {
    forest.score_prefix(point, forest.len())
}

pub const FOREST_FORMAT: &str = "isodepth-forest";
pub const FOREST_VERSION: u32 = 1;

/// Versioned JSON form of a [`Forest`]; trees are nested node objects.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestDocument {
    pub format: String,
    pub version: u32,
    pub subsample_size: usize,
    pub base_seed: u64,
    pub n_train: usize,
    pub dim: usize,
    pub trees: Vec<NestedNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NestedNode {
    Split { attr: u32, split: f64, left: Box<NestedNode>, right: Box<NestedNode> },
    Leaf { size: u32 },
}
