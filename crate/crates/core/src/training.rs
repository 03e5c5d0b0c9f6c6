use crate::error::{Error, Result};

/// The labelled nodes `M ⊆ V`: sorted, duplicate-free, nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingSet {
    nodes: Vec<usize>,
    member: Vec<bool>,
}

impl TrainingSet {
    pub fn new(node_count: usize, nodes: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut member = vec![false; node_count];
        for i in nodes {
            if i >= node_count {
                return Err(Error::invalid(format!(
                    "training node {i} out of range 0..{node_count}"
                )));
            }
            member[i] = true;
        }
        let nodes: Vec<usize> = (0..node_count).filter(|&i| member[i]).collect();
        if nodes.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        Ok(Self { nodes, member })
    }

    pub fn all(node_count: usize) -> Result<Self> {
        Self::new(node_count, 0..node_count)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.member.len()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member.get(i).copied().unwrap_or(false)
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().copied()
    }
}
