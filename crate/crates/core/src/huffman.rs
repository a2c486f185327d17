//! Per-step Huffman codebooks over a candidate pool.
//!
//! Construction is the classic two-queue algorithm: leaves sorted by
//! ascending weight in one queue, merged nodes (which come out in
//! non-decreasing weight order) in the other. Equal weights merge in creation
//! order, and leaves are created in pool order, so the tree is a pure function
//! of the pool.
//!
//! Branch labels follow the local-ordering rule: at every internal node the
//! heavier subtree hangs on the `0` branch, ties going to the subtree holding
//! the smaller token id. A zero-heavy bitstream therefore walks towards the
//! likely tokens.

use std::cmp::Ordering;
use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::bits::BitStream;
use crate::scalar::Weight;
use crate::TokenId;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HuffmanError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("token {0} has a non-positive weight")]
    NonPositiveWeight(TokenId),
    #[error("token {0} appears more than once in the pool")]
    DuplicateToken(TokenId),
    #[error("token {0} is not in the codebook")]
    UnknownToken(TokenId),
}

/// Pool ordering: descending weight, ties by ascending token id.
pub(crate) fn rank_order<W: PartialOrd>(a: &(TokenId, W), b: &(TokenId, W)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then(a.0.cmp(&b.0))
}

/// Non-empty list of `(token, weight)` kept in descending-weight order.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool<W> {
    entries: Vec<(TokenId, W)>,
}

impl<W: Weight> CandidatePool<W> {
    pub fn new(mut entries: Vec<(TokenId, W)>) -> Result<Self, HuffmanError> {
        if entries.is_empty() {
            return Err(HuffmanError::EmptyPool);
        }
        if let Some((t, _)) = entries.iter().find(|(_, w)| !(*w > W::zero())) {
            return Err(HuffmanError::NonPositiveWeight(*t));
        }
        entries.sort_by(rank_order);
        let mut ids: Vec<TokenId> = entries.iter().map(|(t, _)| *t).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(HuffmanError::DuplicateToken(w[0]));
        }
        Ok(Self { entries })
    }

    /// Caller guarantees ordering, positivity, uniqueness and non-emptiness.
    pub(crate) fn from_ranked(entries: Vec<(TokenId, W)>) -> Self {
        debug_assert!(!entries.is_empty());
        debug_assert!(entries.windows(2).all(|w| rank_order(&w[0], &w[1]) != Ordering::Greater));
        Self { entries }
    }

    pub fn entries(&self) -> &[(TokenId, W)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self) -> TokenId {
        self.entries[0].0
    }

    pub fn tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.entries.iter().map(|(t, _)| *t)
    }

    pub fn contains(&self, token: TokenId) -> bool {
        self.entries.iter().any(|(t, _)| *t == token)
    }

    pub fn weight_of(&self, token: TokenId) -> Option<&W> {
        self.entries.iter().find(|(t, _)| *t == token).map(|(_, w)| w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodeNode {
    Leaf(TokenId),
    Branch { zero: usize, one: usize },
}

/// Prefix-free code over a pool, with its tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HuffmanCodebook {
    nodes: Vec<CodeNode>,
    root: usize,
    codes: HashMap<TokenId, BitStream>,
    order: Vec<TokenId>,
}

struct Building<W> {
    weight: W,
    min_token: TokenId,
}

/// Builds the codebook for a pool. A singleton pool yields the empty code.
pub fn build_codebook<W: Weight>(pool: &CandidatePool<W>) -> HuffmanCodebook {
    let n = pool.len();
    let mut nodes: Vec<CodeNode> = Vec::with_capacity(2 * n - 1);
    let mut info: Vec<Building<W>> = Vec::with_capacity(2 * n - 1);
    for (token, weight) in pool.entries() {
        nodes.push(CodeNode::Leaf(*token));
        info.push(Building {
            weight: weight.clone(),
            min_token: *token,
        });
    }

    // Stable sort keeps creation order among equal weights.
    let mut leaf_order: Vec<usize> = (0..n).collect();
    leaf_order.sort_by(|&a, &b| {
        info[a]
            .weight
            .partial_cmp(&info[b].weight)
            .unwrap_or(Ordering::Equal)
    });
    let mut leaves: VecDeque<usize> = leaf_order.into();
    let mut merged: VecDeque<usize> = VecDeque::with_capacity(n);

    let pop_min = |leaves: &mut VecDeque<usize>, merged: &mut VecDeque<usize>, info: &[Building<W>]| {
        match (leaves.front(), merged.front()) {
            (Some(&l), Some(&m)) => {
                // Leaves were created before every merged node, so they win ties.
                if info[m].weight < info[l].weight {
                    merged.pop_front()
                } else {
                    leaves.pop_front()
                }
            }
            (Some(_), None) => leaves.pop_front(),
            (None, Some(_)) => merged.pop_front(),
            (None, None) => None,
        }
    };

    while leaves.len() + merged.len() > 1 {
        let a = pop_min(&mut leaves, &mut merged, &info).expect("two nodes available");
        let b = pop_min(&mut leaves, &mut merged, &info).expect("two nodes available");
        let heavier_first = match info[a].weight.partial_cmp(&info[b].weight) {
            Some(Ordering::Greater) => true,
            Some(Ordering::Less) => false,
            _ => info[a].min_token < info[b].min_token,
        };
        let (zero, one) = if heavier_first { (a, b) } else { (b, a) };
        let weight = info[a].weight.clone() + info[b].weight.clone();
        let min_token = info[a].min_token.min(info[b].min_token);
        nodes.push(CodeNode::Branch { zero, one });
        info.push(Building { weight, min_token });
        merged.push_back(nodes.len() - 1);
    }

    let root = nodes.len() - 1;
    let mut codes = HashMap::with_capacity(n);
    let mut stack = vec![(root, BitStream::new())];
    while let Some((idx, prefix)) = stack.pop() {
        match nodes[idx] {
            CodeNode::Leaf(token) => {
                codes.insert(token, prefix);
            }
            CodeNode::Branch { zero, one } => {
                let mut z = prefix.clone();
                z.push(false);
                let mut o = prefix;
                o.push(true);
                stack.push((one, o));
                stack.push((zero, z));
            }
        }
    }

    HuffmanCodebook {
        nodes,
        root,
        codes,
        order: pool.tokens().collect(),
    }
}

impl HuffmanCodebook {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, index: usize) -> CodeNode {
        self.nodes[index]
    }

    pub fn nodes(&self) -> &[CodeNode] {
        &self.nodes
    }

    /// Tokens in pool order.
    pub fn tokens(&self) -> &[TokenId] {
        &self.order
    }

    pub fn code_of(&self, token: TokenId) -> Result<&BitStream, HuffmanError> {
        self.codes
            .get(&token)
            .ok_or(HuffmanError::UnknownToken(token))
    }

    /// `(token, code)` pairs in pool order.
    pub fn codes(&self) -> impl Iterator<Item = (TokenId, &BitStream)> + '_ {
        self.order.iter().map(move |t| (*t, &self.codes[t]))
    }

    /// Walks the tree along `bits` and returns the leaf reached plus the
    /// number of input bits consumed. If the input runs out before a leaf,
    /// the walk continues down `0` branches; those padding steps are not
    /// counted as consumed.
    pub fn match_prefix(&self, bits: &[bool]) -> (TokenId, usize) {
        let mut idx = self.root;
        let mut consumed = 0;
        loop {
            match self.nodes[idx] {
                CodeNode::Leaf(token) => return (token, consumed),
                CodeNode::Branch { zero, one } => {
                    idx = match bits.get(consumed) {
                        Some(&bit) => {
                            consumed += 1;
                            if bit {
                                one
                            } else {
                                zero
                            }
                        }
                        None => zero,
                    };
                }
            }
        }
    }
}
