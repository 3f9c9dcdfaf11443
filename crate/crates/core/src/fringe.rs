//! Canonical (AHU) encodings of small rooted trees.
//!
//! A tree is encoded as `(` + the sorted codes of its children + `)`. Two
//! rooted trees are isomorphic iff their codes are equal.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FringeTree {
    code: String,
    size: usize,
}

impl FringeTree {
    /// The single-vertex tree `()`.
    pub fn leaf() -> Self {
        FringeTree {
            code: "()".to_owned(),
            size: 1,
        }
    }

    /// Canonical form of the tree rooted at `root` in an adjacency of child lists.
    pub fn from_children(children: &[Vec<usize>], root: usize) -> Self {
        // iterative post-order; codes[v] filled once all children are done
        let mut codes: HashMap<usize, String> = HashMap::new();
        let mut stack = vec![(root, false)];
        let mut size = 0;
        while let Some((v, expanded)) = stack.pop() {
            if expanded {
                let mut kids: Vec<String> = children[v]
                    .iter()
                    .map(|c| codes.remove(c).expect("child encoded before parent"))
                    .collect();
                codes.insert(v, wrap_sorted(&mut kids));
                size += 1;
            } else {
                stack.push((v, true));
                stack.extend(children[v].iter().map(|&c| (c, false)));
            }
        }
        FringeTree {
            code: codes.remove(&root).expect("root encoded"),
            size,
        }
    }

    /// Canonical form of a tree given by `parents[i]` for vertices `1..`, vertex 0 the root.
    pub fn from_parents(parents: &[usize]) -> Self {
        let n = parents.len() + 1;
        let mut children = vec![Vec::new(); n];
        for (i, &p) in parents.iter().enumerate() {
            children[p].push(i + 1);
        }
        FringeTree::from_children(&children, 0)
    }

    /// Parses and canonicalizes a balanced-parenthesis code.
    pub fn parse(code: &str) -> Result<Self> {
        let children = parse_children(code)?;
        Ok(FringeTree::from_children(&children, 0))
    }

    pub fn code(&self) -> &str {
        &self.code
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Child lists with vertex 0 as the root, in preorder of the code.
    pub fn children_lists(&self) -> Vec<Vec<usize>> {
        parse_children(&self.code).expect("canonical code is well formed")
    }

    /// Number of children of the root.
    pub fn root_degree(&self) -> usize {
        self.children_lists()[0].len()
    }

    /// Order of the automorphism group of the rooted tree.
    pub fn automorphisms(&self) -> f64 {
        let children = self.children_lists();
        let mut aut = vec![1.0f64; children.len()];
        let mut codes: Vec<String> = vec![String::new(); children.len()];
        // preorder labels: children have larger indices than their parent
        for v in (0..children.len()).rev() {
            let mut kids: Vec<&String> = children[v].iter().map(|&c| &codes[c]).collect();
            kids.sort();
            let mut a: f64 = children[v].iter().map(|&c| aut[c]).product();
            let mut run = 1;
            for w in kids.windows(2) {
                if w[0] == w[1] {
                    run += 1;
                    a *= run as f64;
                } else {
                    run = 1;
                }
            }
            aut[v] = a;
            let mut owned: Vec<String> = kids.into_iter().cloned().collect();
            codes[v] = wrap_sorted(&mut owned);
        }
        aut[0]
    }
}

impl fmt::Display for FringeTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code)
    }
}

/// A fringe, or the marker for a fringe larger than the size cap.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FringeOutcome {
    Tree(FringeTree),
    Truncated,
}

impl FringeOutcome {
    pub fn key(&self) -> FringeKey {
        match self {
            FringeOutcome::Tree(t) => FringeKey::Shape(t.code.clone()),
            FringeOutcome::Truncated => FringeKey::Truncated,
        }
    }

    pub fn tree(&self) -> Option<&FringeTree> {
        match self {
            FringeOutcome::Tree(t) => Some(t),
            FringeOutcome::Truncated => None,
        }
    }
}

/// Map key for fringe distributions; `Truncated` sorts last.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FringeKey {
    Shape(String),
    Truncated,
}

impl FringeKey {
    pub fn size(&self) -> Option<usize> {
        match self {
            FringeKey::Shape(code) => Some(code.bytes().filter(|&b| b == b'(').count()),
            FringeKey::Truncated => None,
        }
    }

    /// Collapses shapes above `max_size` (and truncation) into `Truncated`.
    pub fn coarsen(self, max_size: usize) -> FringeKey {
        match self.size() {
            Some(s) if s <= max_size => self,
            _ => FringeKey::Truncated,
        }
    }
}

impl fmt::Display for FringeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FringeKey::Shape(code) => f.write_str(code),
            FringeKey::Truncated => f.write_str("truncated"),
        }
    }
}

/// Deduplicates canonical codes so large trees can store a `u32` per vertex.
#[derive(Default, Debug)]
pub(crate) struct Interner {
    codes: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, code: String) -> u32 {
        if let Some(&id) = self.index.get(&code) {
            return id;
        }
        let id = self.codes.len() as u32;
        self.codes.push(code.clone());
        self.index.insert(code, id);
        id
    }

    pub fn code(&self, id: u32) -> &str {
        &self.codes[id as usize]
    }

    /// Canonical code of a vertex whose children have interned codes `kids`.
    pub fn wrap(&mut self, kids: &[u32]) -> u32 {
        let mut strs: Vec<&str> = kids.iter().map(|&k| self.code(k)).collect();
        strs.sort_unstable();
        let mut code = String::with_capacity(2 + strs.iter().map(|s| s.len()).sum::<usize>());
        code.push('(');
        for s in strs {
            code.push_str(s);
        }
        code.push(')');
        self.intern(code)
    }
}

fn wrap_sorted(kids: &mut [String]) -> String {
    kids.sort_unstable();
    let mut code = String::with_capacity(2 + kids.iter().map(String::len).sum::<usize>());
    code.push('(');
    for k in kids.iter() {
        code.push_str(k);
    }
    code.push(')');
    code
}

fn parse_children(code: &str) -> Result<Vec<Vec<usize>>> {
    let bad = |reason: &str| Error::Parse {
        line: 1,
        reason: format!("fringe code `{code}`: {reason}"),
    };
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut closed_root = false;
    for b in code.bytes() {
        if closed_root {
            return Err(bad("trailing characters after the root"));
        }
        match b {
            b'(' => {
                let id = children.len();
                children.push(Vec::new());
                if let Some(&p) = stack.last() {
                    children[p].push(id);
                }
                stack.push(id);
            }
            b')' => {
                stack.pop().ok_or_else(|| bad("unbalanced `)`"))?;
                closed_root = stack.is_empty();
            }
            _ => return Err(bad("unexpected character")),
        }
    }
    if !closed_root {
        return Err(bad("unbalanced or empty"));
    }
    Ok(children)
}
