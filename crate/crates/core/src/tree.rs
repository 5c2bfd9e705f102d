//! Hierarchical fuzzy inference trees.
//!
//! A tree is an owned recursive structure: every internal node is a small TSK
//! system with two fuzzy sets per input and a full grid of `2^d` rules, and its
//! inputs are either raw features or the outputs of child nodes. All links carry
//! unit weight.
//!
//! Depth counts internal-node levels only: a single node over raw features has
//! depth 1.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

use crate::fuzzy::{
    affine_unchecked, gaussian, interval_affine_unchecked, km_reduce_unchecked,
    weighted_mean_unchecked, It2Consequent, It2Mf, KmBuffer, KmRule, T1Consequent, T1Mf,
};

/// Smallest membership width kept after loading a parameter vector.
pub const WIDTH_FLOOR: f64 = 1e-6;

/// Fewest inputs an internal node may take.
pub const MIN_ARITY: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("terminal x{index} out of range for an input of length {len}")]
    TerminalOutOfRange { index: usize, len: usize },
    #[error("parameter vector has length {found}, tree needs {expected}")]
    ParameterLength { expected: usize, found: usize },
    #[error("node {node} has {arity} inputs, allowed range is {min}..={max}")]
    Arity { node: usize, arity: usize, min: usize, max: usize },
    #[error("tree depth {depth} exceeds the limit {max}")]
    Depth { depth: usize, max: usize },
    #[error("node {node} rule base does not match its {arity} inputs")]
    RuleBaseShape { node: usize, arity: usize },
    #[error("node {node} uses a rule base of the wrong fuzzy kind")]
    KindMismatch { node: usize },
    #[error("invalid tree limits: {0}")]
    Limits(String),
}

pub type Result<T> = std::result::Result<T, TreeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FisKind {
    Type1,
    Type2,
}

impl std::fmt::Display for FisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FisKind::Type1 => "type1",
            FisKind::Type2 => "type2",
        })
    }
}

impl std::str::FromStr for FisKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "t1" | "1" => Ok(FisKind::Type1),
            "type2" | "t2" | "2" => Ok(FisKind::Type2),
            other => Err(format!("unknown fis kind '{other}' (expected type1 or type2)")),
        }
    }
}

/// Membership curve used by type-1 nodes.
///
/// `Cauchy` is the standard `1 / (1 + z^2)` set. `Gaussian` is the type-1 set
/// an interval type-2 Gaussian collapses to when `m1 = m2`; it exists so a
/// type-2 tree can be compared against its exact type-1 reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum T1Shape {
    #[default]
    Cauchy,
    Gaussian,
}

/// Membership functions (two per input, input-major) and the rule grid.
///
/// Rule `r` picks set `(r >> (d - 1 - j)) & 1` for input `j`, so the first
/// input varies slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleBase {
    Type1 { mfs: Vec<T1Mf>, rules: Vec<T1Consequent> },
    Type2 { mfs: Vec<It2Mf>, rules: Vec<It2Consequent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Child {
    /// Zero-based feature index.
    Input(usize),
    Node(Box<FuzzyNode>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyNode {
    pub children: Vec<Child>,
    pub rule_base: RuleBase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyTree {
    pub kind: FisKind,
    #[serde(default)]
    pub t1_shape: T1Shape,
    pub root: FuzzyNode,
}

/// Structural bounds every tree in a run must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLimits {
    pub max_depth: usize,
    pub max_inputs: usize,
    pub n_features: usize,
}

impl TreeLimits {
    pub fn check(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(TreeError::Limits("max_depth must be at least 1".into()));
        }
        if self.max_inputs < MIN_ARITY {
            return Err(TreeError::Limits(format!("max_inputs must be at least {MIN_ARITY}")));
        }
        if self.n_features < 1 {
            return Err(TreeError::Limits("at least one feature is required".into()));
        }
        Ok(())
    }
}

/// Everything needed to grow random trees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowConfig {
    pub limits: TreeLimits,
    pub kind: FisKind,
    /// Chance that a child slot below the depth limit becomes a terminal.
    pub p_terminal: f64,
}

impl GrowConfig {
    pub fn new(limits: TreeLimits, kind: FisKind) -> Self {
        Self { limits, kind, p_terminal: 0.5 }
    }
}

/// Parameter-vector slot owner and role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Slot {
    /// Pre-order index of the owning node.
    pub node: usize,
    pub field: SlotField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotField {
    Center { input: usize, set: usize },
    LowerMean { input: usize, set: usize },
    UpperMean { input: usize, set: usize },
    Width { input: usize, set: usize },
    Coefficient { rule: usize, term: usize },
    Spread { rule: usize, term: usize },
}

impl SlotField {
    /// Membership-function slots live in the normalized input range.
    pub fn is_membership(&self) -> bool {
        matches!(
            self,
            SlotField::Center { .. }
                | SlotField::LowerMean { .. }
                | SlotField::UpperMean { .. }
                | SlotField::Width { .. }
        )
    }
}

/// Flat genotype of a tree plus the map from positions to parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    pub values: Vec<f64>,
    pub layout: Vec<Slot>,
}

impl ParameterVector {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Parameters of a single node with `arity` inputs.
pub fn node_parameter_count(arity: usize, kind: FisKind) -> usize {
    let sets = 2 * arity;
    let rules = 1usize << arity;
    match kind {
        FisKind::Type1 => 2 * sets + rules * (arity + 1),
        FisKind::Type2 => 3 * sets + rules * 2 * (arity + 1),
    }
}

#[inline]
fn rule_set(rule: usize, input: usize, arity: usize) -> usize {
    (rule >> (arity - 1 - input)) & 1
}

impl RuleBase {
    /// Random rule base: membership parameters uniform in `[0, 1]`,
    /// consequent coefficients uniform in `[-1, 1]`.
    ///
    /// Type-2 means are `m + lambda * sigma` and `m - lambda * sigma` with
    /// `lambda ~ U[0, 1]`, stored in ascending order. Spreads start in
    /// `[0, 0.1]`.
    pub fn random<R: Rng + ?Sized>(arity: usize, kind: FisKind, rng: &mut R) -> Self {
        let n_rules = 1usize << arity;
        let width = |rng: &mut R| rng.random_range(0.0..=1.0f64).max(WIDTH_FLOOR);
        match kind {
            FisKind::Type1 => RuleBase::Type1 {
                mfs: (0..2 * arity)
                    .map(|_| T1Mf::new(rng.random_range(0.0..=1.0), width(rng)))
                    .collect(),
                rules: (0..n_rules)
                    .map(|_| T1Consequent {
                        coeffs: (0..=arity).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                    })
                    .collect(),
            },
            FisKind::Type2 => RuleBase::Type2 {
                mfs: (0..2 * arity)
                    .map(|_| {
                        let m: f64 = rng.random_range(0.0..=1.0);
                        let sigma = width(rng);
                        let lambda: f64 = rng.random_range(0.0..=1.0);
                        let (a, b) = (m + lambda * sigma, m - lambda * sigma);
                        It2Mf::new(a.min(b), a.max(b), sigma)
                    })
                    .collect(),
                rules: (0..n_rules)
                    .map(|_| It2Consequent {
                        coeffs: (0..=arity).map(|_| rng.random_range(-1.0..=1.0)).collect(),
                        spreads: (0..=arity).map(|_| rng.random_range(0.0..=0.1)).collect(),
                    })
                    .collect(),
            },
        }
    }

    pub fn kind(&self) -> FisKind {
        match self {
            RuleBase::Type1 { .. } => FisKind::Type1,
            RuleBase::Type2 { .. } => FisKind::Type2,
        }
    }

    pub fn rule_count(&self) -> usize {
        match self {
            RuleBase::Type1 { rules, .. } => rules.len(),
            RuleBase::Type2 { rules, .. } => rules.len(),
        }
    }

    fn matches_arity(&self, arity: usize) -> bool {
        let n_rules = 1usize << arity;
        match self {
            RuleBase::Type1 { mfs, rules } => {
                mfs.len() == 2 * arity
                    && rules.len() == n_rules
                    && rules.iter().all(|r| r.coeffs.len() == arity + 1)
            }
            RuleBase::Type2 { mfs, rules } => {
                mfs.len() == 2 * arity
                    && rules.len() == n_rules
                    && rules
                        .iter()
                        .all(|r| r.coeffs.len() == arity + 1 && r.spreads.len() == arity + 1)
            }
        }
    }

    /// Drops input `input`, keeping the rules that used its first fuzzy set
    /// and removing that input's coefficient from each of them.
    pub fn remove_input(&mut self, input: usize, arity: usize) {
        let keep = |r: usize| rule_set(r, input, arity) == 0;
        match self {
            RuleBase::Type1 { mfs, rules } => {
                mfs.drain(2 * input..2 * input + 2);
                let mut idx = 0;
                rules.retain(|_| {
                    idx += 1;
                    keep(idx - 1)
                });
                for r in rules.iter_mut() {
                    r.coeffs.remove(input + 1);
                }
            }
            RuleBase::Type2 { mfs, rules } => {
                mfs.drain(2 * input..2 * input + 2);
                let mut idx = 0;
                rules.retain(|_| {
                    idx += 1;
                    keep(idx - 1)
                });
                for r in rules.iter_mut() {
                    r.coeffs.remove(input + 1);
                    r.spreads.remove(input + 1);
                }
            }
        }
    }

    /// Node output for the given (already gathered) node inputs.
    pub(crate) fn output(&self, z: &[f64], shape: T1Shape) -> f64 {
        let d = z.len();
        match self {
            RuleBase::Type1 { mfs, rules } => {
                let grades: SmallVec<[f64; 8]> = mfs
                    .iter()
                    .enumerate()
                    .map(|(k, mf)| match shape {
                        T1Shape::Cauchy => mf.grade_unchecked(z[k / 2]),
                        T1Shape::Gaussian => gaussian(z[k / 2], mf.center, mf.width),
                    })
                    .collect();
                let mut firings: SmallVec<[f64; 16]> = SmallVec::with_capacity(rules.len());
                let mut values: SmallVec<[f64; 16]> = SmallVec::with_capacity(rules.len());
                for (r, rule) in rules.iter().enumerate() {
                    let mut f = 1.0;
                    for j in 0..d {
                        f *= grades[2 * j + rule_set(r, j, d)];
                    }
                    firings.push(f);
                    values.push(affine_unchecked(z, &rule.coeffs));
                }
                weighted_mean_unchecked(&firings, &values)
            }
            RuleBase::Type2 { mfs, rules } => {
                let grades: SmallVec<[_; 8]> = mfs
                    .iter()
                    .enumerate()
                    .map(|(k, mf)| mf.bounds_unchecked(z[k / 2]))
                    .collect();
                let mut lower_side = KmBuffer::with_capacity(rules.len());
                let mut upper_side = KmBuffer::with_capacity(rules.len());
                for (r, rule) in rules.iter().enumerate() {
                    let (mut lo, mut hi) = (1.0, 1.0);
                    for j in 0..d {
                        let g = grades[2 * j + rule_set(r, j, d)];
                        lo *= g.lower;
                        hi *= g.upper;
                    }
                    let b = interval_affine_unchecked(z, &rule.coeffs, &rule.spreads);
                    lower_side.push(KmRule { weight: b.lower, lower: lo, upper: hi });
                    upper_side.push(KmRule { weight: b.upper, lower: lo, upper: hi });
                }
                let reduced = km_reduce_unchecked(&mut lower_side, &mut upper_side);
                0.5 * (reduced.left + reduced.right)
            }
        }
    }

    fn push_parameters(&self, node: usize, out: &mut Vec<f64>, layout: &mut Vec<Slot>) {
        let mut push = |v: f64, field| {
            out.push(v);
            layout.push(Slot { node, field });
        };
        match self {
            RuleBase::Type1 { mfs, rules } => {
                for (k, mf) in mfs.iter().enumerate() {
                    let (input, set) = (k / 2, k % 2);
                    push(mf.center, SlotField::Center { input, set });
                    push(mf.width, SlotField::Width { input, set });
                }
                for (rule, c) in rules.iter().enumerate() {
                    for (term, &v) in c.coeffs.iter().enumerate() {
                        push(v, SlotField::Coefficient { rule, term });
                    }
                }
            }
            RuleBase::Type2 { mfs, rules } => {
                for (k, mf) in mfs.iter().enumerate() {
                    let (input, set) = (k / 2, k % 2);
                    push(mf.m1, SlotField::LowerMean { input, set });
                    push(mf.m2, SlotField::UpperMean { input, set });
                    push(mf.width, SlotField::Width { input, set });
                }
                for (rule, c) in rules.iter().enumerate() {
                    for (term, &v) in c.coeffs.iter().enumerate() {
                        push(v, SlotField::Coefficient { rule, term });
                    }
                    for (term, &v) in c.spreads.iter().enumerate() {
                        push(v, SlotField::Spread { rule, term });
                    }
                }
            }
        }
    }

    /// Overwrites parameters from `values`, returning how many were consumed.
    fn load_parameters(&mut self, values: &[f64]) -> usize {
        let mut it = values.iter().copied();
        let mut used = 0;
        let mut next = || {
            used += 1;
            it.next().expect("length checked by caller")
        };
        match self {
            RuleBase::Type1 { mfs, rules } => {
                for mf in mfs.iter_mut() {
                    mf.center = next();
                    mf.width = next().abs().max(WIDTH_FLOOR);
                }
                for c in rules.iter_mut() {
                    for v in c.coeffs.iter_mut() {
                        *v = next();
                    }
                }
            }
            RuleBase::Type2 { mfs, rules } => {
                for mf in mfs.iter_mut() {
                    let a = next();
                    let b = next();
                    mf.m1 = a.min(b);
                    mf.m2 = a.max(b);
                    mf.width = next().abs().max(WIDTH_FLOOR);
                }
                for c in rules.iter_mut() {
                    for v in c.coeffs.iter_mut() {
                        *v = next();
                    }
                    for v in c.spreads.iter_mut() {
                        *v = next().abs();
                    }
                }
            }
        }
        used
    }
}

impl FuzzyNode {
    pub fn random<R: Rng + ?Sized>(children: Vec<Child>, kind: FisKind, rng: &mut R) -> Self {
        let rule_base = RuleBase::random(children.len(), kind, rng);
        Self { children, rule_base }
    }

    pub fn arity(&self) -> usize {
        self.children.len()
    }

    /// Height in internal-node levels (1 for a node over terminals only).
    pub fn depth(&self) -> usize {
        1 + self
            .children
            .iter()
            .map(|c| match c {
                Child::Input(_) => 0,
                Child::Node(n) => n.depth(),
            })
            .max()
            .unwrap_or(0)
    }

    pub fn output(&self, input: &[f64], shape: T1Shape) -> f64 {
        let z: SmallVec<[f64; 8]> = self
            .children
            .iter()
            .map(|c| match c {
                Child::Input(i) => input[*i],
                Child::Node(n) => n.output(input, shape),
            })
            .collect();
        self.rule_base.output(&z, shape)
    }

    fn collect_outputs(&self, input: &[f64], shape: T1Shape, out: &mut Vec<f64>) -> f64 {
        let slot = out.len();
        out.push(0.0);
        let z: SmallVec<[f64; 8]> = self
            .children
            .iter()
            .map(|c| match c {
                Child::Input(i) => input[*i],
                Child::Node(n) => n.collect_outputs(input, shape, out),
            })
            .collect();
        let y = self.rule_base.output(&z, shape);
        out[slot] = y;
        y
    }

    /// Pre-order walk over internal nodes.
    pub fn for_each_node<'a>(&'a self, f: &mut dyn FnMut(&'a FuzzyNode)) {
        f(self);
        for c in &self.children {
            if let Child::Node(n) = c {
                n.for_each_node(f);
            }
        }
    }

    fn for_each_node_mut(&mut self, f: &mut dyn FnMut(&mut FuzzyNode)) {
        f(self);
        for c in &mut self.children {
            if let Child::Node(n) = c {
                n.for_each_node_mut(f);
            }
        }
    }
}

/// Topology description used to build trees by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Input(usize),
    Node(Vec<Shape>),
}

/// Address of a slot in a tree: the child indices followed from the root.
/// The empty path is the root itself.
pub type Path = Vec<usize>;

/// A slot found by [`FuzzyTree::positions`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Position {
    pub path: Path,
    /// Internal-node level the slot sits at (root is level 1).
    pub level: usize,
    /// `Some(feature)` for terminal slots.
    pub terminal: Option<usize>,
    /// Height of the subtree in the slot (0 for a terminal).
    pub height: usize,
    /// Arity of the node owning the slot; `None` for the root.
    pub parent_arity: Option<usize>,
}

impl Position {
    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }
}

impl FuzzyTree {
    pub fn new(kind: FisKind, root: FuzzyNode) -> Self {
        Self { kind, t1_shape: T1Shape::Cauchy, root }
    }

    /// Builds a tree with the given topology and random parameters.
    ///
    /// # Panics
    /// If `shape` is a bare input: the root must be an internal node.
    pub fn from_shape<R: Rng + ?Sized>(shape: &Shape, kind: FisKind, rng: &mut R) -> Self {
        fn build<R: Rng + ?Sized>(children: &[Shape], kind: FisKind, rng: &mut R) -> FuzzyNode {
            let children = children
                .iter()
                .map(|s| match s {
                    Shape::Input(i) => Child::Input(*i),
                    Shape::Node(c) => Child::Node(Box::new(build(c, kind, rng))),
                })
                .collect();
            FuzzyNode::random(children, kind, rng)
        }
        match shape {
            Shape::Node(children) => Self::new(kind, build(children, kind, rng)),
            Shape::Input(_) => panic!("tree root must be an internal node"),
        }
    }

    /// Grow-style random tree. The root is always internal; below the depth
    /// limit each slot becomes a terminal with probability `p_terminal`.
    pub fn random<R: Rng + ?Sized>(cfg: &GrowConfig, rng: &mut R) -> Self {
        Self::new(cfg.kind, random_node(cfg, 1, rng))
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.root.for_each_node(&mut |_| n += 1);
        n
    }

    pub fn terminal_count(&self) -> usize {
        let mut n = 0;
        self.root.for_each_node(&mut |node| {
            n += node.children.iter().filter(|c| matches!(c, Child::Input(_))).count()
        });
        n
    }

    /// Internal nodes in pre-order.
    pub fn nodes(&self) -> Vec<&FuzzyNode> {
        let mut out = Vec::new();
        self.root.for_each_node(&mut |n| out.push(n));
        out
    }

    pub fn selected_features(&self) -> BTreeSet<usize> {
        let mut set = BTreeSet::new();
        self.root.for_each_node(&mut |n| {
            for c in &n.children {
                if let Child::Input(i) = c {
                    set.insert(*i);
                }
            }
        });
        set
    }

    /// Largest terminal index plus one; the minimum input length.
    pub fn required_inputs(&self) -> usize {
        self.selected_features().last().map_or(0, |m| m + 1)
    }

    pub fn parameter_count(&self) -> usize {
        let mut total = 0;
        self.root
            .for_each_node(&mut |n| total += node_parameter_count(n.arity(), self.kind));
        total
    }

    pub fn evaluate(&self, input: &[f64]) -> Result<f64> {
        let need = self.required_inputs();
        if need > input.len() {
            return Err(TreeError::TerminalOutOfRange { index: need - 1, len: input.len() });
        }
        Ok(self.root.output(input, self.t1_shape))
    }

    /// Evaluation without the terminal range check. Callers must have checked
    /// `required_inputs() <= input.len()`.
    #[inline]
    pub fn evaluate_unchecked(&self, input: &[f64]) -> f64 {
        self.root.output(input, self.t1_shape)
    }

    /// Outputs of every internal node, in pre-order (root first).
    pub fn node_outputs(&self, input: &[f64]) -> Result<Vec<f64>> {
        let need = self.required_inputs();
        if need > input.len() {
            return Err(TreeError::TerminalOutOfRange { index: need - 1, len: input.len() });
        }
        let mut out = Vec::with_capacity(8);
        self.root.collect_outputs(input, self.t1_shape, &mut out);
        Ok(out)
    }

    /// Flattened genotype: pre-order nodes; per node the membership fields in
    /// input order, then the consequents in rule-grid order.
    pub fn flatten_parameters(&self) -> ParameterVector {
        let mut values = Vec::with_capacity(self.parameter_count());
        let mut layout = Vec::with_capacity(values.capacity());
        let mut node = 0;
        self.root.for_each_node(&mut |n| {
            n.rule_base.push_parameters(node, &mut values, &mut layout);
            node += 1;
        });
        ParameterVector { values, layout }
    }

    /// Overwrites every parameter in place. Widths go through `|.|` with a
    /// floor of [`WIDTH_FLOOR`], type-2 mean pairs are sorted and spreads go
    /// through `|.|`.
    pub fn load_parameters_in_place(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.parameter_count();
        if values.len() != expected {
            return Err(TreeError::ParameterLength { expected, found: values.len() });
        }
        let mut offset = 0;
        self.root.for_each_node_mut(&mut |n| {
            offset += n.rule_base.load_parameters(&values[offset..]);
        });
        Ok(())
    }

    pub fn load_parameters(&self, values: &[f64]) -> Result<FuzzyTree> {
        let mut t = self.clone();
        t.load_parameters_in_place(values)?;
        Ok(t)
    }

    /// Checks every structural invariant against `limits`.
    pub fn validate(&self, limits: &TreeLimits) -> Result<()> {
        limits.check()?;
        let depth = self.depth();
        if depth > limits.max_depth {
            return Err(TreeError::Depth { depth, max: limits.max_depth });
        }
        let mut err = None;
        let mut idx = 0;
        self.root.for_each_node(&mut |n| {
            if err.is_some() {
                return;
            }
            let arity = n.arity();
            if !(MIN_ARITY..=limits.max_inputs).contains(&arity) {
                err = Some(TreeError::Arity {
                    node: idx,
                    arity,
                    min: MIN_ARITY,
                    max: limits.max_inputs,
                });
            } else if n.rule_base.kind() != self.kind {
                err = Some(TreeError::KindMismatch { node: idx });
            } else if !n.rule_base.matches_arity(arity) {
                err = Some(TreeError::RuleBaseShape { node: idx, arity });
            } else if let Some(&bad) = n.children.iter().find_map(|c| match c {
                Child::Input(i) if *i >= limits.n_features => Some(i),
                _ => None,
            }) {
                err = Some(TreeError::TerminalOutOfRange { index: bad, len: limits.n_features });
            }
            idx += 1;
        });
        err.map_or(Ok(()), Err)
    }

    /// Every slot in the tree (root, internal children and terminals) in
    /// pre-order.
    pub fn positions(&self) -> Vec<Position> {
        fn walk(node: &FuzzyNode, path: &mut Path, level: usize, out: &mut Vec<Position>) {
            for (k, c) in node.children.iter().enumerate() {
                path.push(k);
                match c {
                    Child::Input(i) => out.push(Position {
                        path: path.clone(),
                        level: level + 1,
                        terminal: Some(*i),
                        height: 0,
                        parent_arity: Some(node.arity()),
                    }),
                    Child::Node(n) => {
                        out.push(Position {
                            path: path.clone(),
                            level: level + 1,
                            terminal: None,
                            height: n.depth(),
                            parent_arity: Some(node.arity()),
                        });
                        walk(n, path, level + 1, out);
                    }
                }
                path.pop();
            }
        }
        let mut out = vec![Position {
            path: Vec::new(),
            level: 1,
            terminal: None,
            height: self.root.depth(),
            parent_arity: None,
        }];
        walk(&self.root, &mut Vec::new(), 1, &mut out);
        out
    }

    /// Node owning the slot at `path` (the path without its last step).
    pub fn parent_mut(&mut self, path: &[usize]) -> Option<&mut FuzzyNode> {
        let (_, head) = path.split_last()?;
        let mut node = &mut self.root;
        for &k in head {
            node = match node.children.get_mut(k)? {
                Child::Node(n) => n,
                Child::Input(_) => return None,
            };
        }
        Some(node)
    }

    /// Clones the content of a non-root slot.
    pub fn child_at(&self, path: &[usize]) -> Option<Child> {
        let (last, head) = path.split_last()?;
        let mut node = &self.root;
        for &k in head {
            node = match node.children.get(k)? {
                Child::Node(n) => n,
                Child::Input(_) => return None,
            };
        }
        node.children.get(*last).cloned()
    }

    /// Replaces the content of a non-root slot, returning the old content.
    pub fn replace_at(&mut self, path: &[usize], child: Child) -> Option<Child> {
        let last = *path.last()?;
        let parent = self.parent_mut(path)?;
        let slot = parent.children.get_mut(last)?;
        Some(std::mem::replace(slot, child))
    }
}

pub(crate) fn random_node<R: Rng + ?Sized>(cfg: &GrowConfig, level: usize, rng: &mut R) -> FuzzyNode {
    let limits = &cfg.limits;
    let arity = rng.random_range(MIN_ARITY..=limits.max_inputs.max(MIN_ARITY));
    let children = (0..arity)
        .map(|_| {
            if level >= limits.max_depth || rng.random_bool(cfg.p_terminal) {
                Child::Input(rng.random_range(0..limits.n_features))
            } else {
                Child::Node(Box::new(random_node(cfg, level + 1, rng)))
            }
        })
        .collect();
    FuzzyNode::random(children, cfg.kind, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Three nodes over five features: N1(x1, x2), N2(x4, x5), N3(N1, N2, x3).
    fn two_stage() -> Shape {
        Shape::Node(vec![
            Shape::Node(vec![Shape::Input(0), Shape::Input(1)]),
            Shape::Node(vec![Shape::Input(3), Shape::Input(4)]),
            Shape::Input(2),
        ])
    }

    fn limits() -> TreeLimits {
        TreeLimits { max_depth: 4, max_inputs: 4, n_features: 5 }
    }

    #[test]
    fn parameter_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t1 = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        let t2 = FuzzyTree::from_shape(&two_stage(), FisKind::Type2, &mut rng);
        assert_eq!(t1.parameter_count(), 84);
        assert_eq!(t2.parameter_count(), 154);
        assert_eq!(t1.flatten_parameters().len(), 84);
        assert_eq!(t2.flatten_parameters().len(), 154);
        assert_eq!(node_parameter_count(2, FisKind::Type1), 20);
        let single = FuzzyTree::from_shape(
            &Shape::Node(vec![Shape::Input(0), Shape::Input(1)]),
            FisKind::Type1,
            &mut rng,
        );
        assert_eq!(single.parameter_count(), 20);
        assert_eq!(single.depth(), 1);
    }

    #[test]
    fn constant_consequents_give_constant_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut t = FuzzyTree::from_shape(
            &Shape::Node(vec![Shape::Input(0), Shape::Input(1)]),
            FisKind::Type1,
            &mut rng,
        );
        if let RuleBase::Type1 { rules, .. } = &mut t.root.rule_base {
            for r in rules {
                r.coeffs = vec![0.7, 0.0, 0.0];
            }
        }
        for _ in 0..20 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            assert_abs_diff_eq!(t.evaluate(&x).unwrap(), 0.7, epsilon = 1e-15);
        }
    }

    #[test]
    fn terminal_out_of_range_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        assert_eq!(
            t.evaluate(&[0.1, 0.2, 0.3]),
            Err(TreeError::TerminalOutOfRange { index: 4, len: 3 })
        );
    }

    #[test]
    fn selected_features_of_two_stage_tree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        assert_eq!(t.selected_features(), BTreeSet::from([0, 1, 2, 3, 4]));
        let repeated = FuzzyTree::from_shape(
            &Shape::Node(vec![Shape::Input(3), Shape::Node(vec![Shape::Input(3), Shape::Input(3)])]),
            FisKind::Type2,
            &mut rng,
        );
        assert_eq!(repeated.selected_features(), BTreeSet::from([3]));
    }

    #[test]
    fn zero_vector_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [FisKind::Type1, FisKind::Type2] {
            let t = FuzzyTree::from_shape(&two_stage(), kind, &mut rng);
            let z = t.load_parameters(&vec![0.0; t.parameter_count()]).unwrap();
            for _ in 0..10 {
                let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
                assert_eq!(z.evaluate(&x).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn load_rejects_wrong_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        assert_eq!(
            t.load_parameters(&[0.0; 10]),
            Err(TreeError::ParameterLength { expected: 84, found: 10 })
        );
    }

    #[test]
    fn flatten_load_is_sanitizing_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [FisKind::Type1, FisKind::Type2] {
            let t = FuzzyTree::from_shape(&two_stage(), kind, &mut rng);
            let v = t.flatten_parameters();
            let back = t.load_parameters(&v.values).unwrap();
            assert_eq!(back, t);

            let raw: Vec<f64> = (0..v.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let loaded = t.load_parameters(&raw).unwrap();
            let again = loaded.flatten_parameters();
            for ((slot, &r), &a) in v.layout.iter().zip(&raw).zip(&again.values) {
                match slot.field {
                    SlotField::Width { .. } => assert_eq!(a, r.abs().max(WIDTH_FLOOR)),
                    SlotField::Spread { .. } => assert_eq!(a, r.abs()),
                    SlotField::LowerMean { .. } | SlotField::UpperMean { .. } => {}
                    _ => assert_eq!(a, r),
                }
            }
            // Loading the sanitized vector is a fixed point.
            assert_eq!(loaded.load_parameters(&again.values).unwrap(), loaded);
        }
    }

    #[test]
    fn layout_is_preorder_and_membership_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        let v = t.flatten_parameters();
        // Root N3 (arity 3) first: 12 membership slots then 8 rules x 4 terms.
        assert!(v.layout[..12].iter().all(|s| s.node == 0 && s.field.is_membership()));
        assert!(v.layout[12..44].iter().all(|s| s.node == 0 && !s.field.is_membership()));
        assert!(v.layout[44..64].iter().all(|s| s.node == 1));
        assert!(v.layout[64..].iter().all(|s| s.node == 2));
        assert_eq!(v.layout[12].field, SlotField::Coefficient { rule: 0, term: 0 });
    }

    #[test]
    fn single_slot_perturbation_is_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for kind in [FisKind::Type1, FisKind::Type2] {
            let t = FuzzyTree::from_shape(&two_stage(), kind, &mut rng);
            let v = t.flatten_parameters();
            let x: Vec<f64> = (0..5).map(|_| rng.random()).collect();
            let before = t.node_outputs(&x).unwrap();
            for k in 0..v.len() {
                let mut w = v.values.clone();
                w[k] += 0.37;
                let after = t.load_parameters(&w).unwrap().node_outputs(&x).unwrap();
                // Pre-order: 0 = N3 (root), 1 = N1, 2 = N2. A slot of N1 or N2
                // may only move that node and the root.
                let owner = v.layout[k].node;
                for (node, (a, b)) in before.iter().zip(&after).enumerate() {
                    if node != owner && node != 0 {
                        assert_eq!(a, b, "slot {k} of node {owner} changed node {node}");
                    }
                }
            }
        }
    }

    #[test]
    fn max_depth_one_gives_single_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = GrowConfig::new(TreeLimits { max_depth: 1, max_inputs: 4, n_features: 3 }, FisKind::Type1);
        for _ in 0..100 {
            let t = FuzzyTree::random(&cfg, &mut rng);
            assert_eq!(t.node_count(), 1);
            assert!(t.root.children.iter().all(|c| matches!(c, Child::Input(_))));
        }
    }

    #[test]
    fn single_feature_trees_only_use_x1() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = GrowConfig::new(TreeLimits { max_depth: 4, max_inputs: 4, n_features: 1 }, FisKind::Type2);
        for _ in 0..100 {
            let t = FuzzyTree::random(&cfg, &mut rng);
            assert_eq!(t.selected_features(), BTreeSet::from([0]));
        }
    }

    #[test]
    fn random_trees_satisfy_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let lim = TreeLimits { max_depth: 4, max_inputs: 4, n_features: 6 };
        for kind in [FisKind::Type1, FisKind::Type2] {
            let cfg = GrowConfig::new(lim, kind);
            for _ in 0..5_000 {
                let t = FuzzyTree::random(&cfg, &mut rng);
                t.validate(&lim).unwrap();
                assert_eq!(t.parameter_count(), t.flatten_parameters().len());
            }
        }
    }

    #[test]
    fn validate_catches_breaches() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        t.validate(&limits()).unwrap();
        let tight = TreeLimits { max_depth: 1, ..limits() };
        assert!(matches!(t.validate(&tight), Err(TreeError::Depth { depth: 2, max: 1 })));
        let narrow = TreeLimits { max_inputs: 2, ..limits() };
        assert!(matches!(t.validate(&narrow), Err(TreeError::Arity { node: 0, arity: 3, .. })));
        let few = TreeLimits { n_features: 4, ..limits() };
        assert!(matches!(t.validate(&few), Err(TreeError::TerminalOutOfRange { index: 4, .. })));

        let mut broken = t.clone();
        broken.root.children.pop();
        assert!(matches!(broken.validate(&limits()), Err(TreeError::RuleBaseShape { .. })));
        let mut mixed = t.clone();
        mixed.root.rule_base = RuleBase::random(3, FisKind::Type2, &mut rng);
        assert!(matches!(mixed.validate(&limits()), Err(TreeError::KindMismatch { node: 0 })));
    }

    #[test]
    fn remove_input_keeps_first_set_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let original = RuleBase::random(3, FisKind::Type1, &mut rng);
        let mut rb = original.clone();
        rb.remove_input(1, 3);
        assert!(rb.matches_arity(2));
        let (RuleBase::Type1 { mfs: m0, rules: r0 }, RuleBase::Type1 { mfs: m1, rules: r1 }) =
            (&original, &rb)
        else {
            unreachable!()
        };
        assert_eq!(m1[..], [m0[0], m0[1], m0[4], m0[5]]);
        // Kept rules are 0b000, 0b001, 0b100, 0b101.
        for (new, old) in [(0, 0), (1, 1), (2, 4), (3, 5)] {
            let c = &r0[old].coeffs;
            assert_eq!(r1[new].coeffs, vec![c[0], c[1], c[3]]);
        }
    }

    #[test]
    fn positions_cover_every_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type1, &mut rng);
        let pos = t.positions();
        // root + 3 children of root + 2 + 2 terminals
        assert_eq!(pos.len(), 8);
        assert!(pos[0].is_root());
        assert_eq!(pos.iter().filter(|p| p.terminal.is_some()).count(), 5);
        let n1 = &pos[1];
        assert_eq!((n1.path.clone(), n1.level, n1.height), (vec![0], 2, 1));
        assert_eq!(pos.last().unwrap().terminal, Some(2));
    }

    #[test]
    fn serde_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let t = FuzzyTree::from_shape(&two_stage(), FisKind::Type2, &mut rng);
        let text = serde_json::to_string_pretty(&t).unwrap();
        let back: FuzzyTree = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }
}
