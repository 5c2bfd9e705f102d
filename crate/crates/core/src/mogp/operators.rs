use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::tree::{random_node, Child, FuzzyNode, FuzzyTree, GrowConfig, Position, MIN_ARITY};

/// Crossover attempts before the parents are returned unchanged.
const CROSSOVER_ATTEMPTS: usize = 10;

/// The five structural mutations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    /// Swap one terminal for a different feature.
    ReplaceTerminal,
    /// Redraw every terminal.
    ReplaceAllTerminals,
    /// Regrow the subtree rooted at a random internal node.
    ReplaceNode,
    /// Turn a terminal into a fresh internal node.
    GrowTerminal,
    /// Remove a terminal or a subtree from a node with spare arity.
    Delete,
}

impl MutationKind {
    pub const ALL: [MutationKind; 5] = [
        MutationKind::ReplaceTerminal,
        MutationKind::ReplaceAllTerminals,
        MutationKind::ReplaceNode,
        MutationKind::GrowTerminal,
        MutationKind::Delete,
    ];

    /// Whether the operator can change `tree` under `cfg`.
    pub fn is_applicable(self, tree: &FuzzyTree, cfg: &GrowConfig) -> bool {
        match self {
            MutationKind::ReplaceTerminal | MutationKind::ReplaceAllTerminals | MutationKind::ReplaceNode => true,
            MutationKind::GrowTerminal => !grow_sites(tree, cfg).is_empty(),
            MutationKind::Delete => !delete_sites(tree).is_empty(),
        }
    }
}

fn terminal_sites(tree: &FuzzyTree) -> Vec<Position> {
    tree.positions().into_iter().filter(|p| p.terminal.is_some()).collect()
}

fn grow_sites(tree: &FuzzyTree, cfg: &GrowConfig) -> Vec<Position> {
    tree.positions()
        .into_iter()
        .filter(|p| p.terminal.is_some() && p.level <= cfg.limits.max_depth)
        .collect()
}

fn delete_sites(tree: &FuzzyTree) -> Vec<Position> {
    tree.positions()
        .into_iter()
        .filter(|p| p.parent_arity.is_some_and(|a| a > MIN_ARITY))
        .collect()
}

fn for_each_terminal(node: &mut FuzzyNode, f: &mut dyn FnMut(&mut usize)) {
    for c in &mut node.children {
        match c {
            Child::Input(i) => f(i),
            Child::Node(n) => for_each_terminal(n, f),
        }
    }
}

/// Applies one specific mutation. Returns `None` when the operator has no
/// valid site in `tree`.
pub fn mutate_with<R: Rng + ?Sized>(
    tree: &FuzzyTree,
    kind: MutationKind,
    cfg: &GrowConfig,
    rng: &mut R,
) -> Option<FuzzyTree> {
    let n_features = cfg.limits.n_features;
    let mut out = tree.clone();
    match kind {
        MutationKind::ReplaceTerminal => {
            if n_features < 2 {
                return Some(out);
            }
            let site = terminal_sites(tree).choose(rng)?.clone();
            let old = site.terminal.expect("terminal site");
            // uniform over the other features
            let mut new = rng.random_range(0..n_features - 1);
            if new >= old {
                new += 1;
            }
            out.replace_at(&site.path, Child::Input(new));
        }
        MutationKind::ReplaceAllTerminals => {
            for_each_terminal(&mut out.root, &mut |i| *i = rng.random_range(0..n_features));
        }
        MutationKind::ReplaceNode => {
            let internal: Vec<Position> =
                tree.positions().into_iter().filter(|p| p.terminal.is_none()).collect();
            let site = internal.choose(rng)?;
            let node = random_node(cfg, site.level, rng);
            if site.is_root() {
                out.root = node;
            } else {
                out.replace_at(&site.path, Child::Node(Box::new(node)));
            }
        }
        MutationKind::GrowTerminal => {
            let site = grow_sites(tree, cfg).choose(rng)?.clone();
            let node = random_node(cfg, site.level, rng);
            out.replace_at(&site.path, Child::Node(Box::new(node)));
        }
        MutationKind::Delete => {
            let site = delete_sites(tree).choose(rng)?.clone();
            let (&k, _) = site.path.split_last().expect("non-root site");
            let parent = out.parent_mut(&site.path).expect("valid path");
            let arity = parent.arity();
            parent.children.remove(k);
            parent.rule_base.remove_input(k, arity);
        }
    }
    Some(out)
}

/// Applies one operator drawn uniformly from those in `allowed` that are
/// applicable to `tree`. Returns the tree unchanged and `None` if none is.
pub fn mutate<R: Rng + ?Sized>(
    tree: &FuzzyTree,
    allowed: &[MutationKind],
    cfg: &GrowConfig,
    rng: &mut R,
) -> (FuzzyTree, Option<MutationKind>) {
    let usable: Vec<MutationKind> = allowed.iter().copied().filter(|k| k.is_applicable(tree, cfg)).collect();
    match usable.choose(rng) {
        Some(&kind) => {
            let out = mutate_with(tree, kind, cfg, rng).expect("applicable operator");
            (out, Some(kind))
        }
        None => (tree.clone(), None),
    }
}

/// Swaps a random subtree of `a` with one of `b`. Any slot may be picked,
/// including terminals and the roots, but never both roots, never a terminal
/// into a root slot, and never a swap that breaks the depth limit. Returns
/// `None` after repeated rejections.
pub fn try_crossover<R: Rng + ?Sized>(
    a: &FuzzyTree,
    b: &FuzzyTree,
    cfg: &GrowConfig,
    rng: &mut R,
) -> Option<(FuzzyTree, FuzzyTree)> {
    let max_depth = cfg.limits.max_depth;
    let pa = a.positions();
    let pb = b.positions();
    let fits = |slot: &Position, incoming: &Position| {
        if slot.is_root() {
            incoming.terminal.is_none()
        } else {
            incoming.height == 0 || slot.level + incoming.height - 1 <= max_depth
        }
    };
    for _ in 0..CROSSOVER_ATTEMPTS {
        let sa = pa.choose(rng)?;
        let sb = pb.choose(rng)?;
        if sa.is_root() && sb.is_root() {
            continue;
        }
        if !fits(sa, sb) || !fits(sb, sa) {
            continue;
        }
        let take = |t: &FuzzyTree, p: &Position| -> Child {
            if p.is_root() {
                Child::Node(Box::new(t.root.clone()))
            } else {
                t.child_at(&p.path).expect("valid path")
            }
        };
        let put = |t: &FuzzyTree, p: &Position, c: Child| -> FuzzyTree {
            let mut out = t.clone();
            if p.is_root() {
                match c {
                    Child::Node(n) => out.root = *n,
                    Child::Input(_) => unreachable!("terminal into root slot"),
                }
            } else {
                out.replace_at(&p.path, c);
            }
            out
        };
        let (ca, cb) = (take(a, sa), take(b, sb));
        return Some((put(a, sa, cb), put(b, sb, ca)));
    }
    None
}

/// [`try_crossover`], falling back to copies of the parents.
pub fn crossover<R: Rng + ?Sized>(
    a: &FuzzyTree,
    b: &FuzzyTree,
    cfg: &GrowConfig,
    rng: &mut R,
) -> (FuzzyTree, FuzzyTree) {
    try_crossover(a, b, cfg, rng).unwrap_or_else(|| (a.clone(), b.clone()))
}
