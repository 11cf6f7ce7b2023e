//! Iterated contractions over a fully contracting tuple, evaluated as a
//! tensor network instead of through dense intermediates.
//!
//! A tuple in `B_k` pairs every slot of the `k` copies of `f` with a slot of
//! another copy. In the free model the pairing is fixed: the running tensor
//! behaves like a stack of open slots and each new copy pops `r_j` of them.
//! In the classical model each intermediate is symmetrized, so the `r_j`
//! contracted slots are a uniformly random `r_j`-subset of the open ones;
//! the iterated contraction is the matching average over diagrams.
//!
//! Evaluation contracts two connected tensors at a time, always picking the
//! pair whose result has the fewest slots. For `p = 2` every diagram is a
//! union of cycles and no intermediate exceeds order 2.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::One;

use crate::budget::checked_entries;
use crate::combinatorics::{binomial, ContractionTuple};
use crate::error::{Error, Result};
use crate::kernel::GridKernel;
use crate::scalar::Scalar;
use crate::tensor::{matmul, permute_axes};

/// Slot `leg` of copy `node`.
pub type Leg = (usize, usize);

/// A perfect pairing of the slots of `nodes` copies of an order-`p` kernel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Diagram {
    p: usize,
    nodes: usize,
    edges: Vec<(Leg, Leg)>,
}

impl Diagram {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(Leg, Leg)] {
        &self.edges
    }
}

fn require_closed(t: &ContractionTuple) -> Result<()> {
    if t.final_order() != 0 {
        return Err(Error::WrongClass { expected: "B" });
    }
    Ok(())
}

/// The single diagram of `f ⌢^{r_1} f ⌢^{r_2} … f`.
pub fn free_diagram(t: &ContractionTuple) -> Result<Diagram> {
    require_closed(t)?;
    let p = t.p();
    let mut stack: Vec<Leg> = (0..p).map(|l| (0, l)).collect();
    let mut edges = Vec::with_capacity(t.k() * p / 2);
    for (j, &r) in t.r().iter().enumerate() {
        let node = j + 1;
        for leg in 0..r {
            let top = stack.pop().expect("tuple validated against running order");
            edges.push((top, (node, leg)));
        }
        stack.extend((r..p).map(|l| (node, l)));
    }
    debug_assert!(stack.is_empty());
    Ok(Diagram {
        p,
        nodes: t.k(),
        edges,
    })
}

/// Diagrams of `f ⊗̃_{r_1} f ⊗̃_{r_2} … f` for symmetric `f`.
///
/// The iterated contraction equals `Σ w · value(diagram) / normalizer`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedDiagrams {
    pub diagrams: Vec<(BigUint, Diagram)>,
    pub normalizer: BigUint,
}

/// Edge multiplicities keyed by unordered node pair `(i, j)`, `i < j`.
type EdgeCounts = BTreeMap<(usize, usize), usize>;
/// Open-slot counts per copy and edge multiplicities between copies.
type State = (Vec<usize>, EdgeCounts);

pub fn classical_diagrams(t: &ContractionTuple) -> Result<WeightedDiagrams> {
    require_closed(t)?;
    let p = t.p();
    let mut states: BTreeMap<State, BigUint> = BTreeMap::new();
    states.insert((vec![p], BTreeMap::new()), BigUint::one());
    let mut normalizer = BigUint::one();
    for (j, &r) in t.r().iter().enumerate() {
        let node = j + 1;
        let mut next: BTreeMap<State, BigUint> = BTreeMap::new();
        for ((open, edges), w) in &states {
            debug_assert_eq!(open.len(), node);
            let mut take = vec![0usize; open.len()];
            distribute(open, r, 0, &mut take, &mut |take| {
                let mut weight = w.clone();
                let mut open2 = open.clone();
                let mut edges2 = edges.clone();
                for (i, &d) in take.iter().enumerate() {
                    if d > 0 {
                        weight *= binomial(open[i], d);
                        open2[i] -= d;
                        *edges2.entry((i, node)).or_insert(0) += d;
                    }
                }
                open2.push(p - r);
                *next.entry((open2, edges2)).or_default() += weight;
            });
        }
        normalizer *= binomial(t.running_orders()[j], r);
        states = next;
    }
    let diagrams = states
        .into_iter()
        .map(|((open, edges), w)| {
            debug_assert!(open.iter().all(|&c| c == 0));
            (w, diagram_from_multiplicities(p, t.k(), &edges))
        })
        .collect();
    Ok(WeightedDiagrams { diagrams, normalizer })
}

/// Calls `visit` with every `take ≤ open` (componentwise) summing to `r`.
fn distribute(open: &[usize], r: usize, at: usize, take: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if at == open.len() {
        if r == 0 {
            visit(take);
        }
        return;
    }
    let rest: usize = open[at + 1..].iter().sum();
    let lo = r.saturating_sub(rest);
    for d in lo..=open[at].min(r) {
        take[at] = d;
        distribute(open, r - d, at + 1, take, visit);
    }
    take[at] = 0;
}

fn diagram_from_multiplicities(p: usize, nodes: usize, mult: &EdgeCounts) -> Diagram {
    let mut next_leg = vec![0usize; nodes];
    let mut edges = Vec::new();
    for (&(a, b), &count) in mult {
        for _ in 0..count {
            let la = next_leg[a];
            let lb = next_leg[b];
            next_leg[a] += 1;
            next_leg[b] += 1;
            edges.push(((a, la), (b, lb)));
        }
    }
    Diagram { p, nodes, edges }
}

struct Node<S> {
    /// Edge id carried by each slot.
    legs: Vec<usize>,
    data: Vec<S>,
}

/// Value of a diagram with every copy replaced by `f`, each contracted pair
/// of slots carrying the cell measure `1/m`.
pub fn evaluate<S: Scalar>(f: &GridKernel<S>, d: &Diagram) -> Result<S> {
    if f.order() != d.p {
        return Err(Error::OrderMismatch {
            left: f.order(),
            right: d.p,
        });
    }
    let m = f.resolution();
    let mut slot_edge = vec![vec![usize::MAX; d.p]; d.nodes];
    for (e, &((a, la), (b, lb))) in d.edges.iter().enumerate() {
        slot_edge[a][la] = e;
        slot_edge[b][lb] = e;
    }
    let mut pending: Vec<Option<Node<S>>> = slot_edge
        .into_iter()
        .map(|legs| {
            debug_assert!(legs.iter().all(|&e| e != usize::MAX));
            Some(Node {
                legs,
                data: f.coeffs().to_vec(),
            })
        })
        .collect();
    let mut value = S::one();
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for a in 0..pending.len() {
            let Some(na) = &pending[a] else { continue };
            for (b, nb) in pending.iter().enumerate().skip(a + 1) {
                let Some(nb) = nb else { continue };
                let shared = na.legs.iter().filter(|e| nb.legs.contains(e)).count();
                if shared == 0 {
                    continue;
                }
                let order = na.legs.len() + nb.legs.len() - 2 * shared;
                if best.is_none_or(|(_, _, o)| order < o) {
                    best = Some((a, b, order));
                }
            }
        }
        let Some((a, b, _)) = best else { break };
        let nb = pending[b].take().expect("live node");
        let na = pending[a].take().expect("live node");
        let merged = contract_pair(na, nb, m)?;
        if merged.legs.is_empty() {
            value *= merged.data[0].clone();
        } else {
            pending[a] = Some(merged);
        }
    }
    if pending.iter().any(|n| n.is_some()) {
        return Err(Error::InvalidParameter("diagram leaves slots uncontracted".into()));
    }
    Ok(value)
}

fn contract_pair<S: Scalar>(a: Node<S>, b: Node<S>, m: usize) -> Result<Node<S>> {
    let shared: Vec<usize> = a.legs.iter().copied().filter(|e| b.legs.contains(e)).collect();
    let free_a: Vec<usize> = (0..a.legs.len()).filter(|&i| !shared.contains(&a.legs[i])).collect();
    let free_b: Vec<usize> = (0..b.legs.len()).filter(|&i| !shared.contains(&b.legs[i])).collect();
    let pos = |legs: &[usize], e: usize| legs.iter().position(|&x| x == e).expect("shared edge");
    let perm_a: Vec<usize> = free_a.iter().copied().chain(shared.iter().map(|&e| pos(&a.legs, e))).collect();
    let perm_b: Vec<usize> = shared.iter().map(|&e| pos(&b.legs, e)).chain(free_b.iter().copied()).collect();
    let out_order = free_a.len() + free_b.len();
    checked_entries(m, out_order)?;
    let da = permute_axes(&a.data, m, &perm_a);
    let db = permute_axes(&b.data, m, &perm_b);
    let inner = m.pow(shared.len() as u32);
    let rows = m.pow(free_a.len() as u32);
    let cols = m.pow(free_b.len() as u32);
    let mut data = matmul(&da, &db, rows, inner, cols);
    if m > 1 {
        let w = S::cell_measure(m, shared.len());
        for x in data.iter_mut() {
            if !x.is_zero() {
                *x *= w.clone();
            }
        }
    }
    let legs = free_a
        .iter()
        .map(|&i| a.legs[i])
        .chain(free_b.iter().map(|&i| b.legs[i]))
        .collect();
    Ok(Node { legs, data })
}

/// Iterated free contraction over a `B_k` tuple.
pub fn free_value<S: Scalar>(f: &GridKernel<S>, t: &ContractionTuple) -> Result<S> {
    evaluate(f, &free_diagram(t)?)
}

/// Edge multiplicities `(a, b, count)` with `a < b` of a connected component
/// of a classical diagram, under a labeling that is canonical whenever the
/// component is a cycle (`p ≤ 2`) or has at most [`BRUTE_FORCE_NODES`] copies.
pub type ComponentKey = (usize, Vec<(usize, usize, usize)>);

/// Components up to this size are canonicalized by trying every labeling.
pub const BRUTE_FORCE_NODES: usize = 6;

fn multiplicities(d: &Diagram) -> EdgeCounts {
    let mut out = BTreeMap::new();
    for &((a, _), (b, _)) in &d.edges {
        *out.entry((a.min(b), a.max(b))).or_insert(0) += 1;
    }
    out
}

/// Connected components of a diagram, each relabeled to `0..size` in
/// increasing order of the original copy index.
fn components(d: &Diagram) -> Vec<(usize, EdgeCounts)> {
    let mult = multiplicities(d);
    let mut parent: Vec<usize> = (0..d.nodes).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in mult.keys() {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for x in 0..d.nodes {
        let r = root(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    groups
        .into_values()
        .map(|members| {
            let local = |x: usize| members.iter().position(|&y| y == x).expect("member");
            let sub = mult
                .iter()
                .filter(|((a, _), _)| members.contains(a))
                .map(|(&(a, b), &c)| ((local(a), local(b)), c))
                .collect();
            (members.len(), sub)
        })
        .collect()
}

fn relabeled(mult: &EdgeCounts, perm: &[usize]) -> Vec<(usize, usize, usize)> {
    let mut out: Vec<(usize, usize, usize)> = mult
        .iter()
        .map(|(&(a, b), &c)| {
            let (x, y) = (perm[a], perm[b]);
            (x.min(y), x.max(y), c)
        })
        .collect();
    out.sort_unstable();
    out
}

fn permutations(n: usize, visit: &mut impl FnMut(&[usize])) {
    fn go(perm: &mut Vec<usize>, used: &mut [bool], visit: &mut impl FnMut(&[usize])) {
        if perm.len() == used.len() {
            visit(perm);
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                perm.push(x);
                go(perm, used, visit);
                perm.pop();
                used[x] = false;
            }
        }
    }
    go(&mut Vec::with_capacity(n), &mut vec![false; n], visit);
}

fn component_key(p: usize, size: usize, mult: &EdgeCounts) -> ComponentKey {
    if p <= 2 && size >= 2 {
        // degree ≤ 2 and connected: a path of double edges for p = 2, size 2,
        // otherwise a single edge (p = 1) or a cycle through every copy
        let edges = if size == 2 {
            alloc::vec![(0, 1, p)]
        } else {
            let mut e: Vec<_> = (0..size - 1).map(|i| (i, i + 1, 1)).collect();
            e.push((0, size - 1, 1));
            e.sort_unstable();
            e
        };
        return (size, edges);
    }
    if size <= BRUTE_FORCE_NODES {
        let mut best: Option<Vec<(usize, usize, usize)>> = None;
        permutations(size, &mut |perm| {
            let cand = relabeled(mult, perm);
            if best.as_ref().is_none_or(|b| cand < *b) {
                best = Some(cand);
            }
        });
        return (size, best.unwrap_or_default());
    }
    (size, relabeled(mult, &(0..size).collect::<Vec<_>>()))
}

fn key_diagram(p: usize, key: &ComponentKey) -> Diagram {
    let mult = key.1.iter().map(|&(a, b, c)| ((a, b), c)).collect();
    diagram_from_multiplicities(p, key.0, &mult)
}

/// Values of connected diagram components, shared across tuples.
pub type ComponentMemo<S> = BTreeMap<ComponentKey, S>;

/// Iterated symmetrized classical contraction over a `B_k` tuple; `f` must
/// be symmetric.
pub fn classical_value<S: Scalar>(f: &GridKernel<S>, t: &ContractionTuple) -> Result<S> {
    classical_value_memo(f, t, &mut ComponentMemo::new())
}

/// [`classical_value`] with a caller-held memo of component values. The memo
/// must only be reused with the same kernel.
pub fn classical_value_memo<S: Scalar>(
    f: &GridKernel<S>,
    t: &ContractionTuple,
    memo: &mut ComponentMemo<S>,
) -> Result<S> {
    if !f.is_symmetric() {
        return Err(Error::NotSymmetric);
    }
    let p = f.order();
    let wd = classical_diagrams(t)?;
    let mut acc = S::zero();
    for (w, d) in &wd.diagrams {
        let mut value = S::from_biguint(w);
        for (size, mult) in components(d) {
            let key = component_key(p, size, &mult);
            let v = match memo.get(&key) {
                Some(v) => v.clone(),
                None => {
                    let v = evaluate(f, &key_diagram(p, &key))?;
                    memo.insert(key, v.clone());
                    v
                }
            };
            value *= v;
        }
        acc += value;
    }
    Ok(acc / S::from_biguint(&wd.normalizer))
}
