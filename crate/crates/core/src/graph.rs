//! Directed acyclic causal graphs.
//!
//! Graph DSL: one `parent -> child` per line (chains `a -> b -> c` allowed),
//! a bare name declares an isolated node, `#` starts a comment. Node names
//! match `[a-z0-9_]+`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const FR_MARKET_PRICE: &str = include_str!("../data/fr_market_price.graph");
pub const FR_MARKET_EXPORTS: &str = include_str!("../data/fr_market_exports.graph");

/// Simple directed path, source first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedPath(pub Vec<String>);

impl DirectedPath {
    pub fn nodes(&self) -> &[String] {
        &self.0
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.windows(2).map(|w| (w[0].as_str(), w[1].as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for DirectedPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" -> "))
    }
}

/// One local Markov condition: `x` independent of `y` given `z = parents(x)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LmcTriple {
    pub x: String,
    pub y: String,
    pub z: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CausalGraph {
    names: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
}

impl PartialEq for CausalGraph {
    /// Same node set and same edge set, regardless of declaration order.
    fn eq(&self, other: &Self) -> bool {
        let nodes = |g: &CausalGraph| g.names.iter().cloned().collect::<BTreeSet<_>>();
        let edges = |g: &CausalGraph| {
            g.edges()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect::<BTreeSet<_>>()
        };
        nodes(self) == nodes(other) && edges(self) == edges(other)
    }
}

impl Eq for CausalGraph {}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

impl CausalGraph {
    /// Builds a graph from declared nodes and edges. Nodes mentioned only in
    /// edges are added in order of first appearance.
    pub fn new<N, E, S>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = S>,
        E: IntoIterator<Item = (S, S)>,
        S: AsRef<str>,
    {
        let mut names: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut intern = |name: &str, names: &mut Vec<String>| -> Result<usize> {
            if !valid_name(name) {
                return Err(Error::InvalidGraph(format!(
                    "node name `{name}` must match [a-z0-9_]+"
                )));
            }
            if let Some(&i) = index.get(name) {
                return Ok(i);
            }
            index.insert(name.to_string(), names.len());
            names.push(name.to_string());
            Ok(names.len() - 1)
        };
        for n in nodes {
            intern(n.as_ref(), &mut names)?;
        }
        let mut edge_list = Vec::new();
        let mut seen = BTreeSet::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            let ia = intern(a, &mut names)?;
            let ib = intern(b, &mut names)?;
            if ia == ib {
                return Err(Error::Cycle(vec![a.to_string(), a.to_string()]));
            }
            if !seen.insert((ia, ib)) {
                return Err(Error::InvalidGraph(format!("duplicate edge {a} -> {b}")));
            }
            edge_list.push((ia, ib));
        }
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Self::from_parts(names, index, edge_list)
    }

    fn from_parts(
        names: Vec<String>,
        index: HashMap<String, usize>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(a, b) in &edges {
            parents[b].push(a);
            children[a].push(b);
        }
        let mut g = Self {
            names,
            index,
            edges,
            parents,
            children,
            topo: Vec::new(),
        };
        g.topo = g.kahn()?;
        Ok(g)
    }

    /// Kahn's algorithm, ties broken by declaration order.
    fn kahn(&self) -> Result<Vec<usize>> {
        let n = self.names.len();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &c in &self.children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    ready.insert(c);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        Err(Error::Cycle(self.find_cycle(&indeg)))
    }

    /// Walks parent links among the nodes Kahn could not remove; every such
    /// node has a remaining parent, so the walk must revisit a node.
    fn find_cycle(&self, indeg: &[usize]) -> Vec<String> {
        let stuck: Vec<bool> = indeg.iter().map(|&d| d > 0).collect();
        let start = stuck.iter().position(|&s| s).expect("a stuck node exists");
        let mut pos = HashMap::new();
        let mut walk = Vec::new();
        let mut cur = start;
        while !pos.contains_key(&cur) {
            pos.insert(cur, walk.len());
            walk.push(cur);
            cur = *self.parents[cur]
                .iter()
                .find(|&&p| stuck[p])
                .expect("stuck nodes keep a stuck parent");
        }
        let mut cycle: Vec<String> = walk[pos[&cur]..]
            .iter()
            .rev()
            .map(|&i| self.names[i].clone())
            .collect();
        cycle.push(cycle[0].clone());
        cycle
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut order: Vec<String> = Vec::new();
        let mut mentioned = BTreeSet::new();
        let mut edges: Vec<(String, String)> = Vec::new();
        let mut seen: HashMap<(String, String), usize> = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line_no = lineno + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split("->").map(str::trim).collect();
            for p in &parts {
                if !valid_name(p) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: if p.is_empty() {
                            format!("expected `parent -> child`, got `{line}`")
                        } else {
                            format!("invalid node name `{p}`; names match [a-z0-9_]+")
                        },
                    });
                }
            }
            for p in &parts {
                if mentioned.insert(p.to_string()) {
                    order.push(p.to_string());
                }
            }
            for w in parts.windows(2) {
                let key = (w[0].to_string(), w[1].to_string());
                if let Some(prev) = seen.insert(key.clone(), line_no) {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("duplicate edge {} -> {} (first on line {prev})", w[0], w[1]),
                    });
                }
                edges.push(key);
            }
        }
        Self::new(order, edges)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn fr_market_price() -> Self {
        Self::parse(FR_MARKET_PRICE).expect("bundled graph is valid")
    }

    pub fn fr_market_exports() -> Self {
        Self::parse(FR_MARKET_EXPORTS).expect("bundled graph is valid")
    }

    /// Serializes back to the DSL. Isolated nodes are written as bare names.
    pub fn to_dsl(&self) -> String {
        let mut out = String::new();
        for (i, name) in self.names.iter().enumerate() {
            if self.parents[i].is_empty() && self.children[i].is_empty() {
                out.push_str(name);
                out.push('\n');
            }
        }
        for (a, b) in self.edges() {
            out.push_str(&format!("{a} -> {b}\n"));
        }
        out
    }

    pub fn n_nodes(&self) -> usize {
        self.names.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Edges in declaration order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges
            .iter()
            .map(|&(a, b)| (self.names[a].as_str(), self.names[b].as_str()))
    }

    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, from: &str, to: &str) -> bool {
        match (self.index.get(from), self.index.get(to)) {
            (Some(&a), Some(&b)) => self.children[a].contains(&b),
            _ => false,
        }
    }

    pub fn parent_indices(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }

    pub fn child_indices(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn parents(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index_of(name)?;
        Ok(self.parents[i].iter().map(|&p| self.names[p].as_str()).collect())
    }

    pub fn children(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index_of(name)?;
        Ok(self.children[i].iter().map(|&c| self.names[c].as_str()).collect())
    }

    pub fn roots(&self) -> Vec<&str> {
        (0..self.n_nodes())
            .filter(|&i| self.parents[i].is_empty())
            .map(|i| self.names[i].as_str())
            .collect()
    }

    pub fn sinks(&self) -> Vec<&str> {
        (0..self.n_nodes())
            .filter(|&i| self.children[i].is_empty())
            .map(|i| self.names[i].as_str())
            .collect()
    }

    /// Node indices in a topological order (deterministic).
    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn topological_names(&self) -> Vec<&str> {
        self.topo.iter().map(|&i| self.names[i].as_str()).collect()
    }

    /// `mask[j]` is true when `j` is reachable from `i` by a non-empty path.
    pub fn descendants_mask(&self, i: usize) -> Vec<bool> {
        reach(&self.children, i)
    }

    pub fn ancestors_mask(&self, i: usize) -> Vec<bool> {
        reach(&self.parents, i)
    }

    pub fn descendants(&self, name: &str) -> Result<Vec<&str>> {
        let mask = self.descendants_mask(self.index_of(name)?);
        Ok(self.masked_names(&mask))
    }

    pub fn ancestors(&self, name: &str) -> Result<Vec<&str>> {
        let mask = self.ancestors_mask(self.index_of(name)?);
        Ok(self.masked_names(&mask))
    }

    fn masked_names(&self, mask: &[bool]) -> Vec<&str> {
        (0..self.n_nodes())
            .filter(|&j| mask[j])
            .map(|j| self.names[j].as_str())
            .collect()
    }

    /// All simple directed paths from `src` to `dst`, in lexicographic order of node names.
    pub fn enumerate_paths(&self, src: &str, dst: &str) -> Result<Vec<DirectedPath>> {
        let s = self.index_of(src)?;
        let d = self.index_of(dst)?;
        if s == d {
            return Ok(Vec::new());
        }
        let reaches_dst = {
            let mut m = self.ancestors_mask(d);
            m[d] = true;
            m
        };
        let sorted_children: Vec<Vec<usize>> = self
            .children
            .iter()
            .map(|cs| {
                let mut cs = cs.clone();
                cs.sort_by(|&a, &b| self.names[a].cmp(&self.names[b]));
                cs
            })
            .collect();
        let mut out = Vec::new();
        let mut stack = vec![s];
        self.paths_dfs(&sorted_children, &reaches_dst, d, &mut stack, &mut out);
        Ok(out)
    }

    fn paths_dfs(
        &self,
        children: &[Vec<usize>],
        reaches_dst: &[bool],
        dst: usize,
        stack: &mut Vec<usize>,
        out: &mut Vec<DirectedPath>,
    ) {
        let cur = *stack.last().expect("non-empty path");
        if cur == dst {
            out.push(DirectedPath(
                stack.iter().map(|&i| self.names[i].clone()).collect(),
            ));
            return;
        }
        for &c in &children[cur] {
            if reaches_dst[c] {
                stack.push(c);
                self.paths_dfs(children, reaches_dst, dst, stack, out);
                stack.pop();
            }
        }
    }

    /// One triple per node `x` and non-descendant `y` that is not a parent of `x`.
    pub fn local_markov_pairs(&self) -> Vec<LmcTriple> {
        let mut out = Vec::new();
        for x in 0..self.n_nodes() {
            let desc = self.descendants_mask(x);
            let z: Vec<String> = self.parents[x].iter().map(|&p| self.names[p].clone()).collect();
            for y in 0..self.n_nodes() {
                if y == x || desc[y] || self.parents[x].contains(&y) {
                    continue;
                }
                out.push(LmcTriple {
                    x: self.names[x].clone(),
                    y: self.names[y].clone(),
                    z: z.clone(),
                });
            }
        }
        out
    }

    fn skeleton(&self) -> BTreeSet<(String, String)> {
        self.edges()
            .map(|(a, b)| {
                if a < b {
                    (a.to_string(), b.to_string())
                } else {
                    (b.to_string(), a.to_string())
                }
            })
            .collect()
    }

    /// Triples `(a, c, b)` with `a -> c <- b`, `a < b` and `a`, `b` non-adjacent.
    fn v_structures(&self) -> BTreeSet<(String, String, String)> {
        let mut out = BTreeSet::new();
        for c in 0..self.n_nodes() {
            let ps = &self.parents[c];
            for (k, &a) in ps.iter().enumerate() {
                for &b in &ps[k + 1..] {
                    if self.children[a].contains(&b) || self.children[b].contains(&a) {
                        continue;
                    }
                    let (x, y) = if self.names[a] < self.names[b] { (a, b) } else { (b, a) };
                    out.insert((
                        self.names[x].clone(),
                        self.names[c].clone(),
                        self.names[y].clone(),
                    ));
                }
            }
        }
        out
    }

    /// Markov equivalence by identical skeletons and v-structures.
    pub fn markov_equivalent(&self, other: &CausalGraph) -> Result<bool> {
        let a: BTreeSet<&String> = self.names.iter().collect();
        let b: BTreeSet<&String> = other.names.iter().collect();
        if a != b {
            return Err(Error::InvalidArgument(
                "Markov equivalence needs graphs over the same node set".into(),
            ));
        }
        Ok(self.skeleton() == other.skeleton() && self.v_structures() == other.v_structures())
    }

    /// Relabels nodes: node `i` takes the name of node `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<CausalGraph> {
        let n = self.n_nodes();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::invalid("relabeling must be a permutation of the nodes"));
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::from_parts(self.names.clone(), self.index.clone(), edges)
    }

    /// Uniformly random relabeling drawn from `seed`.
    pub fn permute_nodes(&self, seed: u64) -> CausalGraph {
        let perm = self.random_permutation(seed);
        self.relabel(&perm).expect("a shuffle is a permutation")
    }

    pub fn random_permutation(&self, seed: u64) -> Vec<usize> {
        let mut perm: Vec<usize> = (0..self.n_nodes()).collect();
        perm.shuffle(&mut rng_for(seed, "permute_nodes"));
        perm
    }

    /// d-separation of `x` and `y` given `z`, via reachability in the
    /// moralized ancestral graph.
    pub fn d_separated(&self, x: &str, y: &str, z: &[&str]) -> Result<bool> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let zi: Vec<usize> = z.iter().map(|n| self.index_of(n)).collect::<Result<_>>()?;
        let n = self.n_nodes();
        let mut keep = vec![false; n];
        for &s in [xi, yi].iter().chain(&zi) {
            keep[s] = true;
            for (j, a) in self.ancestors_mask(s).into_iter().enumerate() {
                keep[j] |= a;
            }
        }
        let mut adj = vec![BTreeSet::new(); n];
        for c in (0..n).filter(|&c| keep[c]) {
            let ps = &self.parents[c];
            for &p in ps {
                adj[p].insert(c);
                adj[c].insert(p);
            }
            for (k, &a) in ps.iter().enumerate() {
                for &b in &ps[k + 1..] {
                    adj[a].insert(b);
                    adj[b].insert(a);
                }
            }
        }
        let mut blocked = vec![false; n];
        for &s in &zi {
            blocked[s] = true;
        }
        if blocked[xi] || blocked[yi] {
            return Ok(true);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![xi];
        seen[xi] = true;
        while let Some(u) = stack.pop() {
            if u == yi {
                return Ok(false);
            }
            for &v in &adj[u] {
                if keep[v] && !blocked[v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        Ok(true)
    }
}

fn reach(adj: &[Vec<usize>], start: usize) -> Vec<bool> {
    let mut mask = vec![false; adj.len()];
    let mut stack: Vec<usize> = adj[start].clone();
    while let Some(u) = stack.pop() {
        if !mask[u] {
            mask[u] = true;
            stack.extend(&adj[u]);
        }
    }
    mask
}

impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dsl())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g(text: &str) -> CausalGraph {
        CausalGraph::parse(text).unwrap()
    }

    /// Independent acyclicity check: repeatedly strip nodes without parents.
    fn acyclic_by_stripping(g: &CausalGraph) -> bool {
        let mut edges: Vec<(String, String)> = g
            .edges()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let mut nodes: BTreeSet<String> = g.nodes().iter().cloned().collect();
        loop {
            let free: Vec<String> = nodes
                .iter()
                .filter(|n| !edges.iter().any(|(_, b)| b == *n))
                .cloned()
                .collect();
            if free.is_empty() {
                return nodes.is_empty();
            }
            for n in free {
                nodes.remove(&n);
                edges.retain(|(a, _)| *a != n);
            }
        }
    }

    fn random_dag(rng: &mut ChaCha8Rng, n: usize, p: f64) -> CausalGraph {
        let names: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((names[i].clone(), names[j].clone()));
                }
            }
        }
        CausalGraph::new(names.clone(), edges).unwrap()
    }

    #[test]
    fn parse_small() {
        let gr = g("a -> b\nb -> c");
        assert_eq!(gr.n_nodes(), 3);
        assert_eq!(gr.n_edges(), 2);
        assert_eq!(gr.topological_names(), vec!["a", "b", "c"]);
        let gr = g("# header\n\nx\na -> b -> c  # chain\n");
        assert_eq!(gr.n_nodes(), 4);
        assert_eq!(gr.n_edges(), 2);
        assert_eq!(CausalGraph::parse(&gr.to_dsl()).unwrap(), gr);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(CausalGraph::parse("a -> a"), Err(Error::Cycle(_))));
        match CausalGraph::parse("a -> b\nb -> c\nc -> a") {
            Err(Error::Cycle(c)) => {
                assert_eq!(c.len(), 4);
                assert_eq!(c.first(), c.last());
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            CausalGraph::parse("a -> b\nA -> c"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            CausalGraph::parse("a -> b\n\na => b"),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            CausalGraph::parse("a -> b\na -> b"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(CausalGraph::parse("a ->"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn cycle_reported_is_a_real_cycle() {
        let gr_text = "s -> a\na -> b\nb -> c\nc -> a\nc -> t";
        let Err(Error::Cycle(cycle)) = CausalGraph::parse(gr_text) else {
            panic!("expected cycle")
        };
        let edges: BTreeSet<(String, String)> = gr_text
            .lines()
            .map(|l| {
                let (a, b) = l.split_once(" -> ").unwrap();
                (a.to_string(), b.to_string())
            })
            .collect();
        for w in cycle.windows(2) {
            assert!(edges.contains(&(w[0].clone(), w[1].clone())), "{cycle:?}");
        }
    }

    #[test]
    fn bundled_graphs() {
        for (gr, sink) in [
            (CausalGraph::fr_market_price(), "price_day_ahead"),
            (CausalGraph::fr_market_exports(), "net_exports"),
        ] {
            assert!(gr.n_nodes() >= 20);
            assert!(acyclic_by_stripping(&gr));
            assert_eq!(gr.sinks(), vec![sink]);
            assert_eq!(gr.local_markov_pairs().len(), 236);
        }
    }

    #[test]
    fn paths_chain_and_diamond() {
        let chain = g("a -> b\nb -> c");
        let p = chain.enumerate_paths("a", "c").unwrap();
        assert_eq!(p, vec![DirectedPath(vec!["a".into(), "b".into(), "c".into()])]);
        let diamond = g("a -> c\na -> b\nb -> d\nc -> d");
        let p = diamond.enumerate_paths("a", "d").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].to_string(), "a -> b -> d");
        assert_eq!(p[1].to_string(), "a -> c -> d");
        assert!(diamond.enumerate_paths("d", "a").unwrap().is_empty());
        assert!(diamond.enumerate_paths("a", "zz").is_err());
    }

    fn brute_paths(g: &CausalGraph, cur: &str, dst: &str, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        path.push(cur.to_string());
        if cur == dst {
            out.push(path.clone());
        } else {
            for (a, b) in g.edges() {
                if a == cur && !path.iter().any(|p| p == b) {
                    brute_paths(g, b, dst, path, out);
                }
            }
        }
        path.pop();
    }

    #[test]
    fn paths_match_brute_force_on_random_dags() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let gr = random_dag(&mut rng, 8, 0.45);
            for s in gr.nodes() {
                for d in gr.nodes() {
                    if s == d {
                        continue;
                    }
                    let mut expect = Vec::new();
                    brute_paths(&gr, s, d, &mut Vec::new(), &mut expect);
                    expect.sort();
                    let got: Vec<Vec<String>> =
                        gr.enumerate_paths(s, d).unwrap().into_iter().map(|p| p.0).collect();
                    assert_eq!(got, expect);
                }
            }
        }
    }

    #[test]
    fn lmc_small_cases() {
        assert!(g("a -> b").local_markov_pairs().is_empty());
        let pairs = g("a\nb").local_markov_pairs();
        assert_eq!(
            pairs,
            vec![
                LmcTriple { x: "a".into(), y: "b".into(), z: vec![] },
                LmcTriple { x: "b".into(), y: "a".into(), z: vec![] },
            ]
        );
    }

    #[test]
    fn lmc_triples_are_d_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let gr = random_dag(&mut rng, 7, 0.35);
            for t in gr.local_markov_pairs() {
                let z: Vec<&str> = t.z.iter().map(String::as_str).collect();
                assert!(gr.d_separated(&t.x, &t.y, &z).unwrap());
            }
        }
    }

    #[test]
    fn mec_small_cases() {
        assert!(g("a -> b").markov_equivalent(&g("b -> a")).unwrap());
        assert!(!g("a -> c\nb -> c").markov_equivalent(&g("a -> c\nc -> b")).unwrap());
        assert!(g("a -> b").markov_equivalent(&g("a -> c")).is_err());
    }

    /// All DAGs over three labelled nodes.
    fn all_three_node_dags() -> Vec<CausalGraph> {
        let pairs = [("a", "b"), ("a", "c"), ("b", "c")];
        let mut out = Vec::new();
        for code in 0..27u32 {
            let mut edges = Vec::new();
            let mut c = code;
            for &(x, y) in &pairs {
                match c % 3 {
                    1 => edges.push((x, y)),
                    2 => edges.push((y, x)),
                    _ => {}
                }
                c /= 3;
            }
            if let Ok(gr) = CausalGraph::new(["a", "b", "c"], edges) {
                out.push(gr);
            }
        }
        out
    }

    fn d_sep_fingerprint(gr: &CausalGraph) -> Vec<bool> {
        let nodes = ["a", "b", "c"];
        let mut fp = Vec::new();
        for (i, x) in nodes.iter().enumerate() {
            for y in &nodes[i + 1..] {
                let rest: Vec<&str> = nodes.iter().copied().filter(|n| n != x && n != y).collect();
                fp.push(gr.d_separated(x, y, &[]).unwrap());
                fp.push(gr.d_separated(x, y, &rest).unwrap());
            }
        }
        fp
    }

    #[test]
    fn mec_matches_d_separation_on_all_three_node_dags() {
        let dags = all_three_node_dags();
        assert_eq!(dags.len(), 25);
        for a in &dags {
            for b in &dags {
                assert_eq!(
                    a.markov_equivalent(b).unwrap(),
                    d_sep_fingerprint(a) == d_sep_fingerprint(b),
                    "{a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn permutations() {
        let gr = CausalGraph::fr_market_price();
        let id: Vec<usize> = (0..gr.n_nodes()).collect();
        assert_eq!(gr.relabel(&id).unwrap(), gr);
        let mut distinct = BTreeSet::new();
        for seed in 0..50 {
            let p = gr.permute_nodes(seed);
            assert_eq!(p.n_edges(), gr.n_edges());
            assert!(acyclic_by_stripping(&p));
            assert_eq!(p, gr.permute_nodes(seed));
            distinct.insert(p.to_dsl());
        }
        assert_eq!(distinct.len(), 50);
        assert!(gr.relabel(&[0, 0]).is_err());
    }

    proptest! {
        #[test]
        fn mec_reflexive_symmetric_and_order_invariant(seed in 0u64..500, other in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_dag(&mut rng, 6, 0.4);
            let mut rng = ChaCha8Rng::seed_from_u64(other);
            let b = random_dag(&mut rng, 6, 0.4);
            prop_assert!(a.markov_equivalent(&a).unwrap());
            prop_assert_eq!(a.markov_equivalent(&b).unwrap(), b.markov_equivalent(&a).unwrap());
            let mut edges: Vec<(String, String)> =
                a.edges().map(|(x, y)| (x.to_string(), y.to_string())).collect();
            edges.reverse();
            let shuffled = CausalGraph::new(a.nodes().to_vec(), edges).unwrap();
            prop_assert_eq!(a.markov_equivalent(&b).unwrap(), shuffled.markov_equivalent(&b).unwrap());
        }

        #[test]
        fn permuted_graphs_stay_acyclic(seed in any::<u64>()) {
            let p = CausalGraph::fr_market_exports().permute_nodes(seed);
            prop_assert!(acyclic_by_stripping(&p));
        }
    }
}
