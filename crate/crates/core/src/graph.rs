//! Immutable simple undirected graphs.
//!
//! Nodes are dense indices in `0..n`. Each node keeps a sorted neighbor list,
//! so adjacency checks are a binary search. Original string tokens from an
//! edge-list file are retained in `labels`.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Unordered node pair stored with `0 <= i < j < n`.
pub type Pair = (usize, usize);

#[inline]
pub fn canonical(i: usize, j: usize) -> Pair {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<Pair>,
    labels: Option<Vec<String>>,
}

/// What `from_edge_list` dropped while building the graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub duplicates: usize,
    pub self_loops: usize,
}

impl Graph {
    /// Build from index pairs. Self-loops and repeated pairs are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = Pair>,
    {
        let (g, _) = Self::from_edges_reporting(n, edges)?;
        Ok(g)
    }

    fn from_edges_reporting<I>(n: usize, edges: I) -> Result<(Self, IngestReport)>
    where
        I: IntoIterator<Item = Pair>,
    {
        let mut report = IngestReport::default();
        let mut list = Vec::new();
        for (i, j) in edges {
            for x in [i, j] {
                if x >= n {
                    return Err(Error::NodeOutOfRange { index: x, n });
                }
            }
            if i == j {
                report.self_loops += 1;
                continue;
            }
            list.push(canonical(i, j));
        }
        list.sort_unstable();
        let before = list.len();
        list.dedup();
        report.duplicates = before - list.len();

        let mut adj = vec![Vec::new(); n];
        for &(i, j) in &list {
            adj[i].push(j);
            adj[j].push(i);
        }
        for nb in adj.iter_mut() {
            nb.sort_unstable();
        }
        Ok((
            Graph {
                n,
                adj,
                edges: list,
                labels: None,
            },
            report,
        ))
    }

    /// Build from token records, assigning dense indices in first-seen order.
    pub fn from_edge_list<S: AsRef<str>>(records: &[(S, S)]) -> Result<(Self, IngestReport)> {
        if records.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut labels = Vec::new();
        let mut intern = |tok: &str| -> usize {
            if let Some(&i) = index.get(tok) {
                return i;
            }
            let i = labels.len();
            labels.push(tok.to_string());
            index.insert(tok.to_string(), i);
            i
        };
        let pairs: Vec<Pair> = records
            .iter()
            .map(|(a, b)| (intern(a.as_ref()), intern(b.as_ref())))
            .collect();
        let (mut g, report) = Self::from_edges_reporting(labels.len(), pairs)?;
        g.labels = Some(labels);
        Ok((g, report))
    }

    /// Parse the edge-list text format: two tokens per line, `#` comments.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<(Self, IngestReport)> {
        let mut records = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<edge list>", e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = trimmed.split_whitespace().collect();
            if toks.len() != 2 {
                return Err(Error::MalformedRecord {
                    line: lineno + 1,
                    found: toks.len(),
                });
            }
            records.push((toks[0].to_string(), toks[1].to_string()));
        }
        Self::from_edge_list(&records)
    }

    pub fn read_edge_list_file(path: &Path) -> Result<(Self, IngestReport)> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_edge_list(std::io::BufReader::new(f))
    }

    pub fn write_edge_list<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for &(i, j) in &self.edges {
            writeln!(w, "{}\t{}", self.label(i), self.label(j))?;
        }
        Ok(())
    }

    /// Token records in canonical edge order.
    pub fn to_edge_list(&self) -> Vec<(String, String)> {
        self.edges
            .iter()
            .map(|&(i, j)| (self.label(i), self.label(j)))
            .collect()
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        let (a, b) = if self.adj[i].len() <= self.adj[j].len() {
            (i, j)
        } else {
            (j, i)
        };
        self.adj[a].binary_search(&b).is_ok()
    }

    /// Canonical `(i, j)` edges with `i < j`, sorted.
    pub fn edges(&self) -> &[Pair] {
        &self.edges
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Original token of node `i`, or its index when the graph was built from indices.
    pub fn label(&self, i: usize) -> String {
        match &self.labels {
            Some(l) => l[i].clone(),
            None => i.to_string(),
        }
    }

    pub fn with_labels(mut self, labels: Option<Vec<String>>) -> Self {
        if let Some(l) = &labels {
            assert_eq!(l.len(), self.n, "label count must equal node count");
        }
        self.labels = labels;
        self
    }

    pub fn pair_count(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    pub fn non_edge_count(&self) -> usize {
        self.pair_count() - self.edge_count()
    }

    /// Every unordered pair `(i, j)`, `i < j`, that is not an edge.
    pub fn non_edges(&self) -> NonEdges<'_> {
        NonEdges {
            g: self,
            i: 0,
            j: 1,
            cursor: 0,
        }
    }

    /// New graph without `subset`; node count is unchanged.
    pub fn remove_edges(&self, subset: &[Pair]) -> Result<Self> {
        let mut drop: Vec<Pair> = subset.iter().map(|&(i, j)| canonical(i, j)).collect();
        drop.sort_unstable();
        drop.dedup();
        for &(i, j) in &drop {
            if i >= self.n || j >= self.n || !self.has_edge(i, j) {
                return Err(Error::NotAnEdge(i, j));
            }
        }
        let kept = self
            .edges
            .iter()
            .copied()
            .filter(|e| drop.binary_search(e).is_err());
        let g = Self::from_edges(self.n, kept)?;
        Ok(g.with_labels(self.labels.clone()))
    }

    /// Graph with node `i` renamed to `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        assert_eq!(perm.len(), self.n);
        let g = Self::from_edges(self.n, self.edges.iter().map(|&(i, j)| (perm[i], perm[j])))?;
        let labels = self.labels.as_ref().map(|l| {
            let mut out = vec![String::new(); self.n];
            for (i, tok) in l.iter().enumerate() {
                out[perm[i]] = tok.clone();
            }
            out
        });
        Ok(g.with_labels(labels))
    }

    /// Connected-component id per node, numbered in order of first node.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..self.n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(u) = stack.pop() {
                for &v in &self.adj[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    /// Hop distances from `source`; unreachable nodes get `u32::MAX`.
    pub fn bfs_distances(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = std::collections::VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u] + 1;
            for &v in &self.adj[u] {
                if dist[v] == u32::MAX {
                    dist[v] = du;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Number of common neighbors, via a merge of the sorted lists.
    pub fn common_neighbor_count(&self, i: usize, j: usize) -> usize {
        let mut count = 0;
        self.for_each_common_neighbor(i, j, |_| count += 1);
        count
    }

    pub fn for_each_common_neighbor<F: FnMut(usize)>(&self, i: usize, j: usize, mut f: F) {
        let (a, b) = (&self.adj[i], &self.adj[j]);
        let (mut x, mut y) = (0, 0);
        while x < a.len() && y < b.len() {
            match a[x].cmp(&b[y]) {
                std::cmp::Ordering::Less => x += 1,
                std::cmp::Ordering::Greater => y += 1,
                std::cmp::Ordering::Equal => {
                    f(a[x]);
                    x += 1;
                    y += 1;
                }
            }
        }
    }

    /// SHA-256 over node count and canonical edges.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n as u64).to_le_bytes());
        for &(i, j) in &self.edges {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Iterator over non-edges in lexicographic order.
pub struct NonEdges<'a> {
    g: &'a Graph,
    i: usize,
    j: usize,
    cursor: usize,
}

impl Iterator for NonEdges<'_> {
    type Item = Pair;

    fn next(&mut self) -> Option<Pair> {
        let n = self.g.n;
        while self.i + 1 < n {
            if self.j >= n {
                self.i += 1;
                self.j = self.i + 1;
                self.cursor = 0;
                continue;
            }
            let nb = &self.g.adj[self.i];
            while self.cursor < nb.len() && nb[self.cursor] < self.j {
                self.cursor += 1;
            }
            let j = self.j;
            self.j += 1;
            if self.cursor < nb.len() && nb[self.cursor] == j {
                continue;
            }
            return Some((self.i, j));
        }
        None
    }
}
