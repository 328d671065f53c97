//! Sparse block-model networks: sampling, construction, and the plain-text
//! file format.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::model::BlockModelSpec;

/// How planted labels are drawn when sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Each node's label drawn independently from the prior (the model as
    /// defined). Default.
    Multinomial,
    /// Exactly `round(n * gamma_a)` nodes per group (largest-remainder
    /// apportionment), randomly permuted. Variance reduction for overlap
    /// baselines.
    ExactSizes,
}

/// An undirected simple graph with planted group labels and the generating
/// parameters. Immutable after construction.
///
/// Adjacency is CSR with sorted neighbor lists. `reverse_slot[s]` gives, for
/// the directed slot `s = (i -> j)`, the slot of `(j -> i)`; message arrays
/// in the inference code are indexed by these slots.
#[derive(Debug, Clone)]
pub struct Network {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<u32>,
    neighbors: Vec<u32>,
    reverse_slot: Vec<u32>,
    planted: Vec<u32>,
    spec: BlockModelSpec,
}

impl Network {
    /// Builds a network from parts, enforcing the simple-graph invariants:
    /// no self-loops, no duplicate edges, labels in range.
    pub fn from_parts(
        n: usize,
        planted: Vec<u32>,
        mut edges: Vec<(u32, u32)>,
        spec: BlockModelSpec,
    ) -> Result<Self> {
        if spec.n != n {
            return Err(Error::invalid(format!(
                "spec says n = {} but {} labels given",
                spec.n, n
            )));
        }
        if planted.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} labels, got {}",
                planted.len()
            )));
        }
        let q = spec.q() as u32;
        if let Some(&l) = planted.iter().find(|&&l| l >= q) {
            return Err(Error::invalid(format!(
                "planted label {} out of range 1..={q}",
                l + 1
            )));
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(Error::invalid(format!("self-loop at node {}", e.0)));
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
            if e.1 as usize >= n {
                return Err(Error::invalid(format!("edge endpoint {} >= n = {n}", e.1)));
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }

        let mut degree = vec![0u32; n];
        for &(i, j) in &edges {
            degree[i as usize] += 1;
            degree[j as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut neighbors = vec![0u32; 2 * edges.len()];
        let mut fill = offsets.clone();
        for &(i, j) in &edges {
            neighbors[fill[i as usize] as usize] = j;
            fill[i as usize] += 1;
            neighbors[fill[j as usize] as usize] = i;
            fill[j as usize] += 1;
        }
        // sorted edges imply sorted neighbor lists; reverse slots by binary search
        let mut reverse_slot = vec![0u32; neighbors.len()];
        for i in 0..n {
            let (lo, hi) = (offsets[i] as usize, offsets[i + 1] as usize);
            for s in lo..hi {
                let j = neighbors[s] as usize;
                let (jlo, jhi) = (offsets[j] as usize, offsets[j + 1] as usize);
                let pos = neighbors[jlo..jhi]
                    .binary_search(&(i as u32))
                    .expect("adjacency is symmetric by construction");
                reverse_slot[s] = (jlo + pos) as u32;
            }
        }
        Ok(Network {
            n,
            edges,
            offsets,
            neighbors,
            reverse_slot,
            planted,
            spec,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.spec.q()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn spec(&self) -> &BlockModelSpec {
        &self.spec
    }

    pub fn planted(&self) -> &[u32] {
        &self.planted
    }

    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Directed-slot range owned by node `i`; slot `s` carries the message
    /// from `i` to `self.slot_target(s)`.
    #[inline]
    pub fn slots(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i] as usize..self.offsets[i + 1] as usize
    }

    #[inline]
    pub fn slot_target(&self, s: usize) -> usize {
        self.neighbors[s] as usize
    }

    #[inline]
    pub fn reverse(&self, s: usize) -> usize {
        self.reverse_slot[s] as usize
    }

    pub fn num_directed(&self) -> usize {
        self.neighbors.len()
    }

    /// Slot of the directed edge `i -> j`, if the edge exists.
    pub fn slot_of(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.offsets[i] as usize, self.offsets[i + 1] as usize);
        self.neighbors[lo..hi]
            .binary_search(&(j as u32))
            .ok()
            .map(|p| lo + p)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.slot_of(i, j).is_some()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }
}

fn sample_labels(spec: &BlockModelSpec, mode: LabelMode, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let gamma = spec.prior.gamma();
    let q = gamma.len();
    match mode {
        LabelMode::Multinomial => {
            let mut cdf = Vec::with_capacity(q);
            let mut acc = 0.0;
            for &g in gamma {
                acc += g;
                cdf.push(acc);
            }
            (0..spec.n)
                .map(|_| {
                    let u: f64 = rng.gen();
                    cdf.iter().position(|&c| u < c).unwrap_or(q - 1) as u32
                })
                .collect()
        }
        LabelMode::ExactSizes => {
            // largest-remainder apportionment of round(n * gamma_a)
            let n = spec.n as f64;
            let mut counts: Vec<usize> = gamma.iter().map(|g| (g * n).floor() as usize).collect();
            let mut rem: Vec<(f64, usize)> = gamma
                .iter()
                .enumerate()
                .map(|(a, g)| (g * n - (g * n).floor(), a))
                .collect();
            rem.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
            // the floor sum falls short of n by fewer than q
            let mut short = spec.n - counts.iter().sum::<usize>();
            for &(_, a) in rem.iter() {
                if short == 0 {
                    break;
                }
                counts[a] += 1;
                short -= 1;
            }
            let mut labels = Vec::with_capacity(spec.n);
            for (a, &k) in counts.iter().enumerate() {
                labels.extend(std::iter::repeat(a as u32).take(k));
            }
            labels.shuffle(rng);
            labels
        }
    }
}

/// Samples a network: labels from the prior, then each unordered pair `{i, j}`
/// carries an edge independently with probability `c_{s_i s_j} / n`.
/// Deterministic given the seed.
///
/// Runs in O(n + m): per group pair the edge count is drawn from the exact
/// binomial, then endpoints are placed uniformly with rejection of
/// duplicates and self-pairs.
pub fn sample_network(spec: &BlockModelSpec, seed: u64) -> Result<Network> {
    sample_network_with(spec, seed, LabelMode::Multinomial)
}

pub fn sample_network_with(spec: &BlockModelSpec, seed: u64, mode: LabelMode) -> Result<Network> {
    if spec.affinity.max_entry() > spec.n as f64 {
        return Err(Error::invalid(format!(
            "c_ab = {} exceeds n = {}",
            spec.affinity.max_entry(),
            spec.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = sample_labels(spec, mode, &mut rng);
    let q = spec.q();

    let mut members: Vec<Vec<u32>> = vec![Vec::new(); q];
    for (i, &s) in labels.iter().enumerate() {
        members[s as usize].push(i as u32);
    }

    let mut edges: Vec<(u32, u32)> = Vec::new();
    let mut seen: HashSet<(u32, u32)> = HashSet::new();
    for a in 0..q {
        for b in a..q {
            let p = spec.affinity.get(a, b) / spec.n as f64;
            if p == 0.0 {
                continue;
            }
            let pairs: u64 = if a == b {
                let na = members[a].len() as u64;
                na * na.saturating_sub(1) / 2
            } else {
                members[a].len() as u64 * members[b].len() as u64
            };
            if pairs == 0 {
                continue;
            }
            let count = Binomial::new(pairs, p.min(1.0))
                .expect("binomial parameters validated above")
                .sample(&mut rng);
            let mut placed = 0u64;
            while placed < count {
                let u = members[a][rng.gen_range(0..members[a].len())];
                let v = members[b][rng.gen_range(0..members[b].len())];
                if u == v {
                    continue;
                }
                let key = (u.min(v), u.max(v));
                if seen.insert(key) {
                    edges.push(key);
                    placed += 1;
                }
            }
        }
    }
    Network::from_parts(spec.n, labels, edges, spec.clone())
}

/// Samples a uniform labeled tree on `n` nodes (Pruefer construction) with
/// labels drawn from the prior. Not a block-model sample; used as ground
/// truth topology for exactness checks.
pub fn sample_labeled_tree(spec: &BlockModelSpec, seed: u64) -> Result<Network> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = sample_labels(spec, LabelMode::Multinomial, &mut rng);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    if n == 2 {
        edges.push((0, 1));
    } else if n > 2 {
        let pruefer: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
        let mut degree = vec![1u32; n];
        for &p in &pruefer {
            degree[p] += 1;
        }
        let mut leaf_heap: std::collections::BinaryHeap<std::cmp::Reverse<usize>> = (0..n)
            .filter(|&i| degree[i] == 1)
            .map(std::cmp::Reverse)
            .collect();
        for &p in &pruefer {
            let std::cmp::Reverse(leaf) = leaf_heap.pop().expect("tree has a leaf");
            edges.push((leaf.min(p) as u32, leaf.max(p) as u32));
            degree[p] -= 1;
            if degree[p] == 1 {
                leaf_heap.push(std::cmp::Reverse(p));
            }
        }
        let std::cmp::Reverse(u) = leaf_heap.pop().unwrap();
        let std::cmp::Reverse(v) = leaf_heap.pop().unwrap();
        edges.push((u.min(v) as u32, u.max(v) as u32));
    }
    Network::from_parts(n, labels, edges, spec.clone())
}

// ---------------------------------------------------------------------------
// file format
//
//   line 1: `n q`
//   line 2: planted labels, 1-based, space separated
//   line 3: `m`
//   next m lines: `i j` with i < j, 0-based
//   trailing `#` lines: spec as key=value (gamma, c with rows `;`-separated)
// ---------------------------------------------------------------------------

pub fn write_network<W: Write>(net: &Network, w: &mut W) -> Result<()> {
    writeln!(w, "{} {}", net.n, net.q())?;
    let labels: Vec<String> = net.planted.iter().map(|l| (l + 1).to_string()).collect();
    writeln!(w, "{}", labels.join(" "))?;
    writeln!(w, "{}", net.edges.len())?;
    for &(i, j) in &net.edges {
        writeln!(w, "{i} {j}")?;
    }
    let gamma: Vec<String> = net
        .spec
        .prior
        .gamma()
        .iter()
        .map(|g| g.to_string())
        .collect();
    writeln!(w, "# gamma={}", gamma.join(","))?;
    let q = net.q();
    let rows: Vec<String> = (0..q)
        .map(|a| {
            net.spec
                .affinity
                .row(a)
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(",")
        })
        .collect();
    writeln!(w, "# c={}", rows.join(";"))?;
    Ok(())
}

pub fn write_network_file<P: AsRef<Path>>(net: &Network, path: P) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_network(net, &mut w)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

pub fn parse_network<R: Read>(r: R) -> Result<Network> {
    let reader = BufReader::new(r);
    let mut lines = reader.lines().enumerate();

    let mut next_line = || -> Result<(usize, String)> {
        match lines.next() {
            Some((idx, Ok(l))) => Ok((idx + 1, l)),
            Some((idx, Err(e))) => Err(parse_err(idx + 1, e.to_string())),
            None => Err(parse_err(0, "unexpected end of file")),
        }
    };

    let (ln, header) = next_line()?;
    let mut it = header.split_whitespace();
    let n: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `n q` header"))?;
    let q: usize = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| parse_err(ln, "expected `n q` header"))?;

    let (ln, label_line) = next_line()?;
    let mut planted = Vec::with_capacity(n);
    for tok in label_line.split_whitespace() {
        let l: usize = tok
            .parse()
            .map_err(|_| parse_err(ln, format!("bad label `{tok}`")))?;
        if l < 1 || l > q {
            return Err(parse_err(ln, format!("label {l} out of range 1..={q}")));
        }
        planted.push((l - 1) as u32);
    }
    if planted.len() != n {
        return Err(parse_err(
            ln,
            format!("expected {n} labels, got {}", planted.len()),
        ));
    }

    let (ln, mline) = next_line()?;
    let m: usize = mline
        .trim()
        .parse()
        .map_err(|_| parse_err(ln, "expected edge count"))?;

    let mut edges = Vec::with_capacity(m);
    let mut seen = HashSet::with_capacity(m);
    for _ in 0..m {
        let (ln, eline) = next_line()?;
        let mut it = eline.split_whitespace();
        let i: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "expected `i j` edge"))?;
        let j: u32 = it
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| parse_err(ln, "expected `i j` edge"))?;
        if i >= j {
            return Err(parse_err(ln, format!("edge ({i}, {j}) must have i < j")));
        }
        if j as usize >= n {
            return Err(parse_err(ln, format!("edge endpoint {j} >= n = {n}")));
        }
        if !seen.insert((i, j)) {
            return Err(parse_err(ln, format!("duplicate edge ({i}, {j})")));
        }
        edges.push((i, j));
    }

    let mut gamma: Option<Vec<f64>> = None;
    let mut cmat: Option<Vec<f64>> = None;
    for (idx, line) in lines {
        let ln = idx + 1;
        let line = line.map_err(|e| parse_err(ln, e.to_string()))?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let body = t
            .strip_prefix('#')
            .ok_or_else(|| parse_err(ln, format!("unexpected trailing line `{t}`")))?
            .trim();
        if let Some(v) = body.strip_prefix("gamma=") {
            let parsed: std::result::Result<Vec<f64>, _> =
                v.split(',').map(|x| x.trim().parse()).collect();
            gamma = Some(parsed.map_err(|_| parse_err(ln, "bad gamma list"))?);
        } else if let Some(v) = body.strip_prefix("c=") {
            let mut flat = Vec::with_capacity(q * q);
            for row in v.split(';') {
                for x in row.split(',') {
                    flat.push(
                        x.trim()
                            .parse()
                            .map_err(|_| parse_err(ln, "bad affinity entry"))?,
                    );
                }
            }
            cmat = Some(flat);
        }
        // unknown comment keys are ignored
    }
    let gamma = gamma.ok_or_else(|| parse_err(0, "missing `# gamma=` metadata"))?;
    let cmat = cmat.ok_or_else(|| parse_err(0, "missing `# c=` metadata"))?;
    if gamma.len() != q {
        return Err(parse_err(0, format!("gamma has {} entries, q = {q}", gamma.len())));
    }
    let prior = crate::model::GroupPrior::new(gamma)?;
    let affinity = crate::model::AffinityMatrix::new(q, cmat)?;
    let spec = BlockModelSpec::new(n, prior, affinity)?;
    Network::from_parts(n, planted, edges, spec)
}

pub fn parse_network_file<P: AsRef<Path>>(path: P) -> Result<Network> {
    parse_network(std::fs::File::open(path)?)
}
