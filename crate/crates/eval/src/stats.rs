//! Small statistics used by the experiment reports.

use std::collections::BTreeSet;

use kglf_core::graph::KnowledgeGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sample Kolmogorov-Smirnov statistic: the largest vertical gap
/// between the empirical CDFs. Zero when either sample is empty.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Empirical CDF as `(value, fraction ≤ value)` at every distinct value.
pub fn ecdf(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, x) in s.iter().enumerate() {
        match out.last_mut() {
            Some(last) if last.0 == *x => last.1 = (i + 1) as f64 / n,
            _ => out.push((*x, (i + 1) as f64 / n)),
        }
    }
    out
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Undirected simple edges of the graph, ignoring relation and direction.
pub fn skeleton(g: &KnowledgeGraph) -> Vec<(usize, usize)> {
    let set: BTreeSet<(usize, usize)> = g
        .links()
        .filter(|(t, _)| t.subject != t.object)
        .map(|(t, _)| {
            let (a, b) = (t.subject.index(), t.object.index());
            (a.min(b), a.max(b))
        })
        .collect();
    set.into_iter().collect()
}

/// Transitivity: three times the triangles over the connected triples.
pub fn clustering(n: usize, edges: &[(usize, usize)]) -> f64 {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut closed = 0usize;
    let mut triples = 0usize;
    for nb in &adj {
        let k = nb.len();
        triples += k * k.saturating_sub(1) / 2;
        let v: Vec<usize> = nb.iter().copied().collect();
        for (i, &x) in v.iter().enumerate() {
            closed += v[i + 1..].iter().filter(|y| adj[x].contains(y)).count();
        }
    }
    if triples == 0 {
        0.0
    } else {
        closed as f64 / triples as f64
    }
}

/// Degree-preserving randomisation by repeated double-edge swaps.
pub fn rewire(edges: &[(usize, usize)], swaps: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = edges.to_vec();
    let mut set: BTreeSet<(usize, usize)> = e.iter().copied().collect();
    if e.len() < 2 {
        return e;
    }
    let norm = |a: usize, b: usize| (a.min(b), a.max(b));
    for _ in 0..swaps * 10 {
        let (i, j) = (rng.gen_range(0..e.len()), rng.gen_range(0..e.len()));
        if i == j {
            continue;
        }
        let ((a, b), (c, d)) = (e[i], e[j]);
        let (x, y) = if rng.gen_bool(0.5) { ((a, d), (c, b)) } else { ((a, c), (b, d)) };
        if x.0 == x.1 || y.0 == y.1 {
            continue;
        }
        let (x, y) = (norm(x.0, x.1), norm(y.0, y.1));
        if x == y || set.contains(&x) || set.contains(&y) {
            continue;
        }
        set.remove(&e[i]);
        set.remove(&e[j]);
        set.insert(x);
        set.insert(y);
        e[i] = x;
        e[j] = y;
    }
    e
}
