//! Contiguity graphs and the intrinsic CAR structure `D_w − W`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Symmetric, loop-free region adjacency with cached row sums.
///
/// Weights are nonnegative, so `D_w − W` is diagonally dominant and therefore
/// positive semidefinite whenever construction succeeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialGraph {
    n_regions: usize,
    neighbors: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
    row_sums: Vec<f64>,
}

impl SpatialGraph {
    /// Builds a graph from undirected edges `(i, j, w)`; each pair may appear
    /// once, in either orientation.
    pub fn from_edges(n_regions: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
        for &(i, j, w) in edges {
            check_edge(n_regions, i, j, w).map_err(Error::InvalidArgument)?;
            let key = (i.min(j), i.max(j));
            if seen.insert(key, w).is_some() {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
        }
        Self::from_pairs(n_regions, seen)
    }

    fn from_pairs(n_regions: usize, pairs: HashMap<(usize, usize), f64>) -> Result<Self> {
        let mut sorted: Vec<_> = pairs.into_iter().collect();
        sorted.sort_by_key(|(k, _)| *k);
        let mut neighbors = vec![Vec::new(); n_regions];
        let mut weights = vec![Vec::new(); n_regions];
        for ((i, j), w) in sorted {
            neighbors[i].push(j);
            weights[i].push(w);
            neighbors[j].push(i);
            weights[j].push(w);
        }
        for (nb, ws) in neighbors.iter_mut().zip(weights.iter_mut()) {
            let mut order: Vec<usize> = (0..nb.len()).collect();
            order.sort_by_key(|&k| nb[k]);
            *nb = order.iter().map(|&k| nb[k]).collect();
            *ws = order.iter().map(|&k| ws[k]).collect();
        }
        let row_sums: Vec<f64> = weights.iter().map(|w| w.iter().sum()).collect();

        let isolated: Vec<usize> = (0..n_regions).filter(|&i| row_sums[i] <= 0.0).collect();
        if !isolated.is_empty() {
            return Err(Error::validation(format!(
                "regions without neighbors: {isolated:?}"
            )));
        }
        Ok(Self {
            n_regions,
            neighbors,
            weights,
            row_sums,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn weights(&self, i: usize) -> &[f64] {
        &self.weights[i]
    }

    /// `Σ_{j∼i} w_ij`.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row_sums[i]
    }

    pub fn average_row_sum(&self) -> f64 {
        self.row_sums.iter().sum::<f64>() / self.n_regions as f64
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Undirected edges with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.neighbors.iter().enumerate().flat_map(move |(i, nb)| {
            nb.iter()
                .zip(&self.weights[i])
                .filter(move |(&j, _)| i < j)
                .map(move |(&j, &w)| (i, j, w))
        })
    }

    /// `Σ_j w_ij v_j`.
    #[inline]
    pub fn weighted_neighbor_sum(&self, i: usize, v: &[f64]) -> f64 {
        self.neighbors[i]
            .iter()
            .zip(&self.weights[i])
            .map(|(&j, &w)| w * v[j])
            .sum()
    }

    /// `v'(D_w − W)v` through the pairwise form `Σ_{i<j} w_ij (v_i − v_j)²`.
    pub fn car_quadratic_form(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.n_regions {
            return Err(Error::invalid(format!(
                "vector has length {}, graph has {} regions",
                v.len(),
                self.n_regions
            )));
        }
        Ok(self
            .edges()
            .map(|(i, j, w)| {
                let d = v[i] - v[j];
                w * d * d
            })
            .sum())
    }

    /// Dense `D_w − W`; only the simulator and oracles need it.
    pub fn dense_precision(&self) -> DMatrix<f64> {
        let n = self.n_regions;
        let mut q = DMatrix::zeros(n, n);
        for i in 0..n {
            q[(i, i)] = self.row_sums[i];
            for (&j, &w) in self.neighbors[i].iter().zip(&self.weights[i]) {
                q[(i, j)] -= w;
            }
        }
        q
    }

    pub fn car_conditional(&self) -> CarConditional {
        CarConditional {
            cond_mean_weighting: self
                .weights
                .iter()
                .zip(&self.row_sums)
                .map(|(ws, s)| ws.iter().map(|w| w / s).collect())
                .collect(),
            row_sum: self.row_sums.clone(),
        }
    }

    /// Relabels regions so that old region `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_regions {
            return Err(Error::invalid(
                "permutation length differs from region count",
            ));
        }
        let edges: Vec<_> = self
            .edges()
            .map(|(i, j, w)| (perm[i], perm[j], w))
            .collect();
        Self::from_edges(self.n_regions, &edges)
    }
}

fn check_edge(n: usize, i: usize, j: usize, w: f64) -> std::result::Result<(), String> {
    if i >= n || j >= n {
        return Err(format!("edge ({i}, {j}) out of range for {n} regions"));
    }
    if i == j {
        return Err(format!("self-loop on region {i}"));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(format!("edge ({i}, {j}) has non-positive weight {w}"));
    }
    Ok(())
}

/// Per-region parameters of the intrinsic CAR full conditional
/// `v_i | v_{-i} ~ N(Σ_j w_ij v_j / w_i+, σ²_v / w_i+)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CarConditional {
    pub cond_mean_weighting: Vec<Vec<f64>>,
    pub row_sum: Vec<f64>,
}

impl CarConditional {
    pub fn mean_and_variance(
        &self,
        graph: &SpatialGraph,
        i: usize,
        v: &[f64],
        sigma2_v: f64,
    ) -> (f64, f64) {
        let mean = graph
            .neighbors(i)
            .iter()
            .zip(&self.cond_mean_weighting[i])
            .map(|(&j, &w)| w * v[j])
            .sum();
        (mean, sigma2_v / self.row_sum[i])
    }
}

/// Queen contiguity on a `rows × cols` lattice, regions numbered row-major.
pub fn build_queen_grid(rows: usize, cols: usize) -> Result<SpatialGraph> {
    if rows == 0 || cols == 0 || rows * cols < 2 {
        return Err(Error::invalid(format!(
            "grid {rows}x{cols} needs at least two cells"
        )));
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            // forward half-neighborhood so each pair is emitted once
            let forward = [(0i64, 1i64), (1, -1), (1, 0), (1, 1)];
            for (dr, dc) in forward {
                let (nr, nc) = (r as i64 + dr, c as i64 + dc);
                if nr < 0 || nc < 0 || nr >= rows as i64 || nc >= cols as i64 {
                    continue;
                }
                edges.push((i, nr as usize * cols + nc as usize, 1.0));
            }
        }
    }
    SpatialGraph::from_edges(rows * cols, &edges)
}

/// Parses `RxC` grid shorthand such as `7x7`.
pub fn parse_grid_spec(spec: &str) -> Result<(usize, usize)> {
    let lower = spec.to_ascii_lowercase();
    let (r, c) = lower
        .split_once('x')
        .ok_or_else(|| Error::invalid(format!("grid spec `{spec}` is not of the form RxC")))?;
    let parse = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::invalid(format!("grid spec `{spec}` is not of the form RxC")))
    };
    Ok((parse(r)?, parse(c)?))
}

/// Reads an edge list: one `i j [weight]` entry per line, 0-based, `#`
/// comments. Each undirected pair may be listed in one or both orientations;
/// the second orientation must repeat the weight.
///
/// When `n_regions` is `None` the region count is one past the largest index.
pub fn load_adjacency(path: impl AsRef<Path>, n_regions: Option<usize>) -> Result<SpatialGraph> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_adjacency(&text, n_regions, path)
}

pub fn parse_adjacency(
    text: &str,
    n_regions: Option<usize>,
    origin: &Path,
) -> Result<SpatialGraph> {
    let fmt_err = |line: usize, message: String| Error::Format {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut directed: HashMap<(usize, usize), (f64, usize)> = HashMap::new();
    let mut max_index = 0usize;
    let mut any = false;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(fmt_err(
                lineno,
                format!("expected `i j [weight]`, got `{content}`"),
            ));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| fmt_err(lineno, format!("bad region index `{}`", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| fmt_err(lineno, format!("bad region index `{}`", fields[1])))?;
        let w: f64 = match fields.get(2) {
            Some(s) => s
                .parse()
                .map_err(|_| fmt_err(lineno, format!("bad weight `{s}`")))?,
            None => 1.0,
        };
        if i == j {
            return Err(fmt_err(lineno, format!("self-loop on region {i}")));
        }
        if let Some(n) = n_regions {
            check_edge(n, i, j, w).map_err(|m| fmt_err(lineno, m))?;
        } else if !(w.is_finite() && w > 0.0) {
            return Err(fmt_err(lineno, format!("non-positive weight {w}")));
        }
        if directed.contains_key(&(i, j)) {
            return Err(fmt_err(lineno, format!("duplicate edge ({i}, {j})")));
        }
        if let Some(&(w_rev, line_rev)) = directed.get(&(j, i)) {
            if w_rev != w {
                return Err(fmt_err(
                    lineno,
                    format!(
                        "asymmetric weights for ({i}, {j}): {w} here, {w_rev} on line {line_rev}"
                    ),
                ));
            }
        }
        directed.insert((i, j), (w, lineno));
        max_index = max_index.max(i).max(j);
        any = true;
    }
    if !any {
        return Err(Error::validation(format!("{}: no edges", origin.display())));
    }
    let n = n_regions.unwrap_or(max_index + 1);
    let pairs: HashMap<(usize, usize), f64> = directed
        .into_iter()
        .map(|((i, j), (w, _))| ((i.min(j), i.max(j)), w))
        .collect();
    SpatialGraph::from_pairs(n, pairs)
}

/// Writes the graph as an edge list readable by [`load_adjacency`], one
/// `i j weight` line per undirected pair with `i < j`.
pub fn write_adjacency(graph: &SpatialGraph, path: impl AsRef<Path>) -> Result<()> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut text = format!("# {} regions\n", graph.n_regions());
    for (i, j, w) in graph.edges() {
        let _ = writeln!(text, "{i} {j} {w:?}");
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `σ_v / (0.7 · average row sum)`, the marginal standard deviation
/// attributable to the spatial effect.
pub fn marginal_spatial_sd(sigma_v: f64, graph: &SpatialGraph) -> Result<f64> {
    if !(sigma_v > 0.0 && sigma_v.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma_v must be positive, got {sigma_v}"
        )));
    }
    Ok(sigma_v / (0.7 * graph.average_row_sum()))
}
