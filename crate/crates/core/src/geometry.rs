//! Legal-feasibility neighbourhood graph over actors.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{Instance, Location};

/// Mean Earth radius (IUGG), km.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Great-circle distance in km (haversine).
pub fn distance_km(a: Location, b: Location) -> Result<f64> {
    for loc in [a, b] {
        if !loc.is_valid() {
            return Err(Error::Input(format!(
                "coordinates ({}, {}) out of range",
                loc.lat, loc.lon
            )));
        }
    }
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin())
}

/// Undirected graph where an edge joins two actors that may legally share a
/// loop: strictly closer than the legal distance, and with a combined
/// installed power within the legal cap.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighbourhoodGraph {
    n: usize,
    adjacency: Vec<bool>,
    neighbours: Vec<Vec<usize>>,
}

impl NeighbourhoodGraph {
    /// Graph on `n` nodes from an edge list; self-loops are ignored.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut adjacency = vec![false; n * n];
        for (i, j) in edges {
            if i != j {
                adjacency[i * n + j] = true;
                adjacency[j * n + i] = true;
            }
        }
        let neighbours = (0..n)
            .map(|i| (0..n).filter(|&j| adjacency[i * n + j]).collect())
            .collect();
        NeighbourhoodGraph {
            n,
            adjacency,
            neighbours,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn neighbours(&self, i: usize) -> &[usize] {
        &self.neighbours[i]
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for &j in &self.neighbours[i] {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.neighbours.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edge set as a sorted set, convenient for comparisons.
    pub fn edge_set(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().collect()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for start in 0..self.n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &v in &self.neighbours[u] {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_clique(&self, members: &[usize]) -> bool {
        members
            .iter()
            .enumerate()
            .all(|(a, &i)| members[a + 1..].iter().all(|&j| i != j && self.has_edge(i, j)))
    }

    /// Graphviz rendering, labelled with actor ids when given.
    pub fn to_dot(&self, labels: Option<&[String]>) -> String {
        let mut out = String::from("graph neighbourhood {\n");
        for i in 0..self.n {
            let label = labels.map_or_else(|| i.to_string(), |l| l[i].clone());
            let _ = writeln!(out, "  {i} [label=\"{label}\"];");
        }
        for (i, j) in self.edges() {
            let _ = writeln!(out, "  {i} -- {j};");
        }
        out.push_str("}\n");
        out
    }

    /// Plain `i j` edge list, one edge per line.
    pub fn to_edge_list(&self) -> String {
        self.edges().into_iter().map(|(i, j)| format!("{i} {j}\n")).collect()
    }
}

/// Builds the neighbourhood graph of an instance. Pairs at exactly the legal
/// distance are not adjacent.
pub fn build_neighbourhood_graph(instance: &Instance) -> Result<NeighbourhoodGraph> {
    let actors = instance.actors();
    let legal = instance.legal();
    let n = actors.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = distance_km(actors[i].location, actors[j].location)?;
            let power = actors[i].installed_power_kwc + actors[j].installed_power_kwc;
            if d < legal.max_distance_km && power <= legal.max_installed_power_kwc {
                edges.push((i, j));
            }
        }
    }
    Ok(NeighbourhoodGraph::from_edges(n, edges))
}
