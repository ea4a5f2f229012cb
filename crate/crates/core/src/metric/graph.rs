use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A weighted graph with nonnegative edge weights.
pub trait Graph: Sync {
    fn node_count(&self) -> usize;

    /// Calls `visit(neighbor, weight)` for every edge leaving `node`.
    fn for_each_edge(&self, node: usize, visit: &mut dyn FnMut(usize, f64));
}

#[derive(Copy, Clone, PartialEq)]
struct State {
    dist: f64,
    node: usize,
}

impl Eq for State {}

// Reversed for a min-heap; ties broken on the node id to keep runs reproducible.
impl Ord for State {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for State {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn seed(dist: &mut [f64], heap: &mut BinaryHeap<State>, sources: &[(usize, f64)]) {
    for &(node, d) in sources {
        if d < dist[node] {
            dist[node] = d;
            heap.push(State { dist: d, node });
        }
    }
}

/// Distances from a weighted source set; nodes farther than `limit` may be
/// left at `f64::INFINITY`.
pub fn dijkstra<G: Graph + ?Sized>(graph: &G, sources: &[(usize, f64)], limit: f64) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    let mut heap = BinaryHeap::new();
    seed(&mut dist, &mut heap, sources);
    while let Some(State { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        if d > limit {
            break;
        }
        graph.for_each_edge(node, &mut |next, w| {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(State { dist: nd, node: next });
            }
        });
    }
    dist
}

/// Shortest distance from a weighted source set to a weighted target set,
/// stopping as soon as no shorter connection is possible.
pub fn dijkstra_to<G: Graph + ?Sized>(graph: &G, sources: &[(usize, f64)], targets: &[(usize, f64)]) -> f64 {
    let mut dist = vec![f64::INFINITY; graph.node_count()];
    let mut heap = BinaryHeap::new();
    seed(&mut dist, &mut heap, sources);
    let mut extra = vec![f64::INFINITY; graph.node_count()];
    for &(t, e) in targets {
        extra[t] = extra[t].min(e);
    }
    let mut best = f64::INFINITY;
    while let Some(State { dist: d, node }) = heap.pop() {
        if d > dist[node] {
            continue;
        }
        if d >= best {
            break;
        }
        best = best.min(d + extra[node]);
        graph.for_each_edge(node, &mut |next, w| {
            let nd = d + w;
            if nd < dist[next] {
                dist[next] = nd;
                heap.push(State { dist: nd, node: next });
            }
        });
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Path(Vec<Vec<(usize, f64)>>);

    impl Graph for Path {
        fn node_count(&self) -> usize {
            self.0.len()
        }
        fn for_each_edge(&self, node: usize, visit: &mut dyn FnMut(usize, f64)) {
            for &(n, w) in &self.0[node] {
                visit(n, w);
            }
        }
    }

    #[test]
    fn small_graph() {
        // 0 -1- 1 -1- 2, plus a heavy shortcut 0 -5- 2 and an isolated node 3.
        let g = Path(vec![vec![(1, 1.0), (2, 5.0)], vec![(0, 1.0), (2, 1.0)], vec![(1, 1.0), (0, 5.0)], vec![]]);
        let d = dijkstra(&g, &[(0, 0.0)], f64::INFINITY);
        assert_eq!(d[..3], [0.0, 1.0, 2.0]);
        assert!(d[3].is_infinite());
        assert_eq!(dijkstra_to(&g, &[(0, 0.5)], &[(2, 0.25)]), 2.75);
        assert!(dijkstra_to(&g, &[(0, 0.0)], &[(3, 0.0)]).is_infinite());
    }
}
