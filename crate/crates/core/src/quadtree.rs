//! Point quadtree used for fixed-radius neighbour search.

use crate::Point;

pub const BUCKET_CAPACITY: usize = 16;
pub const MAX_DEPTH: usize = 12;

#[derive(Debug)]
struct Node {
    min: Point,
    max: Point,
    items: Vec<usize>,
    children: Option<[usize; 4]>,
}

impl Node {
    fn leaf(min: Point, max: Point) -> Self {
        Node {
            min,
            max,
            items: Vec::new(),
            children: None,
        }
    }

    /// Squared distance from `p` to the node's box.
    fn box_dist2(&self, p: &Point) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        dx * dx + dy * dy
    }
}

/// Quadtree over a borrowed point slice; items are indices into it.
#[derive(Debug)]
pub struct QuadTree<'a> {
    points: &'a [Point],
    nodes: Vec<Node>,
}

impl<'a> QuadTree<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        if points.is_empty() {
            min = Point::new(0.0, 0.0);
            max = min;
        }
        let mut tree = QuadTree {
            points,
            nodes: vec![Node::leaf(min, max)],
        };
        for i in 0..points.len() {
            tree.insert(i);
        }
        tree
    }

    fn insert(&mut self, item: usize) {
        let p = self.points[item];
        let mut node = 0;
        let mut depth = 0;
        loop {
            match self.nodes[node].children {
                Some(children) => {
                    node = children[self.quadrant(node, &p)];
                    depth += 1;
                }
                None => {
                    self.nodes[node].items.push(item);
                    if self.nodes[node].items.len() > BUCKET_CAPACITY && depth < MAX_DEPTH {
                        self.split(node);
                    }
                    return;
                }
            }
        }
    }

    fn quadrant(&self, node: usize, p: &Point) -> usize {
        let n = &self.nodes[node];
        let cx = 0.5 * (n.min.x + n.max.x);
        let cy = 0.5 * (n.min.y + n.max.y);
        (p.x > cx) as usize + 2 * (p.y > cy) as usize
    }

    fn split(&mut self, node: usize) {
        let (min, max) = (self.nodes[node].min, self.nodes[node].max);
        let c = Point::new(0.5 * (min.x + max.x), 0.5 * (min.y + max.y));
        let boxes = [
            (min, c),
            (Point::new(c.x, min.y), Point::new(max.x, c.y)),
            (Point::new(min.x, c.y), Point::new(c.x, max.y)),
            (c, max),
        ];
        let first = self.nodes.len();
        for (lo, hi) in boxes {
            self.nodes.push(Node::leaf(lo, hi));
        }
        let items = std::mem::take(&mut self.nodes[node].items);
        for item in items {
            let q = self.quadrant(node, &self.points[item]);
            self.nodes[first + q].items.push(item);
        }
        self.nodes[node].children = Some([first, first + 1, first + 2, first + 3]);
    }

    /// Indices of all points within `radius` of `p` (inclusive), ascending.
    pub fn within(&self, p: &Point, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.box_dist2(p) > r2 {
                continue;
            }
            match node.children {
                Some(children) => stack.extend(children),
                None => out.extend(
                    node.items
                        .iter()
                        .copied()
                        .filter(|&i| self.points[i].dist2(p) <= r2),
                ),
            }
        }
        out.sort_unstable();
        out
    }
}

/// All unordered pairs `(i, j)`, `i < j`, with `|p_i - p_j| <= cutoff`,
/// sorted lexicographically.
pub fn neighbor_pairs(points: &[Point], cutoff: f64) -> Vec<(usize, usize)> {
    if points.is_empty() || cutoff.is_nan() || cutoff <= 0.0 {
        return Vec::new();
    }
    let tree = QuadTree::new(points);
    let mut pairs = Vec::new();
    for (i, p) in points.iter().enumerate() {
        pairs.extend(
            tree.within(p, cutoff)
                .into_iter()
                .filter(|&j| j > i)
                .map(|j| (i, j)),
        );
    }
    pairs
}
