//! Bounding volume hierarchy over triangle bounding boxes.
//!
//! The tree only stores boxes and primitive ids; callers supply the exact
//! primitive test through a visitor closure. Every query has a brute-force
//! counterpart on [`crate::mesh::TriMesh`] that tests all faces.

use crate::geometry::{Aabb, Point3, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node<T> {
    bounds: Aabb<T>,
    // Leaf: first index into `order`; interior: index of the left child
    // (the right child is `left + 1`).
    start: u32,
    count: u32,
}

#[derive(Debug, Clone)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<u32>,
}

impl<T: Real> Bvh<T> {
    /// Builds the tree by median splits along the longest centroid axis.
    pub fn build(boxes: &[Aabb<T>]) -> Self {
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let centroids: Vec<Point3<T>> = boxes.iter().map(Aabb::center).collect();
        // Boxes of axis-aligned triangles are flat; pad them so the slab
        // test stays robust at grazing parameters.
        let pad = boxes
            .iter()
            .fold(Aabb::empty(), |acc, b| acc.union(*b))
            .extent()
            .norm()
            .max(T::one())
            * T::lit(1e-9);
        let padded: Vec<Aabb<T>> = boxes.iter().map(|b| b.padded(pad)).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            Self::build_node(&mut nodes, 0, &mut order, 0, &padded, &centroids);
        }
        Self { nodes, order }
    }

    fn build_node(
        nodes: &mut Vec<Node<T>>,
        node: usize,
        order: &mut [u32],
        offset: usize,
        boxes: &[Aabb<T>],
        centroids: &[Point3<T>],
    ) {
        let bounds = order
            .iter()
            .fold(Aabb::empty(), |acc, &i| acc.union(boxes[i as usize]));
        if order.len() <= LEAF_SIZE {
            nodes[node] = Node {
                bounds,
                start: offset as u32,
                count: order.len() as u32,
            };
            return;
        }
        let cbounds = Aabb::from_points(order.iter().map(|&i| centroids[i as usize]));
        let axis = cbounds.longest_axis();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            let (ca, cb) = (centroids[a as usize][axis], centroids[b as usize][axis]);
            ca.partial_cmp(&cb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let left = nodes.len();
        nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        });
        nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        });
        nodes[node] = Node {
            bounds,
            start: left as u32,
            count: 0,
        };
        let (lo, hi) = order.split_at_mut(mid);
        Self::build_node(nodes, left, lo, offset, boxes, centroids);
        Self::build_node(nodes, left + 1, hi, offset + mid, boxes, centroids);
    }

    /// Calls `visit` for every primitive whose box meets a node region
    /// accepted by `enter`. Stops early and returns `true` when `visit` does.
    fn traverse(
        &self,
        enter: impl Fn(&Aabb<T>) -> bool,
        mut visit: impl FnMut(usize) -> bool,
    ) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !enter(&node.bounds) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &prim in &self.order[s..s + node.count as usize] {
                    if visit(prim as usize) {
                        return true;
                    }
                }
            } else {
                stack.push(node.start as usize + 1);
                stack.push(node.start as usize);
            }
        }
        false
    }

    /// Visits candidates whose boxes intersect the segment `p → q`.
    pub fn visit_segment(
        &self,
        p: Point3<T>,
        q: Point3<T>,
        visit: impl FnMut(usize) -> bool,
    ) -> bool {
        let d: Vec3<T> = q - p;
        self.traverse(|b| b.intersects_segment(p, d), visit)
    }

    /// Visits candidates whose boxes lie within `radius` of `p`.
    pub fn visit_ball(&self, p: Point3<T>, radius: T, visit: impl FnMut(usize) -> bool) -> bool {
        let r2 = radius * radius;
        self.traverse(|b| b.distance_squared(p) <= r2, visit)
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_query_matches_scan() {
        let boxes: Vec<Aabb<f64>> = (0..50)
            .map(|i| {
                let c = Vec3::new(i as f64, (i % 7) as f64, (i % 3) as f64);
                Aabb::new(c, c + Vec3::new(0.5, 0.5, 0.5))
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        assert_eq!(bvh.len(), 50);
        let p = Vec3::new(10.0, 2.0, 1.0);
        let mut hits = Vec::new();
        bvh.visit_ball(p, 3.0, |i| {
            hits.push(i);
            false
        });
        let mut expected: Vec<usize> = (0..50)
            .filter(|&i| boxes[i].distance_squared(p) <= 9.0)
            .collect();
        hits.sort();
        expected.sort();
        // the tree may report extra candidates from padding, never fewer
        assert!(expected.iter().all(|e| hits.contains(e)));
    }

    #[test]
    fn empty_tree_visits_nothing() {
        let bvh: Bvh<f64> = Bvh::build(&[]);
        assert!(!bvh.visit_segment(Vec3::zero(), Vec3::new(1., 1., 1.), |_| true));
    }
}
