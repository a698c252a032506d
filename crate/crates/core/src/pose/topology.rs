use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use crate::{Error, Result};

const DEFAULT_NAMES: [&str; 19] = [
    "nose",
    "neck",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "mid_hip",
    "right_hip",
    "right_knee",
    "right_ankle",
    "left_hip",
    "left_knee",
    "left_ankle",
    "right_eye",
    "left_eye",
    "right_ear",
    "left_ear",
];

// Rooted at mid_hip (8).
const DEFAULT_EDGES: [(usize, usize); 18] = [
    (8, 1),
    (1, 0),
    (1, 2),
    (2, 3),
    (3, 4),
    (1, 5),
    (5, 6),
    (6, 7),
    (8, 9),
    (9, 10),
    (10, 11),
    (8, 12),
    (12, 13),
    (13, 14),
    (0, 15),
    (15, 17),
    (0, 16),
    (16, 18),
];

/// Joint layout and limb connectivity (parent, child) of a skeleton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkeletonTopology {
    joint_count: usize,
    edges: Vec<(usize, usize)>,
    joint_names: Vec<String>,
}

impl SkeletonTopology {
    pub fn new(joint_count: usize, edges: Vec<(usize, usize)>, joint_names: Vec<String>) -> Result<Self> {
        if joint_count == 0 {
            return Err(Error::Topology("joint_count must be positive".into()));
        }
        if joint_names.len() != joint_count {
            return Err(Error::Topology(format!(
                "{} names for {joint_count} joints",
                joint_names.len()
            )));
        }
        let unique: HashSet<&String> = joint_names.iter().collect();
        if unique.len() != joint_names.len() {
            return Err(Error::Topology("joint names are not unique".into()));
        }
        // union-find: an edge joining two nodes already connected closes a cycle
        let mut parent: Vec<usize> = (0..joint_count).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut has_parent = vec![false; joint_count];
        for &(p, c) in &edges {
            if p >= joint_count || c >= joint_count {
                return Err(Error::Topology(format!("edge {p}:{c} out of range")));
            }
            if has_parent[c] {
                return Err(Error::Topology(format!("joint {c} has two parents")));
            }
            has_parent[c] = true;
            let (rp, rc) = (find(&mut parent, p), find(&mut parent, c));
            if rp == rc {
                return Err(Error::Topology(format!("edge {p}:{c} closes a cycle")));
            }
            parent[rc] = rp;
        }
        Ok(Self {
            joint_count,
            edges,
            joint_names,
        })
    }

    /// Topology with generated names (`joint_0`, `joint_1`, ...).
    pub fn unnamed(joint_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let names = (0..joint_count).map(|i| format!("joint_{i}")).collect();
        Self::new(joint_count, edges, names)
    }

    /// The 19-joint body layout: body-25 ordering without the six foot points,
    /// rooted at the mid hip.
    pub fn body19() -> Arc<Self> {
        static BODY19: OnceLock<Arc<SkeletonTopology>> = OnceLock::new();
        BODY19
            .get_or_init(|| {
                Arc::new(
                    Self::new(
                        DEFAULT_NAMES.len(),
                        DEFAULT_EDGES.to_vec(),
                        DEFAULT_NAMES.iter().map(|s| s.to_string()).collect(),
                    )
                    .expect("built-in topology is valid"),
                )
            })
            .clone()
    }

    /// Resolves a joint count and edge list read from a file, reusing the
    /// built-in layout (and its names) when it matches.
    pub fn from_edges(joint_count: usize, edges: Vec<(usize, usize)>) -> Result<Arc<Self>> {
        let body = Self::body19();
        if joint_count == body.joint_count && edges == body.edges {
            return Ok(body);
        }
        Ok(Arc::new(Self::unnamed(joint_count, edges)?))
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn joint_names(&self) -> &[String] {
        &self.joint_names
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joint_names.iter().position(|n| n == name)
    }

    /// Parent of each joint, `None` for roots.
    pub fn parents(&self) -> Vec<Option<usize>> {
        let mut parents = vec![None; self.joint_count];
        for &(p, c) in &self.edges {
            parents[c] = Some(p);
        }
        parents
    }

    /// Joints ordered so every parent precedes its children.
    pub fn topological_order(&self) -> Vec<usize> {
        let parents = self.parents();
        let mut children = vec![Vec::new(); self.joint_count];
        for &(p, c) in &self.edges {
            children[p].push(c);
        }
        let mut order: Vec<usize> = (0..self.joint_count).filter(|&j| parents[j].is_none()).collect();
        let mut i = 0;
        while i < order.len() {
            let j = order[i];
            order.extend(children[j].iter().copied());
            i += 1;
        }
        order
    }
}
