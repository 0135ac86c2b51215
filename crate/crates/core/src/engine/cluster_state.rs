//! Size-tracked disjoint-set forest over dense address ids.
//!
//! Union by size with path compression on the mutating path. The observable
//! representative of a component is always its minimum dense index: the
//! structural root carries a `min_label`, re-rooted on union, so balancing
//! never leaks into the public view.

use crate::model::AddressId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterState {
    parent: Vec<u32>,
    size: Vec<u32>,
    min_label: Vec<u32>,
    clusters_ge2: u64,
}

impl ClusterState {
    pub fn new() -> Self {
        ClusterState {
            parent: Vec::new(),
            size: Vec::new(),
            min_label: Vec::new(),
            clusters_ge2: 0,
        }
    }

    pub(crate) fn from_parts(
        parent: Vec<u32>,
        size: Vec<u32>,
        min_label: Vec<u32>,
        clusters_ge2: u64,
    ) -> Self {
        ClusterState {
            parent,
            size,
            min_label,
            clusters_ge2,
        }
    }

    pub(crate) fn parts(&self) -> (&[u32], &[u32], &[u32], u64) {
        (&self.parent, &self.size, &self.min_label, self.clusters_ge2)
    }

    /// Number of addresses tracked.
    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Number of clusters with at least two addresses.
    pub fn clusters_ge2(&self) -> u64 {
        self.clusters_ge2
    }

    /// Total number of clusters (singletons included).
    pub fn cluster_count(&self) -> u64 {
        self.root_iter().count() as u64
    }

    pub(crate) fn add_singleton(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        self.size.push(1);
        self.min_label.push(id);
        id
    }

    /// Structural root, read-only (no compression). Depth is logarithmic
    /// under union by size.
    pub(crate) fn find_root(&self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            a = self.parent[a as usize];
        }
        a
    }

    /// Structural root with path halving; mutating fast path.
    pub(crate) fn find_root_mut(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    /// Representative (minimum dense index) of the component containing `a`.
    pub fn find(&self, a: AddressId) -> Option<AddressId> {
        if a.index() >= self.parent.len() {
            return None;
        }
        Some(AddressId(self.min_label[self.find_root(a.0) as usize]))
    }

    /// Component size keyed by structural root.
    pub(crate) fn size_of_root(&self, root: u32) -> u64 {
        u64::from(self.size[root as usize])
    }

    /// Representative label keyed by structural root.
    pub(crate) fn min_label_of_root(&self, root: u32) -> u32 {
        self.min_label[root as usize]
    }

    /// Size of the component whose representative is `rep`. `None` when `rep`
    /// is not a representative (or unknown).
    pub fn cluster_size(&self, rep: AddressId) -> Option<u64> {
        if rep.index() >= self.parent.len() {
            return None;
        }
        let root = self.find_root(rep.0);
        if self.min_label[root as usize] != rep.0 {
            return None;
        }
        Some(u64::from(self.size[root as usize]))
    }

    /// Unite the components of the given structural roots. Roots must be
    /// distinct. Returns the new structural root.
    ///
    /// The caller is responsible for merge-event bookkeeping; this updates
    /// sizes, labels and the >= 2 cluster count.
    pub(crate) fn union_roots(&mut self, roots: &[u32]) -> u32 {
        debug_assert!(roots.len() >= 2);
        let big_before = roots
            .iter()
            .filter(|&&r| self.size[r as usize] >= 2)
            .count() as u64;
        let mut iter = roots.iter().copied();
        let mut acc = iter.next().expect("at least two roots");
        for r in iter {
            debug_assert_ne!(acc, r);
            let (mut big, mut small) = (acc, r);
            if self.size[big as usize] < self.size[small as usize] {
                std::mem::swap(&mut big, &mut small);
            }
            self.parent[small as usize] = big;
            self.size[big as usize] += self.size[small as usize];
            if self.min_label[small as usize] < self.min_label[big as usize] {
                self.min_label[big as usize] = self.min_label[small as usize];
            }
            acc = big;
        }
        // Merging k components removes big_before of the >= 2 kind and makes
        // exactly one, which is always >= 2.
        self.clusters_ge2 = self.clusters_ge2 + 1 - big_before;
        acc
    }

    /// Iterator over structural roots.
    pub(crate) fn root_iter(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.parent.len() as u32).filter(move |&i| self.parent[i as usize] == i)
    }

    /// `(representative, size)` for every cluster, ascending by
    /// representative.
    pub fn clusters(&self) -> Vec<(AddressId, u64)> {
        let mut out: Vec<(AddressId, u64)> = self
            .root_iter()
            .map(|r| {
                (
                    AddressId(self.min_label[r as usize]),
                    u64::from(self.size[r as usize]),
                )
            })
            .collect();
        out.sort_unstable();
        out
    }
}

impl Default for ClusterState {
    fn default() -> Self {
        Self::new()
    }
}
