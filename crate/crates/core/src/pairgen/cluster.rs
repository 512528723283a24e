use std::collections::BTreeMap;

use super::{ClusterIndex, LabeledPair, SubstituteCluster};

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn component_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Connected components of the positive-pair graph, singletons omitted.
/// Members are sorted and clusters are numbered by their smallest member.
pub fn build_clusters(positives: &[LabeledPair]) -> Vec<SubstituteCluster> {
    let mut ids: BTreeMap<&str, usize> = BTreeMap::new();
    for p in positives {
        for id in [p.a.as_str(), p.b.as_str()] {
            let next = ids.len();
            ids.entry(id).or_insert(next);
        }
    }
    let mut uf = UnionFind::new(ids.len());
    for p in positives {
        uf.union(ids[p.a.as_str()], ids[p.b.as_str()]);
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    // BTreeMap iteration is sorted, so members land in ascending order.
    for (id, &idx) in &ids {
        let root = uf.find(idx);
        groups.entry(root).or_default().push(id.to_string());
    }
    let mut clusters: Vec<Vec<String>> = groups.into_values().filter(|m| m.len() >= 2).collect();
    clusters.sort();
    clusters
        .into_iter()
        .enumerate()
        .map(|(cluster_id, members)| SubstituteCluster { cluster_id, members })
        .collect()
}

pub fn cluster_index(clusters: &[SubstituteCluster]) -> ClusterIndex {
    clusters
        .iter()
        .flat_map(|c| {
            c.members
                .iter()
                .map(move |m| (m.clone(), (c.cluster_id, c.members.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairgen::{Label, Origin};

    fn pos(a: &str, b: &str) -> LabeledPair {
        LabeledPair::new(a, b, Label::Positive, Origin::Observed).unwrap()
    }

    #[test]
    fn chain_forms_one_cluster() {
        let c = build_clusters(&[pos("A", "B"), pos("B", "C")]);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].members, vec!["A", "B", "C"]);
    }

    #[test]
    fn disjoint_edges_form_two_clusters() {
        let c = build_clusters(&[pos("C", "D"), pos("A", "B")]);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].members, vec!["A", "B"]);
        assert_eq!(c[1].cluster_id, 1);
        let idx = cluster_index(&c);
        assert_eq!(idx["D"], (1, 2));
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1));
        assert!(!uf.union(1, 0));
        uf.union(2, 3);
        assert_ne!(uf.find(0), uf.find(3));
        uf.union(1, 3);
        assert_eq!(uf.component_size(2), 4);
    }
}
