//! Follower graph of the investor community and influencer scores.
//!
//! The influencer score of a user is their in-degree inside the community
//! graph: how many community members follow them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ingest::{csv_reader, write_atomic, FollowEdge};

/// Strict threshold on in-community followers for top influencers.
pub const DEFAULT_INFLUENCER_THRESHOLD: u64 = 100;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommunityGraph {
    nodes: BTreeSet<String>,
    /// follower → followee
    edges: BTreeSet<(String, String)>,
}

impl CommunityGraph {
    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.edges.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// Builds the community graph, deduplicating repeated edges.
pub fn build_graph(edges: &[FollowEdge]) -> Result<CommunityGraph> {
    let mut graph = CommunityGraph::default();
    for e in edges {
        if e.follower == e.followee {
            return Err(Error::InvalidInput(format!("self-loop edge on `{}`", e.follower)));
        }
        graph.nodes.insert(e.follower.clone());
        graph.nodes.insert(e.followee.clone());
        graph.edges.insert((e.follower.clone(), e.followee.clone()));
    }
    Ok(graph)
}

/// In-community follower count for every node (zero for nodes nobody follows).
pub fn influencer_scores(graph: &CommunityGraph) -> BTreeMap<String, u64> {
    let mut scores: BTreeMap<String, u64> = graph.nodes.iter().map(|n| (n.clone(), 0)).collect();
    for (_, followee) in &graph.edges {
        *scores.get_mut(followee).expect("edge endpoint is a node") += 1;
    }
    scores
}

/// Users with strictly more than `threshold` followers.
pub fn top_influencers(scores: &BTreeMap<String, u64>, threshold: u64) -> BTreeSet<String> {
    scores
        .iter()
        .filter(|(_, &s)| s > threshold)
        .map(|(u, _)| u.clone())
        .collect()
}

pub fn write_scores(path: impl AsRef<Path>, scores: &BTreeMap<String, u64>) -> Result<()> {
    let mut body = String::from("user_id,score\n");
    for (user, score) in scores {
        body.push_str(&format!("{user},{score}\n"));
    }
    write_atomic(path.as_ref(), body.as_bytes())
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<BTreeMap<String, u64>> {
    let path = path.as_ref();
    let mut reader = csv_reader(path)?;
    let mut scores = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let user = record.get(0).unwrap_or("").to_string();
        let score = record
            .get(1)
            .unwrap_or("")
            .parse::<u64>()
            .map_err(|e| Error::parse(path, line, format!("bad score: {e}")))?;
        scores.insert(user, score);
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn edge(a: &str, b: &str) -> FollowEdge {
        FollowEdge {
            follower: a.into(),
            followee: b.into(),
        }
    }

    #[test]
    fn empty_graph() {
        let g = build_graph(&[]).unwrap();
        assert_eq!(g.node_count(), 0);
        assert!(influencer_scores(&g).is_empty());
    }

    #[test]
    fn duplicate_edges_collapse() {
        let g = build_graph(&[edge("a", "b"), edge("c", "b"), edge("a", "b")]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        let s = influencer_scores(&g);
        assert_eq!((s["a"], s["b"], s["c"]), (0, 2, 0));
    }

    #[test]
    fn self_loop_rejected() {
        assert!(build_graph(&[edge("a", "a")]).is_err());
    }

    #[test]
    fn star_hub_score() {
        let edges: Vec<_> = (0..100).map(|i| edge(&format!("s{i}"), "hub")).collect();
        let s = influencer_scores(&build_graph(&edges).unwrap());
        assert_eq!(s["hub"], 100);
        assert_eq!(s.len(), 101);
    }

    #[test]
    fn threshold_is_strict() {
        let scores: BTreeMap<String, u64> = [("a".to_string(), 100), ("b".to_string(), 101)].into();
        assert_eq!(top_influencers(&scores, 100), BTreeSet::from(["b".to_string()]));
        let zeros: BTreeMap<String, u64> = [("a".to_string(), 0)].into();
        assert!(top_influencers(&zeros, DEFAULT_INFLUENCER_THRESHOLD).is_empty());
    }

    #[test]
    fn scores_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("is.csv");
        let g = build_graph(&[edge("a", "b"), edge("c", "b")]).unwrap();
        let s = influencer_scores(&g);
        write_scores(&p, &s).unwrap();
        assert_eq!(read_scores(&p).unwrap(), s);
    }

    fn arb_edges() -> impl Strategy<Value = Vec<FollowEdge>> {
        (2usize..60).prop_flat_map(|n| {
            prop::collection::vec((0..n, 0..n), 0..300).prop_map(|pairs| {
                pairs
                    .into_iter()
                    .filter(|(a, b)| a != b)
                    .map(|(a, b)| edge(&format!("u{a}"), &format!("u{b}")))
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn in_degree_sum_is_edge_count(edges in arb_edges()) {
            let g = build_graph(&edges).unwrap();
            let total: u64 = influencer_scores(&g).values().sum();
            prop_assert_eq!(total as usize, g.edge_count());
        }

        #[test]
        fn threshold_monotone(edges in arb_edges(), t1 in 0u64..10, dt in 0u64..10) {
            let s = influencer_scores(&build_graph(&edges).unwrap());
            let loose = top_influencers(&s, t1);
            let strict = top_influencers(&s, t1 + dt);
            prop_assert!(strict.is_subset(&loose));
        }
    }
}
