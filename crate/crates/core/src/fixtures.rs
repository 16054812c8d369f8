//! Canonical fixture corpus used across tests, the acceptance suite, and the
//! shipped example files.

use crate::fault::{FaultModel, Region};
use crate::graph::{Graph, NodeId};

fn n(s: &str) -> NodeId {
    NodeId::from(s)
}

fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> Graph {
    Graph::new(
        nodes.iter().map(|s| n(s)),
        edges.iter().map(|(a, b)| (n(a), n(b))),
    )
    .expect("fixture graph is valid")
}

/// Complete bipartite graph on sides {a,b,c} and {d,e,f,g}.
pub fn k43() -> Graph {
    let mut edges = Vec::new();
    for x in ["a", "b", "c"] {
        for y in ["d", "e", "f", "g"] {
            edges.push((x, y));
        }
    }
    graph(&["a", "b", "c", "d", "e", "f", "g"], &edges)
}

/// One fault budget per partite side of `k43`.
pub fn k43_per_region() -> FaultModel {
    FaultModel::per_region(vec![
        Region::new(["a", "b", "c"].map(n), 1),
        Region::new(["d", "e", "f", "g"].map(n), 1),
    ])
}

/// Path a -- b -- c.
pub fn path3() -> Graph {
    graph(&["a", "b", "c"], &[("a", "b"), ("b", "c")])
}

/// Complete graph on four nodes.
pub fn k4() -> Graph {
    graph(
        &["a", "b", "c", "d"],
        &[
            ("a", "b"),
            ("a", "c"),
            ("a", "d"),
            ("b", "c"),
            ("b", "d"),
            ("c", "d"),
        ],
    )
}

/// Five-cycle.
pub fn cycle5() -> Graph {
    graph(
        &["a", "b", "c", "d", "e"],
        &[("a", "b"), ("b", "c"), ("c", "d"), ("d", "e"), ("e", "a")],
    )
}

/// Star with a hub and five leaves; the hub sorts first.
pub fn star6() -> Graph {
    graph(
        &["center", "l1", "l2", "l3", "l4", "l5"],
        &[
            ("center", "l1"),
            ("center", "l2"),
            ("center", "l3"),
            ("center", "l4"),
            ("center", "l5"),
        ],
    )
}

/// Eight-node, 3-connected graph where one well-placed node (`red`) sits on
/// a bottleneck toward `blue`; used for unknown-topology runs in which `red`
/// misreports its neighbor set.
pub fn unknown_graph8() -> Graph {
    graph(
        &[
            "blue", "bottom", "east", "green", "red", "sw", "top", "west",
        ],
        &[
            ("top", "green"),
            ("top", "red"),
            ("top", "west"),
            ("red", "blue"),
            ("green", "east"),
            ("red", "green"),
            ("west", "sw"),
            ("red", "east"),
            ("west", "blue"),
            ("sw", "blue"),
            ("bottom", "blue"),
            ("bottom", "sw"),
            ("bottom", "east"),
        ],
    )
}

/// Every graph in the corpus, for oracle-equivalence sweeps.
pub fn corpus_graphs() -> Vec<Graph> {
    vec![
        k43(),
        path3(),
        k4(),
        cycle5(),
        star6(),
        unknown_graph8(),
    ]
}

/// Pass-verdict fixtures for the checker: (label, graph, model).
pub fn pass_fixtures() -> Vec<(&'static str, Graph, FaultModel)> {
    let mut v = reliability_fixtures();
    v.push((
        "star6-trusted-center",
        star6(),
        FaultModel::threshold(5).with_trusted([n("center")]),
    ));
    v
}

/// Pass fixtures on which every point-to-point send must decode: models
/// where no permitted fault set contains a whole minimal cut, and where for
/// every honest pair some maximal fault set extends the true faults while
/// avoiding the origin (the star-with-trusted-center shape fails the latter
/// for leaf pairs and is exercised through the leader path instead).
pub fn reliability_fixtures() -> Vec<(&'static str, Graph, FaultModel)> {
    vec![
        ("k43-per-region", k43(), k43_per_region()),
        ("k43-threshold-1", k43(), FaultModel::threshold(1)),
        ("k4-threshold-1", k4(), FaultModel::threshold(1)),
        ("path3-no-faults", path3(), FaultModel::threshold(0)),
        (
            "unknown8-threshold-1",
            unknown_graph8(),
            FaultModel::threshold(1),
        ),
    ]
}

/// Violation-verdict fixtures: (label, graph, model).
pub fn violation_fixtures() -> Vec<(&'static str, Graph, FaultModel)> {
    vec![
        ("k43-threshold-2", k43(), FaultModel::threshold(2)),
        ("cycle5-threshold-1", cycle5(), FaultModel::threshold(1)),
    ]
}
