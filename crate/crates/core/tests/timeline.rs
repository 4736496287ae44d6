mod common;

use common::*;
use vulnprop_core::matcher::list_matches;
use vulnprop_core::propagation::all_shortest_distances;
use vulnprop_core::synth::{oracle_fixable, oracle_shortest};
use vulnprop_core::upgrade::FixReason;
use vulnprop_core::*;

fn chain_labels(g: &Graph, chains: &[DependencyChain]) -> Vec<String> {
    let mut out: Vec<String> = chains
        .iter()
        .map(|c| c.nodes.iter().map(|&n| label(g, n)).collect::<Vec<_>>().join(">"))
        .collect();
    out.sort();
    out
}

#[test]
fn graph_shape() {
    let g = timeline();
    assert_eq!(g.node_count(), 7);
    assert_eq!(g.edge_count(), 5);
    let c1 = node(&g, "libraryc", "version1");
    let deps: Vec<String> = g.deps(c1).iter().map(|d| label(&g, d.target)).collect();
    assert_eq!(deps, ["B1"]);
    assert!(g.deps(c1).iter().all(|d| d.provenance == Provenance::Lockfile));
}

#[test]
fn only_a1_is_matched() {
    let g = timeline();
    let matches = list_matches(&g);
    assert_eq!(matches.len(), 1);
    assert_eq!(matches[0].library, id("librarya"));
    assert_eq!(matches[0].version, v("version1"));
    assert_eq!(g.vuln("CVE-2019-0001").unwrap().severity, Severity::High);
}

#[test]
fn shortest_distances() {
    let g = timeline();
    assert_eq!(
        shortest_vuln_distance(&g, &key("libraryc", "version1")).unwrap(),
        Some(2)
    );
    assert_eq!(
        shortest_vuln_distance(&g, &key("librarya", "version1")).unwrap(),
        Some(0)
    );
    assert_eq!(shortest_vuln_distance(&g, &key("libraryc", "version3")).unwrap(), None);
    for (lib, level) in [("librarya", 0), ("libraryb", 1), ("libraryc", 2)] {
        assert_eq!(library_shortest_level(&g, &id(lib)), Some(level), "{lib}");
    }
    let bulk = all_shortest_distances(&g);
    for (n, _) in g.nodes() {
        assert_eq!(bulk[n.index()], oracle_shortest(&g, n).unwrap());
    }
}

#[test]
fn histograms() {
    let g = timeline();
    for mode in [HistogramMode::ShortestPerLibrary, HistogramMode::AllLevels] {
        let report = propagation_histogram(&g, mode, Stratify::None);
        let rows: Vec<(u32, usize)> = report.rows.iter().map(|r| (r.level, r.count)).collect();
        assert_eq!(rows, [(0, 1), (1, 1), (2, 1)], "{mode:?}");
        assert_eq!(report.affected_libraries, 3);
    }
    let by_severity = propagation_histogram(&g, HistogramMode::ShortestPerLibrary, Stratify::Severity);
    assert!(by_severity.rows.iter().all(|r| r.stratum == "HIGH"));
}

#[test]
fn stats() {
    let s = ecosystem_stats(&timeline());
    assert_eq!(s.total_libraries, 3);
    assert_eq!(s.total_vulnerabilities, 1);
    assert_eq!(s.connected_count, 3);
    assert!((s.connected_affected_fraction - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.latest_affected_fraction, 0.0);
    assert_eq!(s.max_chain_level, Some(2));
}

#[test]
fn vulnerable_chains() {
    let g = timeline();
    let all = enumerate_vulnerable_chains(&g, Scope::AllVersions);
    assert_eq!(chain_labels(&g, &all.vulnerable), ["B1>A1", "C1>B1>A1", "C2>B1>A1"]);
    assert!(all.excluded.is_empty());
    assert!(enumerate_vulnerable_chains(&g, Scope::LatestOnly).total() == 0);
}

#[test]
fn fixability_verdicts() {
    let g = timeline();
    let chains = enumerate_vulnerable_chains(&g, Scope::AllVersions).vulnerable;
    let by_label = |l: &str| {
        chains
            .iter()
            .find(|c| chain_labels(&g, std::slice::from_ref(c))[0] == l)
            .unwrap()
    };

    for mode in [FixMode::StrictVersion, FixMode::VulnAware] {
        let abc2 = chain_fixable_by_upgrade(&g, by_label("C2>B1>A1"), mode).unwrap();
        assert!(abc2.fixable);
        assert_eq!(abc2.candidate, Some(key("libraryb", "version2")));

        let abc1 = chain_fixable_by_upgrade(&g, by_label("C1>B1>A1"), mode).unwrap();
        assert!(!abc1.fixable);
        assert_eq!(abc1.reason, FixReason::NoCandidateBeforeRelease);

        let ab1 = chain_fixable_by_upgrade(&g, by_label("B1>A1"), mode).unwrap();
        assert!(!ab1.fixable);
        assert_eq!(ab1.reason, FixReason::NoCandidateBeforeRelease);

        for c in &chains {
            assert_eq!(
                chain_fixable_by_upgrade(&g, c, mode).unwrap().fixable,
                oracle_fixable(&g, c, mode).unwrap()
            );
        }
    }
}

#[test]
fn level_report() {
    let g = timeline();
    let report = fixability_report(&g, Grouping::Level, Scope::AllVersions, FixMode::StrictVersion);
    let rows: Vec<(String, usize, usize)> = report
        .rows
        .iter()
        .map(|r| (r.group.clone(), r.fixed, r.not_fixed))
        .collect();
    assert_eq!(rows, [("1".to_string(), 0, 1), ("2".to_string(), 1, 1)]);
    assert_eq!((report.fixed, report.not_fixed, report.excluded_chain_count), (1, 2, 0));

    let severity = fixability_report(&g, Grouping::Severity, Scope::AllVersions, FixMode::StrictVersion);
    let high = severity.rows.iter().find(|r| r.group == "HIGH").unwrap();
    assert_eq!((high.fixed, high.not_fixed), (1, 2));
    assert_eq!(severity.rows.len(), 4);

    let latest = fixability_report(&g, Grouping::Level, Scope::LatestOnly, FixMode::StrictVersion);
    assert_eq!(latest.total_chains, 0);

    let q = per_vuln_fix_rate_quartiles(&g, Scope::AllVersions, FixMode::StrictVersion).unwrap();
    assert!((q.median - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn persisted_fixture_round_trips() {
    let g = timeline();
    let mut buf = Vec::new();
    save_graph(&g, &mut buf).unwrap();
    assert_eq!(load_graph(buf.as_slice()).unwrap(), g);
}
