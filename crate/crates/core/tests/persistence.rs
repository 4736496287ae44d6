use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vulnprop_core::*;

fn graphs() -> impl Iterator<Item = Graph> {
    (0..50u64).map(|seed| {
        let p = SynthParams {
            library_count: 5 + (seed as usize * 7) % 46,
            max_versions_per_library: 1 + seed as usize % 10,
            dependency_probability: 0.05 + (seed % 5) as f64 * 0.03,
            vulnerability_count: seed as usize % 7,
            fix_release_probability: 0.6,
            seed,
        };
        generate_ecosystem(&p).unwrap()
    })
}

fn save(g: &Graph) -> String {
    let mut buf = Vec::new();
    save_graph(g, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn synthetic_graphs_round_trip() {
    for g in graphs() {
        let text = save(&g);
        let back = load_graph(text.as_bytes()).unwrap();
        assert_eq!(back, g);
        assert_eq!(save(&back), text);
    }
}

#[test]
fn record_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for g in graphs() {
        let text = save(&g);
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut rng);
        let shuffled = lines.join("\n");
        assert_eq!(load_graph(shuffled.as_bytes()).unwrap(), g);
    }
}

#[test]
fn truncated_or_corrupt_input_is_an_error() {
    let g = graphs().nth(7).unwrap();
    let text = save(&g);
    assert!(load_graph("{\"kind\":\"nope\"}\n".as_bytes()).is_err());
    let dangling: String = text
        .lines()
        .filter(|l| !l.contains("\"kind\":\"version\""))
        .collect::<Vec<_>>()
        .join("\n");
    if text.contains("\"kind\":\"dep\"") {
        assert!(load_graph(dangling.as_bytes()).is_err());
    }
}
