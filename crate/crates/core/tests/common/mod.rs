#![allow(dead_code)]

use vulnprop_core::ingest::{import_nvd_feed, parse_podfile_lock};
use vulnprop_core::{
    build_graph, match_vulnerabilities, BuildInput, Graph, LibraryId, ManifestSource, NodeId, Version, VersionRef,
};

pub const DAY: i64 = 86_400;
/// T1 of the timeline; Tk is `T0 + k days`.
pub const T0: i64 = 1_546_300_800;

pub fn id(s: &str) -> LibraryId {
    LibraryId::new(s).unwrap()
}

pub fn v(s: &str) -> Version {
    Version::parse(s).unwrap()
}

pub fn key(lib: &str, ver: &str) -> VersionRef {
    VersionRef::new(id(lib), v(ver))
}

pub fn t(k: i64) -> i64 {
    T0 + k * DAY
}

const C_V1_LOCK: &str = "PODS:
    - LibraryB (version1):
        - LibraryA
    - LibraryA (version1)
";

const C_V3_LOCK: &str = "PODS:
  - LibraryA (version2)
  - LibraryB (version2):
    - LibraryA
";

const B_V1_LOCK: &str = "PODS:\n  - LibraryA (version1)\n";
const B_V2_LOCK: &str = "PODS:\n  - LibraryA (version2)\n";

/// One CVE whose CPE names version 1 of library A.
pub const TIMELINE_FEED: &str = r#"{
  "CVE_data_type": "CVE",
  "CVE_Items": [{
    "cve": {
      "CVE_data_meta": {"ID": "CVE-2019-0001"},
      "description": {"description_data": [{"lang": "en", "value": "Out-of-bounds read in decode_chunk() in chunk.c."}]},
      "references": {"reference_data": [{"url": "https://github.com/example/librarya/commit/0123456789abcdef0123456789abcdef01234567", "tags": ["Patch"]}]}
    },
    "configurations": {"nodes": [{"operator": "OR", "cpe_match": [
      {"vulnerable": true, "cpe23Uri": "cpe:2.3:a:example:librarya:version1:*:*:*:*:*:*:*"}
    ]}]},
    "impact": {"baseMetricV3": {"cvssV3": {"baseScore": 7.5, "baseSeverity": "HIGH"}}},
    "publishedDate": "2019-01-04T00:00Z"
  }]
}"#;

fn lock(text: &str) -> ManifestSource {
    ManifestSource::Resolved(parse_podfile_lock(text).unwrap().value)
}

/// The seven-version, three-library timeline: A:v1 is vulnerable, A:v2
/// fixes it, B:v2 picks up the fix, C:v2 does not, C:v3 does.
pub fn timeline_inputs() -> Vec<BuildInput> {
    let input = |lib: &str, ver: &str, k: i64, source: ManifestSource| BuildInput::new(id(lib), v(ver), t(k), source);
    vec![
        input("librarya", "version1", 1, ManifestSource::None),
        input("libraryb", "version1", 2, lock(B_V1_LOCK)),
        input("libraryc", "version1", 3, lock(C_V1_LOCK)),
        input("librarya", "version2", 4, ManifestSource::None),
        input("libraryb", "version2", 5, lock(B_V2_LOCK)),
        input("libraryc", "version2", 6, lock(C_V1_LOCK)),
        input("libraryc", "version3", 7, lock(C_V3_LOCK)),
    ]
}

pub fn timeline() -> Graph {
    let built = build_graph(timeline_inputs(), &[]).unwrap();
    let feed = import_nvd_feed(TIMELINE_FEED, &[("example:librarya".into(), id("librarya"))]).unwrap();
    match_vulnerabilities(&built.graph, &feed.records).graph
}

pub fn node(g: &Graph, lib: &str, ver: &str) -> NodeId {
    g.find_ref(&key(lib, ver)).unwrap()
}

/// Short label such as `C1` for `libraryc@version1`.
pub fn label(g: &Graph, n: NodeId) -> String {
    let node = g.node(n);
    format!(
        "{}{}",
        node.library.as_str().trim_start_matches("library").to_uppercase(),
        node.version.raw.trim_start_matches("version")
    )
}

pub mod fuzz {
    use std::panic::{catch_unwind, AssertUnwindSafe};

    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use vulnprop_core::ingest::{
        import_nvd_feed, load_library_metadata, parse_cartfile_resolved, parse_manifest_requirements,
        parse_package_resolved, parse_podfile_lock,
    };
    use vulnprop_core::PackageManager;

    pub const PODFILE: &str = "platform :ios, '11.0'
use_frameworks!

target 'App' do
  pod 'Alamofire', '~> 5.2'
  pod 'SwiftyJSON', '>= 4.0'
  pod 'Kingfisher', :git => 'https://github.com/onevcat/Kingfisher.git', :branch => 'master'
  pod 'SnapKit', '5.0.1'
end
";

    pub const CARTFILE: &str = "github \"Alamofire/Alamofire\" ~> 5.2
github \"Quick/Nimble\" >= 9.0
git \"https://gitlab.com/example/Parser.git\" == 1.2.0
github \"ReactiveX/RxSwift\" \"main\"
";

    pub const PACKAGE_SWIFT: &str = r#"// swift-tools-version:5.5
import PackageDescription

let package = Package(
    name: "App",
    dependencies: [
        .package(url: "https://github.com/apple/swift-nio.git", from: "2.0.0"),
        .package(url: "https://github.com/Alamofire/Alamofire.git", .upToNextMinor(from: "5.4.0")),
        .package(url: "https://github.com/vapor/vapor.git", "4.0.0"..<"5.0.0"),
        .package(url: "https://github.com/apple/swift-log.git", .exact("1.4.2")),
    ],
    targets: [.target(name: "App", dependencies: [])]
)
"#;

    pub const METADATA: &str = "{\"library\":\"alamofire/alamofire\",\"language\":\"Swift\"}\n{\"library\":\"afnetworking/afnetworking\",\"language\":\"Objective-C\",\"repository_url\":\"https://github.com/AFNetworking/AFNetworking\"}\n";

    pub const NESTED_LOCK: &str = "PODS:\n    - LibraryB (version1):\n        - LibraryA \n    - LibraryA (version1)\n";

    type Parser = fn(&str);

    pub fn formats() -> Vec<(&'static str, Vec<&'static str>, Parser)> {
        vec![
            (
                "Podfile.lock",
                vec![
                    NESTED_LOCK,
                    include_str!("../data/lockfiles/networking-app.Podfile.lock"),
                    include_str!("../data/lockfiles/firebase-app.Podfile.lock"),
                    include_str!("../data/lockfiles/objc-legacy.Podfile.lock"),
                ],
                |t| drop(parse_podfile_lock(t)),
            ),
            (
                "Cartfile.resolved",
                vec![include_str!("../data/lockfiles/Cartfile.resolved")],
                |t| drop(parse_cartfile_resolved(t)),
            ),
            (
                "Package.resolved",
                vec![
                    include_str!("../data/lockfiles/Package.resolved.v1"),
                    include_str!("../data/lockfiles/Package.resolved.v2"),
                ],
                |t| drop(parse_package_resolved(t)),
            ),
            ("Podfile", vec![PODFILE], |t| {
                drop(parse_manifest_requirements(t, PackageManager::CocoaPods))
            }),
            ("Cartfile", vec![CARTFILE], |t| {
                drop(parse_manifest_requirements(t, PackageManager::Carthage))
            }),
            ("Package.swift", vec![PACKAGE_SWIFT], |t| {
                drop(parse_manifest_requirements(t, PackageManager::SwiftPM))
            }),
            ("NVD feed", vec![super::TIMELINE_FEED], |t| {
                drop(import_nvd_feed(t, &[]))
            }),
            ("metadata", vec![METADATA], |t| drop(load_library_metadata(t))),
        ]
    }

    const ALPHABET: &[char] = &[
        ' ', '\t', '\n', '-', ':', '(', ')', '"', '\'', '{', '}', '[', ']', ',', '.', '~', '>', '<', '=', '/', '\\',
        '0', '9', 'a', 'Z', '_', '@', 'é', '\u{0}', '\u{FEFF}', '😀',
    ];

    /// Applies one to four random edits to `seed`.
    pub fn mutate(seed: &str, rng: &mut ChaCha8Rng) -> String {
        let mut chars: Vec<char> = seed.chars().collect();
        for _ in 0..rng.random_range(1..=4) {
            let len = chars.len();
            match rng.random_range(0..7) {
                0 if len > 0 => {
                    let at = rng.random_range(0..len);
                    let n = rng.random_range(1..=(len - at).min(16));
                    chars.drain(at..at + n);
                }
                1 => {
                    let at = rng.random_range(0..=len);
                    chars.insert(at, ALPHABET[rng.random_range(0..ALPHABET.len())]);
                }
                2 if len > 0 => {
                    let at = rng.random_range(0..len);
                    chars[at] = ALPHABET[rng.random_range(0..ALPHABET.len())];
                }
                3 => chars.truncate(rng.random_range(0..=len)),
                4 | 5 => {
                    let text: String = chars.iter().collect();
                    let mut lines: Vec<&str> = text.lines().collect();
                    if lines.len() >= 2 {
                        let (a, b) = (rng.random_range(0..lines.len()), rng.random_range(0..lines.len()));
                        if rng.random_bool(0.5) {
                            lines.swap(a, b);
                        } else {
                            lines.insert(b, lines[a]);
                        }
                    }
                    chars = lines.join("\n").chars().collect();
                }
                _ => {
                    let at = rng.random_range(0..=len);
                    let digits = rng.random_range(1..=25);
                    chars.splice(at..at, std::iter::repeat_n('9', digits));
                }
            }
        }
        chars.into_iter().collect()
    }

    /// Runs `per_format` mutated inputs through every parser. Returns the
    /// number of inputs tried, or the first input that panicked.
    pub fn run(per_format: usize, seed: u64) -> Result<usize, String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tried = 0;
        for (name, seeds, parse) in formats() {
            for i in 0..per_format {
                let input = mutate(seeds[i % seeds.len()], &mut rng);
                if catch_unwind(AssertUnwindSafe(|| parse(&input))).is_err() {
                    return Err(format!("{name} parser panicked on {input:?}"));
                }
                tried += 1;
            }
        }
        Ok(tried)
    }
}
