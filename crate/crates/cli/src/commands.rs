use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vulnprop_core::ingest::{
    import_nvd_feed, load_library_metadata, load_product_mapping, parse_cartfile_resolved, parse_manifest_requirements,
    parse_package_resolved, parse_podfile_lock,
};
use vulnprop_core::precision::scan_vulnerability_with_patch;
use vulnprop_core::propagation::propagation_histogram_with;
use vulnprop_core::*;

use crate::output::{self, fraction, Report};
use crate::*;

pub fn run(cli: &Cli) -> Result<()> {
    let common = &cli.common;
    match &cli.command {
        Command::Ingest { index, metadata, graph } => ingest(common, index, metadata.as_deref(), graph),
        Command::ImportVulns {
            graph,
            feed,
            mapping,
            records,
            graph_out,
        } => import_vulns(common, graph, feed, mapping.as_deref(), records, graph_out.as_deref()),
        Command::Stats { graph } => stats(common, &load(graph)?),
        Command::Propagation {
            graph,
            mode,
            stratify,
            all_path_lengths,
            plot_data,
        } => propagation(
            common,
            &load(graph)?,
            *mode,
            *stratify,
            *all_path_lengths,
            plot_data.as_deref(),
        ),
        Command::Upgrades {
            graph,
            scope,
            mode,
            group,
            plot_data,
        } => upgrades(common, &load(graph)?, *scope, *mode, *group, plot_data.as_deref()),
        Command::Precision {
            graph,
            patterns,
            patch_dir,
            by_language,
        } => precision(
            common,
            &load(graph)?,
            patterns.as_deref(),
            patch_dir.as_deref(),
            *by_language,
        ),
        Command::Synth {
            libraries,
            max_versions,
            dependency_probability,
            vulns,
            fix_probability,
            seed,
            graph,
        } => {
            let params = SynthParams {
                library_count: *libraries,
                max_versions_per_library: *max_versions,
                dependency_probability: *dependency_probability,
                vulnerability_count: *vulns,
                fix_release_probability: *fix_probability,
                seed: *seed,
            };
            let g = generate_ecosystem(&params)?;
            save(&g, graph)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load(path: &Path) -> Result<Graph> {
    let file = fs::File::open(path).with_context(|| format!("cannot open graph {}", path.display()))?;
    load_graph(BufReader::new(file)).with_context(|| format!("cannot load graph {}", path.display()))
}

fn save(graph: &Graph, path: &Path) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    save_graph(graph, std::io::BufWriter::new(file)).context(Internal)
}

/// One line of the ingest index. Paths are relative to the index file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexRecord {
    library: LibraryId,
    version: String,
    /// UTC seconds.
    released: i64,
    #[serde(default)]
    package_manager: Option<PackageManager>,
    #[serde(default)]
    lockfile: Option<PathBuf>,
    #[serde(default)]
    manifest: Option<PathBuf>,
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn parse_lockfile(path: &Path, text: &str) -> Result<Parsed<ResolvedManifest>> {
    let name = file_name(path);
    if name.ends_with("Podfile.lock") {
        Ok(parse_podfile_lock(text)?)
    } else if name.ends_with("Cartfile.resolved") {
        Ok(parse_cartfile_resolved(text))
    } else if name.ends_with("Package.resolved") {
        Ok(parse_package_resolved(text)?)
    } else {
        bail!("cannot tell the lockfile kind of {}", path.display())
    }
}

fn manifest_manager(path: &Path, declared: Option<PackageManager>) -> Result<PackageManager> {
    let name = file_name(path);
    if name.ends_with("Podfile") {
        Ok(PackageManager::CocoaPods)
    } else if name.ends_with("Cartfile") {
        Ok(PackageManager::Carthage)
    } else if name.ends_with("Package.swift") {
        Ok(PackageManager::SwiftPM)
    } else {
        declared.with_context(|| format!("cannot tell the manifest kind of {}", path.display()))
    }
}

fn ingest(common: &Common, index: &Path, metadata: Option<&Path>, out: &Path) -> Result<()> {
    let base = index.parent().unwrap_or(Path::new("."));
    let mut warnings = Vec::new();
    let mut inputs = Vec::new();
    for (n, line) in read(index)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: IndexRecord =
            serde_json::from_str(line).with_context(|| format!("{}:{}: bad index record", index.display(), n + 1))?;
        let version = Version::parse(&rec.version)
            .with_context(|| format!("{}:{}: bad version {:?}", index.display(), n + 1, rec.version))?;
        let source = if let Some(lock) = &rec.lockfile {
            let path = base.join(lock);
            match parse_lockfile(&path, &read(&path)?) {
                Ok(parsed) => {
                    warnings.extend(parsed.warnings);
                    ManifestSource::Resolved(parsed.value)
                }
                Err(e) => {
                    warnings.push(Warning::new(
                        WarningKind::MalformedLine,
                        format!("{}: {e:#}", path.display()),
                    ));
                    ManifestSource::None
                }
            }
        } else if let Some(manifest) = &rec.manifest {
            let path = base.join(manifest);
            let pm = manifest_manager(&path, rec.package_manager)?;
            match parse_manifest_requirements(&read(&path)?, pm) {
                Ok(parsed) => {
                    warnings.extend(parsed.warnings);
                    ManifestSource::Requirements(parsed.value)
                }
                Err(e) => {
                    warnings.push(Warning::new(
                        WarningKind::MalformedLine,
                        format!("{}: {e}", path.display()),
                    ));
                    ManifestSource::None
                }
            }
        } else {
            ManifestSource::None
        };
        let mut input = BuildInput::new(rec.library, version, rec.released, source);
        if rec.package_manager.is_some() {
            input.package_manager = rec.package_manager;
        }
        inputs.push(input);
    }
    let meta = match metadata {
        Some(p) => {
            let parsed = load_library_metadata(&read(p)?).with_context(|| format!("bad metadata {}", p.display()))?;
            warnings.extend(parsed.warnings);
            parsed.value
        }
        None => Vec::new(),
    };
    let built = build_graph(inputs, &meta)?;
    warnings.extend(built.warnings);
    save(&built.graph, out)?;
    output::warnings(common, &warnings)
}

fn import_vulns(
    common: &Common,
    graph: &Path,
    feeds: &[PathBuf],
    mapping: Option<&Path>,
    records: &[PathBuf],
    graph_out: Option<&Path>,
) -> Result<()> {
    if feeds.is_empty() && records.is_empty() {
        bail!("nothing to import: pass --feed or --records");
    }
    let g = load(graph)?;
    let mapping = match mapping {
        Some(p) => load_product_mapping(&read(p)?).with_context(|| format!("bad mapping {}", p.display()))?,
        None if !feeds.is_empty() => bail!("--feed requires --mapping"),
        None => Vec::new(),
    };
    let mut vulns = Vec::new();
    let mut warnings = Vec::new();
    for feed in feeds {
        let imported =
            import_nvd_feed(&read(feed)?, &mapping).with_context(|| format!("bad feed {}", feed.display()))?;
        warnings.extend(imported.warnings);
        vulns.extend(imported.records);
    }
    for path in records {
        for (n, line) in read(path)?.lines().enumerate() {
            if !line.trim().is_empty() {
                vulns.push(
                    serde_json::from_str::<VulnRecord>(line)
                        .with_context(|| format!("{}:{}: bad vulnerability record", path.display(), n + 1))?,
                );
            }
        }
    }
    let outcome = match_vulnerabilities(&g, &vulns);
    warnings.extend(outcome.warnings);
    save(&outcome.graph, graph_out.unwrap_or(graph))?;
    output::warnings(common, &warnings)
}

fn stats(common: &Common, g: &Graph) -> Result<()> {
    let s = ecosystem_stats(g);
    let row = vec![
        s.total_libraries.to_string(),
        s.total_vulnerabilities.to_string(),
        format!("{:.1}", s.vulns_per_10k),
        s.connected_count.to_string(),
        fraction(s.connected_affected_fraction),
        fraction(s.latest_affected_fraction),
        s.max_chain_level.map(|l| l.to_string()).unwrap_or_default(),
    ];
    output::emit(
        common,
        Report {
            header: &[
                "total_libraries",
                "total_vulnerabilities",
                "vulns_per_10k",
                "connected_libraries",
                "connected_affected_fraction",
                "latest_affected_fraction",
                "max_chain_level",
            ],
            rows: vec![row],
            document: s,
        },
    )
}

fn propagation(
    common: &Common,
    g: &Graph,
    mode: LevelMode,
    stratify: StratifyArg,
    all_path_lengths: bool,
    plot_data: Option<&Path>,
) -> Result<()> {
    let mode = match mode {
        LevelMode::Shortest => HistogramMode::ShortestPerLibrary,
        LevelMode::All => HistogramMode::AllLevels,
    };
    let stratify = match stratify {
        StratifyArg::None => Stratify::None,
        StratifyArg::Language => Stratify::Language,
        StratifyArg::Severity => Stratify::Severity,
    };
    if all_path_lengths && mode != HistogramMode::AllLevels {
        bail!("--all-path-lengths needs --mode all");
    }
    let counting = if all_path_lengths {
        LevelCounting::AllPathLengths
    } else {
        LevelCounting::MinimalPerTarget
    };
    let report = propagation_histogram_with(g, mode, stratify, counting);
    if let Some(path) = plot_data {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| vec![r.level.to_string(), r.count.to_string(), r.stratum.clone()])
            .collect();
        output::csv_file(path, &["level", "count", "stratum"], &rows)?;
    }
    let rows = report
        .rows
        .iter()
        .map(|r| vec![r.stratum.clone(), r.level.to_string(), r.count.to_string()])
        .collect();
    output::emit(
        common,
        Report {
            header: &["stratum", "level", "count"],
            rows,
            document: report,
        },
    )
}

#[derive(Serialize)]
struct UpgradeDocument {
    report: FixabilityReport,
    quartiles: Option<upgrade::Quartiles>,
}

fn upgrades(
    common: &Common,
    g: &Graph,
    scope: ScopeArg,
    mode: ModeArg,
    group: GroupArg,
    plot_data: Option<&Path>,
) -> Result<()> {
    let scope = match scope {
        ScopeArg::All => Scope::AllVersions,
        ScopeArg::Latest => Scope::LatestOnly,
    };
    let mode = match mode {
        ModeArg::Strict => FixMode::StrictVersion,
        ModeArg::VulnAware => FixMode::VulnAware,
    };
    let grouping = match group {
        GroupArg::Level => Grouping::Level,
        GroupArg::Severity => Grouping::Severity,
        GroupArg::Language => Grouping::Language,
    };
    let report = fixability_report(g, grouping, scope, mode);
    let quartiles = per_vuln_fix_rate_quartiles(g, scope, mode).ok();
    if let Some(path) = plot_data {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| vec![r.group.clone(), r.fixed.to_string(), r.not_fixed.to_string()])
            .collect();
        output::csv_file(path, &["group", "fixed", "not_fixed"], &rows)?;
    }
    let mut rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                "group".into(),
                r.group.clone(),
                r.fixed.to_string(),
                r.not_fixed.to_string(),
                String::new(),
                fraction(r.fixed_fraction),
            ]
        })
        .collect();
    let decided = report.fixed + report.not_fixed;
    rows.push(vec![
        "total".into(),
        "all".into(),
        report.fixed.to_string(),
        report.not_fixed.to_string(),
        report.excluded_chain_count.to_string(),
        fraction(if decided == 0 {
            0.0
        } else {
            report.fixed as f64 / decided as f64
        }),
    ]);
    if let Some(q) = quartiles {
        for (name, x) in [("q1", q.q1), ("median", q.median), ("q3", q.q3)] {
            rows.push(vec![
                "quartile".into(),
                name.into(),
                String::new(),
                String::new(),
                String::new(),
                fraction(x),
            ]);
        }
    }
    output::emit(
        common,
        Report {
            header: &["kind", "group", "fixed", "not_fixed", "excluded", "fixed_fraction"],
            rows,
            document: UpgradeDocument { report, quartiles },
        },
    )
}

fn precision(
    common: &Common,
    g: &Graph,
    patterns: Option<&Path>,
    patch_dir: Option<&Path>,
    by_language: bool,
) -> Result<()> {
    let patterns = match patterns {
        Some(p) => PatternSet::from_json(&read(p)?).with_context(|| format!("bad pattern set {}", p.display()))?,
        None => PatternSet::default(),
    };
    let mut flags = Vec::new();
    for vuln in g.vulns() {
        let patch = match patch_dir {
            Some(dir) => {
                let path = dir.join(format!("{}.patch", vuln.id));
                if path.exists() {
                    Some(read(&path)?)
                } else {
                    None
                }
            }
            None => None,
        };
        flags.push(scan_vulnerability_with_patch(vuln, patch.as_deref(), &patterns));
    }
    let yes = |b: bool| if b { "1" } else { "0" }.to_string();
    if by_language {
        let table = precision_report(&flags, g);
        let rows = table
            .iter()
            .map(|r| {
                vec![
                    r.language.clone(),
                    r.vulnerabilities.to_string(),
                    r.method.to_string(),
                    r.class.to_string(),
                    r.both.to_string(),
                    r.file.to_string(),
                    r.patch_link.to_string(),
                ]
            })
            .collect();
        return output::emit(
            common,
            Report {
                header: &[
                    "language",
                    "vulnerabilities",
                    "method",
                    "class",
                    "both",
                    "file",
                    "patch_link",
                ],
                rows,
                document: table,
            },
        );
    }
    let rows = flags
        .iter()
        .map(|f| {
            vec![
                f.vuln_id.clone(),
                yes(f.mentions_method),
                yes(f.mentions_class),
                yes(f.mentions_file),
                yes(f.has_patch_link),
                f.evidence
                    .iter()
                    .map(|e| e.pattern_name.as_str())
                    .collect::<Vec<_>>()
                    .join(";"),
            ]
        })
        .collect();
    output::emit(
        common,
        Report {
            header: &["vuln_id", "method", "class", "file", "patch_link", "patterns"],
            rows,
            document: flags,
        },
    )
}
