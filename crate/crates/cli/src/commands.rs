//! The five commands. Each returns its text outputs; writing them is left to the caller.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clbf::analytics::{compare_f_j, Backend, FpModel};
use clbf::optimizer::{optimize_k2_with, split_budget, OptimizationResult};
use clbf::protocol::{recover_provenance, Arrangement, Clbf, ClbfParams, PacketId};
use clbf::segmentation::{NodeId, SegmentDictionary, SegmentSequence, SeqLenMode};
use clbf::sim::{run_point, ScenarioConfig, SweepAxis, SweepResult, RNG_NAME, RSU};

use crate::error::{CliError, PathRule};
use crate::scenario::{Hop, Preset, Scenario};

pub const CSV_VERSION: &str = "clbf-csv v1";

/// A named text artifact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

fn describe(s: &Scenario) -> String {
    let c = &s.config;
    format!(
        "# scenario={} N={} h={} delta={} m1={} k1={} m2={} k2={} placement={} seq_len_mode={}",
        s.name,
        c.n_nodes,
        c.h,
        c.delta,
        c.m1,
        c.k1,
        c.m2,
        c.k2,
        c.placement,
        c.mode.as_str()
    )
}

/// One model per distinct `(h, delta)` across the points.
fn models(points: &[(u32, ScenarioConfig)], backend: Backend) -> Result<BTreeMap<(usize, u16), FpModel>, CliError> {
    let mut out = BTreeMap::new();
    for (_, c) in points {
        if let std::collections::btree_map::Entry::Vacant(e) = out.entry((c.h, c.delta)) {
            e.insert(FpModel::new(c.h, c.delta, c.mode, backend)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPoint {
    pub axis_value: u32,
    pub config: ScenarioConfig,
    pub pr_efp: f64,
    pub clamped: bool,
}

pub fn analytic_curve(scenario: &Scenario, backend: Backend) -> Result<Vec<AnalyticPoint>, CliError> {
    let points = scenario.point_configs()?;
    let models = models(&points, backend)?;
    points
        .into_iter()
        .map(|(v, c)| {
            let b = models[&(c.h, c.delta)].evaluate(c.m2, c.k2)?;
            Ok(AnalyticPoint { axis_value: v, config: c, pr_efp: b.total, clamped: b.clamped })
        })
        .collect()
}

pub fn cmd_analyze(scenario: &Scenario, backend: Backend) -> Result<String, CliError> {
    let mut out = format!("# {CSV_VERSION} analyze\n{}\nm2,k2,h,delta,backend,pr_efp,clamped_flag\n", describe(scenario));
    for p in analytic_curve(scenario, backend)? {
        let c = p.config;
        writeln!(out, "{},{},{},{},{},{},{}", c.m2, c.k2, c.h, c.delta, backend, p.pr_efp, u8::from(p.clamped)).unwrap();
    }
    Ok(out)
}

pub fn empirical_curve(scenario: &Scenario) -> Result<Vec<SweepResult>, CliError> {
    scenario
        .point_configs()?
        .into_iter()
        .map(|(v, c)| run_point(&c, v).map_err(CliError::from))
        .collect()
}

pub fn cmd_simulate(scenario: &Scenario) -> Result<String, CliError> {
    let c = &scenario.config;
    let mut out = format!(
        "# {CSV_VERSION} simulate\n{}\n# trials={} base_seed={} rng={RNG_NAME}\n",
        describe(scenario),
        c.trials,
        c.base_seed
    );
    out.push_str("axis_value,trials,fp_count,fp_rate,ci_low,ci_high,mean_alpha,skipped_trials\n");
    for r in empirical_curve(scenario)? {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.axis_value, r.trials, r.fp_count, r.fp_rate, r.ci_low, r.ci_high, r.mean_alpha, r.skipped_trials
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub result: OptimizationResult,
    pub report: String,
    pub curve_csv: String,
}

pub fn cmd_optimize(scenario: &Scenario, backend: Backend) -> Result<OptimizeReport, CliError> {
    let c = &scenario.config;
    let opts = &scenario.optimize;
    let range = match (opts.k2_min, opts.k2_max) {
        (None, None) => None,
        (lo, hi) => {
            let lo = lo.unwrap_or(1);
            let hi = hi.unwrap_or_else(|| *clbf::optimizer::default_k2_range(c.m2).end());
            Some(lo..=hi)
        }
    };
    let model = FpModel::new(c.h, c.delta, c.mode, backend)?;
    let result = match opts.total_bits {
        Some(m) => {
            let split = split_budget(m, c.h, c.delta, c.n_nodes, opts.epsilon1, c.mode, backend)?;
            match range {
                None => split,
                Some(r) => OptimizationResult {
                    k1_star: split.k1_star,
                    m1: split.m1,
                    ..optimize_k2_with(&model, split.m2, Some(r))?
                },
            }
        }
        None => optimize_k2_with(&model, c.m2, range)?,
    };
    let mut report = format!("# clbf optimize v1\nscenario: {}\nbackend: {backend}\n", scenario.name);
    writeln!(report, "seq_len_mode: {}\nh: {}\ndelta: {}", c.mode.as_str(), c.h, c.delta).unwrap();
    if let (Some(m1), Some(k1)) = (result.m1, result.k1_star) {
        writeln!(report, "total_bits: {}\nepsilon1: {}\nm1: {m1}\nk1_star: {k1}", m1 + result.m2, opts.epsilon1)
            .unwrap();
    }
    writeln!(
        report,
        "m2: {}\nk2_star: {}\nachieved_pr_efp: {}\ncurve_clamped: {}",
        result.m2, result.k2_star, result.achieved_pr_efp, result.clamped
    )
    .unwrap();
    let mut curve_csv = format!("# {CSV_VERSION} optimize-curve\n{}\nk2,pr_efp\n", describe(scenario));
    for (k, v) in &result.curve {
        writeln!(curve_csv, "{k},{v}").unwrap();
    }
    Ok(OptimizeReport { result, report, curve_csv })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureRow {
    pub axis_value: u32,
    pub analytical: f64,
    pub clamped: bool,
    pub empirical: SweepResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure {
    pub preset: Preset,
    pub axis: SweepAxis,
    pub rows: Vec<FigureRow>,
    pub csv: Artifact,
    pub script: Artifact,
}

impl Figure {
    pub fn argmin_analytical(&self) -> u32 {
        argmin(self.rows.iter().map(|r| (r.axis_value, r.analytical)))
    }

    pub fn argmin_empirical(&self) -> u32 {
        argmin(self.rows.iter().map(|r| (r.axis_value, r.empirical.fp_rate)))
    }
}

/// First axis value attaining the minimum.
fn argmin(points: impl Iterator<Item = (u32, f64)>) -> u32 {
    let mut best: Option<(u32, f64)> = None;
    for (x, y) in points {
        if best.is_none_or(|(_, b)| y < b) {
            best = Some((x, y));
        }
    }
    best.expect("non-empty sweep").0
}

/// Analytical and empirical curves of one preset on a shared grid, plus a gnuplot script.
pub fn cmd_figure(scenario: &Scenario, preset: Preset, backend: Backend) -> Result<Figure, CliError> {
    let sweep = scenario.sweep_or_point();
    let analytic = analytic_curve(scenario, backend)?;
    let empirical = empirical_curve(scenario)?;
    let rows: Vec<FigureRow> = analytic
        .iter()
        .zip(empirical)
        .map(|(a, e)| FigureRow { axis_value: a.axis_value, analytical: a.pr_efp, clamped: a.clamped, empirical: e })
        .collect();
    let stem = preset.file_stem();
    let c = &scenario.config;
    let mut fig = Figure {
        preset,
        axis: sweep.axis,
        rows,
        csv: Artifact { name: format!("{stem}.csv"), contents: String::new() },
        script: Artifact { name: format!("{stem}.gp"), contents: String::new() },
    };
    let mut csv = format!("# {CSV_VERSION} figures\n{}\n", describe(scenario));
    writeln!(
        csv,
        "# preset={} axis={} trials={} base_seed={} rng={RNG_NAME} backend={backend} any_clamped={}",
        preset,
        sweep.axis,
        c.trials,
        c.base_seed,
        fig.rows.iter().any(|r| r.clamped)
    )
    .unwrap();
    writeln!(csv, "# argmin_analytical={} argmin_empirical={}", fig.argmin_analytical(), fig.argmin_empirical())
        .unwrap();
    csv.push_str("axis_value,analytical,clamped,empirical,ci_low,ci_high,fp_count,trials,skipped_trials\n");
    for r in &fig.rows {
        let e = &r.empirical;
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.axis_value,
            r.analytical,
            u8::from(r.clamped),
            e.fp_rate,
            e.ci_low,
            e.ci_high,
            e.fp_count,
            e.trials,
            e.skipped_trials
        )
        .unwrap();
    }
    fig.csv.contents = csv;
    fig.script.contents = gnuplot_script(preset, sweep.axis, &fig.csv.name, &stem);
    Ok(fig)
}

fn gnuplot_script(preset: Preset, axis: SweepAxis, csv: &str, stem: &str) -> String {
    let xlabel = match axis {
        SweepAxis::K2 => "number of hash functions k2",
        SweepAxis::M2 => "location filter size m2 (bits)",
        SweepAxis::Delta => "number of segments |Delta|",
    };
    format!(
        "# {preset}: analytical vs empirical false-positive probability\n\
         set terminal pngcairo size 900,600\n\
         set output '{stem}.png'\n\
         set datafile separator ','\n\
         set datafile commentschars '#'\n\
         set xlabel '{xlabel}'\n\
         set ylabel 'false positive probability'\n\
         set key top right\n\
         set grid\n\
         plot '{csv}' every ::1 using 1:2 with linespoints title 'analytical', \\\n\
         \x20    '{csv}' every ::1 using 1:4:5:6 with yerrorlines title 'empirical (95% Wilson)'\n"
    )
}

/// Closed-form versus enumerated `f_J` for every `delta <= delta_max`, `h <= h_max`.
pub fn fj_comparison_csv(delta_max: u16, h_max: usize, mode: SeqLenMode) -> Result<Artifact, CliError> {
    let rows = compare_f_j(delta_max, h_max, mode)?;
    let agree = rows.iter().filter(|r| r.agrees()).count();
    let mut csv = format!(
        "# {CSV_VERSION} fj-comparison\n# seq_len_mode={} agreeing_rows={agree} total_rows={}\ndelta,h,J,closed_form,oracle,agrees\n",
        mode.as_str(),
        rows.len()
    );
    for r in rows {
        writeln!(csv, "{},{},{},{},{},{}", r.delta, r.h, r.big_j, r.closed, r.oracle, u8::from(r.agrees())).unwrap();
    }
    Ok(Artifact { name: format!("fj_comparison_{}.csv", mode.as_str()), contents: csv })
}

/// Checks a declared source-first path against the routing rules.
pub fn check_path(path: &[Hop], n_nodes: usize, delta: u16, mode: SeqLenMode) -> Result<(), CliError> {
    let usage = |msg: String| Err(CliError::Usage(msg));
    if path.is_empty() {
        return usage("declared path is empty".into());
    }
    if path.len() >= n_nodes || path.len() > usize::from(u8::MAX) {
        return usage(format!("{} hops do not fit a network of N = {n_nodes} nodes", path.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for hop in path {
        if hop.node == RSU || hop.node.0 as usize >= n_nodes {
            return usage(format!("{} is not a vehicle of this network (I1..I{})", hop.node, n_nodes - 1));
        }
        if hop.segment.0 == 0 || hop.segment.0 > delta {
            return usage(format!("{} is outside A1..A{delta}", hop.segment));
        }
        if !seen.insert(hop.node) {
            return usage(format!("{} appears twice", hop.node));
        }
    }
    for w in path.windows(2) {
        let (from, to) = (w[0].segment.0, w[1].segment.0);
        if from.abs_diff(to) > 1 {
            return Err(CliError::PathRule {
                rule: PathRule::Adjacency,
                detail: format!("{} -> {} skips a segment", w[0], w[1]),
            });
        }
        if to > from {
            return Err(CliError::PathRule {
                rule: PathRule::BackHop,
                detail: format!("{} -> {} moves away from the RSU", w[0], w[1]),
            });
        }
    }
    let last = path[path.len() - 1];
    let max_last = match mode {
        SeqLenMode::H => 1,
        SeqLenMode::HPlus1 => 2,
    };
    if last.segment.0 > max_last {
        return Err(CliError::PathRule {
            rule: PathRule::Anchor,
            detail: format!("last relay {last} cannot reach the RSU in A1 (must be in A1..A{max_last})"),
        });
    }
    Ok(())
}

/// Embeds a declared path hop by hop, recovers it, and reports every step.
pub fn cmd_trace(scenario: &Scenario, path: &[Hop], pid: u64) -> Result<String, CliError> {
    let c = &scenario.config;
    check_path(path, c.n_nodes, c.delta, c.mode)?;
    let dict = SegmentDictionary::uniform(scenario.road_length_m, c.delta)
        .map_err(|e| CliError::Parse(e.to_string()))?;
    let params = ClbfParams { m1: c.m1, k1: c.k1, m2: c.m2, k2: c.k2, seed: scenario.filter_seed };
    let mut clbf = Clbf::new(params, PacketId(pid))?;

    let mut out = format!("# clbf trace v1\nscenario: {}\n", scenario.name);
    writeln!(
        out,
        "network: N={} (RSU {RSU} in A1), delta={}, seq_len_mode={}",
        c.n_nodes,
        c.delta,
        c.mode.as_str()
    )
    .unwrap();
    let seg_len = dict.road_length() / f64::from(c.delta);
    writeln!(out, "dictionary: {} segments of {seg_len} m over [0, {}) m", c.delta, dict.road_length()).unwrap();
    writeln!(out, "filters: m1={} k1={} m2={} k2={} seed={} pid={pid}", c.m1, c.k1, c.m2, c.k2, params.seed).unwrap();
    out.push_str("embedding:\n");
    let first = path[0];
    clbf.source_embed(first.node, first.segment)?;
    writeln!(out, "  1. source {} embeds location ({}, {})", first.node, first.node, first.segment).unwrap();
    for (i, w) in path.windows(2).enumerate() {
        clbf.forward_embed(w[0].node, w[1].node, w[1].segment)?;
        writeln!(
            out,
            "  {}. {} embeds edge {} -> {} and location ({}, {})",
            i + 2,
            w[1].node,
            w[0].node,
            w[1].node,
            w[1].node,
            w[1].segment
        )
        .unwrap();
    }
    let last = path[path.len() - 1].node;
    clbf.deliver(last, RSU)?;
    writeln!(out, "  {}. {last} embeds edge {last} -> {RSU} and delivers", path.len() + 1).unwrap();
    writeln!(out, "hop_count: {}", clbf.hop_count()).unwrap();
    for (name, f) in [("edge", clbf.edge_filter()), ("location", clbf.location_filter())] {
        writeln!(out, "{name}_filter: m={} k={} lit={} hex={}", f.m(), f.k(), f.popcount(), f.to_hex()).unwrap();
    }

    let nodes: Vec<NodeId> = (0..c.n_nodes as u32).map(NodeId).collect();
    let outcome = recover_provenance(&clbf, &nodes, RSU, c.delta, c.mode, c.limits)?;
    let truth_seq: Vec<u16> = path.iter().rev().map(|h| h.segment.0).collect();
    let mut truth_path: Vec<NodeId> = path.iter().map(|h| h.node).collect();
    truth_path.push(RSU);
    let truth = Arrangement { path: truth_path, sequence: SegmentSequence::from_indices(&truth_seq) };

    out.push_str("recovery:\n");
    let edges: Vec<String> = outcome.edges.iter().map(|e| format!("{}->{}", e.prev, e.curr)).collect();
    writeln!(out, "  edge_tests: {}\n  edges: {}", outcome.edge_tests, edges.join(" ")).unwrap();
    writeln!(out, "  paths: {}", outcome.paths.len()).unwrap();
    writeln!(out, "  location_tests: {}", outcome.location_tests).unwrap();
    writeln!(out, "  arrangements: {}", outcome.arrangements.len()).unwrap();
    for a in &outcome.arrangements {
        let route: Vec<String> = a.path.iter().map(ToString::to_string).collect();
        let mark = if *a == truth { "  [declared]".to_string() } else { alternative_note(a, &truth) };
        writeln!(out, "    {} | {}{mark}", route.join(" -> "), a.sequence).unwrap();
    }
    writeln!(out, "classification: {:?}", outcome.classify(&truth)).unwrap();
    Ok(out)
}

/// Which pairs of an alternative arrangement were never embedded.
fn alternative_note(a: &Arrangement, truth: &Arrangement) -> String {
    if a.path != truth.path {
        return "  [different path]".into();
    }
    let embedders: Vec<NodeId> = a.path[..a.path.len() - 1].iter().rev().copied().collect();
    let extras: Vec<String> = embedders
        .iter()
        .zip(a.sequence.0.iter().zip(&truth.sequence.0))
        .filter(|(_, (x, y))| x != y)
        .map(|(n, (x, _))| format!("({n}, {x})"))
        .collect();
    format!("  [extra recovery {}]", extras.join(" "))
}
