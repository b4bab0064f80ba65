use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use curveseg::clustering::{self, groups, ClusterState, ClusteringConfig, Init, Mode};
use curveseg::cost::CostProvider;
use curveseg::init::{
    batch_som, partition_from_som, topology_test, ward_cluster, RadiusSchedule, SomConfig, SomGrid,
};
use curveseg::io::{
    build_report, curve_svg, fingerprint, format_real, heights_svg, panel_svg, read_curves,
    set_svg, write_assignment, write_atomic, RunManifest,
};
use curveseg::segmentation::SummaryTables;
use curveseg::{
    Aggregator, CurveSet, Error, KnotSet, ModelKind, ModelSpec, Result, SetAggregate, Summary,
    SummaryLayout,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::{ClusterArgs, InputArgs, SomArgs};

const TOOL: &str = concat!("curveseg ", env!("CARGO_PKG_VERSION"));

fn load(input: &InputArgs) -> Result<CurveSet> {
    let set = read_curves(&input.input, input.options())?;
    fs::create_dir_all(&input.output_dir)?;
    Ok(set)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    let mut buf = Vec::new();
    write_assignment(&mut buf, ids, labels)?;
    write_atomic(path, &buf)
}

fn parse_aggregator(s: &str) -> Result<Aggregator> {
    match s {
        "sum" => Ok(Aggregator::Sum),
        "max" => Ok(Aggregator::Max),
        other => Err(Error::Config(format!("unknown aggregate `{other}`, expected sum or max"))),
    }
}

fn check_count(p: usize, kind: ModelKind, m: usize) -> Result<()> {
    let capacity = SummaryTables::capacity(kind, m);
    if p == 0 || p > capacity {
        return Err(Error::Domain(format!(
            "P = {p} must lie in 1..={capacity} for {kind} on {m} grid points"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveSegments {
    index: usize,
    id: String,
    /// Optimal error for p = 1..=P.
    errors: Vec<f64>,
    /// Optimal summary for p = 1..=P.
    summaries: Vec<Summary>,
}

pub fn segment(
    input: &InputArgs,
    model: &str,
    aggregate: &str,
    p: usize,
    curves: &[usize],
    plot: &[usize],
) -> Result<()> {
    let kind: ModelKind = model.parse()?;
    let aggregator = parse_aggregator(aggregate)?;
    let set = load(input)?;
    check_count(p, kind, set.width())?;
    let selected: Vec<usize> = if curves.is_empty() { (0..set.len()).collect() } else { curves.to_vec() };
    if let Some(&i) = selected.iter().find(|&&i| i >= set.len()) {
        return Err(Error::Domain(format!("curve {i} does not exist, the file has {}", set.len())));
    }
    let plot: Vec<usize> = if plot.is_empty() { vec![p] } else { plot.to_vec() };
    if let Some(&q) = plot.iter().find(|&&q| q == 0 || q > p) {
        return Err(Error::Domain(format!("cannot plot {q} segments, P = {p}")));
    }
    let results = selected
        .par_iter()
        .map(|&i| {
            let provider = CostProvider::for_curve(set.grid(), set.row(i), kind)?;
            let tables = SummaryTables::build(&provider, p, aggregator)?;
            let summaries = (1..=p).map(|q| tables.summary(&provider, q)).collect::<Result<Vec<_>>>()?;
            Ok(CurveSegments {
                index: i,
                id: set.ids()[i].clone(),
                errors: tables.errors(),
                summaries,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let dir = &input.output_dir;
    write_json(
        &dir.join("segments.json"),
        &json!({ "model": kind, "aggregate": aggregator, "max_segments": p, "curves": results }),
    )?;
    for c in &results {
        for &q in &plot {
            let caption = format!("curve {} ({}), {q} segments, error {:.6e}", c.index, c.id, c.errors[q - 1]);
            let svg = curve_svg(set.grid(), set.row(c.index), &c.summaries[q - 1], &caption);
            write_atomic(&dir.join(format!("segment-{}-p{q}.svg", c.index)), svg.as_bytes())?;
        }
    }
    println!("segmented {} curve(s) into up to {p} segments", results.len());
    Ok(())
}

pub fn summarize_set(input: &InputArgs, model: &str, aggregate: &str, p: usize) -> Result<()> {
    let kind: ModelKind = model.parse()?;
    let spec = match aggregate {
        "sum" => ModelSpec::new(kind, SetAggregate::SumOverCurves)?,
        "max" => ModelSpec::new(kind, SetAggregate::MaxOverCurves)?,
        other => return Err(Error::Config(format!("unknown aggregate `{other}`, expected sum or max"))),
    };
    let set = load(input)?;
    check_count(p, kind, set.width())?;
    let members: Vec<usize> = (0..set.len()).collect();
    let provider = CostProvider::for_set(&set, &members, spec)?;
    let tables = SummaryTables::build(&provider, p, Aggregator::Sum)?;
    let summaries = (1..=p).map(|q| tables.summary(&provider, q)).collect::<Result<Vec<_>>>()?;
    let errors = tables.errors();
    let dir = &input.output_dir;
    write_json(
        &dir.join("set-summary.json"),
        &json!({ "model": spec, "curves": set.len(), "max_segments": p, "errors": errors, "summaries": summaries }),
    )?;
    let caption = format!("{} curves, {p} segments, error {:.6e}", set.len(), errors[p - 1]);
    write_atomic(&dir.join("set.svg"), set_svg(&set, &members, &summaries[p - 1], &caption).as_bytes())?;
    println!("error with {p} segments: {}", format_real(errors[p - 1]));
    Ok(())
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("map shape `{s}` is not ROWSxCOLS"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let (r, c): (usize, usize) = (r.trim().parse().map_err(|_| bad())?, c.trim().parse().map_err(|_| bad())?);
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

#[derive(Serialize)]
struct RadiusTrial {
    start: f64,
    end: f64,
    topology: f64,
    p_value: f64,
    quantization_error: f64,
}

struct TrainedMap {
    som: SomGrid,
    trials: Vec<RadiusTrial>,
    chosen: usize,
}

/// Trains one map per starting radius and keeps the one whose prototypes
/// are best organized on the grid (lowest topology statistic, first on
/// ties).
fn train_map(set: &CurveSet, args: &SomArgs, seed: u64) -> Result<TrainedMap> {
    let (rows, cols) = parse_grid(&args.som_grid)?;
    let radii = if args.som_radius.is_empty() {
        vec![RadiusSchedule::default_for(rows, cols).start]
    } else {
        args.som_radius.clone()
    };
    let mut best: Option<(usize, SomGrid)> = None;
    let mut trials = Vec::with_capacity(radii.len());
    for (r, &start) in radii.iter().enumerate() {
        let mut config = SomConfig::new(rows, cols);
        config.epochs = args.som_epochs;
        config.seed = seed;
        config.radius = RadiusSchedule {
            start,
            end: RadiusSchedule::DEFAULT_END.min(start),
        };
        let som = batch_som(set, &config)?;
        let test = if som.units() >= 2 {
            topology_test(set, &som, 100, seed)?
        } else {
            curveseg::init::TopologyTest {
                observed: 0.0,
                permuted: Vec::new(),
                p_value: 1.0,
            }
        };
        let quantization_error = (0..set.len())
            .map(|i| clustering::squared_distance(set.row(i), &som.prototypes[som.assignment[i]]))
            .sum();
        trials.push(RadiusTrial {
            start,
            end: config.radius.end,
            topology: test.observed,
            p_value: test.p_value,
            quantization_error,
        });
        if best.as_ref().is_none_or(|(b, _)| test.observed < trials[*b].topology) {
            best = Some((r, som));
        }
    }
    let (chosen, som) = best.expect("at least one radius");
    Ok(TrainedMap { som, trials, chosen })
}

/// Prototype vector drawn as a polyline through every grid point.
fn polyline_summary(set: &CurveSet, values: &[f64]) -> Result<Summary> {
    Summary::new(
        ModelSpec::sum(ModelKind::InterpL2),
        set.grid().clone(),
        SummaryLayout::Knots {
            knots: KnotSet::new((0..set.width()).collect())?,
            values: values.to_vec(),
        },
    )
}

struct SeedRun {
    seed: u64,
    state: ClusterState,
    /// Grid cell of each cluster when it comes from a map.
    cells: Option<(usize, usize, Vec<Option<usize>>)>,
    details: serde_json::Value,
}

/// Settings shared by every restart of a `cluster` run.
struct Plan<'a> {
    args: &'a ClusterArgs,
    mode: Mode,
    kind: ModelKind,
    p: usize,
    ward_cut: Option<Vec<usize>>,
}

fn run_seed(set: &CurveSet, plan: &Plan, seed: u64) -> Result<SeedRun> {
    let Plan { args, mode, kind, p, .. } = *plan;
    let mut cells = None;
    let mut details = serde_json::Map::new();
    let (k, init) = match args.init.as_str() {
        "random" => (args.k.expect("checked"), Init::Random),
        "ward" => (args.k.expect("checked"), Init::Given(plan.ward_cut.clone().expect("computed"))),
        "som" => {
            let map = train_map(set, &args.som, seed)?;
            let (labels, kept) = partition_from_som(&map.som);
            let mut layout = vec![None; map.som.units()];
            for (cluster, &unit) in kept.iter().enumerate() {
                layout[unit] = Some(cluster);
            }
            cells = Some((map.som.rows, map.som.cols, layout));
            details.insert(
                "som".into(),
                json!({ "radii": map.trials, "chosen_radius": map.trials[map.chosen].start, "units_kept": kept }),
            );
            (kept.len(), Init::Given(labels))
        }
        other => return Err(Error::Config(format!("unknown init `{other}`, expected random, ward or som"))),
    };
    let cap_segments = args.cap.map(|l| (l * p as f64 / k as f64).ceil() as usize);
    let config = ClusteringConfig::new(k, p, kind, mode)
        .with_cap(cap_segments)
        .with_max_iter(args.max_iter)
        .with_seed(seed)
        .with_init(init);
    let state = if args.two_phase {
        let r = clustering::two_phase(set, &config)?;
        details.insert(
            "two_phase".into(),
            json!({
                "kmeans_error": r.kmeans.error,
                "kmeans_iterations": r.kmeans.iterations,
                "summarized_error": r.summarized_error,
            }),
        );
        r.state
    } else {
        clustering::cluster(set, &config)?
    };
    details.insert("cap_segments".into(), json!(cap_segments));
    Ok(SeedRun {
        seed,
        state,
        cells,
        details: serde_json::Value::Object(details),
    })
}

pub fn cluster(args: &ClusterArgs, command: &str) -> Result<()> {
    let start = Instant::now();
    let mode: Mode = args.mode.parse()?;
    let kind: ModelKind = args.model.parse()?;
    let set = load(&args.input)?;
    if args.seeds == 0 {
        return Err(Error::Config("--seeds must be at least 1".into()));
    }
    let p = match (mode, args.p) {
        (Mode::KMeans, p) => p.unwrap_or(0),
        (_, Some(p)) => p,
        (_, None) => return Err(Error::Config("--P is required unless the mode is kmeans".into())),
    };
    if args.init != "som" && args.k.is_none() {
        return Err(Error::Config("--K is required unless the init is som".into()));
    }
    if args.init == "som" {
        let (r, c) = parse_grid(&args.som.som_grid)?;
        if args.k.is_some_and(|k| k != r * c) {
            return Err(Error::Config(format!("--K must equal the {r}x{c} map size")));
        }
    }
    if let Some(l) = args.cap {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!("--cap must be positive, got {l}")));
        }
    }
    let ward_cut = match args.init.as_str() {
        "ward" => Some(ward_cluster(&set)?.cut(args.k.expect("checked"))?),
        _ => None,
    };
    let plan = Plan {
        args,
        mode,
        kind,
        p,
        ward_cut,
    };
    let seeds: Vec<u64> = (0..args.seeds).map(|s| args.seed + s).collect();
    let runs = seeds
        .par_iter()
        .map(|&seed| run_seed(&set, &plan, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        if r.state.error < runs[best].state.error {
            best = i;
        }
    }
    let run = &runs[best];
    let state = &run.state;
    let relative = clustering::relative_error(&set, state).ok();
    let k = state.k();
    let dir = &args.input.output_dir;

    let clusters = groups(&state.assignment, k);
    let (rows, cols, cells) = match &run.cells {
        Some((r, c, layout)) => (*r, *c, layout.clone()),
        None => {
            let cols = (k as f64).sqrt().ceil() as usize;
            (k.div_ceil(cols), cols, (0..k).map(Some).collect())
        }
    };
    let captions: Vec<String> = cells
        .iter()
        .map(|c| {
            c.map_or_else(String::new, |c| {
                format!("cluster {c}: {} curves, {} segments", clusters[c].len(), state.allocation[c])
            })
        })
        .collect();
    let svg = panel_svg(&set, &clusters, &state.summaries, rows, cols, &cells, &captions);
    write_atomic(&dir.join("clusters.svg"), svg.as_bytes())?;
    write_labels(&dir.join("assignment.csv"), set.ids(), &state.assignment)?;
    let per_cluster: Vec<serde_json::Value> = (0..k)
        .map(|c| {
            json!({
                "cluster": c,
                "members": clusters[c].iter().map(|&i| &set.ids()[i]).collect::<Vec<_>>(),
                "segments": state.allocation[c],
                "summary": state.summaries[c],
            })
        })
        .collect();
    write_json(&dir.join("summaries.json"), &json!({ "clusters": per_cluster }))?;

    let config = json!({
        "input": args.input.input.display().to_string(),
        "header_row": args.input.header_row,
        "id_column": args.input.id_column,
        "transpose": args.input.transpose,
        "mode": mode,
        "model": kind,
        "k": k,
        "k_requested": args.k,
        "p": if mode == Mode::KMeans { None } else { Some(p) },
        "cap": args.cap,
        "seeds": args.seeds,
        "seed": args.seed,
        "max_iter": args.max_iter,
        "init": args.init,
        "som_grid": args.som.som_grid,
        "som_radius": args.som.som_radius,
        "som_epochs": args.som.som_epochs,
        "two_phase": args.two_phase,
    });
    let restarts: Vec<serde_json::Value> = runs
        .iter()
        .map(|r| json!({ "seed": r.seed, "error": r.state.error, "iterations": r.state.iterations }))
        .collect();
    let mut details = run.details.clone();
    details["restarts"] = json!(restarts);
    let manifest = RunManifest {
        tool: TOOL.into(),
        command: command.into(),
        config,
        dataset: fingerprint(&set),
        seed: run.seed,
        trace: state.trace.clone(),
        final_error: state.error,
        relative_error: relative,
        allocation: state.allocation.clone(),
        iterations: state.iterations,
        stop: Some(state.stop),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        details,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    println!(
        "E = {} relative = {} allocation = {:?} iterations = {} seed = {}",
        format_real(state.error),
        relative.map_or_else(|| "n/a".into(), format_real),
        state.allocation,
        state.iterations,
        run.seed
    );
    Ok(())
}

pub fn ward(input: &InputArgs, k: Option<usize>) -> Result<()> {
    let set = load(input)?;
    let tree = ward_cluster(&set)?;
    let dir = &input.output_dir;
    let mut csv = String::from("step,left,right,height,size\n");
    for (s, m) in tree.merges().iter().enumerate() {
        csv.push_str(&format!("{s},{},{},{},{}\n", m.left, m.right, format_real(m.height), m.size));
    }
    write_atomic(&dir.join("ward-merges.csv"), csv.as_bytes())?;
    let last = tree.last_heights(20);
    write_json(
        &dir.join("ward.json"),
        &json!({ "leaves": tree.leaves(), "merges": tree.merges(), "leaf_order": tree.leaf_order(), "last_heights": last }),
    )?;
    let caption = "Ward merge heights, from 2 clusters upwards";
    write_atomic(&dir.join("ward-heights.svg"), heights_svg(&last, caption).as_bytes())?;
    if let Some(k) = k {
        write_labels(&dir.join("ward-assignment.csv"), set.ids(), &tree.cut(k)?)?;
    }
    println!("merged {} curves; largest merge height {}", set.len(), format_real(last.first().copied().unwrap_or(0.0)));
    Ok(())
}

pub fn som(input: &InputArgs, args: &SomArgs, seed: u64) -> Result<()> {
    let set = load(input)?;
    let map = train_map(&set, args, seed)?;
    let som = &map.som;
    let dir = &input.output_dir;
    write_json(
        &dir.join("som.json"),
        &json!({
            "rows": som.rows,
            "cols": som.cols,
            "epochs": args.som_epochs,
            "seed": seed,
            "radii": map.trials,
            "chosen_radius": map.trials[map.chosen].start,
            "prototypes": som.prototypes,
            "assignment": som.assignment,
        }),
    )?;
    write_labels(&dir.join("som-assignment.csv"), set.ids(), &som.assignment)?;
    let units = groups(&som.assignment, som.units());
    let protos = som
        .prototypes
        .iter()
        .map(|p| polyline_summary(&set, p))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<Option<usize>> = (0..som.units()).map(Some).collect();
    let captions: Vec<String> = (0..som.units())
        .map(|u| format!("unit {u}: {} curves", units[u].len()))
        .collect();
    let svg = panel_svg(&set, &units, &protos, som.rows, som.cols, &cells, &captions);
    write_atomic(&dir.join("som.svg"), svg.as_bytes())?;
    for t in &map.trials {
        println!(
            "radius {} -> topology {:.4} (p = {:.3}), quantization error {}",
            t.start,
            t.topology,
            t.p_value,
            format_real(t.quantization_error)
        );
    }
    Ok(())
}

pub fn report(manifests: &[PathBuf], output_dir: &Path) -> Result<()> {
    let runs = manifests
        .iter()
        .map(|p| Ok((p.display().to_string(), RunManifest::read(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&runs)?;
    fs::create_dir_all(output_dir)?;
    write_atomic(&output_dir.join("report.csv"), &report.to_csv()?)?;
    let text = report.to_text();
    write_atomic(&output_dir.join("report.txt"), text.as_bytes())?;
    print!("{text}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}
