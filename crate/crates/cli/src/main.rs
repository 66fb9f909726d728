//! `bimodal` — solve and inspect bi-modal truck + drone delivery scenarios.
//!
//! Exit codes: 0 success, 1 validation or feasibility failure, 2 solver
//! failure, 3 file or format trouble. Set `BIMODAL_LOG=debug` for solver
//! iteration logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bimodal_core::latency::{edge_latency, fit_plane};
use bimodal_core::model::{validate, Mode};
use bimodal_core::objective::{assemble_qp, evaluate};
use bimodal_core::paths::{enumerate_paths, PathSet};
use bimodal_core::scenario::{
    import_tntp, load_scenario, read_samples, save_scenario, write_plane, write_results,
    write_results_path, ImportOptions, ResultRow, Scenario,
};
use bimodal_core::solver::{solve_qp, SolverOptions};
use bimodal_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "bimodal",
    version,
    about = "Bi-modal parcel delivery: route trucks and drones from one hub,\n\
             trading parcel latency against the delay inflicted on everyone else."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file against every structural invariant.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// List the truck routes the hub can serve within the edge cap.
    Paths {
        #[arg(long)]
        scenario: PathBuf,
        /// Maximum road edges per route.
        #[arg(long, default_value_t = 8)]
        max_edges: usize,
        /// Write the listing as CSV instead of plain text.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Fit a latency plane to measurement samples.
    Fit {
        /// CSV with header truck_flow,total_flow,latency_hours.
        #[arg(long)]
        samples: PathBuf,
        /// Write the fitted plane as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve the routing problem at one trade-off weight.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Parcel-vs-societal weight in [0, 1]; 1 cares only about parcels.
        #[arg(long)]
        gamma: f64,
        /// Append the solved row to a results CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Solve across a set of trade-off weights and tabulate the frontier.
    Sweep {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma list ("0,0.5,1") or range with count ("0:1:11").
        #[arg(long)]
        gammas: String,
        /// Worker threads for the sweep; defaults to all cores.
        #[arg(long)]
        jobs: Option<usize>,
        /// Write all rows as CSV.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Build a scenario from net/node/flow text files.
    ImportTntp(ImportArgs),
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// "bimodal" or "truck-only".
    #[arg(long, default_value = "bimodal", value_parser = parse_mode)]
    mode: Mode,
    /// Maximum road edges per truck route.
    #[arg(long, default_value_t = 8)]
    max_edges: usize,
    /// Solver tolerance on every KKT residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct ImportArgs {
    /// Edge list (init, term, capacity, ...).
    #[arg(long)]
    net: PathBuf,
    /// Node coordinates.
    #[arg(long)]
    nodes: PathBuf,
    /// Equilibrium edge volumes; becomes the background traffic.
    #[arg(long)]
    flows: PathBuf,
    /// Where to write the scenario JSON.
    #[arg(long)]
    output: PathBuf,
    /// Scenario name recorded in the file.
    #[arg(long, default_value = "imported")]
    name: String,
    /// Hub node id.
    #[arg(long, default_value = "10")]
    hub: String,
    /// Parcels per hour demanded at every non-hub node.
    #[arg(long, default_value_t = 5000.0)]
    demand: f64,
    /// Total background vehicle flow the volumes are rescaled to.
    #[arg(long, default_value_t = 81_000.0)]
    beta: f64,
    /// Hourly operational budget.
    #[arg(long, default_value_t = 50_000.0)]
    cost_cap: f64,
    /// Length of the network's longer axis in km.
    #[arg(long, default_value_t = 12.0)]
    extent_km: f64,
    #[arg(long, default_value_t = 125)]
    parcels_per_truck: u32,
    #[arg(long, default_value_t = 30.0)]
    truck_cost: f64,
    #[arg(long, default_value_t = 0.5)]
    drone_cost: f64,
    #[arg(long, default_value_t = 25.0)]
    drone_speed: f64,
    /// Capacity above which an edge counts as three-lane.
    #[arg(long, default_value_t = 10_000.0)]
    three_lane_capacity: f64,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    // Die quietly when a pager closes the pipe instead of panicking on the
    // failed print (Rust ignores SIGPIPE by default).
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::new().filter("BIMODAL_LOG")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 1 for problems with the scenario or its feasibility, 2 for solver
/// failure, 3 for file trouble.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::NoConvergence { .. } => 2,
        Error::Io(_)
        | Error::Json(_)
        | Error::Csv(_)
        | Error::Parse { .. }
        | Error::SchemaVersion { .. } => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Validate { scenario } => cmd_validate(&scenario),
        Command::Paths {
            scenario,
            max_edges,
            output,
        } => cmd_paths(&scenario, max_edges, output.as_deref()),
        Command::Fit { samples, output } => cmd_fit(&samples, output.as_deref()),
        Command::Solve {
            problem,
            gamma,
            output,
        } => cmd_solve(&problem, gamma, output.as_deref()),
        Command::Sweep {
            problem,
            gammas,
            jobs,
            output,
        } => cmd_sweep(&problem, &gammas, jobs, output.as_deref()),
        Command::ImportTntp(args) => cmd_import(args),
    }
}

/// Loads and validates, failing with every violation listed.
fn load_checked(path: &std::path::Path) -> Result<Scenario> {
    let sc = load_scenario(path)?;
    let violations = validate(&sc.network);
    if violations.is_empty() {
        return Ok(sc);
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(Error::InvalidScenario(violations.len()))
}

fn cmd_validate(path: &std::path::Path) -> Result<()> {
    let sc = load_checked(path)?;
    let net = &sc.network;
    println!(
        "ok: {} — {} nodes, {} road edges, {} aerial corridors, {} parcels/h demand",
        sc.name,
        net.node_count(),
        net.road_edges.len(),
        net.aerial_edges.len(),
        net.total_demand()
    );
    Ok(())
}

fn route_label(net: &bimodal_core::model::Network, ps: &PathSet, p: usize) -> String {
    ps.paths[p]
        .nodes(net)
        .iter()
        .map(|v| net.node_name(*v))
        .collect::<Vec<_>>()
        .join(" -> ")
}

fn cmd_paths(
    path: &std::path::Path,
    max_edges: usize,
    output: Option<&std::path::Path>,
) -> Result<()> {
    let sc = load_checked(path)?;
    let net = &sc.network;
    let ps = enumerate_paths(net, max_edges, None)?;

    if let Some(out) = output {
        let mut writer = csv::Writer::from_path(out)?;
        writer.write_record(["id", "destination", "edges", "nodes"])?;
        for (p, path) in ps.paths.iter().enumerate() {
            writer.write_record([
                p.to_string(),
                net.node_name(path.destination).to_string(),
                path.edges.len().to_string(),
                path.nodes(net)
                    .iter()
                    .map(|v| net.node_name(*v))
                    .collect::<Vec<_>>()
                    .join(" "),
            ])?;
        }
        writer.flush()?;
    } else {
        for p in 0..ps.len() {
            println!(
                "p{p}: {} ({} edges)",
                route_label(net, &ps, p),
                ps.paths[p].edges.len()
            );
        }
    }
    println!("{} routes within {} edges", ps.len(), max_edges);
    if !ps.unreachable.is_empty() {
        let names: Vec<_> = ps.unreachable.iter().map(|v| net.node_name(*v)).collect();
        println!(
            "unreached by truck within the cap: {} (drones may still serve them)",
            names.join(", ")
        );
    }
    Ok(())
}

fn cmd_fit(samples_path: &std::path::Path, output: Option<&std::path::Path>) -> Result<()> {
    let samples = read_samples(samples_path)?;
    let plane = fit_plane(&samples)?;
    let rmse = {
        let sq_sum: f64 = samples
            .iter()
            .map(|s| {
                let fit = edge_latency(&plane, s.truck_flow, s.total_flow).unwrap_or(f64::NAN);
                (fit - s.latency_hours).powi(2)
            })
            .sum();
        (sq_sum / samples.len() as f64).sqrt()
    };
    println!(
        "fitted {} samples: omega = [{}, {}, {}], rmse {rmse:.3e} h",
        samples.len(),
        plane.omega[0],
        plane.omega[1],
        plane.omega[2]
    );
    if let Some(out) = output {
        write_plane(out, &plane)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

/// One assemble–solve–evaluate pass; the shared engine of solve and sweep.
fn solve_point(
    sc: &Scenario,
    ps: &PathSet,
    gamma: f64,
    problem: &ProblemArgs,
) -> Result<ResultRow> {
    let net = &sc.network;
    let qp = assemble_qp(net, ps, gamma, problem.mode)?;
    let opts = SolverOptions {
        tol: problem.tol,
        max_iter: SolverOptions::default().max_iter,
    };
    let sol = solve_qp(&qp, &opts)?;
    let report = evaluate(net, ps, &sol.f)?;

    let path_flows = sol
        .f
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 1e-9)
        .map(|(p, &v)| (p, v))
        .collect();
    let drone_parcels = net
        .aerial_edges
        .iter()
        .map(|a| a.to)
        .filter(|v| report.assignment.drone_parcels[v.index()] > 1e-9)
        .map(|v| {
            (
                net.node_name(v).to_string(),
                report.assignment.drone_parcels[v.index()],
            )
        })
        .collect();

    Ok(ResultRow {
        scenario: sc.name.clone(),
        mode: problem.mode.to_string(),
        gamma,
        objective: sol.objective,
        parcel_latency_min: report.parcel_latency_hours * 60.0,
        societal_latency_min: report.societal_latency_hours * 60.0,
        operational_cost: report.operational_cost,
        trucks_per_hour: report.assignment.path_flow.iter().sum(),
        truck_parcels_per_hour: report.assignment.truck_parcels.iter().sum(),
        drone_parcels_per_hour: report.assignment.drone_parcels.iter().sum(),
        iterations: sol.iterations,
        kkt_residual: sol.residuals.max(),
        path_flows,
        drone_parcels,
    })
}

fn print_row(row: &ResultRow) {
    println!(
        "gamma {:>5.3} [{}]: objective {:.6} h | parcel latency {:.2} min | societal {:.2} min \
         | cost {:.2} | trucks {:.2}/h | {} iterations | kkt {:.2e}",
        row.gamma,
        row.mode,
        row.objective,
        row.parcel_latency_min,
        row.societal_latency_min,
        row.operational_cost,
        row.trucks_per_hour,
        row.iterations,
        row.kkt_residual
    );
}

fn cmd_solve(problem: &ProblemArgs, gamma: f64, output: Option<&std::path::Path>) -> Result<()> {
    let sc = load_checked(&problem.scenario)?;
    let ps = enumerate_paths(&sc.network, problem.max_edges, None)?;
    log::info!("{} routes enumerated", ps.len());
    let row = solve_point(&sc, &ps, gamma, problem)?;

    print_row(&row);
    println!(
        "parcels by truck {:.1}/h, by drone {:.1}/h",
        row.truck_parcels_per_hour, row.drone_parcels_per_hour
    );
    let mut flows: Vec<(usize, f64)> = row
        .path_flows
        .iter()
        .filter(|(_, v)| *v > 1e-4)
        .copied()
        .collect();
    flows.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (p, v) in flows.iter().take(20) {
        println!(
            "  p{p} {}: {v:.4} trucks/h",
            route_label(&sc.network, &ps, *p)
        );
    }
    if flows.len() > 20 {
        println!("  ... and {} more routes with flow", flows.len() - 20);
    }

    if let Some(out) = output {
        write_results_path(out, std::slice::from_ref(&row))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn parse_gammas(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: String| Error::Domain(msg);
    if let Some((rest, count)) = spec.rsplit_once(':') {
        if let Some((start, end)) = rest.split_once(':') {
            let start: f64 = start
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad range start in {spec:?}")))?;
            let end: f64 = end
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad range end in {spec:?}")))?;
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad range count in {spec:?}")))?;
            if count < 2 {
                return Err(bad("range needs at least 2 points".into()));
            }
            let step = (end - start) / (count - 1) as f64;
            return Ok((0..count).map(|i| start + step * i as f64).collect());
        }
    }
    spec.split(',')
        .map(|tok| {
            tok.trim()
                .parse()
                .map_err(|_| bad(format!("bad gamma value {tok:?}")))
        })
        .collect()
}

fn cmd_sweep(
    problem: &ProblemArgs,
    gammas: &str,
    jobs: Option<usize>,
    output: Option<&std::path::Path>,
) -> Result<()> {
    let gammas = parse_gammas(gammas)?;
    let sc = load_checked(&problem.scenario)?;
    let ps = enumerate_paths(&sc.network, problem.max_edges, None)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Domain(format!("cannot build worker pool: {e}")))?;
    let outcomes: Vec<Result<ResultRow>> = pool.install(|| {
        use rayon::prelude::*;
        gammas
            .par_iter()
            .map(|&gamma| solve_point(&sc, &ps, gamma, problem))
            .collect()
    });

    // Report in input order; fail on the first bad weight.
    let mut rows = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        rows.push(outcome?);
    }
    for row in &rows {
        print_row(row);
    }
    if let Some(out) = output {
        write_results_path(out, &rows)?;
        println!("wrote {}", out.display());
    } else if rows.len() > 1 {
        // No file requested: still make the table machine-readable.
        let mut buf = Vec::new();
        write_results(&mut buf, &rows)?;
        log::debug!("csv:\n{}", String::from_utf8_lossy(&buf));
    }
    Ok(())
}

fn cmd_import(args: ImportArgs) -> Result<()> {
    let opts = ImportOptions {
        net: args.net,
        nodes: args.nodes,
        flows: args.flows,
        name: args.name,
        hub: args.hub,
        demand_per_node: args.demand,
        beta: args.beta,
        cost_cap: args.cost_cap,
        extent_km: args.extent_km,
        parcels_per_truck: args.parcels_per_truck,
        truck_cost: args.truck_cost,
        drone_cost: args.drone_cost,
        drone_speed_kmh: args.drone_speed,
        three_lane_capacity: args.three_lane_capacity,
    };
    let sc = import_tntp(&opts)?;
    let violations = validate(&sc.network);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("{v}");
        }
        return Err(Error::InvalidScenario(violations.len()));
    }

    let three_lane = sc
        .network
        .road_edges
        .iter()
        .filter(|e| e.lanes == 3)
        .count();
    println!(
        "imported {}: {} nodes, {} road edges ({} three-lane), hub {}, {} aerial corridors",
        sc.name,
        sc.network.node_count(),
        sc.network.road_edges.len(),
        three_lane,
        sc.network.node_name(sc.network.hub),
        sc.network.aerial_edges.len()
    );
    save_scenario(&sc, &args.output)?;
    println!("wrote {}", args.output.display());
    Ok(())
}
