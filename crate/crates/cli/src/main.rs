//! `skyfed`: ingest catalogs, run node and portal services, query,
//! cross-match, mine, and generate test fixtures.

mod failure;
mod output;

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use skyfed_core::catalog::Catalog;
use skyfed_core::federation::{run_federated, Federation, FederationSettings, LocalNodeClient, NodeClient};
use skyfed_core::fixture::{generate, FixtureSpec};
use skyfed_core::ingest::{domestic_csv, export_domestic, ingest_csv, load_schema};
use skyfed_core::mining::{friends_of_friends, grided_count, isolated_points, moving_candidates, GridSpec};
use skyfed_core::node::{NodeEngine, DEFAULT_K, DEFAULT_MAX_RADIUS_ARCSEC, DEFAULT_ROW_CAP};
use skyfed_core::store::{open_store, write_store};
use skyfed_core::zone::{ZoneIndex, DEFAULT_ZONE_HEIGHT_DEG};
use skyfed_service::{NodeConfig, PortalClient, PortalConfig};
use tracing_subscriber::EnvFilter;

use failure::{Failure, EXIT_DOMAIN, EXIT_USAGE};
use output::{emit, Format};

#[derive(Debug, Parser)]
#[command(name = "skyfed", version, about = "Federated sky-survey catalogs: ingest, serve, query, cross-match, mine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a survey CSV into a domestic catalog store.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Schema descriptor (JSON) mapping source columns to domestic ones.
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ZONE_HEIGHT_DEG)]
        zone_height_deg: f64,
    },
    /// Write a store's catalog as domestic CSV plus schema, or CSV to stdout.
    Export {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a store as a catalog node.
    Node {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the federation portal.
    Portal {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a node-dialect query against a local store ("-" reads stdin).
    Query {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        query: String,
    },
    /// Run a portal-dialect query through a running portal ("-" reads stdin).
    Fedquery {
        #[arg(long)]
        portal: String,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long, default_value_t = 60_000)]
        timeout_ms: u64,
        query: String,
    },
    /// Objects within a cone of a local store.
    Cone {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long, allow_negative_numbers = true)]
        ra: f64,
        #[arg(long, allow_negative_numbers = true)]
        dec: f64,
        #[arg(long, allow_negative_numbers = true)]
        radius_deg: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Cross-match local stores in process.
    Xmatch(XmatchArgs),
    /// Mining over a local store.
    Mine {
        #[command(subcommand)]
        task: MineTask,
    },
    /// Write deterministic synthetic catalogs with a ground-truth manifest.
    GenFixture {
        #[arg(long)]
        objects: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        movers: usize,
        #[arg(long, default_value_t = 0)]
        clusters: usize,
        #[arg(long, default_value_t = 50)]
        cluster_size: usize,
        /// Shared objects across sdss, first and twomass (default min(200, objects)).
        #[arg(long)]
        coincidences: Option<usize>,
        #[arg(long, default_value_t = 0)]
        bad_rows: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct StoreArgs {
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ZONE_HEIGHT_DEG)]
    zone_height_deg: f64,
    #[arg(long, default_value_t = DEFAULT_ROW_CAP)]
    row_cap: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    All,
    Best,
}

#[derive(Debug, Args)]
struct XmatchArgs {
    /// Store directories; the first is listed first in XMATCH(...).
    #[arg(long = "store", required = true)]
    stores: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_RADIUS_ARCSEC)]
    max_radius: f64,
    #[arg(long, value_enum, default_value_t = Mode::All)]
    mode: Mode,
    /// Portal-dialect condition appended as WHERE.
    #[arg(long = "where")]
    condition: Option<String>,
    /// A complete portal-dialect query; replaces the generated one.
    #[arg(long, conflicts_with_all = ["condition"])]
    query: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum MineTask {
    /// Object counts per (ra, dec) grid cell.
    Grid {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        cell_deg: f64,
        /// Node-dialect condition selecting the objects to count.
        #[arg(long)]
        cut: Option<String>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Friends-of-friends cluster labels.
    Fof {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        link_arcsec: f64,
        /// Only report clusters with at least this many members.
        #[arg(long, default_value_t = 1)]
        min_size: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Objects with few neighbors.
    Isolated {
        #[command(flatten)]
        store: StoreArgs,
        #[arg(long)]
        radius_arcsec: f64,
        #[arg(long, default_value_t = 0)]
        max_neighbors: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Pairs between two epochs displaced within a separation window.
    Movers {
        #[arg(long)]
        store_a: PathBuf,
        #[arg(long)]
        store_b: PathBuf,
        #[arg(long)]
        min_arcsec: f64,
        #[arg(long)]
        max_arcsec: f64,
        #[arg(long, default_value_t = DEFAULT_ZONE_HEIGHT_DEG)]
        zone_height_deg: f64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code)
        }
    }
}

fn init_logging() {
    let filter = EnvFilter::try_from_env("SKYFED_LOG").unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    Ok(tokio::runtime::Runtime::new()?)
}

async fn ctrl_c() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::warn!(error = %e, "cannot listen for interrupt; serving until killed");
        std::future::pending::<()>().await;
    }
}

fn read_query(q: String) -> Result<String, Failure> {
    if q != "-" {
        return Ok(q);
    }
    let mut text = String::new();
    std::io::stdin().read_to_string(&mut text)?;
    Ok(text)
}

fn open(args: &StoreArgs) -> Result<NodeEngine, Failure> {
    let (catalog, index) = open_store(&args.store, args.zone_height_deg)?;
    Ok(NodeEngine::new(catalog, index, args.row_cap))
}

fn open_catalog(dir: &Path, zone_height_deg: f64) -> Result<(Catalog, ZoneIndex), Failure> {
    Ok(open_store(dir, zone_height_deg)?)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Ingest {
            input,
            schema,
            out,
            zone_height_deg,
        } => ingest(&input, &schema, &out, zone_height_deg),
        Command::Export { store, out } => {
            let (catalog, _) = open_catalog(&store, DEFAULT_ZONE_HEIGHT_DEG)?;
            match out {
                Some(dir) => {
                    export_domestic(&catalog, &dir)?;
                    eprintln!("exported {} objects to {}", catalog.objects.len(), dir.display());
                }
                None => print!("{}", domestic_csv(&catalog)),
            }
            Ok(())
        }
        Command::Node { config } => {
            let config = NodeConfig::load(&config)?;
            runtime()?.block_on(skyfed_service::run_node(&config, ctrl_c()))?;
            Ok(())
        }
        Command::Portal { config } => {
            let config = PortalConfig::load(&config)?;
            runtime()?.block_on(skyfed_service::run_portal(&config, ctrl_c()))?;
            Ok(())
        }
        Command::Query { store, format, query } => {
            let text = read_query(query)?;
            let engine = open(&store)?;
            let table = engine.query(&text).map_err(|e| Failure::node(&text, e))?;
            emit(&table, format)
        }
        Command::Fedquery {
            portal,
            format,
            timeout_ms,
            query,
        } => {
            let text = read_query(query)?;
            let client = PortalClient::new(&portal, Duration::from_millis(timeout_ms))
                .map_err(|e| Failure::portal(&text, e))?;
            let table = runtime()?
                .block_on(client.fedquery(&text))
                .map_err(|e| Failure::portal(&text, e))?;
            emit(&table, format)
        }
        Command::Cone {
            store,
            ra,
            dec,
            radius_deg,
            format,
        } => {
            let engine = open(&store)?;
            let table = engine
                .cone(ra, dec, radius_deg)
                .map_err(|e| Failure::domain(format!("error: {e}")))?;
            emit(&table, format)
        }
        Command::Xmatch(args) => xmatch(args),
        Command::Mine { task } => mine(task),
        Command::GenFixture {
            objects,
            seed,
            movers,
            clusters,
            cluster_size,
            coincidences,
            bad_rows,
            out,
        } => {
            let spec = FixtureSpec {
                movers,
                clusters,
                cluster_size,
                coincidences,
                bad_rows,
                ..FixtureSpec::new(objects, seed)
            };
            let fixture = generate(&spec);
            fixture.write(&out)?;
            let m = &fixture.manifest;
            eprintln!(
                "wrote {} surveys to {} ({} movers, {} clusters, {} coincidences, {} bad rows)",
                fixture.files.len(),
                out.display(),
                m.movers.len(),
                m.clusters.len(),
                m.coincidences.len(),
                m.bad_rows
            );
            Ok(())
        }
    }
}

fn ingest(input: &Path, schema: &Path, out: &Path, zone_height_deg: f64) -> Result<(), Failure> {
    if !(zone_height_deg > 0.0 && zone_height_deg <= 180.0) {
        return Err(Failure::usage(format!("error: --zone-height-deg must be in (0, 180], got {zone_height_deg}")));
    }
    let schema = load_schema(schema)?;
    let (catalog, report) = ingest_csv(input, &schema)?;
    for r in &report.rejections {
        eprintln!("{}", serde_json::to_string(r).expect("rejection serializes"));
    }
    if report.accepted == 0 {
        return Err(Failure {
            code: EXIT_DOMAIN,
            message: format!("error: no rows accepted from {} ({} read)", input.display(), report.read),
        });
    }
    write_store(out, &catalog, &report, zone_height_deg)?;
    println!(
        "{}: accepted {} of {} rows ({} rejected) into {}",
        catalog.survey(),
        report.accepted,
        report.read,
        report.rejected,
        out.display()
    );
    Ok(())
}

fn xmatch(args: XmatchArgs) -> Result<(), Failure> {
    let mut nodes = Vec::with_capacity(args.stores.len());
    for dir in &args.stores {
        let (catalog, index) = open_catalog(dir, DEFAULT_ZONE_HEIGHT_DEG)?;
        let survey = catalog.survey().to_owned();
        if nodes.iter().any(|(s, _): &(String, _)| *s == survey) {
            return Err(Failure::usage(format!("error: survey {survey} given twice")));
        }
        let engine = Arc::new(NodeEngine::new(catalog, index, usize::MAX));
        let client: Arc<dyn NodeClient> = Arc::new(LocalNodeClient::new(engine));
        nodes.push((survey, client));
    }
    let text = match args.query {
        Some(q) => read_query(q)?,
        None => {
            let surveys: Vec<&str> = nodes.iter().map(|(s, _)| s.as_str()).collect();
            let mode = match args.mode {
                Mode::All => "all",
                Mode::Best => "best",
            };
            let mut q = format!(
                "SELECT * FROM XMATCH({}) WITH k = {:?}, max_radius = {:?}, mode = {mode}",
                surveys.join(", "),
                args.k,
                args.max_radius
            );
            if let Some(c) = &args.condition {
                q.push_str(" WHERE ");
                q.push_str(c);
            }
            q
        }
    };
    let fed = Federation::new(nodes, FederationSettings::default());
    let table = runtime()?
        .block_on(run_federated(&text, &fed))
        .map_err(|e| Failure::federated(&text, e))?;
    emit(&table, args.format)
}

fn mine(task: MineTask) -> Result<(), Failure> {
    match task {
        MineTask::Grid {
            store,
            cell_deg,
            cut,
            format,
        } => {
            let (catalog, index) = open_catalog(&store.store, store.zone_height_deg)?;
            let grid = GridSpec::new(cell_deg)?;
            let cells = grided_count(&catalog, &index, grid, cut.as_deref())?;
            emit(&output::grid_table(&cells, cell_deg), format)
        }
        MineTask::Fof {
            store,
            link_arcsec,
            min_size,
            format,
        } => {
            let (catalog, index) = open_catalog(&store.store, store.zone_height_deg)?;
            let labels = friends_of_friends(&catalog, &index, link_arcsec)?;
            emit(&output::cluster_table(&labels, min_size), format)
        }
        MineTask::Isolated {
            store,
            radius_arcsec,
            max_neighbors,
            format,
        } => {
            let (catalog, index) = open_catalog(&store.store, store.zone_height_deg)?;
            let ids = isolated_points(&catalog, &index, radius_arcsec, max_neighbors)?;
            emit(&output::id_table(&ids), format)
        }
        MineTask::Movers {
            store_a,
            store_b,
            min_arcsec,
            max_arcsec,
            zone_height_deg,
            format,
        } => {
            let (a, _) = open_catalog(&store_a, zone_height_deg)?;
            let (b, b_index) = open_catalog(&store_b, zone_height_deg)?;
            let found = moving_candidates(&a, &b, &b_index, min_arcsec, max_arcsec)?;
            emit(&output::mover_table(&found), format)
        }
    }
}
