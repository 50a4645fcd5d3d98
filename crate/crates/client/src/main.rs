//! `coilstack` command line. Every subcommand except `serve` talks to the
//! service over HTTP: a remote one given by `--server`, otherwise an
//! in-process server on an ephemeral port.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use coilstack_client::{device_map, spawn_embedded, Client, ClientError};
use coilstack_core::forcemap::{load_map, save_map, ForceMapGrid};
use coilstack_core::scan::{Plane, ScanMode};
use coilstack_core::scene::Scene;
use coilstack_core::simloop::{LoopConfig, Trajectory};
use coilstack_core::{CoilStack, CurrentVector, MagnetSpec, Vec3};
use coilstack_server::{AppState, LiveConfig, SimulateRequest};
use tokio::net::TcpListener;

#[derive(Parser, Debug)]
#[command(name = "coilstack", version, about = "Coil-stack magnetic haptic display simulator")]
struct Cli {
    /// Base URL of a running server. Without it an embedded server is used.
    #[arg(long, global = true)]
    server: Option<String>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Build the per-coil force map and write it as an FMAP1 file.
    BuildMap {
        #[arg(long)]
        out: PathBuf,
        /// Radial grid step in metres.
        #[arg(long)]
        dr: Option<f64>,
        /// Axial grid step in metres.
        #[arg(long)]
        dz: Option<f64>,
    },
    /// Flux density at a point, or an |B| raster of a vertical plane.
    Field {
        /// Six coil currents in amperes.
        #[arg(long, value_parser = parse_currents, allow_hyphen_values = true)]
        currents: CurrentVector,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        point: Option<Vec3>,
        /// Plane of a raster instead of a point value.
        #[arg(long)]
        slice: Option<Plane>,
        /// Raster size per side.
        #[arg(long, default_value_t = 64)]
        n: usize,
        /// CSV destination of the raster; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Peak flux density or force over the workspace.
    ScanMax {
        #[arg(long)]
        mode: ScanMode,
        #[arg(long, value_parser = parse_currents, allow_hyphen_values = true)]
        currents: Option<CurrentVector>,
    },
    /// Duty cycles that render a vertical force at a finger position.
    Allocate {
        #[arg(long, allow_hyphen_values = true)]
        force: f64,
        #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
        pos: Vec3,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        tolerance: Option<f64>,
    },
    /// Run the haptic loop over a recorded trajectory and log it as CSV.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        traj: PathBuf,
        #[arg(long)]
        map: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Loop configuration as JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Serve the HTTP API and the live loop.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        map: Option<PathBuf>,
        /// Initial scene; the demo sphere when absent.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

fn parse_list<const N: usize>(s: &str) -> Result<[f64; N], String> {
    let values = s
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", v.len()))
}

fn parse_currents(s: &str) -> Result<CurrentVector, String> {
    parse_list::<6>(s).map(CurrentVector)
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    parse_list::<3>(s).map(|[x, y, z]| Vec3::new(x, y, z))
}

fn read_map(path: Option<&Path>) -> anyhow::Result<ForceMapGrid> {
    match path {
        Some(p) => load_map(p).with_context(|| format!("loading map {}", p.display())),
        None => Ok(device_map()?),
    }
}

/// Client for the remote server, or for an embedded one holding `map`.
async fn connect(server: Option<&str>, map: Option<&Path>) -> anyhow::Result<Client> {
    if let Some(url) = server {
        if let Some(p) = map {
            eprintln!("note: --map {} ignored, the server uses its own map", p.display());
        }
        return Ok(Client::new(url));
    }
    let (addr, _task) = spawn_embedded(read_map(map)?, None).await?;
    Ok(Client::new(format!("http://{addr}")))
}

fn slice_csv(slice: &coilstack_core::scan::FieldSlice) -> String {
    let mut out = String::from("u,z,b\n");
    for row in 0..slice.n {
        for col in 0..slice.n {
            let b = slice.values[row * slice.n + col];
            writeln!(out, "{:.8e},{:.8e},{:.8e}", slice.u_at(col), slice.z_at(row), b).unwrap();
        }
    }
    out
}

async fn run(cli: Cli) -> anyhow::Result<()> {
    let server = cli.server.as_deref();
    match cli.command {
        Cmd::BuildMap { out, dr, dz } => {
            let map = connect(server, None).await?.build_map(dr, dz).await?;
            save_map(&map, &out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "wrote {} ({} x {} nodes, max |g| {:.4} N)",
                out.display(),
                map.grid.nr,
                map.grid.nz,
                map.max_abs()
            );
        }
        Cmd::Field { currents, point, slice, n, out } => {
            let client = connect(server, None).await?;
            match (point, slice) {
                (_, Some(plane)) => {
                    let csv = slice_csv(&client.field_slice(currents, plane, n).await?);
                    match out {
                        Some(path) => fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?,
                        None => print!("{csv}"),
                    }
                }
                (Some(p), None) => {
                    let b = client.field(currents, p).await?;
                    println!("b_r {:.6e} T  b_z {:.6e} T  |B| {:.6e} T", b.b_r, b.b_z, b.magnitude);
                }
                (None, None) => bail!("field needs --point or --slice"),
            }
        }
        Cmd::ScanMax { mode, currents } => {
            let currents = match (mode, currents) {
                (ScanMode::SingleCoil, c) => c.unwrap_or(CurrentVector::ZERO),
                (_, Some(c)) => c,
                (_, None) => bail!("--currents is required for {mode:?} scans"),
            };
            let res = connect(server, None).await?.scan_max(mode, currents).await?;
            let m = res.max;
            let (value, unit) = match mode {
                ScanMode::Flux => (m.value.abs() * 1e3, "mT"),
                _ => (m.value.abs(), "N"),
            };
            let height = if mode == ScanMode::SingleCoil { "dz" } else { "z" };
            println!(
                "max {value:.3} {unit} at r = {:.1} mm, {height} = {:.1} mm",
                m.r * 1e3,
                m.z * 1e3
            );
        }
        Cmd::Allocate { force, pos, map, tolerance } => {
            let client = connect(server, map.as_deref()).await?;
            let res = client.allocate(force, pos, tolerance).await?;
            let line: Vec<String> = res.duties.0.iter().map(|d| d.to_string()).collect();
            println!("{}", line.join(" "));
        }
        Cmd::Simulate { scene, traj, map, out, seed, config } => {
            let scene = Scene::load(&scene).with_context(|| format!("loading scene {}", scene.display()))?;
            let trajectory =
                Trajectory::load(&traj).with_context(|| format!("loading trajectory {}", traj.display()))?;
            let mut config: LoopConfig = match config {
                Some(p) => serde_json::from_str(&fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing config {}", p.display()))?,
                None => LoopConfig::default(),
            };
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let client = connect(server, map.as_deref()).await?;
            let csv = client.simulate(&SimulateRequest { scene, trajectory, config }).await?;
            fs::write(&out, &csv).with_context(|| format!("writing {}", out.display()))?;
            eprintln!("wrote {} ticks to {}", csv.lines().count().saturating_sub(1), out.display());
        }
        Cmd::Serve { port, host, map, scene } => {
            tracing_subscriber::fmt()
                .with_env_filter(
                    tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
                )
                .init();
            let mut live = LiveConfig::default();
            if let Some(p) = scene {
                live.scene = Scene::load(&p).with_context(|| format!("loading scene {}", p.display()))?;
            }
            let map = read_map(map.as_deref())?;
            let state = AppState::new(CoilStack::device(), MagnetSpec::n35(), map.into()).with_live(live)?;
            let listener = TcpListener::bind((host.as_str(), port))
                .await
                .with_context(|| format!("binding {host}:{port}"))?;
            println!("listening on http://{}", listener.local_addr()?);
            coilstack_server::serve(listener, state).await?;
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(ClientError::Api { body, .. }) = e.downcast_ref::<ClientError>() {
                if let Some(d) = &body.duties {
                    eprintln!("best-effort duties: {:?}", d.0);
                }
            }
            ExitCode::FAILURE
        }
    }
}
