//! Command-line surface: argument definitions and the code that turns them
//! into recorded configurations, runs them and writes the results.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sipm_core::fitting::{FitConfig, Objective};
use sipm_core::models::CrosstalkModelKind;
use sipm_core::sources::{Source, ThermalSource};
use sipm_core::DetectorGeometry;

use crate::commands::{execute, Outputs};
use crate::config::{FitRunConfig, Placement, RunConfig, SimulateConfig, Sweep, SweepConfig};
use crate::error::{CliError, CliResult};
use crate::exec::Parallel;
use crate::grids;
use crate::io::{embedded_config, parse_histogram, read_file, write_file, Format};

#[derive(Debug, Parser)]
#[command(name = "sipm", version, about = "Monte Carlo simulation of crosstalk and saturation in SiPM arrays")]
pub struct Cli {
    /// Worker threads (default: SIPM_THREADS, then one per core).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one pulse and draw the array.
    Simulate(SimulateArgs),
    /// Run ensembles over a parameter grid and write a table.
    Sweep(SweepArgs),
    /// Fit crosstalk models to a photon-number histogram.
    Fit(FitArgs),
    /// Regenerate an output file from the configuration embedded in it.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GeometryArgs {
    #[arg(long, default_value_t = 10)]
    pub rows: usize,
    #[arg(long, default_value_t = 10)]
    pub cols: usize,
}

impl GeometryArgs {
    fn build(&self) -> CliResult<DetectorGeometry> {
        Ok(DetectorGeometry::new(self.rows, self.cols)?)
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct PlacementArgs {
    /// Number of distinct randomly placed triggers.
    #[arg(long)]
    pub n_trg: Option<usize>,
    /// Trigger cell as row,col; repeat for several.
    #[arg(long = "seed-cell", value_parser = grids::cell)]
    pub seed_cells: Vec<(usize, usize)>,
    /// Fixed number of photons hitting the array.
    #[arg(long)]
    pub photons: Option<u64>,
    /// Photon source: thermal:MEAN or fixed:N.
    #[arg(long, value_parser = grids::source)]
    pub source: Option<Source>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub geometry: GeometryArgs,
    #[command(flatten)]
    pub placement: PlacementArgs,
    /// Detection efficiency (photon placements only).
    #[arg(long, default_value_t = 1.0)]
    pub eta: f64,
    /// Nearest-neighbour crosstalk probability.
    #[arg(long, default_value_t = 0.0)]
    pub epsilon_nn: f64,
    /// Random seed (default: a fresh random value, recorded in the output).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Where to write the JSON record of the run.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Ct,
    Cluster,
    Critical,
    Stages,
    Saturation,
    Linearity,
    Histogram,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: SweepKind,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Trigger counts: a:b, a:b:step or a list (ct, cluster, stages).
    #[arg(long)]
    pub n_trg: Option<String>,
    /// Crosstalk probabilities: a:b:step or a list.
    #[arg(long)]
    pub epsilon_nn: Option<String>,
    /// Detection efficiencies: a:b:step or a list.
    #[arg(long)]
    pub eta: Option<String>,
    /// Photon numbers: a:b, a:b:step or a list.
    #[arg(long)]
    pub photons: Option<String>,
    /// Photon source for histograms: thermal:MEAN or fixed:N.
    #[arg(long, value_parser = grids::source)]
    pub source: Option<Source>,
    /// Runs per grid point (pulses for histograms).
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Output file (default: standard output).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelChoice {
    FullMc,
    OneStage,
    Recursive,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveChoice {
    Pearson,
    Poisson,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Histogram CSV with header n,count.
    #[arg(long)]
    pub histogram: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub model: ModelChoice,
    #[command(flatten)]
    pub geometry: GeometryArgs,
    /// Simulated runs behind the lattice model's crosstalk kernel.
    #[arg(long)]
    pub mc_runs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "pearson")]
    pub objective: ObjectiveChoice,
    /// Mean photon number search range lo:hi:points.
    #[arg(long, value_parser = grids::param_range)]
    pub mean_n: Option<sipm_core::fitting::ParamRange>,
    /// Lattice-model crosstalk range lo:hi:points.
    #[arg(long, value_parser = grids::param_range)]
    pub epsilon_nn: Option<sipm_core::fitting::ParamRange>,
    /// Baseline-model crosstalk range lo:hi:points.
    #[arg(long, value_parser = grids::param_range)]
    pub epsilon: Option<sipm_core::fitting::ParamRange>,
    /// Known mean photons per pulse; enables the efficiency estimate.
    #[arg(long)]
    pub photon_flux: Option<f64>,
    /// Ignore pile-up of photons on one cell in the baseline models.
    #[arg(long)]
    pub no_occupancy_loss: bool,
    /// Where to write the JSON fit results (default: not written).
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Where to write the model-versus-data table.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Format of the overlay table.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A file written by simulate, sweep or fit.
    pub file: PathBuf,
    /// Compare the regenerated bytes with the file instead of printing them.
    #[arg(long)]
    pub check: bool,
    /// Write the regenerated file here instead of standard output.
    #[arg(long, short, conflicts_with = "check")]
    pub output: Option<PathBuf>,
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn usage<T>(r: Result<T, String>, flag: &str) -> CliResult<T> {
    r.map_err(|e| CliError::Usage(format!("--{flag}: {e}")))
}

fn single(values: Vec<f64>, flag: &str) -> CliResult<f64> {
    match values.as_slice() {
        [v] => Ok(*v),
        _ => Err(CliError::Usage(format!("--{flag} takes a single value for this sweep"))),
    }
}

impl SimulateArgs {
    pub fn config(&self) -> CliResult<RunConfig> {
        let p = &self.placement;
        let placement = if let Some(n_trg) = p.n_trg {
            Placement::Triggers { n_trg }
        } else if !p.seed_cells.is_empty() {
            Placement::Cells {
                cells: p.seed_cells.clone(),
            }
        } else if let Some(n_photons) = p.photons {
            Placement::Photons { n_photons }
        } else if let Some(source) = p.source {
            Placement::Source { source }
        } else {
            return Err(CliError::Usage("choose --n-trg, --seed-cell, --photons or --source".into()));
        };
        Ok(RunConfig::Simulate(SimulateConfig {
            geometry: self.geometry.build()?,
            eta: self.eta,
            epsilon_nn: self.epsilon_nn,
            seed: seed_or_random(self.seed),
            placement,
        }))
    }
}

impl SweepArgs {
    pub fn config(&self) -> CliResult<RunConfig> {
        let geometry = self.geometry.build()?;
        let floats = |v: &Option<String>, flag: &str, default: &str| usage(grids::f64_grid(v.as_deref().unwrap_or(default)), flag);
        let n_trg = || -> CliResult<Vec<usize>> {
            let all = format!("1:{}", geometry.cells());
            usage(grids::usize_grid(self.n_trg.as_deref().unwrap_or(&all)), "n-trg")
        };
        let photons = |default: &str| usage(grids::u64_grid(self.photons.as_deref().unwrap_or(default)), "photons");
        let (sweep, default_runs) = match self.kind {
            SweepKind::Ct => (
                Sweep::Ct {
                    n_trg: n_trg()?,
                    epsilon_nn: floats(&self.epsilon_nn, "epsilon-nn", "0.05,0.5,1")?,
                },
                10_000,
            ),
            SweepKind::Cluster => (
                Sweep::Cluster {
                    n_trg: n_trg()?,
                    epsilon_nn: floats(&self.epsilon_nn, "epsilon-nn", "0.01:0.08:0.01")?,
                },
                10_000,
            ),
            SweepKind::Stages => (
                Sweep::Stages {
                    n_trg: n_trg()?,
                    epsilon_nn: floats(&self.epsilon_nn, "epsilon-nn", "0.01:0.08:0.01")?,
                },
                10_000,
            ),
            SweepKind::Critical => (
                Sweep::Critical {
                    epsilon_nn: floats(&self.epsilon_nn, "epsilon-nn", "0.01:0.08:0.01")?,
                },
                10_000,
            ),
            SweepKind::Saturation => (
                Sweep::Saturation {
                    eta: floats(&self.eta, "eta", "0.1:1:0.1")?,
                    n_photons: photons("10,20,60,100")?,
                    epsilon_nn: single(floats(&self.epsilon_nn, "epsilon-nn", "0")?, "epsilon-nn")?,
                },
                10_000,
            ),
            SweepKind::Linearity => (
                Sweep::Linearity {
                    n_photons: photons("100")?,
                    eta: floats(&self.eta, "eta", "0.01:1:0.01")?,
                },
                10_000,
            ),
            SweepKind::Histogram => (
                Sweep::Histogram {
                    source: self
                        .source
                        .unwrap_or_else(|| ThermalSource::new(2.0).expect("valid mean").into()),
                    eta: single(floats(&self.eta, "eta", "1")?, "eta")?,
                    epsilon_nn: single(floats(&self.epsilon_nn, "epsilon-nn", "0.05")?, "epsilon-nn")?,
                },
                1_000_000,
            ),
        };
        Ok(RunConfig::Sweep(SweepConfig {
            geometry,
            runs: self.runs.unwrap_or(default_runs),
            seed: seed_or_random(self.seed),
            format: self.format,
            sweep,
        }))
    }
}

impl FitArgs {
    pub fn config(&self) -> CliResult<RunConfig> {
        let path = self.histogram.display().to_string();
        let text = String::from_utf8(read_file(&self.histogram)?)
            .map_err(|_| CliError::parse(path.as_str(), 1, "file is not UTF-8"))?;
        let data = parse_histogram(&text, &path)?;
        let models: &[CrosstalkModelKind] = match self.model {
            ModelChoice::FullMc => &[CrosstalkModelKind::FullMc],
            ModelChoice::OneStage => &[CrosstalkModelKind::OneStage],
            ModelChoice::Recursive => &[CrosstalkModelKind::Recursive],
            ModelChoice::All => &CrosstalkModelKind::ALL,
        };
        let seed = seed_or_random(self.seed);
        let fits = models
            .iter()
            .map(|&model| {
                let mut c = FitConfig::new(model).with_seed(seed);
                if let Some(r) = self.mean_n {
                    c.mean_n = r;
                }
                let eps = if model == CrosstalkModelKind::FullMc { self.epsilon_nn } else { self.epsilon };
                if let Some(r) = eps {
                    c.epsilon = r;
                }
                if let Some(n) = self.mc_runs {
                    c.mc_runs = n;
                }
                c.objective = match self.objective {
                    ObjectiveChoice::Pearson => Objective::Pearson,
                    ObjectiveChoice::Poisson => Objective::Poisson,
                };
                c.photon_flux = self.photon_flux;
                c.occupancy_loss = !self.no_occupancy_loss;
                c.validate()?;
                Ok(c)
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(RunConfig::Fit(FitRunConfig {
            geometry: self.geometry.build()?,
            histogram_path: path,
            counts: data.counts().to_vec(),
            overlay_format: self.format,
            fits,
        }))
    }
}

fn write_or_print(path: Option<&PathBuf>, bytes: &[u8], out: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => out.write_all(bytes).map_err(|e| CliError::io("<stdout>", e)),
    }
}

fn print(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
}

/// Runs a parsed command line, writing console output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let exec = Parallel::new(cli.threads)?;
    match cli.command {
        Command::Simulate(args) => {
            let outputs = execute(&args.config()?, &exec)?;
            print(out, &outputs.text)?;
            if let Some(p) = &args.output {
                write_file(p, &outputs.artifacts[0].bytes)?;
            }
        }
        Command::Sweep(args) => {
            let outputs = execute(&args.config()?, &exec)?;
            write_or_print(args.output.as_ref(), &outputs.artifacts[0].bytes, out)?;
            if args.output.is_some() {
                print(out, &outputs.text)?;
            }
        }
        Command::Fit(args) => {
            let outputs = execute(&args.config()?, &exec)?;
            print(out, &outputs.text)?;
            if let Some(p) = &args.output {
                write_file(p, &outputs.artifacts[0].bytes)?;
            }
            if let Some(p) = &args.overlay {
                write_file(p, &outputs.artifacts[1].bytes)?;
            }
        }
        Command::Replay(args) => {
            let (bytes, regenerated) = replay(&args.file, &exec)?;
            if args.check {
                if bytes != regenerated {
                    return Err(CliError::Mismatch(format!(
                        "{}: regenerated output differs from the file",
                        args.file.display()
                    )));
                }
                print(out, &format!("{}: identical\n", args.file.display()))?;
            } else {
                write_or_print(args.output.as_ref(), &regenerated, out)?;
            }
        }
    }
    Ok(())
}

/// Reads `file`, reruns its embedded configuration and returns the original
/// bytes with the regenerated ones.
pub fn replay(file: &std::path::Path, exec: &Parallel) -> CliResult<(Vec<u8>, Vec<u8>)> {
    let bytes = read_file(file)?;
    let path = file.display().to_string();
    let (role, config) = embedded_config(&bytes, &path)?;
    let outputs: Outputs = execute(&config, exec)?;
    let artifact = outputs
        .artifact(&role)
        .ok_or_else(|| CliError::parse(path.as_str(), 1, format!("unknown artifact kind {role:?}")))?;
    Ok((bytes, artifact.bytes.clone()))
}
