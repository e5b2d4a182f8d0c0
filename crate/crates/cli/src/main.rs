use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ftcdim::dimension::perron_measure;
use ftcdim::ftc::{wsc_multiplicity_probe, Limits};
use ftcdim::model_io::{lau_ngai, preset, read_model, ModelFile};
use ftcdim::render::{chart_push, export, generate_points, write_file, ChartMap, ExportFormat};
use ftcdim::report::{
    analyze, explore_model, AnalyzeReport, AutomatonReport, DimensionReport, MeasureReport,
};
use ftcdim::verify::{verify_model, VerifyOptions};
use ftcdim::{Error, Field, QuadScalar, Result};

/// Finite type neighborhood automata and Hausdorff dimension of
/// self-similar and graph-directed sets.
#[derive(Parser)]
#[command(name = "ftcdim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Types, weighted incidence matrix and dimension.
    Analyze(Common),
    /// The neighborhood-type automaton only.
    Types(Common),
    /// Solve λ_α = 1.
    Dimension {
        #[command(flatten)]
        common: Common,
        /// Also write `A_α` at the solved α as long-format CSV.
        #[arg(long)]
        matrix_csv: Option<PathBuf>,
    },
    /// Cylinder measure of every reduced-graph vertex to a depth.
    Measure {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 4)]
        depth: usize,
    },
    /// Point cloud of the attractor, optionally pushed through a chart.
    Render {
        #[command(flatten)]
        common: Common,
        /// identity, sphere or torus; defaults to the model's chart.
        #[arg(long)]
        chart: Option<String>,
        #[arg(long)]
        max_diameter: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv, ply or svg; inferred from the output extension, else csv.
        #[arg(long)]
        format: Option<String>,
    },
    /// Largest stopping-family multiplicity at sampled attractor points.
    Wsc {
        #[command(flatten)]
        common: Common,
        /// Stopping parameter in model syntax, e.g. `1/8`.
        #[arg(long)]
        b: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Run every invariant check on the model; exits 3 on any failure.
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON model file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    model: Option<PathBuf>,
    /// Built-in model: sierpinski, lau_ngai, golden_gasket, torus_gifs.
    #[arg(long)]
    preset: Option<String>,
    /// lau_ngai parameter ρ.
    #[arg(long, requires = "preset")]
    rho: Option<String>,
    /// lau_ngai parameter r.
    #[arg(long, requires = "preset")]
    r: Option<String>,
    #[arg(long, default_value_t = 256)]
    max_types: usize,
    #[arg(long, default_value_t = 32)]
    max_level: usize,
    #[arg(long, default_value_t = 1_000_000)]
    vertex_budget: usize,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 2)]
    verify_depth: usize,
    /// Structured output.
    #[arg(long)]
    json: bool,
    /// Reserved; every computation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn limits(&self) -> Limits {
        Limits {
            max_types: self.max_types,
            max_level: self.max_level,
            vertex_budget: self.vertex_budget,
            verify_depth: self.verify_depth,
        }
    }

    fn load(&self) -> Result<ModelFile> {
        if let Some(path) = &self.model {
            return read_model(path);
        }
        let name = self.preset.as_deref().unwrap_or_default();
        if name == "lau_ngai" && (self.rho.is_some() || self.r.is_some()) {
            let rho = parse_parameter(self.rho.as_deref().unwrap_or("1/3"))?;
            let r = parse_parameter(self.r.as_deref().unwrap_or("1/3"))?;
            return lau_ngai(rho, r);
        }
        if self.rho.is_some() || self.r.is_some() {
            return Err(Error::model(format!(
                "--rho and --r apply to lau_ngai only, not {name}"
            )));
        }
        preset(name)
    }
}

/// A scalar in whatever field its radical names.
fn parse_parameter(text: &str) -> Result<QuadScalar> {
    let field = match text.find("sqrt(") {
        Some(i) => {
            let digits: String = text[i + 5..]
                .chars()
                .take_while(char::is_ascii_digit)
                .collect();
            Field::new(digits.parse().ok())?
        }
        None => Field::Rational,
    };
    Ok(QuadScalar::parse(text, field)?)
}

/// Standard output; a closed pipe ends the write quietly.
fn write_stdout(s: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(s.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn emit<T: Serialize>(json: bool, value: &T, text: impl FnOnce(&T) -> String) -> Result<()> {
    if json {
        let s = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
        write_stdout(&(s + "\n"))
    } else {
        write_stdout(&text(value))
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(c) => {
            let model = c.load()?;
            let analysis = analyze(&model, &c.limits(), c.tol)?;
            emit(
                c.json,
                &AnalyzeReport::new(&model, &analysis)?,
                AnalyzeReport::to_text,
            )
        }
        Command::Types(c) => {
            let model = c.load()?;
            let (system, automaton) = explore_model(&model, &c.limits())?;
            emit(
                c.json,
                &AutomatonReport::new(&system, &automaton),
                AutomatonReport::to_text,
            )
        }
        Command::Dimension {
            common: c,
            matrix_csv,
        } => {
            let model = c.load()?;
            let analysis = analyze(&model, &c.limits(), c.tol)?;
            if let Some(path) = matrix_csv {
                write_file(&path, &analysis.matrix.to_csv(analysis.dimension.alpha))?;
            }
            emit(
                c.json,
                &DimensionReport::new(&analysis.matrix, &analysis.dimension)?,
                DimensionReport::to_text,
            )
        }
        Command::Measure { common: c, depth } => {
            let model = c.load()?;
            let a = analyze(&model, &c.limits(), c.tol)?;
            let table = perron_measure(
                &a.system,
                &a.automaton,
                &a.dimension,
                depth,
                c.vertex_budget,
            )?;
            emit(c.json, &MeasureReport::new(&table), MeasureReport::to_text)
        }
        Command::Render {
            common: c,
            chart,
            max_diameter,
            out,
            format,
        } => {
            let model = c.load()?;
            let system = model.build_system()?;
            let chart: ChartMap = match chart {
                Some(s) => s.parse()?,
                None => model.chart(),
            };
            let format: ExportFormat = match (&format, &out) {
                (Some(f), _) => f.parse()?,
                (None, Some(p)) => p
                    .extension()
                    .and_then(|e| e.to_str())
                    .unwrap_or("csv")
                    .parse()?,
                (None, None) => ExportFormat::Csv,
            };
            let points = generate_points(&system, max_diameter, c.vertex_budget)?;
            let pushed = chart_push(&points, chart).map_err(|e| Error::model(e.to_string()))?;
            let body = export(&pushed, format, system.graph_vertices() > 1)?;
            match out {
                Some(path) => {
                    write_file(&path, &body)?;
                    eprintln!("{} points written to {}", pushed.len(), path.display());
                    Ok(())
                }
                None => write_stdout(&body),
            }
        }
        Command::Wsc {
            common: c,
            b,
            samples,
        } => {
            let model = c.load()?;
            let system = model.build_system()?;
            let b = QuadScalar::parse(&b, model.field)?;
            let probe = wsc_multiplicity_probe(&system, &b, samples, 7, c.vertex_budget)?;
            emit(c.json, &probe, |p| {
                format!(
                    "b: {}\nfamily size: {}\nsamples: {}\nmax multiplicity: {}\n",
                    p.b, p.family_size, p.samples, p.max_multiplicity
                )
            })
        }
        Command::Verify(c) => {
            let model = c.load()?;
            let opts = VerifyOptions {
                limits: c.limits(),
                tol: c.tol,
                ..VerifyOptions::default()
            };
            let report = verify_model(&model, &opts)?;
            emit(c.json, &report, |r| r.to_text())?;
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Verification(format!(
                    "{} of {} checks failed",
                    report.failures(),
                    report.checks.len()
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
