//! `polycomp`: classify composition operators with polynomial symbols and
//! check the verdicts with a Monte-Carlo Carleson-box oracle.
//!
//! Machine output (JSON, CSV) goes to stdout or `--out`; summaries and
//! diagnostics go to stderr.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polycomp::carleson::{
    calibrate_set, parse_delta_grid, scaling_fit, CalibrationResult, CalibrationSet, CarlesonError, Importance, McConfig,
};
use polycomp::classify::{
    classify_boundedness_with, compactness_from, BoundednessVerdict, ClassifyConfig, OraclePolicy, Tolerances,
};
use polycomp::contact::find_contacts;
use polycomp::examples::{build_example, ExampleName, ExampleSpec};
use polycomp::polysym::{self_map_report, Symbol};
use serde::Serialize;

/// Slack allowed above modulus 1 in the self-map screen.
const SELF_MAP_MARGIN: f64 = 1e-9;

#[derive(Parser)]
#[command(name = "polycomp", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Boundedness verdict, optionally followed by compactness.
    Classify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: TolArgs,
        /// Also run the compactness tests.
        #[arg(long)]
        compactness: bool,
        /// Attach Monte-Carlo ratio trends when compactness is undetermined.
        #[arg(long, requires = "compactness")]
        oracle: bool,
        #[command(flatten)]
        mc: McArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// List contact points.
    Contacts {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Fit the scaling of box-preimage measures at a contact point.
    Verify {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        tol: TolArgs,
        #[command(flatten)]
        mc: McArgs,
        /// Constrained components, 1-based (e.g. `1,2`).
        #[arg(long, value_delimiter = ',', required = true)]
        constrained: Vec<usize>,
        /// Geometric δ grid `start:end:count`.
        #[arg(long, default_value = "1e-4:1e-2:9")]
        deltas: String,
        /// Which contact to anchor at (1-based, in report order). Defaults to
        /// the first contact touching every constrained component.
        #[arg(long)]
        contact: Option<usize>,
        /// Write the per-δ table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Check the sampler against planar sets with known area.
    Calibrate {
        /// Sets to run; all by default.
        #[arg(long, value_enum, value_delimiter = ',')]
        set: Vec<SetName>,
        /// Comma-separated δ values.
        #[arg(long, value_delimiter = ',', default_values_t = [1e-2, 1e-3])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Print the JSON of a library symbol.
    Example {
        name: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        params: Option<Vec<f64>>,
        #[command(flatten)]
        out: OutArgs,
    },
}

#[derive(Args)]
struct Source {
    /// Symbol JSON file.
    #[arg(long, conflicts_with = "example", required_unless_present = "example")]
    input: Option<PathBuf>,
    /// Library symbol name.
    #[arg(long)]
    example: Option<String>,
    /// Comma-separated parameters for `--example`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, requires = "example")]
    params: Option<Vec<f64>>,
}

#[derive(Args)]
struct TolArgs {
    #[arg(long, default_value_t = Tolerances::default().tol_contact)]
    tol_contact: f64,
    #[arg(long, default_value_t = Tolerances::default().tol_sig)]
    tol_sig: f64,
    #[arg(long, default_value_t = Tolerances::default().tol_dep)]
    tol_dep: f64,
    #[arg(long, default_value_t = Tolerances::default().tol_jac)]
    tol_jac: f64,
    /// Points per axis of the contact scan.
    #[arg(long, default_value_t = 64)]
    grid: usize,
}

#[derive(Args)]
struct McArgs {
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample uniformly on the whole torus.
    #[arg(long)]
    no_importance: bool,
}

#[derive(Args)]
struct OutArgs {
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetName {
    Hyperbolic,
    Saddle,
    Annulus,
}

enum Failure {
    Input(String),
    SelfMap(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::SelfMap(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::SelfMap(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<CarlesonError> for Failure {
    fn from(e: CarlesonError) -> Self {
        match e {
            CarlesonError::Jet(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

fn example_symbol(name: &str, params: Option<Vec<f64>>) -> Result<Symbol, Failure> {
    let name: ExampleName = name.parse().map_err(|e: polycomp::examples::ExampleError| {
        let known: Vec<&str> = ExampleName::ALL.iter().map(|n| n.as_str()).collect();
        Failure::Input(format!("{e}; known examples: {}", known.join(", ")))
    })?;
    let spec = match params {
        Some(p) => ExampleSpec::with_params(name, p),
        None => ExampleSpec::new(name),
    };
    build_example(&spec).map_err(|e| Failure::Input(e.to_string()))
}

fn load(src: &Source) -> Result<Symbol, Failure> {
    if let Some(path) = &src.input {
        let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        return Symbol::from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())));
    }
    let name = src.example.as_deref().unwrap_or_default();
    example_symbol(name, src.params.clone())
}

fn screen(s: &Symbol, grid: usize) -> Result<(), Failure> {
    let rep = self_map_report(s, grid.max(16), SELF_MAP_MARGIN, Default::default());
    if rep.pass {
        return Ok(());
    }
    let bad: Vec<String> = rep
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.pass)
        .map(|(j, c)| format!("component {} reaches |φ| = {:.12} at θ = {:?}", j + 1, c.max_modulus, c.argmax))
        .collect();
    Err(Failure::SelfMap(format!("not a self-map of the polydisc: {}", bad.join("; "))))
}

fn classify_config(t: &TolArgs) -> Result<ClassifyConfig, Failure> {
    let tolerances = Tolerances {
        tol_contact: t.tol_contact,
        tol_sig: t.tol_sig,
        tol_dep: t.tol_dep,
        tol_jac: t.tol_jac,
    };
    let all = [t.tol_contact, t.tol_sig, t.tol_dep, t.tol_jac];
    if all.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Failure::Input(format!("tolerances must be positive, got {all:?}")));
    }
    if t.grid < 16 {
        return Err(Failure::Input(format!("--grid must be at least 16, got {}", t.grid)));
    }
    Ok(ClassifyConfig {
        tolerances,
        grid_n: t.grid,
        ..ClassifyConfig::default()
    })
}

fn mc_config(m: &McArgs) -> McConfig {
    McConfig {
        samples: m.samples,
        seed: m.seed,
        importance: if m.no_importance { Importance::Plain } else { Importance::Auto },
        ..McConfig::default()
    }
}

fn check_dim(s: &Symbol) -> Result<(), Failure> {
    if (2..=3).contains(&s.dim()) {
        Ok(())
    } else {
        Err(Failure::Input(format!("dimension {} is not supported (need 2 or 3)", s.dim())))
    }
}

fn emit<T: Serialize>(value: &T, out: &OutArgs) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Numerical(e.to_string()))?;
    text.push('\n');
    write_text(&text, out.out.as_ref())
}

fn write_text(text: &str, path: Option<&PathBuf>) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct ClassifyOutput<'a> {
    boundedness: &'a polycomp::classify::BoundednessReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    compactness: Option<polycomp::classify::CompactnessReport>,
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Classify {
            source,
            tol,
            compactness,
            oracle,
            mc,
            out,
        } => {
            let s = load(&source)?;
            check_dim(&s)?;
            screen(&s, tol.grid)?;
            let cfg = classify_config(&tol)?;
            let contacts = find_contacts(&s, &cfg.contact_config());
            let b = classify_boundedness_with(&s, contacts, &cfg);
            eprintln!("boundedness: {:?} ({} contact(s))", b.verdict, b.contacts.len());
            for (i, c) in b.contacts.iter().enumerate() {
                let case = c.case.map(|x| format!("{x:?}")).unwrap_or_else(|| "-".into());
                eprintln!(
                    "  contact {}: I = {:?}, dim {}, case {case}, s = {:?}, r = {:?}",
                    i + 1,
                    c.record.index_set.iter().map(|k| k + 1).collect::<Vec<_>>(),
                    c.record.component_dim,
                    c.s,
                    c.r
                );
            }
            let comp = compactness.then(|| {
                let policy = if oracle { OraclePolicy::Advisory } else { OraclePolicy::Off };
                let r = compactness_from(&s, &b, &cfg, policy, &mc_config(&mc));
                eprintln!("compactness: {:?}", r.verdict);
                r
            });
            emit(
                &ClassifyOutput {
                    boundedness: &b,
                    compactness: comp,
                },
                &out,
            )?;
            if b.verdict == BoundednessVerdict::Invalid {
                return Err(Failure::Numerical(b.diagnostics.join("; ")));
            }
            Ok(())
        }
        Cmd::Contacts { source, tol, out } => {
            let s = load(&source)?;
            check_dim(&s)?;
            screen(&s, tol.grid)?;
            let cfg = classify_config(&tol)?;
            let contacts = find_contacts(&s, &cfg.contact_config());
            eprintln!("{} contact(s)", contacts.len());
            emit(&contacts, &out)
        }
        Cmd::Verify {
            source,
            tol,
            mc,
            constrained,
            deltas,
            contact,
            csv,
            out,
        } => {
            let s = load(&source)?;
            check_dim(&s)?;
            screen(&s, tol.grid)?;
            let cfg = classify_config(&tol)?;
            let d = s.dim();
            if constrained.is_empty() || constrained.iter().any(|&k| k == 0 || k > d) {
                return Err(Failure::Input(format!("--constrained entries must lie in 1..={d}")));
            }
            let constrained: Vec<usize> = constrained.iter().map(|k| k - 1).collect();
            let deltas = parse_delta_grid(&deltas)?;
            let contacts = find_contacts(&s, &cfg.contact_config());
            let anchor = match contact {
                Some(i) => contacts
                    .get(i.wrapping_sub(1))
                    .ok_or_else(|| Failure::Input(format!("--contact {i}: only {} contact(s) found", contacts.len())))?,
                None => contacts
                    .iter()
                    .find(|c| constrained.iter().all(|k| c.index_set.contains(k)))
                    .ok_or_else(|| Failure::Input("no contact point touches every constrained component".into()))?,
            };
            let fit = scaling_fit(&s, anchor, &constrained, &deltas, &mc_config(&mc))?;
            eprintln!(
                "slope {:.3} ± {:.3} (budget {}), hint {}",
                fit.slope,
                fit.slope_stderr,
                fit.budget_slope,
                serde_json::to_value(fit.hint).map_err(|e| Failure::Numerical(e.to_string()))?
            );
            for f in &fit.flags {
                eprintln!("  note: {f}");
            }
            if let Some(p) = &csv {
                write_text(&fit.to_csv(), Some(p))?;
            }
            emit(&fit, &out)
        }
        Cmd::Calibrate {
            set,
            deltas,
            samples,
            seed,
            csv,
            out,
        } => {
            let names = if set.is_empty() { vec![SetName::Hyperbolic, SetName::Saddle, SetName::Annulus] } else { set };
            let mut sets = Vec::new();
            for n in names {
                match n {
                    SetName::Hyperbolic => sets.push(CalibrationSet::Hyperbolic),
                    SetName::Saddle => sets.push(CalibrationSet::Saddle { a: 1.0, b: 2.0 }),
                    SetName::Annulus => {
                        sets.push(CalibrationSet::Annulus { a: 0.5 });
                        sets.push(CalibrationSet::Annulus { a: -0.02 });
                    }
                }
            }
            let cfg = McConfig {
                samples,
                seed,
                ..McConfig::default()
            };
            let mut rows: Vec<CalibrationResult> = Vec::new();
            for st in &sets {
                for &d in &deltas {
                    rows.push(calibrate_set(*st, d, &cfg)?);
                }
            }
            eprintln!("{:<10} {:>9} {:>13} {:>13} {:>11} {:>6}", "set", "delta", "estimate", "reference", "stderr", "z");
            for r in &rows {
                eprintln!(
                    "{:<10} {:>9.1e} {:>13.6e} {:>13.6e} {:>11.3e} {:>6.2}",
                    r.set.label(),
                    r.delta,
                    r.estimate.mean,
                    r.reference,
                    r.estimate.stderr,
                    r.z_score
                );
            }
            if let Some(p) = &csv {
                let mut text = String::from("set,delta,estimate,stderr,reference,z_score,consistent\n");
                for r in &rows {
                    text.push_str(&format!(
                        "{},{:e},{:e},{:e},{:e},{},{}\n",
                        r.set.label(),
                        r.delta,
                        r.estimate.mean,
                        r.estimate.stderr,
                        r.reference,
                        r.z_score,
                        r.consistent
                    ));
                }
                write_text(&text, Some(p))?;
            }
            emit(&rows, &out)
        }
        Cmd::Example { name, params, out } => {
            let s = example_symbol(&name, params)?;
            emit(&s.to_json(), &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
