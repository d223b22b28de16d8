//! Command-line front end. [`run`] parses arguments, dispatches, writes to the given sink
//! and returns the process exit code.

use std::ffi::OsString;
use std::io::{self, Read, Write};

use bottrig::classifier::{bundles_isomorphic, IsoCertificate};
use bottrig::extension::{enumerate_algebra_isomorphisms, extension_condition, ExtensionOutcome, HirzebruchBundleData};
use bottrig::fiber::{diffeo_type, hirzebruch_table, DiffeoType, FiberAutomorphism, TableRow};
use bottrig::harness::{
    census, min_matrix_bound, verify_main_theorem, verify_automorphism_groups, CensusReport, RigidityReport, SearchConfig,
};
use bottrig::ring::{mul, BottTower, GradedMap, RingElement};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_COUNTEREXAMPLE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Largest absolute value accepted for any integer in the input.
pub const INPUT_LIMIT: i64 = 1_000_000;
/// Largest base height for which `classify` searches for an isomorphism itself.
pub const MAX_SEARCH_BASE_HEIGHT: usize = 2;
pub const MAX_SEARCH_BOUND: i64 = 20;

#[derive(Parser, Debug)]
#[command(name = "bottrig", version, about = "Cohomology and bundle isomorphisms of Hirzebruch surface bundles over Bott manifolds")]
#[command(after_help = "Matrices act on degree-2 cohomology with columns as images: the row-major \
    entries p11 p12 p21 p22 send x1 to p11 x1 + p21 x2 and x2 to p12 x1 + p22 x2.")]
pub struct Cli {
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Multiply two elements of H*(B_n): input {"tower", "lhs", "rhs"}
    RingMul { input: String },
    /// The automorphisms of H*(Sigma_a)
    Autos {
        #[arg(allow_negative_numbers = true)]
        a: i64,
    },
    /// Decide whether a fiber automorphism extends over the base
    Extend {
        /// Bundle data (file, '-' for stdin, or inline JSON)
        bundle: String,
        /// Fiber matrix, row-major: p11 p12 p21 p22 (columns are images)
        #[arg(long, num_args = 4, allow_negative_numbers = true, value_names = ["P11", "P12", "P21", "P22"])]
        matrix: Vec<i64>,
    },
    /// Certify that an algebra isomorphism is induced by a bundle isomorphism:
    /// input {"source", "target", "iso"?}; without "iso" one is searched for
    Classify {
        pair: String,
        #[arg(long)]
        explain: bool,
        /// Search box when no isomorphism is given
        #[arg(long)]
        matrix_bound: Option<i64>,
    },
    /// Closed-form automorphism groups against the brute-force oracle
    VerifyS4(SweepArgs),
    /// Certificates for every algebra isomorphism in the box
    VerifyMain(SweepArgs),
    /// Group towers by cohomology ring isomorphism
    Census {
        #[arg(long, default_value_t = 3)]
        height: usize,
        #[arg(long, default_value_t = 1)]
        coeff_bound: i64,
        #[arg(long, default_value_t = 3)]
        matrix_bound: i64,
        #[arg(long, env = "BOTTRIG_JOBS", default_value_t = 0)]
        jobs: usize,
    },
}

#[derive(Args, Debug, Clone, Copy)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 1)]
    pub base_height: usize,
    #[arg(long, default_value_t = 2)]
    pub coeff_bound: i64,
    /// Defaults to coeff_bound^2 + 6
    #[arg(long)]
    pub matrix_bound: Option<i64>,
    #[arg(long, env = "BOTTRIG_JOBS", default_value_t = 0)]
    pub jobs: usize,
}

impl SweepArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            base_height: self.base_height,
            coeff_bound: self.coeff_bound,
            matrix_bound: self.matrix_bound.unwrap_or_else(|| min_matrix_bound(self.coeff_bound)),
            jobs: self.jobs,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed(_) => EXIT_COUNTEREXAMPLE,
            _ => EXIT_USAGE,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RingMulInput {
    pub tower: BottTower,
    pub lhs: RingElement,
    pub rhs: RingElement,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassifyInput {
    pub source: HirzebruchBundleData,
    pub target: HirzebruchBundleData,
    #[serde(default)]
    pub iso: Option<GradedMap>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AutosOutput {
    a: i64,
    diffeo_type: DiffeoType,
    automorphisms: Vec<AutosRow>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AutosRow {
    row: TableRow,
    matrix: FiberAutomorphism,
}

#[derive(Debug, Serialize, Deserialize)]
struct ExtendOutput {
    data: HirzebruchBundleData,
    matrix: FiberAutomorphism,
    #[serde(flatten)]
    outcome: ExtensionOutcome,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(&cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let json = cli.format == Format::Json;
    match &cli.command {
        Command::RingMul { input } => {
            let inp: RingMulInput = parse_input(input)?;
            for e in [&inp.lhs, &inp.rhs] {
                check_element(e)?;
            }
            let product = mul(&inp.tower, &inp.lhs, &inp.rhs).map_err(|e| CliError::Input(e.to_string()))?;
            if json {
                emit_json(out, &serde_json::json!({ "product": product }))?;
            } else {
                emit(out, format!("({}) * ({}) = {product}\n", inp.lhs, inp.rhs))?;
            }
        }
        Command::Autos { a } => {
            check_range("a", *a)?;
            let o = AutosOutput {
                a: *a,
                diffeo_type: diffeo_type(*a),
                automorphisms: hirzebruch_table(*a).into_iter().map(|(row, matrix)| AutosRow { row, matrix }).collect(),
            };
            if json {
                emit_json(out, &o)?;
            } else {
                let mut s = format!("Sigma_{}: {}\n", o.a, o.diffeo_type);
                for r in &o.automorphisms {
                    s.push_str(&format!("  {:<34} {}\n", r.row.to_string(), r.matrix));
                }
                emit(out, s)?;
            }
        }
        Command::Extend { bundle, matrix } => {
            let data: HirzebruchBundleData = parse_input(bundle)?;
            check_bundle(&data)?;
            for &v in matrix {
                check_range("matrix entry", v)?;
            }
            let p = FiberAutomorphism::from_row_major([matrix[0], matrix[1], matrix[2], matrix[3]]);
            let outcome = extension_condition(&data, &p).map_err(|e| CliError::Input(e.to_string()))?;
            if json {
                emit_json(out, &ExtendOutput { data, matrix: p, outcome })?;
            } else {
                emit(out, format!("{outcome}\n"))?;
            }
        }
        Command::Classify { pair, explain, matrix_bound } => {
            let inp: ClassifyInput = parse_input(pair)?;
            check_bundle(&inp.source)?;
            check_bundle(&inp.target)?;
            let cert = classify(&inp, *matrix_bound)?;
            if json {
                emit_json(out, &cert)?;
            } else if *explain {
                emit(out, cert.explain())?;
            } else {
                let mut s = format!("conclusion: {}\n", cert.conclusion);
                for step in cert.all_steps() {
                    s.push_str(&format!("  {step}\n"));
                }
                emit(out, s)?;
            }
        }
        Command::VerifyS4(args) => return sweep(out, json, verify_automorphism_groups(&args.config())),
        Command::VerifyMain(args) => return sweep(out, json, verify_main_theorem(&args.config())),
        Command::Census { height, coeff_bound, matrix_bound, jobs } => {
            let r = census(*height, *coeff_bound, *matrix_bound, *jobs).map_err(|e| CliError::Input(e.to_string()))?;
            if json {
                emit_json(out, &r)?;
            } else {
                emit(out, census_table(&r))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn classify(inp: &ClassifyInput, matrix_bound: Option<i64>) -> Result<IsoCertificate, CliError> {
    let (d1, d2) = (&inp.source, &inp.target);
    if d1.base != d2.base {
        return Err(CliError::Input("source and target must share the base tower".into()));
    }
    let iso = match &inp.iso {
        Some(m) => {
            if m.images().iter().any(|c| c.max_abs() > INPUT_LIMIT) {
                return Err(CliError::Input(format!("iso entries must lie in [-{INPUT_LIMIT}, {INPUT_LIMIT}]")));
            }
            Some(m.clone())
        }
        None => {
            if d1.n() > MAX_SEARCH_BASE_HEIGHT {
                return Err(CliError::Input(format!(
                    "no iso given and base height exceeds {MAX_SEARCH_BASE_HEIGHT}; supply \"iso\""
                )));
            }
            let bound = matrix_bound.unwrap_or_else(|| d1.a.abs().max(d2.a.abs()).pow(2) + 6);
            if !(0..=MAX_SEARCH_BOUND).contains(&bound) {
                return Err(CliError::Input(format!(
                    "search bound {bound} outside [0, {MAX_SEARCH_BOUND}]; supply \"iso\" or --matrix-bound"
                )));
            }
            let found = enumerate_algebra_isomorphisms(d1, d2, bound).map_err(|e| CliError::Input(e.to_string()))?;
            found.into_iter().next()
        }
    };
    match iso {
        Some(m) => bundles_isomorphic(d1, d2, &m).map_err(|e| match e {
            bottrig::classifier::ClassifyError::InternalInconsistency(s) => CliError::Failed(s),
            other => CliError::Input(other.to_string()),
        }),
        None => Ok(IsoCertificate::undecided(d1.clone(), d2.clone())),
    }
}

fn sweep(
    out: &mut dyn Write,
    json: bool,
    report: Result<RigidityReport, bottrig::harness::HarnessError>,
) -> Result<i32, CliError> {
    let r = report.map_err(|e| CliError::Input(e.to_string()))?;
    if json {
        emit_json(out, &r)?;
    } else {
        emit(out, report_table(&r))?;
    }
    Ok(if r.passed() { EXIT_OK } else { EXIT_COUNTEREXAMPLE })
}

fn report_table(r: &RigidityReport) -> String {
    let c = &r.config;
    let mut s = format!(
        "suite: {}\nbase height: {}  coeff bound: {}  matrix bound: {}  jobs: {}\n",
        r.suite, c.base_height, c.coeff_bound, c.matrix_bound, c.jobs
    );
    s.push_str(&format!("instances scanned:    {}\n", r.instances_scanned));
    s.push_str(&format!("isomorphisms found:   {}\n", r.isos_found));
    s.push_str(&format!("certificates emitted: {}\n", r.certificates_emitted));
    s.push_str(&format!("parity violations:    {}\n", r.parity_violations));
    if !r.group_orders.is_empty() {
        let h: Vec<String> = r.group_orders.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        s.push_str(&format!("group orders:         {}\n", h.join(" ")));
    }
    s.push_str(&format!("counterexamples:      {}\n", r.counterexamples.len()));
    for ce in &r.counterexamples {
        let target = ce.target.as_ref().map(|t| format!(" -> {t}")).unwrap_or_default();
        let map = ce.map.as_ref().map(|m| format!(" via {m}")).unwrap_or_default();
        s.push_str(&format!("  [{}] {}{target}{map}: {}\n", ce.kind, ce.source, ce.detail));
    }
    s.push_str(&format!("wall time: {} ms\n", r.wall_time_ms));
    s
}

fn census_table(r: &CensusReport) -> String {
    let mut s = format!(
        "height {}  coeff bound {}  matrix bound {}: {} towers, {} classes\n",
        r.height,
        r.coeff_bound,
        r.matrix_bound,
        r.towers,
        r.classes.len()
    );
    for (i, class) in r.classes.iter().enumerate() {
        let members: Vec<String> = class.iter().map(ToString::to_string).collect();
        s.push_str(&format!("  class {} ({}): {}\n", i + 1, class.len(), members.join("  ")));
    }
    s.push_str(&format!("wall time: {} ms\n", r.wall_time_ms));
    s
}

fn emit(out: &mut dyn Write, s: String) -> Result<(), CliError> {
    out.write_all(s.as_bytes()).map_err(|e| CliError::Io { path: "<stdout>".into(), source: e })
}

fn emit_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    emit(out, s)
}

/// Inline JSON, `-` for stdin, or a file path.
fn parse_input<T: for<'de> Deserialize<'de>>(arg: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with(['{', '[']) {
        arg.to_string()
    } else if arg == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s).map_err(|e| CliError::Io { path: "<stdin>".into(), source: e })?;
        s
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Io { path: arg.into(), source: e })?
    };
    Ok(serde_json::from_str(&text)?)
}

fn check_range(what: &str, v: i64) -> Result<(), CliError> {
    if v.abs() > INPUT_LIMIT {
        return Err(CliError::Input(format!("{what} {v} outside [-{INPUT_LIMIT}, {INPUT_LIMIT}]")));
    }
    Ok(())
}

fn check_bundle(d: &HirzebruchBundleData) -> Result<(), CliError> {
    check_range("a", d.a)?;
    let coords = d.c1().coords().iter().chain(d.y.coords()).chain(d.base.rows().iter().flatten());
    for &v in coords {
        check_range("coefficient", v)?;
    }
    Ok(())
}

fn check_element(e: &RingElement) -> Result<(), CliError> {
    for (_, c) in e.terms() {
        check_range("coefficient", c)?;
    }
    Ok(())
}
