use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use reglab_core::complex::{column_filtration, e_infinity, page};
use reglab_core::cycles::{boundary, good_position_report};
use reglab_core::cyclo::CycloNum;
use reglab_core::dsl::parse_cycle_file;
use reglab_core::gysin::{build_gysin, higher_residue, residue_target, weight_filtration, NcdDescriptor, WeightGradedClass};
use reglab_core::json::{complex_from_value, double_complex_from_value, page_grid_text, page_to_value};
use reglab_core::linalg::Matrix;
use reglab_core::periods::ModQpSettings;
use reglab_core::quad::QuadratureSettings;
use reglab_core::scenarios::{run_singular_curve, run_singular_surface, run_toric_residue, selftest, ScenarioReport, ScenarioSettings};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "reglab", version, about = "Exact homological algebra, higher Chow cycles and regulator periods")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Absolute tolerance for 1-D quadrature.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// Absolute tolerance for 2-D quadrature.
    #[arg(long, global = true, default_value_t = 1e-7)]
    tol2d: f64,
    /// Maximum bisection depth of the quadrature.
    #[arg(long, global = true, default_value_t = 8)]
    max_depth: u32,
    /// Largest witness denominator B in mod-ℚ(p) comparisons.
    #[arg(long, global = true, default_value_t = 64)]
    denom_bound: u64,
    /// Largest witness numerator A in mod-ℚ(p) comparisons.
    #[arg(long, global = true, default_value_t = 10_000)]
    num_bound: u64,
    /// Residual tolerance of mod-ℚ(p) comparisons.
    #[arg(long, global = true, default_value_t = 1e-8)]
    modqp_tol: f64,
    /// Print a machine-readable JSON report.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cochain complexes and spectral sequences.
    #[command(subcommand)]
    Complex(ComplexCmd),
    /// Gysin double complex of a normal crossing descriptor.
    Gysin {
        file: PathBuf,
        /// Also compute the depth-k residue on weight-graded classes.
        #[arg(long)]
        residue: Option<usize>,
        /// Twist p of the grid.
        #[arg(long, default_value_t = 0)]
        twist: i32,
        /// Number of pages to print.
        #[arg(long, default_value_t = 3)]
        pages: i32,
    },
    /// Cubical cycles.
    #[command(subcommand)]
    Cycle(CycleCmd),
    /// Regulator periods.
    #[command(subcommand)]
    Period(PeriodCmd),
    /// Iterated residues.
    #[command(subcommand)]
    Residue(ResidueCmd),
    /// Seeded rounds of every exact invariant plus all scenarios.
    Selftest {
        #[arg(long, default_value_t = 20)]
        rounds: usize,
    },
}

#[derive(Subcommand)]
enum ComplexCmd {
    /// Cohomology dimensions of a complex file.
    Cohomology { file: PathBuf },
    /// Pages of the column spectral sequence of a double complex file.
    Ss {
        file: PathBuf,
        #[arg(long, default_value_t = 3)]
        pages: i32,
    },
}

#[derive(Subcommand)]
enum CycleCmd {
    /// ∂_B of a cycle file and the good-position advisory.
    Check { file: PathBuf },
}

#[derive(Subcommand)]
enum PeriodCmd {
    /// The singular-curve period for ζ₁ = e^{2πi k₁/N₁}, ζ₂ = e^{2πi k₂/N₂}.
    Curve {
        /// N1:k1
        #[arg(long, default_value = "3:1")]
        zeta1: String,
        /// N2:k2
        #[arg(long, default_value = "4:1")]
        zeta2: String,
    },
    /// The singular-surface period by three routes.
    Surface,
}

#[derive(Subcommand)]
enum ResidueCmd {
    /// Iterated residue of dlog x₁ ∧ … ∧ dlog xₙ along the coordinate flag.
    Toric {
        #[arg(long, default_value_t = 3)]
        n: usize,
    },
}

impl Global {
    fn settings(&self) -> Result<ScenarioSettings> {
        let quad = QuadratureSettings { tol: self.tol, tol2d: self.tol2d, max_depth: self.max_depth, ..Default::default() };
        quad.validate().map_err(anyhow::Error::msg)?;
        if self.denom_bound == 0 || self.modqp_tol.is_nan() || self.modqp_tol <= 0.0 {
            bail!("--denom-bound must be positive and --modqp-tol positive");
        }
        Ok(ScenarioSettings { quad, modqp: ModQpSettings { denom_bound: self.denom_bound, num_bound: self.num_bound, tol: self.modqp_tol } })
    }
}

fn parse_root(s: &str) -> Result<CycloNum> {
    let (n, k) = s.split_once(':').with_context(|| format!("expected N:k, got {s:?}"))?;
    let n: u32 = n.trim().parse().with_context(|| format!("bad N in {s:?}"))?;
    let k: i64 = k.trim().parse().with_context(|| format!("bad k in {s:?}"))?;
    if n == 0 {
        bail!("N must be positive");
    }
    Ok(CycloNum::zeta_pow(n, k))
}

fn read_json(path: &Path) -> Result<Value> {
    let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))
}

/// A report plus command-specific JSON payload.
struct Output {
    report: ScenarioReport,
    text: String,
    data: Value,
}

impl Output {
    fn from_report(report: ScenarioReport) -> Self {
        Output { report, text: String::new(), data: Value::Null }
    }
}

fn complex_cohomology(file: &Path) -> Result<Output> {
    let c = complex_from_value(&read_json(file)?)?;
    let mut report = ScenarioReport::new(format!("complex cohomology {}", file.display()));
    report.check("d-squared", c.check_d_squared(), "d∘d = 0");
    let dims = c.cohomology_dims();
    let text = dims.iter().map(|(k, n)| format!("H^{k} = {n}\n")).collect();
    let data = json!({"cohomology": dims.iter().map(|(k, n)| (k.to_string(), json!(n))).collect::<serde_json::Map<_, _>>()});
    Ok(Output { report, text, data })
}

fn complex_ss(file: &Path, pages: i32) -> Result<Output> {
    let dc = double_complex_from_value(&read_json(file)?)?;
    let f = column_filtration(&dc)?;
    let mut report = ScenarioReport::new(format!("complex ss {}", file.display()));
    let mut text = String::new();
    let mut pv = vec![];
    let mut ok = true;
    for r in 0..=pages {
        let pg = page(&f, r);
        ok &= pg.check_d_squared();
        text.push_str(&page_grid_text(&pg));
        pv.push(page_to_value(&pg));
    }
    let einf = e_infinity(&f);
    text.push_str(&page_grid_text(&einf).replacen(&format!("E_{}", einf.r), "E_∞", 1));
    report.check("pages-d-squared", ok, format!("d_r∘d_r = 0 for r ≤ {pages}"));
    Ok(Output { report, text, data: json!({"pages": pv, "e_infinity": page_to_value(&einf)}) })
}

fn gysin(file: &Path, residue: Option<usize>, p: i32, pages: i32) -> Result<Output> {
    let ncd = NcdDescriptor::from_json(&read_json(file)?)?;
    let dc = build_gysin(&ncd, p)?;
    let f = weight_filtration(&dc)?;
    let mut report = ScenarioReport::new(format!("gysin {} (N = {}, p = {p})", file.display(), ncd.components()));
    report.check("D-squared", f.base.check_d_squared(), "Gy² = 0 and 𝔻² = 0");
    let mut text = String::new();
    let mut pv = vec![];
    for r in 1..=pages {
        let pg = page(&f, r);
        text.push_str(&page_grid_text(&pg));
        pv.push(page_to_value(&pg));
    }
    let einf = e_infinity(&f);
    text.push_str(&page_grid_text(&einf).replacen(&format!("E_{}", einf.r), "E_∞", 1));
    let mut data = json!({"pages": pv, "e_infinity": page_to_value(&einf)});
    if let Some(k) = residue {
        if k > ncd.components() {
            bail!("--residue {k} exceeds the number of components {}", ncd.components());
        }
        let a = -(k as i32);
        let target = residue_target(&ncd, p, k)?;
        let tinf = e_infinity(&column_filtration(&target)?);
        let mut rows = vec![];
        for &(pa, b, _) in einf.nonzero().iter().filter(|e| e.0 == a) {
            let basis = WeightGradedClass::basis(&dc, p, pa, b)?;
            let images: Vec<Vec<_>> = basis.iter().map(|c| higher_residue(&ncd, p, c, k).map(|r| r.coords)).collect::<Result<_, _>>()?;
            let tdim = tinf.dim(0, b);
            let m = Matrix::from_cols(tdim, &images);
            let rank = m.rank();
            text.push_str(&format!("Res^{k} on Gr column {a}, row {b}: {} → {tdim}, rank {rank}\n", basis.len()));
            rows.push(json!({"b": b, "source": basis.len(), "target": tdim, "rank": rank}));
        }
        data["residue"] = json!({"k": k, "twist": p - k as i32, "rows": rows});
    }
    Ok(Output { report, text, data })
}

fn cycle_check(file: &Path) -> Result<Output> {
    let src = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let cf = parse_cycle_file(&src)?;
    let mut report = ScenarioReport::new(format!("cycle check {}", file.display()));
    let b = boundary(&cf.chain)?;
    report.check("boundary", b.is_empty(), if b.is_empty() { "∂_B = 0".to_string() } else { format!("∂_B = {b}") });
    let bb = boundary(&b)?;
    report.check("boundary-squared", bb.is_empty(), "∂_B∘∂_B = 0");
    let gp = good_position_report(&cf.chain)?;
    report.notes.push(format!("good real position (advisory): {}", gp.overall()));
    let mut text = format!("{} component(s)\n", cf.chain.terms.len());
    for e in &gp.entries {
        text.push_str(&format!("  component {} {} j = {}: {} {}\n", e.component, e.face, e.j, e.status, e.detail));
    }
    let data = json!({"components": cf.chain.terms.len(), "good_position": gp.overall().to_string()});
    Ok(Output { report, text, data })
}

fn run(cli: &Cli) -> Result<Output> {
    let g = &cli.global;
    let cfg = g.settings()?;
    Ok(match &cli.cmd {
        Cmd::Complex(ComplexCmd::Cohomology { file }) => complex_cohomology(file)?,
        Cmd::Complex(ComplexCmd::Ss { file, pages }) => complex_ss(file, *pages)?,
        Cmd::Gysin { file, residue, twist, pages } => gysin(file, *residue, *twist, *pages)?,
        Cmd::Cycle(CycleCmd::Check { file }) => cycle_check(file)?,
        Cmd::Period(PeriodCmd::Curve { zeta1, zeta2 }) => Output::from_report(run_singular_curve(&parse_root(zeta1)?, &parse_root(zeta2)?, &cfg)?),
        Cmd::Period(PeriodCmd::Surface) => Output::from_report(run_singular_surface(&cfg)?),
        Cmd::Residue(ResidueCmd::Toric { n }) => Output::from_report(run_toric_residue(*n)?),
        Cmd::Selftest { rounds } => Output::from_report(selftest(g.seed, *rounds, &cfg)?),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            if cli.global.json {
                let mut v = out.report.to_json();
                if !out.data.is_null() {
                    v["data"] = out.data;
                }
                println!("{}", serde_json::to_string_pretty(&v).expect("serializable"));
            } else {
                print!("{}", out.text);
                println!("{}", out.report);
            }
            if out.report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            if cli.global.json {
                println!("{}", json!({"status": "ERROR", "error": format!("{e:#}")}));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(2)
        }
    }
}
