use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use kreinamo::acceptance;
use kreinamo::mesh::{self, Krein, ResonanceConfig};
use kreinamo::operator;
use kreinamo::output::{fmt, write_csv, write_json, write_svg, Panel, Series};
use kreinamo::profiles::AlphaProfile;
use kreinamo::soliton::{self, BranchConfig};
use kreinamo::tracker::{self, CutoffConfig, SweepConfig, TripleConfig};
use kreinamo::Error;

#[derive(Parser)]
#[command(name = "kreinamo", version, about = "Spectra of alpha^2-dynamo operators")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the grid size M of the configuration.
    #[arg(long = "M", global = true)]
    m: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true, env = "KREINAMO_WORKERS")]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Parameter sweep with branch tracking and branch-point detection.
    Spectrum,
    /// Two-parameter search for a triple point.
    Triple,
    /// Exact spectral mesh of the constant-α model and its crossings.
    Mesh(MeshArgs),
    /// First-order unfolding of each crossing against direct eigensolves.
    Unfold,
    /// Resonance scan of the crossings under one perturbation shape.
    Resonance,
    /// Bound-state branch λ(x0) of the soliton pencil.
    SolitonBranch,
    /// Box-size dependence of the soliton pencil spectrum.
    Cutoff,
    /// Runs the acceptance criteria.
    Selftest(SelftestArgs),
}

#[derive(Args)]
struct MeshArgs {
    #[arg(long, default_value_t = 0)]
    l: u32,
    #[arg(long, default_value_t = 25.0)]
    alpha0_max: f64,
    #[arg(long, default_value_t = 6)]
    n_max: usize,
    /// Samples per branch.
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Args)]
struct SelftestArgs {
    /// Comma-separated criterion numbers; all when omitted.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

/// Failure of a run, reported as JSON on stderr.
#[derive(Debug, Serialize)]
struct Failure {
    error: &'static str,
    message: String,
    #[serde(skip)]
    code: u8,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { error: "config", message: message.into(), code: 2 }
    }

    fn numeric(error: &'static str, message: String) -> Self {
        Failure { error, message, code: 3 }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_input_error() { 2 } else { 3 };
        Failure { error: e.kind(), message: e.to_string(), code }
    }
}

type Run = Result<String, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", serde_json::to_string(&f).expect("failure serializes"));
            ExitCode::from(f.code)
        }
    }
}

fn execute(cli: &Cli) -> Run {
    if let Some(n) = cli.common.workers {
        if n == 0 {
            return Err(Failure::config("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let c = &cli.common;
    fs::create_dir_all(&c.out_dir).map_err(|e| Failure::config(format!("{}: {e}", c.out_dir.display())))?;
    match &cli.command {
        Command::Spectrum => spectrum(c),
        Command::Triple => triple(c),
        Command::Mesh(a) => mesh_cmd(c, a),
        Command::Unfold => unfold(c),
        Command::Resonance => resonance(c),
        Command::SolitonBranch => soliton_branch(c),
        Command::Cutoff => cutoff(c),
        Command::Selftest(a) => selftest(c, a),
    }
}

fn load<T: DeserializeOwned>(c: &Common) -> Result<T, Failure> {
    let path = c.config.as_ref().ok_or_else(|| Failure::config("--config <path> is required"))?;
    let text = fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn no_override(c: &Common, command: &str) -> Result<(), Failure> {
    match c.m {
        Some(_) => Err(Failure::config(format!("--M does not apply to {command}"))),
        None => Ok(()),
    }
}

fn out(c: &Common, name: &str) -> PathBuf {
    c.out_dir.join(name)
}

fn spectrum(c: &Common) -> Run {
    let mut cfg: SweepConfig = load(c)?;
    if let Some(m) = c.m {
        cfg.m = m;
    }
    cfg.validate()?;
    let sw = tracker::sweep(&cfg)?;
    let eps = tracker::detect_branch_points(&cfg, &sw, kreinamo::eig::REAL_TOL)?;
    write_csv(out(c, "branches.csv"), &tracker::BRANCH_HEADER, tracker::branch_records(&sw.branches))?;
    write_csv(out(c, "branch_points.csv"), &tracker::BRANCH_POINT_HEADER, eps.points.iter().map(tracker::branch_point_record))?;
    write_json(out(c, "branch_points.json"), &eps)?;

    let name = cfg.family.parameter_name();
    let series = |part: fn(&Complex64) -> Option<f64>| -> Vec<Series> {
        sw.branches
            .iter()
            .map(|b| Series {
                label: format!("branch {}", b.id),
                points: b.points.iter().filter_map(|p| part(&p.lambda).map(|v| (p.param, v))).collect(),
            })
            .collect()
    };
    write_svg(
        out(c, "spectrum.svg"),
        &[
            Panel { title: "Re λ".into(), x_label: name.into(), y_label: "Re λ".into(), series: series(|z| Some(z.re)) },
            Panel {
                title: "Im λ ≥ 0".into(),
                x_label: name.into(),
                y_label: "Im λ".into(),
                series: series(|z| (z.im >= 0.0).then_some(z.im)),
            },
        ],
    )?;
    let leading = sw.samples.last().and_then(|s| s.values.first()).map(|z| fmt(z.re)).unwrap_or_default();
    Ok(format!(
        "spectrum: {} samples, {} branches, {} branch points, {} flagged intervals, leading Re λ at {name} = {}: {leading}",
        sw.samples.len(),
        sw.branches.len(),
        eps.points.len(),
        eps.flagged.len(),
        fmt(cfg.range[1]),
    ))
}

fn triple(c: &Common) -> Run {
    let mut cfg: TripleConfig = load(c)?;
    if let Some(m) = c.m {
        cfg.m = m;
    }
    let mut tp = tracker::find_triple_point(&cfg)?;
    if tp.found {
        let delta = 1e-3 * (cfg.c[1] - cfg.c[0]);
        tp.cusp = Some(tracker::cusp_diagnostic(&cfg, tp.zeta, tp.c, tp.lambda, delta)?);
    }
    write_json(out(c, "triple.json"), &tp)?;
    write_csv(out(c, "triple.csv"), &tracker::BRANCH_POINT_HEADER, [tracker::branch_point_record(&tp.branch_point())])?;
    Ok(format!(
        "triple: found={} zeta={} C={} lambda={} residual={} M={}",
        tp.found,
        fmt(tp.zeta),
        fmt(tp.c),
        fmt(tp.lambda.re),
        fmt(tp.residual),
        tp.m
    ))
}

const MESH_HEADER: [&str; 8] = ["kind", "n", "eps", "m", "delta", "alpha0", "lambda", "j"];

fn mesh_cmd(c: &Common, a: &MeshArgs) -> Run {
    no_override(c, "mesh")?;
    if c.config.is_some() {
        return Err(Failure::config("mesh takes its parameters as flags"));
    }
    if !(a.alpha0_max > 0.0) || a.points < 2 {
        return Err(Failure::config("--alpha0-max must be positive and --points at least 2"));
    }
    let alphas: Vec<f64> = (0..a.points).map(|i| a.alpha0_max * i as f64 / (a.points - 1) as f64).collect();
    let mut rows = Vec::new();
    let mut series = Vec::new();
    for n in 1..=a.n_max {
        for eps in [Krein::Plus, Krein::Minus] {
            let mut pts = Vec::new();
            for &al in &alphas {
                let lam = mesh::mesh_eigenvalue(n, eps, a.l, al)?;
                pts.push((al, lam));
                rows.push(vec![
                    "branch".into(),
                    n.to_string(),
                    eps.symbol().to_string(),
                    String::new(),
                    String::new(),
                    fmt(al),
                    fmt(lam),
                    String::new(),
                ]);
            }
            series.push(Series { label: format!("({n},{})", eps.symbol()), points: pts });
        }
    }
    let dps = mesh::diabolical_points(a.l, a.n_max, (0.0, a.alpha0_max))?;
    for dp in &dps {
        rows.push(vec![
            "dp".into(),
            dp.n.to_string(),
            dp.eps.symbol().to_string(),
            dp.m.to_string(),
            dp.delta.symbol().to_string(),
            fmt(dp.alpha0_c),
            fmt(dp.lambda0),
            dp.j.map(|j| j.to_string()).unwrap_or_default(),
        ]);
    }
    write_csv(out(c, "mesh.csv"), &MESH_HEADER, rows)?;
    write_svg(
        out(c, "mesh.svg"),
        &[Panel { title: format!("spectral mesh, l = {}", a.l), x_label: "alpha0".into(), y_label: "λ".into(), series }],
    )?;
    let same = dps.iter().filter(|d| d.same_type).count();
    Ok(format!(
        "mesh: l={} {} branches, {} crossings ({} same-type, {} opposite-type) for alpha0 in [0, {}]",
        a.l,
        2 * a.n_max,
        dps.len(),
        same,
        dps.len() - same,
        fmt(a.alpha0_max)
    ))
}

fn default_window() -> [f64; 2] {
    [0.0, f64::MAX]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnfoldConfig {
    #[serde(default)]
    l: u32,
    phi: AlphaProfile,
    n_max: usize,
    amplitude: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(default = "default_window")]
    window: [f64; 2],
}

const UNFOLD_HEADER: [&str; 14] = [
    "n",
    "eps",
    "m",
    "delta",
    "alpha0_c",
    "lambda0",
    "complex_split",
    "predicted_re_1",
    "predicted_im_1",
    "predicted_re_2",
    "predicted_im_2",
    "observed_split_re",
    "observed_split_im",
    "relative_mismatch",
];

fn unfold(c: &Common) -> Run {
    let mut cfg: UnfoldConfig = load(c)?;
    if let Some(m) = c.m {
        cfg.m = m;
    }
    let dps = mesh::diabolical_points(cfg.l, cfg.n_max, (cfg.window[0], cfg.window[1]))?;
    let rho_h = operator::discrete_rho(cfg.l, cfg.m)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for dp in &dps {
        let u = mesh::dp_unfold(dp, &cfg.phi, cfg.amplitude)?;
        let node = mesh::discrete_node(dp, &rho_h)?;
        let obs = mesh::observe_split(dp, &cfg.phi, cfg.amplitude, &node, u.predicted, cfg.m)?;
        let pred = cfg.amplitude * (u.lambda1[0] - u.lambda1[1]);
        let mismatch = (obs.split - pred).norm() / pred.norm();
        if pred.norm() > 1e-6 {
            worst = worst.max(mismatch);
        }
        rows.push(vec![
            dp.n.to_string(),
            dp.eps.symbol().to_string(),
            dp.m.to_string(),
            dp.delta.symbol().to_string(),
            fmt(dp.alpha0_c),
            fmt(dp.lambda0),
            u.complex_split.to_string(),
            fmt(u.predicted[0].re),
            fmt(u.predicted[0].im),
            fmt(u.predicted[1].re),
            fmt(u.predicted[1].im),
            fmt(obs.split.re),
            fmt(obs.split.im),
            fmt(mismatch),
        ]);
    }
    write_csv(out(c, "unfold.csv"), &UNFOLD_HEADER, rows)?;
    Ok(format!(
        "unfold: {} crossings at amplitude {}, worst first-order mismatch {}",
        dps.len(),
        fmt(cfg.amplitude),
        fmt(worst)
    ))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResonanceRun {
    phi: AlphaProfile,
    n_max: usize,
    amplitude: f64,
    #[serde(rename = "M")]
    m: usize,
    #[serde(default = "default_window")]
    window: [f64; 2],
}

fn resonance(c: &Common) -> Run {
    let mut cfg: ResonanceRun = load(c)?;
    if let Some(m) = c.m {
        cfg.m = m;
    }
    let rc = ResonanceConfig { n_max: cfg.n_max, amplitude: cfg.amplitude, m: cfg.m, window: (cfg.window[0], cfg.window[1]) };
    let rows = mesh::resonance_scan(&cfg.phi, &rc)?;
    write_csv(out(c, "resonance.csv"), &mesh::RESONANCE_HEADER, rows.iter().map(mesh::resonance_record))?;
    let pick = |same: bool| Series {
        label: if same { "same type".into() } else { "opposite type".into() },
        points: rows.iter().filter(|r| r.dp.same_type == same).map(|r| (r.dp.alpha0_c, r.displacement())).collect(),
    };
    let mut panel_series = vec![pick(true), pick(false)];
    for s in &mut panel_series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    write_svg(
        out(c, "resonance.svg"),
        &[Panel {
            title: "first-order displacement".into(),
            x_label: "alpha0_c".into(),
            y_label: "max |λ1|".into(),
            series: panel_series,
        }],
    )?;
    let complex = rows.iter().filter(|r| r.unfolding.complex_split).count();
    Ok(format!("resonance: {} crossings, {} open complex pairs at amplitude {}", rows.len(), complex, fmt(cfg.amplitude)))
}

fn default_ls() -> Vec<u32> {
    vec![0, 1, 2, 3]
}

#[derive(Debug, Deserialize)]
struct SolitonBranchRun {
    #[serde(default = "default_ls")]
    l: Vec<u32>,
    #[serde(flatten)]
    branch: BranchConfig,
}

fn soliton_branch(c: &Common) -> Run {
    let mut cfg: SolitonBranchRun = match &c.config {
        Some(_) => load(c)?,
        None => SolitonBranchRun { l: default_ls(), branch: BranchConfig::default() },
    };
    if let Some(m) = c.m {
        cfg.branch.density = (m + 1) as f64 / cfg.branch.x;
    }
    let mut records = Vec::new();
    let mut branches = Vec::new();
    let mut series = Vec::new();
    for &l in &cfg.l {
        let b = soliton::bound_state_branch(l, &cfg.branch)?;
        records.extend(soliton::branch_records(&b));
        series.push(Series { label: format!("l = {l}"), points: b.samples.iter().map(|s| (s.x0, s.lambda)).collect() });
        branches.push(b);
    }
    write_csv(out(c, "soliton_branch.csv"), &soliton::BRANCH_HEADER, records)?;
    write_json(out(c, "soliton_branch.json"), &branches)?;
    write_svg(
        out(c, "soliton_branch.svg"),
        &[Panel { title: "bound-state branch".into(), x_label: "x0".into(), y_label: "λ".into(), series }],
    )?;
    let xj: Vec<String> = branches
        .iter()
        .map(|b| format!("l={} x_J={}", b.l, b.x_j.map(fmt).unwrap_or_else(|| "none".into())))
        .collect();
    Ok(format!("soliton-branch: X={} M={} {}", fmt(cfg.branch.x), cfg.branch.m(), xj.join(" ")))
}

fn cutoff(c: &Common) -> Run {
    no_override(c, "cutoff")?;
    let cfg: CutoffConfig = load(c)?;
    let st = tracker::cutoff_study(&cfg)?;
    write_csv(out(c, "cutoff.csv"), &tracker::CUTOFF_HEADER, tracker::cutoff_records(&st))?;
    write_json(out(c, "cutoff.json"), &st)?;
    let series = st
        .modes
        .iter()
        .map(|md| Series { label: format!("n = {}", md.n), points: st.xs.iter().copied().zip(md.lambda.iter().copied()).collect() })
        .collect();
    write_svg(out(c, "cutoff.svg"), &[Panel { title: "λ_n(X)".into(), x_label: "X".into(), y_label: "λ".into(), series }])?;
    let exps: Vec<String> = st.modes.iter().filter_map(|m| m.exponent.map(|p| format!("n={}:{:.3}", m.n, p))).collect();
    Ok(format!("cutoff: X={:?} modes={} exponents {}", st.xs, st.modes.len(), exps.join(" ")))
}

fn selftest(c: &Common, a: &SelftestArgs) -> Run {
    no_override(c, "selftest")?;
    let ids: Vec<usize> = if a.only.is_empty() { (1..=acceptance::CRITERIA).collect() } else { a.only.clone() };
    if let Some(bad) = ids.iter().find(|&&i| i == 0 || i > acceptance::CRITERIA) {
        return Err(Failure::config(format!("no criterion {bad}")));
    }
    let mut outcomes = Vec::new();
    for id in ids {
        let o = acceptance::run(id);
        println!("{}", o.line());
        outcomes.push(o);
    }
    write_json(out(c, "selftest.json"), &outcomes)?;
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    if failed.is_empty() {
        Ok(format!("selftest: {} of {} criteria pass", outcomes.len(), outcomes.len()))
    } else {
        Err(Failure::numeric(
            "acceptance",
            format!("{} of {} criteria fail: {}", failed.len(), outcomes.len(), failed.join(",")),
        ))
    }
}
