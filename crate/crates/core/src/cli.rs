//! Configuration file, overrides and subcommands behind the `vflab` binary.
//!
//! Exit codes: 0 ok, 1 I/O failure, 2 invalid parameters, 3 configuration parse
//! error, 4 blow-up, 5 partial sweep failure, 6 structure-check failure.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_conservation, check_dissipation, uniform_monitor, Recorder};
use crate::error::Error;
use crate::grid::Grid1D;
use crate::initdata::{
    admissible_window, admissible_window_1d, build_eps_family, build_initial_data, e0_quantity,
    fmt_num, initial_data_csv, DataFamilySpec, EpsFamilySpec, WindowPolicy,
};
use crate::limit_study::{
    run_eta_ladder, run_refinement, run_sweep, DataMode, EtaPlan, RefinePlan, SweepPlan,
    DEFAULT_EPS_LADDER,
};
use crate::mms::{run_mms, MmsStudy};
use crate::model::{validate_params, verify_structure, FluidParams, RawParams, StructureCheck};
use crate::scenario;
use crate::solver::{run, Sink, SolverConfig, State, StepLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;
pub const EXIT_STRUCTURE: i32 = 6;

/// Environment variable overriding the output root.
pub const OUT_ENV: &str = "VF_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub half_width: f64,
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            half_width: scenario::STANDARD_HALF_WIDTH,
            n: 800,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyConfig {
    pub eps_ladder: Vec<f64>,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            eps_ladder: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub eps_ladder: Vec<f64>,
    pub data_mode: DataMode,
    pub s_prime: usize,
    /// Half the domain when absent.
    pub window_r: Option<f64>,
    pub t_end: f64,
    pub snapshot_dt: Option<f64>,
    /// Test hook: entries that fail on purpose.
    pub forced_failures: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            eps_ladder: DEFAULT_EPS_LADDER.to_vec(),
            data_mode: DataMode::Shared,
            s_prime: 1,
            window_r: None,
            t_end: scenario::STANDARD_T_END,
            snapshot_dt: None,
            forced_failures: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaConfig {
    pub eta_ladder: Vec<f64>,
    pub eps: f64,
    /// Half the domain when absent.
    pub window_r: Option<f64>,
    pub t_end: f64,
    /// Domain half-width for the ladder; wider than the default so the floor is active.
    pub half_width: f64,
}

impl Default for EtaConfig {
    fn default() -> Self {
        EtaConfig {
            eta_ladder: vec![1e-3, 1e-4, 1e-5, 1e-6],
            eps: 0.01,
            window_r: None,
            t_end: 0.1,
            half_width: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefineConfig {
    pub n_ladder: Vec<usize>,
    pub t_end: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            n_ladder: vec![200, 400, 800, 1600],
            t_end: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmsConfig {
    pub ns: Vec<usize>,
    pub t_end: f64,
}

impl Default for MmsConfig {
    fn default() -> Self {
        let d = MmsStudy::default();
        MmsConfig {
            ns: d.ns,
            t_end: d.t_end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    pub states: usize,
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub c_max: f64,
    pub u_max: f64,
    pub eig_tol: f64,
    /// Test hook: scales `a1` to corrupt the symmetrizer.
    pub a1_scale: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        let d = StructureCheck::default();
        StructureConfig {
            states: d.states,
            seed: d.seed,
            gammas: vec![1.4, 2.0, 3.0],
            c_max: d.c_max,
            u_max: d.u_max,
            eig_tol: 1e-9,
            a1_scale: d.a1_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
        }
    }
}

/// Everything a subcommand needs; every block has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub params: RawParams,
    pub grid: GridConfig,
    pub data: DataFamilySpec,
    pub family: FamilyConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub eta: EtaConfig,
    pub refine: RefineConfig,
    pub mms: MmsConfig,
    pub structure: StructureConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: scenario::standard_params(0.01),
            grid: GridConfig::default(),
            data: scenario::standard_data(),
            family: FamilyConfig::default(),
            solver: SolverConfig {
                t_end: scenario::STANDARD_T_END,
                snapshot_dt: Some(0.01),
                ..SolverConfig::default()
            },
            sweep: SweepConfig::default(),
            eta: EtaConfig::default(),
            refine: RefineConfig::default(),
            mms: MmsConfig::default(),
            structure: StructureConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn fluid(&self) -> crate::Result<FluidParams> {
        validate_params(&self.params)
    }

    pub fn grid(&self) -> crate::Result<Grid1D> {
        Grid1D::new(self.grid.half_width, self.grid.n)
    }

    /// Cross-field checks run before any subcommand does work.
    pub fn validate(&self) -> crate::Result<()> {
        let p = self.fluid()?;
        self.grid()?;
        self.data.check_window(&p)?;
        self.solver.validate()?;
        self.sweep_plan()?.validate()?;
        if self
            .family
            .eps_ladder
            .iter()
            .any(|e| !(*e > 0.0 && *e <= 1.0))
        {
            return Err(Error::InvalidConfig(
                "family ladder entries must lie in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn sweep_plan(&self) -> crate::Result<SweepPlan> {
        let grid = self.grid()?;
        Ok(SweepPlan {
            eps_ladder: self.sweep.eps_ladder.clone(),
            data_mode: self.sweep.data_mode,
            s_prime: self.sweep.s_prime,
            window_r: self.sweep.window_r.unwrap_or(0.5 * grid.half_width()),
            t_end: self.sweep.t_end,
            snapshot_dt: self.sweep.snapshot_dt,
            grid,
            data: self.data,
            solver: self.solver,
            forced_failures: self.sweep.forced_failures.clone(),
        })
    }
}

/// Failure of the command line itself, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Parse(String),
    Io(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Io(_) => EXIT_IO,
            CliError::Lib(e) if e.is_blowup() => EXIT_BLOWUP,
            CliError::Lib(_) => EXIT_INVALID,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vflab",
    version,
    about = "Degenerate-viscosity Navier-Stokes laboratory"
)]
pub struct Cli {
    /// TOML configuration file; defaults are used for anything missing.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set solver.cfl=0.3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    /// Output directory (beats `VF_OUT` and the configuration).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Validate parameters and print the admissible tail window, r0 and q0.
    CheckParams,
    /// Write the initial data and its E0 report.
    MakeData {
        /// Also write one file per entry of the epsilon-family ladder.
        #[arg(long)]
        family: bool,
        /// Enforce the one-dimensional window instead of the three-dimensional one.
        #[arg(long)]
        dim1_window: bool,
    },
    /// Single simulation with diagnostics and snapshots.
    Run,
    /// Vanishing-viscosity sweep against the inviscid reference.
    Sweep,
    /// Sensitivity to the vacuum floor.
    EtaLadder,
    /// Grid self-convergence.
    Refine,
    /// Randomized check of the symmetrizer and characteristic speeds.
    VerifyStructure,
    /// Manufactured-solution convergence study.
    Mms,
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), CliError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| CliError::Parse(format!("empty key in `{key}`")))?;
    let mut cur = table;
    for part in parts {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("`{part}` in `{key}` is not a table")))?;
    }
    if TAG_KEYS.contains(&last) && cur.get(last) != Some(&value) {
        // switching variant drops the fields of the old one
        cur.clear();
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Keys selecting the variant of a tagged table.
const TAG_KEYS: [&str; 2] = ["kind", "mode"];

fn switches_variant(base: &toml::Table, over: &toml::Table) -> bool {
    TAG_KEYS
        .iter()
        .any(|k| over.get(*k).is_some_and(|v| base.get(*k) != Some(v)))
}

/// Deep merge; tables merge key by key, everything else is replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) if !switches_variant(b, &o) => {
                merge(b, o)
            }
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Reads the configuration file (if any) and applies `--set` overrides.
pub fn resolve_config(path: Option<&Path>, sets: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table =
        toml::from_str(&RunConfig::default().to_toml()).expect("defaults parse");
    if let Some(p) = path {
        let text =
            fs::read_to_string(p).map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
        let file = toml::from_str::<toml::Table>(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
        // typed parse of the file alone, so errors point into it
        toml::from_str::<RunConfig>(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", p.display())))?;
        merge(&mut table, file);
    }
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("override `{s}` is not KEY=VALUE")))?;
        set_path(&mut table, k.trim(), parse_value(v.trim()))?;
    }
    let text = toml::to_string(&table).map_err(|e| CliError::Parse(e.to_string()))?;
    toml::from_str::<RunConfig>(&text)
        .map_err(|e| CliError::Parse(format!("after overrides: {}", e.message())))
}

/// Output directory: flag, then `VF_OUT`, then the configuration.
pub fn output_dir(flag: Option<&Path>, env: Option<&str>, cfg: &RunConfig) -> PathBuf {
    match (flag, env) {
        (Some(f), _) => f.to_path_buf(),
        (None, Some(e)) if !e.is_empty() => PathBuf::from(e),
        _ => cfg.output.dir.clone(),
    }
}

/// Parses `args` and runs; returns the exit code.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    match execute(&cli, std::env::var(OUT_ENV).ok().as_deref(), stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "vflab: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli, env_out: Option<&str>, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let mut cfg = resolve_config(cli.config.as_deref(), &cli.set)?;
    if let Some(Command::MakeData {
        dim1_window: true, ..
    }) = cli.command
    {
        cfg.data.window = WindowPolicy::Dim1;
    }
    if cli.dump_config {
        write!(stdout, "{}", cfg.to_toml())?;
        return Ok(EXIT_OK);
    }
    let Some(command) = cli.command.clone() else {
        writeln!(stdout, "no subcommand given; see --help")?;
        return Ok(EXIT_PARSE);
    };
    if let Command::CheckParams = command {
        return cmd_check_params(&cfg, stdout);
    }
    if let Command::VerifyStructure = command {
        return cmd_verify_structure(&cfg, stdout);
    }
    cfg.validate()?;
    let out = output_dir(cli.out.as_deref(), env_out, &cfg);
    fs::create_dir_all(&out)?;
    fs::write(out.join("config.resolved"), cfg.to_toml())?;
    match command {
        Command::MakeData { family, .. } => cmd_make_data(&cfg, family, &out, stdout),
        Command::Run => cmd_run(&cfg, &out, stdout),
        Command::Sweep => cmd_sweep(&cfg, &out, stdout),
        Command::EtaLadder => cmd_eta_ladder(&cfg, &out, stdout),
        Command::Refine => cmd_refine(&cfg, &out, stdout),
        Command::Mms => cmd_mms(&cfg, &out, stdout),
        Command::CheckParams | Command::VerifyStructure => unreachable!(),
    }
}

pub fn cmd_check_params(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = match cfg.fluid() {
        Ok(p) => p,
        Err(e) => {
            writeln!(stdout, "invalid parameters: {e}")?;
            return Ok(EXIT_INVALID);
        }
    };
    writeln!(
        stdout,
        "A = {}, gamma = {}, delta = {}, alpha = {}, beta = {}, epsilon = {}",
        p.entropy_constant(),
        p.gamma(),
        p.delta(),
        p.alpha(),
        p.beta(),
        p.epsilon()
    )?;
    writeln!(
        stdout,
        "iota = {}, a1 = {}",
        fmt_num(p.iota()),
        fmt_num(p.a1())
    )?;
    let w3 = admissible_window(&p);
    let w1 = admissible_window_1d(&p);
    writeln!(stdout, "window = {w3}")?;
    writeln!(stdout, "window_1d = {w1}")?;
    if w3.is_empty() {
        writeln!(stdout, "window empty: no admissible tail exponent")?;
        return Ok(EXIT_INVALID);
    }
    let fam = EpsFamilySpec { base: cfg.data };
    let (r0, q0) = (fam.r0(&p), fam.q0(&p));
    writeln!(stdout, "r0 = 1/{} = {r0}", fmt_num(1.0 / r0))?;
    writeln!(stdout, "q0 = 1/{} = {q0}", fmt_num(1.0 / q0))?;
    if let Err(e) = cfg.data.check_window(&p) {
        writeln!(stdout, "{e}")?;
        return Ok(EXIT_INVALID);
    }
    writeln!(stdout, "a = {} admissible", fmt_num(cfg.data.a))?;
    Ok(EXIT_OK)
}

/// One-line report `{E0, window, r0, q0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataReport {
    #[serde(rename = "E0")]
    pub e0: f64,
    pub window: String,
    pub r0: f64,
    pub q0: f64,
}

pub fn data_report(cfg: &RunConfig, p: &FluidParams, e0: f64) -> String {
    let fam = EpsFamilySpec { base: cfg.data };
    let r = DataReport {
        e0,
        window: admissible_window(p).to_string(),
        r0: fam.r0(p),
        q0: fam.q0(p),
    };
    serde_json::to_string(&r).expect("report serializes")
}

pub fn family_file_name(eps: f64) -> String {
    format!("initial_data_eps{eps:e}.csv")
}

pub fn cmd_make_data(
    cfg: &RunConfig,
    family: bool,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let g = cfg.grid()?;
    let data = build_initial_data(&cfg.data, &p, &g)?;
    fs::write(out.join("initial_data.csv"), initial_data_csv(&data, &p)?)?;
    let e0 = e0_quantity(&data.rho0, &data.u0, &p)?.total();
    let mut summary = data_report(cfg, &p, e0);
    summary.push('\n');
    if family {
        let spec = EpsFamilySpec { base: cfg.data };
        for &eps in &cfg.family.eps_ladder {
            let pe = p.with_epsilon(eps)?;
            let d = build_eps_family(&spec, &pe, &g, eps)?;
            fs::write(out.join(family_file_name(eps)), initial_data_csv(&d, &pe)?)?;
            let e = e0_quantity(&d.rho0, &d.u0, &pe)?.total();
            let _ = writeln!(summary, "eps={eps:e} E0={e:?}");
        }
    }
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{summary}")?;
    Ok(EXIT_OK)
}

/// Snapshot file name for time `t`.
pub fn snapshot_name(t: f64) -> String {
    format!("snap_t{t:.6}.csv")
}

/// Writes a snapshot CSV per snapshot and keeps diagnostics.
struct FileSink<'a> {
    dir: &'a Path,
    p: FluidParams,
    rec: Recorder,
}

impl Sink for FileSink<'_> {
    fn snapshot(&mut self, s: &State) -> crate::Result<()> {
        let csv = s.to_csv(&self.p)?;
        fs::write(self.dir.join(snapshot_name(s.t)), csv)
            .map_err(|e| Error::InvalidConfig(format!("cannot write snapshot: {e}")))?;
        self.rec.snapshot(s)
    }

    fn step(&mut self, log: &StepLog) -> crate::Result<()> {
        self.rec.step(log)
    }
}

pub fn cmd_run(cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let g = cfg.grid()?;
    let data = build_initial_data(&cfg.data, &p, &g)?;
    let s0 = State::from_density(&data.rho0, &data.u0, &p, &cfg.solver)?;
    let mut sink = FileSink {
        dir: out,
        p,
        rec: Recorder::new(&p),
    };
    let result = run(&s0, &p, &cfg.solver, &mut sink);
    fs::write(out.join("diag.csv"), sink.rec.diag_csv())?;
    fs::write(out.join("steps.csv"), sink.rec.step_log_csv())?;
    let output = match result {
        Ok(o) => o,
        Err(e) => {
            let t = match &e {
                Error::StepFailed { t, .. } => *t,
                _ => f64::NAN,
            };
            fs::write(
                out.join("summary.txt"),
                format!("status=failed\nt={t}\nerror={e}\n"),
            )?;
            return Err(e.into());
        }
    };
    let mut summary = String::from("status=ok\n");
    let _ = writeln!(summary, "t_end={}", output.final_state.t);
    let _ = writeln!(summary, "steps={}", output.steps);
    let _ = writeln!(summary, "snapshots={}", output.snapshots);
    let _ = writeln!(summary, "floor_hits={}", output.total_floor_hits);
    let recs = &sink.rec.records;
    if recs.len() >= 2 {
        let c = check_conservation(recs, 1e-6)?;
        let d = check_dissipation(recs, f64::INFINITY)?;
        let m = uniform_monitor(recs)?;
        let _ = writeln!(summary, "mass_drift={:e}", c.mass_drift);
        let _ = writeln!(summary, "momentum_drift={:e}", c.momentum_drift);
        let _ = writeln!(summary, "energy_monotone={}", d.energy_monotone);
        let _ = writeln!(summary, "monitor={:e}", m.sup_monitor);
    }
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{summary}")?;
    Ok(EXIT_OK)
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let res = run_sweep(&cfg.sweep_plan()?, &p)?;
    fs::write(out.join("sweep.csv"), res.to_csv())?;
    let mut summary = res.summary_line();
    summary.push('\n');
    for r in res.per_eps.iter().filter(|r| r.failure.is_some()) {
        let _ = writeln!(
            summary,
            "failed eps={:e}: {}",
            r.eps,
            r.failure.as_deref().unwrap_or("")
        );
    }
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{summary}")?;
    Ok(if res.any_failed() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    })
}

pub fn cmd_eta_ladder(
    cfg: &RunConfig,
    out: &Path,
    stdout: &mut dyn Write,
) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let grid = Grid1D::new(
        cfg.eta.half_width,
        (cfg.grid.n as f64 * cfg.eta.half_width / cfg.grid.half_width).round() as usize,
    )?;
    let plan = EtaPlan {
        eta_ladder: cfg.eta.eta_ladder.clone(),
        eps: cfg.eta.eps,
        window_r: cfg.eta.window_r.unwrap_or(0.5 * grid.half_width()),
        t_end: cfg.eta.t_end,
        grid,
        data: cfg.data,
        solver: cfg.solver,
    };
    let r = run_eta_ladder(&plan, &p)?;
    fs::write(out.join("eta_ladder.csv"), r.to_csv())?;
    let summary = format!("eta_ladder monotone={}\n", r.monotone());
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{}{summary}", r.to_csv())?;
    Ok(EXIT_OK)
}

pub fn cmd_refine(cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let plan = RefinePlan {
        n_ladder: cfg.refine.n_ladder.clone(),
        half_width: cfg.grid.half_width,
        eps: p.epsilon(),
        t_end: cfg.refine.t_end,
        data: cfg.data,
        solver: cfg.solver,
    };
    let r = run_refinement(&plan, &p)?;
    fs::write(out.join("refine.csv"), r.to_csv())?;
    let fmt = |v: &[f64]| {
        v.iter()
            .map(|o| format!("{o:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let summary = format!(
        "refine order_c=[{}] order_u=[{}]\n",
        fmt(&r.order_c),
        fmt(&r.order_u)
    );
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{}{summary}", r.to_csv())?;
    Ok(EXIT_OK)
}

pub fn cmd_mms(cfg: &RunConfig, out: &Path, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = cfg.fluid()?;
    let study = MmsStudy {
        ns: cfg.mms.ns.clone(),
        t_end: cfg.mms.t_end,
        solver: cfg.solver,
    };
    let r = run_mms(&p, &study)?;
    fs::write(out.join("mms.csv"), r.to_csv())?;
    let fmt = r
        .orders
        .iter()
        .map(|o| format!("{o:.3}"))
        .collect::<Vec<_>>()
        .join(" ");
    let summary = format!("mms orders=[{fmt}]\n");
    fs::write(out.join("summary.txt"), &summary)?;
    write!(stdout, "{}{summary}", r.to_csv())?;
    Ok(EXIT_OK)
}

pub fn cmd_verify_structure(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let p = match cfg.fluid() {
        Ok(p) => p,
        Err(e) => {
            writeln!(stdout, "invalid parameters: {e}")?;
            return Ok(EXIT_INVALID);
        }
    };
    let s = &cfg.structure;
    let opts = StructureCheck {
        states: s.states,
        seed: s.seed,
        c_max: s.c_max,
        u_max: s.u_max,
        a1_scale: s.a1_scale,
    };
    let r = verify_structure(&p, &s.gammas, &opts)?;
    writeln!(stdout, "states = {}", r.states)?;
    writeln!(stdout, "max_asymmetry = {:e}", r.max_asymmetry)?;
    writeln!(stdout, "min_a0_diag = {:e}", r.min_a0_diag)?;
    writeln!(stdout, "max_eig_rel_err = {:e}", r.max_eig_rel_err)?;
    let ok = r.passes(s.eig_tol);
    writeln!(stdout, "structure {}", if ok { "ok" } else { "FAILED" })?;
    Ok(if ok { EXIT_OK } else { EXIT_STRUCTURE })
}
