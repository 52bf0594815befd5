use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use pauliprop::analytics::{self, bound_report, distributions};
use pauliprop::output::{self, BoundRow, VERSION};
use pauliprop::propagation::staggered_observable;
use pauliprop::verify::{Suite, SuiteReport};
use pauliprop::{
    build_xxz_chain, oracle, staggered_magnetization, Hamiltonian, HeisenbergEvolution,
    MagnetizationMode, Pauli, PauliSum, PauliWord, ProductState, PropagationError, RunConfig,
};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::{ConfigError, InitialState, Model, Observable, SimConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("propagation aborted: {0}")]
    Engine(#[from] PropagationError),
    #[error("{0} failed")]
    VerifyFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::VerifyFailed(_) => 1,
            CliError::Io { .. } | CliError::Config(_) | CliError::Input(_) => 2,
            CliError::Engine(_) => 3,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_file(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>,
) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(io_err(path))
}

pub fn load_hamiltonian(cfg: &SimConfig) -> Result<Hamiltonian, CliError> {
    match &cfg.model {
        Model::Xxz {
            len,
            jx,
            jy,
            jz,
            boundary,
        } => build_xxz_chain(*len, *jx, *jy, *jz, *boundary)
            .map_err(|e| CliError::Input(format!("hamiltonian: {e}"))),
        Model::File(path) => Hamiltonian::parse(&read(path)?)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
    }
}

pub fn initial_state(kind: InitialState, n: usize) -> ProductState {
    let uniform = |b| ProductState::uniform(n, b).expect("unit Bloch vector");
    match kind {
        InitialState::Neel => ProductState::neel(n),
        InitialState::Up => uniform([0.0, 0.0, 1.0]),
        InitialState::Down => uniform([0.0, 0.0, -1.0]),
        InitialState::Plus => uniform([1.0, 0.0, 0.0]),
    }
}

pub fn observable(obs: &Observable, n: usize) -> Result<PauliSum, CliError> {
    let bad = |msg: String| CliError::Config(ConfigError::Inconsistent(msg));
    match obs {
        Observable::StaggeredMz => Ok(staggered_observable(n)?),
        Observable::SiteZ(site) => {
            let w = PauliWord::single(n, *site, Pauli::Z)
                .map_err(|e| bad(format!("observable: {e}")))?;
            Ok(PauliSum::single(w, 1.0))
        }
        Observable::Word(w) if w.num_qubits() != n => Err(bad(format!(
            "observable has {} sites, hamiltonian has {n}",
            w.num_qubits()
        ))),
        Observable::Word(w) => Ok(PauliSum::single(w.clone(), 1.0)),
    }
}

/// What a `simulate` run produced.
#[derive(Debug)]
pub struct SimulationOutput {
    pub trajectory: PathBuf,
    pub records: usize,
    pub snapshots: usize,
    pub reference: Option<PathBuf>,
}

pub fn simulate(config_path: &Path) -> Result<SimulationOutput, CliError> {
    let text = read(config_path)?;
    let config_path = fs::canonicalize(config_path).map_err(io_err(config_path))?;
    let base = config_path.parent().unwrap_or(Path::new("/"));
    // A previous run's output can be passed back in; its header echoes the full configuration.
    let cfg = if text.starts_with("# version = ") {
        SimConfig::from_header(&text, base)?
    } else {
        SimConfig::parse(&text, base)?
    };
    let h = load_hamiltonian(&cfg)?;
    let n = h.num_qubits();
    let state = initial_state(cfg.state, n);
    let obs = observable(&cfg.observable, n)?;
    if cfg.reference && n > oracle::MAX_QUBITS_PURE {
        return Err(CliError::Input(format!(
            "dense reference supports at most {} sites, model has {n}",
            oracle::MAX_QUBITS_PURE
        )));
    }
    let run = RunConfig {
        record_every: cfg.record_every,
        record_ose: cfg.ose,
        ..RunConfig::new(cfg.time, cfg.steps, cfg.policy())
    };
    fs::create_dir_all(&cfg.out_dir).map_err(io_err(&cfg.out_dir))?;

    let mut header = vec![format!("version = {VERSION}")];
    header.extend(cfg.echo());
    header.push(format!("time_step = {}", run.tau()));
    header.push(format!("hamiltonian_terms = {}", h.len()));
    header.push(format!("term_order = {}", h.order_summary(12)));
    header.push("conjugation = hamiltonian terms in list order within each step".into());

    log::info!(
        "{n} sites, {} hamiltonian terms, {} steps of {}",
        h.len(),
        run.steps,
        run.tau()
    );
    let per_site =
        cfg.observable == Observable::StaggeredMz && cfg.mode == MagnetizationMode::PerSite;
    let mut snapshots = 0;
    let records = if per_site {
        staggered_magnetization(&h, &state, &run, MagnetizationMode::PerSite)?
    } else {
        let mut evo = HeisenbergEvolution::new(obs.clone(), &h, run.tau(), run.policy)?;
        let snapshot = |evo: &HeisenbergEvolution| -> Result<(), CliError> {
            let path = cfg
                .out_dir
                .join(format!("operator_step_{:04}.txt", evo.steps_done()));
            let head = vec![
                format!("version = {VERSION}"),
                format!("step = {}", evo.steps_done()),
                format!("time = {}", evo.time()),
                format!("terms = {}", evo.operator().len()),
                format!("norm_ratio = {}", evo.norm_ratio()),
            ];
            fs::write(&path, evo.rescaled_operator().to_dump(&head)).map_err(io_err(&path))
        };
        let mut records = Vec::new();
        if cfg.snapshot_every > 0 {
            snapshot(&evo)?;
            snapshots += 1;
        }
        for step in 1..=run.steps {
            evo.step()?;
            if run.records_at(step) {
                let rec = evo.record(&state, run.record_ose)?;
                log::debug!("step {step}: value {} with {} terms", rec.value, rec.terms);
                records.push(rec);
            }
            if cfg.snapshot_every > 0 && (step % cfg.snapshot_every == 0 || step == run.steps) {
                snapshot(&evo)?;
                snapshots += 1;
            }
        }
        records
    };

    let trajectory = cfg.out_dir.join("trajectory.csv");
    write_file(&trajectory, |w| {
        output::write_trajectory_csv(w, &header, &records, cfg.ose)
    })?;

    let reference = if cfg.reference {
        let rows = oracle::dense_trotter_trajectory(
            &h,
            &state,
            &obs,
            cfg.time,
            cfg.steps,
            cfg.record_every,
        )
        .map_err(|e| CliError::Input(format!("dense reference: {e}")))?;
        let rows: Vec<_> = rows.into_iter().filter(|r| r.0 > 0).collect();
        let path = cfg.out_dir.join("reference.csv");
        let mut head = header.clone();
        head.push("reference = dense state-vector oracle, same gate order".into());
        write_file(&path, |w| output::write_reference_csv(w, &head, &rows))?;
        Some(path)
    } else {
        None
    };

    Ok(SimulationOutput {
        trajectory,
        records: records.len(),
        snapshots,
        reference,
    })
}

/// Operator snapshot with its step and time.
struct Snapshot {
    step: usize,
    time: f64,
    operator: PauliSum,
}

fn load_snapshot(path: &Path) -> Result<Snapshot, CliError> {
    let text = read(path)?;
    let operator = PauliSum::parse_dump(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let num = |key: &str| output::header_value(&text, key).and_then(|v| v.parse::<f64>().ok());
    Ok(Snapshot {
        step: num("step").map(|s| s as usize).unwrap_or(0),
        time: num("time").unwrap_or(0.0),
        operator,
    })
}

fn snapshot_paths(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("operator_step_") && n.ends_with(".txt"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no operator_step_*.txt snapshots",
            dir.display()
        )));
    }
    Ok(paths)
}

#[derive(Debug, Clone, Default)]
pub struct AnalyzeOptions {
    pub alphas: Vec<f64>,
    pub ks: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub out: Option<PathBuf>,
}

/// Files written by `analyze`.
#[derive(Debug)]
pub struct AnalysisOutput {
    pub files: Vec<PathBuf>,
    pub snapshots: usize,
}

pub fn analyze(input: &Path, opts: &AnalyzeOptions) -> Result<AnalysisOutput, CliError> {
    for &a in &opts.alphas {
        if !(a > 0.0 && a <= 1.0) {
            return Err(CliError::Input(format!("alpha {a} outside (0, 1]")));
        }
    }
    for &e in &opts.epsilons {
        if e.is_nan() || e <= 0.0 {
            return Err(CliError::Input(format!("epsilon {e} must be positive")));
        }
    }
    if opts.ks.contains(&0) {
        return Err(CliError::Input("K values must be at least 1".into()));
    }
    let (snapshots, single, default_out) = if input.is_dir() {
        let paths = snapshot_paths(input)?;
        let snaps = paths
            .iter()
            .map(|p| load_snapshot(p))
            .collect::<Result<Vec<_>, _>>()?;
        (snaps, false, input.to_path_buf())
    } else if input.is_file() {
        let parent = input
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        (vec![load_snapshot(input)?], true, parent.to_path_buf())
    } else {
        return Err(CliError::Input(format!(
            "{}: no such file or directory",
            input.display()
        )));
    };
    let out = opts.out.clone().unwrap_or(default_out);
    fs::create_dir_all(&out).map_err(io_err(&out))?;
    let header = vec![
        format!("version = {VERSION}"),
        format!("source = {}", input.display()),
    ];
    let mut files = Vec::new();

    let mut ose_rows = Vec::new();
    for s in &snapshots {
        for &alpha in &opts.alphas {
            let r =
                analytics::ose(&s.operator, alpha).map_err(|e| CliError::Input(e.to_string()))?;
            ose_rows.push((s.time, alpha, r.value));
        }
    }
    let path = out.join("ose.csv");
    write_file(&path, |w| output::write_ose_csv(w, &header, &ose_rows))?;
    files.push(path);

    let growth: Vec<(usize, f64, usize)> = snapshots
        .iter()
        .map(|s| (s.step, s.time, s.operator.len()))
        .collect();
    let path = out.join("growth.csv");
    write_file(&path, |w| output::write_growth_csv(w, &header, &growth))?;
    files.push(path);

    for s in &snapshots {
        let d = distributions(&s.operator);
        let suffix = if single {
            String::new()
        } else {
            format!("_step_{:04}", s.step)
        };
        let mut head = header.clone();
        head.push(format!("time = {}", s.time));
        head.push(format!("terms = {}", d.terms));
        let path = out.join(format!("coefficients{suffix}.csv"));
        write_file(&path, |w| output::write_histogram_csv(w, &head, &d))?;
        files.push(path);
        let path = out.join(format!("weights{suffix}.csv"));
        write_file(&path, |w| output::write_weight_csv(w, &head, &d))?;
        files.push(path);
    }

    if !opts.ks.is_empty() {
        let mut rows = Vec::new();
        for s in &snapshots {
            for &alpha in opts.alphas.iter().filter(|&&a| a < 1.0) {
                let entropy = analytics::renyi_entropy(&s.operator, alpha);
                for &k in &opts.ks {
                    let err = analytics::truncation_error(&s.operator, k)
                        .map_err(|e| CliError::Input(e.to_string()))?;
                    let epsilons: Vec<Option<f64>> = if opts.epsilons.is_empty() {
                        vec![None]
                    } else {
                        opts.epsilons.iter().map(|&e| Some(e)).collect()
                    };
                    for eps in epsilons {
                        let report = bound_report(entropy, k as u64, alpha, eps)
                            .map_err(|e| CliError::Input(e.to_string()))?;
                        rows.push(BoundRow {
                            time: s.time,
                            report,
                            ln_tail: s.operator.squared_tail(k).ln(),
                            error_exact: err.exact,
                            error_bound: err.bound,
                        });
                    }
                }
            }
        }
        let path = out.join("bounds.csv");
        write_file(&path, |w| output::write_bound_csv(w, &header, &rows))?;
        files.push(path);
    }
    Ok(AnalysisOutput {
        files,
        snapshots: snapshots.len(),
    })
}

pub fn report_json(r: &SuiteReport, seed: u64) -> Value {
    let metrics: serde_json::Map<String, Value> = r
        .metrics
        .iter()
        .map(|(k, v)| (k.clone(), json!(v)))
        .collect();
    json!({
        "suite": r.suite.name(),
        "seed": seed,
        "passed": r.passed(),
        "checks": r.checks.iter().map(|c| json!({"name": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        "metrics": metrics,
        "notes": r.notes,
    })
}

/// Runs the named suite (or `all`) and returns the JSON summary and overall verdict.
pub fn verify(name: &str, seed: u64) -> Result<(Value, bool), CliError> {
    let suites: Vec<Suite> = if name == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![name.parse::<Suite>().map_err(CliError::Input)?]
    };
    let reports: Vec<SuiteReport> = suites.iter().map(|s| s.run(seed)).collect();
    let passed = reports.iter().all(SuiteReport::passed);
    let body: Vec<Value> = reports.iter().map(|r| report_json(r, seed)).collect();
    let value = if body.len() == 1 {
        body.into_iter().next().expect("one report")
    } else {
        json!({"passed": passed, "suites": body})
    };
    Ok((value, passed))
}

pub fn bound(entropy: f64, epsilon: f64, alpha: f64, k: Option<u64>) -> Result<Value, CliError> {
    let mut out = json!({"S": entropy, "epsilon": epsilon, "alpha": alpha});
    match analytics::k_prescription(entropy, epsilon, alpha) {
        Ok(p) => {
            out["k_required"] = json!(p.k);
            out["ln_k"] = json!(p.ln_k);
        }
        Err(analytics::AnalyticsError::BudgetOverflow { ln_k }) => {
            out["k_required"] = Value::Null;
            out["ln_k"] = json!(ln_k);
            out["error"] = json!(format!("exceeds representable budget (ln K = {ln_k:.4})"));
        }
        Err(e) => return Err(CliError::Input(e.to_string())),
    }
    if let Some(k) = k {
        let ln_delta = analytics::delta_bound(entropy, k as f64, alpha)
            .map_err(|e| CliError::Input(e.to_string()))?;
        out["K"] = json!(k);
        out["ln_delta_bound"] = json!(ln_delta);
    }
    Ok(out)
}
