use crate::config::{BackendKind, Config, EmbeddingProvider};
use crate::{BackendArgs, Cli, Cmd, DatagenCmd, SblpArgs, SblpCmd};
use leanopt::agents::{load_datasets, parse_number, Pipeline, RouteOptions, WorkflowKind};
use leanopt::datagen::{
    customer_demand, gen_flp_setup_costs, gen_nrm, gen_tp_costs, write_nrm_csv, LatLon, Location, RngSpec, SalesRow,
};
use leanopt::eval::{
    render_table, run_benchmark, EvalOptions, Formulator, PipelineFormulator, RunResult, TranscriptFormulator,
};
use leanopt::llm::{AgentTrace, ChatBackend, RemoteBackend, ScriptedBackend};
use leanopt::model::{emit_solver_script, parse_model_grammar, read_lp, write_lp, LinearModel, Params};
use leanopt::par::ExecMode;
use leanopt::refdata::{load_benchmark, load_refdata};
use leanopt::retrieval::{CsvTable, Embedder, LexicalEmbedder, RemoteEmbedder};
use leanopt::sblp::{
    build_network_planning, build_sblp, load_gam_instance, parse_od, BigM, GamInstance, LoadOptions, SblpError, ShadowMode,
};
use leanopt::solver::{solve_milp_with, Solution, SolverConfig, Status};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

/// Exit 1 for domain failures, 2 for usage and configuration problems.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Domain { message: String, trace: Option<PathBuf> },
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain { .. } => 1,
        }
    }

    pub fn report(&self, json: bool) {
        let (message, trace) = match self {
            Failure::Usage(m) => (m, None),
            Failure::Domain { message, trace } => (message, trace.as_ref()),
        };
        if json {
            println!("{}", json!({ "error": message, "exit_code": self.code(), "trace": trace }));
        } else {
            eprintln!("error: {message}");
            if let Some(t) = trace {
                eprintln!("trace: {}", t.display());
            }
        }
    }
}

fn usage(m: impl std::fmt::Display) -> Failure {
    Failure::Usage(m.to_string())
}

fn domain(m: impl std::fmt::Display) -> Failure {
    Failure::Domain { message: m.to_string(), trace: None }
}

type Res<T> = Result<T, Failure>;

fn read_text(p: &Path) -> Res<String> {
    std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))
}

fn read_table(p: &Path) -> Res<CsvTable> {
    if !p.is_file() {
        return Err(usage(format!("{}: no such file", p.display())));
    }
    CsvTable::read(p).map_err(|e| domain(format!("{}: {e}", p.display())))
}

struct Out {
    dir: PathBuf,
}

impl Out {
    fn new(dir: &Path) -> Res<Self> {
        std::fs::create_dir_all(dir).map_err(|e| usage(format!("{}: {e}", dir.display())))?;
        Ok(Out { dir: dir.to_path_buf() })
    }

    fn write(&self, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Res<PathBuf> {
        let p = self.dir.join(rel);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).map_err(|e| domain(format!("{}: {e}", parent.display())))?;
        }
        std::fs::write(&p, bytes).map_err(|e| domain(format!("{}: {e}", p.display())))?;
        Ok(p)
    }

    fn json(&self, rel: impl AsRef<Path>, v: &impl serde::Serialize) -> Res<PathBuf> {
        let text = serde_json::to_string_pretty(v).map_err(domain)? + "\n";
        self.write(rel, text)
    }
}

fn emit(json_mode: bool, v: Value, text: String) {
    use std::io::Write;
    let body = if json_mode { serde_json::to_string_pretty(&v).expect("plain json value") + "\n" } else { text };
    // a closed pipe (`| head`) is not an error
    let _ = std::io::stdout().lock().write_all(body.as_bytes());
}

/// Rounded to 1e-6 for display; JSON keeps the raw value.
fn shown(x: f64) -> f64 {
    let r = (x * 1e6).round() / 1e6;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

pub fn run(cli: &Cli, env: &dyn Fn(&str) -> Option<String>) -> Res<()> {
    let cfg = Config::load(cli.config.as_deref(), env).map_err(usage)?;
    match &cli.cmd {
        Cmd::Classify { query, backend } => classify(cli, &cfg, query, backend),
        Cmd::Formulate { query, data, backend, force_type, agnostic } => {
            let opts = RouteOptions { force_type: *force_type, force_agnostic: *agnostic };
            formulate(cli, &cfg, query, data, backend, &opts)
        }
        Cmd::Solve { lp, allow_infeasible } => solve(cli, &cfg.solver, lp, *allow_infeasible),
        Cmd::Evaluate { benchmark, repetitions, threads, sequential } => {
            evaluate(cli, &cfg, benchmark, *repetitions as usize, threads.map(|t| t as usize), *sequential)
        }
        Cmd::Datagen(d) => datagen(cli, d),
        Cmd::Sblp(s) => sblp(cli, &cfg.solver, s),
    }
}

fn embedder(cfg: &Config) -> Arc<dyn Embedder> {
    match cfg.embedding.provider {
        EmbeddingProvider::Lexical => Arc::new(LexicalEmbedder::default()),
        EmbeddingProvider::Remote => Arc::new(RemoteEmbedder::new(
            cfg.embedding.endpoint.clone().unwrap_or_default(),
            cfg.embedding.model.clone().unwrap_or_else(|| "text-embedding-3-small".into()),
            cfg.embedding.dim,
        )),
    }
}

fn backend(cfg: &Config, args: Option<&BackendArgs>) -> Res<Arc<dyn ChatBackend>> {
    match cfg.backend.kind {
        BackendKind::Scripted => {
            let path = args
                .and_then(|a| a.transcript.clone())
                .or_else(|| cfg.backend.transcript.clone())
                .ok_or_else(|| usage("scripted backend needs --transcript or backend.transcript"))?;
            let b = ScriptedBackend::from_file(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            Ok(Arc::new(b))
        }
        BackendKind::Remote => {
            let b = RemoteBackend::from_env(
                cfg.backend.endpoint.clone().unwrap_or_default(),
                cfg.backend.model.clone().unwrap_or_default(),
                Duration::from_secs(cfg.backend.timeout_secs),
            )
            .map_err(usage)?;
            Ok(Arc::new(b))
        }
    }
}

fn pipeline(cfg: &Config, backend: Arc<dyn ChatBackend>) -> Res<Pipeline> {
    let store = load_refdata(&cfg.refdata).map_err(|e| usage(format!("refdata {}: {e}", cfg.refdata.display())))?;
    Pipeline::new(backend, store, embedder(cfg), cfg.agents).map_err(|e| usage(format!("building FileQA index: {e}")))
}

fn classify(cli: &Cli, cfg: &Config, query: &Path, args: &BackendArgs) -> Res<()> {
    let q = read_text(query)?;
    let p = pipeline(cfg, backend(cfg, Some(args))?)?;
    let c = p.classify(q.trim());
    let out = Out::new(&cli.out)?;
    let trace = out.json("classify_trace.json", &c.trace)?;
    let mut text = format!("{}\n", c.ptype.full_name());
    if let Some(w) = &c.warning {
        text.push_str(&format!("warning: {w}\n"));
    }
    text.push_str(&format!("trace: {}\n", trace.display()));
    let v = json!({
        "problem_type": c.ptype.code(),
        "name": c.ptype.full_name(),
        "answer": c.answer,
        "fallback": c.fallback,
        "warning": c.warning,
        "trace": trace,
    });
    emit(cli.json, v, text);
    Ok(())
}

fn formulate(cli: &Cli, cfg: &Config, query: &Path, data: &Path, args: &BackendArgs, opts: &RouteOptions) -> Res<()> {
    let q = read_text(query)?;
    if !data.is_dir() {
        return Err(usage(format!("{}: not a directory", data.display())));
    }
    let tables = load_datasets(data).map_err(|e| usage(format!("{}: {e}", data.display())))?;
    let p = pipeline(cfg, backend(cfg, Some(args))?)?;
    let out = Out::new(&cli.out)?;
    let r = match p.route(q.trim(), &tables, opts) {
        Ok(r) => r,
        Err(e) => {
            let trace = out.json("trace.json", &e.traces)?;
            return Err(Failure::Domain { message: format!("formulation failed: {e}"), trace: Some(trace) });
        }
    };
    let mut files = serde_json::Map::new();
    files.insert("model".into(), json!(out.write("model.txt", &r.model_text)?));
    files.insert("lp".into(), json!(out.write("model.lp", write_lp(&r.model))?));
    files.insert("script".into(), json!(out.write("model.py", emit_solver_script(&r.model))?));
    files.insert("workflow".into(), json!(out.write("workflow.txt", &r.workflow)?));
    if let Some(plan) = &r.plan {
        files.insert("plan".into(), json!(out.json("plan.json", plan)?));
    }
    files.insert("trace".into(), json!(out.json("trace.json", &r.traces)?));
    files.insert("result".into(), json!(out.json("result.json", &r)?));
    let kind = match r.workflow_kind {
        WorkflowKind::Tailored => "tailored",
        WorkflowKind::Agnostic => "agnostic",
    };
    let mut text = format!("{} ({kind} workflow", r.ptype.full_name());
    if let Some(d) = &r.demo_id {
        text.push_str(&format!(", demo {d}"));
    }
    text.push_str(&format!("): {} variables, {} constraints\n", r.model.variables.len(), r.model.constraints.len()));
    for w in &r.warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    for (k, v) in &files {
        text.push_str(&format!("{k}: {}\n", v.as_str().unwrap_or_default()));
    }
    let v = json!({
        "problem_type": r.ptype.code(),
        "workflow": kind,
        "demo_id": r.demo_id,
        "variables": r.model.variables.len(),
        "constraints": r.model.constraints.len(),
        "warnings": r.warnings,
        "files": files,
    });
    emit(cli.json, v, text);
    Ok(())
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Optimal => "optimal",
        Status::Infeasible => "infeasible",
        Status::Unbounded => "unbounded",
        Status::GapLimit => "gap_limit",
    }
}

fn solve_model(m: &LinearModel, solver: &SolverConfig) -> Res<Solution> {
    solve_milp_with(m, solver).map_err(domain)
}

fn solution_json(s: &Solution) -> Value {
    json!({
        "status": status_name(s.status),
        "objective": s.has_point().then_some(s.objective),
        "gap": s.has_point().then_some(s.gap),
        "values": if s.has_point() { json!(s.values) } else { Value::Null },
    })
}

fn solve(cli: &Cli, solver: &SolverConfig, lp: &Path, allow_infeasible: bool) -> Res<()> {
    let text = read_text(lp)?;
    let model = if lp.extension().is_some_and(|x| x.eq_ignore_ascii_case("lp")) {
        read_lp(&text).map_err(|e| domain(format!("{}: {e}", lp.display())))?
    } else {
        parse_model_grammar(&text, &Params::new()).map_err(|e| domain(format!("{}: {e}", lp.display())))?
    };
    let s = solve_model(&model, solver)?;
    let mut text = format!("status: {}\n", status_name(s.status));
    if s.has_point() {
        text.push_str(&format!("objective: {}\n", shown(s.objective)));
        for (k, v) in &s.values {
            text.push_str(&format!("{k} = {}\n", shown(*v)));
        }
    }
    emit(cli.json, solution_json(&s), text);
    if s.has_point() || allow_infeasible {
        Ok(())
    } else {
        Err(domain(format!("model is {}", status_name(s.status))))
    }
}

fn run_dir(r: &RunResult) -> PathBuf {
    PathBuf::from("runs").join(&r.id).join(format!("rep{}", r.repetition))
}

fn evaluate(cli: &Cli, cfg: &Config, dir: &Path, reps: usize, threads: Option<usize>, sequential: bool) -> Res<()> {
    let instances = load_benchmark(dir).map_err(|e| usage(format!("benchmark {}: {e}", dir.display())))?;
    if let Some(n) = threads {
        // fails only if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let opts = EvalOptions {
        exec: if sequential { ExecMode::Sequential } else { cfg.eval.exec },
        token_edges: cfg.eval.token_edges.clone(),
        variable_edges: cfg.eval.variable_edges.clone(),
        ..EvalOptions::default()
    };
    let formulator: Box<dyn Formulator> = match cfg.backend.kind {
        BackendKind::Scripted => {
            let p = pipeline(cfg, Arc::new(ScriptedBackend::new(Vec::<String>::new())))?;
            Box::new(TranscriptFormulator::from_pipeline(&p, RouteOptions::default()))
        }
        BackendKind::Remote => {
            Box::new(PipelineFormulator { pipeline: pipeline(cfg, backend(cfg, None)?)?, opts: RouteOptions::default() })
        }
    };
    let e = run_benchmark(formulator.as_ref(), &instances, reps, &opts).map_err(usage)?;
    let out = Out::new(&cli.out)?;
    for r in &e.runs {
        let d = run_dir(r);
        out.json(d.join("trace.json"), &r.traces)?;
        if let Some(m) = &r.model {
            out.write(d.join("model.lp"), write_lp(m))?;
        }
        let summary: Vec<AgentTrace> = Vec::new();
        out.json(d.join("run.json"), &RunResult { traces: summary, model: None, ..r.clone() })?;
    }
    let table = render_table(&e.report);
    let report = out.json("report.json", &e.report)?;
    let table_path = out.write("report.txt", &table)?;
    let v = json!({
        "report": e.report,
        "files": { "report": report, "table": table_path, "runs": out.dir.join("runs") },
    });
    emit(cli.json, v, format!("{table}\nreport: {}\ntable: {}\n", report.display(), table_path.display()));
    Ok(())
}

fn column(t: &CsvTable, names: &[&str]) -> Res<usize> {
    t.headers
        .iter()
        .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
        .ok_or_else(|| domain(format!("{}: missing column {:?}", t.name, names[0])))
}

fn number(t: &CsvTable, row: usize, col: usize) -> Res<f64> {
    let cell = &t.rows[row][col];
    parse_number(cell)
        .ok_or_else(|| domain(format!("{}: row {}: {cell:?} in {:?} is not a number", t.name, row + 1, t.headers[col])))
}

fn locations(t: &CsvTable) -> Res<Vec<Location>> {
    let (n, lat, lon) = (
        column(t, &["Name", "Location", "City"])?,
        column(t, &["Latitude", "Lat"])?,
        column(t, &["Longitude", "Lon", "Lng"])?,
    );
    (0..t.rows.len())
        .map(|r| Ok(Location { name: t.rows[r][n].trim().to_string(), at: LatLon::new(number(t, r, lat)?, number(t, r, lon)?) }))
        .collect()
}

fn csv_bytes(headers: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Res<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers).map_err(domain)?;
    for r in rows {
        w.write_record(&r).map_err(domain)?;
    }
    w.into_inner().map_err(domain)
}

fn datagen(cli: &Cli, cmd: &DatagenCmd) -> Res<()> {
    let out = Out::new(&cli.out)?;
    let (file, rows, warnings) = match cmd {
        DatagenCmd::Nrm { sales, seed } => {
            let t = read_table(sales)?;
            let (p, u, price) = (
                column(&t, &["Product Name", "Product"])?,
                column(&t, &["Units Sold", "Units", "Quantity"])?,
                column(&t, &["Unit Price", "Price"])?,
            );
            let rows = (0..t.rows.len())
                .map(|r| {
                    let units = number(&t, r, u)?;
                    if units.fract() != 0.0 {
                        return Err(domain(format!("{}: row {}: units sold must be a whole number", t.name, r + 1)));
                    }
                    Ok(SalesRow { product: t.rows[r][p].trim().to_string(), units_sold: units as i64, unit_price: number(&t, r, price)? })
                })
                .collect::<Res<Vec<_>>>()?;
            let gen = gen_nrm(&rows, &RngSpec::new(*seed)).map_err(domain)?;
            let mut buf = Vec::new();
            write_nrm_csv(&gen, &mut buf).map_err(domain)?;
            (out.write("nrm.csv", buf)?, gen.len(), Vec::new())
        }
        DatagenCmd::Tp { locations: path, cost_per_mile, demand, seed } => {
            let locs = locations(&read_table(path)?)?;
            let tp = gen_tp_costs(&locs, cost_per_mile, &RngSpec::new(*seed)).map_err(domain)?;
            let mut buf = Vec::new();
            tp.write_csv(&mut buf).map_err(domain)?;
            let file = out.write("tp_costs.csv", buf)?;
            let mut warnings = Vec::new();
            if let Some(d) = demand {
                let t = read_table(d)?;
                let (n, q) = (column(&t, &["Region", "Name", "Customer"])?, column(&t, &["Demand"])?);
                let raw = (0..t.rows.len()).map(|r| Ok((t.rows[r][n].trim().to_string(), number(&t, r, q)?))).collect::<Res<Vec<_>>>()?;
                let (kept, w) = customer_demand(&tp.customers, &raw);
                warnings = w;
                out.write("tp_demand.csv", csv_bytes(&["Customer", "Demand"], kept.iter().map(|(c, q)| vec![c.clone(), q.to_string()]))?)?;
            }
            (file, tp.suppliers.len() * tp.customers.len(), warnings)
        }
        DatagenCmd::Flp { facilities, min, max, seed } => {
            let t = read_table(facilities)?;
            let costs = gen_flp_setup_costs(t.rows.len(), (*min, *max), &RngSpec::new(*seed)).map_err(domain)?;
            let rows = t.rows.iter().zip(&costs).map(|(r, c)| vec![r[0].trim().to_string(), c.to_string()]);
            let header = t.headers.first().map(String::as_str).unwrap_or("Facility");
            (out.write("flp_setup_costs.csv", csv_bytes(&[header, "Setup Cost"], rows)?)?, costs.len(), Vec::new())
        }
    };
    let mut text = format!("wrote {} ({rows} rows)\n", file.display());
    for w in &warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    emit(cli.json, json!({ "file": file, "rows": rows, "warnings": warnings }), text);
    Ok(())
}

fn load_sblp(a: &SblpArgs) -> Res<GamInstance> {
    let opts = LoadOptions {
        shadow: if a.ratio { ShadowMode::Ratio } else { ShadowMode::Absolute },
        consumption: a.consumption.iter().cloned().collect(),
        default_capacity: a.default_capacity,
    };
    load_gam_instance(&a.dir, &opts).map_err(|e| match e {
        SblpError::MissingFile(_) => usage(e),
        e => domain(e),
    })
}

fn flight_args(inst: &GamInstance, specs: &[String]) -> Res<Vec<leanopt::sblp::FlightKey>> {
    specs
        .iter()
        .map(|s| {
            let (od, t) = s.trim().rsplit_once(char::is_whitespace).ok_or_else(|| usage(format!("flight {s:?}: expected \"A-B 06:25\"")))?;
            let (o, d) = parse_od(od.trim()).ok_or_else(|| usage(format!("flight {s:?}: bad origin-destination")))?;
            inst.flight(&o, &d, t.trim()).map_err(domain)
        })
        .collect()
}

fn sblp(cli: &Cli, solver: &SolverConfig, cmd: &SblpCmd) -> Res<()> {
    let out = Out::new(&cli.out)?;
    let (args, plan) = match cmd {
        SblpCmd::Build { args } => (args, None),
        SblpCmd::Plan { args, z, big_m } => (args, Some((*z as usize, *big_m))),
    };
    let inst = load_sblp(args)?;
    let chosen = flight_args(&inst, &args.flights)?;
    let (model, lp_name) = match plan {
        None => {
            let sel = if chosen.is_empty() { (0..inst.options.len()).collect() } else { inst.options_on(&chosen) };
            (build_sblp(&inst, &sel).map_err(domain)?, "sblp.lp")
        }
        Some((z, big_m)) => {
            let cands = if chosen.is_empty() { inst.flights() } else { chosen.clone() };
            let m = big_m.map_or(BigM::default(), BigM::Fixed);
            (build_network_planning(&inst, &cands, z, m).map_err(domain)?, "sblp_plan.lp")
        }
    };
    let lp = out.write(lp_name, write_lp(&model))?;
    let s = solve_model(&model, solver)?;
    let selected: Vec<String> = if plan.is_some() && s.has_point() {
        let cands = if chosen.is_empty() { inst.flights() } else { chosen };
        cands
            .iter()
            .filter(|f| s.values.get(&inst.flight_var(f)).is_some_and(|y| *y > 0.5))
            .map(|f| inst.flight_label(f))
            .collect()
    } else {
        Vec::new()
    };
    let mut text = format!(
        "wrote {} ({} variables, {} constraints)\nstatus: {}\n",
        lp.display(),
        model.variables.len(),
        model.constraints.len(),
        status_name(s.status)
    );
    if s.has_point() {
        text.push_str(&format!("objective: {}\n", shown(s.objective)));
    }
    if plan.is_some() {
        text.push_str(&format!("selected {} flights: {}\n", selected.len(), selected.join(", ")));
    }
    let v = json!({
        "lp": lp,
        "variables": model.variables.len(),
        "constraints": model.constraints.len(),
        "solution": solution_json(&s),
        "selected_flights": plan.map(|_| selected),
    });
    emit(cli.json, v, text);
    if s.has_point() {
        Ok(())
    } else {
        Err(domain(format!("model is {}", status_name(s.status))))
    }
}
