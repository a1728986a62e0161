//! Command-line front end. `run` returns the report and the exit status so
//! the binary only prints.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use indexmap::IndexMap;
use serde::Serialize;
use serde_json::{json, Value};

use crate::boundedness::{check_nupbr_loc, dsv_statistic_sup, NupbrVerdict};
use crate::deflator::{
    pasting_pipeline, synth_deflator_dsv, synth_deflator_nupbr, verify_smd, PipelineError, SupportMode, SynthResult,
    VerifySpec,
};
use crate::gallery::{gallery, gallery_file, sweep_names, NAMES};
use crate::gsm::compare_projection;
use crate::instance::{parse_q_list, render_values, DeflatorFile, Instance, InstanceError};
use crate::lab::{check_theorem_equivalences, fuzz, verify_char_time, FuzzConfig};
use crate::process::{cemetery_structure, classify, sample_closure, ClassKind};
use crate::rational::{fmt_q, qi};
use crate::tree::Process;

pub const EXIT_HOLDS: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Human,
    Machine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthMode {
    Nupbr,
    Dsv,
}

#[derive(Debug, Parser)]
#[command(name = "smd", about = "Supermartingale deflators and boundedness on finite event trees")]
pub struct Cli {
    #[arg(long, value_enum, default_value = "human", global = true)]
    pub format: Format,
    /// Add wall-clock timings to the report (makes it non-deterministic).
    #[arg(long, global = true)]
    pub timings: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SP / SPD / SPP classification with witness.
    Classify { instance: String },
    /// Local boundedness of the closure, level by level.
    CheckNupbr { instance: String },
    /// DSV statistic for a dominating process.
    CheckDsv {
        instance: String,
        /// Generator reference (`name`, `ray.A`, `ray.A+B`); defaults to the instance's or the classifier's.
        #[arg(long)]
        xhat: Option<String>,
    },
    /// Deflator LP.
    SynthDeflator {
        instance: String,
        #[arg(long, value_enum, default_value = "nupbr")]
        mode: SynthMode,
        #[arg(long)]
        xhat: Option<String>,
        /// Write the LP as text; `-` puts it into the report.
        #[arg(long)]
        emit_lp: Option<String>,
        /// Write the deflator file.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Checks a deflator file against the generators and closure samples.
    VerifySmd {
        instance: String,
        #[arg(long)]
        deflator: PathBuf,
        #[arg(long)]
        xhat: Option<String>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Seeded sample of the fork-convex closure.
    ClosureSample {
        instance: String,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated ray parameters.
        #[arg(long, default_value = "0,1,3")]
        ray_values: String,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Deflator via the cemetery-time ladder and filtration enlargement.
    PastingPipeline {
        instance: String,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Generalized supermartingale check of the instance's raw rows.
    GsmCheck {
        instance: String,
        /// Row that decides the exit status; defaults to the first.
        #[arg(long)]
        row: Option<String>,
    },
    /// Consistency of the deflator statements on one instance, the gallery, or fuzzed instances.
    VerifyTheorems {
        instance: Option<String>,
        #[arg(long)]
        fuzz: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for counterexample files.
        #[arg(long)]
        counterexamples: Option<PathBuf>,
    },
    /// Lists gallery names, or prints one instance.
    Gallery {
        name: Option<String>,
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    pub exit: i32,
    pub verdicts: IndexMap<String, String>,
    pub witnesses: IndexMap<String, String>,
    pub values: IndexMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<IndexMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    fn new(command: &str) -> Self {
        RunReport {
            command: command.into(),
            instance: None,
            digest: None,
            exit: EXIT_HOLDS,
            verdicts: IndexMap::new(),
            witnesses: IndexMap::new(),
            values: IndexMap::new(),
            timings: None,
            error: None,
        }
    }

    fn verdict(&mut self, name: &str, holds: bool) {
        self.verdicts.insert(name.into(), if holds { "holds" } else { "fails" }.into());
    }

    fn value(&mut self, name: &str, v: impl Into<Value>) {
        self.values.insert(name.into(), v.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Machine => serde_json::to_string_pretty(self).expect("report serializes"),
            Format::Human => self.render_human(),
        }
    }

    fn render_human(&self) -> String {
        let mut out = self.command.to_string();
        if let Some(i) = &self.instance {
            out += &format!(" {i}");
        }
        out.push('\n');
        if let Some(d) = &self.digest {
            out += &format!("  digest {d}\n");
        }
        if let Some(e) = &self.error {
            out += &format!("  error: {e}\n");
        }
        for (k, v) in &self.verdicts {
            out += &format!("  {k}: {v}\n");
        }
        for (k, v) in &self.witnesses {
            out += &format!("  witness {k}: {v}\n");
        }
        for (k, v) in &self.values {
            flatten(&mut out, k, v);
        }
        if let Some(t) = &self.timings {
            for (k, v) in t {
                out += &format!("  time {k}: {v}\n");
            }
        }
        out += &format!("  exit {}\n", self.exit);
        out
    }
}

fn flatten(out: &mut String, key: &str, v: &Value) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(out, &format!("{key}.{k}"), x);
            }
        }
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => {
            for (i, x) in a.iter().enumerate() {
                flatten(out, &format!("{key}[{i}]"), x);
            }
        }
        Value::Array(a) => {
            let items: Vec<String> = a.iter().map(scalar).collect();
            out.push_str(&format!("  {key} = [{}]\n", items.join(", ")));
        }
        Value::String(s) if s.contains('\n') => {
            out.push_str(&format!("  {key} =\n"));
            for line in s.lines() {
                out.push_str(&format!("    {line}\n"));
            }
        }
        _ => out.push_str(&format!("  {key} = {}\n", scalar(v))),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// `gallery:NAME` or a path to an instance file.
pub fn load_instance(spec: &str) -> Result<Instance, InstanceError> {
    match spec.strip_prefix("gallery:") {
        Some(name) => gallery(name),
        None => {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| InstanceError::Io { path: spec.into(), message: e.to_string() })?;
            Instance::parse(&text)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), InstanceError> {
    std::fs::write(path, text).map_err(|e| InstanceError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn values_json(inst: &Instance, p: &Process) -> Value {
    json!(render_values(&inst.gens.tree, p))
}

/// Explicit name, else the instance's dominating process, else a dominating mixture.
pub fn resolve_xhat(inst: &Instance, xhat: &Option<String>) -> Result<(String, Process), InstanceError> {
    if let Some(r) = xhat.as_ref().or(inst.dominating.as_ref()) {
        let p = inst
            .gens
            .resolve(r)
            .ok_or_else(|| InstanceError::Field { field: "xhat".into(), message: format!("unknown process {r:?}") })?;
        return Ok((r.clone(), p));
    }
    let c = classify(&inst.gens);
    c.witness.map(|w| ("mixture".to_string(), w)).ok_or_else(|| InstanceError::Field {
        field: "xhat".into(),
        message: "instance has no dominating process".into(),
    })
}

fn synth_values(rep: &mut RunReport, inst: &Instance, res: &SynthResult) {
    rep.value("delta", fmt_q(&res.delta));
    rep.value("pivots", res.solution.pivots);
    if let Some(d) = &res.deflator {
        rep.value("mode", d.mode.name());
        rep.value("deflator", values_json(inst, &d.y));
    }
    if let Some(c) = &res.certificate {
        let m: IndexMap<String, String> = c.multipliers.iter().map(|(l, y)| (l.clone(), fmt_q(y))).collect();
        rep.value("certificate", json!(m));
        rep.value("certificate_verified", c.verified);
        rep.witnesses.insert("infeasibility".into(), c.multipliers.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>().join(", "));
    }
}

pub fn run(cli: &Cli) -> RunReport {
    let start = Instant::now();
    let name = command_name(&cli.command);
    let mut rep = match execute(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            let mut r = RunReport::new(name);
            r.exit = EXIT_INPUT;
            r.error = Some(e.to_string());
            r
        }
    };
    if cli.timings {
        let mut t = IndexMap::new();
        t.insert("total_us".into(), start.elapsed().as_micros().to_string());
        rep.timings = Some(t);
    }
    rep
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Classify { .. } => "classify",
        Command::CheckNupbr { .. } => "check-nupbr",
        Command::CheckDsv { .. } => "check-dsv",
        Command::SynthDeflator { .. } => "synth-deflator",
        Command::VerifySmd { .. } => "verify-smd",
        Command::ClosureSample { .. } => "closure-sample",
        Command::PastingPipeline { .. } => "pasting-pipeline",
        Command::GsmCheck { .. } => "gsm-check",
        Command::VerifyTheorems { .. } => "verify-theorems",
        Command::Gallery { .. } => "gallery",
    }
}

fn with_instance(name: &str, spec: &str) -> Result<(RunReport, Instance), InstanceError> {
    let inst = load_instance(spec)?;
    let mut rep = RunReport::new(name);
    rep.instance = Some(spec.into());
    rep.digest = Some(inst.digest());
    Ok((rep, inst))
}

fn classify_into(rep: &mut RunReport, inst: &Instance) {
    let c = classify(&inst.gens);
    let kind = match c.kind {
        ClassKind::Sp => "SP",
        ClassKind::Spd => "SPD",
        ClassKind::Spp => "SPP",
    };
    rep.value("kind", kind);
    if let Some(w) = &c.witness {
        rep.value("witness", values_json(inst, w));
    }
    rep.value("absorbing", inst.gens.is_absorbing());
}

fn nupbr_into(rep: &mut RunReport, inst: &Instance) {
    let r = check_nupbr_loc(&inst.gens);
    rep.verdict("nupbr_loc", r.verdict.holds());
    if let NupbrVerdict::Fails { time, node } = &r.verdict {
        rep.witnesses.insert("unbounded".into(), format!("t = {time}, node {node}"));
        rep.exit = EXIT_FAILS;
    }
    let mut levels = IndexMap::new();
    for t in 0..=inst.gens.tree.horizon() {
        let lv: IndexMap<String, String> = r.level(&inst.gens, t).into_iter().map(|(n, v)| (n, v.to_string())).collect();
        levels.insert(format!("t{t}"), lv);
    }
    rep.value("sup", json!(levels));
}

fn dsv_into(rep: &mut RunReport, inst: &Instance, xhat: &Option<String>) -> Result<(), InstanceError> {
    let (label, hat) = resolve_xhat(inst, xhat)?;
    let r = dsv_statistic_sup(&inst.gens, &hat)
        .map_err(|e| InstanceError::Field { field: "xhat".into(), message: e.to_string() })?;
    rep.verdict("dsv", r.holds);
    rep.value("xhat", label);
    rep.value("sup", r.sup.to_string());
    let tree = &inst.gens.tree;
    let anchors: Vec<Value> = r
        .anchors
        .iter()
        .map(|a| {
            json!({
                "leaf": tree.id(a.leaf),
                "anchor": tree.id(a.anchor),
                "cemetery": a.cemetery.to_string(),
                "statistic": a.statistic.to_string(),
            })
        })
        .collect();
    rep.value("anchors", anchors);
    if !r.holds {
        rep.exit = EXIT_FAILS;
    }
    Ok(())
}

fn synth_into(rep: &mut RunReport, inst: &Instance, mode: SynthMode, xhat: &Option<String>) -> Result<SynthResult, InstanceError> {
    let res = match mode {
        SynthMode::Nupbr => synth_deflator_nupbr(&inst.gens),
        SynthMode::Dsv => {
            let (label, hat) = resolve_xhat(inst, xhat)?;
            rep.value("xhat", label);
            synth_deflator_dsv(&inst.gens, &hat)
        }
    }
    .map_err(|e| InstanceError::Field { field: "deflator".into(), message: e.to_string() })?;
    rep.verdict("deflator", res.feasible());
    synth_values(rep, inst, &res);
    if !res.feasible() {
        rep.exit = EXIT_FAILS;
    }
    Ok(res)
}

/// Returns the deflator when the pipeline ran.
fn pipeline_into(rep: &mut RunReport, inst: &Instance) -> Option<crate::deflator::Deflator> {
    match pasting_pipeline(&inst.gens) {
        Ok(p) => {
            let ok = p.verification.passes() && p.zero_set_ok;
            rep.verdict("smd", ok);
            rep.value("delta", fmt_q(&p.deflator.delta));
            rep.value("deflator", values_json(inst, &p.deflator.y));
            let stages: Vec<Value> = p
                .stages
                .iter()
                .map(|s| {
                    json!({
                        "rung": s.rung,
                        "members": s.members,
                        "tau": s.tau.render(&inst.gens.tree).into_iter().collect::<IndexMap<_, _>>(),
                        "refined_nodes": s.tree.len(),
                        "rung_delta": fmt_q(&s.rung_delta),
                        "projected": values_json(inst, &s.projected),
                    })
                })
                .collect();
            rep.value("stages", stages);
            rep.value("violations", serde_json::to_value(&p.verification.violations).expect("violations serialize"));
            if !ok {
                rep.exit = EXIT_FAILS;
            }
            Some(p.deflator)
        }
        Err(e @ (PipelineError::NotAbsorbing | PipelineError::Nupbr { .. })) => {
            rep.verdict("precondition", false);
            rep.witnesses.insert("precondition".into(), e.to_string());
            rep.exit = EXIT_FAILS;
            None
        }
        Err(e) => {
            rep.verdict("smd", false);
            rep.error = Some(e.to_string());
            rep.exit = EXIT_FAILS;
            None
        }
    }
}

fn gsm_into(rep: &mut RunReport, inst: &Instance, row: &Option<String>) -> Result<(), InstanceError> {
    if inst.raw.is_empty() {
        return Err(InstanceError::Field { field: "raw".into(), message: "instance has no raw rows".into() });
    }
    let deciding = row.clone().unwrap_or_else(|| inst.raw.keys().next().expect("nonempty").clone());
    if !inst.raw.contains_key(&deciding) {
        return Err(InstanceError::Field { field: "row".into(), message: format!("unknown raw row {deciding:?}") });
    }
    let tree = &inst.gens.tree;
    for (rname, z) in &inst.raw {
        let c = compare_projection(tree, z).map_err(|source| InstanceError::Raw { field: format!("raw.{rname}"), source })?;
        rep.verdict(&format!("{rname}.gsm"), c.gsm.holds);
        rep.verdict(&format!("{rname}.projection_supermartingale"), c.projection_check.holds());
        if let Some(w) = c.gsm.witness() {
            rep.witnesses.insert(
                format!("{rname}.gsm"),
                format!("s = {}, t = {}, atom {}: {} > {}", w.s, w.t, tree.id(w.atom), fmt_q(&w.expectation), fmt_q(&w.mass)),
            );
        }
        let table: Vec<Value> = c
            .gsm
            .rows
            .iter()
            .map(|r| {
                json!({"s": r.s, "t": r.t, "atom": tree.id(r.atom), "expectation": fmt_q(&r.expectation), "mass": fmt_q(&r.mass)})
            })
            .collect();
        let by_time: Vec<String> =
            (0..=tree.horizon()).filter(|&t| tree.level(t).len() == 1).map(|t| fmt_q(&c.projection.0[tree.level(t)[0]])).collect();
        rep.value(&format!("{rname}.projection"), values_json(inst, &c.projection));
        rep.value(&format!("{rname}.projection_trivial_times"), by_time);
        rep.value(&format!("{rname}.table"), table);
        if *rname == deciding && !c.gsm.holds {
            rep.exit = EXIT_FAILS;
        }
    }
    Ok(())
}

/// Report for an already loaded instance, with default options.
pub fn report_for(command: &str, inst: &Instance) -> Result<RunReport, InstanceError> {
    let mut rep = RunReport::new(command);
    rep.digest = Some(inst.digest());
    match command {
        "classify" => classify_into(&mut rep, inst),
        "check-nupbr" => nupbr_into(&mut rep, inst),
        "check-dsv" => dsv_into(&mut rep, inst, &None)?,
        "synth-deflator" => {
            synth_into(&mut rep, inst, SynthMode::Nupbr, &None)?;
        }
        "pasting-pipeline" => {
            pipeline_into(&mut rep, inst);
        }
        "gsm-check" => gsm_into(&mut rep, inst, &None)?,
        other => {
            return Err(InstanceError::Field { field: "command".into(), message: format!("unsupported command {other:?}") })
        }
    }
    Ok(rep)
}

fn execute(command: &Command) -> Result<RunReport, InstanceError> {
    let name = command_name(command);
    match command {
        Command::Classify { instance } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            classify_into(&mut rep, &inst);
            Ok(rep)
        }
        Command::CheckNupbr { instance } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            nupbr_into(&mut rep, &inst);
            Ok(rep)
        }
        Command::CheckDsv { instance, xhat } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            dsv_into(&mut rep, &inst, xhat)?;
            Ok(rep)
        }
        Command::SynthDeflator { instance, mode, xhat, emit_lp, emit } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            let res = synth_into(&mut rep, &inst, *mode, xhat)?;
            match emit_lp.as_deref() {
                Some("-") => rep.value("lp", res.lp.render()),
                Some(path) => write_file(Path::new(path), &res.lp.render())?,
                None => {}
            }
            if let (Some(path), Some(d)) = (emit, &res.deflator) {
                write_file(path, &DeflatorFile::from_deflator(&inst.gens.tree, d).to_json())?;
            }
            Ok(rep)
        }
        Command::VerifySmd { instance, deflator, xhat, depth, seed } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            let text = std::fs::read_to_string(deflator)
                .map_err(|e| InstanceError::Io { path: deflator.display().to_string(), message: e.to_string() })?;
            let file = DeflatorFile::parse(&text)?;
            let y = file.process(&inst.gens.tree)?;
            let hat = match file.mode {
                SupportMode::StrictBeforeThatWithBoundary => Some(resolve_xhat(&inst, xhat)?.1),
                _ => None,
            };
            let samples = sample_closure(&inst.gens, *depth, *seed, &[qi(0), qi(1), qi(3)]).elements;
            let spec = VerifySpec { mode: file.mode, delta: Some(file.delta.0.clone()), xhat: hat };
            let r = verify_smd(&inst.gens, &y, &spec, &samples);
            rep.verdict("smd", r.passes());
            rep.value("mode", file.mode.name());
            rep.value("checked_processes", r.checked_processes);
            rep.value("violations", serde_json::to_value(&r.violations).expect("violations serialize"));
            if !r.passes() {
                rep.exit = EXIT_FAILS;
            }
            Ok(rep)
        }
        Command::ClosureSample { instance, depth, seed, ray_values, emit } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            let rv = parse_q_list(ray_values)?;
            let s = sample_closure(&inst.gens, *depth, *seed, &rv);
            rep.value("elements", s.elements.len());
            rep.value("discarded", s.discarded);
            rep.value("exhausted", s.exhausted);
            let tree = &inst.gens.tree;
            let maxima = Process::from_fn(tree, |n| s.elements.iter().map(|e| e.value.0[n].clone()).max().unwrap_or_default());
            rep.value("max", values_json(&inst, &maxima));
            if let Some(path) = emit {
                let items: Vec<Value> = s
                    .elements
                    .iter()
                    .map(|e| json!({"recipe": e.recipe, "values": render_values(tree, &e.value)}))
                    .collect();
                write_file(path, &serde_json::to_string_pretty(&items).expect("samples serialize"))?;
            }
            Ok(rep)
        }
        Command::PastingPipeline { instance, emit } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            if let (Some(path), Some(d)) = (emit, pipeline_into(&mut rep, &inst)) {
                write_file(path, &DeflatorFile::from_deflator(&inst.gens.tree, &d).to_json())?;
            }
            Ok(rep)
        }
        Command::GsmCheck { instance, row } => {
            let (mut rep, inst) = with_instance(name, instance)?;
            gsm_into(&mut rep, &inst, row)?;
            Ok(rep)
        }
        Command::VerifyTheorems { instance, fuzz: count, seed, counterexamples } => {
            let mut rep = RunReport::new(name);
            let mut trips = 0usize;
            let targets: Vec<String> = match instance {
                Some(i) => vec![i.clone()],
                None => sweep_names().into_iter().map(|n| format!("gallery:{n}")).collect(),
            };
            if let Some(i) = instance {
                let inst = load_instance(i)?;
                rep.instance = Some(i.clone());
                rep.digest = Some(inst.digest());
            }
            for spec in &targets {
                let inst = load_instance(spec)?;
                let eq = check_theorem_equivalences(&inst.gens);
                let tt = cemetery_structure(&inst.gens).ttilde;
                let ct = verify_char_time(&inst.gens, &tt).map(|r| r.consistent).unwrap_or(true);
                rep.verdict(spec, eq.consistent && ct);
                let tuple: Vec<&str> = eq.verdicts().iter().map(|&h| if h { "T" } else { "F" }).collect();
                rep.value(spec, json!({"statements": tuple.join(""), "absorbing": eq.absorbing}));
                if !eq.consistent || !ct {
                    trips += 1;
                    rep.witnesses.insert(spec.clone(), eq.violations.join("; "));
                }
            }
            if let Some(n) = count {
                let s = fuzz(*n, *seed, &FuzzConfig::default());
                rep.value("fuzz_instances", s.instances);
                rep.value("fuzz_trips", s.trips.len());
                let combos: IndexMap<String, usize> = s
                    .combinations
                    .iter()
                    .map(|((abs, v), c)| {
                        let t: String = v.iter().map(|&h| if h { 'T' } else { 'F' }).collect();
                        (format!("{}{t}", if *abs { "absorbing " } else { "general " }), *c)
                    })
                    .collect();
                rep.value("fuzz_combinations", json!(combos));
                if let Some(dir) = counterexamples {
                    std::fs::create_dir_all(dir).map_err(|e| InstanceError::Io { path: dir.display().to_string(), message: e.to_string() })?;
                    for (k, c) in s.trips.iter().enumerate() {
                        let text = serde_json::to_string_pretty(c).expect("counterexample serializes");
                        write_file(&dir.join(format!("counterexample-{k}.json")), &text)?;
                    }
                }
                trips += s.trips.len();
            }
            rep.verdict("consistency", trips == 0);
            if trips > 0 {
                rep.exit = EXIT_FAILS;
            }
            Ok(rep)
        }
        Command::Gallery { name: gname, emit } => {
            let mut rep = RunReport::new(name);
            match gname {
                None => rep.value("names", NAMES.to_vec()),
                Some(g) => {
                    let f = gallery_file(g)?;
                    let inst = Instance::from_file(&f)?;
                    rep.instance = Some(format!("gallery:{g}"));
                    rep.digest = Some(inst.digest());
                    let text = inst.to_json();
                    match emit {
                        Some(p) => write_file(p, &text)?,
                        None => rep.value("instance", serde_json::to_value(&f).expect("instance serializes")),
                    }
                }
            }
            Ok(rep)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> RunReport {
        let mut full = vec!["smd"];
        full.extend_from_slice(args);
        run(&Cli::try_parse_from(full).unwrap())
    }

    #[test]
    fn check_nupbr_ex1() {
        let r = run_args(&["check-nupbr", "gallery:ex1"]);
        assert_eq!(r.exit, EXIT_FAILS);
        assert!(r.witnesses["unbounded"].starts_with("t = 1"));
        assert_eq!(r.values["sup"]["t2"]["t2"], "0");
    }

    #[test]
    fn synth_binomial() {
        let r = run_args(&["synth-deflator", "--mode", "nupbr", "gallery:binomial"]);
        assert_eq!(r.exit, EXIT_HOLDS);
        assert_eq!(r.values["delta"], "4/5");
    }

    #[test]
    fn gsm_sec3() {
        let r = run_args(&["gsm-check", "gallery:sec3"]);
        assert_eq!(r.exit, EXIT_HOLDS);
        assert_eq!(r.verdicts["Z.projection_supermartingale"], "fails");
        assert_eq!(r.values["Z.projection_trivial_times"], json!(["5", "4", "5"]));
        let r = run_args(&["gsm-check", "gallery:sec3", "--row", "W"]);
        assert_eq!(r.exit, EXIT_FAILS);
    }

    #[test]
    fn input_errors_exit_2() {
        let r = run_args(&["classify", "gallery:nope"]);
        assert_eq!(r.exit, EXIT_INPUT);
        assert!(r.error.unwrap().contains("available"));
        let r = run_args(&["classify", "/nonexistent/file.json"]);
        assert_eq!(r.exit, EXIT_INPUT);
    }

    #[test]
    fn renderings_agree() {
        let r = run_args(&["synth-deflator", "gallery:binomial"]);
        let human = r.render(Format::Human);
        assert!(human.contains("delta = 4/5"));
        assert!(human.contains("deflator.u = 4/5"));
        let machine: Value = serde_json::from_str(&r.render(Format::Machine)).unwrap();
        assert_eq!(machine["values"]["deflator"]["u"], "4/5");
    }

    #[test]
    fn report_for_matches_command_line() {
        let inst = gallery("binomial").unwrap();
        let direct = report_for("synth-deflator", &inst).unwrap();
        let via = run_args(&["synth-deflator", "gallery:binomial"]);
        assert_eq!(direct.values, via.values);
        assert_eq!(direct.exit, via.exit);
        assert!(report_for("nope", &inst).is_err());
    }

    #[test]
    fn multiline_values_are_indented() {
        let r = run_args(&["synth-deflator", "gallery:binomial", "--emit-lp", "-"]);
        let human = r.render(Format::Human);
        assert!(human.contains("  lp =\n    "), "{human}");
    }

    #[test]
    fn report_is_deterministic() {
        let a = run_args(&["closure-sample", "gallery:binomial", "--seed", "5"]);
        let b = run_args(&["closure-sample", "gallery:binomial", "--seed", "5"]);
        assert_eq!(a, b);
    }
}
