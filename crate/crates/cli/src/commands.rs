use crate::args::{AdversaryArg, Cli, Command, Flags};
use crate::CliError;
use rmdp::bellman::{solve_infsup, solve_supinf};
use rmdp::dpp::{
    classification_tables, classify, fixture, mixed_kernel, render_tables_text, verify_numeric, AttributeProfile,
    DppReport, Fixture, FixtureId, InfoClass, Verdict, Witness,
};
use rmdp::learner::{communicating_fixture, exact_diameter, run_experiment, uniform_hitting_bound, ExperimentConfig, SampleMode};
use rmdp::model::{parse_model, serialize_model, Kernel, RobustMdp};
use rmdp::policy::{
    evaluate_exact, evaluate_mc, greedy_from_value, parse_policy, robust_evaluate_with, serialize_policy, AdversaryClass,
    FiniteMemoryAdversary, FiniteMemoryPolicy, RobustOptions,
};
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::fs;

const VERTEX_CAP: usize = 100_000;
const DEFAULT_MC_EPS: f64 = 1e-6;

pub struct Outcome {
    pub payload: Value,
    pub text: String,
    pub csv: Option<String>,
}

impl Outcome {
    fn new(payload: impl Serialize, text: String) -> Self {
        Outcome { payload: serde_json::to_value(payload).expect("payload serializes"), text, csv: None }
    }
}

/// Flag checks that need no file access.
pub fn check_flags(cli: &Cli) -> Result<(), CliError> {
    let f = &cli.flags;
    let usage = |m: &str| Err(CliError::Usage(m.to_string()));
    if !(f.tol > 0.0 && f.tol.is_finite()) {
        return usage("--tol must be positive");
    }
    if let Some(g) = f.gamma {
        if !(g > 0.0 && g < 1.0) {
            return usage("--gamma must lie in (0, 1)");
        }
    }
    if f.horizon_eps.is_some_and(|e| !(e > 0.0 && e.is_finite())) {
        return usage("--horizon-eps must be positive");
    }
    if f.mc_samples.is_some_and(|n| n < 2) {
        return usage("--mc-samples must be at least 2");
    }
    if f.csv && !cli.command.has_csv() {
        return Err(CliError::Usage(format!("{} has no CSV output", cli.command.name())));
    }
    let needs_model = matches!(
        cli.command,
        Command::Validate | Command::Solve | Command::Evaluate { .. } | Command::RobustEval { .. } | Command::CheckDpp { .. } | Command::Diameter
    );
    if needs_model && f.model.is_none() {
        return Err(CliError::Usage(format!("{} needs --model", cli.command.name())));
    }
    if matches!(cli.command, Command::Evaluate { .. } | Command::RobustEval { .. }) && f.policy.is_none() {
        return Err(CliError::Usage(format!("{} needs --policy", cli.command.name())));
    }
    let random = matches!(cli.command, Command::LearnSim { .. })
        || matches!(cli.command, Command::Evaluate { .. } if f.mc_samples.is_some());
    if random && f.seed.is_none() {
        return Err(CliError::Usage(format!("{} draws random numbers and needs --seed", cli.command.name())));
    }
    if let Command::LearnSim { gammas, seeds, .. } = &cli.command {
        if *seeds == 0 {
            return usage("--seeds must be positive");
        }
        if f.gamma.is_none() && gammas.iter().any(|g| !(*g > 0.0 && *g < 1.0)) {
            return usage("--gammas must lie in (0, 1)");
        }
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let f = &cli.flags;
    match &cli.command {
        Command::Validate => validate(f),
        Command::Solve => solve(f),
        Command::Evaluate { vertex, initial } => evaluate(f, *vertex, initial),
        Command::RobustEval { adversary, initial } => robust_eval(f, *adversary, initial),
        Command::CheckDpp { controller_info, adversary_info, initial, no_search } => {
            check_dpp(f, *controller_info, *adversary_info, initial, *no_search)
        }
        Command::Counterexample { id, emit } => counterexample(f, *id, emit.as_deref()),
        Command::LearnSim { gammas, seeds, diameter, vertices, initial } => {
            learn_sim(f, gammas, *seeds, *diameter, vertices.clone(), initial.as_deref())
        }
        Command::Diameter => diameter(f),
        Command::Tables => Ok(tables()),
    }
}

fn read(path: &std::path::Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Domain(format!("cannot read {}: {e}", path.display())))
}

fn load_model(f: &Flags) -> Result<RobustMdp, CliError> {
    let path = f.model.as_ref().expect("checked by check_flags");
    let mut model = parse_model(&read(path)?)?;
    if let Some(g) = f.gamma {
        model.gamma = g;
    }
    Ok(model)
}

fn load_policy(f: &Flags, model: &RobustMdp) -> Result<FiniteMemoryPolicy, CliError> {
    let path = f.policy.as_ref().expect("checked by check_flags");
    Ok(parse_policy(&read(path)?, model)?)
}

fn initial(model: &RobustMdp, spec: &str) -> Result<Vec<f64>, CliError> {
    let n = model.n_states();
    if spec.eq_ignore_ascii_case("uniform") {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let s = model.state_index(spec).ok_or_else(|| CliError::Domain(format!("unknown initial state {spec:?}")))?;
    let mut mu = vec![0.0; n];
    mu[s] = 1.0;
    Ok(mu)
}

fn scaled(model: &RobustMdp, v: f64) -> Value {
    json!({ "stored": v, "display": model.display_value(v) })
}

fn kernel(model: &RobustMdp, vertex: usize) -> Result<(Kernel, usize), CliError> {
    let mut all = model.vertex_kernels(VERTEX_CAP)?;
    let count = all.len();
    if vertex >= count {
        return Err(CliError::Domain(format!("vertex {vertex} out of range 0..{count}")));
    }
    Ok((all.swap_remove(vertex), count))
}

fn validate(f: &Flags) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let payload = json!({
        "valid": true,
        "states": model.states,
        "actions": model.actions,
        "gamma": model.gamma,
        "rectangularity": model.ambiguity.rectangularity(),
        "adversary_convex": model.ambiguity.all_convex(),
        "controller_convex": model.controller.is_convex(),
        "reward_map": model.reward_map,
    });
    let text = format!(
        "valid: {} states, {} actions, gamma {}, {:?}-rectangular\n",
        model.n_states(),
        model.n_actions(),
        model.gamma,
        model.ambiguity.rectangularity()
    );
    Ok(Outcome::new(payload, text))
}

fn solve(f: &Flags) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let r = solve_supinf(&model, f.tol)?;
    let greedy = greedy_from_value(&model, &r.fixed_point)?;
    let mut text = format!("iterations {}  residual {:e}\nstate  stored  display  greedy\n", r.iterations, r.residual);
    let mut csv = String::from("state,stored,display\n");
    let mut values = Vec::new();
    for (s, name) in model.states.iter().enumerate() {
        let (v, d) = (r.fixed_point[s], model.display_value(r.fixed_point[s]));
        let _ = writeln!(text, "{name}  {v}  {d}  {:?}", greedy.rule(0, s));
        let _ = writeln!(csv, "{name},{v},{d}");
        values.push(json!({ "state": name, "stored": v, "display": d, "greedy": greedy.rule(0, s) }));
    }
    let payload = json!({
        "values": values,
        "iterations": r.iterations,
        "residual": r.residual,
        "tolerance": r.tolerance,
        "reward_map": model.reward_map,
    });
    Ok(Outcome { csv: Some(csv), ..Outcome::new(payload, text) })
}

fn evaluate(f: &Flags, vertex: usize, init: &str) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let pi = load_policy(f, &model)?;
    let mu = initial(&model, init)?;
    let (k, count) = kernel(&model, vertex)?;
    let r = match f.mc_samples {
        Some(n) => {
            let eps = f.horizon_eps.unwrap_or(DEFAULT_MC_EPS);
            evaluate_mc(&model, &pi, &k, &mu, n, eps, f.seed.expect("checked by check_flags"))?
        }
        None => evaluate_exact(&model, &pi, &k, &mu, f.horizon_eps.unwrap_or(f.tol))?,
    };
    let text = format!(
        "vertex {vertex} of {count}: value {} (display {}) +/- {:e} via {:?}\n",
        r.value,
        model.display_value(r.value),
        model.display_difference(r.error_bound),
        r.method
    );
    let payload = json!({
        "vertex": vertex,
        "vertex_count": count,
        "value": scaled(&model, r.value),
        "display_error_bound": model.display_difference(r.error_bound),
        "result": r,
    });
    Ok(Outcome::new(payload, text))
}

fn class_of(a: AdversaryArg) -> AdversaryClass {
    match a {
        AdversaryArg::Stationary => AdversaryClass::Stationary,
        AdversaryArg::Markov => AdversaryClass::Markov,
        AdversaryArg::History => AdversaryClass::HistoryObserving,
    }
}

fn robust_eval(f: &Flags, adversary: AdversaryArg, init: &str) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let pi = load_policy(f, &model)?;
    let mu = initial(&model, init)?;
    let r = robust_evaluate_with(&model, &pi, &mu, RobustOptions::new(f.tol).with_class(class_of(adversary)))?;
    let bellman = solve_supinf(&model, f.tol)?.fixed_point.expect(&mu);
    let text = format!(
        "worst case {} (display {}), certified lower bound {} (display {}), Bellman value {} (display {})\n",
        r.value,
        model.display_value(r.value),
        r.lower_bound,
        model.display_value(r.lower_bound),
        bellman,
        model.display_value(bellman)
    );
    let payload = json!({
        "value": scaled(&model, r.value),
        "lower_bound": scaled(&model, r.lower_bound),
        "bellman_value": scaled(&model, bellman),
        "result": r,
    });
    Ok(Outcome::new(payload, text))
}

fn report_text(model: &RobustMdp, label: &str, r: &DppReport) -> String {
    let mut s = format!("{label}: {} ({:?})\n", r.verdict, r.basis);
    if let Some(g) = r.gap {
        let _ = writeln!(s, "  interchange gap {g:e}");
    }
    if let Some(w) = &r.witness {
        let _ = writeln!(
            s,
            "  witness {}: worst case {} beats the Bellman value by {}",
            w.name,
            model.display_value(w.value),
            model.display_difference(w.margin)
        );
    }
    for c in &r.citations {
        let _ = writeln!(s, "  {c}");
    }
    s
}

fn check_dpp(f: &Flags, ci: InfoClass, ai: InfoClass, init: &str, no_search: bool) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let mu = initial(&model, init)?;
    let profile = AttributeProfile::from_model(&model, ci, ai)?;
    let table = classify(&profile);
    let supplied = match &f.policy {
        Some(_) => Some(vec![Witness { name: "policy".into(), policy: load_policy(f, &model)? }]),
        None if no_search => Some(Vec::new()),
        None => None,
    };
    let numeric = verify_numeric(&model, &profile, f.tol, supplied.as_deref(), &mu)?;
    let consistent = numeric.verdict == Verdict::Unknown || numeric.verdict == table.verdict;
    let text = report_text(&model, "table", &table) + &report_text(&model, "numeric", &numeric);
    let payload = json!({
        "profile": profile,
        "table": table,
        "numeric": numeric,
        "consistent": consistent,
        "witness_margin_display": numeric.witness.as_ref().map(|w| model.display_difference(w.margin)),
    });
    Ok(Outcome::new(payload, text))
}

/// Profile the counterexample is about.
fn fixture_profile(id: FixtureId) -> (InfoClass, InfoClass) {
    match id {
        FixtureId::LearnThenCommit => (InfoClass::History, InfoClass::Stationary),
        FixtureId::MarkovBeatsStationary => (InfoClass::Markov, InfoClass::Stationary),
        FixtureId::DeterministicConvex | FixtureId::DeterministicFinite => (InfoClass::History, InfoClass::Markov),
    }
}

#[derive(Serialize)]
struct Check {
    name: String,
    expected: f64,
    computed: Option<f64>,
    abs_error: Option<f64>,
}

fn counterexample(f: &Flags, id: FixtureId, emit: Option<&std::path::Path>) -> Result<Outcome, CliError> {
    let gamma = f.gamma.unwrap_or(0.8);
    let fx = fixture(id, gamma)?;
    let model = &fx.model;
    let tol = f.tol;
    let u = solve_supinf(model, tol)?.fixed_point;
    let u_tilde = solve_infsup(model, tol)?.fixed_point;
    let kernels = model.vertex_kernels(VERTEX_CAP)?;
    let mut witnesses = Vec::new();
    let mut robust = Vec::new();
    for w in &fx.witnesses {
        let vs = kernels
            .iter()
            .map(|k| Ok(evaluate_exact(model, &w.policy, k, &fx.initial, tol)?.value))
            .collect::<Result<Vec<f64>, CliError>>()?;
        let r = robust_evaluate_with(model, &w.policy, &fx.initial, RobustOptions::new(tol))?;
        witnesses.push(json!({
            "name": w.name,
            "vs_vertex": vs.iter().map(|v| scaled(model, *v)).collect::<Vec<_>>(),
            "robust": scaled(model, r.value),
            "robust_lower_bound": scaled(model, r.lower_bound),
        }));
        robust.push((w.name.clone(), vs, r.value));
    }
    let checks = checks(&fx, &u.0, &u_tilde.0, &robust)?;
    let (ci, ai) = fixture_profile(id);
    let profile = AttributeProfile::from_model(model, ci, ai)?;
    let table = classify(&profile);
    let numeric = verify_numeric(model, &profile, tol, Some(&fx.witnesses), &fx.initial)?;

    if let Some(dir) = emit {
        let io = |e: std::io::Error| CliError::Domain(format!("cannot write to {}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        fs::write(dir.join(format!("{id}.model.json")), serialize_model(model)).map_err(io)?;
        for w in &fx.witnesses {
            fs::write(dir.join(format!("{id}.{}.policy.json", w.name)), serialize_policy(&w.policy, model)?).map_err(io)?;
        }
    }

    let mut text = format!("{id} at gamma {gamma}\nstate  u*  u~\n");
    for (s, name) in model.states.iter().enumerate() {
        let _ = writeln!(text, "{name}  {}  {}", model.display_value(u[s]), model.display_value(u_tilde[s]));
    }
    for (name, vs, r) in &robust {
        let vs: Vec<f64> = vs.iter().map(|v| model.display_value(*v)).collect();
        let _ = writeln!(text, "witness {name}: vs vertices {vs:?}, robust {}", model.display_value(*r));
    }
    for c in &checks {
        match (c.computed, c.abs_error) {
            (Some(v), Some(e)) => {
                let _ = writeln!(text, "check {}: expected {} computed {v} error {e:e}", c.name, c.expected);
            }
            _ => {
                let _ = writeln!(text, "check {}: expected {} (adversary not in the set)", c.name, c.expected);
            }
        }
    }
    text += &report_text(model, "table", &table);
    text += &report_text(model, "numeric", &numeric);

    let states: Vec<Value> = model
        .states
        .iter()
        .enumerate()
        .map(|(s, name)| json!({ "state": name, "u_star": scaled(model, u[s]), "u_tilde": scaled(model, u_tilde[s]) }))
        .collect();
    let payload = json!({
        "fixture": id,
        "gamma": gamma,
        "reward_map": model.reward_map,
        "initial": fx.initial,
        "values": states,
        "witnesses": witnesses,
        "checks": checks,
        "profile": profile,
        "table": table,
        "numeric": numeric,
    });
    Ok(Outcome::new(payload, text))
}

/// Computed counterpart of each closed form the fixture lists.
fn checks(fx: &Fixture, u: &[f64], u_tilde: &[f64], robust: &[(String, Vec<f64>, f64)]) -> Result<Vec<Check>, CliError> {
    let model = &fx.model;
    let by_name = |n: &str| robust.iter().find(|r| r.0 == n);
    let mut out = Vec::new();
    for (key, &expected) in &fx.expected {
        let computed = if let Some(s) = key.strip_prefix("u_star[").and_then(|k| k.strip_suffix(']')) {
            model.state_index(s).map(|i| model.display_value(u[i]))
        } else if let Some(s) = key.strip_prefix("u_tilde[").and_then(|k| k.strip_suffix(']')) {
            model.state_index(s).map(|i| model.display_value(u_tilde[i]))
        } else if let Some(rest) = key.strip_prefix("controller[") {
            let (s, a) = rest.trim_end_matches(']').split_once("][").unwrap_or((rest, ""));
            let rule = greedy_from_value(model, u)?;
            model.state_index(s).zip(model.action_index(a)).map(|(s, a)| rule.rule(0, s)[a])
        } else if let Some(rest) = key.strip_prefix("witness[") {
            let (name, suffix) = rest.split_once(']').unwrap_or((rest, ""));
            let suffix = suffix.trim();
            let w = by_name(name);
            if suffix.is_empty() || suffix == "robust" {
                w.map(|w| model.display_value(w.2))
            } else if let Some(p) = suffix.strip_prefix("vs p") {
                let i: usize = p.parse().unwrap_or(0);
                w.and_then(|w| w.1.get(i.wrapping_sub(1))).map(|v| model.display_value(*v))
            } else if let Some(a) = suffix.strip_prefix("alpha=") {
                let alpha: f64 = a.parse().unwrap_or(f64::NAN);
                let pi = &fx.witnesses.iter().find(|w| w.name == name).expect("listed witness").policy;
                match FiniteMemoryAdversary::stationary(model, mixed_kernel(model, alpha)) {
                    Ok(k) => Some(model.display_value(evaluate_exact(model, pi, &k, &fx.initial, 1e-12)?.value)),
                    Err(_) => None,
                }
            } else {
                None
            }
        } else {
            None
        };
        out.push(Check { name: key.clone(), expected, computed, abs_error: computed.map(|c| (c - expected).abs()) });
    }
    Ok(out)
}

fn learn_sim(
    f: &Flags,
    gammas: &[f64],
    seeds: u64,
    diameter: Option<u64>,
    vertices: Option<Vec<usize>>,
    init: Option<&str>,
) -> Result<Outcome, CliError> {
    let model = match &f.model {
        Some(_) => load_model(f)?,
        None => communicating_fixture(0.9),
    };
    let gammas = f.gamma.map(|g| vec![g]).unwrap_or_else(|| gammas.to_vec());
    let mu = match init {
        Some(s) => initial(&model, s)?,
        None => initial(&model, &model.states[0])?,
    };
    let base = f.seed.expect("checked by check_flags");
    let seeds: Vec<u64> = (0..seeds).map(|i| base.wrapping_add(i)).collect();
    let mode = f.mode.unwrap_or(SampleMode::Practical { c: 50 });
    let mut config = ExperimentConfig::new(gammas, seeds, mode, mu);
    config.diameter = diameter;
    config.vertices = vertices;
    let table = run_experiment(&model, &config)?;
    let mut text = format!("mode {}  diameter {} ({:?})\n", table.mode, table.diameter, table.diameter_source);
    for s in &table.summaries {
        let _ = writeln!(
            text,
            "gamma {}  n {}  m {}  worst-case gap {}  phase-one loss {}  success rate {}",
            s.gamma, s.n, s.m, s.worst_case_gap, s.phase1_loss, s.success_rate
        );
    }
    let csv = table.to_csv();
    Ok(Outcome { csv: Some(csv), ..Outcome::new(json!({ "experiment": config, "table": table }), text) })
}

fn diameter(f: &Flags) -> Result<Outcome, CliError> {
    let model = load_model(f)?;
    let kernels = model.vertex_kernels(VERTEX_CAP)?;
    let mut rows = Vec::new();
    let mut text = String::from("vertex  exact  uniform bound\n");
    let mut csv = String::from("vertex,exact_hitting,exact_bound,uniform_hitting,uniform_bound\n");
    let hit = |d: rmdp::learner::Diameter| match d {
        rmdp::learner::Diameter::Finite { hitting } => hitting.to_string(),
        rmdp::learner::Diameter::Infinite => "inf".into(),
    };
    let bound = |d: rmdp::learner::Diameter| d.bound().map_or("inf".to_string(), |b| b.to_string());
    for (v, k) in kernels.iter().enumerate() {
        let exact = exact_diameter(k);
        let uniform = uniform_hitting_bound(k);
        let _ = writeln!(text, "{v}  {}  {}", bound(exact), bound(uniform));
        let _ = writeln!(csv, "{v},{},{},{},{}", hit(exact), bound(exact), hit(uniform), bound(uniform));
        rows.push(json!({
            "vertex": v,
            "exact": exact,
            "exact_bound": exact.bound(),
            "uniform": uniform,
            "uniform_bound": uniform.bound(),
        }));
    }
    Ok(Outcome { csv: Some(csv), ..Outcome::new(json!({ "kernels": rows }), text) })
}

fn tables() -> Outcome {
    let t = classification_tables();
    let count = |v: Verdict| t.iter().flat_map(|x| x.cells.iter().flatten()).filter(|c| c.verdict == v).count();
    let payload = json!({ "tables": t, "holds": count(Verdict::Holds), "fails": count(Verdict::Fails) });
    Outcome::new(payload, render_tables_text(&t))
}
