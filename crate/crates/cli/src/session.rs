use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use evidential_core::io::{load_network, load_records, load_structure, network_to_string, save_network};
use evidential_core::network::NetworkMode;
use evidential_core::revision::{evidence_probability, optimal_explanations};
use evidential_core::ruleview::{evidence_from_expr, marginal_given, GATE_TRUE};
use evidential_core::scalar::format_sig;
use evidential_core::{
    compile_query_node, d_separated, estimate_valuations, evaluate_expression_query, parse_expr, parse_query,
    render_rule_beam, revise, validate_rule_query, BeliefNetwork, Error, EvidenceSet, Expr, FrameSet, Network, Query,
    RevisionMode,
};

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a network document
    Load { path: PathBuf },
    /// Save the current network
    Save { path: PathBuf },
    /// Print the rule beam of a node
    ShowRules { node: String },
    /// Posterior marginal of a variable
    Marginal {
        var: String,
        #[arg(long)]
        given: Option<String>,
    },
    /// Probability (or belief and plausibility) of a logical expression
    Query {
        expr: String,
        #[arg(long)]
        given: Option<String>,
    },
    /// How often `if <premise> then <atom>` fires correctly, wrongly or not at all
    ValidateRule { rule: String },
    /// Most plausible configuration
    Mpe {
        /// Findings, e.g. "b='t' and c='f'"
        #[arg(long)]
        given: Option<String>,
        /// Clamp var=value as a hypothesis
        #[arg(long, value_name = "VAR=VALUE")]
        hypothesize: Option<String>,
        /// Root the computation at this variable
        #[arg(long, value_name = "VAR")]
        explain: Option<String>,
        /// Also print beta divided by the probability of the findings
        #[arg(long)]
        normalized: bool,
        /// Print every configuration reaching the best score
        #[arg(long)]
        all: bool,
    },
    /// d-separation test; node lists are comma separated, `-` for none
    Dsep { j: String, k: String, l: String },
    /// Estimate probability tables from records
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        dag: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        smoothing: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Interactive loop reading one command per line
    Repl,
    /// Leave the loop
    Quit,
}

/// One REPL line: the same grammar as the command line, minus global flags.
#[derive(Debug, Parser)]
#[command(no_binary_name = true, disable_help_flag = true, disable_version_flag = true)]
pub struct Line {
    #[command(subcommand)]
    pub command: Command,
}

pub enum Failure {
    Usage(String),
    Domain(Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Domain(_) => 1,
        }
    }

    pub fn render(&self) -> String {
        match self {
            Failure::Usage(m) => format!("E_USAGE: {m}"),
            Failure::Domain(e) => format!("{}: {e}", e.code()),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

pub enum Outcome {
    Continue(String),
    Quit,
}

#[derive(Default)]
pub struct Session {
    net: Option<Network>,
}

fn num(x: f64) -> String {
    format_sig(x, 12)
}

fn parse_list(s: &str) -> Vec<&str> {
    if s == "-" {
        return vec![];
    }
    s.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn parse_given(given: &Option<String>) -> Result<Option<Expr>, Failure> {
    given.as_deref().map(parse_expr).transpose().map_err(Failure::from)
}

impl Session {
    pub fn new() -> Self {
        Self::default()
    }

    fn net(&self) -> Result<&Network, Failure> {
        self.net.as_ref().ok_or_else(|| Failure::Usage("no network loaded; use `load <file>` or --net".into()))
    }

    pub fn load(&mut self, path: &PathBuf) -> Result<String, Failure> {
        let loaded = load_network(path)?;
        let mut out = String::new();
        for w in &loaded.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(out, "loaded {} variables from {}", loaded.value.variables().len(), path.display());
        self.net = Some(loaded.value);
        Ok(out)
    }

    pub fn execute(&mut self, command: Command) -> Result<Outcome, Failure> {
        let replaces = matches!(command, Command::Load { .. });
        let before = match (&self.net, replaces) {
            (Some(net), false) => Some(network_to_string(net)?),
            _ => None,
        };
        let out = self.run(command)?;
        if let (Some(before), Some(net)) = (before, &self.net) {
            // queries work on amended copies; the session network must not change
            let after = network_to_string(net)?;
            debug_assert_eq!(after, before, "command changed the session network");
        }
        Ok(out)
    }

    fn run(&mut self, command: Command) -> Result<Outcome, Failure> {
        let mut out = String::new();
        match command {
            Command::Quit => return Ok(Outcome::Quit),
            Command::Repl => return Err(Failure::Usage("already in the loop".into())),
            Command::Load { path } => out = self.load(&path)?,
            Command::Save { path } => {
                save_network(self.net()?, &path)?;
                let _ = writeln!(out, "saved {}", path.display());
            }
            Command::ShowRules { node } => {
                out = render_rule_beam(self.net()?, &node)?.to_string();
            }
            Command::Marginal { var, given } => {
                let net = self.net()?;
                let given = parse_given(&given)?;
                let m = marginal_given(net, &var, given.as_ref())?;
                let v = net.variable(&var)?;
                for (i, value) in v.domain().iter().enumerate() {
                    let set = FrameSet::singleton(v.size(), i);
                    if net.mode() == NetworkMode::Probabilistic {
                        let _ = writeln!(out, "P({var}={value}) = {}", num(m.mass(&set)));
                    } else {
                        let _ = writeln!(
                            out,
                            "Bel({var}={value}) = {}  Pl({var}={value}) = {}",
                            num(m.belief(&set)?),
                            num(m.plausibility(&set)?)
                        );
                    }
                }
            }
            Command::Query { expr, given } => {
                let net = self.net()?;
                let expr = parse_expr(&expr)?;
                let given = parse_given(&given)?;
                let a = evaluate_expression_query(net, &expr, given.as_ref())?;
                if net.mode() == NetworkMode::Probabilistic {
                    let _ = writeln!(out, "P = {}", num(a.belief));
                } else {
                    let _ = writeln!(out, "Bel = {}  Pl = {}", num(a.belief), num(a.plausibility));
                }
            }
            Command::ValidateRule { rule } => {
                let net = self.net()?;
                let Query::Rule { premise, conclusion } = parse_query(&rule)? else {
                    return Err(Failure::Usage("expected `if <expr> then <var>='<value>'`".into()));
                };
                let r = validate_rule_query(net, &premise, &conclusion)?;
                let _ = writeln!(out, "P(t) = {}", num(r.t));
                let _ = writeln!(out, "P(n) = {}", num(r.n));
                let _ = writeln!(out, "P(?) = {}", num(r.q));
                if net.mode() == NetworkMode::Ds {
                    let _ = writeln!(out, "ignorance = {}", num(r.ignorance));
                }
            }
            Command::Mpe { given, hypothesize, explain, normalized, all } => {
                out = self.mpe(given, hypothesize, explain, normalized, all)?;
            }
            Command::Dsep { j, k, l } => {
                let net = self.net()?;
                let sep = d_separated(net.dag(), &parse_list(&j), &parse_list(&k), &parse_list(&l))?;
                let _ = writeln!(out, "d-separated: {sep}");
            }
            Command::Estimate { data, dag, smoothing, out: target } => {
                if smoothing.is_nan() || smoothing < 0.0 {
                    return Err(Failure::Usage("--smoothing must be a non-negative number".into()));
                }
                let (variables, dag) = load_structure(&dag)?;
                let records = load_records(&data)?;
                let est = estimate_valuations(&variables, &dag, &records, smoothing)?;
                for w in &est.warnings {
                    let _ = writeln!(out, "warning: {w}");
                }
                let net = BeliefNetwork::build(variables, dag, est.valuations)?;
                save_network(&net, &target)?;
                let _ = writeln!(
                    out,
                    "estimated {} valuations from {} records into {}",
                    net.valuations().len(),
                    records.rows.len(),
                    target.display()
                );
            }
        }
        Ok(Outcome::Continue(out))
    }

    fn mpe(
        &self,
        given: Option<String>,
        hypothesize: Option<String>,
        explain: Option<String>,
        normalized: bool,
        all: bool,
    ) -> Result<String, Failure> {
        let base = self.net()?;
        let given = parse_given(&given)?;
        // findings: plain assignments when possible, otherwise a clamped gate
        let (net, evidence, hidden) = match &given {
            None => (base.clone(), EvidenceSet::new(), vec![]),
            Some(e) => match evidence_from_expr(e) {
                Some(ev) => (base.clone(), ev, vec![]),
                None => {
                    let c = compile_query_node(base, &Query::Expr(e.clone()))?;
                    let ev = EvidenceSet::new().with(&c.node, GATE_TRUE);
                    (c.network, ev, c.added)
                }
            },
        };
        let mode = match (hypothesize, explain) {
            (Some(_), Some(_)) => return Err(Failure::Usage("--hypothesize and --explain are exclusive".into())),
            (Some(h), None) => {
                let (var, value) =
                    h.split_once('=').ok_or_else(|| Failure::Usage("--hypothesize expects VAR=VALUE".into()))?;
                let value = value.trim().trim_matches('\'');
                net.variable(var.trim())?.value_index(value)?;
                RevisionMode::Hypothesizing(var.trim().to_string(), value.to_string())
            }
            (None, Some(x)) => RevisionMode::Explanatory(x),
            (None, None) => RevisionMode::Conditioning(EvidenceSet::new()),
        };
        let mut e = revise(&net, &evidence, &mode)?;
        e.assignment.retain(|k, _| !hidden.contains(k));
        let mut out = format!("{e}\n");
        let clamped = match &mode {
            RevisionMode::Hypothesizing(var, value) => evidence.clone().with(var, value),
            _ => evidence.clone(),
        };
        if normalized {
            if net.mode() != NetworkMode::Probabilistic {
                return Err(Failure::Usage("--normalized needs a probabilistic network".into()));
            }
            let pe = evidence_probability(&net, &clamped)?;
            let _ = writeln!(out, "beta/P(e) = {} (derived)", num(e.score / pe));
        }
        if all {
            for cfg in optimal_explanations(&net, &clamped)? {
                let parts: Vec<String> = cfg
                    .iter()
                    .filter(|(k, _)| !hidden.contains(k) && e.assignment.contains_key(*k))
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                let _ = writeln!(out, "tie: {}", parts.join(" "));
            }
        }
        Ok(out)
    }
}
