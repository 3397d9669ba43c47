//! Network documents (JSON) and record tables (CSV).
//!
//! ```json
//! {
//!   "format": 1,
//!   "variables": [{"name": "a", "domain": ["t", "f"]}],
//!   "edges": [["a", "b"]],
//!   "valuations": [
//!     {"node": "a", "kind": "probabilistic",
//!      "entries": [{"given": {}, "value": "t", "p": 0.7}, ...]},
//!     {"node": "b", "kind": "ds",
//!      "focals": [{"set": [{"a": "t", "b": "t"}], "m": 0.5}, ...]}
//!   ]
//! }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameSet, Scope, Variable};
use crate::mass::MassFunction;
use crate::network::{describe_parent_row, BeliefNetwork, Dag, NodeValuation, Valuation};
use crate::scalar::round_sig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    format: u32,
    variables: Vec<VariableDoc>,
    #[serde(default)]
    edges: Vec<(String, String)>,
    #[serde(default)]
    valuations: Vec<ValuationDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    domain: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValuationDoc {
    node: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<EntryDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    focals: Option<Vec<FocalDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    given: BTreeMap<String, String>,
    value: String,
    p: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FocalDoc {
    set: Vec<BTreeMap<String, String>>,
    m: f64,
}

fn assignment(scope: &Scope, index: usize) -> BTreeMap<String, String> {
    scope.vars().iter().zip(scope.decode(index)).map(|(v, d)| (v.name().to_string(), v.domain()[d].clone())).collect()
}

/// Canonical JSON text of a network.
pub fn network_to_string(net: &BeliefNetwork) -> Result<String> {
    let variables = net
        .variables()
        .iter()
        .map(|v| VariableDoc { name: v.name().to_string(), domain: v.domain().to_vec() })
        .collect();
    let mut valuations = Vec::new();
    for v in net.valuations() {
        let doc = match v.valuation() {
            Valuation::Probabilistic(rows) => {
                let mut entries = Vec::new();
                for (u, row) in rows.iter().enumerate() {
                    let given = assignment(v.parents(), u);
                    for (x, p) in row.iter().enumerate() {
                        entries.push(EntryDoc {
                            given: given.clone(),
                            value: v.node().domain()[x].clone(),
                            p: round_sig(*p, 12),
                        });
                    }
                }
                ValuationDoc {
                    node: v.name().to_string(),
                    kind: "probabilistic".into(),
                    entries: Some(entries),
                    focals: None,
                }
            }
            Valuation::Ds(m) => {
                let focals = m
                    .focals()
                    .iter()
                    .map(|(set, w)| FocalDoc {
                        set: set.iter().map(|i| assignment(m.scope(), i)).collect(),
                        m: round_sig(*w, 12),
                    })
                    .collect();
                ValuationDoc { node: v.name().to_string(), kind: "ds".into(), entries: None, focals: Some(focals) }
            }
        };
        valuations.push(doc);
    }
    let doc = Document { format: FORMAT_VERSION, variables, edges: net.dag().edges().to_vec(), valuations };
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn save_network(net: &BeliefNetwork, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, network_to_string(net)?)?;
    Ok(())
}

/// A loaded network with non-fatal remarks (e.g. merged duplicate focal sets).
#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

fn parse_document(text: &str) -> Result<Document> {
    let doc: Document = serde_json::from_str(text)
        .map_err(|e| Error::parse(e.line(), format!("line {} column {}: {e}", e.line(), e.column())))?;
    if doc.format != FORMAT_VERSION {
        return Err(Error::parse(0, format!("unsupported format version {}", doc.format)));
    }
    Ok(doc)
}

fn structure(doc: &Document) -> Result<(Vec<Variable>, Dag)> {
    let variables: Vec<Variable> =
        doc.variables.iter().map(|v| Variable::new(&v.name, v.domain.iter().cloned())).collect::<Result<_>>()?;
    let dag = Dag::new(variables.iter().map(|v| v.name().to_string()), doc.edges.iter().cloned())?;
    Ok((variables, dag))
}

fn find_var<'a>(vars: &'a [Variable], name: &str) -> Result<&'a Variable> {
    vars.iter().find(|v| v.name() == name).ok_or_else(|| Error::unknown_variable(name))
}

fn index_in(scope: &Scope, a: &BTreeMap<String, String>, what: &str) -> Result<usize> {
    if a.len() != scope.len() || a.keys().any(|k| !scope.contains(k)) {
        let got: Vec<&str> = a.keys().map(String::as_str).collect();
        return Err(Error::invalid(format!("{what}: assignment over [{}], expected {scope}", got.join(", "))));
    }
    scope.index_of_labels(a.iter().map(|(k, v)| (k.as_str(), v.as_str())))
}

fn valuation_from_doc(
    doc: &ValuationDoc,
    vars: &[Variable],
    dag: &Dag,
    warnings: &mut Vec<String>,
) -> Result<NodeValuation> {
    let node = find_var(vars, &doc.node)?.clone();
    let parents: Vec<Variable> =
        dag.parents(&doc.node).iter().map(|p| find_var(vars, p).cloned()).collect::<Result<_>>()?;
    let pscope = Scope::new(parents.iter().cloned())?;
    let what = format!("node `{}`", doc.node);
    match (doc.kind.as_str(), &doc.entries, &doc.focals) {
        ("probabilistic", Some(entries), None) => {
            let mut rows: Vec<Vec<Option<f64>>> = vec![vec![None; node.size()]; pscope.frame_size()?];
            for e in entries {
                let u = index_in(&pscope, &e.given, &what)?;
                let x = node.value_index(&e.value)?;
                if rows[u][x].replace(e.p).is_some() {
                    return Err(Error::invalid(format!(
                        "{what}: duplicate entry for {} given {}",
                        e.value,
                        describe_parent_row(&pscope, u)
                    )));
                }
            }
            let mut full = Vec::with_capacity(rows.len());
            for (u, row) in rows.into_iter().enumerate() {
                if row.iter().all(Option::is_none) {
                    return Err(Error::invalid(format!(
                        "{what}: no entries for parent configuration {}",
                        describe_parent_row(&pscope, u)
                    )));
                }
                full.push(row.into_iter().map(|p| p.unwrap_or(0.0)).collect());
            }
            NodeValuation::probabilistic(node, parents, full)
        }
        ("ds", None, Some(focals)) => {
            let scope = pscope.union(&Scope::new([node.clone()])?)?;
            let n = scope.frame_size()?;
            let mut sets: Vec<(FrameSet, f64)> = Vec::with_capacity(focals.len());
            for f in focals {
                let idx = f.set.iter().map(|a| index_in(&scope, a, &what)).collect::<Result<Vec<_>>>()?;
                if idx.is_empty() {
                    return Err(Error::invalid(format!("{what}: empty focal set")));
                }
                sets.push((FrameSet::from_indices(n, idx), f.m));
            }
            let mut sorted: Vec<&FrameSet> = sets.iter().map(|(s, _)| s).collect();
            sorted.sort();
            let dups = sorted.windows(2).filter(|w| w[0] == w[1]).count();
            if dups > 0 {
                warnings.push(format!("{what}: {dups} duplicate focal set(s) merged"));
            }
            NodeValuation::ds(node, parents, MassFunction::from_focals(&scope, sets)?)
        }
        (kind, _, _) if kind != "probabilistic" && kind != "ds" => {
            Err(Error::invalid(format!("{what}: unknown valuation kind `{kind}`")))
        }
        _ => Err(Error::invalid(format!("{what}: `probabilistic` needs `entries`, `ds` needs `focals`"))),
    }
}

pub fn network_from_str(text: &str) -> Result<Loaded<BeliefNetwork>> {
    let doc = parse_document(text)?;
    let (variables, dag) = structure(&doc)?;
    let mut warnings = Vec::new();
    let valuations = doc
        .valuations
        .iter()
        .map(|v| valuation_from_doc(v, &variables, &dag, &mut warnings))
        .collect::<Result<Vec<_>>>()?;
    let net = BeliefNetwork::build(variables, dag, valuations)?;
    Ok(Loaded { value: net, warnings })
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Loaded<BeliefNetwork>> {
    network_from_str(&fs::read_to_string(path)?)
}

/// Variables and dag of a document; valuations, if any, are ignored.
pub fn load_structure(path: impl AsRef<Path>) -> Result<(Vec<Variable>, Dag)> {
    structure(&parse_document(&fs::read_to_string(path)?)?)
}

/// Complete records under a header of variable names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecordTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RecordTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Reads comma-separated records. The first row is the header; lines
/// starting with `#` are skipped and fields are trimmed.
pub fn records_from_reader(reader: impl Read) -> Result<RecordTable> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(String::from).collect();
    if header.is_empty() || header.iter().any(String::is_empty) {
        return Err(Error::parse(1, "empty header"));
    }
    let mut sorted = header.clone();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::parse(1, format!("column `{}` appears twice", w[0])));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(csv_error)?.iter().map(String::from).collect());
    }
    Ok(RecordTable { header, rows })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
            Error::parse(line, format!("line {line}: ragged row with {len} fields, expected {expected_len}"))
        }
        csv::ErrorKind::Io(_) => Error::Io(e.to_string()),
        _ => Error::parse(line, format!("line {line}: {e}")),
    }
}

pub fn load_records(path: impl AsRef<Path>) -> Result<RecordTable> {
    records_from_reader(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AB: &str = r#"{
  "format": 1,
  "variables": [
    {
      "name": "a",
      "domain": [
        "t",
        "f"
      ]
    },
    {
      "name": "b",
      "domain": [
        "t",
        "f"
      ]
    }
  ],
  "edges": [
    [
      "a",
      "b"
    ]
  ],
  "valuations": [
    {
      "node": "a",
      "kind": "probabilistic",
      "entries": [
        {
          "given": {},
          "value": "t",
          "p": 0.7
        },
        {
          "given": {},
          "value": "f",
          "p": 0.3
        }
      ]
    },
    {
      "node": "b",
      "kind": "probabilistic",
      "entries": [
        {
          "given": {
            "a": "t"
          },
          "value": "t",
          "p": 0.9
        },
        {
          "given": {
            "a": "t"
          },
          "value": "f",
          "p": 0.1
        },
        {
          "given": {
            "a": "f"
          },
          "value": "t",
          "p": 0.5
        },
        {
          "given": {
            "a": "f"
          },
          "value": "f",
          "p": 0.5
        }
      ]
    }
  ]
}
"#;

    #[test]
    fn canonical_round_trip() {
        let net = network_from_str(AB).unwrap();
        assert!(net.warnings.is_empty());
        assert_eq!(network_to_string(&net.value).unwrap(), AB);
    }

    #[test]
    fn row_sum_error_names_node_and_row() {
        let text = AB.replace("\"p\": 0.1", "\"p\": -0.1");
        let err = network_from_str(&text).unwrap_err();
        assert_eq!(err.code(), "E_VALIDATE");
        let text = AB.replace("\"p\": 0.5\n        },\n        {\n          \"given\": {\n            \"a\": \"f\"\n          },\n          \"value\": \"f\",\n          \"p\": 0.5", "\"p\": 0.5\n        },\n        {\n          \"given\": {\n            \"a\": \"f\"\n          },\n          \"value\": \"f\",\n          \"p\": 0.3");
        let msg = network_from_str(&text).unwrap_err().to_string();
        assert!(msg.contains("node `b`") && msg.contains("a='f'") && msg.contains("0.8"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_line() {
        let err = network_from_str("{\n  \"format\": 1,\n  \"variables\": [,]\n}").unwrap_err();
        assert_eq!(err.code(), "E_PARSE");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn duplicate_focal_sets_merge_with_warning() {
        let text = r#"{"format": 1, "variables": [{"name": "a", "domain": ["t", "f"]}],
            "valuations": [{"node": "a", "kind": "ds", "focals": [
                {"set": [{"a": "t"}], "m": 0.25},
                {"set": [{"a": "t"}], "m": 0.25},
                {"set": [{"a": "t"}, {"a": "f"}], "m": 0.5}]}]}"#;
        let loaded = network_from_str(text).unwrap();
        assert_eq!(loaded.warnings.len(), 1);
        let Valuation::Ds(m) = loaded.value.valuations()[0].valuation() else { panic!() };
        assert_eq!(m.mass(&FrameSet::singleton(2, 0)), 0.5);
    }

    #[test]
    fn records() {
        let t = records_from_reader("a,b\nt, t\n\"t\",f\n".as_bytes()).unwrap();
        assert_eq!(t.header, ["a", "b"]);
        assert_eq!(t.rows, [["t", "t"], ["t", "f"]]);
        let err = records_from_reader("a,b\nt,t\nt,f,t\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(records_from_reader("".as_bytes()).is_err());
    }
}
