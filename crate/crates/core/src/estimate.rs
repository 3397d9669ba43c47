//! Conditional probability tables from complete records by relative
//! frequency, optionally with additive smoothing.

use crate::error::{Error, Result};
use crate::frame::{Scope, Variable};
use crate::io::RecordTable;
use crate::network::{describe_parent_row, Dag, NodeValuation};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Estimate<S = f64> {
    pub valuations: Vec<NodeValuation<S>>,
    pub warnings: Vec<String>,
}

/// `P̂(x | u) = (count(x, u) + s) / (count(u) + s·|domain|)`.
///
/// Parent configurations never seen (with `s = 0`) get the uniform
/// distribution and a warning.
pub fn estimate_valuations<S: Scalar>(
    variables: &[Variable],
    dag: &Dag,
    records: &RecordTable,
    smoothing: S,
) -> Result<Estimate<S>> {
    if smoothing.is_negative() {
        return Err(Error::invalid("smoothing must be non-negative"));
    }
    if records.rows.is_empty() {
        return Err(Error::invalid("record table is empty"));
    }
    let find = |name: &str| variables.iter().find(|v| v.name() == name).ok_or_else(|| Error::unknown_variable(name));
    // cell indices per node column, checked against the domains
    let mut columns: Vec<(&Variable, Vec<usize>)> = Vec::new();
    for node in dag.nodes() {
        let var = find(node)?;
        let col = records.column(node).ok_or_else(|| Error::invalid(format!("records have no column for `{node}`")))?;
        let mut cells = Vec::with_capacity(records.rows.len());
        for (r, row) in records.rows.iter().enumerate() {
            let value = &row[col];
            let idx = var.value_index(value).map_err(|_| {
                Error::invalid(format!(
                    "record {}, column {} (`{node}`): value `{value}` not in domain",
                    r + 1,
                    col + 1
                ))
            })?;
            cells.push(idx);
        }
        columns.push((var, cells));
    }
    let cells_of = |name: &str| &columns.iter().find(|(v, _)| v.name() == name).unwrap().1;

    let mut valuations = Vec::new();
    let mut warnings = Vec::new();
    for node in dag.nodes() {
        let var = find(node)?.clone();
        let parents: Vec<Variable> = dag.parents(node).iter().map(|p| find(p).cloned()).collect::<Result<_>>()?;
        let pscope = Scope::new(parents.iter().cloned())?;
        let mut counts = vec![vec![0usize; var.size()]; pscope.frame_size()?];
        let pcells: Vec<&Vec<usize>> = parents.iter().map(|p| cells_of(p.name())).collect();
        let own = cells_of(node);
        for r in 0..records.rows.len() {
            let digits: Vec<usize> = pcells.iter().map(|c| c[r]).collect();
            counts[pscope.encode(&digits)][own[r]] += 1;
        }
        let k = S::from_count(var.size());
        let mut rows = Vec::with_capacity(counts.len());
        for (u, row) in counts.iter().enumerate() {
            let total: usize = row.iter().sum();
            let denom = S::from_count(total) + smoothing.clone() * k.clone();
            if denom.is_zero() {
                warnings.push(format!(
                    "node `{node}`: parent configuration {} never observed; using uniform distribution",
                    describe_parent_row(&pscope, u)
                ));
                rows.push(vec![S::one() / k.clone(); var.size()]);
            } else {
                rows.push(row.iter().map(|&c| (S::from_count(c) + smoothing.clone()) / denom.clone()).collect());
            }
        }
        valuations.push(NodeValuation::probabilistic(var, parents, rows)?);
    }
    Ok(Estimate { valuations, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::records_from_reader;
    use crate::network::Valuation;

    fn setup() -> (Vec<Variable>, Dag, RecordTable) {
        let vars = vec![Variable::new("a", ["t", "f"]).unwrap(), Variable::new("b", ["t", "f"]).unwrap()];
        let dag = Dag::new(["a", "b"], [("a", "b")]).unwrap();
        let recs = records_from_reader("a,b\nt,t\nt,t\nt,t\nt,f\nf,t\nf,f\n".as_bytes()).unwrap();
        (vars, dag, recs)
    }

    fn table(v: &NodeValuation) -> &Vec<Vec<f64>> {
        match v.valuation() {
            Valuation::Probabilistic(rows) => rows,
            Valuation::Ds(_) => panic!(),
        }
    }

    #[test]
    fn relative_frequencies() {
        let (vars, dag, recs) = setup();
        let e = estimate_valuations(&vars, &dag, &recs, 0.0).unwrap();
        assert_eq!(table(&e.valuations[1])[0][0], 0.75);
        assert_eq!(table(&e.valuations[1])[1][0], 0.5);
        assert!((table(&e.valuations[0])[0][0] - 4.0 / 6.0).abs() < 1e-15);
        let e = estimate_valuations(&vars, &dag, &recs, 1.0).unwrap();
        assert!((table(&e.valuations[1])[0][0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_parent_configuration() {
        let (vars, dag, _) = setup();
        let recs = records_from_reader("a,b\nt,t\nt,f\n".as_bytes()).unwrap();
        let e = estimate_valuations(&vars, &dag, &recs, 0.0).unwrap();
        assert_eq!(table(&e.valuations[1])[1], vec![0.5, 0.5]);
        assert_eq!(e.warnings.len(), 1);
        assert!(e.warnings[0].contains("a='f'"));
    }

    #[test]
    fn bad_records() {
        let (vars, dag, _) = setup();
        let recs = records_from_reader("a,b\nt,t\nx,t\n".as_bytes()).unwrap();
        let err = estimate_valuations(&vars, &dag, &recs, 0.0).unwrap_err().to_string();
        assert!(err.contains("record 2") && err.contains("column 1") && err.contains("`x`"), "{err}");
        let empty = records_from_reader("a,b\n".as_bytes()).unwrap();
        assert!(estimate_valuations(&vars, &dag, &empty, 0.0).is_err());
    }
}
