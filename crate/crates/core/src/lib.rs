//! Evidential reasoning with belief networks.
//!
//! Mass functions over multi-variable frames, Dempster combination and its
//! inverse, belief networks with probabilistic or Dempster-Shafer node
//! valuations, join-tree propagation (sum- and max-product), a rule-beam
//! view of node valuations and a small logical query language.
//!
//! The algebra is generic over [`Scalar`]; `f64` is the default and
//! `BigRational` gives exact results on small problems.

pub mod error;
pub mod estimate;
pub mod frame;
pub mod io;
pub mod jointree;
pub mod mass;
pub mod network;
pub mod query;
pub mod revision;
pub mod ruleview;
pub mod scalar;

pub use error::{Error, Result};
pub use estimate::{estimate_valuations, Estimate};
pub use frame::{frame_limit, set_frame_limit, Configuration, FrameSet, Scope, Variable};
pub use io::{load_network, load_records, load_structure, save_network, RecordTable};
pub use jointree::{build_join_tree, query_marginal, CombinationMode, Hyperedge, JoinTree};
pub use mass::{MassFunction, SetFunctionKind};
pub use network::{d_separated, factorize_joint, pseudo_condition, BeliefNetwork, Dag, EvidenceSet, NodeValuation};
pub use query::{parse_expr, parse_query, Atom, Expr, Query};
pub use revision::{combine_max, marginalize_max, revise, Explanation, RevisionMode};
pub use ruleview::{
    compile_query_node, evaluate_expression_query, parse_rule_beam, render_rule_beam, validate_rule_query,
    ThreeValuedAnswer,
};
pub use scalar::Scalar;

pub use num_rational::BigRational;

pub type Mass = MassFunction<f64>;
pub type Mass32 = MassFunction<f32>;
pub type ExactMass = MassFunction<BigRational>;
pub type Network = BeliefNetwork<f64>;
pub type Network32 = BeliefNetwork<f32>;
pub type ExactNetwork = BeliefNetwork<BigRational>;
