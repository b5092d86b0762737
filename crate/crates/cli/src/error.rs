use std::fmt;

use tree_entropy::config::ConfigError;
use tree_entropy::estimators::EstimatorError;
use tree_entropy::exact::ExactError;
use tree_entropy::graph::GraphError;
use tree_entropy::interaction::InteractionError;
use tree_entropy::tree::TreeError;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_GENERATION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, msg: msg.into() }
    }

    pub fn generation(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_GENERATION, msg: msg.into() }
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_INFEASIBLE, msg: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for CliError {}

fn code_of_graph(e: &GraphError) -> i32 {
    match e {
        GraphError::ResampleBudget(_) => EXIT_GENERATION,
        _ => EXIT_USAGE,
    }
}

fn code_of_interaction(e: &InteractionError) -> i32 {
    match e {
        InteractionError::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

fn code_of_exact(e: &ExactError) -> i32 {
    match e {
        ExactError::BudgetExceeded { .. } | ExactError::ZeroPartition => EXIT_INFEASIBLE,
        ExactError::Interaction(i) => code_of_interaction(i),
        _ => EXIT_USAGE,
    }
}

fn code_of_tree(e: &TreeError) -> i32 {
    match e {
        TreeError::ZeroMass | TreeError::BudgetExceeded { .. } => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError { code: code_of_graph(&e), msg: e.to_string() }
    }
}

impl From<InteractionError> for CliError {
    fn from(e: InteractionError) -> Self {
        CliError { code: code_of_interaction(&e), msg: e.to_string() }
    }
}

impl From<ExactError> for CliError {
    fn from(e: ExactError) -> Self {
        CliError { code: code_of_exact(&e), msg: e.to_string() }
    }
}

impl From<TreeError> for CliError {
    fn from(e: TreeError) -> Self {
        CliError { code: code_of_tree(&e), msg: e.to_string() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let code = match &e {
            ConfigError::Interaction(i) => code_of_interaction(i),
            _ => EXIT_USAGE,
        };
        CliError { code, msg: e.to_string() }
    }
}

impl From<EstimatorError> for CliError {
    fn from(e: EstimatorError) -> Self {
        let code = match &e {
            EstimatorError::InfeasibleInit | EstimatorError::BudgetExceeded { .. } => EXIT_INFEASIBLE,
            EstimatorError::Tree(t) => code_of_tree(t),
            EstimatorError::Exact(x) => code_of_exact(x),
            EstimatorError::Interaction(i) => code_of_interaction(i),
            EstimatorError::Graph(g) => code_of_graph(g),
            _ => EXIT_USAGE,
        };
        CliError { code, msg: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::usage(e.to_string())
    }
}
