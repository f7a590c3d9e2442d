use thiserror::Error;
use vericomp_core::actors::ActorError;
use vericomp_core::ledger::LedgerError;
use vericomp_core::protocol::ProtocolError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("run {run} of cell (p={prior}, n={n}) broke an invariant: {detail}")]
    Invariant {
        prior: f64,
        n: usize,
        run: usize,
        detail: String,
    },
    #[error("report is missing cells: {}", format_cells(.0))]
    MissingCells(Vec<(f64, usize)>),
}

fn format_cells(cells: &[(f64, usize)]) -> String {
    cells
        .iter()
        .map(|(p, n)| format!("(p={p}, n={n})"))
        .collect::<Vec<_>>()
        .join(", ")
}
