use merit_core::estimation::EstimationError;
use merit_core::evaluation::EvalError;
use merit_core::forecasters::ForecastError;
use merit_core::market_data::DataError;
use merit_core::run::RunError;
use merit_core::stack_assembly::AssemblyError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("invalid theta: {0}")]
    InvalidTheta(String),
    #[error("model: {0}")]
    Assembly(#[from] AssemblyError),
    #[error("estimation: {0}")]
    Estimation(#[from] EstimationError),
    #[error("forecast: {0}")]
    Forecast(#[from] ForecastError),
    #[error("evaluation: {0}")]
    Evaluation(#[from] EvalError),
    #[error("missing naive run: skill needs a run file named naive.csv")]
    MissingNaiveRun,
    #[error("run file {path}: {source}")]
    RunFile { path: String, source: RunError },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

impl CliError {
    /// 2 for anything wrong with the inputs, 1 for internal failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_)
            | CliError::Data(_)
            | CliError::InvalidTheta(_)
            | CliError::MissingNaiveRun
            | CliError::RunFile { .. } => 2,
            CliError::Assembly(e) => assembly_code(e),
            CliError::Estimation(e) => match e {
                EstimationError::Assembly(a) => assembly_code(a),
                _ => 2,
            },
            CliError::Forecast(e) => match e {
                ForecastError::DegenerateDesign | ForecastError::LengthMismatch { .. } => 1,
                _ => 2,
            },
            CliError::Evaluation(e) => match e {
                EvalError::Io(_) => 1,
                _ => 2,
            },
            CliError::Output { .. } => 1,
        }
    }
}

fn assembly_code(e: &AssemblyError) -> u8 {
    match e {
        AssemblyError::Curve(_) => 1,
        _ => 2,
    }
}
