//! Command-line driver for the whole pipeline.
//!
//! ```text
//! synth       <out>/manifest.toml, videos/, gaze/, truth/
//! preprocess  <out>/index.toml, labels.csv, samples/
//! train       <out>/run.toml, config.txt, stage1/, final/, history.csv, report_<mode>.toml
//! evaluate    <run>/report_<mode>.toml
//! ablate      <out>/<variant>/ (one train run each), <out>/ablation.txt
//! explain     <out>/spatial.arr, temporal.arr, frames.arr, meta.toml
//! report      <out>/tables.txt, <out>/<explain dir name>/overlay.png, temporal.png
//! ```
//!
//! Settings come from an optional `key = value` file (`--config`); any
//! flag given on the command line replaces the file's entry.

mod args;
mod commands;
mod settings;

pub use args::{
    AblateArgs, Cli, Command, EvaluateArgs, ExplainArgs, PreprocessArgs, ReportArgs, SynthArgs, TrainArgs, TrainOpts,
};
pub use settings::{model_enabled, Settings, DISABLE_MODEL_ENV};

/// A failed pipeline stage; printed as one line on stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(stage: &'static str, message: impl std::fmt::Display) -> Self {
        CliError { stage, message: message.to_string() }
    }

    /// `error stage=<stage> message=<single-line text>`
    pub fn line(&self) -> String {
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error stage={} message={msg}", self.stage)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Run one subcommand and return what it prints on success.
pub fn run(cli: &Cli) -> CliResult<String> {
    let settings = Settings::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth(a) => commands::synth(a, settings, cli.force),
        Command::Preprocess(a) => commands::preprocess(a, settings, cli.force),
        Command::Train(a) => commands::train(a, settings, cli.force),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Ablate(a) => commands::ablate(a, settings, cli.force),
        Command::Explain(a) => commands::explain(a, cli.force),
        Command::Report(a) => commands::report(a, cli.force),
    }
}
