use std::process::ExitCode;

use flowtriage::pipeline::PipelineError;

/// Failure printed to stderr as `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn report(&self, code: u8) -> ExitCode {
        eprintln!("{}", serde_json::json!({ "error": self.kind, "message": self.message }));
        ExitCode::from(code)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

macro_rules! from_error {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                Self::new($kind, e.to_string())
            }
        })*
    };
}

from_error! {
    flowtriage::manifest::ManifestError => "manifest",
    flowtriage::metrics::MetricsError => "metrics",
    flowtriage::encoding::EncodingError => "encoding",
    flowtriage::synth::SynthError => "synth",
    flowtriage::llm::LlmError => "llm",
    csv::Error => "csv",
    toml::de::Error => "config",
}

pub fn io(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::new("io", format!("{}: {e}", path.display()))
}
