use detkit::error::ErrorKind;

#[derive(Debug)]
pub enum CliError {
    /// Bad or missing flags.
    Usage(String),
    Core(detkit::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Io => 3,
                ErrorKind::Internal => 4,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

macro_rules! via_core {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

via_core!(
    detkit::Error,
    detkit::sampling::ManifestError,
    detkit::sampling::SplitError,
    detkit::compositor::CompositeError,
    detkit::maskprop::MaskError,
    detkit::evaluator::EvalError,
    detkit::fusion::FusionError,
    detkit::geometry::GeometryError
);
