use std::fmt;
use std::path::Path;

/// Failures mapped onto process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or kernel spec. Exit 2.
    Config(String),
    /// Reading or writing files. Exit 3.
    Io(String),
    /// Anything the computation itself rejected. Exit 1.
    Run(wgf_core::Error),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io(_) => 3,
            Self::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "config error: {m}"),
            Self::Io(m) => write!(f, "i/o error: {m}"),
            Self::Run(e) => write!(f, "{e}"),
        }
    }
}

impl From<wgf_core::Error> for CliError {
    fn from(e: wgf_core::Error) -> Self {
        use wgf_core::Error as E;
        match e {
            E::InvalidKernel(_) | E::InvalidConfig(_) | E::Parse { .. } | E::UnsupportedAlpha { .. } => {
                Self::Config(e.to_string())
            }
            E::GridTooCoarse { .. } => Self::Config(format!(
                "{e}; enlarge the grid with --points or shrink --half-width so the shortest kernel scale spans at least 4 cells"
            )),
            other => Self::Run(other),
        }
    }
}
