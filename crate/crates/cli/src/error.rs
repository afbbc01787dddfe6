use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Invalid configuration or data rejected by an analysis stage.
    Contract,
    /// The filesystem refused a read or write.
    Io,
}

/// A failure tagged with the pipeline stage that raised it.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct Failure {
    pub stage: &'static str,
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn contract(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            kind: Kind::Contract,
            message: message.into(),
        }
    }

    pub fn io(stage: &'static str, message: impl Into<String>) -> Self {
        Failure {
            stage,
            kind: Kind::Io,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::Contract => 1,
            Kind::Io => 2,
        }
    }
}

pub trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> Stage<T> for mipdc_core::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| {
            let kind = if e.is_io() { Kind::Io } else { Kind::Contract };
            Failure {
                stage,
                kind,
                message: e.to_string(),
            }
        })
    }
}

impl<T> Stage<T> for std::io::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::io(stage, e.to_string()))
    }
}
