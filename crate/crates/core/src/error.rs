use crate::data::DataError;
use crate::gradsuite::SuiteError;
use crate::imageproc::ImageError;
use crate::locate::LocateError;
use crate::metrics::MetricsError;
use crate::nn::NnError;
use crate::quantify::QuantifyError;
use crate::tensor::TensorError;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Quantify(#[from] QuantifyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    GradCheck(#[from] SuiteError),
    /// Arguments that parse but cannot be used together.
    #[error("{0}")]
    Usage(String),
    /// A check the run exists to perform did not pass.
    #[error("{0}")]
    Failed(String),
    #[error("{context}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach a description of the failed step to an error.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E: Into<Error>> Context<T> for std::result::Result<T, E> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| Error::Context {
            context: what(),
            source: Box::new(e.into()),
        })
    }
}

/// The message of `err` followed by each of its causes.
pub fn chain(err: &dyn std::error::Error) -> Vec<String> {
    let mut out = vec![err.to_string()];
    let mut cur = err.source();
    while let Some(e) = cur {
        let msg = e.to_string();
        if out.last() != Some(&msg) {
            out.push(msg);
        }
        cur = e.source();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn context_chain_lists_causes() {
        let io: std::result::Result<(), std::io::Error> = Err(std::io::Error::other("disk gone"));
        let err = io.context(|| "reading manifest".into()).unwrap_err();
        assert_eq!(chain(&err), vec!["reading manifest", "disk gone"]);
    }
}
