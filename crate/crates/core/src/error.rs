use std::path::PathBuf;

/// Errors produced by the pipeline. The CLI maps [`Error::Io`] to exit code 2
/// and everything else to exit code 1.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON at byte offset {offset}: {message}")]
    Json { offset: usize, message: String },
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("duplicate feature record (key {key:?}, variant {variant})")]
    DuplicateRecord { key: String, variant: u32 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("missing feature for key {0:?}")]
    MissingFeature(String),
    #[error("vocabulary mismatch: {0}")]
    VocabularyMismatch(String),
    #[error("{0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// Converts a serde_json error into [`Error::Json`], translating its
    /// line/column position into a byte offset within `text`.
    pub fn json(err: serde_json::Error, text: &str) -> Self {
        let offset = byte_offset(text, err.line(), err.column());
        Error::Json {
            offset,
            message: err.to_string(),
        }
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let mut offset = 0;
    for (idx, l) in text.split_inclusive('\n').enumerate() {
        if idx + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offset_from_line_and_column() {
        let text = "[\n  {\"a\": }\n]";
        assert_eq!(byte_offset(text, 1, 1), 0);
        assert_eq!(byte_offset(text, 2, 3), 4);
        assert_eq!(byte_offset(text, 9, 1), text.len());
    }
}
