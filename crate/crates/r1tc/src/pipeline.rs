use crate::error::Result;
use crate::tensor::{CompletionResult, PartialTensor};

#[derive(Debug, Clone)]
pub struct CompleteOptions {
    pub tol: f64,
}

pub fn complete(_t: &PartialTensor, _opts: &CompleteOptions) -> Result<CompletionResult> {
    unimplemented!()
}
