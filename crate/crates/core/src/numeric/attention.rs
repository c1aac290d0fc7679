use crate::error::Result;
use crate::numeric::tape::{Tape, Var};

/// Dot-product attention pooling: `e_i = h_i·w`, `α = softmax(e)`,
/// `R = Σ α_i h_i`. Returns `(R, α)`.
pub fn attention_pool(tape: &mut Tape, hidden: &[Var], weight: Var) -> Result<(Var, Var)> {
    let h = tape.stack(hidden)?;
    let scores = tape.matvec(h, weight)?;
    let alphas = tape.softmax(scores)?;
    let pooled = tape.tmatvec(h, alphas)?;
    Ok((pooled, alphas))
}
