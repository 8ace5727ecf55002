//! The four-section optimization prompt handed to the proposer.

use crate::feedback::FeedbackBundle;
use crate::seq::{ReferenceContext, Sequence, StepSizeRegime};

/// Fixed system message used by chat-based proposers.
pub const SYSTEM_MESSAGE: &str =
    "You are a protein sequence optimizer. Output only the raw sequence.";

/// Renders `#Instruction`, `#Variables`, `#Constraints` and `#Feedback`, in
/// that order. The output is a pure function of the inputs.
pub fn assemble_prompt(
    ctx: &ReferenceContext,
    current: &Sequence,
    regime: StepSizeRegime,
    bundle: &FeedbackBundle,
    include_reference: bool,
) -> String {
    let mut out = String::new();
    out.push_str("#Instruction\n");
    out.push_str("We want to increase the structural fidelity of the proposed protein sequence");
    if let Some(cap) = regime.max_edits() {
        out.push_str(&format!(
            ", by changing a maximum of {cap} residues in each step"
        ));
    }
    out.push('.');
    match (&ctx.reference_sequence, include_reference) {
        (Some(reference), true) => {
            out.push_str(" The constraint is to match the fold of this native protein sequence:\n");
            out.push_str(reference.as_str());
            out.push_str(".\n");
        }
        _ => out.push('\n'),
    }
    out.push_str(
        "Use only standard amino acids (ACDEFGHIKLMNPQRSTVWY), no gaps. Output only the raw sequence without any code.\n",
    );

    out.push_str("\n#Variables\n");
    out.push_str("(str) protein_sequence=");
    out.push_str(current.as_str());
    out.push('\n');

    out.push_str("\n#Constraints\n");
    out.push_str(&format!(
        "(str) A protein sequence of {} amino acid residues. Use only standard amino acids: ACDEFGHIKLMNPQRSTVWY. Do not include repeated patterns or gaps or motifs. Output ONLY the raw sequence without any code, or formatting. Example format: MKTAYIAKQRQISFVK...\n",
        ctx.desired_length
    ));

    out.push_str("\n#Feedback\n");
    out.push_str(&bundle.render());
    out.push('\n');
    out
}
