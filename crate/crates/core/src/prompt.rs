//! Composition of the prompt a model under test receives.

/// Header placed between the task instruction and the numbered constraints.
pub const CONSTRAINT_HEADER: &str = "Your response must satisfy all of the following constraints:";

/// Task instruction followed by a numbered constraint list. With no
/// constraints the instruction is returned alone.
pub fn compose_prompt<'a, I>(instruction: &str, constraints: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let mut out = instruction.trim().to_string();
    let mut n = 0;
    for c in constraints {
        if n == 0 {
            out.push_str("\n\n");
            out.push_str(CONSTRAINT_HEADER);
        }
        n += 1;
        out.push_str(&format!("\n{n}. {}", c.trim()));
    }
    out
}
