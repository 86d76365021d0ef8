//! Versioned prompt templates. Each template is hashed so result files can
//! record exactly which wording produced a verdict.

use sha2::{Digest, Sha256};

pub const TEMPLATE_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub body: &'static str,
}

pub const DIRECT_JUDGE: Template = Template {
    name: "direct_judge",
    body: include_str!("../../templates/direct_judge.txt"),
};
pub const COMPARE_JUDGE: Template = Template {
    name: "compare_judge",
    body: include_str!("../../templates/compare_judge.txt"),
};
pub const EXTRACT_PARAMS: Template = Template {
    name: "extract_params",
    body: include_str!("../../templates/extract_params.txt"),
};
pub const TASK_LIST: Template = Template {
    name: "task_list",
    body: include_str!("../../templates/task_list.txt"),
};
pub const TASK_COMPAT: Template = Template {
    name: "task_compat",
    body: include_str!("../../templates/task_compat.txt"),
};
pub const CONSTRAINT_PRESELECT: Template = Template {
    name: "constraint_preselect",
    body: include_str!("../../templates/constraint_preselect.txt"),
};
pub const CONSTRAINT_GENERATE: Template = Template {
    name: "constraint_generate",
    body: include_str!("../../templates/constraint_generate.txt"),
};
pub const CONSTRAINT_VALIDATE: Template = Template {
    name: "constraint_validate",
    body: include_str!("../../templates/constraint_validate.txt"),
};

pub const ALL: [Template; 8] = [
    DIRECT_JUDGE,
    COMPARE_JUDGE,
    EXTRACT_PARAMS,
    TASK_LIST,
    TASK_COMPAT,
    CONSTRAINT_PRESELECT,
    CONSTRAINT_GENERATE,
    CONSTRAINT_VALIDATE,
];

/// Templates whose wording affects evaluation verdicts.
pub const JUDGE_SET: [Template; 3] = [DIRECT_JUDGE, COMPARE_JUDGE, EXTRACT_PARAMS];

impl Template {
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.body.as_bytes()))
    }

    /// Substitute `{{key}}` placeholders in one pass, so substituted values
    /// are never themselves expanded. Unknown placeholders are left as is.
    pub fn render(&self, vars: &[(&str, &str)]) -> String {
        let mut out = String::with_capacity(self.body.len() + 256);
        let mut rest = self.body;
        while let Some(open) = rest.find("{{") {
            out.push_str(&rest[..open]);
            let after = &rest[open + 2..];
            match after.find("}}") {
                Some(close) => {
                    let key = &after[..close];
                    match vars.iter().find(|(k, _)| *k == key) {
                        Some((_, v)) => out.push_str(v),
                        None => {
                            out.push_str("{{");
                            out.push_str(key);
                            out.push_str("}}");
                        }
                    }
                    rest = &after[close + 2..];
                }
                None => {
                    out.push_str(&rest[open..]);
                    rest = "";
                }
            }
        }
        out.push_str(rest);
        out
    }
}

/// Digest over the judge template set, recorded on every evaluation result.
pub fn judge_set_hash() -> String {
    let mut h = Sha256::new();
    h.update(TEMPLATE_VERSION.as_bytes());
    for t in JUDGE_SET {
        h.update(b"\n");
        h.update(t.name.as_bytes());
        h.update(b"=");
        h.update(t.hash().as_bytes());
    }
    hex::encode(h.finalize())
}
