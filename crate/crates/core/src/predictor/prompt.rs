//! The stack-prediction prompt.

use crate::callgraph::CodeSlice;
use crate::location::Location;

pub const SYSTEM_PROMPT: &str = include_str!("system_prompt.txt");
pub const PROMPT_TEMPLATE: &str = include_str!("prompt_template.txt");

pub const TARGET_PLACEHOLDER: &str = "<TARGET>";
pub const FUNCTION_PLACEHOLDER: &str = "<FUNCTION>";
pub const CODE_PLACEHOLDER: &str = "<CODE>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    /// System and user parts as one document.
    pub fn text(&self) -> String {
        format!("System: {}\n{}", self.system.trim_end(), self.user)
    }
}

/// Fills the template in a single left-to-right pass, so placeholder-like
/// text inside the substituted code is left alone.
pub fn build_prompt(slice: &CodeSlice, target: &Location, function: &str) -> Prompt {
    let target = target.to_string();
    let subs = [
        (TARGET_PLACEHOLDER, target.as_str()),
        (FUNCTION_PLACEHOLDER, function),
        (CODE_PLACEHOLDER, slice.text.as_str()),
    ];
    let mut user = String::with_capacity(PROMPT_TEMPLATE.len() + slice.text.len());
    let mut rest = PROMPT_TEMPLATE;
    while let Some(start) = rest.find('<') {
        user.push_str(&rest[..start]);
        rest = &rest[start..];
        match subs.iter().find(|(p, _)| rest.starts_with(p)) {
            Some((p, v)) => {
                user.push_str(v);
                rest = &rest[p.len()..];
            }
            None => {
                user.push('<');
                rest = &rest[1..];
            }
        }
    }
    user.push_str(rest);
    Prompt {
        system: SYSTEM_PROMPT.to_string(),
        user,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use crate::callgraph::{build_call_graph, reachable_functions, render_slice};
    use std::collections::BTreeSet;

    fn toy_prompt() -> (CodeSlice, Prompt) {
        let b = builtin::cxxfilt_toy();
        let cg = build_call_graph(&b.program);
        let r = reachable_functions(&cg, "gnu_special").unwrap();
        let slice = render_slice(&b.program, &cg, &r, &b.targets[0]).unwrap();
        let p = build_prompt(&slice, &b.targets[0], "gnu_special");
        (slice, p)
    }

    #[test]
    fn substitutions_land_in_place() {
        let (slice, p) = toy_prompt();
        assert!(p.user.starts_with(
            "You are given a codebase and a specific target line known to contain or trigger a bug, \
             located at cxxfilt.c:11 in the function gnu_special. The provided code slice is:\n\n===== cxxfilt.c:gnu_special ====="
        ));
        assert!(p.user.contains(&slice.text));
        assert!(p.user.contains("from the innermost frame (gnu_special) to the call site"));
        assert!(!p.user.contains(TARGET_PLACEHOLDER));
        assert!(!p.user.contains(CODE_PLACEHOLDER));
        assert!(p.text().contains("You are a fuzzing expert"));
    }

    #[test]
    fn length_accounting() {
        let (slice, p) = toy_prompt();
        let template_rest = PROMPT_TEMPLATE.len()
            - TARGET_PLACEHOLDER.len()
            - 2 * FUNCTION_PLACEHOLDER.len()
            - CODE_PLACEHOLDER.len();
        assert_eq!(
            p.user.len(),
            template_rest + "cxxfilt.c:11".len() + 2 * "gnu_special".len() + slice.text.len()
        );
    }

    #[test]
    fn placeholder_text_in_code_is_not_expanded() {
        let slice = CodeSlice {
            text: "x = <TARGET> < <FUNCTION>;\n".into(),
            annotated_sites: BTreeSet::new(),
        };
        let p = build_prompt(&slice, &Location::new("a.c", 1), "f");
        assert!(p.user.contains("x = <TARGET> < <FUNCTION>;"));
    }

    #[test]
    fn empty_slice_keeps_scaffolding() {
        let slice = CodeSlice {
            text: String::new(),
            annotated_sites: BTreeSet::new(),
        };
        let p = build_prompt(&slice, &Location::new("a.c", 1), "f");
        for phrase in ["[Wrong Example 1]", "[Wrong Example 2]", "[Correct Example]", "AddressSanitizer"] {
            assert!(p.user.contains(phrase), "{phrase}");
        }
    }
}
