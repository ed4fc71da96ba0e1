// SPDX-License-Identifier: Apache-2.0

use crate::catalog::ProblemSpec;

pub const PREAMBLE: &str = "Write a unique SystemVerilog code that";

/// Rules appended to every prompt after the problem-specific instructions.
pub const FIXED_RULES: [&str; 5] = [
    "Be creative!",
    "Do not say I am sorry. Always come up with some code.",
    "Make sure the program compiles and runs without any errors.",
    "Please do not add any comments in the code.",
    "Please do not give explanation for the code.",
];

/// Full instruction list in order.
pub fn instructions(spec: &ProblemSpec) -> Vec<String> {
    let mut v = spec.spec_instructions();
    v.extend(FIXED_RULES.iter().map(|s| s.to_string()));
    v
}

fn letter(i: usize) -> String {
    let mut n = i;
    let mut s = String::new();
    loop {
        s.insert(0, (b'a' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    s
}

/// The prompt sent to a provider for `spec`.
pub fn render_prompt(spec: &ProblemSpec) -> String {
    let mut out = format!("{PREAMBLE} {} Instructions:", spec.description.trim());
    for (i, ins) in instructions(spec).iter().enumerate() {
        out.push(' ');
        out.push_str(&letter(i));
        out.push_str(". ");
        out.push_str(ins.trim());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn letters() {
        assert_eq!(letter(0), "a");
        assert_eq!(letter(25), "z");
        assert_eq!(letter(26), "aa");
    }
}
