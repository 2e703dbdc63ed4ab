use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

/// Token counts for one model call or a sum of calls.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64) -> Self {
        TokenUsage {
            input_tokens,
            output_tokens,
        }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

impl Add for TokenUsage {
    type Output = TokenUsage;

    fn add(self, rhs: TokenUsage) -> TokenUsage {
        TokenUsage::new(
            self.input_tokens + rhs.input_tokens,
            self.output_tokens + rhs.output_tokens,
        )
    }
}

impl AddAssign for TokenUsage {
    fn add_assign(&mut self, rhs: TokenUsage) {
        *self = *self + rhs;
    }
}

/// Approximate token count. Text splits into alphanumeric runs and single
/// punctuation characters; a run longer than 8 characters counts as
/// `ceil(len / 4)` tokens, anything else as one.
pub fn count_tokens(text: &str) -> u64 {
    let mut total = 0;
    let mut run = 0usize;
    let flush = |run: &mut usize, total: &mut u64| {
        if *run > 8 {
            *total += run.div_ceil(4) as u64;
        } else if *run > 0 {
            *total += 1;
        }
        *run = 0;
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' {
            run += 1;
        } else {
            flush(&mut run, &mut total);
            if !c.is_whitespace() {
                total += 1;
            }
        }
    }
    flush(&mut run, &mut total);
    total
}
