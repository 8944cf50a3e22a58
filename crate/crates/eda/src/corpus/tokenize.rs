//! Deterministic whitespace/punctuation tokenizer.
//!
//! Rules: lowercase everything, split punctuation marks into standalone
//! tokens, keep apostrophes that sit between alphanumerics inside the token
//! (so "I'm" stays one token). Empty input yields an empty sequence.

/// Tokenize `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let chars: Vec<char> = lowered.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        if c.is_alphanumeric() {
            current.push(c);
        } else if c == '\'' {
            // Apostrophe joins a token only between alphanumerics.
            let prev_alnum = chars.get(i.wrapping_sub(1)).is_some_and(|p| p.is_alphanumeric());
            let next_alnum = chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
            if prev_alnum && next_alnum {
                current.push(c);
            } else {
                flush(&mut tokens, &mut current);
                tokens.push(c.to_string());
            }
        } else if c.is_whitespace() {
            flush(&mut tokens, &mut current);
        } else {
            flush(&mut tokens, &mut current);
            tokens.push(c.to_string());
        }
    }
    flush(&mut tokens, &mut current);
    tokens
}

fn flush(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        tokens.push(std::mem::take(current));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_no_tokens() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn punctuation_splits_off() {
        assert_eq!(tokenize("Not after this!"), vec!["not", "after", "this", "!"]);
    }

    #[test]
    fn intra_word_apostrophe_kept() {
        assert_eq!(tokenize("I'm so sorry!"), vec!["i'm", "so", "sorry", "!"]);
    }

    #[test]
    fn edge_apostrophes_split() {
        assert_eq!(tokenize("'hello'"), vec!["'", "hello", "'"]);
    }

    #[test]
    fn hyphens_are_punctuation() {
        assert_eq!(tokenize("no-no"), vec!["no", "-", "no"]);
    }

    #[test]
    fn idempotent_on_rejoined_output() {
        for text in [
            "Not after this!",
            "I'm so sorry!",
            "Oh no-no-no, give me some specifics.",
            "What?! Really...",
            "'quoted' text, isn't it?",
        ] {
            let once = tokenize(text);
            let again = tokenize(&once.join(" "));
            assert_eq!(once, again, "not idempotent on {text:?}");
        }
    }
}
