use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Deref;

/// Lowercased word tokens of a text, as produced by [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().map(Into::into).collect())
    }
}

/// Any visible character that is neither alphanumeric nor whitespace.
pub fn is_punctuation(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace() && !c.is_control()
}

/// Lowercases, splits on whitespace and makes every punctuation character
/// a token of its own.
pub fn tokenize(text: &str) -> TokenSequence {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_whitespace() || c.is_control() {
            if !word.is_empty() {
                tokens.push(core::mem::take(&mut word));
            }
        } else if is_punctuation(c) {
            if !word.is_empty() {
                tokens.push(core::mem::take(&mut word));
            }
            let mut p = String::new();
            p.extend(c.to_lowercase());
            tokens.push(p);
        } else {
            word.extend(c.to_lowercase());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    TokenSequence(tokens)
}
