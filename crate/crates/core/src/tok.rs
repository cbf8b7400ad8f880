//! Word- and character-level tokenization with a corpus-derived vocabulary.
//!
//! Token ids are assigned by first occurrence over train, then id_test, then
//! ood_test, after two reserved specials: padding (0) and begin-of-sequence
//! (1). Char mode splits every token into characters and inserts a single
//! space token between words, so the same statement structure is recoverable
//! from either encoding.

use crate::corpus::Statement;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const BOS_TOKEN: &str = "<bos>";
pub const CHAR_SEPARATOR: &str = " ";
pub const VOCAB_MAGIC: &str = "XLPVOCAB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerMode {
    Word,
    Char,
}

impl TokenizerMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenizerMode::Word => "word",
            TokenizerMode::Char => "char",
        }
    }

    pub fn from_str_name(s: &str) -> Result<TokenizerMode> {
        match s {
            "word" => Ok(TokenizerMode::Word),
            "char" => Ok(TokenizerMode::Char),
            other => Err(Error::Input(format!("unknown tokenizer mode {other:?}"))),
        }
    }
}

/// A statement rendered as model input.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub ids: Vec<u32>,
    /// First position of the answer span (after the BOS prefix).
    pub answer_start: usize,
    /// First position of the two-token subject span, in id space.
    pub subject_start: usize,
}

impl Encoded {
    pub fn answer_len(&self) -> usize {
        self.ids.len() - self.answer_start
    }
}

#[derive(Debug, Clone)]
pub struct Vocabulary {
    pub mode: TokenizerMode,
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

fn statement_units(statement: &Statement, mode: TokenizerMode) -> Vec<String> {
    match mode {
        TokenizerMode::Word => statement.tokens.clone(),
        TokenizerMode::Char => {
            let mut units = Vec::new();
            for (i, tok) in statement.tokens.iter().enumerate() {
                if i > 0 {
                    units.push(CHAR_SEPARATOR.to_string());
                }
                for ch in tok.chars() {
                    units.push(ch.to_string());
                }
            }
            units
        }
    }
}

/// Position of a statement's token boundary in unit space (before BOS).
fn unit_offset(statement: &Statement, mode: TokenizerMode, token_idx: usize) -> usize {
    match mode {
        TokenizerMode::Word => token_idx,
        TokenizerMode::Char => {
            let mut off = 0;
            for tok in statement.tokens.iter().take(token_idx) {
                off += tok.chars().count() + 1;
            }
            off
        }
    }
}

impl Vocabulary {
    pub fn build(splits: &[&[Statement]], mode: TokenizerMode) -> Vocabulary {
        let mut vocab = Vocabulary {
            mode,
            tokens: vec![PAD_TOKEN.to_string(), BOS_TOKEN.to_string()],
            index: HashMap::from([(PAD_TOKEN.to_string(), PAD_ID), (BOS_TOKEN.to_string(), BOS_ID)]),
        };
        for split in splits {
            for statement in *split {
                for unit in statement_units(statement, mode) {
                    if !vocab.index.contains_key(&unit) {
                        let id = vocab.tokens.len() as u32;
                        vocab.index.insert(unit.clone(), id);
                        vocab.tokens.push(unit);
                    }
                }
            }
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Result<&str> {
        self.tokens
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or_else(|| Error::Input(format!("token id {id} out of range")))
    }

    pub fn encode(&self, statement: &Statement) -> Result<Encoded> {
        let mut ids = vec![BOS_ID];
        for unit in statement_units(statement, self.mode) {
            let id = self.index.get(&unit).copied().ok_or_else(|| {
                Error::Input(format!("token {unit:?} is not in the vocabulary"))
            })?;
            ids.push(id);
        }
        Ok(Encoded {
            ids,
            answer_start: 1 + unit_offset(statement, self.mode, statement.answer_start),
            subject_start: 1 + unit_offset(statement, self.mode, statement.subject_start),
        })
    }

    /// Decode ids back to text; BOS and PAD are skipped.
    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            if id == BOS_ID || id == PAD_ID {
                continue;
            }
            let tok = self.token(id)?;
            match self.mode {
                TokenizerMode::Word => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push_str(tok);
                }
                TokenizerMode::Char => out.push_str(tok),
            }
        }
        Ok(out)
    }

    /// Decode only the answer span of an encoded statement.
    pub fn decode_answer(&self, encoded: &Encoded) -> Result<String> {
        self.decode(&encoded.ids[encoded.answer_start..])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = format!("{VOCAB_MAGIC} {} {}\n", self.mode.as_str(), self.tokens.len());
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        crate::ioutil::write_string_atomic(path, &out)
    }

    pub fn load(path: &Path) -> Result<Vocabulary> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.split('\n');
        let header = lines.next().unwrap_or("");
        let parts: Vec<&str> = header.split(' ').collect();
        if parts.len() != 3 || parts[0] != VOCAB_MAGIC {
            return Err(Error::Integrity(format!("bad vocabulary header {header:?}")));
        }
        let mode = TokenizerMode::from_str_name(parts[1])?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::Integrity(format!("bad vocabulary count {:?}", parts[2])))?;
        let mut tokens: Vec<String> = lines.map(|s| s.to_string()).collect();
        // Trailing newline yields one empty tail entry; a genuine space token
        // is a single space, never empty.
        if tokens.last().map(|s| s.is_empty()).unwrap_or(false) {
            tokens.pop();
        }
        if tokens.len() != count {
            return Err(Error::Integrity(format!(
                "vocabulary claims {count} tokens but file has {}",
                tokens.len()
            )));
        }
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN)
            || tokens.get(1).map(String::as_str) != Some(BOS_TOKEN)
        {
            return Err(Error::Integrity("vocabulary specials are misplaced".into()));
        }
        let mut index = HashMap::new();
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::Integrity(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary { mode, tokens, index })
    }
}

/// Jaccard overlap of the per-language template-literal vocabularies, in the
/// unit space of the given mode (words, or characters for char mode).
pub fn literal_vocab_jaccard(statements: &[Statement], mode: TokenizerMode) -> Result<f64> {
    let mut sets: [std::collections::HashSet<String>; 2] = [Default::default(), Default::default()];
    for s in statements {
        let set = &mut sets[s.lang as usize];
        for i in s.literal_positions() {
            match mode {
                TokenizerMode::Word => {
                    set.insert(s.tokens[i].clone());
                }
                TokenizerMode::Char => {
                    for ch in s.tokens[i].chars() {
                        set.insert(ch.to_string());
                    }
                }
            }
        }
    }
    if sets[0].is_empty() || sets[1].is_empty() {
        return Err(Error::Degenerate(
            "both languages must be present to measure vocabulary overlap".into(),
        ));
    }
    let inter = sets[0].intersection(&sets[1]).count() as f64;
    let union = sets[0].union(&sets[1]).count() as f64;
    Ok(inter / union)
}
