//! Two synthetic template languages over disjoint literal vocabularies.
//!
//! A template is `template_len` literal tokens with a subject slot spliced in
//! at a random position and an attribute slot appended at the end. Literal
//! pools mix word-like tokens (a configurable share capitalized) with
//! number-like tokens drawn from ranges that cannot collide with real year
//! attributes. The two languages share a configurable fraction of their
//! pools; at 0 the surface vocabularies are fully disjoint, so any transfer
//! between the languages has to happen inside the model.

use crate::error::{Error, Result};
use crate::kg::FactType;
use crate::rng::{child_seed, rng_from};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Piece {
    Lit(String),
    Subject,
    Attr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub lang: u8,
    pub fact_type: FactType,
    pub body: Vec<Piece>,
}

impl Template {
    /// Everything before the final attribute slot.
    pub fn prefix(&self) -> &[Piece] {
        &self.body[..self.body.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LanguageConfig {
    pub n_templates_per_fact: usize,
    pub template_len: usize,
    pub shared_token_fraction: f64,
    pub numeric_literal_fraction: f64,
    pub capitalized_literal_fraction: f64,
    pub literal_pool_size: usize,
    pub seed: u64,
}

impl Default for LanguageConfig {
    fn default() -> Self {
        LanguageConfig {
            n_templates_per_fact: 5,
            template_len: 7,
            shared_token_fraction: 0.0,
            numeric_literal_fraction: 0.15,
            capitalized_literal_fraction: 0.2,
            literal_pool_size: 120,
            seed: 0,
        }
    }
}

impl LanguageConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_templates_per_fact == 0 {
            return Err(Error::Config("need at least one template per fact type".into()));
        }
        if self.template_len == 0 {
            return Err(Error::Config("template_len must be positive".into()));
        }
        for (name, f) in [
            ("shared_token_fraction", self.shared_token_fraction),
            ("numeric_literal_fraction", self.numeric_literal_fraction),
            ("capitalized_literal_fraction", self.capitalized_literal_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("{name} must be within [0, 1], got {f}")));
            }
        }
        if self.literal_pool_size < 2 {
            return Err(Error::Config("literal pool must hold at least 2 tokens".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LanguagePair {
    pub config: LanguageConfig,
    /// Tokens exclusive to each language.
    pub exclusive: [Vec<String>; 2],
    /// Tokens present in both languages' pools.
    pub shared: Vec<String>,
    pub templates: Vec<Template>,
}

// Literal-word syllables use three-letter consonant clusters, structurally
// distinct from the two-letter syllables of names and cities, so the pools
// cannot collide as strings.
const LITERAL_SYLLABLES: [&str; 16] = [
    "bre", "cho", "dri", "fla", "gos", "hun", "jel", "kle", "mon", "pru", "squ", "tre", "urb",
    "vex", "wim", "zor",
];

fn gen_word(rng: &mut impl Rng, capitalized: bool) -> String {
    let n = rng.gen_range(1..=2);
    let mut s = String::new();
    for _ in 0..n {
        s.push_str(LITERAL_SYLLABLES[rng.gen_range(0..LITERAL_SYLLABLES.len())]);
    }
    if capitalized {
        let mut c = s.chars();
        return c.next().unwrap().to_uppercase().chain(c).collect();
    }
    s
}

// Number-like literals avoid 1000..=2099 entirely, which keeps them disjoint
// from any plausible year-attribute pool.
fn gen_number(rng: &mut impl Rng) -> String {
    let lo_size = 998u32; // 2..=999
    let hi_size = 900u32; // 2100..=2999
    let k = rng.gen_range(0..lo_size + hi_size);
    if k < lo_size {
        (k + 2).to_string()
    } else {
        (k - lo_size + 2100).to_string()
    }
}

fn literal_pool(
    rng: &mut impl Rng,
    n: usize,
    cfg: &LanguageConfig,
    taken: &mut HashSet<String>,
) -> Result<Vec<String>> {
    let n_numeric = (cfg.numeric_literal_fraction * n as f64).round() as usize;
    let n_cap = (cfg.capitalized_literal_fraction * (n - n_numeric) as f64).round() as usize;
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > n * 500 + 2000 {
            return Err(Error::Infeasible(format!(
                "cannot draw {n} distinct literal tokens"
            )));
        }
        let i = out.len();
        let tok = if i < n_numeric {
            gen_number(rng)
        } else {
            gen_word(rng, i < n_numeric + n_cap)
        };
        // Case-insensitive uniqueness: the all-lowercase casing intervention
        // must never merge two distinct tokens.
        if taken.insert(tok.to_lowercase()) {
            out.push(tok);
        }
    }
    Ok(out)
}

impl LanguagePair {
    pub fn generate(config: &LanguageConfig) -> Result<LanguagePair> {
        config.validate()?;
        let n_shared = (config.shared_token_fraction * config.literal_pool_size as f64).round() as usize;
        let n_excl = config.literal_pool_size - n_shared;

        let mut taken = HashSet::new();
        let mut pool_rng = rng_from(child_seed(config.seed, "lang/pools"));
        let shared = literal_pool(&mut pool_rng, n_shared, config, &mut taken)?;
        let excl0 = literal_pool(&mut pool_rng, n_excl, config, &mut taken)?;
        let excl1 = literal_pool(&mut pool_rng, n_excl, config, &mut taken)?;

        let mut templates = Vec::new();
        for lang in 0..2u8 {
            let mut pool: Vec<&String> = shared.iter().collect();
            pool.extend(if lang == 0 { excl0.iter() } else { excl1.iter() });
            let mut rng = rng_from(child_seed(config.seed, &format!("lang/templates/{lang}")));
            let mut used_prefixes: HashSet<Vec<Piece>> = HashSet::new();
            for fact_type in FactType::ALL {
                for _ in 0..config.n_templates_per_fact {
                    let mut placed = false;
                    for _ in 0..2000 {
                        let lits: Vec<&String> = (0..config.template_len)
                            .map(|_| pool[rng.gen_range(0..pool.len())])
                            .collect();
                        let subject_pos = rng.gen_range(0..=config.template_len);
                        let mut body: Vec<Piece> = Vec::with_capacity(config.template_len + 2);
                        for (i, lit) in lits.iter().enumerate() {
                            if i == subject_pos {
                                body.push(Piece::Subject);
                            }
                            body.push(Piece::Lit((*lit).clone()));
                        }
                        if subject_pos == config.template_len {
                            body.push(Piece::Subject);
                        }
                        body.push(Piece::Attr);
                        let prefix = body[..body.len() - 1].to_vec();
                        if used_prefixes.insert(prefix) {
                            templates.push(Template { lang, fact_type, body });
                            placed = true;
                            break;
                        }
                    }
                    if !placed {
                        return Err(Error::Infeasible(format!(
                            "cannot construct {} distinct templates per fact type with \
                             template_len {} and a pool of {}",
                            config.n_templates_per_fact, config.template_len, pool.len()
                        )));
                    }
                }
            }
        }

        let pair = LanguagePair {
            config: config.clone(),
            exclusive: [excl0, excl1],
            shared,
            templates,
        };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let e0: HashSet<&String> = self.exclusive[0].iter().collect();
        let e1: HashSet<&String> = self.exclusive[1].iter().collect();
        let sh: HashSet<&String> = self.shared.iter().collect();
        if !e0.is_disjoint(&e1) || !e0.is_disjoint(&sh) || !e1.is_disjoint(&sh) {
            return Err(Error::Integrity("literal pool partition overlaps".into()));
        }
        for lang in 0..2u8 {
            let mut prefixes = HashSet::new();
            for t in self.templates.iter().filter(|t| t.lang == lang) {
                if t.body.last() != Some(&Piece::Attr) {
                    return Err(Error::Integrity(
                        "attribute slot must terminate every template".into(),
                    ));
                }
                if t.prefix().iter().any(|p| *p == Piece::Attr) {
                    return Err(Error::Integrity(
                        "query prefix contains an attribute slot".into(),
                    ));
                }
                if t.prefix().iter().filter(|p| **p == Piece::Subject).count() != 1 {
                    return Err(Error::Integrity("template must contain one subject slot".into()));
                }
                if !prefixes.insert(t.prefix().to_vec()) {
                    return Err(Error::Integrity("duplicate query prefix within language".into()));
                }
            }
        }
        Ok(())
    }

    pub fn pool(&self, lang: u8) -> Vec<&String> {
        let mut p: Vec<&String> = self.shared.iter().collect();
        p.extend(self.exclusive[lang as usize].iter());
        p
    }

    pub fn templates_for(&self, lang: u8, fact_type: FactType) -> Vec<&Template> {
        self.templates
            .iter()
            .filter(|t| t.lang == lang && t.fact_type == fact_type)
            .collect()
    }

    /// All literal tokens of one language (for vocabulary overlap measures).
    pub fn literal_vocab(&self, lang: u8) -> HashSet<String> {
        let mut v: HashSet<String> = HashSet::new();
        for t in self.templates.iter().filter(|t| t.lang == lang) {
            for p in &t.body {
                if let Piece::Lit(s) = p {
                    v.insert(s.clone());
                }
            }
        }
        v
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut tsv = String::new();
        for t in &self.templates {
            let body: Vec<String> = t
                .body
                .iter()
                .map(|p| match p {
                    Piece::Lit(s) => s.clone(),
                    Piece::Subject => "{arg0}".to_string(),
                    Piece::Attr => {
                        if t.fact_type.is_year() {
                            "{arg1}".to_string()
                        } else {
                            "{arg2}".to_string()
                        }
                    }
                })
                .collect();
            tsv.push_str(&format!("{}\t{}\t{}\n", t.lang, t.fact_type, body.join(" ")));
        }
        crate::ioutil::write_string_atomic(&dir.join("templates.tsv"), &tsv)?;
        crate::ioutil::write_json_pretty(&dir.join("lang.manifest.json"), self)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<LanguagePair> {
        let pair: LanguagePair = crate::ioutil::read_json(&dir.join("lang.manifest.json"))?;
        pair.validate()?;
        // Cross-check against the TSV form.
        let tsv = std::fs::read_to_string(dir.join("templates.tsv"))?;
        let parsed = parse_templates_tsv(&tsv)?;
        if parsed != pair.templates {
            return Err(Error::Integrity(
                "templates.tsv does not match lang.manifest.json".into(),
            ));
        }
        Ok(pair)
    }
}

pub fn parse_templates_tsv(text: &str) -> Result<Vec<Template>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (lang, ft, body) = match (parts.next(), parts.next(), parts.next()) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => {
                return Err(Error::Input(format!(
                    "template line {} is not <lang>\\t<fact_type>\\t<body>",
                    i + 1
                )))
            }
        };
        let lang: u8 = lang
            .parse()
            .map_err(|_| Error::Input(format!("bad language id on line {}", i + 1)))?;
        if lang > 1 {
            return Err(Error::Input(format!("language id {lang} out of range on line {}", i + 1)));
        }
        let fact_type = FactType::from_str_name(ft)?;
        let expected_slot = if fact_type.is_year() { "{arg1}" } else { "{arg2}" };
        let mut pieces = Vec::new();
        for tok in body.split(' ') {
            match tok {
                "{arg0}" => pieces.push(Piece::Subject),
                "{arg1}" | "{arg2}" => {
                    if tok != expected_slot {
                        return Err(Error::Input(format!(
                            "slot {tok} does not match fact type {fact_type} on line {}",
                            i + 1
                        )));
                    }
                    pieces.push(Piece::Attr);
                }
                "" => {
                    return Err(Error::Input(format!("empty token on line {}", i + 1)));
                }
                lit => pieces.push(Piece::Lit(lit.to_string())),
            }
        }
        out.push(Template { lang, fact_type, body: pieces });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let cfg = LanguageConfig { seed: 5, ..Default::default() };
        let a = LanguagePair::generate(&cfg).unwrap();
        let b = LanguagePair::generate(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn pools_are_disjoint_at_zero_shared_fraction() {
        let pair = LanguagePair::generate(&LanguageConfig::default()).unwrap();
        assert!(pair.shared.is_empty());
        let v0 = pair.literal_vocab(0);
        let v1 = pair.literal_vocab(1);
        assert!(v0.is_disjoint(&v1));
    }

    #[test]
    fn shared_fraction_is_honored_exactly() {
        let cfg = LanguageConfig {
            shared_token_fraction: 0.25,
            literal_pool_size: 80,
            seed: 2,
            ..Default::default()
        };
        let pair = LanguagePair::generate(&cfg).unwrap();
        assert_eq!(pair.shared.len(), 20);
        assert_eq!(pair.exclusive[0].len(), 60);
        assert_eq!(pair.exclusive[1].len(), 60);
        let s: HashSet<_> = pair.shared.iter().collect();
        let v0 = pair.literal_vocab(0);
        let v1 = pair.literal_vocab(1);
        // Tokens seen in both languages' templates can only come from the shared pool.
        for t in v0.intersection(&v1) {
            assert!(s.contains(t));
        }
    }

    #[test]
    fn template_counts_and_slots_are_correct() {
        let cfg = LanguageConfig { n_templates_per_fact: 4, seed: 9, ..Default::default() };
        let pair = LanguagePair::generate(&cfg).unwrap();
        for lang in 0..2u8 {
            for ft in FactType::ALL {
                let ts = pair.templates_for(lang, ft);
                assert_eq!(ts.len(), 4);
                for t in ts {
                    assert_eq!(t.body.len(), cfg.template_len + 2);
                    assert_eq!(*t.body.last().unwrap(), Piece::Attr);
                }
            }
        }
    }

    #[test]
    fn subject_position_varies_and_is_not_always_final() {
        let cfg = LanguageConfig { n_templates_per_fact: 12, seed: 1, ..Default::default() };
        let pair = LanguagePair::generate(&cfg).unwrap();
        let positions: HashSet<usize> = pair
            .templates
            .iter()
            .map(|t| t.body.iter().position(|p| *p == Piece::Subject).unwrap())
            .collect();
        assert!(positions.len() >= 3, "subject slot should move around: {positions:?}");
        assert!(positions.iter().any(|&p| p < cfg.template_len / 2));
    }

    #[test]
    fn numeric_literals_avoid_year_like_ranges() {
        let cfg = LanguageConfig {
            numeric_literal_fraction: 0.5,
            literal_pool_size: 200,
            seed: 4,
            ..Default::default()
        };
        let pair = LanguagePair::generate(&cfg).unwrap();
        let mut saw_numeric = false;
        let mut saw_capitalized = false;
        for tok in pair.exclusive.iter().flatten() {
            if let Ok(n) = tok.parse::<u32>() {
                saw_numeric = true;
                assert!(!(1000..=2099).contains(&n), "year-like literal {n}");
            } else if tok.chars().next().unwrap().is_uppercase() {
                saw_capitalized = true;
            }
        }
        assert!(saw_numeric && saw_capitalized);
    }

    #[test]
    fn impossible_template_demand_is_an_infeasible_config() {
        let cfg = LanguageConfig {
            n_templates_per_fact: 5,
            template_len: 1,
            literal_pool_size: 2,
            numeric_literal_fraction: 0.0,
            ..Default::default()
        };
        // 2 tokens x 2 subject positions = 4 distinct prefixes < 5 requested.
        assert!(matches!(LanguagePair::generate(&cfg), Err(Error::Infeasible(_))));
    }

    #[test]
    fn tsv_round_trip_preserves_templates() {
        let dir = tempfile::tempdir().unwrap();
        let pair = LanguagePair::generate(&LanguageConfig { seed: 3, ..Default::default() }).unwrap();
        pair.save(dir.path()).unwrap();
        let back = LanguagePair::load(dir.path()).unwrap();
        assert_eq!(pair.templates, back.templates);

        let tsv = std::fs::read_to_string(dir.path().join("templates.tsv")).unwrap();
        let first = tsv.lines().next().unwrap();
        assert_eq!(first.matches('\t').count(), 2);
        assert!(first.contains("{arg0}"));
    }

    #[test]
    fn tsv_rejects_wrong_slot_for_fact_type() {
        let bad = "0\tbirth-year\thello {arg0} there {arg2}\n";
        assert!(matches!(parse_templates_tsv(bad), Err(Error::Input(_))));
    }
}
