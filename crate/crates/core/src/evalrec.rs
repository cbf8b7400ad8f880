//! Factual-recall evaluation.
//!
//! Scores a model on a split of verbalized statements: exact-match accuracy
//! on the predicted attribute, per-(fact type, language) breakdowns, label
//! probability, and a name-collision error taxonomy. Everything here is
//! deterministic: predictions are greedy, so evaluating the same checkpoint
//! on the same split twice yields identical reports.

use std::collections::HashMap;
use std::path::Path;

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::corpus::Statement;
use crate::ioutil::{write_json_pretty, write_string_atomic};
use crate::kg::{event_id, FactType, Kg};
use crate::nanoformer::{forward, Batch, Model};
use crate::num::Scalar;
use crate::tok::{Encoded, TokenizerMode, Vocabulary, BOS_ID, CHAR_SEPARATOR, PAD_ID};
use crate::{Error, Result};

/// Examples per forward pass during evaluation.
const EVAL_BATCH: usize = 64;

/// Safety cap on greedily decoded units per answer, on top of the
/// per-example attribute-length budget and the context window.
const MAX_DECODE_UNITS: usize = 32;

/// One scored example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub fact_id: u32,
    pub entity: u32,
    pub lang: u8,
    pub fact_type: FactType,
    pub true_attribute: String,
    pub predicted: String,
    pub correct: bool,
    pub label_probability: f64,
}

/// Accuracy within one (fact type, language) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub fact_type: FactType,
    pub lang: u8,
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
}

/// Full evaluation result for one (checkpoint, split) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub n: usize,
    pub n_correct: usize,
    pub accuracy: f64,
    pub mean_label_probability: f64,
    /// Ordered by fact type, then language.
    pub groups: Vec<GroupAccuracy>,
    pub records: Vec<ExampleRecord>,
}

impl EvalReport {
    pub fn group_accuracy(&self, fact_type: FactType, lang: u8) -> Option<f64> {
        self.groups
            .iter()
            .find(|g| g.fact_type == fact_type && g.lang == lang)
            .map(|g| g.accuracy)
    }

    /// The per-(fact type, language) grid as CSV text.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("fact_type,lang,n,n_correct,accuracy\n");
        for g in &self.groups {
            out.push_str(&format!(
                "{},{},{},{},{:.6}\n",
                g.fact_type, g.lang, g.n, g.n_correct, g.accuracy
            ));
        }
        out
    }

    /// Write `{stem}.json` (full report) and `{stem}_grid.csv` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_json_pretty(&dir.join(format!("{stem}.json")), self)?;
        write_string_atomic(&dir.join(format!("{stem}_grid.csv")), &self.grid_csv())
    }
}

/// Argmax over the vocabulary with PAD and BOS masked out; ties resolve to
/// the lowest id.
fn masked_argmax<F: Scalar>(logits: ArrayView1<F>) -> u32 {
    let mut best = u32::MAX;
    let mut best_val = f64::NEG_INFINITY;
    for (id, &v) in logits.iter().enumerate() {
        let id = id as u32;
        if id == PAD_ID || id == BOS_ID {
            continue;
        }
        let v = v.to_f64();
        if v > best_val {
            best_val = v;
            best = id;
        }
    }
    best
}

/// Probability of `target` under a softmax of `logits`, computed in f64.
fn softmax_prob<F: Scalar>(logits: ArrayView1<F>, target: u32) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v.to_f64()));
    let mut denom = 0.0;
    for &v in logits.iter() {
        denom += (v.to_f64() - max).exp();
    }
    (logits[target as usize].to_f64() - max).exp() / denom
}

fn encode_all(vocab: &Vocabulary, statements: &[&Statement]) -> Result<Vec<Encoded>> {
    statements.iter().map(|s| vocab.encode(s)).collect()
}

/// Teacher-forced label probabilities for a chunk: for every example the
/// product of per-position probabilities of its true answer ids.
fn chunk_label_probabilities<F: Scalar>(
    model: &Model<F>,
    encoded: &[Encoded],
) -> Result<Vec<f64>> {
    let refs: Vec<&Encoded> = encoded.iter().collect();
    let batch = Batch::new(&refs)?;
    let cache = forward(model, &batch)?;
    let mut out = Vec::with_capacity(encoded.len());
    for (b, enc) in encoded.iter().enumerate() {
        let mut p = 1.0;
        for t in enc.answer_start..enc.ids.len() {
            let row = cache.logits.row(cache.row(b, t - 1));
            p *= softmax_prob(row, enc.ids[t]);
        }
        out.push(p);
    }
    Ok(out)
}

/// Single-token predictions for a chunk: argmax at the last query position.
fn chunk_word_predictions<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    encoded: &[Encoded],
) -> Result<Vec<String>> {
    let refs: Vec<&Encoded> = encoded.iter().collect();
    let batch = Batch::new(&refs)?;
    let cache = forward(model, &batch)?;
    let mut out = Vec::with_capacity(encoded.len());
    for (b, enc) in encoded.iter().enumerate() {
        let row = cache.logits.row(cache.row(b, enc.answer_start - 1));
        out.push(vocab.token(masked_argmax(row))?.to_string());
    }
    Ok(out)
}

/// Greedy character decoding for a chunk. Each example starts from its query
/// prefix and extends one unit per round. Decoding stops at the word
/// separator or once the example's attribute-length budget is spent: answers
/// are statement-final in this corpus, so no "end of answer" token ever
/// appears in training and the budget is the true attribute's unit count.
fn chunk_char_predictions<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    encoded: &[Encoded],
) -> Result<Vec<String>> {
    let sep = vocab.id_of(CHAR_SEPARATOR);
    let max_len = model.config.max_seq_len;
    let budgets: Vec<usize> = encoded
        .iter()
        .map(|e| e.answer_len().min(MAX_DECODE_UNITS))
        .collect();
    let mut seqs: Vec<Vec<u32>> = encoded
        .iter()
        .map(|e| e.ids[..e.answer_start].to_vec())
        .collect();
    let mut emitted: Vec<Vec<u32>> = vec![Vec::new(); encoded.len()];
    let mut active: Vec<usize> = (0..encoded.len()).collect();
    while !active.is_empty() {
        active.retain(|&i| seqs[i].len() < max_len && emitted[i].len() < budgets[i]);
        if active.is_empty() {
            break;
        }
        let step_enc: Vec<Encoded> = active
            .iter()
            .map(|&i| Encoded {
                ids: seqs[i].clone(),
                answer_start: seqs[i].len() - 1,
                subject_start: 1,
            })
            .collect();
        let refs: Vec<&Encoded> = step_enc.iter().collect();
        let batch = Batch::new(&refs)?;
        let cache = forward(model, &batch)?;
        let mut still_active = Vec::new();
        for (b, &i) in active.iter().enumerate() {
            let row = cache.logits.row(cache.row(b, seqs[i].len() - 1));
            let id = masked_argmax(row);
            if Some(id) == sep {
                continue;
            }
            emitted[i].push(id);
            seqs[i].push(id);
            still_active.push(i);
        }
        active = still_active;
    }
    emitted.iter().map(|ids| vocab.decode(ids)).collect()
}

/// Predict the attribute for one statement's query prefix. In word mode this
/// is a full-vocabulary argmax at the answer position; in character mode a
/// greedy decode until the word separator or the attribute-length budget. A
/// wrong prediction is data, not an error, and PAD/BOS are never produced.
pub fn predict_attribute<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statement: &Statement,
) -> Result<String> {
    let mut preds = predict_attributes(model, vocab, &[statement])?;
    Ok(preds.pop().unwrap())
}

/// Batched form of [`predict_attribute`]; order matches the input.
pub fn predict_attributes<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statements: &[&Statement],
) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(statements.len());
    for chunk in statements.chunks(EVAL_BATCH) {
        let encoded = encode_all(vocab, chunk)?;
        let preds = match vocab.mode {
            TokenizerMode::Word => chunk_word_predictions(model, vocab, &encoded)?,
            TokenizerMode::Char => chunk_char_predictions(model, vocab, &encoded)?,
        };
        out.extend(preds);
    }
    Ok(out)
}

/// Probability the model assigns to the true attribute: the product of
/// per-position probabilities of the answer ids given the query (a single
/// factor in word mode).
pub fn label_probability<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statement: &Statement,
) -> Result<f64> {
    let encoded = encode_all(vocab, &[statement])?;
    let mut probs = chunk_label_probabilities(model, &encoded)?;
    Ok(probs.pop().unwrap())
}

/// Score a split: exact string match of the predicted attribute, grouped by
/// fact type and language, plus mean label probability.
pub fn evaluate<F: Scalar>(
    model: &Model<F>,
    vocab: &Vocabulary,
    statements: &[Statement],
    split_name: &str,
) -> Result<EvalReport> {
    if statements.is_empty() {
        return Err(Error::Input(format!(
            "cannot evaluate empty split {split_name:?}"
        )));
    }
    let mut records = Vec::with_capacity(statements.len());
    for chunk in statements.chunks(EVAL_BATCH) {
        let refs: Vec<&Statement> = chunk.iter().collect();
        let encoded = encode_all(vocab, &refs)?;
        let label_probs = chunk_label_probabilities(model, &encoded)?;
        let preds = match vocab.mode {
            TokenizerMode::Word => chunk_word_predictions(model, vocab, &encoded)?,
            TokenizerMode::Char => chunk_char_predictions(model, vocab, &encoded)?,
        };
        for ((s, pred), lp) in chunk.iter().zip(preds).zip(label_probs) {
            let correct = pred == s.attribute;
            records.push(ExampleRecord {
                fact_id: s.fact_id,
                entity: s.entity,
                lang: s.lang,
                fact_type: s.fact_type,
                true_attribute: s.attribute.clone(),
                predicted: pred,
                correct,
                label_probability: lp,
            });
        }
    }

    let mut cells: HashMap<(FactType, u8), (usize, usize)> = HashMap::new();
    let mut n_correct = 0;
    let mut prob_sum = 0.0;
    for r in &records {
        let cell = cells.entry((r.fact_type, r.lang)).or_insert((0, 0));
        cell.0 += 1;
        if r.correct {
            cell.1 += 1;
            n_correct += 1;
        }
        prob_sum += r.label_probability;
    }
    let mut groups = Vec::new();
    for ft in FactType::ALL {
        for lang in [0u8, 1u8] {
            if let Some(&(n, c)) = cells.get(&(ft, lang)) {
                groups.push(GroupAccuracy {
                    fact_type: ft,
                    lang,
                    n,
                    n_correct: c,
                    accuracy: c as f64 / n as f64,
                });
            }
        }
    }
    Ok(EvalReport {
        split: split_name.to_string(),
        n: records.len(),
        n_correct,
        accuracy: n_correct as f64 / records.len() as f64,
        mean_label_probability: prob_sum / records.len() as f64,
        groups,
        records,
    })
}

fn true_attribute(kg: &Kg, entity: u32, fact_type: FactType) -> String {
    let ev = &kg.events[event_id(entity, fact_type.event_kind()) as usize];
    if fact_type.is_year() {
        ev.year.to_string()
    } else {
        ev.city.clone()
    }
}

/// Among the report's incorrect predictions, the fraction whose predicted
/// attribute is the true attribute (for the same fact type) of some other
/// entity sharing a first or last name with the queried entity. A report
/// with no errors yields 0.
pub fn shared_name_error_fraction(report: &EvalReport, kg: &Kg) -> Result<f64> {
    let mut by_first: HashMap<&str, Vec<u32>> = HashMap::new();
    let mut by_last: HashMap<&str, Vec<u32>> = HashMap::new();
    for e in &kg.entities {
        by_first.entry(&e.first).or_default().push(e.id);
        by_last.entry(&e.last).or_default().push(e.id);
    }
    let mut errors = 0usize;
    let mut shared = 0usize;
    for r in report.records.iter().filter(|r| !r.correct) {
        errors += 1;
        if r.entity as usize >= kg.entities.len() {
            return Err(Error::Input(format!(
                "record references entity {} outside the knowledge graph",
                r.entity
            )));
        }
        let me = kg.entity(r.entity);
        let mut namesakes: Vec<u32> = Vec::new();
        namesakes.extend(by_first[me.first.as_str()].iter().copied());
        namesakes.extend(by_last[me.last.as_str()].iter().copied());
        namesakes.sort_unstable();
        namesakes.dedup();
        let hit = namesakes
            .iter()
            .filter(|&&id| id != r.entity)
            .any(|&id| true_attribute(kg, id, r.fact_type) == r.predicted);
        if hit {
            shared += 1;
        }
    }
    if errors == 0 {
        return Ok(0.0);
    }
    Ok(shared as f64 / errors as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{Entity, Event, EventKind, KgConfig};
    use crate::nanoformer::{train, LossPositions, ModelConfig, TrainConfig};

    fn stmt(
        text: &str,
        lang: u8,
        fact_id: u32,
        fact_type: FactType,
        entity: u32,
    ) -> Statement {
        let tokens: Vec<String> = text.split(' ').map(str::to_string).collect();
        let answer_start = tokens.len() - 1;
        Statement {
            attribute: tokens[answer_start].clone(),
            tokens,
            answer_start,
            lang,
            fact_id,
            fact_type,
            entity,
            is_celebrity: false,
            template_idx: 0,
            subject_start: 1,
        }
    }

    fn micro_config(vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            n_layers: 1,
            n_heads: 2,
            d_model: 32,
            d_ff: 64,
            max_seq_len: 32,
            ..ModelConfig::default()
        }
    }

    fn flat_model(vocab_size: usize) -> Model<f64> {
        // Zero init makes every logit exactly zero: uniform probabilities and
        // a constant argmax at the first maskable id.
        let cfg = ModelConfig {
            init_std: 0.0,
            ..micro_config(vocab_size)
        };
        Model::init(&cfg).unwrap()
    }

    fn overfit(statements: &[Statement], mode: TokenizerMode, steps: usize) -> (Model<f32>, Vocabulary) {
        let vocab = Vocabulary::build(&[statements], mode);
        let encoded: Vec<Encoded> = statements.iter().map(|s| vocab.encode(s).unwrap()).collect();
        let model = Model::<f32>::init(&ModelConfig {
            init_seed: 9,
            ..micro_config(vocab.len())
        })
        .unwrap();
        let cfg = TrainConfig {
            steps,
            batch_size: statements.len(),
            lr: 3e-3,
            warmup_steps: 20,
            grad_clip: Some(1.0),
            loss_positions: LossPositions::All,
            checkpoint_schedule: vec![steps],
            ..TrainConfig::default()
        };
        let trainer = train(model, encoded, cfg, |_, _| Ok(())).unwrap();
        (trainer.model, vocab)
    }

    #[test]
    fn untrained_model_predicts_a_real_token() {
        let s = stmt("the birth of ada lovelace was in 1902", 0, 0, FactType::BirthYear, 0);
        let statements = vec![s];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = Model::<f32>::init(&micro_config(vocab.len())).unwrap();
        let pred = predict_attribute(&model, &vocab, &statements[0]).unwrap();
        assert!(vocab.id_of(&pred).is_some());
        assert_ne!(pred, crate::tok::PAD_TOKEN);
        assert_ne!(pred, crate::tok::BOS_TOKEN);
    }

    #[test]
    fn uniform_logits_give_uniform_label_probability() {
        let s = stmt("a b c d 1902", 0, 0, FactType::BirthYear, 0);
        let statements = vec![s];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = flat_model(vocab.len());
        let p = label_probability(&model, &vocab, &statements[0]).unwrap();
        let expect = 1.0 / vocab.len() as f64;
        assert!((p - expect).abs() < 1e-12, "{p} vs {expect}");
    }

    #[test]
    fn char_label_probability_matches_per_position_recomputation() {
        let statements = vec![
            stmt("ab cd 1902", 0, 0, FactType::BirthYear, 0),
            stmt("ab cd omsk", 0, 1, FactType::BirthCity, 0),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Char);
        let model = Model::<f64>::init(&ModelConfig {
            init_seed: 4,
            ..micro_config(vocab.len())
        })
        .unwrap();
        for s in &statements {
            let p = label_probability(&model, &vocab, s).unwrap();
            // Oracle: one forward pass per answer position, product of probs.
            let enc = vocab.encode(s).unwrap();
            let mut manual = 1.0;
            for t in enc.answer_start..enc.ids.len() {
                let prefix = Encoded {
                    ids: enc.ids[..t].to_vec(),
                    answer_start: t - 1,
                    subject_start: 1,
                };
                let batch = Batch::new(&[&prefix]).unwrap();
                let cache = forward(&model, &batch).unwrap();
                let row = cache.logits.row(cache.row(0, t - 1));
                manual *= softmax_prob(row, enc.ids[t]);
            }
            assert!((p - manual).abs() / manual < 1e-12, "{p} vs {manual}");
        }
    }

    #[test]
    fn overfit_word_model_retrieves_its_facts() {
        let statements = vec![
            stmt("the birth year of alice brown is 1902", 0, 0, FactType::BirthYear, 0),
            stmt("the birth year of carol stone is 1911", 0, 1, FactType::BirthYear, 1),
            stmt("the death city of alice brown is omsk", 0, 2, FactType::DeathCity, 0),
        ];
        let (model, vocab) = overfit(&statements, TokenizerMode::Word, 400);
        for s in &statements {
            assert_eq!(predict_attribute(&model, &vocab, s).unwrap(), s.attribute);
        }
        let report = evaluate(&model, &vocab, &statements, "train").unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert!(report.mean_label_probability > 0.5);
    }

    #[test]
    fn overfit_char_model_decodes_the_year_digit_by_digit() {
        let statements = vec![
            stmt("birth of ab is 1902", 0, 0, FactType::BirthYear, 0),
            stmt("birth of cd is 1917", 0, 1, FactType::BirthYear, 1),
        ];
        let (model, vocab) = overfit(&statements, TokenizerMode::Char, 600);
        for s in &statements {
            let pred = predict_attribute(&model, &vocab, s).unwrap();
            assert_eq!(pred, s.attribute, "greedy decode should emit exactly the 4 digits");
        }
    }

    #[test]
    fn constant_predictor_accuracy_equals_attribute_frequency() {
        // With all logits zero the argmax is the lowest non-special id, which
        // is the first unit of the first statement: "omsk".
        let statements = vec![
            stmt("omsk hosted the birth of x omsk", 0, 0, FactType::BirthCity, 0),
            stmt("omsk hosted the birth of y kyiv", 0, 1, FactType::BirthCity, 1),
            stmt("omsk hosted the birth of z lima", 1, 2, FactType::BirthCity, 2),
            stmt("omsk hosted the birth of w omsk", 1, 3, FactType::BirthCity, 3),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = flat_model(vocab.len());
        let report = evaluate(&model, &vocab, &statements, "test").unwrap();
        for r in &report.records {
            assert_eq!(r.predicted, "omsk");
        }
        assert!((report.accuracy - 0.5).abs() < 1e-12);
        assert_eq!(report.group_accuracy(FactType::BirthCity, 0).unwrap(), 0.5);
        assert_eq!(report.group_accuracy(FactType::BirthCity, 1).unwrap(), 0.5);
    }

    #[test]
    fn group_counts_aggregate_exactly() {
        let statements = vec![
            stmt("a b 1902", 0, 0, FactType::BirthYear, 0),
            stmt("a b 1903", 0, 1, FactType::BirthYear, 1),
            stmt("c d omsk", 1, 2, FactType::DeathCity, 0),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = Model::<f32>::init(&micro_config(vocab.len())).unwrap();
        let report = evaluate(&model, &vocab, &statements, "test").unwrap();
        assert_eq!(report.groups.iter().map(|g| g.n).sum::<usize>(), report.n);
        assert_eq!(
            report.groups.iter().map(|g| g.n_correct).sum::<usize>(),
            report.n_correct
        );
        let flag_mean = report.records.iter().filter(|r| r.correct).count() as f64
            / report.n as f64;
        assert_eq!(report.accuracy, flag_mean);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let statements = vec![
            stmt("a b c 1902", 0, 0, FactType::BirthYear, 0),
            stmt("d e f omsk", 1, 1, FactType::BirthCity, 1),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Char);
        let model = Model::<f32>::init(&micro_config(vocab.len())).unwrap();
        let a = evaluate(&model, &vocab, &statements, "x").unwrap();
        let b = evaluate(&model, &vocab, &statements, "x").unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn empty_split_is_rejected() {
        let statements: Vec<Statement> = vec![stmt("a 1902", 0, 0, FactType::BirthYear, 0)];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = Model::<f32>::init(&micro_config(vocab.len())).unwrap();
        assert!(matches!(
            evaluate(&model, &vocab, &[], "empty"),
            Err(Error::Input(_))
        ));
    }

    fn tiny_kg() -> Kg {
        // Three entities: 0 and 1 share a first name, 2 shares nothing.
        let mk = |id, first: &str, last: &str| Entity {
            id,
            first: first.into(),
            last: last.into(),
        };
        let entities = vec![
            mk(0, "alice", "brown"),
            mk(1, "alice", "stone"),
            mk(2, "carol", "young"),
        ];
        let mut events = Vec::new();
        for (id, by, bc, dy, dc) in [
            (0u32, 1902, "omsk", 1955, "lima"),
            (1, 1907, "kyiv", 1960, "oslo"),
            (2, 1911, "pune", 1964, "baku"),
        ] {
            events.push(Event {
                id: event_id(id, EventKind::Birth),
                entity: id,
                kind: EventKind::Birth,
                year: by,
                city: bc.into(),
            });
            events.push(Event {
                id: event_id(id, EventKind::Death),
                entity: id,
                kind: EventKind::Death,
                year: dy,
                city: dc.into(),
            });
        }
        Kg {
            config: KgConfig::default(),
            first_names: vec!["alice".into(), "carol".into()],
            last_names: vec!["brown".into(), "stone".into(), "young".into()],
            cities: vec!["omsk".into(), "lima".into(), "kyiv".into(), "oslo".into(), "pune".into(), "baku".into()],
            entities,
            events,
        }
    }

    fn record(entity: u32, fact_type: FactType, truth: &str, predicted: &str) -> ExampleRecord {
        ExampleRecord {
            fact_id: 0,
            entity,
            lang: 1,
            fact_type,
            true_attribute: truth.into(),
            predicted: predicted.into(),
            correct: predicted == truth,
            label_probability: 0.0,
        }
    }

    fn report_of(records: Vec<ExampleRecord>) -> EvalReport {
        let n = records.len();
        EvalReport {
            split: "ood_test".into(),
            n,
            n_correct: records.iter().filter(|r| r.correct).count(),
            accuracy: 0.0,
            mean_label_probability: 0.0,
            groups: Vec::new(),
            records,
        }
    }

    #[test]
    fn shared_name_fraction_counts_namesake_attributes_exactly() {
        let kg = tiny_kg();
        // Exhaustive over the error assignments for entity 0's birth year:
        // 1907 belongs to namesake alice stone (counts), 1911 belongs to the
        // unrelated carol young (does not), 1999 belongs to nobody.
        let report = report_of(vec![
            record(0, FactType::BirthYear, "1902", "1902"),
            record(0, FactType::BirthYear, "1902", "1907"),
            record(0, FactType::BirthYear, "1902", "1911"),
            record(0, FactType::BirthYear, "1902", "1999"),
        ]);
        let f = shared_name_error_fraction(&report, &kg).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-12);

        // Same-fact-type matching: alice stone's birth CITY predicted for a
        // birth-year query is not a shared-name hit.
        let report = report_of(vec![record(0, FactType::BirthYear, "1902", "kyiv")]);
        assert_eq!(shared_name_error_fraction(&report, &kg).unwrap(), 0.0);

        // Last-name collisions count too: nobody shares names with carol
        // young, so anything predicted for her is a plain error.
        let report = report_of(vec![record(2, FactType::BirthYear, "1911", "1907")]);
        assert_eq!(shared_name_error_fraction(&report, &kg).unwrap(), 0.0);
    }

    #[test]
    fn shared_name_fraction_is_zero_without_collisions_or_errors() {
        let mut kg = tiny_kg();
        kg.entities[1].first = "beth".into();
        let report = report_of(vec![
            record(0, FactType::BirthYear, "1902", "1907"),
            record(1, FactType::DeathCity, "oslo", "lima"),
        ]);
        assert_eq!(shared_name_error_fraction(&report, &kg).unwrap(), 0.0);

        let kg = tiny_kg();
        let all_correct = report_of(vec![record(0, FactType::BirthYear, "1902", "1902")]);
        assert_eq!(shared_name_error_fraction(&all_correct, &kg).unwrap(), 0.0);
    }

    #[test]
    fn report_save_writes_json_and_grid_csv() {
        let statements = vec![
            stmt("a b 1902", 0, 0, FactType::BirthYear, 0),
            stmt("c d omsk", 1, 1, FactType::DeathCity, 1),
        ];
        let vocab = Vocabulary::build(&[&statements], TokenizerMode::Word);
        let model = flat_model(vocab.len());
        let report = evaluate(&model, &vocab, &statements, "id_test").unwrap();
        let dir = tempfile::tempdir().unwrap();
        report.save(dir.path(), "eval_id_test").unwrap();
        let loaded: EvalReport =
            crate::ioutil::read_json(&dir.path().join("eval_id_test.json")).unwrap();
        assert_eq!(loaded, report);
        let csv = std::fs::read_to_string(dir.path().join("eval_id_test_grid.csv")).unwrap();
        assert!(csv.starts_with("fact_type,lang,n,n_correct,accuracy\n"));
        assert_eq!(csv.lines().count(), 1 + report.groups.len());
    }
}
