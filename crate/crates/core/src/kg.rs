//! Synthetic knowledge graph of people and their birth/death events.
//!
//! Every entity gets exactly one birth and one death event. Attribute values
//! (years, cities) are sampled uniformly from configured pools; death year is
//! birth year plus a sampled lifespan, and the config is validated so the
//! derived death-year set cannot overlap the birth-year set. Name pools are
//! small on purpose: entities sharing a first or last name are a phenomenon
//! the downstream error analysis depends on. Entities sharing a *full* name
//! are forced to diverge on every fact value, which is what guarantees the
//! corpus builder can hold out one verbalization per fact without ever
//! duplicating a statement between train and test.

use crate::error::{Error, Result};
use crate::ioutil;
use crate::rng::{child_seed, rng_from};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

pub const KG_MAGIC: &str = "XLPKG1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Birth,
    Death,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactType {
    BirthYear,
    BirthCity,
    DeathYear,
    DeathCity,
}

impl FactType {
    pub const ALL: [FactType; 4] = [
        FactType::BirthYear,
        FactType::BirthCity,
        FactType::DeathYear,
        FactType::DeathCity,
    ];

    pub fn event_kind(self) -> EventKind {
        match self {
            FactType::BirthYear | FactType::BirthCity => EventKind::Birth,
            FactType::DeathYear | FactType::DeathCity => EventKind::Death,
        }
    }

    /// Whether the attribute slot holds a year or a city.
    pub fn is_year(self) -> bool {
        matches!(self, FactType::BirthYear | FactType::DeathYear)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FactType::BirthYear => "birth-year",
            FactType::BirthCity => "birth-city",
            FactType::DeathYear => "death-year",
            FactType::DeathCity => "death-city",
        }
    }

    pub fn from_str_name(s: &str) -> Result<Self> {
        match s {
            "birth-year" => Ok(FactType::BirthYear),
            "birth-city" => Ok(FactType::BirthCity),
            "death-year" => Ok(FactType::DeathYear),
            "death-city" => Ok(FactType::DeathCity),
            other => Err(Error::Input(format!("unknown fact type {other:?}"))),
        }
    }
}

impl fmt::Display for FactType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: u32,
    pub first: String,
    pub last: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: u32,
    pub entity: u32,
    pub kind: EventKind,
    pub year: u16,
    pub city: String,
}

/// One (event, attribute-slot) pair: the unit that gets verbalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub id: u32,
    pub event: u32,
    pub entity: u32,
    pub fact_type: FactType,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KgConfig {
    pub population: usize,
    pub n_first_names: usize,
    pub n_last_names: usize,
    pub n_cities: usize,
    pub birth_year_min: u16,
    pub birth_year_max: u16,
    pub lifespan_min: u16,
    pub lifespan_max: u16,
    pub seed: u64,
}

impl Default for KgConfig {
    fn default() -> Self {
        KgConfig {
            population: 500,
            n_first_names: 60,
            n_last_names: 60,
            n_cities: 100,
            birth_year_min: 1900,
            birth_year_max: 1919,
            lifespan_min: 51,
            lifespan_max: 61,
            seed: 0,
        }
    }
}

impl KgConfig {
    pub fn birth_years(&self) -> Vec<u16> {
        (self.birth_year_min..=self.birth_year_max).collect()
    }

    pub fn lifespans(&self) -> Vec<u16> {
        (self.lifespan_min..=self.lifespan_max).collect()
    }

    pub fn death_years(&self) -> Vec<u16> {
        let lo = self.birth_year_min + self.lifespan_min;
        let hi = self.birth_year_max + self.lifespan_max;
        (lo..=hi).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::Config("population must be positive".into()));
        }
        if self.n_first_names == 0 || self.n_last_names == 0 {
            return Err(Error::Config("name pools must be non-empty".into()));
        }
        if self.n_cities < 2 {
            return Err(Error::Config("need at least 2 cities".into()));
        }
        if self.birth_year_max < self.birth_year_min {
            return Err(Error::Config("birth year range is inverted".into()));
        }
        if self.lifespan_max < self.lifespan_min || self.lifespan_min == 0 {
            return Err(Error::Config("lifespan range is empty or non-positive".into()));
        }
        // Death years live in [birth_min+lifespan_min, birth_max+lifespan_max];
        // they must not collide with birth years, otherwise a single year token
        // would be ambiguous between the two fact types.
        if self.birth_year_min + self.lifespan_min <= self.birth_year_max {
            return Err(Error::Config(format!(
                "death years overlap birth years: {} + {} <= {}",
                self.birth_year_min, self.lifespan_min, self.birth_year_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kg {
    pub config: KgConfig,
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
    pub cities: Vec<String>,
    pub entities: Vec<Entity>,
    pub events: Vec<Event>,
}

#[derive(Debug, Serialize, Deserialize)]
struct KgManifest {
    magic: String,
    version: u32,
    config: KgConfig,
    first_names: Vec<String>,
    last_names: Vec<String>,
    cities: Vec<String>,
    entities: Vec<Entity>,
    n_events: usize,
}

pub fn event_id(entity: u32, kind: EventKind) -> u32 {
    entity * 2
        + match kind {
            EventKind::Birth => 0,
            EventKind::Death => 1,
        }
}

pub fn fact_id(event: u32, year_slot: bool) -> u32 {
    event * 2 + if year_slot { 0 } else { 1 }
}

impl Kg {
    pub fn generate(config: &KgConfig) -> Result<Kg> {
        config.validate()?;
        let first_names = name_pool(
            child_seed(config.seed, "kg/first-names"),
            config.n_first_names,
            NameStyle::First,
        )?;
        let last_names = name_pool(
            child_seed(config.seed, "kg/last-names"),
            config.n_last_names,
            NameStyle::Last,
        )?;
        let cities = name_pool(
            child_seed(config.seed, "kg/cities"),
            config.n_cities,
            NameStyle::City,
        )?;

        let mut rng = rng_from(child_seed(config.seed, "kg/entities"));
        let mut entities = Vec::with_capacity(config.population);
        for id in 0..config.population as u32 {
            entities.push(Entity {
                id,
                first: first_names.choose(&mut rng).unwrap().clone(),
                last: last_names.choose(&mut rng).unwrap().clone(),
            });
        }

        let birth_years = config.birth_years();
        let lifespans = config.lifespans();
        let mut ev_rng = rng_from(child_seed(config.seed, "kg/events"));
        let mut events = Vec::with_capacity(config.population * 2);
        for e in &entities {
            let by = *birth_years.choose(&mut ev_rng).unwrap();
            let life = *lifespans.choose(&mut ev_rng).unwrap();
            let bc = cities.choose(&mut ev_rng).unwrap().clone();
            let dc = cities.choose(&mut ev_rng).unwrap().clone();
            events.push(Event {
                id: event_id(e.id, EventKind::Birth),
                entity: e.id,
                kind: EventKind::Birth,
                year: by,
                city: bc,
            });
            events.push(Event {
                id: event_id(e.id, EventKind::Death),
                entity: e.id,
                kind: EventKind::Death,
                year: by + life,
                city: dc,
            });
        }

        let mut kg = Kg {
            config: config.clone(),
            first_names,
            last_names,
            cities,
            entities,
            events,
        };
        kg.diverge_full_name_twins()?;
        kg.validate()?;
        Ok(kg)
    }

    /// Entities with an identical full name must not share any fact value for
    /// the same fact type. Later twins are resampled until all four of their
    /// values differ from every earlier twin's.
    fn diverge_full_name_twins(&mut self) -> Result<()> {
        let mut rng = rng_from(child_seed(self.config.seed, "kg/twin-divergence"));
        let birth_years = self.config.birth_years();
        let lifespans = self.config.lifespans();
        let mut by_name: HashMap<(String, String), Vec<u32>> = HashMap::new();
        for e in &self.entities {
            by_name
                .entry((e.first.clone(), e.last.clone()))
                .or_default()
                .push(e.id);
        }
        let mut groups: Vec<_> = by_name.into_values().filter(|v| v.len() > 1).collect();
        groups.sort();
        for group in groups {
            for (pos, &id) in group.iter().enumerate().skip(1) {
                let taken: Vec<[String; 4]> = group[..pos]
                    .iter()
                    .map(|&prev| self.fact_values(prev))
                    .collect();
                let mut ok = false;
                for _ in 0..1000 {
                    let by = *birth_years.choose(&mut rng).unwrap();
                    let life = *lifespans.choose(&mut rng).unwrap();
                    let bc = self.cities.choose(&mut rng).unwrap().clone();
                    let dc = self.cities.choose(&mut rng).unwrap().clone();
                    let candidate = [
                        by.to_string(),
                        bc.clone(),
                        (by + life).to_string(),
                        dc.clone(),
                    ];
                    let clash = taken
                        .iter()
                        .any(|t| (0..4).any(|i| t[i] == candidate[i]));
                    if !clash {
                        let b = event_id(id, EventKind::Birth) as usize;
                        let d = event_id(id, EventKind::Death) as usize;
                        self.events[b].year = by;
                        self.events[b].city = bc;
                        self.events[d].year = by + life;
                        self.events[d].city = dc;
                        ok = true;
                        break;
                    }
                }
                if !ok {
                    return Err(Error::Infeasible(format!(
                        "cannot diverge fact values for {} same-name entities; attribute pools too small",
                        group.len()
                    )));
                }
            }
        }
        Ok(())
    }

    fn fact_values(&self, entity: u32) -> [String; 4] {
        let b = &self.events[event_id(entity, EventKind::Birth) as usize];
        let d = &self.events[event_id(entity, EventKind::Death) as usize];
        [
            b.year.to_string(),
            b.city.clone(),
            d.year.to_string(),
            d.city.clone(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.entities.len() != self.config.population {
            return Err(Error::Integrity("entity count differs from config".into()));
        }
        if self.events.len() != 2 * self.entities.len() {
            return Err(Error::Integrity(
                "expected exactly one birth and one death per entity".into(),
            ));
        }
        let mut seen = HashSet::new();
        for (i, e) in self.entities.iter().enumerate() {
            if e.id as usize != i || !seen.insert(e.id) {
                return Err(Error::Integrity("entity ids must be dense and unique".into()));
            }
        }
        let city_set: HashSet<&str> = self.cities.iter().map(|s| s.as_str()).collect();
        let birth_years: HashSet<u16> = self.config.birth_years().into_iter().collect();
        let death_years: HashSet<u16> = self.config.death_years().into_iter().collect();
        for ent in &self.entities {
            let b = &self.events[event_id(ent.id, EventKind::Birth) as usize];
            let d = &self.events[event_id(ent.id, EventKind::Death) as usize];
            if b.kind != EventKind::Birth || d.kind != EventKind::Death {
                return Err(Error::Integrity("event kind does not match its id slot".into()));
            }
            if b.entity != ent.id || d.entity != ent.id {
                return Err(Error::Integrity("event entity link is broken".into()));
            }
            if !birth_years.contains(&b.year) {
                return Err(Error::Integrity(format!("birth year {} outside pool", b.year)));
            }
            if !death_years.contains(&d.year) {
                return Err(Error::Integrity(format!("death year {} outside pool", d.year)));
            }
            let life = d.year as i32 - b.year as i32;
            if life < self.config.lifespan_min as i32 || life > self.config.lifespan_max as i32 {
                return Err(Error::Integrity(format!("lifespan {life} outside support")));
            }
            if !city_set.contains(b.city.as_str()) || !city_set.contains(d.city.as_str()) {
                return Err(Error::Integrity("event city outside pool".into()));
            }
        }
        // Birth and death years must stay disjoint as token strings.
        if birth_years.intersection(&death_years).next().is_some() {
            return Err(Error::Integrity("birth/death year pools overlap".into()));
        }
        // Full-name twins diverge on every fact type.
        let mut by_name: HashMap<(&str, &str), Vec<u32>> = HashMap::new();
        for e in &self.entities {
            by_name
                .entry((e.first.as_str(), e.last.as_str()))
                .or_default()
                .push(e.id);
        }
        for group in by_name.values() {
            for (i, &a) in group.iter().enumerate() {
                for &b in &group[i + 1..] {
                    let va = self.fact_values(a);
                    let vb = self.fact_values(b);
                    if (0..4).any(|k| va[k] == vb[k]) {
                        return Err(Error::Integrity(format!(
                            "full-name twins {a} and {b} share a fact value"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn facts(&self) -> Vec<Fact> {
        let mut out = Vec::with_capacity(self.events.len() * 2);
        for ev in &self.events {
            let (year_ft, city_ft) = match ev.kind {
                EventKind::Birth => (FactType::BirthYear, FactType::BirthCity),
                EventKind::Death => (FactType::DeathYear, FactType::DeathCity),
            };
            out.push(Fact {
                id: fact_id(ev.id, true),
                event: ev.id,
                entity: ev.entity,
                fact_type: year_ft,
                attribute: ev.year.to_string(),
            });
            out.push(Fact {
                id: fact_id(ev.id, false),
                event: ev.id,
                entity: ev.entity,
                fact_type: city_ft,
                attribute: ev.city.clone(),
            });
        }
        out
    }

    pub fn entity(&self, id: u32) -> &Entity {
        &self.entities[id as usize]
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let manifest = KgManifest {
            magic: KG_MAGIC.to_string(),
            version: 1,
            config: self.config.clone(),
            first_names: self.first_names.clone(),
            last_names: self.last_names.clone(),
            cities: self.cities.clone(),
            entities: self.entities.clone(),
            n_events: self.events.len(),
        };
        ioutil::write_json_pretty(&dir.join("kg.manifest.json"), &manifest)?;
        ioutil::write_jsonl(&dir.join("kg.jsonl"), Some(KG_MAGIC), &self.events)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Kg> {
        let manifest: KgManifest = ioutil::read_json(&dir.join("kg.manifest.json"))?;
        if manifest.magic != KG_MAGIC {
            return Err(Error::Integrity(format!(
                "bad knowledge graph magic {:?}",
                manifest.magic
            )));
        }
        if manifest.version != 1 {
            return Err(Error::Integrity(format!(
                "unsupported knowledge graph version {}",
                manifest.version
            )));
        }
        let events: Vec<Event> = ioutil::read_jsonl(&dir.join("kg.jsonl"), Some(KG_MAGIC))?;
        if events.len() != manifest.n_events {
            return Err(Error::Integrity(format!(
                "event count {} does not match manifest {}",
                events.len(),
                manifest.n_events
            )));
        }
        let kg = Kg {
            config: manifest.config,
            first_names: manifest.first_names,
            last_names: manifest.last_names,
            cities: manifest.cities,
            entities: manifest.entities,
            events,
        };
        kg.validate()
            .map_err(|e| Error::Integrity(format!("loaded knowledge graph is invalid: {e}")))?;
        Ok(kg)
    }
}

/// Pools get structurally distinct shapes (syllable inventories and suffixes)
/// so first names, last names, cities and template literals can never collide
/// as strings; the corpus builder still asserts this.
#[derive(Clone, Copy)]
pub enum NameStyle {
    First,
    Last,
    City,
}

const FIRST_SYLLABLES: [&str; 14] = [
    "ka", "mi", "ro", "ta", "li", "ne", "sa", "do", "ve", "lu", "pe", "ni", "ra", "jo",
];
const LAST_SUFFIXES: [&str; 6] = ["sen", "son", "ova", "ander", "etti", "quist"];
const CITY_SUFFIXES: [&str; 6] = ["burg", "ville", "stad", "port", "grad", "field"];

pub fn name_pool(seed: u64, n: usize, style: NameStyle) -> Result<Vec<String>> {
    let mut rng = rng_from(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while out.len() < n {
        attempts += 1;
        if attempts > n * 200 + 1000 {
            return Err(Error::Infeasible(format!(
                "cannot produce {n} distinct names for this style"
            )));
        }
        let n_syll = rng.gen_range(2..=3);
        let mut s = String::new();
        for _ in 0..n_syll {
            s.push_str(FIRST_SYLLABLES[rng.gen_range(0..FIRST_SYLLABLES.len())]);
        }
        match style {
            NameStyle::First => {}
            NameStyle::Last => s.push_str(LAST_SUFFIXES[rng.gen_range(0..LAST_SUFFIXES.len())]),
            NameStyle::City => s.push_str(CITY_SUFFIXES[rng.gen_range(0..CITY_SUFFIXES.len())]),
        }
        let mut c = s.chars();
        let cap: String = c.next().unwrap().to_uppercase().chain(c).collect();
        if seen.insert(cap.to_lowercase()) {
            out.push(cap);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::chi_square_uniform;

    fn small_config() -> KgConfig {
        KgConfig {
            population: 40,
            n_first_names: 12,
            n_last_names: 12,
            n_cities: 10,
            seed: 7,
            ..KgConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic_for_a_seed() {
        let a = Kg::generate(&small_config()).unwrap();
        let b = Kg::generate(&small_config()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = Kg::generate(&KgConfig { seed: 8, ..small_config() }).unwrap();
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn lifespans_and_year_pools_are_respected() {
        let kg = Kg::generate(&small_config()).unwrap();
        let cfg = &kg.config;
        for ent in &kg.entities {
            let b = &kg.events[event_id(ent.id, EventKind::Birth) as usize];
            let d = &kg.events[event_id(ent.id, EventKind::Death) as usize];
            let life = d.year - b.year;
            assert!(life >= cfg.lifespan_min && life <= cfg.lifespan_max);
            assert!(b.year >= cfg.birth_year_min && b.year <= cfg.birth_year_max);
        }
        let births: HashSet<u16> = cfg.birth_years().into_iter().collect();
        let deaths: HashSet<u16> = cfg.death_years().into_iter().collect();
        assert!(births.is_disjoint(&deaths));
        // Default pools give 20 birth years and 30 distinct death years.
        assert_eq!(KgConfig::default().birth_years().len(), 20);
        assert_eq!(KgConfig::default().death_years().len(), 30);
    }

    #[test]
    fn overlapping_year_pools_are_rejected() {
        let bad = KgConfig {
            birth_year_min: 1900,
            birth_year_max: 1980,
            lifespan_min: 40,
            lifespan_max: 60,
            ..KgConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn attribute_sampling_is_roughly_uniform() {
        // Name pools are sized so full-name collisions stay rare at this
        // population; huge twin groups would be impossible to diverge inside
        // 20-value attribute pools.
        let cfg = KgConfig {
            population: 20000,
            n_first_names: 400,
            n_last_names: 400,
            n_cities: 20,
            seed: 3,
            ..KgConfig::default()
        };
        let kg = Kg::generate(&cfg).unwrap();
        let mut year_counts = HashMap::new();
        let mut city_counts = HashMap::new();
        for ev in kg.events.iter().filter(|e| e.kind == EventKind::Birth) {
            *year_counts.entry(ev.year).or_insert(0u64) += 1;
            *city_counts.entry(ev.city.clone()).or_insert(0u64) += 1;
        }
        // chi-square critical values at alpha = 0.001
        let years: Vec<u64> = cfg.birth_years().iter().map(|y| year_counts[y]).collect();
        assert!(chi_square_uniform(&years).unwrap() < 43.82, "df=19 upper tail");
        let cities: Vec<u64> = kg.cities.iter().map(|c| *city_counts.get(c).unwrap_or(&0)).collect();
        assert!(chi_square_uniform(&cities).unwrap() < 43.82, "df=19 upper tail");
    }

    #[test]
    fn shared_names_occur_but_full_twins_diverge() {
        let cfg = KgConfig {
            population: 200,
            n_first_names: 8,
            n_last_names: 8,
            n_cities: 30,
            seed: 11,
            ..KgConfig::default()
        };
        let kg = Kg::generate(&cfg).unwrap();
        let mut firsts = HashMap::new();
        for e in &kg.entities {
            *firsts.entry(e.first.clone()).or_insert(0) += 1;
        }
        assert!(firsts.values().any(|&c| c > 1), "shared first names expected");

        let mut by_name: HashMap<(String, String), Vec<u32>> = HashMap::new();
        for e in &kg.entities {
            by_name.entry((e.first.clone(), e.last.clone())).or_default().push(e.id);
        }
        let mut twin_groups = 0;
        for ids in by_name.values().filter(|v| v.len() > 1) {
            twin_groups += 1;
            for (i, &a) in ids.iter().enumerate() {
                for &b in &ids[i + 1..] {
                    let (va, vb) = (kg.fact_values(a), kg.fact_values(b));
                    for k in 0..4 {
                        assert_ne!(va[k], vb[k], "twins {a},{b} share fact value {k}");
                    }
                }
            }
        }
        assert!(twin_groups > 0, "config was chosen to force full-name twins");
    }

    #[test]
    fn facts_enumerate_two_per_event_with_stable_ids() {
        let kg = Kg::generate(&small_config()).unwrap();
        let facts = kg.facts();
        assert_eq!(facts.len(), kg.events.len() * 2);
        let ids: HashSet<u32> = facts.iter().map(|f| f.id).collect();
        assert_eq!(ids.len(), facts.len());
        for f in &facts {
            assert_eq!(f.fact_type.event_kind(), kg.events[f.event as usize].kind);
        }
    }

    #[test]
    fn save_load_round_trips_and_detects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let kg = Kg::generate(&small_config()).unwrap();
        kg.save(dir.path()).unwrap();
        let back = Kg::load(dir.path()).unwrap();
        assert_eq!(serde_json::to_string(&kg).unwrap(), serde_json::to_string(&back).unwrap());

        // Corrupt one record mid-file.
        let p = dir.path().join("kg.jsonl");
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[3] = "{broken";
        std::fs::write(&p, lines.join("\n")).unwrap();
        assert!(matches!(Kg::load(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let kg = Kg::generate(&small_config()).unwrap();
        kg.save(dir.path()).unwrap();
        let mp = dir.path().join("kg.manifest.json");
        let text = std::fs::read_to_string(&mp).unwrap();
        std::fs::write(&mp, text.replace("\"version\": 1", "\"version\": 99")).unwrap();
        assert!(matches!(Kg::load(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn name_pools_are_distinct_across_styles() {
        let first = name_pool(1, 50, NameStyle::First).unwrap();
        let last = name_pool(2, 50, NameStyle::Last).unwrap();
        let city = name_pool(3, 50, NameStyle::City).unwrap();
        let f: HashSet<_> = first.iter().collect();
        let l: HashSet<_> = last.iter().collect();
        let c: HashSet<_> = city.iter().collect();
        assert_eq!(f.len(), 50);
        assert!(f.is_disjoint(&l));
        assert!(f.is_disjoint(&c));
        assert!(l.is_disjoint(&c));
    }
}
