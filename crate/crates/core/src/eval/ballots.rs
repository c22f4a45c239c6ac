use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Quality,
    Identity,
}

impl fmt::Display for QuestionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Quality => "quality",
            Self::Identity => "identity",
        })
    }
}

impl FromStr for QuestionType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "quality" => Ok(Self::Quality),
            "identity" => Ok(Self::Identity),
            _ => Err(Error::Validation(format!("unknown question type {s:?}"))),
        }
    }
}

/// Candidate methods shown in a question. `C` is this pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    A,
    B,
    C,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::A, Method::B, Method::C];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Self::A),
            "B" | "b" => Ok(Self::B),
            "C" | "c" => Ok(Self::C),
            _ => Err(Error::Validation(format!("unknown method {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ballot {
    pub participant: String,
    pub question_type: QuestionType,
    pub question_id: String,
    pub choice: Method,
}

#[derive(Deserialize)]
struct RawBallot {
    participant: String,
    question_type: String,
    question_id: String,
    choice: String,
}

/// Ballots with at most one answer per participant and question.
#[derive(Clone, Debug, Default)]
pub struct BallotSet {
    ballots: Vec<Ballot>,
    seen: HashSet<(String, QuestionType, String)>,
}

impl BallotSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ballot: Ballot) -> Result<()> {
        let key = (ballot.participant.clone(), ballot.question_type, ballot.question_id.clone());
        if !self.seen.insert(key) {
            return Err(Error::Validation(format!(
                "participant {} answered {} question {} twice",
                ballot.participant, ballot.question_type, ballot.question_id
            )));
        }
        self.ballots.push(ballot);
        Ok(())
    }

    pub fn ballots(&self) -> &[Ballot] {
        &self.ballots
    }

    pub fn len(&self) -> usize {
        self.ballots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ballots.is_empty()
    }

    /// Reads `participant,question_type,question_id,choice` rows with a header line.
    pub fn from_reader(reader: impl Read) -> Result<Self> {
        let mut set = Self::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (line, row) in rdr.deserialize::<RawBallot>().enumerate() {
            let raw = row.map_err(|e| Error::Validation(format!("ballot row {}: {e}", line + 2)))?;
            set.insert(Ballot {
                participant: raw.participant,
                question_type: raw.question_type.parse()?,
                question_id: raw.question_id,
                choice: raw.choice.parse()?,
            })?;
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file)
    }

    /// Adds every ballot of `other`, rejecting duplicates.
    pub fn extend(&mut self, other: BallotSet) -> Result<()> {
        other.ballots.into_iter().try_for_each(|b| self.insert(b))
    }
}

/// Support per method for one question type. Percentages are rounded to two decimals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallotReport {
    pub question_type: QuestionType,
    pub total: usize,
    pub votes: BTreeMap<Method, usize>,
    pub percent: BTreeMap<Method, f64>,
}

impl BallotReport {
    pub fn percent_of(&self, method: Method) -> f64 {
        self.percent.get(&method).copied().unwrap_or(0.0)
    }
}

impl fmt::Display for BallotReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} votes):", self.question_type, self.total)?;
        for m in Method::ALL {
            write!(f, " {m} {:.2}%", self.percent_of(m))?;
        }
        Ok(())
    }
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// One report per question type present, in `quality`, `identity` order.
pub fn aggregate_ballots(set: &BallotSet) -> Result<Vec<BallotReport>> {
    if set.is_empty() {
        return Err(Error::Validation("no ballots to aggregate".into()));
    }
    let mut counts: BTreeMap<QuestionType, BTreeMap<Method, usize>> = BTreeMap::new();
    for b in set.ballots() {
        *counts.entry(b.question_type).or_default().entry(b.choice).or_default() += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(question_type, mut votes)| {
            for m in Method::ALL {
                votes.entry(m).or_insert(0);
            }
            let total: usize = votes.values().sum();
            let percent = votes
                .iter()
                .map(|(&m, &v)| (m, round2(100.0 * v as f64 / total as f64)))
                .collect();
            BallotReport {
                question_type,
                total,
                votes,
                percent,
            }
        })
        .collect())
}
