//! Scorers turn each prompt/choice pair into a raw score; scores are then
//! normalized into `[0, 1]`.
//!
//! External scorers are child processes speaking a line protocol on their
//! standard streams. The harness writes one request per instance,
//! `{"id": ..., "pairs": [p0, p1, p2]}`, and expects exactly one reply,
//! `{"id": ..., "raw": [r0, r1, r2]}`, before sending the next request.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::hashing::{stable_u64, unit_interval};
use crate::metrics::{bca_gt, Belief, BeliefTable};
use crate::templates::{InstanceKind, McqaInstance, NUM_CHOICES};

/// Raw score the oracle scorers put on a selected choice (negated elsewhere).
pub const ORACLE_LOGIT: f64 = 10.0;

/// Half-width of the interval random raw scores are drawn from.
pub const RANDOM_SPAN: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    #[default]
    RawLogit,
    AlreadyNormalized,
}

impl FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw-logit" | "logit" => Ok(NormalizationMode::RawLogit),
            "already-normalized" | "normalized" => Ok(NormalizationMode::AlreadyNormalized),
            _ => Err(Error::Invalid(format!("unknown normalization mode `{s}`"))),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn normalize(raw: &[f64; NUM_CHOICES], mode: NormalizationMode) -> Result<[f64; NUM_CHOICES]> {
    match mode {
        NormalizationMode::RawLogit => Ok(raw.map(sigmoid)),
        NormalizationMode::AlreadyNormalized => {
            if let Some(&bad) = raw.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::ScoreOutOfRange {
                    id: String::new(),
                    value: bad,
                });
            }
            Ok(*raw)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub raw: [f64; NUM_CHOICES],
    pub normalized: [f64; NUM_CHOICES],
}

impl ScoreRecord {
    pub fn new(id: &str, raw: [f64; NUM_CHOICES], mode: NormalizationMode) -> Result<Self> {
        let normalized = normalize(&raw, mode).map_err(|e| match e {
            Error::ScoreOutOfRange { value, .. } => Error::ScoreOutOfRange {
                id: id.to_string(),
                value,
            },
            other => other,
        })?;
        Ok(ScoreRecord {
            id: id.to_string(),
            raw,
            normalized,
        })
    }
}

#[derive(Debug, Clone)]
pub enum BuiltinScorer {
    /// Raw scores hashed from `(seed, instance id, pair text)`.
    Random { seed: u64 },
    /// High logit on the standard answer, low elsewhere.
    Oracle,
    /// Low logit on the standard answer, high elsewhere.
    InverseOracle,
    Constant(f64),
    /// Answers value questions with the recorded belief and bet questions
    /// rationally under it.
    BeliefTable(Option<Arc<BeliefTable>>),
}

impl BuiltinScorer {
    pub fn name(&self) -> String {
        match self {
            BuiltinScorer::Random { seed } => format!("random(seed={seed})"),
            BuiltinScorer::Oracle => "oracle".into(),
            BuiltinScorer::InverseOracle => "inverse-oracle".into(),
            BuiltinScorer::Constant(k) => format!("constant({k})"),
            BuiltinScorer::BeliefTable(_) => "belief-table".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    /// Shell command line for the scorer process.
    pub command: String,
    pub mode: NormalizationMode,
    /// Number of concurrent scorer processes.
    pub workers: usize,
    pub timeout: Duration,
}

#[derive(Debug, Clone)]
pub enum ScorerSpec {
    Builtin(BuiltinScorer),
    External(ExternalScorer),
}

impl ScorerSpec {
    /// Parses `builtin:NAME[:PARAM]` or `exec:COMMAND`.
    ///
    /// `random` takes an optional seed (default `seed`), `constant` a raw
    /// score. The belief-table scorer is created without its table; attach
    /// one with [`ScorerSpec::with_beliefs`].
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        if let Some(cmd) = spec.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(Error::Invalid("empty scorer command".into()));
            }
            return Ok(ScorerSpec::External(ExternalScorer {
                command: cmd.to_string(),
                mode: NormalizationMode::RawLogit,
                workers: 1,
                timeout: Duration::from_secs(60),
            }));
        }
        let body = spec
            .strip_prefix("builtin:")
            .ok_or_else(|| Error::Invalid(format!("scorer `{spec}` must start with builtin: or exec:")))?;
        let (name, param) = match body.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (body, None),
        };
        let builtin = match (name, param) {
            ("random", None) => BuiltinScorer::Random { seed },
            ("random", Some(p)) => BuiltinScorer::Random {
                seed: p.parse().map_err(|_| Error::Invalid(format!("bad seed `{p}`")))?,
            },
            ("oracle", None) => BuiltinScorer::Oracle,
            ("inverse-oracle", None) => BuiltinScorer::InverseOracle,
            ("constant", p) => {
                let p = p.unwrap_or("0");
                BuiltinScorer::Constant(
                    p.parse().map_err(|_| Error::Invalid(format!("bad constant `{p}`")))?,
                )
            }
            ("belief-table", None) => BuiltinScorer::BeliefTable(None),
            _ => return Err(Error::Invalid(format!("unknown builtin scorer `{body}`"))),
        };
        Ok(ScorerSpec::Builtin(builtin))
    }

    pub fn with_beliefs(self, table: BeliefTable) -> Self {
        match self {
            ScorerSpec::Builtin(BuiltinScorer::BeliefTable(_)) => {
                ScorerSpec::Builtin(BuiltinScorer::BeliefTable(Some(Arc::new(table))))
            }
            other => other,
        }
    }

    pub fn id(&self) -> String {
        match self {
            ScorerSpec::Builtin(b) => b.name(),
            ScorerSpec::External(e) => format!("exec:{}", e.command),
        }
    }

    pub fn mode(&self) -> NormalizationMode {
        match self {
            ScorerSpec::Builtin(_) => NormalizationMode::RawLogit,
            ScorerSpec::External(e) => e.mode,
        }
    }
}

impl fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

fn one_hot(index: usize, on: f64) -> [f64; NUM_CHOICES] {
    let mut raw = [-on; NUM_CHOICES];
    raw[index] = on;
    raw
}

fn missing(scorer: &BuiltinScorer, what: &str) -> Error {
    Error::MissingSideData {
        scorer: scorer.name(),
        what: what.to_string(),
    }
}

/// Raw scores from a built-in scorer. Oracle-style scorers read the
/// embedded standard answer from `gt`.
pub fn builtin_raw(
    scorer: &BuiltinScorer,
    instance: &McqaInstance,
    gt: Option<&DatasetRecord>,
) -> Result<[f64; NUM_CHOICES]> {
    match scorer {
        BuiltinScorer::Random { seed } => {
            let pairs = instance.pairs();
            Ok(pairs.each_ref().map(|pair| {
                let h = stable_u64(&[
                    b"random-scorer",
                    &seed.to_le_bytes(),
                    instance.id.as_bytes(),
                    pair.as_bytes(),
                ]);
                (2.0 * unit_interval(h) - 1.0) * RANDOM_SPAN
            }))
        }
        BuiltinScorer::Oracle | BuiltinScorer::InverseOracle => {
            let rec = gt.ok_or_else(|| missing(scorer, "embedded standard ground truth"))?;
            if rec.id() != instance.id {
                return Err(Error::IdMismatch(format!(
                    "ground truth for `{}` given for `{}`",
                    rec.id(),
                    instance.id
                )));
            }
            let sign = if matches!(scorer, BuiltinScorer::Oracle) { 1.0 } else { -1.0 };
            Ok(one_hot(rec.standard_gt, sign * ORACLE_LOGIT))
        }
        BuiltinScorer::Constant(k) => Ok([*k; NUM_CHOICES]),
        BuiltinScorer::BeliefTable(table) => {
            let table = table.as_ref().ok_or_else(|| missing(scorer, "belief table"))?;
            let (high, low) = instance.kind.items();
            let belief = table.get(high, low)?;
            let pick = match instance.kind {
                InstanceKind::Value { .. } => instance.display_index(match belief {
                    Belief::HGreater => 0,
                    Belief::LGreater => 1,
                    Belief::Equal => 2,
                }),
                InstanceKind::Bet { .. } => bca_gt(instance, belief)?,
            };
            Ok(one_hot(pick, ORACLE_LOGIT))
        }
    }
}

pub fn score_instance(
    scorer: &BuiltinScorer,
    instance: &McqaInstance,
    gt: Option<&DatasetRecord>,
) -> Result<ScoreRecord> {
    let raw = builtin_raw(scorer, instance, gt)?;
    ScoreRecord::new(&instance.id, raw, NormalizationMode::RawLogit)
}

/// Scores every record, returning results in dataset order.
pub fn score_dataset(scorer: &ScorerSpec, records: &[DatasetRecord]) -> Result<Vec<ScoreRecord>> {
    match scorer {
        ScorerSpec::Builtin(b) => records
            .iter()
            .map(|r| score_instance(b, &r.instance, Some(r)))
            .collect(),
        ScorerSpec::External(ext) => {
            let instances: Vec<&McqaInstance> = records.iter().map(|r| &r.instance).collect();
            let raws = ext.score_all(&instances)?;
            instances
                .iter()
                .zip(raws)
                .map(|(inst, raw)| ScoreRecord::new(&inst.id, raw, ext.mode))
                .collect()
        }
    }
}

#[derive(Debug, Serialize)]
struct Request<'a> {
    id: &'a str,
    pairs: [String; NUM_CHOICES],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    id: String,
    raw: [f64; NUM_CHOICES],
}

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: mpsc::Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl Connection {
    fn open(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Connection {
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    fn score(&mut self, inst: &McqaInstance) -> Result<[f64; NUM_CHOICES]> {
        let request = Request {
            id: &inst.id,
            pairs: inst.pairs(),
        };
        let mut line = serde_json::to_string(&request).map_err(|e| Error::parse("request", e))?;
        line.push('\n');
        let stdin = self.stdin.as_mut().expect("open connection");
        stdin
            .write_all(line.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Protocol(format!("write failed for `{}`: {e}", inst.id)))?;
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(Error::Protocol(format!("read failed for `{}`: {e}", inst.id))),
            Err(mpsc::RecvTimeoutError::Timeout) => return Err(Error::Timeout(inst.id.clone())),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(Error::Protocol(format!(
                    "scorer exited before answering `{}`",
                    inst.id
                )))
            }
        };
        let resp: Response = serde_json::from_str(&reply).map_err(|e| {
            Error::Protocol(format!("malformed reply for `{}`: {e}: {reply:?}", inst.id))
        })?;
        if resp.id != inst.id {
            return Err(Error::Protocol(format!(
                "reply id `{}` does not match request `{}`: {reply:?}",
                resp.id, inst.id
            )));
        }
        Ok(resp.raw)
    }

    fn close(mut self) -> Result<()> {
        drop(self.stdin.take());
        let status = self.child.wait()?;
        if !status.success() {
            return Err(Error::Protocol(format!("scorer exited with {status}")));
        }
        Ok(())
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

type Scored = (usize, [f64; NUM_CHOICES]);

impl ExternalScorer {
    /// Raw scores for every instance, in input order.
    ///
    /// Instances are dealt round-robin over the worker connections; each
    /// connection keeps one request in flight.
    pub fn score_all(&self, instances: &[&McqaInstance]) -> Result<Vec<[f64; NUM_CHOICES]>> {
        let workers = self.workers.max(1).min(instances.len().max(1));
        let results: Vec<Result<Vec<Scored>>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    scope.spawn(move || {
                        let mut conn = Connection::open(&self.command, self.timeout)?;
                        let mut out = Vec::new();
                        for (i, inst) in instances.iter().enumerate().skip(w).step_by(workers) {
                            out.push((i, conn.score(inst)?));
                        }
                        conn.close()?;
                        Ok(out)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scorer worker panicked"))
                .collect()
        });
        let mut merged = vec![[0.0; NUM_CHOICES]; instances.len()];
        for chunk in results {
            for (i, raw) in chunk? {
                merged[i] = raw;
            }
        }
        Ok(merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{default_catalog, Split};
    use crate::dataset::annotate_all;
    use crate::predict::standard_predict;
    use crate::templates::{generate, generate_with, BetModality, DatasetSpec, GenerateOptions};

    fn coin_test() -> Vec<DatasetRecord> {
        annotate_all(generate(&default_catalog(), Split::Test, DatasetSpec::Bet { modality: BetModality::Coin })).unwrap()
    }

    #[test]
    fn oracle_scores() {
        let recs = coin_test();
        let s = score_instance(&BuiltinScorer::Oracle, &recs[0].instance, Some(&recs[0])).unwrap();
        assert_eq!(s.raw, [10.0, -10.0, -10.0]);
        assert!((s.normalized[0] - 0.999_954_6).abs() < 1e-6);
        assert!((s.normalized[1] - 0.000_045_4).abs() < 1e-6);
        let inv = score_instance(&BuiltinScorer::InverseOracle, &recs[0].instance, Some(&recs[0])).unwrap();
        assert_eq!(inv.raw, [-10.0, 10.0, 10.0]);
    }

    #[test]
    fn oracle_needs_ground_truth() {
        let recs = coin_test();
        assert!(matches!(
            score_instance(&BuiltinScorer::Oracle, &recs[0].instance, None),
            Err(Error::MissingSideData { .. })
        ));
        assert!(matches!(
            score_instance(&BuiltinScorer::BeliefTable(None), &recs[0].instance, None),
            Err(Error::MissingSideData { .. })
        ));
    }

    #[test]
    fn constant_zero_is_one_half() {
        let recs = coin_test();
        let s = score_instance(&BuiltinScorer::Constant(0.0), &recs[3].instance, None).unwrap();
        assert_eq!(s.normalized, [0.5; 3]);
    }

    #[test]
    fn random_is_deterministic_and_seeded() {
        let recs = coin_test();
        let r7 = BuiltinScorer::Random { seed: 7 };
        let a = score_instance(&r7, &recs[5].instance, None).unwrap();
        let b = score_instance(&r7, &recs[5].instance, None).unwrap();
        assert_eq!(a, b);
        let c = score_instance(&BuiltinScorer::Random { seed: 8 }, &recs[5].instance, None).unwrap();
        assert_ne!(a.raw, c.raw);
        assert!(a.raw.iter().all(|v| v.abs() <= RANDOM_SPAN));
    }

    #[test]
    fn scores_follow_choices_under_permutation() {
        let c = default_catalog();
        let spec = DatasetSpec::Bet { modality: BetModality::Card };
        let plain = annotate_all(generate(&c, Split::Dev, spec)).unwrap();
        let shuffled = annotate_all(generate_with(&c, Split::Dev, spec, GenerateOptions { shuffle_seed: Some(4) })).unwrap();
        for scorer in [
            BuiltinScorer::Random { seed: 11 },
            BuiltinScorer::Oracle,
            BuiltinScorer::InverseOracle,
            BuiltinScorer::Constant(1.5),
        ] {
            for (p, s) in plain.iter().zip(&shuffled) {
                let rp = builtin_raw(&scorer, &p.instance, Some(p)).unwrap();
                let rs = builtin_raw(&scorer, &s.instance, Some(s)).unwrap();
                for d in 0..3 {
                    assert_eq!(rs[d], rp[s.instance.canonical_index(d)], "{}", scorer.name());
                }
            }
        }
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[0.0; 3], NormalizationMode::RawLogit).unwrap(), [0.5; 3]);
        let n = normalize(&[-50.0, 0.0, 50.0], NormalizationMode::RawLogit).unwrap();
        assert!(n[0] < 1e-20 && n[1] == 0.5 && n[2] > 1.0 - 1e-15);
        assert!(n[0] < n[1] && n[1] < n[2]);
        assert_eq!(
            normalize(&[0.2, 0.9, 0.4], NormalizationMode::AlreadyNormalized).unwrap(),
            [0.2, 0.9, 0.4]
        );
        assert!(normalize(&[0.2, 1.1, 0.4], NormalizationMode::AlreadyNormalized).is_err());
        let err = ScoreRecord::new("x", [-0.1, 0.0, 0.0], NormalizationMode::AlreadyNormalized).unwrap_err();
        assert!(matches!(err, Error::ScoreOutOfRange { ref id, .. } if id == "x"));
    }

    #[test]
    fn parse_specs() {
        assert!(matches!(ScorerSpec::parse("builtin:random", 3).unwrap(), ScorerSpec::Builtin(BuiltinScorer::Random { seed: 3 })));
        assert!(matches!(ScorerSpec::parse("builtin:random:9", 3).unwrap(), ScorerSpec::Builtin(BuiltinScorer::Random { seed: 9 })));
        assert_eq!(ScorerSpec::parse("builtin:constant:0.5", 0).unwrap().id(), "constant(0.5)");
        assert!(matches!(ScorerSpec::parse("exec:python3 s.py", 0).unwrap(), ScorerSpec::External(_)));
        assert!(ScorerSpec::parse("builtin:gpt", 0).is_err());
        assert!(ScorerSpec::parse("oracle", 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn argmax_invariant_under_sigmoid(raw in proptest::array::uniform3(-30.0f64..30.0)) {
            let n = normalize(&raw, NormalizationMode::RawLogit).unwrap();
            proptest::prop_assert_eq!(standard_predict(&n), standard_predict(&raw));
            proptest::prop_assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
