//! Reference model of the idcard lifecycle and a runner that checks the engine against it.

use std::sync::Arc;

use chrono::{DateTime, Duration, TimeZone, Utc};
use idvault::api::{ApiError, Backend};
use idvault::auth::Principal;
use idvault::clock::{parse_datetime, ManualClock};
use idvault::idcard::{
    ClientError, FaceBox, VerificationClient, VerificationDecision, VerificationRequest,
    VerificationResponse, VerificationStatus, WorkflowError, IDCARD,
};
use idvault::service::Service;
use idvault::store::Document;
use proptest::prelude::*;
use serde_json::{json, Value};

use VerificationStatus::*;

/// The legal moves, written out independently of the engine.
pub const TRANSITIONS: [(VerificationStatus, VerificationStatus); 3] = [
    (Uploaded, Extracted),
    (Extracted, Verified),
    (Extracted, Rejected),
];

pub fn legal(from: VerificationStatus, to: VerificationStatus) -> bool {
    TRANSITIONS.contains(&(from, to))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Extract,
    Approve,
    Reject,
    ClientDown,
    Advance,
    Edit,
    ClockBack,
    ClockForward,
}

pub const ALPHABET: [Op; 8] = [
    Op::Extract,
    Op::Approve,
    Op::Reject,
    Op::ClientDown,
    Op::Advance,
    Op::Edit,
    Op::ClockBack,
    Op::ClockForward,
];

pub fn op() -> impl Strategy<Value = Op> {
    proptest::sample::select(ALPHABET.to_vec())
}

struct Fixed(VerificationDecision);

impl VerificationClient for Fixed {
    fn verify(&self, request: &VerificationRequest) -> Result<VerificationResponse, ClientError> {
        Ok(VerificationResponse {
            decision: self.0,
            fields: request.declared.clone(),
            face_box: FaceBox::from_values(&request.declared),
            reasons: Vec::new(),
        })
    }
}

struct Down;

impl VerificationClient for Down {
    fn verify(&self, _: &VerificationRequest) -> Result<VerificationResponse, ClientError> {
        Err(ClientError::Transport("unreachable".into()))
    }
}

#[derive(Debug, PartialEq)]
enum Expect {
    Moves(VerificationStatus),
    Stays,
    Illegal,
    Unavailable,
    Refused,
}

fn expected(state: VerificationStatus, op: Op) -> Expect {
    match (op, state) {
        (Op::Extract, Uploaded) => Expect::Moves(Extracted),
        (Op::Approve, Extracted) => Expect::Moves(Verified),
        (Op::Reject, Extracted) => Expect::Moves(Rejected),
        (Op::ClientDown, Extracted) => Expect::Unavailable,
        (Op::Advance, Uploaded | Extracted) => Expect::Moves(Verified),
        (Op::Edit, Uploaded) => Expect::Stays,
        (Op::Edit, _) => Expect::Refused,
        (Op::ClockBack | Op::ClockForward, _) => Expect::Stays,
        _ => Expect::Illegal,
    }
}

pub struct Lifecycle {
    clock: Arc<ManualClock>,
    service: Service,
    owner: Principal,
    id: String,
}

fn start() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 8, 0, 0).unwrap()
}

impl Lifecycle {
    pub fn new(card_png: &[u8]) -> Lifecycle {
        let clock = Arc::new(ManualClock::new(start()));
        let service = Service::open(super::options(1), clock.clone()).unwrap();
        let owner = Principal::authenticated("owner");
        let asset = service
            .media()
            .store_media(card_png, "card.png", "image/png")
            .unwrap();
        let declared = super::vars(json!({
            "kind": "PASSPORT", "identifier": "P1234567", "name": "Sari",
            "faceTop": 5, "faceLeft": 5, "faceWidth": 20, "faceHeight": 20
        }));
        let doc = service
            .workflow()
            .create_card(Some(&owner), declared, &asset.id)
            .unwrap();
        Lifecycle {
            clock,
            service,
            owner,
            id: doc.id,
        }
    }

    fn doc(&self) -> Document {
        self.service
            .content()
            .get_unchecked(IDCARD, &self.id)
            .unwrap()
            .unwrap()
    }

    fn apply(&self, op: Op) -> Result<(), String> {
        let wf = self.service.workflow();
        let outcome: Result<(), String> = match op {
            Op::Extract => wf
                .record_extraction(&self.id, &Default::default(), None)
                .map(drop)
                .map_err(kind),
            Op::Approve => wf
                .run_verification(&self.id, &Fixed(VerificationDecision::Verified))
                .map(drop)
                .map_err(kind),
            Op::Reject => wf
                .run_verification(&self.id, &Fixed(VerificationDecision::Rejected))
                .map(drop)
                .map_err(kind),
            Op::ClientDown => wf.run_verification(&self.id, &Down).map(drop).map_err(kind),
            Op::Advance => wf
                .advance_as(
                    Some(&self.owner),
                    &self.id,
                    &Fixed(VerificationDecision::Verified),
                )
                .map(drop)
                .map_err(kind),
            Op::Edit => self
                .service
                .content()
                .update(
                    Some(&self.owner),
                    IDCARD,
                    &self.id,
                    super::vars(json!({"occupation": "Teacher"})),
                )
                .map(drop)
                .map_err(|e| match e {
                    ApiError::BadInput(_) => "refused".to_string(),
                    other => format!("unexpected {other}"),
                }),
            Op::ClockBack => {
                self.clock.advance(Duration::hours(-1));
                Ok(())
            }
            Op::ClockForward => {
                self.clock.advance(Duration::minutes(7));
                Ok(())
            }
        };
        outcome
    }
}

fn kind(e: WorkflowError) -> String {
    match e {
        WorkflowError::IllegalTransition { .. } => "illegal".into(),
        WorkflowError::ClientUnavailable(_) => "unavailable".into(),
        other => format!("unexpected {other}"),
    }
}

fn status(doc: &Document) -> VerificationStatus {
    doc.values["statusCode"].as_str().unwrap().parse().unwrap()
}

fn stamp(doc: &Document, key: &str) -> Option<DateTime<Utc>> {
    doc.values
        .get(key)
        .and_then(Value::as_str)
        .map(|s| parse_datetime(s).unwrap())
}

/// Checks every timestamp and presence invariant of one stored record.
fn check_record(doc: &Document) -> Result<(), String> {
    let state = status(doc);
    let up = stamp(doc, "uploadedAt").ok_or("uploadedAt missing")?;
    let ex = stamp(doc, "extractedAt");
    let ve = stamp(doc, "verifiedAt");
    if ex.is_some() != (state != Uploaded) {
        return Err(format!("extractedAt presence wrong in {state}"));
    }
    if ve.is_some() != matches!(state, Verified | Rejected) {
        return Err(format!("verifiedAt presence wrong in {state}"));
    }
    if ex.is_some_and(|ex| ex < up) || ve.is_some_and(|ve| Some(ve) < ex) {
        return Err(format!("timestamps out of order: {up:?} {ex:?} {ve:?}"));
    }
    Ok(())
}

/// Runs `ops` against a fresh record, comparing every step with the reference model.
pub fn run(card_png: &[u8], ops: &[Op]) -> Result<Vec<VerificationStatus>, String> {
    let lc = Lifecycle::new(card_png);
    let mut model = Uploaded;
    let mut history = vec![Uploaded];
    let mut before = lc.doc();
    check_record(&before)?;
    for (step, &op) in ops.iter().enumerate() {
        let want = expected(model, op);
        let got = lc.apply(op);
        let after = lc.doc();
        let ctx = || format!("step {step} {op:?} from {model} in {ops:?}");
        match (&want, &got) {
            (Expect::Moves(to), Ok(())) => {
                if status(&after) != *to {
                    return Err(format!(
                        "{}: expected {to}, stored {}",
                        ctx(),
                        status(&after)
                    ));
                }
            }
            (Expect::Stays, Ok(())) => {
                if status(&after) != model {
                    return Err(format!("{}: status changed to {}", ctx(), status(&after)));
                }
            }
            (Expect::Illegal, Err(k)) if k == "illegal" => {}
            (Expect::Unavailable, Err(k)) if k == "unavailable" => {}
            (Expect::Refused, Err(k)) if k == "refused" => {}
            _ => return Err(format!("{}: expected {want:?}, got {got:?}", ctx())),
        }
        if got.is_err() && after != before {
            return Err(format!("{}: failed operation modified the record", ctx()));
        }
        check_record(&after)?;
        let now = status(&after);
        if now != model {
            // an advance from UPLOADED passes through EXTRACTED inside one call
            if model == Uploaded && now == Verified {
                history.push(Extracted);
            }
            history.push(now);
            model = now;
        }
        before = after;
    }
    for pair in history.windows(2) {
        if !legal(pair[0], pair[1]) {
            return Err(format!("illegal history {history:?}"));
        }
    }
    Ok(history)
}

/// Every sequence over [`ALPHABET`] of length `0..=max_len`.
pub fn all_sequences(max_len: usize) -> Vec<Vec<Op>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for op in ALPHABET {
                let mut longer: Vec<Op> = seq.clone();
                longer.push(op);
                next.push(longer);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}
