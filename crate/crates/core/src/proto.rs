//! Protocol runs: used-bits BB84, full BB84 with sifting, Monte Carlo
//! harness, exhaustive test-sampling tails and the security criterion
//! evaluated on tiny instances.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::Serialize;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::evemodel::{AttackSpec, BasisStrategy};
use crate::gf2code::CodeSpec;
use crate::qstate::{hadamard, StateVector};
use crate::rng::{self, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    UsedBits,
    Full,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "used-bits" => Ok(Mode::UsedBits),
            "full" | "full-bb84" => Ok(Mode::Full),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProtocolParams {
    /// Half the number of used bits.
    pub n: usize,
    pub p_allowed: f64,
    pub eps_sec: f64,
    pub eps_rel: f64,
    /// ECC + PA code on n bits; without one the run stops after the test.
    pub code: Option<CodeSpec>,
    pub mode: Mode,
    pub delta_num: f64,
    /// Full mode only: Bob announces missing qubits before the bases are revealed.
    pub loss_tolerant: bool,
    pub seed: u64,
}

impl ProtocolParams {
    pub fn new(n: usize, p_allowed: f64, code: Option<CodeSpec>) -> Result<Self> {
        let p = ProtocolParams {
            n,
            p_allowed,
            eps_sec: 0.01,
            eps_rel: 0.01,
            code,
            mode: Mode::UsedBits,
            delta_num: 0.5,
            loss_tolerant: false,
            seed: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("n must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_allowed) {
            return Err(Error::InvalidParameter(format!("p_allowed = {} outside [0, 1]", self.p_allowed)));
        }
        if self.eps_sec <= 0.0 || self.eps_rel <= 0.0 || self.delta_num < 0.0 {
            return Err(Error::InvalidParameter("epsilons must be positive and delta_num non-negative".into()));
        }
        if let Some(c) = &self.code {
            if c.n != self.n {
                return Err(Error::LengthMismatch { expected: self.n, got: c.n });
            }
        }
        if self.loss_tolerant && self.mode != Mode::Full {
            return Err(Error::InvalidParameter("loss-tolerant reporting needs full mode".into()));
        }
        Ok(())
    }

    /// Largest |c_T| that passes the test.
    pub fn max_test_errors(&self) -> usize {
        (self.n as f64 * self.p_allowed + 1e-9).floor() as usize
    }

    /// n'' = ceil((4 + δ) n)
    pub fn n_raw(&self) -> usize {
        ((4.0 + self.delta_num) * self.n as f64 - 1e-9).ceil() as usize
    }

    /// Whether v̂ ≥ 2n(p_a + ε_sec) holds for the attached code.
    pub fn security_precondition(&self) -> Option<bool> {
        let v_hat = self.code.as_ref()?.v_hat?;
        Some(v_hat as f64 >= 2.0 * self.n as f64 * (self.p_allowed + self.eps_sec) - 1e-9)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Missing,
    Receipt,
    Bases,
    Sifting,
    Abort,
    Subsets,
    TestBits,
    TestResult,
    Syndrome,
}

#[derive(Clone, Debug, Serialize)]
pub struct Message {
    pub from: Party,
    pub kind: MessageKind,
    pub payload: String,
}

/// Public classical messages in the order sent.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MessageLog(pub Vec<Message>);

impl MessageLog {
    fn push(&mut self, from: Party, kind: MessageKind, payload: impl Into<String>) {
        self.0.push(Message { from, kind, payload: payload.into() });
    }

    fn first(&self, kind: MessageKind) -> Option<usize> {
        self.0.iter().position(|m| m.kind == kind)
    }

    /// Receipt before bases, bases before subsets, missing reports before bases,
    /// and the later phases in their fixed order.
    pub fn check_order(&self) -> Result<()> {
        let chain = [
            MessageKind::Receipt,
            MessageKind::Bases,
            MessageKind::Subsets,
            MessageKind::TestBits,
            MessageKind::TestResult,
            MessageKind::Syndrome,
        ];
        let mut last: Option<(MessageKind, usize)> = None;
        for k in chain {
            if let Some(pos) = self.first(k) {
                if let Some((prev, at)) = last {
                    if pos < at {
                        return Err(Error::InvalidParameter(format!("{k:?} sent before {prev:?}")));
                    }
                }
                last = Some((k, pos));
            }
        }
        if let (Some(m), Some(b)) = (self.first(MessageKind::Missing), self.first(MessageKind::Bases)) {
            if m > b {
                return Err(Error::InvalidParameter("missing qubits reported after bases".into()));
            }
        }
        if self.first(MessageKind::Subsets).is_some() && self.first(MessageKind::Receipt).is_none() {
            return Err(Error::InvalidParameter("subsets sent without receipt".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SiftRecord {
    pub n_raw: usize,
    pub i: BitString,
    pub b_alice: BitString,
    pub b_bob: BitString,
    pub j: BitString,
    pub missing: BitString,
    /// Positions kept after sifting, in order.
    pub kept: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transcript {
    pub mode: Mode,
    pub n: usize,
    pub aborted: bool,
    pub sift: Option<SiftRecord>,
    pub i: BitString,
    pub b: BitString,
    pub s: BitString,
    pub j: BitString,
    pub i_t: BitString,
    pub j_t: BitString,
    pub c_t: BitString,
    pub i_i: BitString,
    pub j_i: BitString,
    pub c_i: BitString,
    pub test_pass: bool,
    pub xi: Option<BitString>,
    pub j_bob: Option<BitString>,
    pub key_alice: Option<BitString>,
    pub key_bob: Option<BitString>,
    pub messages: MessageLog,
}

impl Transcript {
    pub fn keys_equal(&self) -> Option<bool> {
        Some(self.key_alice.as_ref()? == self.key_bob.as_ref()?)
    }

    /// |c_T| / n
    pub fn p_test(&self) -> f64 {
        self.c_t.weight() as f64 / self.n as f64
    }
}

/// What Bob holds after the channel: BB84 states (None when lost), or the
/// joint probe ⊗ qubits state from an exact attack.
#[derive(Clone, Debug)]
pub enum Delivery {
    Classical(Vec<Option<(bool, bool)>>),
    Quantum { state: StateVector, n_probe: usize, n_qubits: usize },
}

fn random_bits(n: usize, rng: &mut Rng) -> BitString {
    BitString::from_bools(&(0..n).map(|_| rng.random::<bool>()).collect::<Vec<_>>())
}

fn measure_bb84(value: bool, prep: bool, meas: bool, rng: &mut Rng) -> bool {
    if prep == meas {
        value
    } else {
        rng.random()
    }
}

impl Delivery {
    pub fn missing(&self) -> BitString {
        match self {
            Delivery::Classical(q) => BitString::from_bools(&q.iter().map(Option::is_none).collect::<Vec<_>>()),
            Delivery::Quantum { n_qubits, .. } => BitString::zeros(*n_qubits),
        }
    }

    /// Bob's outcomes in `bases`; a lost qubit is replaced by a fresh random BB84 state.
    pub fn measure(&self, bases: &BitString, rng: &mut Rng) -> Result<BitString> {
        match self {
            Delivery::Classical(q) => {
                if bases.len() != q.len() {
                    return Err(Error::LengthMismatch { expected: q.len(), got: bases.len() });
                }
                let out: Vec<bool> = q
                    .iter()
                    .enumerate()
                    .map(|(k, st)| {
                        let (v, e) = st.unwrap_or_else(|| (rng.random(), rng.random()));
                        measure_bb84(v, e, bases.get(k), rng)
                    })
                    .collect();
                Ok(BitString::from_bools(&out))
            }
            Delivery::Quantum { state, n_probe, n_qubits } => {
                if bases.len() != *n_qubits {
                    return Err(Error::LengthMismatch { expected: *n_qubits, got: bases.len() });
                }
                let mut rotated = state.clone();
                let h = hadamard();
                for k in 0..*n_qubits {
                    if bases.get(k) {
                        rotated.apply_gate(&[n_probe + k], &h)?;
                    }
                }
                let nj = 1usize << n_qubits;
                let mut probs = vec![0.0; nj];
                for (idx, a) in rotated.amps().iter().enumerate() {
                    probs[idx % nj] += a.norm_sqr();
                }
                let mut u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
                let mut pick = nj - 1;
                for (j, p) in probs.iter().enumerate() {
                    if u < *p {
                        pick = j;
                        break;
                    }
                    u -= p;
                }
                Ok(BitString::from_index(pick as u64, *n_qubits))
            }
        }
    }
}

/// Carries Alice's qubits to Bob. Bob only measures once bases are public.
pub trait Channel: Sync {
    fn send(&self, i: &BitString, b: &BitString, rng: &mut Rng) -> Result<Delivery>;
}

/// Per-qubit classical models; large n is fine.
#[derive(Clone, Debug, Serialize)]
pub enum ClassicalChannel {
    Identity,
    /// independent bit flips with probability p
    Flip(f64),
    /// X on every qubit: flips the z-basis values only
    FlipAll,
    /// flips exactly the positions of `mask`
    ForcedErrors(BitString),
    /// uniform weight in 0..=t, then uniform positions
    RandomErrors(usize),
    /// Eve keeps every qubit and forwards a fresh random BB84 state
    SwapShadow,
    /// with probability 1/2 Eve keeps everything, otherwise does nothing
    HalfSwapShadow,
    InterceptShadow(BasisStrategy),
    /// each qubit lost with probability `loss`, otherwise flipped with probability `flip`
    Lossy {
        loss: f64,
        flip: f64,
    },
}

impl ClassicalChannel {
    /// Classical stand-in for a named attack preset, when one exists.
    pub fn shadow_of(preset: &str) -> Option<Self> {
        Some(match preset {
            "identity" => ClassicalChannel::Identity,
            "flip-all" => ClassicalChannel::FlipAll,
            "swap" => ClassicalChannel::SwapShadow,
            "half-swap" => ClassicalChannel::HalfSwapShadow,
            "intercept-z" | "cnot-probe" => ClassicalChannel::InterceptShadow(BasisStrategy::Z),
            "intercept-x" => ClassicalChannel::InterceptShadow(BasisStrategy::X),
            "intercept-random" => ClassicalChannel::InterceptShadow(BasisStrategy::Random),
            _ => return None,
        })
    }
}

impl Channel for ClassicalChannel {
    fn send(&self, i: &BitString, b: &BitString, rng: &mut Rng) -> Result<Delivery> {
        if i.len() != b.len() {
            return Err(Error::LengthMismatch { expected: i.len(), got: b.len() });
        }
        let len = i.len();
        let mut flips = BitString::zeros(len);
        match self {
            ClassicalChannel::Identity => {}
            ClassicalChannel::Flip(p) => {
                for k in 0..len {
                    if rng.random::<f64>() < *p {
                        flips.set(k, true);
                    }
                }
            }
            ClassicalChannel::FlipAll => flips = b.not(),
            ClassicalChannel::ForcedErrors(mask) => {
                if mask.len() != len {
                    return Err(Error::LengthMismatch { expected: len, got: mask.len() });
                }
                flips = mask.clone();
            }
            ClassicalChannel::RandomErrors(t) => {
                let w = rng.random_range(0..=(*t).min(len));
                let mut pos: Vec<usize> = (0..len).collect();
                pos.shuffle(rng);
                for &k in &pos[..w] {
                    flips.set(k, true);
                }
            }
            ClassicalChannel::SwapShadow => {
                return Ok(Delivery::Classical((0..len).map(|_| Some((rng.random(), rng.random()))).collect()));
            }
            ClassicalChannel::HalfSwapShadow => {
                if rng.random::<bool>() {
                    // probe |0..0⟩ in z goes to Bob
                    return Ok(Delivery::Classical(vec![Some((false, false)); len]));
                }
            }
            ClassicalChannel::InterceptShadow(strategy) => {
                let states = (0..len)
                    .map(|k| {
                        let e = match strategy {
                            BasisStrategy::Z => false,
                            BasisStrategy::X => true,
                            BasisStrategy::Random => rng.random(),
                        };
                        Some((measure_bb84(i.get(k), b.get(k), e, rng), e))
                    })
                    .collect();
                return Ok(Delivery::Classical(states));
            }
            ClassicalChannel::Lossy { loss, flip } => {
                let states = (0..len)
                    .map(|k| {
                        if rng.random::<f64>() < *loss {
                            None
                        } else {
                            Some((i.get(k) ^ (rng.random::<f64>() < *flip), b.get(k)))
                        }
                    })
                    .collect();
                return Ok(Delivery::Classical(states));
            }
        }
        Ok(Delivery::Classical((0..len).map(|k| Some((i.get(k) ^ flips.get(k), b.get(k)))).collect()))
    }
}

/// Exact simulation of an attack on all transmitted qubits.
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    pub attack: AttackSpec,
}

impl QuantumChannel {
    /// Size is limited by the global state-dimension cap when the attack is built.
    pub fn new(attack: AttackSpec) -> Result<Self> {
        Ok(QuantumChannel { attack })
    }
}

impl Channel for QuantumChannel {
    fn send(&self, i: &BitString, b: &BitString, _rng: &mut Rng) -> Result<Delivery> {
        if i.len() != self.attack.n_qubits() {
            return Err(Error::DimensionMismatch(format!(
                "attack acts on {} qubits, protocol sends {}",
                self.attack.n_qubits(),
                i.len()
            )));
        }
        Ok(Delivery::Quantum {
            state: self.attack.output(i, b)?,
            n_probe: self.attack.probe_dims().len(),
            n_qubits: i.len(),
        })
    }
}

/// Uniform balanced string: shuffle positions, the first half become information bits.
pub fn sample_subsets(n: usize, rng: &mut Rng) -> BitString {
    let mut pos: Vec<usize> = (0..2 * n).collect();
    pos.shuffle(rng);
    let mut s = BitString::zeros(2 * n);
    for &k in &pos[..n] {
        s.set(k, true);
    }
    s
}

/// Test, error correction and privacy amplification on 2n used bits.
fn finish(
    params: &ProtocolParams,
    i: BitString,
    b: BitString,
    j: BitString,
    mut log: MessageLog,
    sift: Option<SiftRecord>,
    rng: &mut Rng,
) -> Result<Transcript> {
    let s = sample_subsets(params.n, rng);
    log.push(Party::Alice, MessageKind::Subsets, s.to_string());
    let (i_t, i_i) = i.split_by(&s);
    let (j_t, j_i) = j.split_by(&s);
    log.push(Party::Bob, MessageKind::TestBits, j_t.to_string());
    log.push(Party::Alice, MessageKind::TestBits, i_t.to_string());
    let c_t = i_t.xor(&j_t);
    let c_i = i_i.xor(&j_i);
    let test_pass = c_t.weight() <= params.max_test_errors();
    log.push(Party::Bob, MessageKind::TestResult, if test_pass { "pass" } else { "fail" });
    let (mut xi, mut j_bob, mut key_alice, mut key_bob) = (None, None, None, None);
    if let Some(code) = &params.code {
        let x = code.syndrome(&i_i)?;
        log.push(Party::Alice, MessageKind::Syndrome, x.to_string());
        let decoded = code.decode_to_coset(&j_i, &x)?;
        key_alice = Some(code.key(&i_i)?);
        key_bob = Some(code.key(&decoded)?);
        j_bob = Some(decoded);
        xi = Some(x);
    }
    Ok(Transcript {
        mode: params.mode,
        n: params.n,
        aborted: false,
        sift,
        i,
        b,
        s,
        j,
        i_t,
        j_t,
        c_t,
        i_i,
        j_i,
        c_i,
        test_pass,
        xi,
        j_bob,
        key_alice,
        key_bob,
        messages: log,
    })
}

pub fn run_used_bits(params: &ProtocolParams, channel: &dyn Channel, rng: &mut Rng) -> Result<Transcript> {
    params.validate()?;
    let len = 2 * params.n;
    let i = random_bits(len, rng);
    let b = random_bits(len, rng);
    let delivery = channel.send(&i, &b, rng)?;
    let mut log = MessageLog::default();
    log.push(Party::Bob, MessageKind::Receipt, "received");
    log.push(Party::Alice, MessageKind::Bases, b.to_string());
    let j = delivery.measure(&b, rng)?;
    finish(params, i, b, j, log, None, rng)
}

pub fn run_full_bb84(params: &ProtocolParams, channel: &dyn Channel, rng: &mut Rng) -> Result<Transcript> {
    params.validate()?;
    let n_raw = params.n_raw();
    let i = random_bits(n_raw, rng);
    let b_alice = random_bits(n_raw, rng);
    let b_bob = random_bits(n_raw, rng);
    let delivery = channel.send(&i, &b_alice, rng)?;
    let mut log = MessageLog::default();
    let missing = if params.loss_tolerant { delivery.missing() } else { BitString::zeros(n_raw) };
    if params.loss_tolerant {
        log.push(Party::Bob, MessageKind::Missing, missing.to_string());
    }
    let j = delivery.measure(&b_bob, rng)?;
    log.push(Party::Bob, MessageKind::Receipt, "received");
    log.push(Party::Alice, MessageKind::Bases, b_alice.to_string());
    log.push(Party::Bob, MessageKind::Bases, b_bob.to_string());
    let kept: Vec<usize> = (0..n_raw).filter(|&k| b_alice.get(k) == b_bob.get(k) && !missing.get(k)).collect();
    log.push(Party::Alice, MessageKind::Sifting, kept.len().to_string());
    let sift = SiftRecord { n_raw, i: i.clone(), b_alice: b_alice.clone(), b_bob, j: j.clone(), missing, kept };
    let len = 2 * params.n;
    if sift.kept.len() < len {
        log.push(Party::Alice, MessageKind::Abort, format!("{} < {len}", sift.kept.len()));
        let empty = BitString::zeros(0);
        return Ok(Transcript {
            mode: Mode::Full,
            n: params.n,
            aborted: true,
            sift: Some(sift),
            i: empty.clone(),
            b: empty.clone(),
            s: empty.clone(),
            j: empty.clone(),
            i_t: empty.clone(),
            j_t: empty.clone(),
            c_t: empty.clone(),
            i_i: empty.clone(),
            j_i: empty.clone(),
            c_i: empty,
            test_pass: false,
            xi: None,
            j_bob: None,
            key_alice: None,
            key_bob: None,
            messages: log,
        });
    }
    let pick = |x: &BitString| BitString::from_bools(&sift.kept[..len].iter().map(|&k| x.get(k)).collect::<Vec<_>>());
    let (ui, ub, uj) = (pick(&i), pick(&b_alice), pick(&j));
    finish(params, ui, ub, uj, log, Some(sift), rng)
}

pub fn run(params: &ProtocolParams, channel: &dyn Channel, rng: &mut Rng) -> Result<Transcript> {
    match params.mode {
        Mode::UsedBits => run_used_bits(params, channel, rng),
        Mode::Full => run_full_bb84(params, channel, rng),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub trial: u64,
    pub pass: bool,
    pub c_t: usize,
    pub c_i: usize,
    pub keys_equal: Option<bool>,
    pub aborted: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub trials: u64,
    pub pass_frequency: f64,
    pub abort_frequency: f64,
    /// among runs with keys
    pub key_agreement_frequency: Option<f64>,
    /// |C_I|/n > p_a + ε_sec while |C_T|/n ≤ p_a
    pub bad_event_frequency: f64,
    pub mean_test_error_rate: f64,
    pub mean_info_error_rate: f64,
    /// counts of |c_T| = 0..=n
    pub c_t_histogram: Vec<u64>,
    pub c_i_histogram: Vec<u64>,
    pub rows: Vec<TrialRow>,
}

/// Independent trials, trial k drawing from the substream (seed, "trial", k).
pub fn monte_carlo(params: &ProtocolParams, channel: &dyn Channel, trials: u64) -> Result<Summary> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    params.validate()?;
    let rows: Vec<TrialRow> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(params.seed, "trial", k);
            let t = run(params, channel, &mut r)?;
            Ok(TrialRow {
                trial: k,
                pass: t.test_pass,
                c_t: t.c_t.weight(),
                c_i: t.c_i.weight(),
                keys_equal: t.keys_equal(),
                aborted: t.aborted,
            })
        })
        .collect::<Result<_>>()?;
    let n = params.n;
    let nf = n as f64;
    let total = trials as f64;
    let mut c_t_histogram = vec![0u64; n + 1];
    let mut c_i_histogram = vec![0u64; n + 1];
    let (mut pass, mut aborted, mut bad, mut keyed, mut agree) = (0u64, 0u64, 0u64, 0u64, 0u64);
    let (mut et, mut ei) = (0.0, 0.0);
    for r in &rows {
        if r.aborted {
            aborted += 1;
            continue;
        }
        c_t_histogram[r.c_t] += 1;
        c_i_histogram[r.c_i] += 1;
        et += r.c_t as f64 / nf;
        ei += r.c_i as f64 / nf;
        pass += r.pass as u64;
        if r.c_i as f64 / nf > params.p_allowed + params.eps_sec && r.c_t <= params.max_test_errors() {
            bad += 1;
        }
        if let Some(eq) = r.keys_equal {
            keyed += 1;
            agree += eq as u64;
        }
    }
    let done = (trials - aborted).max(1) as f64;
    Ok(Summary {
        trials,
        pass_frequency: pass as f64 / total,
        abort_frequency: aborted as f64 / total,
        key_agreement_frequency: (keyed > 0).then(|| agree as f64 / keyed as f64),
        bad_event_frequency: bad as f64 / total,
        mean_test_error_rate: et / done,
        mean_info_error_rate: ei / done,
        c_t_histogram,
        c_i_histogram,
        rows,
    })
}

/// All balanced 2n-bit masks (bit k set = position k is an information bit).
pub fn balanced_masks(two_n: usize) -> Vec<u64> {
    assert!(two_n < 64 && two_n.is_multiple_of(2));
    (0u64..1 << two_n).filter(|m| m.count_ones() as usize == two_n / 2).collect()
}

/// Histogram of |c_T| over every balanced s for the error pattern `c`.
pub fn test_error_histogram(two_n: usize, c: u64) -> Vec<u64> {
    let mut h = vec![0u64; two_n / 2 + 1];
    for s in balanced_masks(two_n) {
        h[(c & !s).count_ones() as usize] += 1;
    }
    h
}

/// P[|C_I| > n(p_a+ε) ∧ |C_T| ≤ n p_a] from a |c_T| histogram of an error pattern of weight w.
pub fn bad_event_probability(hist: &[u64], w: usize, p_a: f64, eps: f64) -> f64 {
    let n = hist.len() - 1;
    let total: u64 = hist.iter().sum();
    let nf = n as f64;
    let bad: u64 = hist
        .iter()
        .enumerate()
        .filter(|&(ct, _)| {
            if ct > w {
                return false;
            }
            let ci = w - ct;
            ct as f64 <= nf * p_a + 1e-9 && ci as f64 > nf * (p_a + eps) + 1e-9
        })
        .map(|(_, c)| c)
        .sum();
    bad as f64 / total as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct HoeffdingReport {
    pub two_n: usize,
    pub eps: f64,
    pub bound: f64,
    pub worst: f64,
    pub worst_weight: usize,
    pub worst_p_a: f64,
    pub violations: usize,
}

/// Exhaustive check over all balanced s and every error weight. Between
/// consecutive multiples of 1/n the event probability only shrinks as p_a
/// grows, so p_a = k/n, k = 0..=n, covers the supremum.
pub fn hoeffding_exhaustive(two_n: usize, eps: f64) -> HoeffdingReport {
    let n = two_n / 2;
    let bound = (-(n as f64) * eps * eps / 2.0).exp();
    let masks = balanced_masks(two_n);
    let mut rep = HoeffdingReport { two_n, eps, bound, worst: 0.0, worst_weight: 0, worst_p_a: 0.0, violations: 0 };
    for w in 0..=two_n {
        let c: u64 = (1u64 << w) - 1;
        let mut hist = vec![0u64; n + 1];
        for s in &masks {
            hist[(c & !s).count_ones() as usize] += 1;
        }
        for k in 0..=n {
            let p_a = k as f64 / n as f64;
            let p = bad_event_probability(&hist, w, p_a, eps);
            if p > rep.worst {
                rep.worst = p;
                rep.worst_weight = w;
                rep.worst_p_a = p_a;
            }
            if p > bound {
                rep.violations += 1;
            }
        }
    }
    rep
}

/// Shannon entropy in bits.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum()
}

/// I(X;Y) for a joint table indexed [x][y]; the table need not be normalized.
pub fn mutual_information(joint: &[Vec<f64>]) -> f64 {
    let total: f64 = joint.iter().flatten().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let px: Vec<f64> = joint.iter().map(|r| r.iter().sum::<f64>() / total).collect();
    let cols = joint.iter().map(Vec::len).max().unwrap_or(0);
    let py: Vec<f64> =
        (0..cols).map(|y| joint.iter().map(|r| r.get(y).copied().unwrap_or(0.0)).sum::<f64>() / total).collect();
    let mut i = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &v) in row.iter().enumerate() {
            let p = v / total;
            if p > 0.0 {
                i += p * (p / (px[x] * py[y])).log2();
            }
        }
    }
    i
}

/// Public data Eve sees before measuring.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PublicContext {
    pub b: BitString,
    pub s: BitString,
    pub i_t: BitString,
    pub j_t: BitString,
    pub xi: BitString,
}

/// A finite-outcome measurement on Eve's probe, possibly chosen from public data.
pub trait EveMeasurement: Sync {
    fn outcomes(&self) -> usize;
    /// ‖Π_e ψ‖² for each outcome e of an unnormalized probe state.
    fn weights(&self, probe: &StateVector, ctx: &PublicContext) -> Result<Vec<f64>>;
}

/// Which basis a [`QubitMeasurement`] uses on each measured probe qubit.
#[derive(Clone, Debug)]
pub enum MeasureBasis {
    /// probe qubit k uses the announced basis of transmitted qubit k
    Channel,
    Fixed(BitString),
}

/// Measure the listed probe qubits in a product basis.
#[derive(Clone, Debug)]
pub struct QubitMeasurement {
    pub subsystems: Vec<usize>,
    pub basis: MeasureBasis,
}

impl EveMeasurement for QubitMeasurement {
    fn outcomes(&self) -> usize {
        1 << self.subsystems.len()
    }

    fn weights(&self, probe: &StateVector, ctx: &PublicContext) -> Result<Vec<f64>> {
        let basis = match &self.basis {
            MeasureBasis::Channel => {
                if ctx.b.len() < self.subsystems.len() {
                    return Err(Error::LengthMismatch { expected: self.subsystems.len(), got: ctx.b.len() });
                }
                BitString::from_bools(&(0..self.subsystems.len()).map(|k| ctx.b.get(k)).collect::<Vec<_>>())
            }
            MeasureBasis::Fixed(x) => x.clone(),
        };
        let mut psi = probe.clone();
        for (k, &q) in self.subsystems.iter().enumerate() {
            if basis.get(k) {
                psi.apply_gate(&[q], &hadamard())?;
            }
        }
        let dims = psi.dims().to_vec();
        let mut strides = vec![1usize; dims.len()];
        for k in (0..dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let mut w = vec![0.0; self.outcomes()];
        for (idx, a) in psi.amps().iter().enumerate() {
            let mut e = 0usize;
            for &q in &self.subsystems {
                e = (e << 1) | ((idx / strides[q]) % 2);
            }
            w[e] += a.norm_sqr();
        }
        Ok(w)
    }
}

/// Measure `control` in z, then run `on_zero` or `on_one` on the collapsed probe.
/// Outcomes of `on_one` follow those of `on_zero`.
pub struct Conditional {
    pub control: usize,
    pub on_zero: Box<dyn EveMeasurement>,
    pub on_one: Box<dyn EveMeasurement>,
}

impl EveMeasurement for Conditional {
    fn outcomes(&self) -> usize {
        self.on_zero.outcomes() + self.on_one.outcomes()
    }

    fn weights(&self, probe: &StateVector, ctx: &PublicContext) -> Result<Vec<f64>> {
        let dims = probe.dims().to_vec();
        let stride: usize = dims[self.control + 1..].iter().product();
        let branch = |v: usize| -> Result<StateVector> {
            let amps = probe
                .amps()
                .iter()
                .enumerate()
                .map(|(idx, a)| if (idx / stride) % dims[self.control] == v { *a } else { Default::default() })
                .collect();
            StateVector::new(dims.clone(), amps)
        };
        let mut w = self.on_zero.weights(&branch(0)?, ctx)?;
        w.extend(self.on_one.weights(&branch(1)?, ctx)?);
        Ok(w)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    /// ⟨I'_Eve⟩: Eve's key information, counted as zero when the test fails
    pub avg_i_prime: f64,
    pub p_pass: f64,
    /// I(A;E | public data, T = pass)
    pub info_given_pass: f64,
    pub threshold: f64,
    /// P[T = pass ∧ I_Eve ≥ threshold]
    pub p_pass_and_high_info: f64,
    /// |⟨I'⟩ − I(A;E|…,pass)·P[pass]| with the conditional computed separately
    pub identity_residual: f64,
    pub contexts: usize,
}

/// Exact enumeration over s, b, i, Bob's outcomes and Eve's outcomes.
pub fn evaluate_security_criterion(
    params: &ProtocolParams,
    attack: &AttackSpec,
    measurement: &dyn EveMeasurement,
    threshold: f64,
) -> Result<CriterionReport> {
    params.validate()?;
    let n = params.n;
    let len = 2 * n;
    if len > 4 {
        return Err(Error::CapExceeded { dim: len, cap: 4 });
    }
    if attack.n_qubits() != len {
        return Err(Error::DimensionMismatch(format!("attack on {} qubits, need {len}", attack.n_qubits())));
    }
    let code = params.code.as_ref().ok_or_else(|| Error::InvalidParameter("security criterion needs a code".into()))?;
    let masks = balanced_masks(len);
    let w_s = 1.0 / masks.len() as f64;
    let w_bi = 1.0 / (1u64 << (2 * len)) as f64;
    let n_keys = 1usize << code.m;
    let n_e = measurement.outcomes();
    // (P[ctx], I(A;E|ctx), pass)
    let mut contexts: Vec<(f64, f64, bool)> = Vec::new();
    for &sm in &masks {
        let s = BitString::from_index(sm.reverse_bits() >> (64 - len), len);
        for b in BitString::all(len) {
            let probes: Vec<Vec<StateVector>> =
                BitString::all(len).map(|i| attack.probes(&i, &b)).collect::<Result<_>>()?;
            for i_t in BitString::all(n) {
                for j_t in BitString::all(n) {
                    let pass = i_t.xor(&j_t).weight() <= params.max_test_errors();
                    for xi in BitString::all(code.r) {
                        let ctx = PublicContext {
                            b: b.clone(),
                            s: s.clone(),
                            i_t: i_t.clone(),
                            j_t: j_t.clone(),
                            xi: xi.clone(),
                        };
                        let mut joint = vec![vec![0.0; n_e]; n_keys];
                        for i_i in code.coset(&xi)? {
                            let i = BitString::merge_by(&i_t, &i_i, &s);
                            let a = code.key(&i_i)?.to_index() as usize;
                            for j_i in BitString::all(n) {
                                let j = BitString::merge_by(&j_t, &j_i, &s);
                                let e = &probes[i.to_index() as usize][j.to_index() as usize];
                                if e.norm_sqr() == 0.0 {
                                    continue;
                                }
                                for (k, wt) in measurement.weights(e, &ctx)?.into_iter().enumerate() {
                                    joint[a][k] += w_s * w_bi * wt;
                                }
                            }
                        }
                        let p: f64 = joint.iter().flatten().sum();
                        if p > 0.0 {
                            contexts.push((p, mutual_information(&joint), pass));
                        }
                    }
                }
            }
        }
    }
    let total: f64 = contexts.iter().map(|c| c.0).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(total));
    }
    let p_pass: f64 = contexts.iter().filter(|c| c.2).map(|c| c.0).sum();
    let avg_i_prime: f64 = contexts.iter().filter(|c| c.2).map(|c| c.0 * c.1).sum();
    let info_given_pass =
        if p_pass > 0.0 { contexts.iter().filter(|c| c.2).map(|c| (c.0 / p_pass) * c.1).sum() } else { 0.0 };
    let p_pass_and_high_info = contexts.iter().filter(|c| c.2 && c.1 >= threshold).map(|c| c.0).sum();
    Ok(CriterionReport {
        avg_i_prime,
        p_pass,
        info_given_pass,
        threshold,
        p_pass_and_high_info,
        identity_residual: (avg_i_prime - info_given_pass * p_pass).abs(),
        contexts: contexts.len(),
    })
}

/// P[T = pass] for an attack, by enumerating s, b, i and the channel law.
pub fn pass_probability(params: &ProtocolParams, attack: &AttackSpec) -> Result<f64> {
    let len = 2 * params.n;
    let masks = balanced_masks(len);
    let w = 1.0 / (masks.len() as f64 * (1u64 << (2 * len)) as f64);
    let mut p = 0.0;
    for &sm in &masks {
        let s = BitString::from_index(sm.reverse_bits() >> (64 - len), len);
        for b in BitString::all(len) {
            for i in BitString::all(len) {
                for (j, pj) in attack.channel_prob(&i, &b)?.iter().enumerate() {
                    let c = i.xor(&BitString::from_index(j as u64, len));
                    if c.split_by(&s).0.weight() <= params.max_test_errors() {
                        p += w * pj;
                    }
                }
            }
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evemodel::{flip_all_attack, identity_attack, swap_attack};
    use crate::gf2code::Gf2Matrix;
    use proptest::prelude::*;

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, x| acc * (n - x) as f64 / (x + 1) as f64)
    }

    fn params(n: usize, p_a: f64) -> ProtocolParams {
        ProtocolParams::new(n, p_a, None).unwrap()
    }

    #[test]
    fn identity_run() {
        let code =
            CodeSpec::new(Gf2Matrix::parse_rows(&["110", "011"]).unwrap(), Gf2Matrix::parse_rows(&["001"]).unwrap())
                .unwrap();
        let p = ProtocolParams::new(3, 0.1, Some(code)).unwrap();
        for seed in 0..20 {
            let t = run_used_bits(&p, &ClassicalChannel::Identity, &mut rng::stream(seed, "t", 0)).unwrap();
            assert!(t.test_pass && t.c_t.is_zero() && t.c_i.is_zero());
            assert_eq!(t.keys_equal(), Some(true));
            assert_eq!(t.s.weight(), 3);
            t.messages.check_order().unwrap();
        }
        let q = QuantumChannel::new(identity_attack(6).unwrap()).unwrap();
        let t = run_used_bits(&p, &q, &mut rng::stream(1, "q", 0)).unwrap();
        assert!(t.test_pass && t.keys_equal() == Some(true));
    }

    #[test]
    fn flip_all_fails_the_test() {
        let p = params(2, 0.9);
        let q = QuantumChannel::new(flip_all_attack(4).unwrap()).unwrap();
        for seed in 0..20 {
            let t = run_used_bits(&p, &q, &mut rng::stream(seed, "f", 0)).unwrap();
            assert_eq!(t.i.xor(&t.j), t.b.not());
            if !t.b.split_by(&t.s).0.not().is_zero() {
                assert!(!t.test_pass || t.c_t.weight() <= p.max_test_errors());
            }
            let c = ClassicalChannel::FlipAll;
            let t2 = run_used_bits(&p, &c, &mut rng::stream(seed, "f", 0)).unwrap();
            assert_eq!(t2.i.xor(&t2.j), t2.b.not());
        }
        // every z-basis test bit wrong and all test bits in z: fails for p_a < 1
        let p = params(1, 0.5);
        let t = (0..200)
            .map(|s| run_used_bits(&p, &ClassicalChannel::FlipAll, &mut rng::stream(s, "g", 0)).unwrap())
            .find(|t| !t.b.split_by(&t.s).0.get(0))
            .unwrap();
        assert!(!t.test_pass);
    }

    #[test]
    fn swap_error_rate_near_half() {
        let p = params(2, 0.1);
        let q = QuantumChannel::new(swap_attack(4).unwrap()).unwrap();
        let mut errs = 0usize;
        let runs = 400;
        for seed in 0..runs {
            errs += run_used_bits(&p, &q, &mut rng::stream(seed, "swap", 0)).unwrap().c_t.weight();
        }
        let rate = errs as f64 / (2 * runs) as f64;
        // σ = √(0.25/800) ≈ 0.018
        assert!((rate - 0.5).abs() < 0.08, "{rate}");
    }

    #[test]
    fn swap_pass_frequency_matches_binomial() {
        let mut p = params(4, 0.1);
        p.seed = 9;
        let s = monte_carlo(&p, &ClassicalChannel::SwapShadow, 4000).unwrap();
        let want = binom(4, 0) / 16.0;
        let sigma = (want * (1.0 - want) / 4000.0).sqrt();
        assert!((s.pass_frequency - want).abs() < 5.0 * sigma);
    }

    #[test]
    fn abort_probability_matches_binomial_tail() {
        let mut p = params(2, 0.1);
        p.mode = Mode::Full;
        p.seed = 3;
        assert_eq!(p.n_raw(), 9);
        let s = monte_carlo(&p, &ClassicalChannel::Identity, 10_000).unwrap();
        let want: f64 = (0..4).map(|k| binom(9, k)).sum::<f64>() / 512.0;
        assert!((want - 130.0 / 512.0).abs() < 1e-15);
        let sigma = (want * (1.0 - want) / 10_000.0).sqrt();
        assert!((s.abort_frequency - want).abs() < 5.0 * sigma, "{} vs {want}", s.abort_frequency);
    }

    #[test]
    fn full_mode_keys_agree_and_order_holds() {
        let code =
            CodeSpec::new(Gf2Matrix::parse_rows(&["11"]).unwrap(), Gf2Matrix::parse_rows(&["01"]).unwrap()).unwrap();
        let mut p = ProtocolParams::new(2, 0.1, Some(code)).unwrap();
        p.mode = Mode::Full;
        let mut seen = 0;
        for seed in 0..50 {
            let t = run_full_bb84(&p, &ClassicalChannel::Identity, &mut rng::stream(seed, "full", 0)).unwrap();
            t.messages.check_order().unwrap();
            if !t.aborted {
                seen += 1;
                assert_eq!(t.keys_equal(), Some(true));
                assert_eq!(t.i.len(), 4);
            }
        }
        assert!(seen > 20);
        let q = QuantumChannel::new(identity_attack(9).unwrap()).unwrap();
        let t = run_full_bb84(&p, &q, &mut rng::stream(0, "fullq", 0)).unwrap();
        if !t.aborted {
            assert_eq!(t.keys_equal(), Some(true));
        }
    }

    #[test]
    fn lost_qubits_are_filled_in() {
        let mut p = params(2, 0.5);
        p.mode = Mode::Full;
        let c = ClassicalChannel::Lossy { loss: 0.3, flip: 0.0 };
        let t = run_full_bb84(&p, &c, &mut rng::stream(2, "loss", 0)).unwrap();
        if let Some(sift) = &t.sift {
            assert_eq!(sift.j.len(), sift.n_raw);
        }
        assert!(t.aborted || t.j.len() == 4);
        p.loss_tolerant = true;
        let t = run_full_bb84(&p, &c, &mut rng::stream(2, "loss", 0)).unwrap();
        t.messages.check_order().unwrap();
        let sift = t.sift.unwrap();
        assert!(sift.kept.iter().all(|&k| !sift.missing.get(k)));
        let mut bad = params(2, 0.5);
        bad.loss_tolerant = true;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn order_violation_detected() {
        let mut log = MessageLog::default();
        log.push(Party::Alice, MessageKind::Bases, "01");
        log.push(Party::Bob, MessageKind::Receipt, "received");
        assert!(log.check_order().is_err());
    }

    #[test]
    fn determinism() {
        let mut p = params(6, 0.2);
        p.seed = 77;
        let c = ClassicalChannel::Flip(0.1);
        let a = serde_json::to_string(&monte_carlo(&p, &c, 50).unwrap()).unwrap();
        let b = serde_json::to_string(&monte_carlo(&p, &c, 50).unwrap()).unwrap();
        assert_eq!(a, b);
        let t1 = run_used_bits(&p, &c, &mut rng::stream(5, "d", 0)).unwrap();
        let t2 = run_used_bits(&p, &c, &mut rng::stream(5, "d", 0)).unwrap();
        assert_eq!(serde_json::to_string(&t1).unwrap(), serde_json::to_string(&t2).unwrap());
    }

    #[test]
    fn identity_monte_carlo() {
        let s = monte_carlo(&params(8, 0.05), &ClassicalChannel::Identity, 100).unwrap();
        assert_eq!(s.pass_frequency, 1.0);
        assert_eq!(s.bad_event_frequency, 0.0);
        assert!(monte_carlo(&params(8, 0.05), &ClassicalChannel::Identity, 0).is_err());
    }

    #[test]
    fn histogram_is_hypergeometric() {
        for two_n in [8usize, 12] {
            let n = two_n / 2;
            for w in 0..=two_n {
                let h = test_error_histogram(two_n, (1u64 << w) - 1);
                for (k, &count) in h.iter().enumerate() {
                    // k errors among the n test positions
                    let want = if k <= w && w - k <= n {
                        binom(w as u64, k as u64) * binom((two_n - w) as u64, (n - k) as u64)
                    } else {
                        0.0
                    };
                    assert_eq!(count as f64, want);
                }
            }
        }
    }

    #[test]
    fn fixed_error_string_monte_carlo_matches_exhaustive() {
        // 2n = 12, |c| = 4: compare empirical bad-event frequency with the exact value
        let two_n = 12;
        let mut mask = BitString::zeros(two_n);
        for k in [1, 4, 7, 10] {
            mask.set(k, true);
        }
        let mut p = params(6, 1.0 / 6.0);
        p.eps_sec = 0.15;
        p.seed = 4;
        let s = monte_carlo(&p, &ClassicalChannel::ForcedErrors(mask.clone()), 20_000).unwrap();
        let hist = test_error_histogram(two_n, mask.to_index());
        let exact = bad_event_probability(&hist, 4, p.p_allowed, p.eps_sec);
        assert!(exact <= (-6.0 * 0.15f64 * 0.15 / 2.0).exp());
        let sigma = (exact * (1.0 - exact) / 20_000.0).sqrt().max(1e-4);
        assert!((s.bad_event_frequency - exact).abs() < 5.0 * sigma, "{} vs {exact}", s.bad_event_frequency);
    }

    #[test]
    fn hoeffding_small() {
        for eps in [0.1, 0.25, 0.5] {
            assert_eq!(hoeffding_exhaustive(8, eps).violations, 0);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&[0.5, 0.5]), 1.0);
        assert_eq!(mutual_information(&[vec![0.25, 0.25], vec![0.25, 0.25]]), 0.0);
        assert!((mutual_information(&[vec![0.5, 0.0], vec![0.0, 0.5]]) - 1.0).abs() < 1e-15);
    }

    fn cond_mi(t: &[Vec<Vec<f64>>]) -> f64 {
        // I(B;C|A) for t[a][b][c]
        let total: f64 = t.iter().flatten().flatten().sum();
        t.iter()
            .map(|slice| {
                let pa: f64 = slice.iter().flatten().sum::<f64>() / total;
                if pa > 0.0 {
                    pa * mutual_information(slice)
                } else {
                    0.0
                }
            })
            .sum()
    }

    proptest! {
        #[test]
        fn chain_rule(vals in prop::collection::vec(0.0f64..1.0, 12)) {
            // A: 2, B: 3, C: 2
            let t: Vec<Vec<Vec<f64>>> = (0..2).map(|a| (0..3).map(|b| (0..2).map(|c| vals[a * 6 + b * 2 + c]).collect()).collect()).collect();
            let ab_c: Vec<Vec<f64>> = t.iter().flat_map(|s| s.iter().cloned()).collect();
            let a_c: Vec<Vec<f64>> = t.iter().map(|s| (0..2).map(|c| s.iter().map(|r| r[c]).sum()).collect()).collect();
            let lhs = mutual_information(&ab_c);
            let rhs = mutual_information(&a_c) + cond_mi(&t);
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }

        #[test]
        fn reliability_when_errors_are_few(seed in any::<u64>()) {
            // [7,4] Hamming-style code: d = 3 corrects one error
            let code = CodeSpec::new(
                Gf2Matrix::parse_rows(&["1010101", "0110011", "0001111"]).unwrap(),
                Gf2Matrix::parse_rows(&["1110000"]).unwrap(),
            ).unwrap();
            prop_assert_eq!(code.d, Some(3));
            let p = ProtocolParams::new(7, 1.0, Some(code)).unwrap();
            let t = run_used_bits(&p, &ClassicalChannel::Flip(0.1), &mut rng::stream(seed, "rel", 0)).unwrap();
            if t.c_i.weight() <= 1 {
                prop_assert_eq!(t.keys_equal(), Some(true));
            }
        }
    }
}
