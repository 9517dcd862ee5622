//! Mølmer–Sørensen gate unitaries, the 24-element Clifford catalogue on the
//! even-parity subspace, and SLERB sequence synthesis.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SlerbError};
use crate::qcore::{c, CMatrix, GateUnitary, C64, PROJECTIVE_TOL};

pub type Block2 = Matrix2<C64>;

/// Phases of the catalogue generators, giving ±x, ±y rotations on S_RB.
pub const CATALOGUE_PHASES: [f64; 4] = [0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4];
pub const CATALOGUE_SIZE: usize = 24;
const MAX_WORD_LEN: usize = 5;

/// Average MS gates per catalogue Clifford, as a reduced fraction.
pub const AVG_PULSES: (u32, u32) = (13, 6);

/// Per-gate error from an average Clifford infidelity.
pub fn per_gate_error(clifford_infidelity: f64) -> f64 {
    clifford_infidelity * AVG_PULSES.1 as f64 / AVG_PULSES.0 as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsPulse {
    pub theta: f64,
    pub phi: f64,
}

impl MsPulse {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta,
            phi: phi.rem_euclid(2.0 * PI),
        }
    }

    pub fn catalogue(phase_index: usize) -> Self {
        Self::new(FRAC_PI_2, CATALOGUE_PHASES[phase_index])
    }

    /// Index into `CATALOGUE_PHASES` if this is a catalogue pulse.
    pub fn phase_index(&self) -> Option<usize> {
        if (self.theta - FRAC_PI_2).abs() > 1e-12 {
            return None;
        }
        CATALOGUE_PHASES.iter().position(|&p| (p - self.phi).abs() < 1e-9)
    }

    pub fn unitary(&self) -> GateUnitary {
        ms_unitary(self.theta, self.phi)
    }
}

/// MS unitary in the basis |00⟩, |01⟩, |10⟩, |11⟩.
pub fn ms_unitary(theta: f64, phi: f64) -> GateUnitary {
    let (s, co) = (theta / 2.0).sin_cos();
    let mi = c(0.0, -1.0);
    let mut m = CMatrix::zeros(4, 4);
    for k in 0..4 {
        m[(k, k)] = c(co, 0.0);
    }
    m[(0, 3)] = mi * C64::from_polar(s, -2.0 * phi);
    m[(3, 0)] = mi * C64::from_polar(s, 2.0 * phi);
    m[(1, 2)] = mi * s;
    m[(2, 1)] = mi * s;
    GateUnitary::from_trusted(m)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RbRestriction {
    pub block: Block2,
    /// Frobenius norm of the S_RB ↔ S_leak coupling blocks.
    pub leakage_norm: f64,
}

const RB: [usize; 2] = [0, 3];
const LEAK: [usize; 2] = [1, 2];

pub fn restrict_to_rb(u: &GateUnitary) -> RbRestriction {
    let m = u.matrix();
    let block = Block2::from_fn(|i, j| m[(RB[i], RB[j])]);
    let mut norm2 = 0.0;
    for &i in &RB {
        for &j in &LEAK {
            norm2 += m[(i, j)].norm_sqr() + m[(j, i)].norm_sqr();
        }
    }
    RbRestriction {
        block,
        leakage_norm: norm2.sqrt(),
    }
}

pub fn block_projective_distance(a: &Block2, b: &Block2) -> f64 {
    1.0 - (a.adjoint() * b).trace().norm() / 2.0
}

#[derive(Clone, Debug)]
pub struct CliffordEntry {
    pub id: usize,
    pub pulses: Vec<MsPulse>,
    pub rb_action: Block2,
    pub full_unitary: GateUnitary,
}

#[derive(Clone, Debug)]
pub struct CliffordCatalogue {
    entries: Vec<CliffordEntry>,
    /// `mul[i][j]` is the entry acting as `C_i · C_j` (`C_j` first).
    mul: Vec<[usize; CATALOGUE_SIZE]>,
    inv: [usize; CATALOGUE_SIZE],
}

impl CliffordCatalogue {
    pub fn entries(&self) -> &[CliffordEntry] {
        &self.entries
    }

    pub fn entry(&self, id: usize) -> &CliffordEntry {
        &self.entries[id]
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn multiply(&self, i: usize, j: usize) -> usize {
        self.mul[i][j]
    }

    pub fn inverse(&self, i: usize) -> usize {
        self.inv[i]
    }

    pub fn multiplication_table(&self) -> &[[usize; CATALOGUE_SIZE]] {
        &self.mul
    }

    /// Total pulse count over the catalogue, and the reduced average.
    pub fn avg_pulses(&self) -> (u32, u32) {
        let total: usize = self.entries.iter().map(|e| e.pulses.len()).sum();
        let n = self.entries.len();
        let g = gcd(total, n);
        ((total / g) as u32, (n / g) as u32)
    }

    pub fn find(&self, block: &Block2) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| block_projective_distance(&e.rb_action, block) < PROJECTIVE_TOL)
    }

    /// Catalogue id of the composed action of `ids` applied in order.
    pub fn compose(&self, ids: &[usize]) -> usize {
        ids.iter().fold(0, |acc, &id| self.mul[id][acc])
    }

    /// The entry acting as σ_x on S_RB (maps |00⟩ to |11⟩).
    pub fn pauli_x(&self) -> usize {
        let x = Block2::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        self.find(&x).expect("catalogue contains σ_x")
    }

    /// One line per entry: id, pulse count, phase indices.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let word: Vec<String> = e.pulses.iter().map(|p| p.phase_index().unwrap().to_string()).collect();
            out.push_str(&format!("{} {} {}\n", e.id, e.pulses.len(), word.join(",")));
        }
        out
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Breadth-first search over MS words, keeping the first word for each new
/// projective action on S_RB. Words are enumerated in lexicographic order of
/// phase indices; the first pulse of a word is applied first.
pub fn build_clifford_catalogue() -> Result<CliffordCatalogue> {
    let gens: Vec<GateUnitary> = (0..4).map(|k| MsPulse::catalogue(k).unitary()).collect();
    let mut entries = vec![CliffordEntry {
        id: 0,
        pulses: Vec::new(),
        rb_action: Block2::identity(),
        full_unitary: GateUnitary::identity(4),
    }];
    // Words of the previous length with their unitaries, in lexicographic order.
    let mut frontier: Vec<(Vec<usize>, GateUnitary)> = vec![(Vec::new(), GateUnitary::identity(4))];
    for _len in 1..=MAX_WORD_LEN {
        if entries.len() == CATALOGUE_SIZE {
            break;
        }
        let mut next = Vec::with_capacity(frontier.len() * 4);
        for (word, u) in &frontier {
            for (k, g) in gens.iter().enumerate() {
                let mut w = word.clone();
                w.push(k);
                next.push((w, g.then_after(u)));
            }
        }
        for (word, u) in &next {
            if entries.len() == CATALOGUE_SIZE {
                break;
            }
            let r = restrict_to_rb(u);
            let is_new = entries
                .iter()
                .all(|e| block_projective_distance(&e.rb_action, &r.block) >= PROJECTIVE_TOL);
            if is_new {
                entries.push(CliffordEntry {
                    id: entries.len(),
                    pulses: word.iter().map(|&k| MsPulse::catalogue(k)).collect(),
                    rb_action: r.block,
                    full_unitary: u.clone(),
                });
            }
        }
        frontier = next;
    }
    if entries.len() < CATALOGUE_SIZE {
        return Err(SlerbError::CatalogueIncomplete {
            found: entries.len(),
            max_len: MAX_WORD_LEN,
        });
    }

    let find = |b: &Block2| {
        entries
            .iter()
            .position(|e| block_projective_distance(&e.rb_action, b) < PROJECTIVE_TOL)
    };
    let mut mul = vec![[0usize; CATALOGUE_SIZE]; CATALOGUE_SIZE];
    let mut inv = [0usize; CATALOGUE_SIZE];
    for i in 0..CATALOGUE_SIZE {
        for j in 0..CATALOGUE_SIZE {
            let p = entries[i].rb_action * entries[j].rb_action;
            mul[i][j] = find(&p).ok_or_else(|| SlerbError::CatalogueIncomplete {
                found: entries.len(),
                max_len: MAX_WORD_LEN,
            })?;
            if mul[i][j] == 0 {
                inv[j] = i;
            }
        }
    }
    Ok(CliffordCatalogue { entries, mul, inv })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisState {
    #[serde(rename = "00")]
    S00,
    #[serde(rename = "01")]
    S01,
    #[serde(rename = "10")]
    S10,
    #[serde(rename = "11")]
    S11,
}

impl BasisState {
    pub const ALL: [BasisState; 4] = [Self::S00, Self::S01, Self::S10, Self::S11];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::S00 => "00",
            Self::S01 => "01",
            Self::S10 => "10",
            Self::S11 => "11",
        };
        f.write_str(s)
    }
}

impl FromStr for BasisState {
    type Err = SlerbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "00" => Ok(Self::S00),
            "01" => Ok(Self::S01),
            "10" => Ok(Self::S10),
            "11" => Ok(Self::S11),
            other => Err(SlerbError::Parse(format!("unknown basis state '{other}'"))),
        }
    }
}

/// Pauli-frame target of a sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "00")]
    Ket00,
    #[serde(rename = "11")]
    Ket11,
}

impl Target {
    pub fn state(self) -> BasisState {
        match self {
            Target::Ket00 => BasisState::S00,
            Target::Ket11 => BasisState::S11,
        }
    }

    pub fn other(self) -> BasisState {
        match self {
            Target::Ket00 => BasisState::S11,
            Target::Ket11 => BasisState::S00,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.state().fmt(f)
    }
}

impl FromStr for Target {
    type Err = SlerbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.parse::<BasisState>()? {
            BasisState::S00 => Ok(Target::Ket00),
            BasisState::S11 => Ok(Target::Ket11),
            other => Err(SlerbError::Parse(format!("target must be 00 or 11, got {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlerbSequence {
    pub clifford_ids: Vec<usize>,
    pub pulse_schedule: Vec<MsPulse>,
    pub target: Target,
    pub seed: Option<u64>,
}

impl SlerbSequence {
    /// Number of random Cliffords, excluding the inversion.
    pub fn length(&self) -> usize {
        self.clifford_ids.len() - 1
    }
}

/// Draws `l` uniform Cliffords and appends the inversion that maps |00⟩ to a
/// uniformly chosen Pauli-frame target.
pub fn sample_sequence<R: Rng + ?Sized>(catalogue: &CliffordCatalogue, l: usize, rng: &mut R) -> SlerbSequence {
    let mut ids: Vec<usize> = (0..l).map(|_| rng.random_range(0..catalogue.len())).collect();
    let target = if rng.random::<bool>() {
        Target::Ket11
    } else {
        Target::Ket00
    };
    let undo = catalogue.inverse(catalogue.compose(&ids));
    let last = match target {
        Target::Ket00 => undo,
        Target::Ket11 => catalogue.multiply(catalogue.pauli_x(), undo),
    };
    ids.push(last);
    let pulse_schedule = ids
        .iter()
        .flat_map(|&id| catalogue.entry(id).pulses.iter().copied())
        .collect();
    SlerbSequence {
        clifford_ids: ids,
        pulse_schedule,
        target,
        seed: None,
    }
}

/// Like [`sample_sequence`] with a dedicated generator seeded from `seed`.
pub fn sample_sequence_seeded(catalogue: &CliffordCatalogue, l: usize, seed: u64) -> SlerbSequence {
    let mut rng = crate::seeding::rng_from_seed(seed);
    let mut seq = sample_sequence(catalogue, l, &mut rng);
    seq.seed = Some(seed);
    seq
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutcomeLabel {
    Survival,
    Flip,
    Leak,
}

pub fn ideal_survival_label(seq: &SlerbSequence, outcome: BasisState) -> OutcomeLabel {
    match outcome {
        BasisState::S01 | BasisState::S10 => OutcomeLabel::Leak,
        s if s == seq.target.state() => OutcomeLabel::Survival,
        _ => OutcomeLabel::Flip,
    }
}

/// Line-oriented record: `seed l target ids theta:phi;theta:phi;...`, angles
/// with 12 significant digits. A missing seed is written as `-`.
pub fn export_sequence(seq: &SlerbSequence) -> String {
    let seed = seq.seed.map_or("-".to_string(), |s| s.to_string());
    let ids: Vec<String> = seq.clifford_ids.iter().map(|i| i.to_string()).collect();
    let pulses: Vec<String> = seq
        .pulse_schedule
        .iter()
        .map(|p| format!("{:.11e}:{:.11e}", p.theta, p.phi))
        .collect();
    let pulses = if pulses.is_empty() {
        "-".to_string()
    } else {
        pulses.join(";")
    };
    format!("{seed} {} {} {} {pulses}", seq.length(), seq.target, ids.join(","))
}

pub fn parse_sequence(line: &str) -> Result<SlerbSequence> {
    let bad = |what: &str| SlerbError::Parse(format!("sequence record: {what} in '{line}'"));
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(bad("expected 5 fields"));
    }
    let seed = match fields[0] {
        "-" => None,
        s => Some(s.parse::<u64>().map_err(|_| bad("bad seed"))?),
    };
    let l: usize = fields[1].parse().map_err(|_| bad("bad length"))?;
    let target: Target = fields[2].parse()?;
    let clifford_ids = fields[3]
        .split(',')
        .map(|s| s.parse::<usize>().map_err(|_| bad("bad id")))
        .collect::<Result<Vec<_>>>()?;
    if clifford_ids.len() != l + 1 {
        return Err(bad("id count does not match length"));
    }
    let pulse_schedule = if fields[4] == "-" {
        Vec::new()
    } else {
        fields[4]
            .split(';')
            .map(|p| {
                let (t, f) = p.split_once(':').ok_or_else(|| bad("bad pulse"))?;
                let theta = t.parse::<f64>().map_err(|_| bad("bad theta"))?;
                let phi = f.parse::<f64>().map_err(|_| bad("bad phi"))?;
                Ok(MsPulse::new(theta, phi))
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(SlerbSequence {
        clifford_ids,
        pulse_schedule,
        target,
        seed,
    })
}
