use serde::Serialize;

use super::StrategyError;
use crate::algorithms::{moments, AlgorithmOutput, MomentPair};
use crate::numerics::{inverse, RMatrix, Rational};
use crate::protocol::{LabeledPoint, Message, ObservedHistory, Strategy, UpdatePayload};

/// Everything the attacker needs from one probe sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriangulationState {
    /// Probe steps completed.
    pub step: usize,
    /// ρ_0 .. ρ_step.
    pub rho_seq: Vec<Vec<Rational>>,
    pub probes: Vec<LabeledPoint>,
    /// Moments of the attacker's ledger updates sent before ρ_0.
    pub own_ledger_moments: MomentPair,
    pub own_factual_moments: MomentPair,
    /// Whether the final misleading update followed the probes.
    pub deflected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InferenceResult {
    /// Gram of the whole ledger at ρ_0, attacker's earlier updates included.
    pub sigma_matrix: RMatrix,
    pub sigma_vector: RMatrix,
    pub w: RMatrix,
    pub m: RMatrix,
    pub truth_output: AlgorithmOutput,
}

/// Probe `i` (1-based): features e_1 + e_i, target ρ¹ + ρⁱ + 1 (just ρ¹ + 1 for i = 1).
pub fn probe_point(d: usize, i: usize, rho_prev: &[Rational]) -> LabeledPoint {
    let mut x = vec![Rational::zero(); d + 1];
    x[0] = Rational::one();
    x[i - 1] = Rational::one();
    let y = if i == 1 {
        &rho_prev[0] + Rational::one()
    } else {
        &rho_prev[0] + &rho_prev[i - 1] + Rational::one()
    };
    LabeledPoint { x, y }
}

/// The misleading update: intercept-only point one unit above the current fit.
pub fn deflection_point(d: usize, rho: &[Rational]) -> LabeledPoint {
    let mut x = vec![Rational::zero(); d + 1];
    x[0] = Rational::one();
    LabeledPoint {
        x,
        y: &rho[0] + Rational::one(),
    }
}

fn coefficients(o: &AlgorithmOutput, d: usize) -> Option<Vec<Rational>> {
    o.as_coefficients()
        .filter(|c| c.len() == d + 1)
        .map(<[Rational]>::to_vec)
}

fn single(payload: &UpdatePayload) -> Option<&LabeledPoint> {
    match payload.as_labeled() {
        Some([p]) => Some(p),
        _ => None,
    }
}

#[derive(Debug, Clone)]
struct Instance {
    trigger: usize,
    own_factual_trigger: bool,
    rho_seq: Vec<Vec<Rational>>,
    probes: Vec<LabeledPoint>,
    deflected: bool,
    /// Index of the last item belonging to this instance.
    end: usize,
}

impl Instance {
    fn has_rho0(&self) -> bool {
        !self.rho_seq.is_empty()
    }
}

// Walks O_j and records every probe sequence. A sequence starts at the
// owner's factual update or at a broadcast someone else caused; it then
// consumes (own ledger, broadcast) pairs while they match the expected probes.
fn parse(o: &ObservedHistory, d: usize) -> Vec<Instance> {
    let items = &o.items;
    let mut out = Vec::new();
    let mut last_broadcast: Option<&AlgorithmOutput> = None;
    for idx in 0..items.len() {
        let trigger = match &items[idx] {
            Message::Factual { .. } => true,
            Message::Broadcast { output } => {
                last_broadcast = Some(output);
                !o.broadcast_is_own(idx)
            }
            Message::Ledger { .. } => false,
        };
        if !trigger {
            continue;
        }
        let mut inst = Instance {
            trigger: idx,
            own_factual_trigger: matches!(items[idx], Message::Factual { .. }),
            rho_seq: last_broadcast.and_then(|b| coefficients(b, d)).into_iter().collect(),
            probes: Vec::new(),
            deflected: false,
            end: idx,
        };
        let mut k = idx + 1;
        while inst.has_rho0() && k + 1 < items.len() {
            let (Message::Ledger { payload, .. }, Message::Broadcast { output }) = (&items[k], &items[k + 1]) else {
                break;
            };
            let Some(sent) = single(payload) else { break };
            let prev = inst.rho_seq.last().expect("rho_0 present");
            let t = inst.probes.len() + 1;
            if t <= d + 1 {
                if *sent != probe_point(d, t, prev) {
                    break;
                }
                let Some(next) = coefficients(output, d) else { break };
                inst.probes.push(sent.clone());
                inst.rho_seq.push(next);
            } else if t == d + 2 && *sent == deflection_point(d, prev) {
                inst.deflected = true;
            } else {
                break;
            }
            inst.end = k + 1;
            k += 2;
            if inst.deflected {
                break;
            }
        }
        out.push(inst);
    }
    out
}

fn labeled_rows<'a>(payloads: impl Iterator<Item = &'a UpdatePayload>) -> Vec<LabeledPoint> {
    payloads
        .filter_map(UpdatePayload::as_labeled)
        .flat_map(|rows| rows.iter().cloned())
        .collect()
}

fn state_of(o: &ObservedHistory, inst: &Instance, d: usize) -> Result<TriangulationState, StrategyError> {
    let before = o.items[..inst.trigger].iter().filter_map(|m| match m {
        Message::Ledger { payload, .. } => Some(payload),
        _ => None,
    });
    Ok(TriangulationState {
        step: inst.probes.len(),
        rho_seq: inst.rho_seq.clone(),
        probes: inst.probes.clone(),
        own_ledger_moments: moments(&labeled_rows(before), d)?,
        own_factual_moments: moments(&labeled_rows(o.own_factuals()), d)?,
        deflected: inst.deflected,
    })
}

fn outer(x: &[Rational]) -> RMatrix {
    let n = x.len();
    let mut m = RMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            m.set(r, c, &x[r] * &x[c]);
        }
    }
    m
}

fn column(v: &[Rational]) -> RMatrix {
    RMatrix::column(v.to_vec())
}

fn set_column(m: &mut RMatrix, c: usize, v: &RMatrix) {
    for r in 0..m.rows() {
        m.set(r, c, v.get(r, 0).clone());
    }
}

/// Recovers the ledger moments at ρ_0 from the probe responses and turns
/// them into the fit the ledger would hold had the attacker been truthful.
pub fn triangulation_infer(state: &TriangulationState, d: usize) -> Result<InferenceResult, StrategyError> {
    if state.step != d + 1 || state.rho_seq.len() != d + 2 {
        return Err(StrategyError::Inference(format!(
            "need {} completed probes, have {}",
            d + 1,
            state.step
        )));
    }
    let n = d + 1;
    let mut w = RMatrix::zeros(n, n);
    let mut m = RMatrix::zeros(n, n);
    let mut cum = RMatrix::zeros(n, n);
    for i in 1..=n {
        let probe = &state.probes[i - 1];
        let d_i = outer(&probe.x);
        let v_i = column(&probe.x).scale(&probe.y);
        let rho_i = column(&state.rho_seq[i]);
        let delta = rho_i.sub(&column(&state.rho_seq[i - 1]))?;
        let w_i = v_i.sub(&d_i.mul(&rho_i)?)?.sub(&cum.mul(&delta)?)?;
        set_column(&mut w, i - 1, &w_i);
        set_column(&mut m, i - 1, &delta);
        cum = cum.add(&d_i)?;
    }
    let m_inv = inverse(&m).map_err(|_| StrategyError::Inference("M_rho is singular".into()))?;
    let sigma_matrix = w.mul(&m_inv)?;
    let sigma_vector = sigma_matrix.mul(&column(&state.rho_seq[0]))?;
    let truth = MomentPair {
        gram: sigma_matrix.clone(),
        cross: sigma_vector.clone(),
    }
    .sub(&state.own_ledger_moments)?
    .add(&state.own_factual_moments)?;
    let truth_output = match truth.solve()? {
        Some(beta) => AlgorithmOutput::Coefficients(beta),
        None => AlgorithmOutput::Null,
    };
    Ok(InferenceResult {
        sigma_matrix,
        sigma_vector,
        w,
        m,
        truth_output,
    })
}

/// States of every completed probe sequence in `o`, in order.
pub fn triangulation_states(o: &ObservedHistory, d: usize) -> Result<Vec<TriangulationState>, StrategyError> {
    parse(o, d)
        .iter()
        .filter(|inst| inst.probes.len() == d + 1)
        .map(|inst| state_of(o, inst, d))
        .collect()
}

/// Inference function: uses the last completed probe sequence in `o`.
pub fn triangulation_infer_history(o: &ObservedHistory, d: usize) -> Result<InferenceResult, StrategyError> {
    let inst = parse(o, d)
        .into_iter()
        .rev()
        .find(|inst| inst.probes.len() == d + 1)
        .ok_or_else(|| StrategyError::Inference("no completed triangulation in history".into()))?;
    triangulation_infer(&state_of(o, &inst, d)?, d)
}

/// d+1 probes followed by a misleading update when the ledger would
/// otherwise show the true fit.
#[derive(Debug, Clone, Copy)]
pub struct TriangulationAttack {
    pub d: usize,
}

impl Strategy for TriangulationAttack {
    fn respond(&self, o: &ObservedHistory) -> Option<UpdatePayload> {
        let d = self.d;
        let last = o.len().checked_sub(1)?;
        let inst = parse(o, d).pop()?;
        if inst.end != last {
            return None;
        }
        if !inst.has_rho0() {
            // No usable fit to probe against: report own data as it arrives.
            return match &o.items[last] {
                Message::Factual { payload, .. } if inst.own_factual_trigger => Some(payload.clone()),
                _ => None,
            };
        }
        let step = inst.probes.len();
        let rho = inst.rho_seq.last()?;
        if step <= d {
            return Some(UpdatePayload::labeled(vec![probe_point(d, step + 1, rho)]));
        }
        if step == d + 1 && !inst.deflected {
            let inferred = triangulation_infer(&state_of(o, &inst, d).ok()?, d).ok()?;
            if inferred.truth_output == AlgorithmOutput::Coefficients(rho.clone()) {
                return Some(UpdatePayload::labeled(vec![deflection_point(d, rho)]));
            }
        }
        None
    }

    fn name(&self) -> String {
        format!("triangulation(d={})", self.d)
    }
}
