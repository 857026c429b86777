//! Browser demo in the toy group (p = 23, q = 11, g = 2).
//!
//! Each exported function takes plain numbers and returns a JSON string for
//! the page in `www/` to render. The logic lives in the `*_json` functions so
//! it can be exercised natively.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::{json, Value};
use svp_core::sigma::simulate_with_response;
use svp_core::{
    generate_evidence, run_protocol, Challenge, GroupParams, Prover, ProverSession, Salt, Scalar, SecretWitness, Target,
};
use wasm_bindgen::prelude::*;

pub const MAX_ROUNDS: u32 = 64;
/// Upper bound on `trials * max_k` for one soundness curve.
pub const MAX_WORK: u32 = 800_000;

fn scalar(v: u32, params: &GroupParams) -> Result<Scalar, String> {
    Scalar::from_u64(v.into(), params).map_err(|_| format!("{v} is not in Z_{}", params.q()))
}

fn record_for(x: &Scalar, params: &GroupParams) -> svp_core::EvidenceRecord {
    let salt = Salt::new(vec![0; 16]).expect("16-byte salt");
    let witness = SecretWitness::from_scalars(x.clone(), vec![], salt);
    generate_evidence(&witness, params, "demo", 0)
}

/// One proof session: an honest prover holding `x`, or a cheater that only
/// knows `e = g^x` and guesses each challenge.
pub fn prove_json(x: u32, k: u32, honest: bool, seed: u32) -> Result<Value, String> {
    if !(1..=MAX_ROUNDS).contains(&k) {
        return Err(format!("k must be between 1 and {MAX_ROUNDS}"));
    }
    let params = GroupParams::toy();
    let x = scalar(x, &params)?;
    let record = record_for(&x, &params);
    let prover_rng = ChaCha20Rng::seed_from_u64(seed.into());
    let mut verifier_rng = ChaCha20Rng::seed_from_u64(u64::from(seed) + 1);
    let t = if honest {
        let mut p = Prover::new(params.clone(), prover_rng).with_target_witness(Target::Contract, x.clone());
        run_protocol(&mut p, &record, &params, &Target::Contract, k, &mut verifier_rng)
    } else {
        let mut p = Prover::new(params.clone(), prover_rng).with_public_evidence(&record);
        run_protocol(&mut p, &record, &params, &Target::Contract, k, &mut verifier_rng)
    }
    .map_err(|e| e.to_string())?;
    let rounds: Vec<Value> = t
        .rounds
        .iter()
        .map(|r| {
            json!({
                "s": r.commitment.0.value().to_string(),
                "i": r.challenge.bit(),
                "z": r.response.0.value().to_string(),
                "accept": r.verdict.is_accept(),
            })
        })
        .collect();
    Ok(json!({
        "e": record.e.value().to_string(),
        "k": k,
        "honest": honest,
        "accept": t.accepted(),
        "rounds": rounds,
    }))
}

/// Empirical acceptance rate of the guessing cheater for k = 1..=max_k.
pub fn soundness_json(max_k: u32, trials: u32, seed: u32) -> Result<Value, String> {
    if !(1..=24).contains(&max_k) {
        return Err("max k must be between 1 and 24".into());
    }
    if trials == 0 || trials.saturating_mul(max_k) > MAX_WORK {
        return Err(format!("trials must be between 1 and {}", MAX_WORK / max_k));
    }
    let params = GroupParams::toy();
    let record = record_for(&scalar(6, &params)?, &params);
    let mut cheater =
        Prover::new(params.clone(), ChaCha20Rng::seed_from_u64(seed.into())).with_public_evidence(&record);
    let mut verifier_rng = ChaCha20Rng::seed_from_u64(u64::from(seed) + 1);
    let mut points = Vec::new();
    for k in 1..=max_k {
        let mut accepted = 0u32;
        for _ in 0..trials {
            let t = run_protocol(&mut cheater, &record, &params, &Target::Contract, k, &mut verifier_rng)
                .map_err(|e| e.to_string())?;
            accepted += t.accepted() as u32;
        }
        points.push(json!({
            "k": k,
            "accepted": accepted,
            "rate": f64::from(accepted) / f64::from(trials),
            "bound": 0.5f64.powi(k as i32),
        }));
    }
    Ok(json!({"trials": trials, "points": points}))
}

/// Every honest accepting pair `(s, z)` for witness `x` and challenge `bit`,
/// next to every pair the simulator produces without `x`.
pub fn zk_json(x: u32, bit: u32) -> Result<Value, String> {
    let params = GroupParams::toy();
    let x = scalar(x, &params)?;
    let c = u8::try_from(bit).ok().and_then(|b| Challenge::from_bit(b).ok()).ok_or("challenge bit must be 0 or 1")?;
    let e = params.exp_g(&x);
    // toy-group values fit in one digit
    let small = |v: &svp_core::GroupElement| v.value().to_u32_digits().first().copied().unwrap_or(0);
    let mut honest = Vec::new();
    let mut simulated = Vec::new();
    for v in 0..11 {
        let r = scalar(v, &params)?;
        let mut session = ProverSession::new(params.clone(), 1).map_err(|e| e.to_string())?;
        let s = session.commit_with_nonce(r.clone()).map_err(|e| e.to_string())?;
        let z = session.respond(&x, c).map_err(|e| e.to_string())?;
        honest.push((small(&s.0), z.0.value().to_u32_digits().first().copied().unwrap_or(0)));

        let t = simulate_with_response(&e, c, r, &params);
        simulated.push((small(&t.commitment.0), v));
    }
    honest.sort_unstable();
    simulated.sort_unstable();
    let pairs = |list: &[(u32, u32)]| -> Vec<Value> { list.iter().map(|(s, z)| json!({"s": s, "z": z})).collect() };
    let identical = honest == simulated;
    let (honest, simulated) = (pairs(&honest), pairs(&simulated));
    Ok(json!({
        "e": e.value().to_string(),
        "bit": c.bit(),
        "identical": identical,
        "honest": honest,
        "simulated": simulated,
    }))
}

fn to_js(result: Result<Value, String>) -> Result<String, JsError> {
    result.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn prove(x: u32, k: u32, honest: bool, seed: u32) -> Result<String, JsError> {
    to_js(prove_json(x, k, honest, seed))
}

#[wasm_bindgen]
pub fn soundness(max_k: u32, trials: u32, seed: u32) -> Result<String, JsError> {
    to_js(soundness_json(max_k, trials, seed))
}

#[wasm_bindgen]
pub fn zk_distribution(x: u32, bit: u32) -> Result<String, JsError> {
    to_js(zk_json(x, bit))
}
