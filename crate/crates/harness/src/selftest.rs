//! Quick invariant checks runnable from the command line.

use rand::Rng;

use bitfold_core::bfv::{self, add_ciphertexts, decrypt, encrypt, CiphertextTag};
use bitfold_core::packing::{average_unpacked, max_slots, pack_layer, unpack_layer, PackedLayer};
use bitfold_core::{FieldLayout, PlaintextPoly, RingContext, Seed};

use crate::config::ExperimentConfig;
use crate::experiment::run_experiment;
use crate::traffic::predict_traffic;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<String, String>) -> Check {
    match f() {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

/// `scratch` receives the short runs' output files.
pub fn run_selftest(scratch: &std::path::Path) -> Vec<Check> {
    vec![
        check("packing worked example", packing_example),
        check("slot capacity", || {
            let t = bitfold_core::ring::DEFAULT_PLAINTEXT_MODULUS;
            let got = [12, 8, 6].map(|b| max_slots(b, 3, 5, t).map_err(|e| e.to_string()));
            match got {
                [Ok(2), Ok(2), Ok(3)] => Ok("beta 12/8/6 -> 2/2/3 slots".into()),
                other => Err(format!("{other:?}")),
            }
        }),
        check("encryption roundtrip and 5-way sum", || bfv_sum(20)),
        check("encrypted run matches plaintext control", || exactness(scratch)),
    ]
}

fn packing_example() -> Result<String, String> {
    let layout = FieldLayout::new(8, 2, 2, 3, 4, 1 << 40).map_err(|e| e.to_string())?;
    let packed = pack_layer(&[0, 9], &layout).map_err(|e| e.to_string())?;
    if packed.polys()[0][0] != 9216 {
        return Err(format!("packed {}", packed.polys()[0][0]));
    }
    let agg = PackedLayer::from_polys(vec![vec![368_919, 0, 0, 0]], layout, 2).map_err(|e| e.to_string())?;
    let sums = unpack_layer(&agg, 2).map_err(|e| e.to_string())?;
    let avg = average_unpacked(&sums, 3).map_err(|e| e.to_string())?;
    if sums != [279, 360] || avg != [93, 120] {
        return Err(format!("sums {sums:?} avg {avg:?}"));
    }
    Ok("9216; 368919 -> (279, 360) -> (93, 120)".into())
}

fn bfv_sum(trials: usize) -> Result<String, String> {
    let ctx = RingContext::default_params();
    let sk = bfv::keygen(&ctx, &Seed::from_u64(0x5e1f));
    let mut rng = Seed::from_u64(0x5e1f).derive(1, 0).rng();
    let t = ctx.t();
    for trial in 0..trials {
        let mut expected = vec![0u64; ctx.n()];
        let mut cts = Vec::new();
        for i in 0..5u64 {
            let m: Vec<u64> = (0..ctx.n()).map(|_| rng.gen_range(0..t)).collect();
            for (e, x) in expected.iter_mut().zip(&m) {
                *e = (*e + x) % t;
            }
            let mut mask = bfv::prepare_mask(&ctx, &sk, &Seed::from_u64(0x5e1f).derive(2 + trial as u64, i));
            let pt = PlaintextPoly::new(&ctx, m.clone()).map_err(|e| e.to_string())?;
            let ct = encrypt(&ctx, &pt, &mut mask, CiphertextTag { round: 0, index: 0 }).map_err(|e| e.to_string())?;
            if i == 0 && decrypt(&ctx, &ct, &sk).map_err(|e| e.to_string())?.coeffs() != m.as_slice() {
                return Err(format!("roundtrip failed in trial {trial}"));
            }
            cts.push(ct);
        }
        let sum = add_ciphertexts(&ctx, &cts).map_err(|e| e.to_string())?;
        if decrypt(&ctx, &sum, &sk).map_err(|e| e.to_string())?.coeffs() != expected.as_slice() {
            return Err(format!("sum failed in trial {trial}"));
        }
    }
    Ok(format!("{trials} trials"))
}

fn exactness(scratch: &std::path::Path) -> Result<String, String> {
    let base = ExperimentConfig { rounds: 3, clients: 4, sample: 2, ..Default::default() };
    let enc = ExperimentConfig { out: scratch.join("encrypted"), ..base.clone() };
    let ctl = ExperimentConfig { out: scratch.join("control"), plaintext_control: true, ..base };
    let a = run_experiment(&enc).map_err(|e| e.to_string())?;
    let b = run_experiment(&ctl).map_err(|e| e.to_string())?;
    if let Some(r) = (0..a.round_models.len()).find(|&i| !a.round_models[i].bits_eq(&b.round_models[i])) {
        return Err(format!("models diverge at round {}", r + 1));
    }
    let p = predict_traffic(&enc.schema().map_err(|e| e.to_string())?, &*enc.ring().map_err(|e| e.to_string())?);
    for (round, traffic) in &a.ledger.rounds {
        let ups: Vec<u64> = traffic.upload.values().copied().collect();
        if ups.iter().any(|&u| u != p.upload) || traffic.download.values().any(|&d| d != p.download) {
            return Err(format!("round {round}: ledger {traffic:?} vs predicted {p:?}"));
        }
    }
    Ok(format!("{} rounds bit-identical, traffic {} B up / {} B down", a.round_models.len(), p.upload, p.download))
}
