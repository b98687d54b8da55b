use std::collections::HashSet;
use std::sync::Arc;
use std::time::Duration;

use bitfold_core::bfv::{add_ciphertexts, decrypt};
use bitfold_core::packing::{pack_layer, quantize_layer, unpack_layer, PackedLayer};
use bitfold_core::ring::{DEFAULT_DEGREE, DEFAULT_PLAINTEXT_MODULUS};
use bitfold_core::{FieldLayout, RingContext, Seed};
use bitfold_protocol::transport::{Delivery, LinkCounters};
use bitfold_protocol::*;

struct Drift;

impl TrainerHook for Drift {
    fn train(&self, client: u64, round: u64, global: &Model) -> Model {
        let shift = 0.01 * (client as f64 + 1.0) * (round as f64).sin();
        Model::new(
            global
                .layers
                .iter()
                .map(|l| l.iter().enumerate().map(|(i, w)| w + shift + 1e-3 * (i % 7) as f64).collect())
                .collect(),
        )
    }
}

fn ctx() -> Arc<RingContext> {
    Arc::new(RingContext::default_params())
}

fn schema(sizes: &[usize], max_clients: u64) -> ModelSchema {
    let layout = FieldLayout::with_max_slots(8, 3, max_clients, DEFAULT_DEGREE, DEFAULT_PLAINTEXT_MODULUS).unwrap();
    ModelSchema::new(
        sizes.iter().enumerate().map(|(i, &n)| LayerSpec { name: format!("l{i}"), weight_count: n, layout }).collect(),
    )
    .unwrap()
}

fn initial(s: &ModelSchema) -> Model {
    Model::new(
        s.layers()
            .iter()
            .map(|l| (0..l.weight_count).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect())
            .collect(),
    )
}

fn federation(sizes: &[usize], u: usize, m: usize, seed: u64) -> (Federation, PlaintextControl) {
    let s = schema(sizes, m as u64);
    let config = FederationConfig::new(u, m, Seed::from_u64(seed));
    let init = initial(&s);
    let control = PlaintextControl::new(s.clone(), init.clone(), config).unwrap();
    let fed = Federation::new(ctx(), s, init, config, Box::new(MemoryTransport::new(0..u as u64))).unwrap();
    (fed, control)
}

fn client(ctx: &Arc<RingContext>, s: &ModelSchema, id: u64, model: Model) -> Client {
    let sk = shared_secret_key(ctx, &Seed::from_u64(99));
    Client::new(id, ctx.clone(), Arc::new(s.clone()), sk, Seed::from_u64(1000 + id), model, QuantPadding::default())
        .unwrap()
}

fn decrypt_layer(ctx: &RingContext, s: &ModelSchema, cts: &[bitfold_core::Ciphertext]) -> Vec<u64> {
    let sk = shared_secret_key(ctx, &Seed::from_u64(99));
    let spec = &s.layers()[0];
    let polys = cts.iter().map(|c| decrypt(ctx, c, &sk).unwrap().into_coeffs()).collect();
    unpack_layer(&PackedLayer::from_polys(polys, spec.layout, spec.weight_count).unwrap(), spec.weight_count).unwrap()
}

fn quantized(s: &ModelSchema, m: &Model) -> Vec<u64> {
    let p = quant_params(s, m, QuantPadding::default()).unwrap();
    quantize_layer(&m.layers[0], &p[0])
}

#[test]
fn identity_update_decrypts_to_quantized_global() {
    let ctx = ctx();
    let s = schema(&[1000], 5);
    let init = initial(&s);
    let mut c = client(&ctx, &s, 0, init.clone());
    let (update, t) = c.client_round(1, &IdentityTrainer).unwrap();
    assert_eq!(update.cts.len(), 1);
    assert_eq!(decrypt_layer(&ctx, &s, &update.cts), quantized(&s, &init));
    assert!(t.encrypt > Duration::ZERO);
}

#[test]
fn small_layer_uses_one_ciphertext() {
    let ctx = ctx();
    let s = schema(&[10], 5);
    let mut c = client(&ctx, &s, 0, initial(&s));
    let (update, _) = c.client_round(1, &IdentityTrainer).unwrap();
    assert_eq!(update.cts.len(), 1);
}

#[test]
fn identical_clients_encrypt_differently_but_sum_exactly() {
    let ctx = ctx();
    let s = schema(&[500], 5);
    let init = initial(&s);
    let (u1, _) = client(&ctx, &s, 0, init.clone()).client_round(1, &IdentityTrainer).unwrap();
    let (u2, _) = client(&ctx, &s, 1, init.clone()).client_round(1, &IdentityTrainer).unwrap();
    assert_ne!(u1.cts[0], u2.cts[0]);
    let sum = add_ciphertexts(&ctx, &[u1.cts[0].clone(), u2.cts[0].clone()]).unwrap();
    let q = quantized(&s, &init);
    let expected: Vec<u64> = q.iter().map(|x| 2 * x).collect();
    assert_eq!(decrypt_layer(&ctx, &s, &[sum]), expected);
}

#[test]
fn server_sums_updates() {
    let ctx = ctx();
    let s = schema(&[300], 5);
    let init = initial(&s);
    let server = Server::new(ctx.clone(), Arc::new(s.clone()));
    let updates: Vec<_> =
        (0..3).map(|i| client(&ctx, &s, i, init.clone()).client_round(4, &Drift).unwrap().0).collect();

    let single = server.server_aggregate(4, &updates[..1], 1).unwrap();
    assert_eq!(single.participants, 1);
    assert_eq!(decrypt_layer(&ctx, &s, &single.cts), decrypt_layer(&ctx, &s, &updates[0].cts));

    let b = server.server_aggregate(4, &updates, 3).unwrap();
    let mut expected = vec![0u64; 300];
    for u in &updates {
        for (e, x) in expected.iter_mut().zip(decrypt_layer(&ctx, &s, &u.cts)) {
            *e += x;
        }
    }
    assert_eq!(decrypt_layer(&ctx, &s, &b.cts), expected);
}

#[test]
fn server_rejects_inconsistent_updates() {
    let ctx = ctx();
    let s = schema(&[100], 5);
    let init = initial(&s);
    let server = Server::new(ctx.clone(), Arc::new(s.clone()));
    let a = client(&ctx, &s, 0, init.clone()).client_round(2, &Drift).unwrap().0;
    let b = client(&ctx, &s, 1, init.clone()).client_round(3, &Drift).unwrap().0;
    assert!(matches!(server.server_aggregate(2, &[a.clone(), b], 2), Err(ProtocolError::RoundMismatch { .. })));
    assert!(matches!(server.server_aggregate(2, std::slice::from_ref(&a), 2), Err(ProtocolError::RoundAborted { .. })));

    let mut c = client(&ctx, &s, 1, init.clone()).client_round(2, &Drift).unwrap().0;
    c.quant_meta[0].hi += 1.0;
    assert!(matches!(
        server.server_aggregate(2, &[a.clone(), c], 2),
        Err(ProtocolError::QuantMetaMismatch { layer: 0 })
    ));
    let too_many: Vec<_> =
        (0..6).map(|i| client(&ctx, &s, i, init.clone()).client_round(2, &Drift).unwrap().0).collect();
    assert!(matches!(
        server.server_aggregate(2, &too_many, 6),
        Err(ProtocolError::TooManyParticipants { participants: 6, bound: 5 })
    ));
}

#[test]
fn client_rejects_foreign_quantization_range() {
    let ctx = ctx();
    let s = schema(&[100], 5);
    let init = initial(&s);
    let server = Server::new(ctx.clone(), Arc::new(s.clone()));
    let u = client(&ctx, &s, 0, init.clone()).client_round(1, &Drift).unwrap().0;
    let mut b = server.server_aggregate(1, &[u], 1).unwrap();
    b.quant_meta[0].lo -= 0.5;
    let mut c = client(&ctx, &s, 1, init);
    assert!(matches!(c.client_apply(&b), Err(ProtocolError::QuantMetaMismatch { layer: 0 })));
}

#[test]
fn encrypted_rounds_match_plaintext_control() {
    let (mut fed, mut control) = federation(&[5000, 17], 10, 5, 7);
    for _ in 0..4 {
        let a = fed.run_round(&Drift).unwrap();
        let b = control.run_round(&Drift).unwrap();
        assert_eq!(a.selected, b.selected);
        assert!(a.model.bits_eq(&b.model), "round {}", a.round);
    }
    assert_eq!(fed.round(), 4);
}

#[test]
fn only_selected_clients_upload() {
    let (mut fed, _) = federation(&[100], 10, 5, 8);
    let out = fed.run_round(&Drift).unwrap();
    for id in 0..10u64 {
        let up = out.traffic.upload_of(id);
        assert_eq!(up > 0, out.selected.contains(&id), "client {id}");
        assert!(out.traffic.download_of(id) > 0);
    }
    let sizes: HashSet<u64> = out.selected.iter().map(|&i| out.traffic.upload_of(i)).collect();
    assert_eq!(sizes.len(), 1);
}

fn ledger_matches(ledger: &TrafficLedger, counters: &LinkCounters) {
    let mut from_ledger = LinkCounters::new();
    for r in std::iter::once(&ledger.setup).chain(ledger.rounds.values()) {
        for (&c, &b) in &r.upload {
            *from_ledger.entry((Endpoint::Client(c), Endpoint::Server)).or_default() += b;
        }
        for (&c, &b) in &r.download {
            *from_ledger.entry((Endpoint::Server, Endpoint::Client(c))).or_default() += b;
        }
    }
    assert_eq!(&from_ledger, counters);
}

#[test]
fn ledger_has_zero_drift_from_transport() {
    let (mut fed, _) = federation(&[2000, 3], 6, 3, 9);
    for _ in 0..10 {
        fed.run_round(&Drift).unwrap();
    }
    ledger_matches(fed.ledger(), fed.transport().delivered());
}

#[test]
fn masks_never_repeat_across_the_run() {
    let (mut fed, _) = federation(&[9000], 10, 5, 10);
    let rounds = 6;
    for _ in 0..rounds {
        fed.run_round(&Drift).unwrap();
    }
    let mut all = HashSet::new();
    let mut count = 0;
    for c in fed.clients() {
        for m in c.masks_used() {
            all.insert(*m);
            count += 1;
        }
    }
    assert_eq!(count, rounds * 5 * fed.schema().total_polys());
    assert_eq!(all.len(), count);
}

#[test]
fn server_holds_no_key_material() {
    let (fed, _) = federation(&[10], 3, 2, 11);
    let dump = format!("{:?}", fed.server());
    assert!(!dump.contains("SecretKey"));
    assert!(!dump.contains("sk"));
}

#[test]
fn socket_transport_runs_rounds() {
    let s = schema(&[3000], 3);
    let config = FederationConfig::new(4, 3, Seed::from_u64(12)).with_timeout(Duration::from_secs(20));
    let init = initial(&s);
    let mut control = PlaintextControl::new(s.clone(), init.clone(), config).unwrap();
    let transport = SocketTransport::connect(0..4).unwrap();
    let mut fed = Federation::new(ctx(), s, init, config, Box::new(transport)).unwrap();
    for _ in 0..3 {
        let a = fed.run_round(&Drift).unwrap();
        assert!(a.model.bits_eq(&control.run_round(&Drift).unwrap().model));
    }
    ledger_matches(fed.ledger(), fed.transport().delivered());
}

/// Silently loses every frame sent by one client.
struct Lossy {
    inner: MemoryTransport,
    drop_from: u64,
}

impl Transport for Lossy {
    fn send(&mut self, from: Endpoint, to: Endpoint, frame: Vec<u8>) -> Result<(), TransportError> {
        if from == Endpoint::Client(self.drop_from) {
            return Ok(());
        }
        self.inner.send(from, to, frame)
    }

    fn recv(&mut self, at: Endpoint, timeout: Duration) -> Result<Delivery, TransportError> {
        self.inner.recv(at, timeout)
    }

    fn delivered(&self) -> &LinkCounters {
        self.inner.delivered()
    }
}

#[test]
fn missing_update_aborts_the_round() {
    let s = schema(&[100], 5);
    let config = FederationConfig::new(5, 5, Seed::from_u64(13));
    let init = initial(&s);
    let lossy = Lossy { inner: MemoryTransport::new(0..5), drop_from: 2 };
    let mut fed = Federation::new(ctx(), s, init.clone(), config, Box::new(lossy)).unwrap();
    assert!(matches!(fed.run_round(&Drift), Err(ProtocolError::RoundAborted { round: 1, received: 4, expected: 5 })));
    assert!(fed.model().bits_eq(&init));
    assert_eq!(fed.round(), 0);
    ledger_matches(fed.ledger(), fed.transport().delivered());
}

#[test]
fn setup_rejects_bad_configuration() {
    let s = schema(&[10], 3);
    let init = initial(&s);
    let c = ctx();
    let t = || Box::new(MemoryTransport::new(0..10)) as Box<dyn Transport>;
    assert!(Federation::new(c.clone(), s.clone(), init.clone(), FederationConfig::new(10, 4, Seed::from_u64(1)), t())
        .is_err());
    assert!(Federation::new(c.clone(), s.clone(), init.clone(), FederationConfig::new(2, 3, Seed::from_u64(1)), t())
        .is_err());
    assert!(Federation::new(
        c,
        s,
        Model::new(vec![vec![0.0; 9]]),
        FederationConfig::new(10, 3, Seed::from_u64(1)),
        t()
    )
    .is_err());
}

#[test]
fn packing_roundtrip_through_schema_layout() {
    let s = schema(&[9000], 5);
    let ints: Vec<u64> = (0..9000).map(|i| i % 256).collect();
    let packed = pack_layer(&ints, &s.layers()[0].layout).unwrap();
    assert_eq!(packed.polys().len(), s.total_polys());
    assert_eq!(unpack_layer(&packed, 9000).unwrap(), ints);
}
