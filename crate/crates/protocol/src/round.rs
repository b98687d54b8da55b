//! Round orchestration over a transport: setup, local computation, aggregation,
//! broadcast, and model update.

use std::sync::Arc;
use std::time::Duration;

use bitfold_core::{RingContext, Seed};

use crate::client::{shared_secret_key, Client};
use crate::error::ProtocolError;
use crate::ledger::{RoundTraffic, TrafficLedger};
use crate::model::{Model, ModelSchema};
use crate::pipeline::{timed, QuantPadding, StageTimings, TrainerHook};
use crate::select::select_clients;
use crate::server::Server;
use crate::transport::{Endpoint, Transport, TransportError};
use crate::wire::{decode_message, encode_message, Abort, AggregateBroadcast, Message, ModelInit};

const STREAM_SHARED: u64 = 0x736861726564;
const STREAM_CLIENT: u64 = 0x636c69656e74;

#[derive(Debug, Clone, Copy)]
pub struct FederationConfig {
    /// Total clients `U`.
    pub clients: usize,
    /// Clients aggregated per round `M`.
    pub sample: usize,
    pub seed: Seed,
    pub padding: QuantPadding,
    /// How long the server waits for each update.
    pub timeout: Duration,
}

impl FederationConfig {
    pub fn new(clients: usize, sample: usize, seed: Seed) -> Self {
        Self { clients, sample, seed, padding: QuantPadding::default(), timeout: Duration::from_secs(30) }
    }

    pub fn with_padding(mut self, padding: QuantPadding) -> Self {
        self.padding = padding;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    fn check(&self) -> Result<(), ProtocolError> {
        if self.sample == 0 || self.sample > self.clients {
            return Err(ProtocolError::InvalidSelection { total: self.clients, sample: self.sample });
        }
        Ok(())
    }
}

/// What one completed round produced.
#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub round: u64,
    pub selected: Vec<u64>,
    pub model: Model,
    pub traffic: RoundTraffic,
    /// Client stages are averaged over the clients that ran them.
    pub timings: StageTimings,
}

pub struct Federation {
    ctx: Arc<RingContext>,
    schema: Arc<ModelSchema>,
    config: FederationConfig,
    server: Server,
    clients: Vec<Client>,
    transport: Box<dyn Transport>,
    ledger: TrafficLedger,
    model: Model,
    round: u64,
}

impl std::fmt::Debug for Federation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Federation")
            .field("round", &self.round)
            .field("server", &self.server)
            .field("clients", &self.clients)
            .finish()
    }
}

impl Federation {
    /// Setup: every client derives the shared key and receives `W^(0)` over the transport.
    pub fn new(
        ctx: Arc<RingContext>,
        schema: ModelSchema,
        initial: Model,
        config: FederationConfig,
        mut transport: Box<dyn Transport>,
    ) -> Result<Self, ProtocolError> {
        config.check()?;
        schema.check_model(&initial)?;
        if config.sample as u64 > schema.max_clients() {
            return Err(ProtocolError::TooManyParticipants {
                participants: config.sample as u64,
                bound: schema.max_clients(),
            });
        }
        let schema = Arc::new(schema);
        let shared = config.seed.derive(STREAM_SHARED, 0);
        let sk = shared_secret_key(&ctx, &shared);
        let mut ledger = TrafficLedger::default();

        let init = encode_message(&Message::ModelInit(ModelInit { round: 0, layers: initial.layers.clone() }));
        let ids: Vec<u64> = (0..config.clients as u64).collect();
        for &id in &ids {
            transport.send(Endpoint::Server, Endpoint::Client(id), init.clone())?;
        }
        let mut clients = Vec::with_capacity(ids.len());
        for &id in &ids {
            let d = transport.recv(Endpoint::Client(id), config.timeout)?;
            ledger.record_download(None, id, d.bytes.len());
            let Message::ModelInit(m) = decode_message(&d.bytes, &ctx)? else {
                return Err(ProtocolError::UnexpectedMessage(format!("{} during setup", d.from)));
            };
            clients.push(Client::new(
                id,
                ctx.clone(),
                schema.clone(),
                sk.clone(),
                config.seed.derive(STREAM_CLIENT, id),
                Model::new(m.layers),
                config.padding,
            )?);
        }
        let server = Server::new(ctx.clone(), schema.clone());
        Ok(Self { ctx, schema, config, server, clients, transport, ledger, model: initial, round: 0 })
    }

    pub fn schema(&self) -> &ModelSchema {
        &self.schema
    }

    pub fn config(&self) -> &FederationConfig {
        &self.config
    }

    /// The global model every client agrees on.
    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Rounds completed so far.
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn clients(&self) -> &[Client] {
        &self.clients
    }

    pub fn server(&self) -> &Server {
        &self.server
    }

    pub fn ledger(&self) -> &TrafficLedger {
        &self.ledger
    }

    pub fn transport(&self) -> &dyn Transport {
        self.transport.as_ref()
    }

    pub fn run_round(&mut self, trainer: &dyn TrainerHook) -> Result<RoundOutcome, ProtocolError> {
        let round = self.round + 1;
        let selected = select_clients(self.config.clients, self.config.sample, &self.config.seed, round)?;
        let mut timings = StageTimings::default();

        // Local computation on the selected clients, in parallel.
        let results: Vec<_> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .clients
                .iter_mut()
                .filter(|c| selected.contains(&c.id()))
                .map(|c| s.spawn(move || c.client_round(round, trainer)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("client thread panicked")).collect()
        });
        for r in results {
            let (update, t) = r?;
            timings += t.div(selected.len() as u32);
            let id = update.client_id;
            let frame = encode_message(&Message::Update(update));
            self.transport.send(Endpoint::Client(id), Endpoint::Server, frame)?;
        }

        // Server: collect exactly M updates or abort.
        let mut updates = Vec::with_capacity(selected.len());
        while updates.len() < selected.len() {
            let d = match self.transport.recv(Endpoint::Server, self.config.timeout) {
                Ok(d) => d,
                Err(TransportError::Timeout(_)) => {
                    let received = updates.len();
                    self.abort(round, format!("received {received} of {} updates", selected.len()))?;
                    return Err(ProtocolError::RoundAborted { round, received, expected: selected.len() });
                }
                Err(e) => return Err(e.into()),
            };
            let Endpoint::Client(from) = d.from else {
                return Err(ProtocolError::UnexpectedMessage(d.from.to_string()));
            };
            self.ledger.record_upload(Some(round), from, d.bytes.len());
            match decode_message(&d.bytes, &self.ctx)? {
                Message::Update(u) if u.client_id == from && selected.contains(&from) => updates.push(u),
                other => return Err(ProtocolError::UnexpectedMessage(format!("{} from client {from}", other.kind()))),
            }
        }
        updates.sort_by_key(|u| u.client_id);
        let broadcast =
            timed(&mut timings.aggregate, || self.server.server_aggregate(round, &updates, selected.len()))?;

        let frame = encode_message(&Message::Broadcast(broadcast));
        for c in &self.clients {
            self.transport.send(Endpoint::Server, Endpoint::Client(c.id()), frame.clone())?;
        }
        let mut received = Vec::with_capacity(self.clients.len());
        for c in &self.clients {
            let d = self.transport.recv(Endpoint::Client(c.id()), self.config.timeout)?;
            self.ledger.record_download(Some(round), c.id(), d.bytes.len());
            received.push(d.bytes);
        }

        // Every client decodes and applies the broadcast independently.
        let ctx = &self.ctx;
        let applied: Vec<Result<StageTimings, ProtocolError>> = std::thread::scope(|s| {
            let handles: Vec<_> = self
                .clients
                .iter_mut()
                .zip(&received)
                .map(|(c, bytes)| {
                    s.spawn(move || match decode_message(bytes, ctx)? {
                        Message::Broadcast(b) => check_broadcast(&b, round).and_then(|()| c.client_apply(&b)),
                        other => Err(ProtocolError::UnexpectedMessage(format!("{} from server", other.kind()))),
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("client thread panicked")).collect()
        });
        let n = self.clients.len() as u32;
        for r in applied {
            timings += r?.div(n);
        }

        let model = self.clients[0].model().clone();
        if self.clients.iter().any(|c| !c.model().bits_eq(&model)) {
            return Err(ProtocolError::Divergence(round));
        }
        self.model = model.clone();
        self.round = round;
        let traffic = self.ledger.round(round).cloned().unwrap_or_default();
        Ok(RoundOutcome { round, selected, model, traffic, timings })
    }

    fn abort(&mut self, round: u64, reason: String) -> Result<(), ProtocolError> {
        let frame = encode_message(&Message::Abort(Abort { round, reason }));
        for c in &self.clients {
            self.transport.send(Endpoint::Server, Endpoint::Client(c.id()), frame.clone())?;
        }
        for c in &self.clients {
            let d = self.transport.recv(Endpoint::Client(c.id()), self.config.timeout)?;
            self.ledger.record_download(Some(round), c.id(), d.bytes.len());
        }
        Ok(())
    }
}

fn check_broadcast(b: &AggregateBroadcast, round: u64) -> Result<(), ProtocolError> {
    if b.round != round {
        return Err(ProtocolError::RoundMismatch { round, reason: format!("broadcast is for round {}", b.round) });
    }
    Ok(())
}
