//! Per-round, per-client byte accounting.

use std::collections::BTreeMap;

/// Bytes moved in one round. Keys are client ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundTraffic {
    pub upload: BTreeMap<u64, u64>,
    pub download: BTreeMap<u64, u64>,
}

impl RoundTraffic {
    pub fn total_upload(&self) -> u64 {
        self.upload.values().sum()
    }

    pub fn total_download(&self) -> u64 {
        self.download.values().sum()
    }

    pub fn upload_of(&self, client: u64) -> u64 {
        self.upload.get(&client).copied().unwrap_or(0)
    }

    pub fn download_of(&self, client: u64) -> u64 {
        self.download.get(&client).copied().unwrap_or(0)
    }
}

/// Setup traffic is kept apart from the per-round figures.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrafficLedger {
    pub setup: RoundTraffic,
    pub rounds: BTreeMap<u64, RoundTraffic>,
}

impl TrafficLedger {
    pub fn record_upload(&mut self, round: Option<u64>, client: u64, bytes: usize) {
        *self.slot(round).upload.entry(client).or_default() += bytes as u64;
    }

    pub fn record_download(&mut self, round: Option<u64>, client: u64, bytes: usize) {
        *self.slot(round).download.entry(client).or_default() += bytes as u64;
    }

    fn slot(&mut self, round: Option<u64>) -> &mut RoundTraffic {
        match round {
            Some(r) => self.rounds.entry(r).or_default(),
            None => &mut self.setup,
        }
    }

    pub fn round(&self, round: u64) -> Option<&RoundTraffic> {
        self.rounds.get(&round)
    }

    /// Upload and download totals over setup and every round.
    pub fn totals(&self) -> (u64, u64) {
        std::iter::once(&self.setup)
            .chain(self.rounds.values())
            .fold((0, 0), |(u, d), r| (u + r.total_upload(), d + r.total_download()))
    }
}
