use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::rng;

/// Delay and loss injected between the perception side and the mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Fixed co-simulation latency [ms].
    pub innate_delay_ms: f64,
    /// Mean of the added Gaussian delay [ms].
    pub acd_mean_ms: f64,
    pub acd_std_ms: f64,
    /// A message is dropped when a uniform draw falls below this.
    pub drop_threshold: f64,
    pub seed: u64,
    /// Delivery granularity of the deterministic channel [ms].
    pub tick_ms: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            innate_delay_ms: 150.0,
            acd_mean_ms: 50.0,
            acd_std_ms: 5.0,
            drop_threshold: 0.0,
            seed: 0,
            tick_ms: 100,
        }
    }
}

impl ChannelConfig {
    /// No delay and no loss.
    pub fn ideal() -> Self {
        ChannelConfig {
            innate_delay_ms: 0.0,
            acd_mean_ms: 0.0,
            acd_std_ms: 0.0,
            ..ChannelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.innate_delay_ms.is_finite() && self.innate_delay_ms >= 0.0) {
            return Err(ConfigError::invalid(
                "channel.innate_delay_ms",
                "must be >= 0",
            ));
        }
        if !self.acd_mean_ms.is_finite() {
            return Err(ConfigError::invalid(
                "channel.acd_mean_ms",
                "must be finite",
            ));
        }
        if !(self.acd_std_ms.is_finite() && self.acd_std_ms >= 0.0) {
            return Err(ConfigError::invalid("channel.acd_std_ms", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.drop_threshold) {
            return Err(ConfigError::invalid(
                "channel.drop_threshold",
                "must be in [0, 1]",
            ));
        }
        if self.tick_ms == 0 {
            return Err(ConfigError::invalid("channel.tick_ms", "must be > 0"));
        }
        Ok(())
    }
}

/// Total delay: innate latency plus a Gaussian term truncated at zero [ms].
pub fn sample_delay<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> f64 {
    let extra = if cfg.acd_std_ms > 0.0 {
        Normal::new(cfg.acd_mean_ms, cfg.acd_std_ms)
            .map(|n| n.sample(rng))
            .unwrap_or(cfg.acd_mean_ms)
    } else {
        cfg.acd_mean_ms
    };
    cfg.innate_delay_ms + extra.max(0.0)
}

/// Drop iff a uniform draw on [0, 1) is below the threshold.
pub fn should_drop<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> bool {
    rng.random::<f64>() < cfg.drop_threshold
}

/// Streaming mean and standard deviation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn std(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ChannelStats {
    pub sent: u64,
    pub dropped: u64,
    pub delivered: u64,
    /// Lost in transport (socket mode only).
    pub lost: u64,
    delay: Welford,
    latency: Welford,
}

impl ChannelStats {
    pub(crate) fn record_delivery(&mut self, sampled_delay_ms: f64, latency_ms: f64) {
        self.delivered += 1;
        self.delay.add(sampled_delay_ms);
        self.latency.add(latency_ms);
    }

    /// Mean sampled delay of delivered messages [ms].
    pub fn mean_delay_ms(&self) -> f64 {
        self.delay.mean
    }

    pub fn std_delay_ms(&self) -> f64 {
        self.delay.std()
    }

    /// Mean send-to-delivery time after tick quantization [ms].
    pub fn mean_latency_ms(&self) -> f64 {
        self.latency.mean
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "sent",
            "dropped",
            "delivered",
            "lost",
            "mean_delay_ms",
            "std_delay_ms",
            "mean_latency_ms",
        ])?;
        wr.write_record([
            self.sent.to_string(),
            self.dropped.to_string(),
            self.delivered.to_string(),
            self.lost.to_string(),
            format!("{:.6}", self.mean_delay_ms()),
            format!("{:.6}", self.std_delay_ms()),
            format!("{:.6}", self.mean_latency_ms()),
        ])?;
        wr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SendOutcome {
    Dropped,
    Scheduled { deliver_at_ms: u64, delay_ms: f64 },
}

/// Per-message impairment draws, addressed by the message's send sequence
/// number so that the drop decision for message k is the same at every
/// threshold.
pub(crate) fn impair(cfg: &ChannelConfig, seq: u64) -> (f64, bool) {
    let delay = sample_delay(cfg, &mut rng::keyed(cfg.seed, rng::DOMAIN_DELAY, seq));
    let drop = should_drop(cfg, &mut rng::keyed(cfg.seed, rng::DOMAIN_DROP, seq));
    (delay, drop)
}

#[derive(Debug)]
struct Pending<M> {
    key: Reverse<(u64, u64, u64)>,
    sent_ms: u64,
    delay_ms: f64,
    msg: M,
}

impl<M> PartialEq for Pending<M> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<M> Eq for Pending<M> {}
impl<M> PartialOrd for Pending<M> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<M> Ord for Pending<M> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

/// In-memory channel on a simulated clock. Surviving messages are released
/// on the first tick boundary at or after `send time + delay`, in delivery
/// order with ties broken by frame id.
#[derive(Debug)]
pub struct DeterministicChannel<M> {
    cfg: ChannelConfig,
    queue: BinaryHeap<Pending<M>>,
    seq: u64,
    stats: ChannelStats,
}

impl<M> DeterministicChannel<M> {
    pub fn new(cfg: ChannelConfig) -> Self {
        DeterministicChannel {
            cfg,
            queue: BinaryHeap::new(),
            seq: 0,
            stats: ChannelStats::default(),
        }
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn send(&mut self, msg: M, frame_id: u64, now_ms: u64) -> SendOutcome {
        let seq = self.seq;
        self.seq += 1;
        self.stats.sent += 1;
        let (delay_ms, drop) = impair(&self.cfg, seq);
        if drop {
            self.stats.dropped += 1;
            return SendOutcome::Dropped;
        }
        let due = now_ms as f64 + delay_ms;
        let tick = self.cfg.tick_ms as f64;
        // Guard against 1200.0000000001 rounding up a whole tick.
        let deliver_at_ms = (((due - 1e-6) / tick).ceil().max(0.0) * tick) as u64;
        let deliver_at_ms = deliver_at_ms.max(now_ms);
        self.queue.push(Pending {
            key: Reverse((deliver_at_ms, frame_id, seq)),
            sent_ms: now_ms,
            delay_ms,
            msg,
        });
        SendOutcome::Scheduled {
            deliver_at_ms,
            delay_ms,
        }
    }

    /// Everything due at or before `now_ms`.
    pub fn poll(&mut self, now_ms: u64) -> Vec<M> {
        let mut out = Vec::new();
        while let Some(top) = self.queue.peek() {
            let Reverse((due, _, _)) = top.key;
            if due > now_ms {
                break;
            }
            let Some(p) = self.queue.pop() else { break };
            self.stats
                .record_delivery(p.delay_ms, (due - p.sent_ms) as f64);
            out.push(p.msg);
        }
        out
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn stats(&self) -> &ChannelStats {
        &self.stats
    }
}
