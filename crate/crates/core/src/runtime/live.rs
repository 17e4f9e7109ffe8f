use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::game::{Action, GridObservation};

/// One tick as streamed to watchers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    /// Strictly increasing over the hub's lifetime.
    pub seq: u64,
    pub episode: u64,
    pub game: String,
    pub tick: u32,
    pub observation: GridObservation,
    pub score: i64,
    pub action: Action,
    /// The planner's fitness-weighted first-action distribution.
    pub policy: [f64; Action::COUNT],
}

/// One-way broadcast of frames. Publishing never blocks: a subscriber whose
/// buffer is full is dropped.
#[derive(Debug, Default)]
pub struct LiveHub {
    subscribers: Mutex<Vec<SyncSender<Arc<Frame>>>>,
    seq: AtomicU64,
}

impl LiveHub {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&self, capacity: usize) -> Receiver<Arc<Frame>> {
        let (tx, rx) = sync_channel(capacity.max(1));
        self.subscribers.lock().unwrap().push(tx);
        rx
    }

    pub fn subscriber_count(&self) -> usize {
        self.subscribers.lock().unwrap().len()
    }

    pub fn has_subscribers(&self) -> bool {
        self.subscriber_count() > 0
    }

    /// Stamps `frame.seq` and sends it to every live subscriber.
    pub fn publish(&self, mut frame: Frame) {
        let mut subs = self.subscribers.lock().unwrap();
        if subs.is_empty() {
            return;
        }
        frame.seq = self.seq.fetch_add(1, Ordering::Relaxed);
        let frame = Arc::new(frame);
        subs.retain(|tx| match tx.try_send(Arc::clone(&frame)) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => false,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(tick: u32) -> Frame {
        Frame {
            seq: 0,
            episode: 0,
            game: "g".into(),
            tick,
            observation: GridObservation {
                width: 1,
                height: 1,
                cells: vec![0],
            },
            score: 0,
            action: Action::Nil,
            policy: [0.2; 5],
        }
    }

    #[test]
    fn in_order_delivery() {
        let hub = LiveHub::new();
        let rx = hub.subscribe(16);
        for t in 0..10 {
            hub.publish(frame(t));
        }
        let got: Vec<(u64, u32)> = rx.try_iter().map(|f| (f.seq, f.tick)).collect();
        assert_eq!(got, (0..10).map(|t| (t as u64, t)).collect::<Vec<_>>());
    }

    #[test]
    fn slow_subscriber_dropped() {
        let hub = LiveHub::new();
        let slow = hub.subscribe(2);
        let fast = hub.subscribe(100);
        for t in 0..5 {
            hub.publish(frame(t));
        }
        assert_eq!(hub.subscriber_count(), 1);
        assert_eq!(slow.try_iter().count(), 2);
        assert_eq!(fast.try_iter().count(), 5);
    }

    #[test]
    fn disconnected_subscriber_dropped() {
        let hub = LiveHub::new();
        drop(hub.subscribe(4));
        hub.publish(frame(0));
        assert!(!hub.has_subscribers());
    }
}
