use std::collections::VecDeque;

use crate::wire::WireMessage;

/// Outbound messages waiting for a slow client. When full, the oldest
/// snapshot makes room; other messages are never dropped.
#[derive(Debug)]
pub struct OutboundQueue {
    capacity: usize,
    items: VecDeque<WireMessage>,
    dropped: u64,
}

impl OutboundQueue {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::new(), dropped: 0 }
    }

    pub fn push(&mut self, msg: WireMessage) {
        if self.items.len() >= self.capacity {
            match self.items.iter().position(WireMessage::is_snapshot) {
                Some(i) => {
                    self.items.remove(i);
                    self.dropped += 1;
                }
                None if msg.is_snapshot() => {
                    self.dropped += 1;
                    return;
                }
                None => {}
            }
        }
        self.items.push_back(msg);
    }

    pub fn pop(&mut self) -> Option<WireMessage> {
        self.items.pop_front()
    }

    pub fn drain(&mut self) -> Vec<WireMessage> {
        self.items.drain(..).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Snapshots discarded so far.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
