//! Chat surfaces the subjects post to.

use alloc::string::String;
use alloc::vec::Vec;

use super::samples::Channel;

pub trait ChannelSink {
    fn post(&mut self, channel: Channel, text: &str);
}

/// First `channel.clamp_limit()` characters of `text`.
pub fn clamp(channel: Channel, text: &str) -> &str {
    match text.char_indices().nth(channel.clamp_limit()) {
        Some((i, _)) => &text[..i],
        None => text,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Post {
    pub channel: Channel,
    pub text: String,
}

/// In-memory sink. Counts every post; keeps the clamped text only when
/// `retain` is set, so long runs stay small.
#[derive(Debug, Clone, Default)]
pub struct MockChannelSink {
    pub retain: bool,
    pub posts: Vec<Post>,
    pub count: usize,
}

impl MockChannelSink {
    pub fn retaining() -> Self {
        MockChannelSink {
            retain: true,
            ..Self::default()
        }
    }
}

impl ChannelSink for MockChannelSink {
    fn post(&mut self, channel: Channel, text: &str) {
        self.count += 1;
        if self.retain {
            self.posts.push(Post {
                channel,
                text: clamp(channel, text).into(),
            });
        }
    }
}

/// Discards everything. Backs stats-only runs.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullSink;

impl ChannelSink for NullSink {
    fn post(&mut self, _channel: Channel, _text: &str) {}
}
