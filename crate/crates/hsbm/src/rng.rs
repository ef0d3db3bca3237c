use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named substreams derived from one master seed. Keeping the streams
/// separate means e.g. changing the noise level cannot perturb the label
/// or feature draws.
#[derive(Debug, Clone, Copy)]
pub enum Stream {
    Labels,
    Edges,
    Features,
    Noise,
    Split,
    Train,
    Sweep,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::Labels => 1,
            Stream::Edges => 2,
            Stream::Features => 3,
            Stream::Noise => 4,
            Stream::Split => 5,
            Stream::Train => 6,
            Stream::Sweep => 7,
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic RNG for `(master seed, stream, index)`. The index allows
/// per-node substreams so parallel edge sampling is schedule-independent.
pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let words = [
        splitmix64(master),
        splitmix64(master ^ stream.tag().wrapping_mul(0xa076_1d64_78bd_642f)),
        splitmix64(index.wrapping_add(0x1234_5678_9abc_def0)),
        splitmix64(master ^ index ^ (stream.tag() << 32)),
    ];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
