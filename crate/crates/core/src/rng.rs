//! Reproducible random streams.
//!
//! Every replicate draws from its own ChaCha8 stream: the master seed is
//! expanded into the 256-bit key (`seed_from_u64`) and the replicate index
//! selects the 64-bit stream id. Streams never overlap, so results depend
//! only on `(master, index)` and not on how replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type StreamRng = ChaCha8Rng;

pub fn substream(master: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Runs `reps` replicates in parallel, replicate `i` on `substream(master, i)`.
/// Output order is by replicate index.
pub fn replicate<T, F>(master: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut StreamRng) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut substream(master, i as u64)))
        .collect()
}

/// Fallible variant of [`replicate`]; the first error by replicate index wins.
pub fn try_replicate<T, E, F>(master: u64, reps: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(&mut StreamRng) -> Result<T, E> + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut substream(master, i as u64)))
        .collect()
}
