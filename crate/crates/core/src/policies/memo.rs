use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use lru::LruCache;
use qns_ipsolver::IpInstance;

pub const DEFAULT_MEMO_CAPACITY: usize = 100_000;

type Key = (u64, u128);

/// Nonzero entries of a solution vector and its length.
type Sparse = (usize, Vec<(u32, i64)>);

/// Bounded LRU of optimal solver outputs keyed by the system fingerprint
/// and a 128-bit digest of the full solver input. Shared by all workers of
/// a sweep.
pub struct SolveCache {
    inner: Mutex<LruCache<Key, Sparse>>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl SolveCache {
    pub fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).unwrap();
        Self {
            inner: Mutex::new(LruCache::new(cap)),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    pub fn get(&self, system: u64, instance: &IpInstance) -> Option<Vec<i64>> {
        let key = (system, digest(instance));
        let mut cache = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let hit = cache.get(&key).map(|(len, nz)| {
            let mut r = vec![0; *len];
            nz.iter().for_each(|&(j, v)| r[j as usize] = v);
            r
        });
        drop(cache);
        if hit.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        hit
    }

    pub fn insert(&self, system: u64, instance: &IpInstance, r: &[i64]) {
        let nz = r.iter().enumerate().filter(|(_, &v)| v != 0).map(|(j, &v)| (j as u32, v)).collect();
        let key = (system, digest(instance));
        let mut cache = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        cache.put(key, (r.len(), nz));
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Two independently salted SipHash digests of the instance.
fn digest(instance: &IpInstance) -> u128 {
    let half = |salt: u64| {
        let mut h = DefaultHasher::new();
        salt.hash(&mut h);
        instance.hash(&mut h);
        h.finish()
    };
    (half(0x9e37_79b9_7f4a_7c15) as u128) << 64 | half(0xc2b2_ae3d_27d4_eb4f) as u128
}
