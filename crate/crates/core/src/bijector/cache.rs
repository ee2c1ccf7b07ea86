use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Mutex;

use super::Side;
use crate::nd::{CacheToken, NdValue};

pub const DEFAULT_CACHE_CAPACITY: usize = 16;

/// Caching is on unless `DISTKIT_CACHE` is `off`, `0` or `false`.
pub fn caching_default() -> bool {
    match std::env::var("DISTKIT_CACHE") {
        Ok(v) => !matches!(v.trim().to_ascii_lowercase().as_str(), "off" | "0" | "false"),
        Err(_) => true,
    }
}

struct Entry {
    x: NdValue,
    y: NdValue,
    ldj: Vec<(Side, usize, NdValue)>,
}

/// Bounded LRU map between tokened inputs and outputs of one bijector.
pub struct BijectorCache {
    enabled: AtomicBool,
    capacity: AtomicUsize,
    entries: Mutex<VecDeque<Entry>>,
    inverse_calls: AtomicU64,
}

impl Default for BijectorCache {
    fn default() -> Self {
        Self::new()
    }
}

impl BijectorCache {
    pub fn new() -> Self {
        BijectorCache {
            enabled: AtomicBool::new(caching_default()),
            capacity: AtomicUsize::new(DEFAULT_CACHE_CAPACITY),
            entries: Mutex::new(VecDeque::new()),
            inverse_calls: AtomicU64::new(0),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled.load(Ordering::Relaxed)
    }

    pub fn set_enabled(&self, on: bool) {
        self.enabled.store(on, Ordering::Relaxed);
        if !on {
            self.clear();
        }
    }

    pub fn set_capacity(&self, capacity: usize) {
        self.capacity.store(capacity, Ordering::Relaxed);
        let mut e = self.lock();
        while e.len() > capacity {
            e.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&self) {
        self.lock().clear();
    }

    pub fn inverse_calls(&self) -> u64 {
        self.inverse_calls.load(Ordering::Relaxed)
    }

    pub fn reset_inverse_calls(&self) {
        self.inverse_calls.store(0, Ordering::Relaxed);
    }

    pub(crate) fn count_inverse(&self) {
        self.inverse_calls.fetch_add(1, Ordering::Relaxed);
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, VecDeque<Entry>> {
        self.entries.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Finds the entry matching `pred`, moves it to the back and maps it.
    fn touch<T>(&self, pred: impl Fn(&Entry) -> bool, f: impl FnOnce(&Entry) -> T) -> Option<T> {
        let mut e = self.lock();
        let i = e.iter().position(pred)?;
        let entry = e.remove(i)?;
        let out = f(&entry);
        e.push_back(entry);
        Some(out)
    }

    pub(crate) fn insert(&self, x: NdValue, y: NdValue) {
        let cap = self.capacity.load(Ordering::Relaxed);
        if cap == 0 {
            return;
        }
        let mut e = self.lock();
        while e.len() >= cap {
            e.pop_front();
        }
        e.push_back(Entry { x, y, ldj: Vec::new() });
    }

    pub(crate) fn output_of(&self, x: CacheToken) -> Option<NdValue> {
        self.touch(|e| e.x.token() == Some(x), |e| e.y.clone())
    }

    pub(crate) fn input_of(&self, y: CacheToken) -> Option<NdValue> {
        self.touch(|e| e.y.token() == Some(y), |e| e.x.clone())
    }

    fn side_token(e: &Entry, side: Side) -> Option<CacheToken> {
        match side {
            Side::Forward => e.x.token(),
            Side::Inverse => e.y.token(),
        }
    }

    pub(crate) fn ldj(&self, t: CacheToken, side: Side, rank: usize) -> Option<NdValue> {
        self.touch(
            |e| Self::side_token(e, side) == Some(t),
            |e| {
                e.ldj
                    .iter()
                    .find(|(s, r, _)| *s == side && *r == rank)
                    .map(|(_, _, v)| v.clone())
            },
        )
        .flatten()
    }

    /// Forward log-det-Jacobian stored for the input paired with output `y`.
    pub(crate) fn ldj_of_input(&self, y: CacheToken, rank: usize) -> Option<NdValue> {
        self.touch(
            |e| e.y.token() == Some(y),
            |e| {
                e.ldj
                    .iter()
                    .find(|(s, r, _)| *s == Side::Forward && *r == rank)
                    .map(|(_, _, v)| v.clone())
            },
        )
        .flatten()
    }

    pub(crate) fn store_ldj(&self, t: CacheToken, side: Side, rank: usize, v: NdValue) {
        let mut e = self.lock();
        if let Some(entry) = e.iter_mut().find(|e| Self::side_token(e, side) == Some(t)) {
            if !entry.ldj.iter().any(|(s, r, _)| *s == side && *r == rank) {
                entry.ldj.push((side, rank, v));
            }
        }
    }
}
