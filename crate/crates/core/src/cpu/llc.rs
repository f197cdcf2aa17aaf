/// Set-associative, write-back, LRU last-level cache over line addresses.
#[derive(Debug, Clone)]
pub struct Llc {
    ways: usize,
    sets: usize,
    tags: Vec<u64>,
    stamps: Vec<u64>,
    dirty: Vec<bool>,
    clock: u64,
    hits: u64,
    misses: u64,
}

const INVALID: u64 = u64::MAX;

/// A line pushed out by an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Eviction {
    pub line: u64,
    pub dirty: bool,
}

impl Llc {
    pub fn new(capacity_bytes: u64, ways: usize, line_bytes: u64) -> Self {
        let lines = (capacity_bytes / line_bytes) as usize;
        let sets = (lines / ways).max(1);
        Self {
            ways,
            sets,
            tags: vec![INVALID; sets * ways],
            stamps: vec![0; sets * ways],
            dirty: vec![false; sets * ways],
            clock: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub fn sets(&self) -> usize {
        self.sets
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    pub fn lookups(&self) -> u64 {
        self.hits + self.misses
    }

    fn set_range(&self, line: u64) -> std::ops::Range<usize> {
        let s = (line % self.sets as u64) as usize;
        s * self.ways..(s + 1) * self.ways
    }

    fn find(&self, line: u64) -> Option<usize> {
        self.set_range(line).find(|&i| self.tags[i] == line)
    }

    fn touch(&mut self, i: usize) {
        self.clock += 1;
        self.stamps[i] = self.clock;
    }

    pub fn contains(&self, line: u64) -> bool {
        self.find(line).is_some()
    }

    /// Read lookup; a hit refreshes the line's recency.
    pub fn read(&mut self, line: u64) -> bool {
        match self.find(line) {
            Some(i) => {
                self.hits += 1;
                self.touch(i);
                true
            }
            None => {
                self.misses += 1;
                false
            }
        }
    }

    /// Write lookup. Misses allocate the line dirty without fetching it.
    pub fn write(&mut self, line: u64) -> (bool, Option<Eviction>) {
        if let Some(i) = self.find(line) {
            self.hits += 1;
            self.dirty[i] = true;
            self.touch(i);
            return (true, None);
        }
        self.misses += 1;
        (false, self.insert(line, true))
    }

    /// Installs `line`, evicting the set's least recently used line if needed.
    pub fn insert(&mut self, line: u64, dirty: bool) -> Option<Eviction> {
        if let Some(i) = self.find(line) {
            self.dirty[i] |= dirty;
            self.touch(i);
            return None;
        }
        let victim = self
            .set_range(line)
            .min_by_key(|&i| if self.tags[i] == INVALID { 0 } else { self.stamps[i] })
            .expect("non-empty set");
        let old = self.tags[victim];
        let evicted = (old != INVALID).then(|| Eviction {
            line: old,
            dirty: self.dirty[victim],
        });
        self.tags[victim] = line;
        self.dirty[victim] = dirty;
        self.touch(victim);
        evicted
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lru_eviction_within_a_set() {
        let mut c = Llc::new(4 * 64 * 2, 2, 64);
        assert_eq!(c.sets(), 4);
        assert!(!c.read(0));
        c.insert(0, false);
        c.insert(4, false);
        assert!(c.read(0));
        let ev = c.insert(8, false).unwrap();
        assert_eq!(ev.line, 4);
        assert!(c.contains(0) && c.contains(8));
        assert_eq!(c.hits() + c.misses(), c.lookups());
    }

    #[test]
    fn write_allocates_dirty() {
        let mut c = Llc::new(64 * 2, 2, 64);
        assert_eq!(c.write(1), (false, None));
        c.insert(3, false);
        c.read(3);
        let ev = c.insert(5, false).unwrap();
        assert_eq!(ev, Eviction { line: 1, dirty: true });
    }

    #[test]
    fn default_geometry() {
        let c = Llc::new(8 << 20, 8, 64);
        assert_eq!(c.sets(), 16384);
    }
}
