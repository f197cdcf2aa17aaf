use crate::address::DramCoord;
use crate::dram::Cycle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReqKind {
    Read,
    Write,
}

/// How a request found its bank when its column command was issued.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowOutcome {
    Hit,
    Miss,
    Conflict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRequest {
    pub id: u64,
    pub kind: ReqKind,
    pub phys_addr: u64,
    pub coord: DramCoord,
    pub core_id: usize,
    pub arrival_cycle: Cycle,
    pub completion_cycle: Option<Cycle>,
    pub outcome: Option<RowOutcome>,
    pub(crate) needed_act: bool,
    pub(crate) needed_pre: bool,
}

impl MemRequest {
    pub fn new(kind: ReqKind, phys_addr: u64, coord: DramCoord, core_id: usize, arrival: Cycle) -> Self {
        Self {
            id: 0,
            kind,
            phys_addr,
            coord,
            core_id,
            arrival_cycle: arrival,
            completion_cycle: None,
            outcome: None,
            needed_act: false,
            needed_pre: false,
        }
    }

    pub fn line(&self) -> u64 {
        self.phys_addr >> 6
    }

    fn classify(&self) -> RowOutcome {
        if self.needed_pre {
            RowOutcome::Conflict
        } else if self.needed_act {
            RowOutcome::Miss
        } else {
            RowOutcome::Hit
        }
    }

    /// Marks the request complete at `cycle` and fixes its row outcome.
    pub fn complete(&mut self, cycle: Cycle) -> RowOutcome {
        debug_assert!(cycle >= self.arrival_cycle);
        self.completion_cycle = Some(cycle);
        let o = self.classify();
        self.outcome = Some(o);
        o
    }
}

/// Bounded request queue kept in arrival order.
#[derive(Debug, Clone)]
pub struct RequestQueue {
    entries: Vec<MemRequest>,
    capacity: usize,
}

impl RequestQueue {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: Vec::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends a request; a full queue hands the request back as back-pressure.
    pub fn enqueue(&mut self, req: MemRequest) -> Result<(), MemRequest> {
        if self.entries.len() >= self.capacity {
            return Err(req);
        }
        self.entries.push(req);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &MemRequest> {
        self.entries.iter()
    }

    pub fn as_slice(&self) -> &[MemRequest] {
        &self.entries
    }

    pub(crate) fn get_mut(&mut self, pos: usize) -> &mut MemRequest {
        &mut self.entries[pos]
    }

    pub fn remove(&mut self, pos: usize) -> MemRequest {
        self.entries.remove(pos)
    }

    /// Requests that would be row hits if `row` were open in their bank.
    pub fn same_row<'a>(&'a self, coord: &'a DramCoord) -> impl Iterator<Item = &'a MemRequest> + 'a {
        self.entries.iter().filter(move |r| {
            r.coord.rank == coord.rank
                && r.coord.bankgroup == coord.bankgroup
                && r.coord.bank == coord.bank
                && r.coord.row == coord.row
        })
    }
}
