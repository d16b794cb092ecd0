// SPDX-License-Identifier: Apache-2.0
// SPDX-FileCopyrightText: Copyright The pathfuse Authors

//! Simulated striped device array with queue-pair reads.
//!
//! Pages are striped round-robin by page id. A queue pair admits up to `depth`
//! in-flight requests; each completes after a service delay plus a transfer
//! time that is serialized per device.

use std::collections::VecDeque;
use std::fmt;
use std::fs::File;
use std::os::unix::fs::FileExt;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use thiserror::Error;

pub const DEFAULT_QUEUE_DEPTH: usize = 64;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unknown page {0}")]
    UnknownPage(u64),
    #[error("queue pair {0} is full")]
    Backpressure(usize),
    #[error("page {page_id} extent {offset}+{len} exceeds device {device} of {device_len} bytes")]
    OutOfBounds {
        page_id: u64,
        device: usize,
        offset: u64,
        len: u32,
        device_len: u64,
    },
    #[error("page table has {offsets} offsets but {sizes} sizes")]
    TableMismatch { offsets: usize, sizes: usize },
    #[error("need at least one device")]
    NoDevices,
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyModel {
    /// Fixed delay per request, overlappable across requests.
    pub service_time: Duration,
    /// Per-device transfer rate; transfers on one device are serialized.
    pub bytes_per_sec: f64,
    /// Host-side cost charged for each pass launch.
    pub launch_overhead: Duration,
}

impl Default for LatencyModel {
    fn default() -> Self {
        LatencyModel {
            service_time: Duration::from_micros(50),
            bytes_per_sec: 3.0e9,
            launch_overhead: Duration::from_micros(100),
        }
    }
}

impl LatencyModel {
    /// No delays at all, for tests.
    pub fn instant() -> Self {
        LatencyModel {
            service_time: Duration::ZERO,
            bytes_per_sec: f64::INFINITY,
            launch_overhead: Duration::ZERO,
        }
    }

    fn transfer_time(&self, len: u32) -> Duration {
        if self.bytes_per_sec.is_infinite() {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(len as f64 / self.bytes_per_sec)
        }
    }
}

/// Where a page lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageLocation {
    pub device: usize,
    pub offset: u64,
    pub len: u32,
}

/// Round-robin stripe.
pub fn device_of(page_id: u64, device_count: usize) -> usize {
    (page_id % device_count as u64) as usize
}

/// Maps a global page id to its device extent given the side-file arrays.
pub fn resolve_page(
    page_id: u64,
    device_count: usize,
    sizes: &[u32],
    offsets: &[u64],
) -> Result<PageLocation, IoError> {
    let i = usize::try_from(page_id).map_err(|_| IoError::UnknownPage(page_id))?;
    match (sizes.get(i), offsets.get(i)) {
        (Some(&len), Some(&offset)) if device_count > 0 => Ok(PageLocation {
            device: device_of(page_id, device_count),
            offset,
            len,
        }),
        _ => Err(IoError::UnknownPage(page_id)),
    }
}

enum Store {
    Memory(Vec<u8>),
    File { file: File, len: u64 },
}

impl Store {
    fn len(&self) -> u64 {
        match self {
            Store::Memory(v) => v.len() as u64,
            Store::File { len, .. } => *len,
        }
    }

    fn read(&self, offset: u64, len: u32) -> Result<Vec<u8>, IoError> {
        match self {
            Store::Memory(v) => Ok(v[offset as usize..offset as usize + len as usize].to_vec()),
            Store::File { file, .. } => {
                let mut buf = vec![0u8; len as usize];
                file.read_exact_at(&mut buf, offset)?;
                Ok(buf)
            }
        }
    }
}

/// Query counters; reset per query.
#[derive(Debug, Default)]
pub struct IoStats {
    requests_issued: AtomicU64,
    bytes_read: AtomicU64,
    pass_launches: AtomicU64,
    barrier_count: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IoStatsSnapshot {
    pub requests_issued: u64,
    pub bytes_read: u64,
    pub pass_launches: u64,
    pub barrier_count: u64,
}

impl IoStats {
    pub fn snapshot(&self) -> IoStatsSnapshot {
        IoStatsSnapshot {
            requests_issued: self.requests_issued.load(Ordering::SeqCst),
            bytes_read: self.bytes_read.load(Ordering::SeqCst),
            pass_launches: self.pass_launches.load(Ordering::SeqCst),
            barrier_count: self.barrier_count.load(Ordering::SeqCst),
        }
    }

    pub fn reset(&self) {
        self.requests_issued.store(0, Ordering::SeqCst);
        self.bytes_read.store(0, Ordering::SeqCst);
        self.pass_launches.store(0, Ordering::SeqCst);
        self.barrier_count.store(0, Ordering::SeqCst);
    }

    pub fn add_barriers(&self, n: u64) {
        self.barrier_count.fetch_add(n, Ordering::SeqCst);
    }
}

impl IoStatsSnapshot {
    pub fn since(&self, earlier: &IoStatsSnapshot) -> IoStatsSnapshot {
        IoStatsSnapshot {
            requests_issued: self.requests_issued - earlier.requests_issued,
            bytes_read: self.bytes_read - earlier.bytes_read,
            pass_launches: self.pass_launches - earlier.pass_launches,
            barrier_count: self.barrier_count - earlier.barrier_count,
        }
    }

    /// `key=value` lines.
    pub fn to_kv(&self) -> String {
        format!(
            "requests_issued={}\nbytes_read={}\npass_launches={}\nbarrier_count={}\n",
            self.requests_issued, self.bytes_read, self.pass_launches, self.barrier_count
        )
    }
}

impl fmt::Display for IoStatsSnapshot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "requests {:>8}  bytes {:>12}  launches {:>4}  barriers {:>6}",
            self.requests_issued, self.bytes_read, self.pass_launches, self.barrier_count
        )
    }
}

/// Devices plus the global page table (offsets and sizes by page id).
pub struct DeviceArray {
    stores: Vec<Store>,
    busy_until: Vec<Mutex<Instant>>,
    offsets: Vec<u64>,
    sizes: Vec<u32>,
    latency: LatencyModel,
    stats: IoStats,
}

impl fmt::Debug for DeviceArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeviceArray")
            .field("devices", &self.stores.len())
            .field("pages", &self.sizes.len())
            .field("latency", &self.latency)
            .finish()
    }
}

impl DeviceArray {
    fn build(
        stores: Vec<Store>,
        offsets: Vec<u64>,
        sizes: Vec<u32>,
        latency: LatencyModel,
    ) -> Result<Self, IoError> {
        if stores.is_empty() {
            return Err(IoError::NoDevices);
        }
        if offsets.len() != sizes.len() {
            return Err(IoError::TableMismatch {
                offsets: offsets.len(),
                sizes: sizes.len(),
            });
        }
        let n = stores.len();
        for (id, (&offset, &len)) in offsets.iter().zip(&sizes).enumerate() {
            let device = device_of(id as u64, n);
            let device_len = stores[device].len();
            if offset.checked_add(len as u64).is_none_or(|e| e > device_len) {
                return Err(IoError::OutOfBounds {
                    page_id: id as u64,
                    device,
                    offset,
                    len,
                    device_len,
                });
            }
        }
        let now = Instant::now();
        Ok(DeviceArray {
            busy_until: (0..n).map(|_| Mutex::new(now)).collect(),
            stores,
            offsets,
            sizes,
            latency,
            stats: IoStats::default(),
        })
    }

    pub fn in_memory(
        images: Vec<Vec<u8>>,
        offsets: Vec<u64>,
        sizes: Vec<u32>,
        latency: LatencyModel,
    ) -> Result<Self, IoError> {
        Self::build(images.into_iter().map(Store::Memory).collect(), offsets, sizes, latency)
    }

    pub fn open_files<P: AsRef<Path>>(
        paths: &[P],
        offsets: Vec<u64>,
        sizes: Vec<u32>,
        latency: LatencyModel,
    ) -> Result<Self, IoError> {
        let stores = paths
            .iter()
            .map(|p| {
                let file = File::open(p)?;
                let len = file.metadata()?.len();
                Ok(Store::File { file, len })
            })
            .collect::<Result<Vec<_>, IoError>>()?;
        Self::build(stores, offsets, sizes, latency)
    }

    pub fn device_count(&self) -> usize {
        self.stores.len()
    }

    pub fn page_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn latency(&self) -> &LatencyModel {
        &self.latency
    }

    pub fn set_latency(&mut self, latency: LatencyModel) {
        self.latency = latency;
    }

    pub fn stats(&self) -> &IoStats {
        &self.stats
    }

    pub fn resolve(&self, page_id: u64) -> Result<PageLocation, IoError> {
        resolve_page(page_id, self.stores.len(), &self.sizes, &self.offsets)
    }

    pub fn page_size(&self, page_id: u64) -> Option<u32> {
        self.sizes.get(usize::try_from(page_id).ok()?).copied()
    }

    /// Synchronous read without latency or counters, for verification.
    pub fn read_untimed(&self, page_id: u64) -> Result<Vec<u8>, IoError> {
        let loc = self.resolve(page_id)?;
        self.stores[loc.device].read(loc.offset, loc.len)
    }

    /// Counts one pass launch and charges its host-side overhead.
    pub fn launch_pass(&self) {
        self.stats.pass_launches.fetch_add(1, Ordering::SeqCst);
        wait_for(self.latency.launch_overhead);
    }

    fn schedule(&self, loc: &PageLocation) -> Instant {
        let now = Instant::now();
        let mut busy = self.busy_until[loc.device].lock().unwrap();
        let start = (*busy).max(now);
        *busy = start + self.latency.transfer_time(loc.len);
        *busy + self.latency.service_time
    }
}

fn wait_for(d: Duration) {
    if !d.is_zero() {
        std::thread::sleep(d);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ticket(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IoRequest {
    pub page_id: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IoCompletion {
    pub ticket: Ticket,
    pub page_id: u64,
    pub bytes: Vec<u8>,
}

struct InFlight {
    ticket: Ticket,
    loc: PageLocation,
    page_id: u64,
    ready_at: Instant,
}

/// One submission/completion queue pair owned by a single IO worker.
pub struct QueuePair {
    id: usize,
    depth: usize,
    next_ticket: u64,
    in_flight: VecDeque<InFlight>,
    devices: Arc<DeviceArray>,
}

impl fmt::Debug for QueuePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QueuePair")
            .field("id", &self.id)
            .field("depth", &self.depth)
            .field("in_flight", &self.in_flight.len())
            .finish()
    }
}

impl QueuePair {
    pub fn new(id: usize, depth: usize, devices: Arc<DeviceArray>) -> Self {
        assert!(depth > 0, "queue depth must be positive");
        QueuePair {
            id,
            depth,
            next_ticket: 0,
            in_flight: VecDeque::with_capacity(depth),
            devices,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn submit(&mut self, req: IoRequest) -> Result<Ticket, IoError> {
        if self.in_flight.len() >= self.depth {
            return Err(IoError::Backpressure(self.id));
        }
        let loc = self.devices.resolve(req.page_id)?;
        let ready_at = self.devices.schedule(&loc);
        let ticket = Ticket(self.next_ticket);
        self.next_ticket += 1;
        let stats = &self.devices.stats;
        stats.requests_issued.fetch_add(1, Ordering::SeqCst);
        stats.bytes_read.fetch_add(loc.len as u64, Ordering::SeqCst);
        self.in_flight.push_back(InFlight {
            ticket,
            loc,
            page_id: req.page_id,
            ready_at,
        });
        Ok(ticket)
    }

    /// Retires the earliest-ready request whose latency has elapsed.
    pub fn poll(&mut self) -> Result<Option<IoCompletion>, IoError> {
        let now = Instant::now();
        let Some((i, _)) = self
            .in_flight
            .iter()
            .enumerate()
            .filter(|(_, r)| r.ready_at <= now)
            .min_by_key(|(_, r)| (r.ready_at, r.ticket))
        else {
            return Ok(None);
        };
        let r = self.in_flight.remove(i).unwrap();
        let bytes = self.devices.stores[r.loc.device].read(r.loc.offset, r.loc.len)?;
        Ok(Some(IoCompletion {
            ticket: r.ticket,
            page_id: r.page_id,
            bytes,
        }))
    }

    /// Blocks until the next completion, or returns `None` when idle.
    pub fn wait(&mut self) -> Result<Option<IoCompletion>, IoError> {
        loop {
            let Some(next) = self.in_flight.iter().map(|r| r.ready_at).min() else {
                return Ok(None);
            };
            wait_for(next.saturating_duration_since(Instant::now()));
            if let Some(c) = self.poll()? {
                return Ok(Some(c));
            }
        }
    }

    /// Reads `page_ids` through this pair, respecting the depth bound.
    /// Completions are returned in the order of `page_ids`.
    pub fn read_batch(&mut self, page_ids: &[u64]) -> Result<Vec<Vec<u8>>, IoError> {
        let mut out: Vec<Option<Vec<u8>>> = vec![None; page_ids.len()];
        let mut slot_of = std::collections::HashMap::new();
        let mut next = 0;
        let mut done = 0;
        while done < page_ids.len() {
            while next < page_ids.len() {
                match self.submit(IoRequest { page_id: page_ids[next] }) {
                    Ok(t) => {
                        slot_of.insert(t, next);
                        next += 1;
                    }
                    Err(IoError::Backpressure(_)) => break,
                    Err(e) => return Err(e),
                }
            }
            if let Some(c) = self.wait()? {
                if let Some(i) = slot_of.remove(&c.ticket) {
                    out[i] = Some(c.bytes);
                    done += 1;
                }
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}

/// Queue pairs for one pipeline launch: `io_workers` pairs per worker group.
#[derive(Debug)]
pub struct QueueAssignment {
    pub groups: Vec<Vec<QueuePair>>,
}

impl QueueAssignment {
    pub fn pair_count(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }
}

/// Gives every IO worker of every group a dedicated queue pair.
pub fn configure_queues(
    devices: &Arc<DeviceArray>,
    worker_groups: usize,
    io_worker_count: usize,
    depth: usize,
) -> QueueAssignment {
    let io_worker_count = io_worker_count.max(1);
    let groups = (0..worker_groups)
        .map(|g| {
            (0..io_worker_count)
                .map(|w| QueuePair::new(g * io_worker_count + w, depth, Arc::clone(devices)))
                .collect()
        })
        .collect();
    QueueAssignment { groups }
}
