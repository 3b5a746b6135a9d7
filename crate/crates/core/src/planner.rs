//! Femtocell on/off planning from forecast loads.
//!
//! Per 10-minute interval:
//!
//! * A cell may switch off when its utilization has stayed below
//!   `off_threshold` for a run of at least [`MIN_OFF_RUN`] intervals around
//!   the current one, no neighbor is overloaded, and an On neighbor can take
//!   its whole load while staying at or under `overload_threshold`. The load
//!   moves to the least-utilized such neighbor, which then stays on.
//!   Candidates are processed by that run score, then by cell id.
//! * Cells above `overload_threshold` shed load onto On neighbors with spare
//!   capacity.
//! * A cell still above `overload_threshold` afterwards gets the whitespace
//!   flag (extra spectrum needed).
//!
//! [`evaluate_plan`] replays the same allocation against actual loads, so a
//! perfect forecast never yields a QoS violation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::BINS_PER_DAY;
use crate::svc::ClassLabel;

/// Shortest low-utilization run that allows a cell to switch off.
pub const MIN_OFF_RUN: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FemtoRecord {
    pub cell_id: String,
    pub lat: f64,
    pub lon: f64,
    /// Maximum concurrent users.
    pub capacity: u32,
    pub neighbors: BTreeSet<String>,
}

/// Validated femtocell database keyed by cell id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FemtoDb {
    cells: BTreeMap<String, FemtoRecord>,
}

impl FemtoDb {
    pub fn new(records: Vec<FemtoRecord>) -> Result<Self> {
        let mut cells = BTreeMap::new();
        for r in records {
            if r.capacity == 0 {
                return Err(Error::InvalidInput(format!(
                    "cell {} has zero capacity",
                    r.cell_id
                )));
            }
            if r.neighbors.contains(&r.cell_id) {
                return Err(Error::InvalidInput(format!(
                    "cell {} lists itself as neighbor",
                    r.cell_id
                )));
            }
            let id = r.cell_id.clone();
            if cells.insert(id.clone(), r).is_some() {
                return Err(Error::InvalidInput(format!("duplicate cell {id}")));
            }
        }
        for (id, r) in &cells {
            for n in &r.neighbors {
                let other = cells.get(n).ok_or_else(|| Error::UnknownCell(n.clone()))?;
                if !other.neighbors.contains(id) {
                    return Err(Error::InvalidInput(format!(
                        "neighbor relation {id}-{n} is not symmetric"
                    )));
                }
            }
        }
        Ok(FemtoDb { cells })
    }

    pub fn get(&self, id: &str) -> Option<&FemtoRecord> {
        self.cells.get(id)
    }

    pub fn cells(&self) -> impl Iterator<Item = &FemtoRecord> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub fn read_femto_db<R: Read>(input: R) -> Result<FemtoDb> {
    let mut r = csv::Reader::from_reader(input);
    let mut records = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 5 {
            return Err(Error::InvalidInput(format!(
                "femto row needs 5 fields, got {}",
                rec.len()
            )));
        }
        let num = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad number {:?}", &rec[i])))
        };
        records.push(FemtoRecord {
            cell_id: rec[0].trim().to_owned(),
            lat: num(1)?,
            lon: num(2)?,
            capacity: rec[3]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad capacity {:?}", &rec[3])))?,
            neighbors: rec[4]
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_owned)
                .collect(),
        });
    }
    FemtoDb::new(records)
}

pub fn write_femto_db<W: Write>(out: W, db: &FemtoDb) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_id", "lat", "lon", "capacity", "neighbor_ids"])?;
    for c in db.cells() {
        let neighbors: Vec<&str> = c.neighbors.iter().map(String::as_str).collect();
        w.write_record([
            c.cell_id.clone(),
            c.lat.to_string(),
            c.lon.to_string(),
            c.capacity.to_string(),
            neighbors.join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QosConfig {
    pub off_threshold: f64,
    pub overload_threshold: f64,
    /// Number of intervals planned, starting at interval 1.
    pub horizon: usize,
}

impl Default for QosConfig {
    fn default() -> Self {
        QosConfig {
            off_threshold: 0.2,
            overload_threshold: 0.9,
            horizon: BINS_PER_DAY,
        }
    }
}

impl QosConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.off_threshold)
            && self.overload_threshold > 0.0
            && self.overload_threshold <= 1.0
            && self.off_threshold < self.overload_threshold
            && (1..=BINS_PER_DAY).contains(&self.horizon);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "invalid QoS configuration {self:?}"
            )))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    On,
    Off,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanAction {
    pub cell_id: String,
    /// 1..=144.
    pub interval: u32,
    pub action: Action,
    pub whitespace_flag: bool,
}

/// Cells taking part in a plan, in id order, with neighbor indices.
struct Topology {
    ids: Vec<String>,
    capacity: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    fn new<'a>(ids: impl Iterator<Item = &'a String>, db: &FemtoDb) -> Result<Self> {
        let ids: Vec<String> = ids.cloned().collect();
        let index: BTreeMap<&str, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut capacity = Vec::with_capacity(ids.len());
        let mut neighbors = Vec::with_capacity(ids.len());
        for id in &ids {
            let rec = db.get(id).ok_or_else(|| Error::UnknownCell(id.clone()))?;
            capacity.push(rec.capacity as f64);
            neighbors.push(
                rec.neighbors
                    .iter()
                    .filter_map(|n| index.get(n.as_str()).copied())
                    .collect(),
            );
        }
        Ok(Topology {
            ids,
            capacity,
            neighbors,
        })
    }

    fn len(&self) -> usize {
        self.ids.len()
    }
}

/// Smallest "max utilization over a window of `MIN_OFF_RUN` consecutive
/// intervals" among windows inside the horizon that contain `t`.
fn run_scores(util: &[f64]) -> Vec<f64> {
    let h = util.len();
    let w = MIN_OFF_RUN.min(h);
    let window_max: Vec<f64> = (0..=h - w)
        .map(|s| {
            util[s..s + w]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    (0..h)
        .map(|t| {
            let first = t.saturating_sub(w - 1);
            let last = t.min(h - w);
            window_max[first..=last]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Result of allocating one interval's load.
struct Allocation {
    off: Vec<bool>,
    assigned: Vec<f64>,
    whitespace: Vec<bool>,
    /// Off cells whose load found no On neighbor.
    unserved: Vec<bool>,
}

enum OffRule<'a> {
    /// Decide Off cells from the threshold.
    Decide { threshold: f64 },
    /// Replay a given Off set.
    Given(&'a [bool]),
}

fn utilization(top: &Topology, loads: &[f64], c: usize) -> f64 {
    loads[c] / top.capacity[c]
}

fn allocate(
    top: &Topology,
    loads: &[f64],
    scores: &[f64],
    overload: f64,
    rule: OffRule<'_>,
) -> Allocation {
    let n = top.len();
    let mut assigned = loads.to_vec();
    let mut off = vec![false; n];
    let mut host = vec![false; n];
    let mut unserved = vec![false; n];
    let limit = |c: usize| overload * top.capacity[c];
    let overloaded: Vec<bool> = (0..n).map(|c| loads[c] > limit(c)).collect();

    let mut order: Vec<usize> = match &rule {
        OffRule::Decide { threshold } => (0..n)
            .filter(|&c| scores[c] < *threshold && !top.neighbors[c].iter().any(|&m| overloaded[m]))
            .collect(),
        OffRule::Given(given) => (0..n).filter(|&c| given[c]).collect(),
    };
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let least_utilized = |assigned: &[f64], off: &[bool], c: usize, need_fit: bool| {
        top.neighbors[c]
            .iter()
            .copied()
            .filter(|&m| !off[m] && (!need_fit || assigned[m] + assigned[c] <= limit(m)))
            .min_by(|&a, &b| {
                utilization(top, assigned, a)
                    .total_cmp(&utilization(top, assigned, b))
                    .then(a.cmp(&b))
            })
    };

    for c in order {
        match rule {
            OffRule::Decide { .. } => {
                if host[c] {
                    continue;
                }
                if let Some(m) = least_utilized(&assigned, &off, c, true) {
                    off[c] = true;
                    host[m] = true;
                    assigned[m] += assigned[c];
                    assigned[c] = 0.0;
                }
            }
            OffRule::Given(_) => {
                off[c] = true;
                let target = least_utilized(&assigned, &off, c, true)
                    .or_else(|| least_utilized(&assigned, &off, c, false));
                match target {
                    Some(m) => {
                        assigned[m] += assigned[c];
                        assigned[c] = 0.0;
                    }
                    None => unserved[c] = assigned[c] > 0.0,
                }
            }
        }
    }

    for o in 0..n {
        if off[o] || assigned[o] <= limit(o) {
            continue;
        }
        let mut receivers: Vec<usize> = top.neighbors[o]
            .iter()
            .copied()
            .filter(|&m| !off[m])
            .collect();
        receivers.sort_by(|&a, &b| {
            utilization(top, &assigned, a)
                .total_cmp(&utilization(top, &assigned, b))
                .then(a.cmp(&b))
        });
        for m in receivers {
            let excess = assigned[o] - limit(o);
            if excess <= 0.0 {
                break;
            }
            let moved = excess.min(limit(m) - assigned[m]);
            if moved > 0.0 {
                assigned[m] += moved;
                assigned[o] -= moved;
            }
        }
    }
    let whitespace = (0..n).map(|c| !off[c] && assigned[c] > limit(c)).collect();
    Allocation {
        off,
        assigned,
        whitespace,
        unserved,
    }
}

fn check_vectors(loads: &BTreeMap<String, Vec<f64>>, horizon: usize) -> Result<()> {
    for (id, v) in loads {
        if v.len() != BINS_PER_DAY {
            return Err(Error::InvalidInput(format!(
                "cell {id}: expected {BINS_PER_DAY} intervals, got {}",
                v.len()
            )));
        }
        if let Some(x) = v[..horizon].iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(format!("cell {id}: invalid load {x}")));
        }
    }
    Ok(())
}

/// Per-cell run scores over the horizon, indexed `[cell][interval − 1]`.
fn all_scores(top: &Topology, loads: &[&Vec<f64>], horizon: usize) -> Vec<Vec<f64>> {
    (0..top.len())
        .map(|c| {
            let util: Vec<f64> = loads[c][..horizon]
                .iter()
                .map(|&l| l / top.capacity[c])
                .collect();
            run_scores(&util)
        })
        .collect()
}

/// Plan intervals `1..=qos.horizon` for every forecast cell.
///
/// `classes` are advisory and only validated against the database; they do
/// not change the rule. Output is ordered by cell id, then interval.
pub fn plan(
    predicted: &BTreeMap<String, Vec<f64>>,
    classes: &BTreeMap<String, ClassLabel>,
    db: &FemtoDb,
    qos: &QosConfig,
) -> Result<Vec<PlanAction>> {
    qos.validate()?;
    check_vectors(predicted, qos.horizon)?;
    if let Some(id) = classes.keys().find(|id| db.get(id).is_none()) {
        return Err(Error::UnknownCell(id.clone()));
    }
    let top = Topology::new(predicted.keys(), db)?;
    let loads: Vec<&Vec<f64>> = predicted.values().collect();
    let scores = all_scores(&top, &loads, qos.horizon);

    let mut per_cell: Vec<Vec<PlanAction>> = vec![Vec::with_capacity(qos.horizon); top.len()];
    for t in 0..qos.horizon {
        let l: Vec<f64> = loads.iter().map(|v| v[t]).collect();
        let s: Vec<f64> = scores.iter().map(|v| v[t]).collect();
        let alloc = allocate(
            &top,
            &l,
            &s,
            qos.overload_threshold,
            OffRule::Decide {
                threshold: qos.off_threshold,
            },
        );
        for (c, actions) in per_cell.iter_mut().enumerate() {
            actions.push(PlanAction {
                cell_id: top.ids[c].clone(),
                interval: t as u32 + 1,
                action: if alloc.off[c] {
                    Action::Off
                } else {
                    Action::On
                },
                whitespace_flag: alloc.whitespace[c],
            });
        }
    }
    Ok(per_cell.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanEvaluation {
    /// Share of planned cell-intervals spent Off.
    pub energy_saved: f64,
    /// Cell-intervals whose assigned load exceeds the active capacity.
    pub qos_violations: usize,
}

/// Replay `actions` against actual loads.
///
/// Off cells hand their load to On neighbors with the planner's rule; if none
/// can take it all, the least-utilized On neighbor takes it anyway, and with
/// no On neighbor the load is unserved. Whitespace-flagged cells are treated
/// as having unbounded capacity.
pub fn evaluate_plan(
    actions: &[PlanAction],
    actual: &BTreeMap<String, Vec<f64>>,
    db: &FemtoDb,
    qos: &QosConfig,
) -> Result<PlanEvaluation> {
    if actions.is_empty() {
        return Err(Error::Empty("plan actions"));
    }
    let mut grid: BTreeMap<&str, BTreeMap<u32, &PlanAction>> = BTreeMap::new();
    for a in actions {
        if !actual.contains_key(&a.cell_id) {
            return Err(Error::Coverage(format!(
                "no actual load for cell {}",
                a.cell_id
            )));
        }
        if grid
            .entry(&a.cell_id)
            .or_default()
            .insert(a.interval, a)
            .is_some()
        {
            return Err(Error::Coverage(format!(
                "duplicate action for {} at {}",
                a.cell_id, a.interval
            )));
        }
    }
    if let Some(id) = actual.keys().find(|id| !grid.contains_key(id.as_str())) {
        return Err(Error::Coverage(format!("no actions for cell {id}")));
    }
    let intervals: Vec<u32> = grid
        .values()
        .next()
        .expect("non-empty")
        .keys()
        .copied()
        .collect();
    if grid.values().any(|m| !m.keys().eq(intervals.iter())) {
        return Err(Error::Coverage("cells cover different intervals".into()));
    }
    let horizon = intervals.len();
    if intervals != (1..=horizon as u32).collect::<Vec<_>>() || horizon > BINS_PER_DAY {
        return Err(Error::Coverage("intervals must run 1..=horizon".into()));
    }
    check_vectors(actual, horizon)?;

    let top = Topology::new(actual.keys(), db)?;
    let loads: Vec<&Vec<f64>> = actual.values().collect();
    let scores = all_scores(&top, &loads, horizon);
    let cell_actions: Vec<&BTreeMap<u32, &PlanAction>> =
        top.ids.iter().map(|id| &grid[id.as_str()]).collect();

    let mut off_count = 0usize;
    let mut violations = 0usize;
    for t in 0..horizon {
        let interval = t as u32 + 1;
        let off: Vec<bool> = cell_actions
            .iter()
            .map(|m| m[&interval].action == Action::Off)
            .collect();
        let whitespace: Vec<bool> = cell_actions
            .iter()
            .map(|m| m[&interval].whitespace_flag)
            .collect();
        let l: Vec<f64> = loads.iter().map(|v| v[t]).collect();
        let s: Vec<f64> = scores.iter().map(|v| v[t]).collect();
        let alloc = allocate(&top, &l, &s, qos.overload_threshold, OffRule::Given(&off));
        for c in 0..top.len() {
            if alloc.off[c] {
                off_count += 1;
                violations += alloc.unserved[c] as usize;
            } else if !whitespace[c] && alloc.assigned[c] > top.capacity[c] {
                violations += 1;
            }
        }
    }
    Ok(PlanEvaluation {
        energy_saved: off_count as f64 / (horizon * top.len()) as f64,
        qos_violations: violations,
    })
}

pub fn write_plan<W: Write>(out: W, actions: &[PlanAction]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell_id", "interval", "action", "whitespace_flag"])?;
    for a in actions {
        w.write_record([
            a.cell_id.clone(),
            a.interval.to_string(),
            match a.action {
                Action::On => "On",
                Action::Off => "Off",
            }
            .to_owned(),
            a.whitespace_flag.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_plan<R: Read>(input: R) -> Result<Vec<PlanAction>> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::InvalidInput("plan rows need 4 fields".into()));
        }
        out.push(PlanAction {
            cell_id: rec[0].to_owned(),
            interval: rec[1]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad interval {:?}", &rec[1])))?,
            action: match &rec[2] {
                "On" => Action::On,
                "Off" => Action::Off,
                other => return Err(Error::InvalidInput(format!("bad action {other:?}"))),
            },
            whitespace_flag: rec[3]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad flag {:?}", &rec[3])))?,
        });
    }
    Ok(out)
}
