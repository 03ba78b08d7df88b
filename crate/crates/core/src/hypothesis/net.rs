use std::collections::HashSet;
use std::sync::Arc;

use super::class::{unit_demand_value, Context, FiniteTable, Hypothesis, HypothesisClass};
use super::{HypothesisError, Result};
use crate::geometry::{unit_ball_volume, Vector};
use crate::Sign;

pub const DEFAULT_NET_CAP: usize = 5_000_000;

/// Boundary slack, in units of the grid step, when deciding whether a lattice
/// point lies inside a ball.
const LATTICE_SLACK: f64 = 1e-9;

#[derive(Clone, Debug)]
enum Members {
    Dense {
        unit_demand: bool,
        dim: usize,
        coords: Vec<f64>,
    },
    Sparse {
        dim: usize,
        s: usize,
        support: Vec<u16>,
        coords: Vec<f64>,
    },
    Table {
        table: Arc<FiniteTable>,
        rows: Vec<u32>,
    },
}

/// A finite ε-net of a class with its survivor mask.
#[derive(Clone, Debug)]
pub struct HypothesisNet {
    scale: f64,
    members: Members,
    alive: Vec<bool>,
    alive_count: usize,
}

impl HypothesisNet {
    /// Grid net of the whole class at scale `eps`.
    ///
    /// Linear classes use the lattice of step `eps/√d` restricted to the unit
    /// ball (per coordinate support for sparse classes), unit demand uses
    /// `eps·{0, …, ⌊1/eps⌋}^d`, and a finite table is its own net.
    pub fn build(class: &HypothesisClass, eps: f64) -> Result<Self> {
        Self::build_with_cap(class, eps, DEFAULT_NET_CAP)
    }

    pub fn build_with_cap(class: &HypothesisClass, eps: f64, cap: usize) -> Result<Self> {
        check_scale(eps)?;
        let members = match class {
            HypothesisClass::Linear { dim } => {
                let h = eps / (*dim as f64).sqrt();
                let predicted = unit_ball_volume(*dim) * (1.0 / h).powi(*dim as i32);
                if predicted > 4.0 * cap as f64 {
                    return Err(too_large(eps, predicted, cap));
                }
                let mut coords = Vec::new();
                let mut n = 0;
                let origin = vec![0.0; *dim];
                let ok = enumerate_ball_in_unit(h, &origin, 1.0, &mut |k| {
                    n += 1;
                    if n > cap {
                        return false;
                    }
                    coords.extend(k.iter().map(|&c| c as f64 * h));
                    true
                });
                if !ok {
                    return Err(too_large(eps, predicted, cap));
                }
                Members::Dense {
                    unit_demand: false,
                    dim: *dim,
                    coords,
                }
            }
            HypothesisClass::SparseLinear { dim, sparsity } => {
                sparse_members(*dim, *sparsity, eps, None, cap)?
            }
            HypothesisClass::UnitDemand { dim } => {
                let steps = (1.0 / eps + LATTICE_SLACK).floor() as usize + 1;
                let predicted = (steps as f64).powi(*dim as i32);
                if predicted > cap as f64 {
                    return Err(too_large(eps, predicted, cap));
                }
                let mut coords = Vec::with_capacity(predicted as usize * dim);
                let mut k = vec![0usize; *dim];
                loop {
                    coords.extend(k.iter().map(|&c| c as f64 * eps));
                    if !odometer(&mut k, steps) {
                        break;
                    }
                }
                Members::Dense {
                    unit_demand: true,
                    dim: *dim,
                    coords,
                }
            }
            HypothesisClass::FiniteTable(t) => {
                if t.len() > cap {
                    return Err(too_large(eps, t.len() as f64, cap));
                }
                Members::Table {
                    table: t.clone(),
                    rows: (0..t.len() as u32).collect(),
                }
            }
        };
        Ok(Self::with_members(eps, members))
    }

    /// Grid points of the scale-`eps` net lying within `radius` (in the
    /// class's sup-distance) of at least one of `centers`.
    ///
    /// `centers` are dense parameter vectors; finite tables ignore them and
    /// return the whole table.
    pub fn build_local<'a>(
        class: &HypothesisClass,
        eps: f64,
        centers: impl IntoIterator<Item = &'a [f64]>,
        radius: f64,
        cap: usize,
    ) -> Result<Self> {
        check_scale(eps)?;
        let members = match class {
            HypothesisClass::Linear { dim } => {
                let h = eps / (*dim as f64).sqrt();
                let mut seen: HashSet<Vec<i64>> = HashSet::new();
                let mut coords = Vec::new();
                let mut overflow = false;
                for c in centers {
                    enumerate_ball_in_unit(h, c, radius, &mut |k| {
                        if seen.len() >= cap {
                            overflow = true;
                            return false;
                        }
                        if seen.insert(k.to_vec()) {
                            coords.extend(k.iter().map(|&c| c as f64 * h));
                        }
                        true
                    });
                    if overflow {
                        return Err(too_large(eps, seen.len() as f64, cap));
                    }
                }
                Members::Dense {
                    unit_demand: false,
                    dim: *dim,
                    coords,
                }
            }
            HypothesisClass::SparseLinear { dim, sparsity } => {
                let centers: Vec<&[f64]> = centers.into_iter().collect();
                sparse_members(*dim, *sparsity, eps, Some((&centers, radius)), cap)?
            }
            HypothesisClass::UnitDemand { dim } => {
                let top = (1.0 / eps + LATTICE_SLACK).floor() as i64;
                let mut seen: HashSet<Vec<i64>> = HashSet::new();
                let mut coords = Vec::new();
                for c in centers {
                    let lo: Vec<i64> = c
                        .iter()
                        .map(|v| (((v - radius) / eps) - LATTICE_SLACK).ceil().max(0.0) as i64)
                        .collect();
                    let hi: Vec<i64> = c
                        .iter()
                        .map(|v| ((((v + radius) / eps) + LATTICE_SLACK).floor() as i64).min(top))
                        .collect();
                    if lo.iter().zip(&hi).any(|(a, b)| a > b) {
                        continue;
                    }
                    let mut k = lo.clone();
                    loop {
                        if seen.len() >= cap {
                            return Err(too_large(eps, seen.len() as f64, cap));
                        }
                        if seen.insert(k.clone()) {
                            coords.extend(k.iter().map(|&c| c as f64 * eps));
                        }
                        if !odometer_range(&mut k, &lo, &hi) {
                            break;
                        }
                    }
                }
                Members::Dense {
                    unit_demand: true,
                    dim: *dim,
                    coords,
                }
            }
            HypothesisClass::FiniteTable(_) => return Self::build_with_cap(class, eps, cap),
        };
        Ok(Self::with_members(eps, members))
    }

    fn with_members(scale: f64, members: Members) -> Self {
        let n = match &members {
            Members::Dense { dim, coords, .. } => coords.len() / dim.max(&1),
            Members::Sparse { s, support, .. } => support.len() / s.max(&1),
            Members::Table { rows, .. } => rows.len(),
        };
        HypothesisNet {
            scale,
            members,
            alive: vec![true; n],
            alive_count: n,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.alive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alive.is_empty()
    }

    pub fn alive_count(&self) -> usize {
        self.alive_count
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn alive_mask(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.alive
            .iter()
            .enumerate()
            .filter_map(|(i, a)| a.then_some(i))
    }

    /// `f_i(x)`.
    pub fn value(&self, i: usize, x: &Context) -> Result<f64> {
        match (&self.members, x) {
            (
                Members::Dense {
                    unit_demand,
                    dim,
                    coords,
                },
                Context::Vector(x),
            ) if x.dim() == *dim => {
                let p = &coords[i * dim..(i + 1) * dim];
                Ok(if *unit_demand {
                    unit_demand_value(p, x)
                } else {
                    crate::geometry::dot(p, x)
                })
            }
            (
                Members::Sparse {
                    dim,
                    s,
                    support,
                    coords,
                },
                Context::Vector(x),
            ) if x.dim() == *dim => {
                let mut v = 0.0;
                for j in i * s..(i + 1) * s {
                    v += coords[j] * x[support[j] as usize];
                }
                Ok(v)
            }
            (Members::Table { table, rows }, Context::Index(j)) if *j < table.context_count() => {
                Ok(table.value(rows[i] as usize, *j))
            }
            _ => Err(HypothesisError::ContextMismatch(
                "context incompatible with net members".into(),
            )),
        }
    }

    /// Values of every member (alive or not) at `x`.
    pub fn values(&self, x: &Context) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.value(i, x)).collect()
    }

    pub fn alive_values(&self, x: &Context) -> Result<Vec<f64>> {
        self.alive_indices().map(|i| self.value(i, x)).collect()
    }

    /// Kills every alive member with `σ·(y − f(x)) < −margin`; returns how
    /// many died.
    pub fn filter(&mut self, x: &Context, y: f64, sigma: Sign, margin: f64) -> Result<usize> {
        if !(margin >= 0.0) {
            return Err(HypothesisError::InvalidArgument(format!(
                "margin must be ≥ 0, got {margin}"
            )));
        }
        let s = sigma.value();
        let mut killed = 0;
        for i in 0..self.len() {
            if self.alive[i] && s * (y - self.value(i, x)?) < -margin {
                self.alive[i] = false;
                killed += 1;
            }
        }
        self.alive_count -= killed;
        Ok(killed)
    }

    /// Marks member `i` dead.
    pub fn kill(&mut self, i: usize) {
        if self.alive[i] {
            self.alive[i] = false;
            self.alive_count -= 1;
        }
    }

    /// `max − min` of `f(x)` over alive members.
    pub fn set_width(&self, x: &Context) -> Result<f64> {
        let (lo, hi) = self.alive_range(x)?;
        Ok(hi - lo)
    }

    pub fn alive_range(&self, x: &Context) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in self.alive_indices() {
            let v = self.value(i, x)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            return Err(HypothesisError::EmptyNet);
        }
        Ok((lo, hi))
    }

    /// Lower median of alive values, or with `weights` (one per member, dead
    /// members ignored) the smallest `m` carrying at least half the mass at or
    /// below it.
    pub fn set_median(&self, x: &Context, weights: Option<&[f64]>) -> Result<f64> {
        match weights {
            None => {
                let mut v = self.alive_values(x)?;
                lower_median(&mut v).ok_or(HypothesisError::EmptyNet)
            }
            Some(w) => {
                if w.len() != self.len() {
                    return Err(HypothesisError::InvalidArgument(format!(
                        "{} weights for {} members",
                        w.len(),
                        self.len()
                    )));
                }
                let mut pairs = Vec::with_capacity(self.alive_count);
                for i in self.alive_indices() {
                    pairs.push((self.value(i, x)?, w[i]));
                }
                weighted_median(&mut pairs).ok_or(HypothesisError::EmptyNet)
            }
        }
    }

    /// Member `i` as a class element.
    pub fn member(&self, i: usize) -> Hypothesis {
        match &self.members {
            Members::Dense {
                unit_demand,
                dim,
                coords,
            } => {
                let v = Vector::from(&coords[i * dim..(i + 1) * dim]);
                if *unit_demand {
                    Hypothesis::UnitDemand(v)
                } else {
                    Hypothesis::Linear(v)
                }
            }
            Members::Sparse { .. } => Hypothesis::Linear(Vector::new(self.dense_coords(i))),
            Members::Table { rows, .. } => Hypothesis::Row(rows[i] as usize),
        }
    }

    /// Parameter vector of member `i`; empty for tables.
    pub fn dense_coords(&self, i: usize) -> Vec<f64> {
        match &self.members {
            Members::Dense { dim, coords, .. } => coords[i * dim..(i + 1) * dim].to_vec(),
            Members::Sparse {
                dim,
                s,
                support,
                coords,
            } => {
                let mut v = vec![0.0; *dim];
                for j in i * s..(i + 1) * s {
                    v[support[j] as usize] += coords[j];
                }
                v
            }
            Members::Table { .. } => Vec::new(),
        }
    }

    /// Sup-distance over contexts between member `i` and `target`: Euclidean
    /// for linear classes, max-coordinate for unit demand, max over the
    /// table's contexts for finite tables.
    pub fn distance_to(&self, i: usize, target: &Hypothesis) -> f64 {
        match (&self.members, target) {
            (Members::Table { table, rows }, Hypothesis::Row(r)) => {
                let a = &table.values[rows[i] as usize];
                let b = &table.values[*r];
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max)
            }
            (
                Members::Dense {
                    unit_demand: true, ..
                },
                Hypothesis::UnitDemand(w),
            ) => self
                .dense_coords(i)
                .iter()
                .zip(w.iter())
                .map(|(p, q)| (p - q).abs())
                .fold(0.0, f64::max),
            (_, Hypothesis::Linear(v)) => crate::geometry::dist(&self.dense_coords(i), v),
            _ => f64::INFINITY,
        }
    }

    /// Member nearest to `target`, dead or alive.
    pub fn nearest(&self, target: &Hypothesis) -> Option<(usize, f64)> {
        (0..self.len())
            .map(|i| (i, self.distance_to(i, target)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Drops every member with `keep[i] == false`.
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.len());
        let mut alive = Vec::with_capacity(self.len());
        for (i, &k) in keep.iter().enumerate() {
            if k {
                alive.push(self.alive[i]);
            }
        }
        match &mut self.members {
            Members::Dense { dim, coords, .. } => retain_chunks(coords, *dim, keep),
            Members::Sparse {
                s, support, coords, ..
            } => {
                retain_chunks(support, *s, keep);
                retain_chunks(coords, *s, keep);
            }
            Members::Table { rows, .. } => retain_chunks(rows, 1, keep),
        }
        self.alive_count = alive.iter().filter(|a| **a).count();
        self.alive = alive;
    }
}

fn retain_chunks<T: Copy>(data: &mut Vec<T>, width: usize, keep: &[bool]) {
    let mut out = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            for j in 0..width {
                data[out * width + j] = data[i * width + j];
            }
            out += 1;
        }
    }
    data.truncate(out * width);
}

fn check_scale(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(HypothesisError::InvalidArgument(format!(
            "net scale must lie in (0, 1], got {eps}"
        )));
    }
    Ok(())
}

fn too_large(scale: f64, predicted: f64, cap: usize) -> HypothesisError {
    HypothesisError::NetTooLarge {
        scale,
        predicted: predicted.min(usize::MAX as f64) as usize,
        cap,
    }
}

pub(crate) fn lower_median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    let k = (v.len() - 1) / 2;
    let (_, m, _) = v.select_nth_unstable_by(k, f64::total_cmp);
    Some(*m)
}

/// Smallest value whose cumulative weight reaches half the total.
pub(crate) fn weighted_median(pairs: &mut [(f64, f64)]) -> Option<f64> {
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    if pairs.is_empty() || !(total > 0.0) {
        return None;
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let half = 0.5 * total * (1.0 - 1e-12);
    let mut acc = 0.0;
    for &(v, w) in pairs.iter() {
        acc += w;
        if acc >= half {
            return Some(v);
        }
    }
    pairs.last().map(|p| p.0)
}

fn odometer(k: &mut [usize], steps: usize) -> bool {
    for c in k.iter_mut() {
        *c += 1;
        if *c < steps {
            return true;
        }
        *c = 0;
    }
    false
}

fn odometer_range(k: &mut [i64], lo: &[i64], hi: &[i64]) -> bool {
    for j in 0..k.len() {
        k[j] += 1;
        if k[j] <= hi[j] {
            return true;
        }
        k[j] = lo[j];
    }
    false
}

/// Lattice points `h·k` with `‖h·k − center‖ ≤ radius` and `‖h·k‖ ≤ 1`.
/// `emit` returns false to abort; the return value reports completion.
fn enumerate_ball_in_unit(
    h: f64,
    center: &[f64],
    radius: f64,
    emit: &mut dyn FnMut(&[i64]) -> bool,
) -> bool {
    let mut k = vec![0i64; center.len()];
    let slack = (LATTICE_SLACK * h).powi(2);
    recurse(
        h,
        center,
        0,
        radius * radius * (1.0 + 1e-12) + slack,
        1.0 + 1e-12 + slack,
        &mut k,
        emit,
    )
}

fn recurse(
    h: f64,
    center: &[f64],
    j: usize,
    center_budget: f64,
    origin_budget: f64,
    k: &mut Vec<i64>,
    emit: &mut dyn FnMut(&[i64]) -> bool,
) -> bool {
    if j == center.len() {
        return emit(k);
    }
    let rc = center_budget.max(0.0).sqrt();
    let ro = origin_budget.max(0.0).sqrt();
    let lo = ((center[j] - rc) / h).ceil().max((-ro / h).ceil()) as i64;
    let hi = ((center[j] + rc) / h).floor().min((ro / h).floor()) as i64;
    for kk in lo..=hi {
        let p = kk as f64 * h;
        let cb = center_budget - (p - center[j]).powi(2);
        let ob = origin_budget - p * p;
        if cb < 0.0 || ob < 0.0 {
            continue;
        }
        k[j] = kk;
        if !recurse(h, center, j + 1, cb, ob, k, emit) {
            return false;
        }
    }
    true
}

/// Smallest-index completion of a nonzero set to `s` coordinates.
fn canonical_support(nonzero: &[u16], s: usize) -> Vec<u16> {
    let mut out = nonzero.to_vec();
    let mut next = 0u16;
    while out.len() < s {
        if !nonzero.contains(&next) {
            out.push(next);
        }
        next += 1;
    }
    out.sort_unstable();
    out
}

fn combinations(n: usize, s: usize) -> Vec<Vec<u16>> {
    let mut out = Vec::new();
    let mut cur: Vec<u16> = (0..s as u16).collect();
    if s > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut i = s;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if (cur[i] as usize) < n - s + i {
                cur[i] += 1;
                for j in i + 1..s {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Sparse grid members: each `s`-support carries the step-`eps/√s` lattice of
/// its coordinate ball, and a point is kept only under the canonical support
/// of its nonzero set so that no member repeats.
fn sparse_members(
    dim: usize,
    sparsity: usize,
    eps: f64,
    local: Option<(&[&[f64]], f64)>,
    cap: usize,
) -> Result<Members> {
    let s = sparsity.clamp(1, dim);
    let h = eps / (s as f64).sqrt();
    let supports = combinations(dim, s);
    if local.is_none() {
        let per = unit_ball_volume(s) * (1.0 / h).powi(s as i32);
        let predicted = per * supports.len() as f64;
        if predicted > 4.0 * cap as f64 {
            return Err(too_large(eps, predicted, cap));
        }
    }
    let mut support_out: Vec<u16> = Vec::new();
    let mut coords: Vec<f64> = Vec::new();
    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    let mut n = 0usize;
    let mut overflow = false;
    let mut sub_center = vec![0.0; s];
    let mut nonzero: Vec<u16> = Vec::with_capacity(s);
    let origin = vec![vec![0.0; dim]];
    let origin_refs: Vec<&[f64]> = origin.iter().map(|v| v.as_slice()).collect();
    let (centers, radius) = match local {
        Some((c, r)) => (c.to_vec(), r),
        None => (origin_refs, 1.0),
    };
    for c in &centers {
        for sup in &supports {
            let mut off = 0.0;
            for (j, cj) in c.iter().enumerate() {
                if !sup.contains(&(j as u16)) {
                    off += cj * cj;
                }
            }
            let budget = radius * radius - off;
            if budget < -1e-15 {
                continue;
            }
            for (a, &j) in sup.iter().enumerate() {
                sub_center[a] = c[j as usize];
            }
            let complete =
                enumerate_ball_in_unit(h, &sub_center, budget.max(0.0).sqrt(), &mut |k| {
                    nonzero.clear();
                    for (a, &kk) in k.iter().enumerate() {
                        if kk != 0 {
                            nonzero.push(sup[a]);
                        }
                    }
                    if canonical_support(&nonzero, s) != *sup {
                        return true;
                    }
                    if local.is_some() {
                        let mut key: Vec<i64> = sup.iter().map(|&j| j as i64).collect();
                        key.extend_from_slice(k);
                        if !seen.insert(key) {
                            return true;
                        }
                    }
                    n += 1;
                    if n > cap {
                        overflow = true;
                        return false;
                    }
                    support_out.extend_from_slice(sup);
                    coords.extend(k.iter().map(|&kk| kk as f64 * h));
                    true
                });
            if !complete || overflow {
                return Err(too_large(eps, n as f64, cap));
            }
        }
    }
    Ok(Members::Sparse {
        dim,
        s,
        support: support_out,
        coords,
    })
}
