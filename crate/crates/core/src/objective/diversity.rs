//! Incremental log-determinant of `A = I + alpha * M` over a growing set.
//!
//! The state keeps `A^{-1}` and `log det A`. Appending one element borders `A`
//! with `v = alpha * k(e, S)` and `a = 1 + alpha * k(e, e)`; the determinant
//! grows by the Schur complement `s = a - v^T A^{-1} v` and the inverse is
//! updated blockwise from `u = A^{-1} v` and `s`, both in `O(n^2)`.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Schur complements at or below this are treated as exact duplicates.
pub const S_FLOOR: f64 = 1e-12;

static NEXT_STATE_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct DiversityState {
    alpha: f64,
    members: Vec<u64>,
    /// Row-major `n x n` inverse of `A`.
    inv: Vec<f64>,
    logdet: f64,
    instance: u64,
    version: u64,
}

/// Result of evaluating one candidate against a state, reusable by
/// [`DiversityState::commit`] as long as the state is unchanged.
#[derive(Debug, Clone)]
pub struct DiversityProbe {
    /// `0.5 * ln s`, or 0 when degenerate.
    pub gain: f64,
    /// `alpha * k(e, x_i)` for each member in order.
    pub cross: Vec<f64>,
    pub schur: f64,
    pub degenerate: bool,
    inv_cross: Vec<f64>,
    instance: u64,
    version: u64,
}

impl DiversityState {
    pub fn new(alpha: f64) -> Self {
        DiversityState {
            alpha,
            members: Vec::new(),
            inv: Vec::new(),
            logdet: 0.0,
            instance: NEXT_STATE_ID.fetch_add(1, Ordering::Relaxed),
            version: 0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[u64] {
        &self.members
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Row-major inverse of `I + alpha * M_S`.
    pub fn inverse(&self) -> &[f64] {
        &self.inv
    }

    /// Probes a candidate given its raw kernel values against the members
    /// (`similarities[i] = k(e, x_i)`) and its self-similarity `k(e, e)`.
    pub fn probe(&self, id: &str, similarities: &[f64], self_similarity: f64) -> Result<DiversityProbe> {
        let n = self.members.len();
        if similarities.len() != n {
            return Err(Error::DimensionMismatch {
                left: similarities.len(),
                right: n,
            });
        }
        let cross: Vec<f64> = similarities.iter().map(|k| self.alpha * k).collect();
        let mut inv_cross = vec![0.0; n];
        let mut quad = 0.0;
        for (i, row) in self.inv.chunks_exact(n.max(1)).take(n).enumerate() {
            let ui: f64 = row.iter().zip(&cross).map(|(a, b)| a * b).sum();
            inv_cross[i] = ui;
            quad += cross[i] * ui;
        }
        let schur = 1.0 + self.alpha * self_similarity - quad;
        if !schur.is_finite() {
            return Err(Error::numeric(id, "Schur complement is not finite"));
        }
        let degenerate = schur <= S_FLOOR;
        let gain = if degenerate { 0.0 } else { 0.5 * schur.ln() };
        Ok(DiversityProbe {
            gain,
            cross,
            schur,
            degenerate,
            inv_cross,
            instance: self.instance,
            version: self.version,
        })
    }

    /// Appends the probed candidate under `key`.
    pub fn commit(&mut self, key: u64, id: &str, probe: DiversityProbe) -> Result<()> {
        if probe.instance != self.instance || probe.version != self.version {
            return Err(Error::StaleProbe);
        }
        if probe.degenerate {
            return Err(Error::DegenerateDuplicate { id: id.to_string() });
        }
        let n = self.members.len();
        let m = n + 1;
        let s = probe.schur;
        let u = &probe.inv_cross;
        let mut next = vec![0.0; m * m];
        for i in 0..n {
            let ui = u[i] / s;
            let row = &self.inv[i * n..(i + 1) * n];
            let out = &mut next[i * m..i * m + n];
            for j in 0..n {
                out[j] = row[j] + ui * u[j];
            }
            next[i * m + n] = -ui;
            next[n * m + i] = -ui;
        }
        next[n * m + n] = 1.0 / s;
        self.inv = next;
        self.logdet += 2.0 * probe.gain;
        self.members.push(key);
        self.version += 1;
        Ok(())
    }
}
