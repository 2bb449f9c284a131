use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{TrajectoryTable, WindowedDataset};
use crate::signal::{forward_diff, gaussian_smooth};

/// Gaussian widths in input frames.
pub const BANK_SIGMAS: [u32; 3] = [8, 30, 120];
pub const BANK_ORDERS: [u32; 3] = [0, 1, 2];

/// Smoothed features and derivatives, one row per input frame.
///
/// Columns are ordered feature-major, then derivative order, then width,
/// and named `<feature>__d<order>__g<sigma>`.
#[derive(Debug, Clone, PartialEq)]
pub struct BankValues {
    pub names: Vec<String>,
    pub frames: usize,
    /// Row-major `frames x names.len()`.
    pub values: Vec<f64>,
}

impl BankValues {
    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let w = self.width();
        &self.values[frame * w..(frame + 1) * w]
    }
}

fn bank_from_columns(names: &[String], columns: &[Vec<f64>], frames: usize) -> BankValues {
    let width = names.len() * BANK_ORDERS.len() * BANK_SIGMAS.len();
    let mut out_names = Vec::with_capacity(width);
    let mut out_cols: Vec<Vec<f64>> = Vec::with_capacity(width);
    for (name, col) in names.iter().zip(columns) {
        let mut derived = col.clone();
        for order in BANK_ORDERS {
            if order > 0 {
                derived = forward_diff(&derived, 1.0);
            }
            for sigma in BANK_SIGMAS {
                out_names.push(format!("{name}__d{order}__g{sigma}"));
                out_cols.push(gaussian_smooth(&derived, sigma as f64));
            }
        }
    }
    let mut values = alloc::vec![0.0; frames * width];
    for (j, col) in out_cols.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            values[i * width + j] = *v;
        }
    }
    BankValues {
        names: out_names,
        frames,
        values,
    }
}

/// Bank of `F x 3 x 3` smoothed features for every frame of a video.
///
/// Derivatives are forward differences per input frame.
pub fn build_feature_bank(table: &TrajectoryTable) -> BankValues {
    let columns: Vec<Vec<f64>> = (0..table.feature_count()).map(|f| table.column(f)).collect();
    bank_from_columns(&table.features.names, &columns, table.frames())
}

/// Bank rows at the center frame of every example, computed over each
/// source video in full.
pub fn bank_rows(data: &WindowedDataset) -> BankValues {
    let names = &data.feature_space().names;
    let nf = data.feature_count();
    let mut per_segment: alloc::collections::BTreeMap<u32, BankValues> = Default::default();
    let mut values = Vec::new();
    let mut out_names = Vec::new();
    for i in 0..data.len() {
        let p = data.provenance(i);
        let bank = per_segment.entry(p.segment).or_insert_with(|| {
            let source = data.segment_values(p.segment);
            let frames = source.len() / nf;
            let columns: Vec<Vec<f64>> = (0..nf)
                .map(|f| source.iter().skip(f).step_by(nf).copied().collect())
                .collect();
            bank_from_columns(names, &columns, frames)
        });
        if out_names.is_empty() {
            out_names = bank.names.clone();
        }
        values.extend_from_slice(bank.row(p.center as usize));
    }
    if out_names.is_empty() {
        out_names = bank_from_columns(names, &alloc::vec![Vec::new(); nf], 0).names;
    }
    BankValues {
        names: out_names,
        frames: data.len(),
        values,
    }
}
