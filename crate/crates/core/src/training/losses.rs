//! Training objectives. All losses are mean absolute errors, so each term is
//! normalised by the element count of the field it compares.

use crate::error::{Error, Result};
use crate::tensor::{Element, Var};

/// Central-view synthesis loss: L1 between prediction and target view.
pub fn loss_cvs<T: Element>(pred: &Var<T>, target: &Var<T>) -> Result<Var<T>> {
    pred.l1_mean(target)
}

/// Backward-degradation loss: L1 between degraded prediction and LR view.
pub fn loss_bd<T: Element>(pred: &Var<T>, target: &Var<T>) -> Result<Var<T>> {
    pred.l1_mean(target)
}

/// HR-aware loss: L1 between the HR image and the central view synthesised
/// from super-resolved side views, both at HR scale.
pub fn loss_hr<T: Element>(hr: &Var<T>, synthesized: &Var<T>) -> Result<Var<T>> {
    if hr.shape() != synthesized.shape() {
        return Err(Error::dim(format!(
            "HR-aware loss compares {:?} with {:?}",
            hr.shape(),
            synthesized.shape()
        )));
    }
    hr.l1_mean(synthesized)
}

/// Which EPIs enter [`loss_epi`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpiSelection {
    /// Also use the EPIs through the central angular row/column.
    pub include_center: bool,
}

/// EPI-gradient loss between two view stacks `[b, A², H, W]`.
///
/// Horizontal EPIs (fixed `y`, `u`) contribute forward differences along `x`
/// and `v`; vertical EPIs (fixed `x`, `v`) along `y` and `u`. Without
/// `include_center`, horizontal EPIs skip `u = u0` and vertical EPIs skip
/// `v = v0`. The result is the sum of the four mean absolute differences.
pub fn loss_epi<T: Element>(a: &Var<T>, b: &Var<T>, angular: usize, sel: EpiSelection) -> Result<Var<T>> {
    if a.shape() != b.shape() {
        return Err(Error::dim(format!(
            "EPI loss compares {:?} with {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let s = a.shape();
    if s.len() != 4 || s[1] != angular * angular || angular < 2 {
        return Err(Error::dim(format!(
            "EPI loss expects [b, {}, H, W], got {s:?}",
            angular * angular
        )));
    }
    let shape5 = [s[0], angular, angular, s[2], s[3]];
    let (a5, b5) = (a.reshape(shape5)?, b.reshape(shape5)?);
    let keep: Vec<usize> = (0..angular)
        .filter(|&i| sel.include_center || i != angular / 2)
        .collect();
    // (axis fixed by the EPI family, axes differenced within it)
    let families = [(1usize, [4usize, 2usize]), (2, [3, 1])];
    let mut terms = Vec::with_capacity(4);
    for (fixed, axes) in families {
        let (sa, sb) = (a5.select(fixed, &keep)?, b5.select(fixed, &keep)?);
        for axis in axes {
            terms.push(sa.diff(axis)?.l1_mean(&sb.diff(axis)?)?);
        }
    }
    Var::sum_of(&terms)
}
