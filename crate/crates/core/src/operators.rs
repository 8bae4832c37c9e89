//! Composition operators on delivery distributions.
//!
//! * [`forward`]: the bundle follows the first stage, then the second stage
//!   starting from the time it arrived.
//! * [`duplicate`]: two independent copies race; the earliest arrival wins.
//! * [`schedule`]: per send bin, pick the second strategy only when it
//!   strictly dominates the first.
//!
//! Forwarding binds tighter than duplication, and scheduling is loosest.

use serde::{Deserialize, Serialize};

use crate::distribution::{row, DeliveryDistribution, Dominance};
use crate::error::Result;

/// Sequential composition.
///
/// `result[T][t] = Σ_{x ≤ t} first[T][x] · second[T + x][t − x]`, where a
/// send time at or beyond the horizon delivers nothing.
pub fn forward(
    first: &DeliveryDistribution,
    second: &DeliveryDistribution,
) -> Result<DeliveryDistribution> {
    first.grid().ensure_same(&second.grid())?;
    let h = first.horizon();
    let mut out = DeliveryDistribution::bottom(first.grid());
    for send in 0..h {
        let src = first.row(send);
        let dst = out.row_mut(send);
        for (x, &m) in src.iter().enumerate() {
            if m == 0.0 || send + x >= h {
                continue;
            }
            let next = second.row(send + x);
            for (u, &n) in next[..h - x].iter().enumerate() {
                dst[x + u] += m * n;
            }
        }
    }
    Ok(out)
}

/// Earliest arrival of two independent copies.
///
/// With `p_i` the mass in bin `t` and `S_i` the probability of no arrival
/// before `t`, `result = p1·S2 + p2·S1 − p1·p2`: the exact law of the minimum
/// of two independent bin-valued delays.
pub fn duplicate(
    a: &DeliveryDistribution,
    b: &DeliveryDistribution,
) -> Result<DeliveryDistribution> {
    a.grid().ensure_same(&b.grid())?;
    let h = a.horizon();
    let mut out = DeliveryDistribution::bottom(a.grid());
    for send in 0..h {
        let (ra, rb) = (a.row(send), b.row(send));
        let dst = out.row_mut(send);
        let (mut sa, mut sb) = (1.0, 1.0);
        for t in 0..h {
            let (pa, pb) = (ra[t], rb[t]);
            dst[t] = pa * sb + pb * sa - pa * pb;
            sa -= pa;
            sb -= pb;
        }
    }
    Ok(out)
}

/// Folds [`duplicate`] over a non-empty list.
pub fn duplicate_all<'a, I>(items: I) -> Result<Option<DeliveryDistribution>>
where
    I: IntoIterator<Item = &'a DeliveryDistribution>,
{
    let mut iter = items.into_iter();
    let Some(first) = iter.next() else {
        return Ok(None);
    };
    let mut acc = first.clone();
    for d in iter {
        acc = duplicate(&acc, d)?;
    }
    Ok(Some(acc))
}

/// Which argument of [`schedule`] a row was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scheduled {
    pub distribution: DeliveryDistribution,
    pub choices: Vec<Choice>,
}

/// Per-row choice: the second row replaces the first only when it strictly
/// dominates. Equal and incomparable rows keep the first argument.
pub fn schedule(
    first: &DeliveryDistribution,
    second: &DeliveryDistribution,
) -> Result<Scheduled> {
    first.grid().ensure_same(&second.grid())?;
    let h = first.horizon();
    let mut out = first.clone();
    let mut choices = vec![Choice::First; h];
    for send in 0..h {
        if row::compare(second.row(send), first.row(send)) == Dominance::Greater {
            out.row_mut(send).copy_from_slice(second.row(send));
            choices[send] = Choice::Second;
        }
    }
    Ok(Scheduled {
        distribution: out,
        choices,
    })
}
