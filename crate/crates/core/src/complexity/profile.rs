use std::io::Write;

use serde::Serialize;

use super::{c_approx, ic_bar_window, ic_window, Bound, ConsistencyWindow};
use crate::bitstr::BitString;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProfileRow {
    pub x: BitString,
    pub c: Bound,
    pub ic: Bound,
    pub icbar: Bound,
}

/// `C^s(x)`, `ic(x)` and `ic̄(x)` for every point of the window, in canonical
/// order.
pub fn hardness_profile(w: &ConsistencyWindow, budget: u64, max_len: u32) -> Vec<ProfileRow> {
    w.iter()
        .map(|(x, _)| ProfileRow {
            x: x.clone(),
            c: c_approx(x, budget, max_len).value,
            ic: ic_window(x, w, budget, max_len).expect("x in window").value,
            icbar: ic_bar_window(x, w, budget, max_len)
                .expect("x in window")
                .value,
        })
        .collect()
}

/// CSV with header `x,c,ic,icbar,budget,max_len`.
pub fn write_profile_csv<W: Write>(
    rows: &[ProfileRow],
    budget: u64,
    max_len: u32,
    out: W,
) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["x", "c", "ic", "icbar", "budget", "max_len"])?;
    for r in rows {
        wtr.write_record([
            r.x.literal(),
            r.c.to_string(),
            r.ic.to_string(),
            r.icbar.to_string(),
            budget.to_string(),
            max_len.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitstr::strings_up_to;

    #[test]
    fn constant_zero_window_profile() {
        let w = ConsistencyWindow::constant(strings_up_to(2), false);
        let rows = hardness_profile(&w, 4, 6);
        assert_eq!(rows.len(), 7);
        for r in &rows {
            assert_eq!(r.ic, Bound::Finite(3));
            assert!(r.icbar <= r.ic);
        }
        assert!(rows.windows(2).all(|p| p[0].x < p[1].x));
    }

    #[test]
    fn c_column_non_increasing_in_budget() {
        let w = ConsistencyWindow::constant(strings_up_to(2), true);
        let mut prev = hardness_profile(&w, 1, 6);
        for budget in 2..6 {
            let next = hardness_profile(&w, budget, 6);
            for (a, b) in prev.iter().zip(&next) {
                assert!(b.c <= a.c);
            }
            prev = next;
        }
    }

    #[test]
    fn csv_layout() {
        let w = ConsistencyWindow::constant([BitString::empty()], false);
        let rows = hardness_profile(&w, 2, 3);
        let mut buf = Vec::new();
        write_profile_csv(&rows, 2, 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,c,ic,icbar,budget,max_len\n,0,3,3,2,3\n");
    }
}
