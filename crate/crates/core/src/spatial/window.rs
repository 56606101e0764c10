use crate::counters::OpCounters;
use crate::error::ReduceError;
use crate::metrics::{cosine_with_norms, norm};
use crate::plan::{PlanMode, ReductionPlan};
use crate::tokens::TokenSet;

/// Merges each non-overlapping `window` of a frame into its top-left surviving
/// token when every pair inside the window has cosine similarity of at least
/// `threshold`. Bit-identical vectors always count as similar, so a threshold
/// above 1 merges only windows of exact duplicates. Windows on the right and
/// bottom edges may be ragged.
pub fn window_merge(
    tokens: &TokenSet,
    window: (usize, usize),
    threshold: f64,
) -> Result<ReductionPlan, ReduceError> {
    window_merge_counted(tokens, window, threshold, &mut OpCounters::default())
}

pub fn window_merge_counted(
    tokens: &TokenSet,
    window: (usize, usize),
    threshold: f64,
    counters: &mut OpCounters,
) -> Result<ReductionPlan, ReduceError> {
    let grid = tokens.grid().ok_or(ReduceError::NoGrid)?;
    let (wh, ww) = window;
    if wh == 0 || ww == 0 {
        return Err(ReduceError::InvalidBudget("window dimensions must be positive".into()));
    }
    let n = tokens.len();
    let per_frame = grid.area();
    let norms: Vec<f64> = tokens.rows().map(norm).collect();
    let mut into: Vec<Option<usize>> = vec![None; n];

    let mut members = Vec::with_capacity(wh * ww);
    for frame in 0..tokens.frames() {
        for r0 in (0..grid.rows).step_by(wh) {
            for c0 in (0..grid.cols).step_by(ww) {
                members.clear();
                for r in r0..(r0 + wh).min(grid.rows) {
                    for c in c0..(c0 + ww).min(grid.cols) {
                        let id = frame * per_frame + r * grid.cols + c;
                        if let Some(pos) = tokens.position_of(id) {
                            members.push(pos);
                        }
                    }
                }
                if members.len() < 2 {
                    continue;
                }
                let mut similar = true;
                'pairs: for (i, &a) in members.iter().enumerate() {
                    for &b in &members[i + 1..] {
                        counters.similarity_evals += 1;
                        let (ta, tb) = (tokens.token(a), tokens.token(b));
                        if ta != tb && cosine_with_norms(ta, tb, norms[a], norms[b]) < threshold {
                            similar = false;
                            break 'pairs;
                        }
                    }
                }
                if similar {
                    let target = members[0];
                    for &s in &members[1..] {
                        into[s] = Some(target);
                    }
                }
            }
        }
    }
    Ok(ReductionPlan::from_assignment(n, &into, &vec![false; n], PlanMode::Merge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plan::apply_plan;

    fn grid(vs: &[&[f32]], rows: usize, cols: usize) -> TokenSet {
        let dim = vs[0].len();
        TokenSet::from_grid(vs.concat(), dim, vs.len() / (rows * cols), rows, cols).unwrap()
    }

    #[test]
    fn identical_window_collapses() {
        let t = grid(&[&[1.0f32, 2.0][..]; 4], 2, 2);
        let plan = window_merge(&t, (2, 2), 0.9).unwrap();
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.weights(), &[4]);
        assert_eq!(out.token_ids(), &[0]);
    }

    #[test]
    fn one_outlier_blocks_window() {
        let t = grid(&[&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &[1.0, 0.0]], 2, 2);
        assert!(window_merge(&t, (2, 2), 0.9).unwrap().is_identity(4));
    }

    #[test]
    fn above_one_needs_exact_duplicates() {
        let t = grid(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 1e-4], &[1.0, 1e-4]], 2, 2);
        // windows are rows: [0,1] identical, [2,3] identical
        let plan = window_merge(&t, (1, 2), 1.0 + 1e-9).unwrap();
        assert_eq!(plan.kept, vec![0, 2]);
        // a single 2x2 window mixes nearly-equal vectors and must stay intact
        assert!(window_merge(&t, (2, 2), 1.0 + 1e-9).unwrap().is_identity(4));
    }

    #[test]
    fn ragged_edges_and_frames() {
        // 2 frames of 3x3, all tokens equal within a frame, window 2x2
        let mut vs: Vec<&[f32]> = vec![&[1.0, 0.0]; 9];
        vs.extend(vec![&[0.0, 1.0][..]; 9]);
        let t = grid(&vs, 3, 3);
        let plan = window_merge(&t, (2, 2), 0.99).unwrap();
        // per frame: 2x2 + 2x1 + 1x2 windows merge, 1x1 corner stays
        assert_eq!(plan.kept.len(), 8);
        let out = apply_plan(&t, &plan).unwrap();
        assert_eq!(out.weights(), &[4, 2, 2, 1, 4, 2, 2, 1]);
        assert_eq!(out.token_ids(), &[0, 2, 6, 8, 9, 11, 15, 17]);
    }

    #[test]
    fn needs_grid() {
        let t = TokenSet::from_rows(vec![0.0; 4], 1).unwrap();
        assert_eq!(window_merge(&t, (2, 2), 0.5).unwrap_err(), ReduceError::NoGrid);
    }
}
