use serde::{Deserialize, Serialize};

/// Reference RLCT `λ` and multiplicity `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryRlct {
    pub lambda: f64,
    pub multiplicity: u32,
}

/// Published values for M = N = 6, H₀ = 3 and H = 1..6.
const TABLE_6_6_3: [(f64, u32); 6] = [(5.5, 1), (10.0, 1), (13.5, 1), (15.0, 2), (16.0, 1), (17.0, 2)];

/// Known RLCT of reduced rank regression with `M` inputs, `N` outputs, model
/// rank `H` and true rank `H₀`.
///
/// For `H ≤ H₀` the value is `H(M + N − H)/2` with `m = 1`. For
/// `(M, N, H₀) = (6, 6, 3)` the tabulated values cover `H = 1..6`. Other
/// realizable cases return `None`.
pub fn theoretical_rlct_rrr(inputs: usize, outputs: usize, rank: usize, true_rank: usize) -> Option<TheoryRlct> {
    if inputs == 0 || outputs == 0 || rank == 0 || true_rank == 0 {
        return None;
    }
    if (inputs, outputs, true_rank) == (6, 6, 3) && (1..=6).contains(&rank) {
        let (lambda, multiplicity) = TABLE_6_6_3[rank - 1];
        return Some(TheoryRlct { lambda, multiplicity });
    }
    if rank <= true_rank && rank <= inputs.min(outputs) {
        let h = rank as f64;
        return Some(TheoryRlct {
            lambda: h * (inputs as f64 + outputs as f64 - h) / 2.0,
            multiplicity: 1,
        });
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tabulated_values() {
        let t = theoretical_rlct_rrr(6, 6, 3, 3).unwrap();
        assert_eq!((t.lambda, t.multiplicity), (13.5, 1));
        let t = theoretical_rlct_rrr(6, 6, 5, 3).unwrap();
        assert_eq!((t.lambda, t.multiplicity), (16.0, 1));
        let t = theoretical_rlct_rrr(6, 6, 4, 3).unwrap();
        assert_eq!(t.multiplicity, 2);
    }

    #[test]
    fn unrealizable_formula_agrees_with_table() {
        for h in 1..=3 {
            let table = theoretical_rlct_rrr(6, 6, h, 3).unwrap();
            let hf = h as f64;
            assert_eq!(table.lambda, hf * (12.0 - hf) / 2.0);
        }
        assert_eq!(theoretical_rlct_rrr(3, 3, 1, 1).unwrap().lambda, 2.5);
        assert_eq!(theoretical_rlct_rrr(4, 5, 1, 2).unwrap().lambda, 4.0);
    }

    #[test]
    fn general_realizable_case_unavailable() {
        assert!(theoretical_rlct_rrr(3, 3, 2, 1).is_none());
        assert!(theoretical_rlct_rrr(6, 6, 7, 3).is_none());
    }
}
