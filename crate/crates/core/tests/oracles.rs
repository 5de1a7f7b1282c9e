use rectfec::analysis::{brute_force_min_frs, count_acyclic_subgraphs, prob_i_zero};
use rectfec::codec::{classify, peel_residual, CodeParams, ConfigClass};
use rectfec::feedback::{build_gadget, min_frs_unit, repair_cost_formula, CostFunction};
use rectfec::packet::{ErrorConfiguration, GridCoord};

/// 21 errors on a 6x9 code: two 2x3 blocks and a 9-error block over rows
/// 4..7 and columns 6..10, every error sharing its row and its column.
fn stopping_set_21() -> ErrorConfiguration {
    let mut cells = Vec::new();
    for (rows, cols) in [(0..2, 0..3), (2..4, 3..6)] {
        for r in rows {
            for c in cols.clone() {
                cells.push((r, c));
            }
        }
    }
    cells.extend([(4, 6), (4, 7), (4, 8), (5, 7), (5, 8), (5, 9), (6, 6), (6, 9), (6, 7)]);
    ErrorConfiguration::new(6, 9, cells.into_iter().map(|(r, c)| GridCoord::new(r, c))).unwrap()
}

#[test]
fn twenty_one_error_stopping_set_costs_seven() {
    let c = stopping_set_21();
    assert_eq!(c.len(), 21);
    assert_eq!(classify(&c), ConfigClass::MinimalBad);
    assert_eq!(peel_residual(&c), c);
    let params = CodeParams::row_major(6, 9).unwrap();
    let slow = brute_force_min_frs(&c, CostFunction::AllOrNone, &params, None).unwrap();
    let g = build_gadget(&c, CostFunction::AllOrNone, &params, None).unwrap();
    let fast = min_frs_unit(&g).unwrap();
    let k = g.counts();
    assert_eq!((k.n_e, k.r, k.c, k.n_nscc), (21, 7, 10, 3));
    assert_eq!(slow.len(), 7);
    assert_eq!(fast.len(), 7);
    assert_eq!(repair_cost_formula(21, 7, 10, 3).unwrap(), 7);
    // the set left after removing the repair set peels completely
    let mut rest = c.clone();
    for p in &fast.packets {
        rest.remove(&params.coord_of(*p).unwrap());
    }
    assert!(peel_residual(&rest).is_empty());
}

#[test]
fn forest_probabilities_sum_against_binomials() {
    // summing f(n, m, n_e) over n_e counts every acyclic subset of cells
    let total: u64 = (0..=16).map(|k| count_acyclic_subgraphs(3, 3, k).unwrap()).sum();
    let direct = (0u64..1 << 16)
        .filter(|&mask| peel_residual(&ErrorConfiguration::from_mask(3, 3, mask)).is_empty())
        .count() as u64;
    assert_eq!(total, direct);
    assert_eq!(prob_i_zero(3, 3, 1).unwrap(), num_rational::BigRational::from_integer(1.into()));
}
