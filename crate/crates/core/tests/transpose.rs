mod common;

use flame_core::comm::spawn_inprocess;
use flame_core::dist_field::{self, Layout, Orientation, TransposeStrategy};
use flame_core::oracle::serial_transpose;
use flame_core::scalar::{decode_complex, encode_complex};
use flame_core::Error;
use num_complex::Complex;

/// Concatenation over ranks of each rank's local lines.
fn line_matrix(comm: &mut flame_core::comm::Communicator, f: &flame_core::Field) -> Option<Vec<Complex<f64>>> {
    let layout = f.layout();
    let counts = vec![layout.local_len() * 16; comm.size()];
    comm.gather_to(0, &encode_complex(f.local()), &counts).unwrap().map(|b| decode_complex(&b).unwrap())
}

#[test]
fn transpose_matches_serial_oracle_and_is_an_involution() {
    for k in 1..=8 {
        for np in [1, 2, 3, 4, 6] {
            let layout = Layout::build(k, np).unwrap();
            let n = layout.n_psi();
            let global = common::random_values(n * n, (k * 10 + np) as u64);
            for strategy in [TransposeStrategy::AllToAll, TransposeStrategy::Gather] {
                let out = spawn_inprocess(np, |mut comm| {
                    let root = comm.rank() == 0;
                    let f = dist_field::scatter_full(&mut comm, layout, root.then_some(global.as_slice()))?;
                    let before = line_matrix(&mut comm, &f);
                    let g = dist_field::transpose(&mut comm, &f, strategy)?;
                    assert_eq!(g.orientation(), Orientation::Rows);
                    let after = line_matrix(&mut comm, &g);
                    let back = dist_field::transpose(&mut comm, &g, strategy)?;
                    assert_eq!(back.orientation(), Orientation::Columns);
                    assert_eq!(back.local(), f.local());
                    let logical = dist_field::gather_full(&mut comm, &g)?;
                    Ok::<_, Error>((before, after, logical))
                })
                .unwrap();
                let (before, after, logical) = &out[0];
                let before = before.as_ref().unwrap();
                assert_eq!(before, &global);
                assert_eq!(after.as_ref().unwrap(), &serial_transpose(before, n, n), "K={k} np={np} {strategy}");
                assert_eq!(logical.as_ref().unwrap(), &global);
            }
        }
    }
}

#[test]
fn exchanged_elements_match_formula() {
    let mut pairs = 0;
    for (k, np) in [(1, 2), (1, 3), (2, 2), (2, 4), (3, 2), (4, 3), (5, 6), (7, 3), (8, 4), (8, 6), (12, 5), (16, 8)] {
        let layout = Layout::build(k, np).unwrap();
        let n = layout.n_psi() as u64;
        for strategy in [TransposeStrategy::AllToAll, TransposeStrategy::Gather] {
            let per_rank = spawn_inprocess(np, |mut comm| {
                let f = flame_core::Field::zeros(layout, comm.rank(), Orientation::Columns);
                let before = comm.counters();
                dist_field::transpose(&mut comm, &f, strategy)?;
                Ok::<_, Error>(comm.counters().since(&before).complex_received())
            })
            .unwrap();
            let total: u64 = per_rank.iter().sum();
            // K_psi^2 (1 - 1/N_p), exact because N_p divides K_psi.
            assert_eq!(total, n * n - n * n / np as u64, "K_psi={n} np={np} {strategy}");
            let kp = n / np as u64;
            assert!(per_rank.iter().all(|&e| e == (np as u64 - 1) * kp * kp));
        }
        pairs += 1;
    }
    assert!(pairs >= 10);
}

#[test]
fn single_rank_exchanges_nothing() {
    let layout = Layout::build(3, 1).unwrap();
    let out = spawn_inprocess(1, |mut comm| {
        let f = flame_core::Field::zeros(layout, 0, Orientation::Columns);
        let before = comm.counters();
        dist_field::transpose_alltoall(&mut comm, &f)?;
        Ok::<_, Error>(comm.counters().since(&before).complex_received())
    })
    .unwrap();
    assert_eq!(out, vec![0]);
}

#[test]
fn six_by_six_on_three_ranks_moves_24_elements() {
    let layout = Layout::with_size(1, 6, 3).unwrap();
    let out = spawn_inprocess(3, |mut comm| {
        let f = flame_core::Field::zeros(layout, comm.rank(), Orientation::Columns);
        let before = comm.counters();
        dist_field::transpose_gather(&mut comm, &f)?;
        Ok::<_, Error>(comm.counters().since(&before).complex_received())
    })
    .unwrap();
    assert_eq!(out.iter().sum::<u64>(), 24);
}
