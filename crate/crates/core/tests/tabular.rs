use std::collections::HashSet;

use dpi_audit::neighbors::Metric;
use dpi_audit::tabular::{load_csv_group, three_way_split, ColumnKind};
use dpi_audit::{ColumnSchema, Encoder, Role, TabularDataset, Value};
use proptest::prelude::*;

fn ids(n: usize) -> TabularDataset {
    TabularDataset::new(
        vec![ColumnSchema::numeric("id")],
        (0..n).map(|i| vec![Value::Numeric(i as f64)]).collect(),
        Role::Unlabeled,
    )
    .unwrap()
}

fn id_list(d: &TabularDataset) -> Vec<usize> {
    d.rows()
        .iter()
        .map(|r| match r[0] {
            Value::Numeric(x) => x as usize,
            Value::Categorical(_) => unreachable!(),
        })
        .collect()
}

fn mixed(rows: &[(f64, f64, u8)]) -> TabularDataset {
    let labels = ["red", "green", "blue"];
    TabularDataset::new(
        vec![
            ColumnSchema::numeric("a"),
            ColumnSchema::numeric("b"),
            ColumnSchema::categorical("c", labels.iter().map(|s| s.to_string()).collect()).unwrap(),
        ],
        rows.iter()
            .map(|&(a, b, c)| {
                vec![
                    Value::Numeric(a),
                    Value::Numeric(b),
                    Value::Categorical(labels[c as usize % 3].to_string()),
                ]
            })
            .collect(),
        Role::Unlabeled,
    )
    .unwrap()
}

fn row_strategy() -> impl Strategy<Value = (f64, f64, u8)> {
    (-1e3f64..1e3, -5.0f64..5.0, 0u8..3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_partitions_rows(n in 3usize..500, seed in any::<u64>()) {
        let (a, b, c) = three_way_split(&ids(n), seed).unwrap();
        prop_assert_eq!((a.len(), b.len(), c.len()), (n / 3, n / 3, n - 2 * (n / 3)));
        let mut all: Vec<usize> = [id_list(&a), id_list(&b), id_list(&c)].concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        let again = three_way_split(&ids(n), seed).unwrap();
        prop_assert_eq!(id_list(&again.0), id_list(&a));
    }

    #[test]
    fn encoder_statistics_ignore_row_order(
        rows in prop::collection::vec(row_strategy(), 2..80),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (d1, d2) = (mixed(&rows), mixed(&shuffled));
        let e1 = Encoder::fit(&[&d1]).unwrap();
        let e2 = Encoder::fit(&[&d2]).unwrap();
        for col in 0..2 {
            prop_assert_eq!(e1.numeric_stats(col), e2.numeric_stats(col));
        }
        let mut c1 = e1.categories(2).unwrap().to_vec();
        let mut c2 = e2.categories(2).unwrap().to_vec();
        c1.sort();
        c2.sort();
        prop_assert_eq!(c1, c2);
    }

    #[test]
    fn duplicate_rows_encode_identically(
        rows in prop::collection::vec(row_strategy(), 1..40),
        pick in any::<prop::sample::Index>(),
    ) {
        let i = pick.index(rows.len());
        let mut with_dup = rows.clone();
        with_dup.push(rows[i]);
        let data = mixed(&with_dup);
        let enc = Encoder::fit(&[&data]).unwrap();
        let m = enc.encode(&data).unwrap();
        let last = m.nrows() - 1;
        prop_assert_eq!(m.row(i), m.row(last));
        for metric in [Metric::L1, Metric::L2] {
            prop_assert_eq!(metric.distance(m.row(i), m.row(last)), 0.0);
        }
    }
}

#[test]
fn different_seeds_give_different_splits() {
    let data = ids(9);
    let distinct: HashSet<Vec<usize>> = (0..100u64)
        .map(|s| {
            let (a, b, _) = three_way_split(&data, s).unwrap();
            [id_list(&a), id_list(&b)].concat()
        })
        .collect();
    // 9! / (3! 3! 3!) = 1680 ordered partitions; repeats among 100 draws are rare
    assert!(distinct.len() >= 90, "{}", distinct.len());
}

#[test]
fn csv_files_are_typed_jointly() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "x,grade,city\n1.5,1,paris\n2,2,rome\n").unwrap();
    std::fs::write(&b, "x,grade,city\n3,A,rome\n-1e3,3,oslo\n").unwrap();
    let sets = load_csv_group(&[a.as_path(), b.as_path()]).unwrap();
    let kinds: Vec<ColumnKind> = sets[0].schema().iter().map(|c| c.kind()).collect();
    assert_eq!(
        kinds,
        vec![ColumnKind::Numeric, ColumnKind::Categorical, ColumnKind::Categorical]
    );
    assert_eq!(sets[1].rows()[1][0], Value::Numeric(-1000.0));
    assert_eq!(sets[0].rows()[0][1], Value::Categorical("1".into()));

    let enc = Encoder::fit(&[&sets[0], &sets[1]]).unwrap();
    // x, grade one-hot over {1, 2, A, 3}, city over {paris, rome, oslo}
    assert_eq!(enc.dim(), 1 + 4 + 3);
}
