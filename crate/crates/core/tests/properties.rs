use chamber_twin::dataset::{read_experiment, write_experiment, ColumnData, Schema};
use chamber_twin::engine::Row;
use chamber_twin::protocol::{parse_protocol, Instruction, Protocol};
use chamber_twin::stats::{ks_exact_p, ks_permutation_p, ks_two_sample, rank_sum};
use chamber_twin::variables::{ColumnType, Config, ValueRange};
use proptest::prelude::*;

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1e3f64..1e3, 1..25)
}

fn settable_value(range: ValueRange) -> BoxedStrategy<f64> {
    match range {
        ValueRange::Interval { min, max } => (min..=max).boxed(),
        ValueRange::Stepped { min, max, step } => {
            let n = ((max - min) / step).round() as u64;
            (0..=n).prop_map(move |k| ((min + k as f64 * step) / step).round() * step).boxed()
        }
        ValueRange::Integers { min, max } => (min..=max).prop_map(|v| v as f64).boxed(),
        ValueRange::Set(values) => prop::sample::select(values).boxed(),
        ValueRange::NonNegative | ValueRange::Image => Just(0.0).boxed(),
    }
}

fn instruction(config: Config) -> BoxedStrategy<Instruction> {
    let settable: Vec<_> = config.variables().filter(|v| !v.is_sensor()).collect();
    let max_hz = config.chamber().max_rate_hz();
    prop_oneof![
        prop::sample::select(settable).prop_flat_map(|v| {
            settable_value(v.range).prop_map(move |value| Instruction::Set { variable: v.id.to_string(), value })
        }),
        (0u64..100_000).prop_map(|ms| Instruction::Wait { ms }),
        (1u64..1000, 1u32..=(max_hz as u32 * 100))
            .prop_map(|(count, c)| Instruction::Msr { count, hz: c as f64 / 100.0 }),
    ]
    .boxed()
}

fn protocol() -> impl Strategy<Value = Protocol> {
    prop::sample::select(Config::ALL.to_vec()).prop_flat_map(|config| {
        (prop::option::of(any::<u64>()), prop::collection::vec(instruction(config), 1..30)).prop_map(
            move |(seed, mut instructions)| {
                if let Some(s) = seed {
                    instructions.insert(0, Instruction::Seed(s));
                }
                Protocol { config, instructions }
            },
        )
    })
}

fn float_value() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        (-1e6f64..1e6),
        Just(0.0),
        Just(-0.0),
        Just(f64::MIN_POSITIVE),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn protocol_round_trip(p in protocol()) {
        prop_assert!(p.validate().is_ok());
        let text = p.to_string();
        prop_assert_eq!(parse_protocol(&text).unwrap(), p);
    }

    #[test]
    fn dataset_round_trip(rows in prop::collection::vec(
        (float_value(), any::<bool>(), prop::collection::vec(float_value(), 4)), 1..20)
    ) {
        let schema = Schema {
            columns: vec![
                ("rpm_in".into(), ColumnType::Float),
                ("pressure_downwind".into(), ColumnType::Float),
                ("weird".into(), ColumnType::Float),
            ],
            extra: vec!["pid_output".into()],
        };
        let rows: Vec<Row> = rows
            .into_iter()
            .map(|(t, i, v)| Row { timestamp: t, intervention: i, values: v[..3].to_vec(), image: None, extra: vec![v[3]] })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        write_experiment(rows.clone(), &schema, dir.path(), "exp").unwrap();
        let t = read_experiment(dir.path(), "exp").unwrap();
        let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
        prop_assert_eq!(bits(t.floats("timestamp").unwrap()), bits(rows.iter().map(|r| r.timestamp).collect()));
        prop_assert_eq!(bits(t.floats("rpm_in").unwrap()), bits(rows.iter().map(|r| r.values[0]).collect()));
        prop_assert_eq!(bits(t.floats("pid_output").unwrap()), bits(rows.iter().map(|r| r.extra[0]).collect()));
        prop_assert_eq!(
            t.column("intervention").unwrap(),
            &ColumnData::Integer(rows.iter().map(|r| r.intervention as i64).collect())
        );
        // Unknown columns survive as text that parses back to the same bits.
        let ColumnData::Opaque(weird) = t.column("weird").unwrap() else { panic!("weird typed") };
        let parsed: Vec<f64> = weird.iter().map(|s| s.parse().unwrap()).collect();
        prop_assert_eq!(bits(parsed), bits(rows.iter().map(|r| r.values[2]).collect()));
    }

    #[test]
    fn ks_symmetric_and_bounded(a in sample(), b in sample()) {
        let ab = ks_two_sample(&a, &b).unwrap();
        let ba = ks_two_sample(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab.statistic));
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
    }

    #[test]
    fn ks_invariant_under_monotone_maps(a in sample(), b in sample()) {
        let d = ks_two_sample(&a, &b).unwrap().statistic;
        let f = |x: &f64| (x / 100.0).exp() * 3.0 - 7.0;
        let fa: Vec<f64> = a.iter().map(f).collect();
        let fb: Vec<f64> = b.iter().map(f).collect();
        prop_assert_eq!(ks_two_sample(&fa, &fb).unwrap().statistic, d);
        let g = |x: &f64| -x.powi(3);
        let ga: Vec<f64> = a.iter().map(g).collect();
        let gb: Vec<f64> = b.iter().map(g).collect();
        prop_assert_eq!(ks_two_sample(&ga, &gb).unwrap().statistic, d);
    }

    #[test]
    fn lattice_matches_permutation(a in prop::collection::vec(-1e3f64..1e3, 1..9),
                                   b in prop::collection::vec(-1e3f64..1e3, 1..9)) {
        // Distinct values, so no ties: the two exact computations agree.
        let mut pooled: Vec<f64> = a.iter().chain(&b).copied().collect();
        pooled.sort_by(f64::total_cmp);
        prop_assume!(pooled.windows(2).all(|w| w[0] != w[1]));
        let d = ks_two_sample(&a, &b).unwrap().statistic;
        let perm = ks_permutation_p(&a, &b).unwrap();
        prop_assert!((perm - ks_exact_p(d, a.len(), b.len())).abs() < 1e-9);
    }

    #[test]
    fn rank_sum_bounds(a in sample(), b in sample()) {
        let r = rank_sum(&a, &b).unwrap();
        prop_assert!(r.u >= 0.0 && r.u <= (a.len() * b.len()) as f64);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        let s = rank_sum(&b, &a).unwrap();
        prop_assert!((r.u + s.u - (a.len() * b.len()) as f64).abs() < 1e-9);
        prop_assert!((r.p_value - s.p_value).abs() < 1e-12);
    }
}
