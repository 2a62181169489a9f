use dynsbm::error::CliError;
use dynsbm::io::{
    parse_events, parse_labels, read_events, records_to_dataset, write_events, BinnedRecord,
    Dataset, GridSpec, InputFormat, NodeDictionary, ParseOrUsage, Records,
};
use dynsbm::output::{write_node_assignments, Provenance};
use dynsbm::tensor_file::{read_tensor, write_tensor};
use dynsbm_core::{Event, InteractionTensor, Partition, TimeGrid};
use proptest::prelude::*;

fn binned(text: &str) -> Vec<BinnedRecord> {
    match parse_events(text, InputFormat::Binned, None).unwrap() {
        Records::Binned(r) => r,
        other => panic!("expected binned rows, got {other:?}"),
    }
}

fn grid_of(u: usize) -> GridSpec {
    GridSpec {
        n_intervals: Some(u),
        ..GridSpec::default()
    }
}

fn parse_error(text: &str, format: InputFormat) -> (usize, String) {
    let e = parse_events(text, format, None).unwrap_err();
    (e.line, e.message)
}

#[test]
fn binned_record_fills_one_cell() {
    let rows = binned("52 26 5 16\n");
    assert_eq!(
        rows,
        vec![BinnedRecord {
            line: 1,
            source: "52".into(),
            target: "26".into(),
            interval: 5,
            count: 16,
        }]
    );
    let data = records_to_dataset(&Records::Binned(rows), &GridSpec::default(), 1).unwrap();
    let (i, j) = (
        data.nodes.index_of("52").unwrap(),
        data.nodes.index_of("26").unwrap(),
    );
    assert_eq!(data.tensor.n_intervals(), 5);
    assert_eq!(data.tensor.get(i, j, 4), 16);
    assert_eq!(data.tensor.total(), 16);
}

#[test]
fn empty_file_gives_an_empty_dataset() {
    for format in [InputFormat::Timestamped, InputFormat::Binned] {
        let records = parse_events("", format, None).unwrap();
        assert!(records.is_empty());
        let data = records_to_dataset(&records, &grid_of(3), 1).unwrap();
        assert_eq!(data.tensor.n_nodes(), 0);
        assert_eq!(data.tensor.total(), 0);
    }
    assert!(
        parse_events("# only a comment\n\n", InputFormat::Binned, None)
            .unwrap()
            .is_empty()
    );
}

#[test]
fn non_numeric_first_row_is_a_header() {
    let rows = binned("ID1,ID2,interval,count\n1,2,1,3\n");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].line, 2);
    let rows = binned("# comment\nsrc dst interval count\n1 2 1 3\n");
    assert_eq!(rows[0].line, 3);
}

#[test]
fn malformed_rows_report_their_line() {
    assert_eq!(parse_error("1 2 1 3\n1 2 x 3\n", InputFormat::Binned).0, 2);
    assert_eq!(
        parse_error("1 2 0.5\n\n1 2\n", InputFormat::Timestamped).0,
        3
    );
    // A bad row after the first one is never mistaken for a header.
    assert_eq!(
        parse_error("1 2 0.5\nsrc dst time\n", InputFormat::Timestamped).0,
        2
    );
    let (line, message) = parse_error("1 2 1 3\n1 2 1 -4\n", InputFormat::Binned);
    assert_eq!(line, 2);
    assert!(message.contains("negative count"), "{message}");
}

#[test]
fn file_errors_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.txt");
    std::fs::write(&path, "1 2 0.5\n1 2 oops\n").unwrap();
    let err = read_events(&path, InputFormat::Timestamped, None).unwrap_err();
    match &err {
        CliError::Parse { path: p, line, .. } => {
            assert!(p.ends_with("bad.txt"));
            assert_eq!(*line, 2);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
    let missing =
        read_events(&dir.path().join("none"), InputFormat::Timestamped, None).unwrap_err();
    assert_eq!(missing.exit_code(), 2);
}

#[test]
fn column_mapping_reorders_fields() {
    let text = "count interval dst src extra\n16 5 26 52 x\n";
    let Records::Binned(rows) =
        parse_events(text, InputFormat::Binned, Some(&[3, 2, 1, 0])).unwrap()
    else {
        panic!("binned");
    };
    assert_eq!(
        (rows[0].source.as_str(), rows[0].target.as_str()),
        ("52", "26")
    );
    assert_eq!((rows[0].interval, rows[0].count), (5, 16));

    let Records::Timestamped(rows) =
        parse_events("0.25;a;b\n", InputFormat::Timestamped, Some(&[1, 2, 0])).unwrap()
    else {
        panic!("timestamped");
    };
    assert_eq!(
        (
            rows[0].source.as_str(),
            rows[0].target.as_str(),
            rows[0].time
        ),
        ("a", "b", 0.25)
    );
    assert!(parse_events("1 2 3\n", InputFormat::Timestamped, Some(&[0, 1])).is_err());
}

#[test]
fn interval_base_zero_and_one() {
    let rows = Records::Binned(binned("1 2 0 4\n2 1 2 1\n"));
    let zero = records_to_dataset(&rows, &GridSpec::default(), 0).unwrap();
    assert_eq!(zero.tensor.n_intervals(), 3);
    assert_eq!(zero.tensor.get(0, 1, 0), 4);
    assert_eq!(zero.tensor.get(1, 0, 2), 1);
    match records_to_dataset(&rows, &GridSpec::default(), 1) {
        Err(ParseOrUsage::Row(e)) => assert_eq!(e.line, 1),
        other => panic!("interval 0 with base 1 must fail, got {other:?}"),
    }
    let one = records_to_dataset(&Records::Binned(binned("1 2 1 4\n")), &grid_of(3), 1).unwrap();
    assert_eq!(one.tensor.get(0, 1, 0), 4);
    match records_to_dataset(&Records::Binned(binned("1 2 4 4\n")), &grid_of(3), 1) {
        Err(ParseOrUsage::Row(e)) => assert_eq!(e.line, 1),
        other => panic!("interval beyond the grid must fail, got {other:?}"),
    }
}

#[test]
fn timestamped_rows_are_binned_half_open() {
    let text = "a b 0\na b 0.999\nb a 1\nb a 2\n";
    let records = parse_events(text, InputFormat::Timestamped, None).unwrap();
    let data = records_to_dataset(&records, &grid_of(2), 1).unwrap();
    assert_eq!(data.nodes.ids(), ["a", "b"]);
    assert_eq!(data.tensor.get(0, 1, 0), 2);
    assert_eq!(data.tensor.get(1, 0, 1), 2);

    let late = parse_events("a b 2.5\n", InputFormat::Timestamped, None).unwrap();
    assert!(
        matches!(records_to_dataset(&late, &grid_of(2), 1), Err(ParseOrUsage::Row(e)) if e.line == 1)
    );
    let looped = parse_events("a b 0.1\nc c 0.2\n", InputFormat::Timestamped, None).unwrap();
    assert!(
        matches!(records_to_dataset(&looped, &grid_of(2), 1), Err(ParseOrUsage::Row(e)) if e.line == 2)
    );
    assert!(matches!(
        records_to_dataset(&records, &GridSpec::default(), 1),
        Err(ParseOrUsage::Usage(_))
    ));
}

#[test]
fn numeric_ids_sort_numerically() {
    let d = NodeDictionary::from_ids(["10", "9", "100", "9"]);
    assert_eq!(d.ids(), ["9", "10", "100"]);
    let d = NodeDictionary::from_ids(["b", "10", "a"]);
    assert_eq!(d.ids(), ["10", "a", "b"]);
    assert!(NodeDictionary::in_order(vec!["x".into(), "x".into()]).is_none());
}

#[test]
fn label_files_parse_with_or_without_extra_columns() {
    let labels = parse_labels("# stamp\nnode,cluster\nalice,2\nbob,1\n").unwrap();
    assert_eq!(labels.len(), 2);
    assert_eq!((labels[0].id.as_str(), labels[0].cluster), ("alice", 2));
    let times = parse_labels("interval,start,end,cluster\n1,0,1,1\n2,1,2,3\n").unwrap();
    assert_eq!(times[1].cluster, 3);
    assert_eq!(parse_labels("a,1\na,2\n").unwrap_err().line, 2);
    assert_eq!(parse_labels("a,1\nb,-1\n").unwrap_err().line, 2);
}

fn arb_dataset() -> impl Strategy<Value = Dataset> {
    (2usize..7, 1usize..5, any::<u64>()).prop_map(|(n, u, seed)| {
        let mut lengths = Vec::with_capacity(u + 1);
        let mut t = 0.0;
        lengths.push(t);
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            s >> 33
        };
        for _ in 0..u {
            t += 0.1 + (next() % 1000) as f64 / 317.0;
            lengths.push(t);
        }
        let mut tensor = InteractionTensor::zeros(n, TimeGrid::new(lengths).unwrap());
        for i in 0..n {
            for j in 0..n {
                for v in 0..u {
                    let c = next() % 4;
                    if i != j && c > 1 {
                        tensor.add(i, j, v, (next() % 50) as u32 + 1).unwrap();
                    }
                }
            }
        }
        let nodes =
            NodeDictionary::in_order((0..n).map(|i| format!("n{}", (i * 7919) % 101)).collect())
                .unwrap_or_else(|| NodeDictionary::numbered(n));
        Dataset { tensor, nodes }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_files_roundtrip(data in arb_dataset(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("t");
        let prov = Provenance::new(&"roundtrip", seed);
        write_tensor(&stem, &data, &prov).unwrap();
        let back = read_tensor(&stem).unwrap();
        prop_assert_eq!(&back, &data);
        prop_assert_eq!(read_tensor(&dir.path().join("t.csv")).unwrap(), data);
    }

    #[test]
    fn event_files_roundtrip(
        raw in prop::collection::vec((0usize..5, 1usize..5, 0.0f64..10.0), 0..60),
    ) {
        let events: Vec<Event> = raw
            .into_iter()
            .map(|(s, d, time)| Event { source: s, target: (s + d) % 5, time })
            .collect();
        let nodes = NodeDictionary::from_ids(["11", "12", "13", "14", "15"]);
        let mut buf = Vec::new();
        write_events(&mut buf, &events, &nodes, &Provenance::new(&1, 2)).unwrap();
        let Records::Timestamped(rows) =
            parse_events(std::str::from_utf8(&buf).unwrap(), InputFormat::Timestamped, None).unwrap()
        else {
            panic!("timestamped");
        };
        prop_assert_eq!(rows.len(), events.len());
        for (r, e) in rows.iter().zip(&events) {
            prop_assert_eq!(r.source.as_str(), nodes.id(e.source));
            prop_assert_eq!(r.target.as_str(), nodes.id(e.target));
            prop_assert_eq!(r.time.to_bits(), e.time.to_bits());
        }
    }

    #[test]
    fn node_assignments_roundtrip(labels in prop::collection::vec(0usize..4, 1..30)) {
        let z = Partition::from_labels(labels.clone());
        let nodes = NodeDictionary::from_ids((0..labels.len()).map(|i| format!("v{i:03}")));
        let mut buf = Vec::new();
        write_node_assignments(&mut buf, &z, &nodes, &Provenance::new(&0, 0)).unwrap();
        let back = parse_labels(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.len(), labels.len());
        for (r, (i, &k)) in back.iter().zip(labels.iter().enumerate()) {
            prop_assert_eq!(r.id.as_str(), nodes.id(i));
            prop_assert_eq!(r.cluster, k as u64 + 1);
        }
    }
}
