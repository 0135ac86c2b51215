use super::*;
use crate::model::{ScriptClass, TxId, TxOutputDecl, TxRecord};
use crate::testutil::{run, ChainBuilder};

#[test]
fn worked_example_increases_1_1_2() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);

    // Funding: singletons x, y; pair b0,b1; ten c0..c9; plus second outputs
    // for b0 and c0 so the final merge has something to spend.
    let mut outs: Vec<(String, u64)> = vec![("x".into(), 10), ("y".into(), 10)];
    outs.push(("b0".into(), 10));
    outs.push(("b1".into(), 10));
    for i in 0..10 {
        outs.push((format!("c{i}"), 10));
    }
    outs.push(("b0".into(), 10)); // vout 14
    outs.push(("c0".into(), 10)); // vout 15
    let outs_ref: Vec<(&str, u64)> = outs.iter().map(|(a, v)| (a.as_str(), *v)).collect();
    let cb = b.coinbase(&outs_ref);
    let cb_id = cb.txid;

    let unite_pair = b.spend(&[(cb_id, 2), (cb_id, 3)], &[("z1", 20)]);
    let unite_ten = b.spend(
        &(4..14).map(|v| (cb_id, v)).collect::<Vec<_>>(),
        &[("z2", 100)],
    );
    run(&mut engine, &[cb, unite_pair, unite_ten]);
    assert_eq!(engine.cluster_size(engine.find("b0").unwrap()).unwrap(), 2);
    assert_eq!(engine.cluster_size(engine.find("c0").unwrap()).unwrap(), 10);

    let merge = b.spend(
        &[(cb_id, 0), (cb_id, 1), (cb_id, 14), (cb_id, 15)],
        &[("z3", 40)],
    );
    let event = engine.process_transaction(&merge).unwrap().expect("merges");
    assert_eq!(event.component_sizes, vec![1, 1, 2, 10]);
    assert_eq!(event.increases, vec![1, 1, 2]);
    assert_eq!(event.resulting_size, 14);
    assert_eq!(engine.cluster_size(engine.find("x").unwrap()).unwrap(), 14);
    // Event arithmetic invariants.
    assert_eq!(event.increases.len(), event.component_sizes.len() - 1);
    assert_eq!(
        event.component_sizes.iter().sum::<u64>(),
        event.resulting_size
    );
    assert!(event.max_increase() <= *event.component_sizes.last().unwrap());
}

#[test]
fn single_input_never_merges() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 5)]);
    let cb_id = cb.txid;
    let spend = b.spend(&[(cb_id, 0)], &[("b", 5)]);
    run(&mut engine, &[cb]);
    let event = engine.process_transaction(&spend).unwrap();
    assert!(event.is_none());
    assert_eq!(
        engine.find("a").unwrap(),
        engine.addresses().get("a").unwrap()
    );
    assert!(!engine.log().tx_meta()[1].caused_merge);
    assert!(!engine.log().tx_meta()[1].is_nontrivial);
}

#[test]
fn inputs_already_united_do_not_merge_again() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 1), ("b", 1), ("a", 1), ("b", 1)]);
    let cb_id = cb.txid;
    let unite = b.spend(&[(cb_id, 0), (cb_id, 1)], &[("c", 2)]);
    let again = b.spend(&[(cb_id, 2), (cb_id, 3)], &[("d", 2)]);
    run(&mut engine, &[cb, unite]);
    let event = engine.process_transaction(&again).unwrap();
    assert!(event.is_none());
    let meta = &engine.log().tx_meta()[2];
    assert!(!meta.caused_merge);
    // Two distinct input addresses: still non-trivial.
    assert!(meta.is_nontrivial);
}

#[test]
fn find_returns_minimum_dense_index() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 1), ("b", 1)]);
    let cb_id = cb.txid;
    let unite = b.spend(&[(cb_id, 0), (cb_id, 1)], &[("c", 2)]);
    run(&mut engine, &[cb, unite]);
    let a = engine.addresses().get("a").unwrap();
    assert!(engine.addresses().get("b").unwrap() > a);
    assert_eq!(engine.find("b").unwrap(), a);
    assert_eq!(engine.find("a").unwrap(), a);
}

#[test]
fn unknown_outpoint_is_atomic_in_strict_mode() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 5), ("b", 5)]);
    let cb_id = cb.txid;
    run(&mut engine, &[cb]);

    let before_processed = engine.processed();
    let before_addresses = engine.num_addresses();
    let before_balance = engine.balance("a").unwrap();

    let bad = b.spend(&[(cb_id, 0), (TxId([0xee; 32]), 3)], &[("c", 5)]);
    let err = engine.process_transaction(&bad).unwrap_err();
    assert!(matches!(err, EngineError::UnknownOutpoint(_)));

    assert_eq!(engine.processed(), before_processed);
    assert_eq!(engine.num_addresses(), before_addresses);
    assert_eq!(engine.balance("a").unwrap(), before_balance);
    assert!(engine
        .index()
        .get(&OutPoint {
            txid: cb_id,
            vout: 0
        })
        .unwrap()
        .spent_by
        .is_none());
    // The stream can continue after the failed call.
    let good = b.spend(&[(cb_id, 0)], &[("c", 5)]);
    assert!(engine.process_transaction(&good).is_ok());
}

#[test]
fn double_spend_rejected_across_and_within_transactions() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 5)]);
    let cb_id = cb.txid;
    let first = b.spend(&[(cb_id, 0)], &[("b", 5)]);
    run(&mut engine, &[cb, first]);

    let second = b.spend(&[(cb_id, 0)], &[("c", 5)]);
    assert!(matches!(
        engine.process_transaction(&second).unwrap_err(),
        EngineError::DoubleSpend(_)
    ));

    // Same outpoint twice within one transaction.
    let mut engine2 = ClusterEngine::new(ResolutionMode::Strict);
    let mut b2 = ChainBuilder::new();
    let cb2 = b2.coinbase(&[("a", 5)]);
    let cb2_id = cb2.txid;
    run(&mut engine2, &[cb2]);
    let dup = b2.spend(&[(cb2_id, 0), (cb2_id, 0)], &[("b", 10)]);
    assert!(matches!(
        engine2.process_transaction(&dup).unwrap_err(),
        EngineError::DoubleSpend(_)
    ));
}

#[test]
fn lenient_mode_skips_unknown_inputs_but_registers_outputs() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Lenient);
    let cb = b.coinbase(&[("a", 5)]);
    let cb_id = cb.txid;
    run(&mut engine, &[cb]);

    // One resolvable input, one from a truncated prefix.
    let tx = b.spend(&[(cb_id, 0), (TxId([0xee; 32]), 0)], &[("b", 5)]);
    let event = engine.process_transaction(&tx).unwrap();
    assert!(event.is_none());
    assert_eq!(engine.stats().inputs_skipped, 1);
    assert_eq!(engine.stats().inputs_resolved, 1);
    assert_eq!(engine.balance("b").unwrap().current, 5);
    let meta = &engine.log().tx_meta()[1];
    assert_eq!(meta.input_count, 2);
    assert_eq!(meta.resolved_input_count, 1);
}

#[test]
fn balances_follow_spend_then_create_order() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 5)]);
    let cb_id = cb.txid;
    // "a" spends its 5 and receives 3 back in the same transaction.
    let churn = b.spend(&[(cb_id, 0)], &[("a", 3), ("b", 2)]);
    run(&mut engine, &[cb, churn]);
    let a = engine.balance("a").unwrap();
    assert_eq!(a.current, 3);
    assert_eq!(a.alltime_max, 5);
    let b_bal = engine.balance("b").unwrap();
    assert_eq!(b_bal.current, 2);
    assert_eq!(b_bal.alltime_max, 2);
}

#[test]
fn receive_then_spend_keeps_alltime_max() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 5)]);
    let cb_id = cb.txid;
    let spend = b.spend(&[(cb_id, 0)], &[("b", 5)]);
    run(&mut engine, &[cb, spend]);
    let bal = engine.balance("a").unwrap();
    assert_eq!(bal.current, 0);
    assert_eq!(bal.alltime_max, 5);
}

#[test]
fn multisig_credits_only_the_first_listed_address() {
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let tx = TxRecord {
        txid: TxId([9; 32]),
        timestamp: 0,
        ordinal: 0,
        inputs: vec![OutPoint::COINBASE],
        outputs: vec![TxOutputDecl {
            value: 7,
            script_class: ScriptClass::Multisig { m: 1, n: 2 },
            addresses: vec!["first".to_string(), "second".to_string()],
        }],
    };
    engine.process_transaction(&tx).unwrap();
    assert_eq!(engine.balance("first").unwrap().current, 7);
    let second = engine.balance("second").unwrap();
    assert_eq!(second.current, 0);
    assert_eq!(second.alltime_max, 0);
}

#[test]
fn spending_a_multisig_output_unites_its_addresses() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let funding = TxRecord {
        txid: TxId([9; 32]),
        timestamp: 0,
        ordinal: 0,
        inputs: vec![OutPoint::COINBASE],
        outputs: vec![TxOutputDecl {
            value: 7,
            script_class: ScriptClass::Multisig { m: 1, n: 2 },
            addresses: vec!["x".to_string(), "y".to_string()],
        }],
    };
    engine.process_transaction(&funding).unwrap();
    assert_ne!(engine.find("x").unwrap(), engine.find("y").unwrap());

    let spend = b.spend(&[(TxId([9; 32]), 0)], &[("z", 7)]);
    let event = engine
        .process_transaction(&spend)
        .unwrap()
        .expect("unites x,y");
    assert_eq!(event.component_sizes, vec![1, 1]);
    assert_eq!(event.increases, vec![1]);
    assert_eq!(engine.find("x").unwrap(), engine.find("y").unwrap());
    // A single multisig input resolves to two addresses: non-trivial.
    assert!(engine.log().tx_meta()[1].is_nontrivial);
}

#[test]
fn unknown_address_and_representative_errors() {
    let engine = ClusterEngine::new(ResolutionMode::Strict);
    assert!(matches!(
        engine.find("nope"),
        Err(EngineError::UnknownAddress(_))
    ));
    assert!(matches!(
        engine.balance("nope"),
        Err(EngineError::UnknownAddress(_))
    ));
    assert!(matches!(
        engine.cluster_size(AddressId(0)),
        Err(EngineError::NotARepresentative(_))
    ));
}

#[test]
fn non_representative_member_is_rejected_by_cluster_size() {
    let mut b = ChainBuilder::new();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    let cb = b.coinbase(&[("a", 1), ("b", 1)]);
    let cb_id = cb.txid;
    let unite = b.spend(&[(cb_id, 0), (cb_id, 1)], &[("c", 2)]);
    run(&mut engine, &[cb, unite]);
    let b_id = engine.addresses().get("b").unwrap();
    assert!(matches!(
        engine.cluster_size(b_id),
        Err(EngineError::NotARepresentative(_))
    ));
}

#[test]
fn snapshot_of_empty_engine_restores_empty() {
    let engine = ClusterEngine::new(ResolutionMode::Strict);
    let mut bytes = Vec::new();
    engine.snapshot_to(&mut bytes).unwrap();
    let restored = ClusterEngine::restore_from(&mut bytes.as_slice()).unwrap();
    assert_eq!(restored.processed(), 0);
    assert_eq!(restored.num_addresses(), 0);
    assert_eq!(restored.index().len(), 0);
    assert_eq!(restored.log().tx_count(), 0);
}

#[test]
fn snapshot_resume_equals_one_shot() {
    use crate::codec::{generate_synthetic, SynthParams};
    let stream = generate_synthetic(&SynthParams {
        seed: 11,
        num_transactions: 600,
        ..SynthParams::default()
    })
    .unwrap();

    let mut one_shot = ClusterEngine::new(ResolutionMode::Strict);
    run(&mut one_shot, &stream.records);

    let mut prefix = ClusterEngine::new(ResolutionMode::Strict);
    run(&mut prefix, &stream.records[..300]);
    let mut bytes = Vec::new();
    prefix.snapshot_to(&mut bytes).unwrap();
    let mut resumed = ClusterEngine::restore_from(&mut bytes.as_slice()).unwrap();
    run(&mut resumed, &stream.records[300..]);

    assert_eq!(resumed.processed(), one_shot.processed());
    assert_eq!(resumed.num_addresses(), one_shot.num_addresses());
    assert_eq!(resumed.log().merge_events(), one_shot.log().merge_events());
    assert_eq!(resumed.log().tx_meta(), one_shot.log().tx_meta());
    for id in 0..one_shot.num_addresses() as u32 {
        let id = AddressId(id);
        assert_eq!(resumed.find_id(id).unwrap(), one_shot.find_id(id).unwrap());
        assert_eq!(
            resumed.balance_id(id).unwrap(),
            one_shot.balance_id(id).unwrap()
        );
    }
    // And the snapshots themselves agree bytewise.
    let mut a = Vec::new();
    let mut b = Vec::new();
    one_shot.snapshot_to(&mut a).unwrap();
    resumed.snapshot_to(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn first_reach_log_matches_merge_events() {
    use crate::codec::{generate_synthetic, SynthParams};
    let stream = generate_synthetic(&SynthParams {
        seed: 14,
        num_transactions: 800,
        p_reuse: 0.4,
        ..SynthParams::default()
    })
    .unwrap();
    let mut engine = ClusterEngine::new(ResolutionMode::Strict);
    run(&mut engine, &stream.records);
    // A cluster first reaches two addresses exactly when a merge unites
    // singletons only.
    let derived: Vec<(AddressId, u64)> = engine
        .log()
        .merge_events()
        .iter()
        .filter(|e| e.large_component_count() == 0)
        .map(|e| (e.resulting_rep, e.tx_ordinal))
        .collect();
    let stored: Vec<(AddressId, u64)> = engine
        .log()
        .first_reach()
        .iter()
        .map(|fr| (fr.rep, fr.tx_ordinal))
        .collect();
    assert!(!stored.is_empty());
    assert_eq!(stored, derived);
    for fr in engine.log().first_reach() {
        assert_eq!(
            fr.timestamp,
            engine.log().tx_meta()[fr.tx_ordinal as usize].timestamp
        );
    }
}

#[test]
fn snapshot_is_deterministic_for_identical_history() {
    use crate::codec::{generate_synthetic, SynthParams};
    let stream = generate_synthetic(&SynthParams {
        seed: 5,
        num_transactions: 200,
        ..SynthParams::default()
    })
    .unwrap();
    let make = || {
        let mut e = ClusterEngine::new(ResolutionMode::Strict);
        run(&mut e, &stream.records);
        let mut bytes = Vec::new();
        e.snapshot_to(&mut bytes).unwrap();
        bytes
    };
    assert_eq!(make(), make());
}

#[test]
fn snapshot_version_and_corruption_errors() {
    let engine = ClusterEngine::new(ResolutionMode::Strict);
    let mut bytes = Vec::new();
    engine.snapshot_to(&mut bytes).unwrap();

    let mut wrong_version = bytes.clone();
    wrong_version[4] = 99;
    assert!(matches!(
        ClusterEngine::restore_from(&mut wrong_version.as_slice()),
        Err(EngineError::VersionMismatch { found: 99, .. })
    ));

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    assert!(matches!(
        ClusterEngine::restore_from(&mut bad_magic.as_slice()),
        Err(EngineError::CorruptSnapshot(_))
    ));

    let truncated = &bytes[..bytes.len() - 3];
    assert!(matches!(
        ClusterEngine::restore_from(&mut &truncated[..]),
        Err(EngineError::CorruptSnapshot(_))
    ));

    let mut trailing = bytes.clone();
    trailing.push(0);
    assert!(matches!(
        ClusterEngine::restore_from(&mut trailing.as_slice()),
        Err(EngineError::CorruptSnapshot(_))
    ));
}
