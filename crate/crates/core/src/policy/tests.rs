use std::collections::BTreeSet;

use proptest::prelude::*;

use super::schema::{all_fields, field_type, EnumType, FieldType};
use super::*;
use crate::claims::{
    ClaimKind, ClaimRequest, Endorsement, Evidence, GeoPoint, ManifestRef, ReferenceManifest,
};
use crate::crypto::Digest;
use crate::fixtures;
use crate::hwemu::{create_device, DeviceState, DIK_HANDLE};

struct Scene {
    evidence: Evidence,
    endorsements: Vec<Endorsement>,
    manifests: Vec<ReferenceManifest>,
}

impl Scene {
    fn input(&self, now: u64, issued: Option<u64>) -> EvalInput<'_> {
        EvalInput {
            evidence: &self.evidence,
            endorsements: &self.endorsements,
            manifests: &self.manifests,
            now,
            challenge_issued_at: issued,
        }
    }
}

fn scene_with(model: &str, migratable: bool, location: Option<GeoPoint>, usage: bool) -> Scene {
    let e = fixtures::endorser();
    let mut d: DeviceState = create_device([3; 32], &ManifestRef::new(model), e.catalog()).unwrap();
    let k = d.create_key(DIK_HANDLE, migratable).unwrap();
    let mut sel = vec![
        ClaimRequest::KeyProvenance(k),
        ClaimRequest::KeyType(k),
        ClaimRequest::SystemConfig,
    ];
    if let Some(p) = location {
        d.set_location(p);
        sel.push(ClaimRequest::GeoLocation);
    }
    if usage {
        d.sign_transaction(k, b"tx").unwrap();
        sel.push(ClaimRequest::UsageLog);
    }
    Scene {
        evidence: d.quote([7; 16], &sel).unwrap(),
        endorsements: vec![e.make_endorsement(&d.identity(), d.manifest_ref()).unwrap()],
        manifests: e.catalog().iter().cloned().collect(),
    }
}

fn scene() -> Scene {
    scene_with(fixtures::MODEL_A, false, None, false)
}

#[test]
fn parses_single_rule() {
    let p = parse_policy("rule r1 mandatory: key_type.migratable == false").unwrap();
    assert_eq!(p.rules.len(), 1);
    assert_eq!(p.rules[0].id, "r1");
    assert_eq!(p.rules[0].severity, Severity::Mandatory);
}

#[test]
fn duplicate_rule_id_names_second_line() {
    let src = "rule r1 mandatory: true\nrule r2 advisory: true\nrule r1 advisory: false\n";
    let err = parse_policy(src).unwrap_err();
    assert_eq!(
        err,
        PolicyError::DuplicateRuleId {
            id: "r1".into(),
            line: 3,
            col: 6,
            first_line: 1
        }
    );
}

#[test]
fn unknown_field_is_type_error() {
    let err = parse_policy("rule g mandatory: geo_location.speed > 3").unwrap_err();
    assert!(
        matches!(
            err,
            PolicyError::Type {
                line: 1,
                col: 19,
                ..
            }
        ),
        "{err}"
    );
}

#[test]
fn type_errors_for_operators_and_literals() {
    for src in [
        "rule a mandatory: key_type.migratable < true",
        "rule a mandatory: key_type.migratable == 3",
        "rule a mandatory: manifest.hardware_class == quantum",
        "rule a mandatory: manifest.approved_configs == 1",
        "rule a mandatory: key_type.kind in manifest.approved_configs",
        "rule a mandatory: endorsed(geo_location.lat)",
        "rule a mandatory: reaches_ek(key_type)",
        "rule a mandatory: inside(usage_log, [(0, 0), (0, 1), (1, 1)])",
        "rule a mandatory: nosuch.field == 1",
    ] {
        assert!(
            matches!(parse_policy(src), Err(PolicyError::Type { .. })),
            "{src}"
        );
    }
}

#[test]
fn syntax_errors_carry_positions() {
    let cases = [
        ("rule a mandatory key_type.migratable == false", 1, 18),
        ("rule a sometimes: true", 1, 8),
        ("rule a mandatory: true and", 1, 27),
        ("\n\nrule a mandatory: (true", 3, 24),
        ("feature x: true", 1, 1),
        (
            "rule a mandatory: inside(geo_location, [(0, 0), (1, 1)])",
            1,
            40,
        ),
        (
            "rule a mandatory: system_config.config_digest == 0xabc",
            1,
            50,
        ),
        ("rule a mandatory: true true", 1, 24),
        ("rule a mandatory: key_type.migratable == false $", 1, 48),
    ];
    for (src, line, col) in cases {
        match parse_policy(src) {
            Err(PolicyError::Syntax {
                line: l, col: c, ..
            }) => {
                assert_eq!((l, c), (line, col), "{src}")
            }
            other => panic!("{src}: {other:?}"),
        }
    }
}

#[test]
fn loa_block_validation() {
    assert!(parse_policy("loa:\n level 2: ghost\n").is_err());
    assert!(parse_policy("loa:\n feature a: true\n level 5: a\n").is_err());
    assert!(parse_policy("loa:\n feature a: true\n level 2: a\n level 2: a\n").is_err());
    assert!(parse_policy("loa:\nloa:\n").is_err());
    assert!(parse_policy("rule a mandatory: true\npolicy late\n").is_err());
}

#[test]
fn shipped_policies_parse() {
    for src in [
        BASELINE_SOURCE,
        include_str!("../../policies/overlay-strict.apl"),
        include_str!("../../policies/overlay-alpine.apl"),
    ] {
        parse_policy(src).unwrap();
    }
    let broken = include_str!("../../policies/corpus/broken.apl");
    assert!(matches!(
        parse_policy(broken),
        Err(PolicyError::DuplicateRuleId { line: 6, .. })
    ));
}

#[test]
fn baseline_trusted_non_migratable_reaches_level_4() {
    let s = scene();
    let v = evaluate(&baseline(), &s.input(10, Some(5)));
    assert!(v.pass, "{v:?}");
    assert_eq!(v.loa, Some(4));
    assert!(v.advisory_failures.is_empty());
}

#[test]
fn baseline_grades_weaker_wallets_lower() {
    let s = scene_with(fixtures::MODEL_A, true, None, false);
    assert_eq!(evaluate(&baseline(), &s.input(10, Some(5))).loa, Some(2));

    let s = scene_with(fixtures::SOFT_WALLET, false, None, false);
    assert_eq!(evaluate(&baseline(), &s.input(10, Some(5))).loa, Some(1));

    let s = scene();
    let stale = evaluate(&baseline(), &s.input(500, Some(5)));
    assert_eq!(stale.loa, Some(3));
    assert_eq!(stale.advisory_failures[0].rule_id, "fresh");
}

#[test]
fn geofence_outside_fails_only_that_rule() {
    let zurich = GeoPoint::from_degrees(47.37, 8.54, 408.0);
    let s = scene_with(fixtures::MODEL_A, false, Some(zurich), false);
    let overlay = parse_policy(
        "rule geo mandatory: inside(geo_location, [(40, -75), (40, -73), (41, -73), (41, -75)])",
    )
    .unwrap();
    let v = evaluate(&baseline().with_overlay(&overlay), &s.input(10, Some(5)));
    assert!(!v.pass);
    let ids: Vec<&str> = v.failed_rules.iter().map(|f| f.rule_id.as_str()).collect();
    assert_eq!(ids, ["geo"]);
    assert_eq!(v.failed_rules[0].reason, FailureReason::PredicateFalse);
    assert_eq!(v.loa, None);

    let home = parse_policy(include_str!("../../policies/overlay-alpine.apl")).unwrap();
    let v = evaluate(&baseline().with_overlay(&home), &s.input(10, Some(5)));
    assert!(v.advisory_failures.iter().all(|f| f.rule_id != "geofence"));
}

#[test]
fn missing_claim_is_a_distinct_failure() {
    let s = scene();
    let p = parse_policy("rule usage mandatory: usage_log.chain_valid == true").unwrap();
    let v = evaluate(&p, &s.input(0, None));
    assert!(!v.pass);
    assert_eq!(
        v.failed_rules[0].reason,
        FailureReason::Missing(Missing::Claim(ClaimKind::UsageLog))
    );
    assert_eq!(v.failed_rules[0].code(), "usage:missing_claim:usage_log");

    let s = scene_with(fixtures::MODEL_A, false, None, true);
    assert!(evaluate(&p, &s.input(0, None)).pass);
}

#[test]
fn kleene_connectives_absorb_missing_inputs() {
    let s = scene();
    let p = parse_policy(
        "rule a mandatory: usage_log.count > 0 or true\n\
         rule b mandatory: not (usage_log.count > 0 and false)\n\
         rule c mandatory: not usage_log.count > 0",
    )
    .unwrap();
    let v = evaluate(&p, &s.input(0, None));
    let ids: Vec<&str> = v.failed_rules.iter().map(|f| f.rule_id.as_str()).collect();
    assert_eq!(ids, ["c"]);
}

#[test]
fn endorsed_and_literal_sets() {
    let s = scene();
    let p = parse_policy(
        "rule e mandatory: endorsed(system_config.config_digest)\n\
         rule k mandatory: key_type.kind in [application_key, device_identity_key]\n\
         rule m mandatory: manifest.manufacturer == \"mfr-1\"",
    )
    .unwrap();
    let v = evaluate(&p, &s.input(0, None));
    assert!(v.pass, "{v:?}");

    let mut no_endorsement = scene();
    no_endorsement.endorsements.clear();
    let v = evaluate(&p, &no_endorsement.input(0, None));
    assert_eq!(
        v.failed_rules[0].reason,
        FailureReason::Missing(Missing::Endorsement)
    );
}

#[test]
fn point_in_polygon_even_odd() {
    let square = [(0.0, 0.0), (0.0, 10.0), (10.0, 10.0), (10.0, 0.0)];
    assert!(point_in_polygon(5.0, 5.0, &square));
    assert!(!point_in_polygon(15.0, 5.0, &square));
    assert!(!point_in_polygon(5.0, -1.0, &square));
    // A "C" shape: the notch is outside.
    let c = [
        (0.0, 0.0),
        (0.0, 10.0),
        (3.0, 10.0),
        (3.0, 3.0),
        (7.0, 3.0),
        (7.0, 10.0),
        (10.0, 10.0),
        (10.0, 0.0),
    ];
    assert!(point_in_polygon(5.0, 1.0, &c));
    assert!(!point_in_polygon(5.0, 6.0, &c));
    assert!(point_in_polygon(8.0, 6.0, &c));
    assert!(!point_in_polygon(f64::NAN, 1.0, &c));
    assert!(!point_in_polygon(1.0, 1.0, &[]));
}

#[test]
fn overlay_replaces_same_id_and_appends_rest() {
    let base = parse_policy("policy b\nrule x mandatory: true\nrule y mandatory: true").unwrap();
    let over = parse_policy("policy o\nrule y mandatory: false\nrule z advisory: true").unwrap();
    let merged = base.with_overlay(&over);
    assert_eq!(merged.id.as_deref(), Some("o"));
    let ids: Vec<&str> = merged.rules.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["x", "y", "z"]);
    assert_eq!(merged.rule("y").unwrap().predicate, Expr::Const(false));
    assert_eq!(merged.loa_table, base.loa_table);
}

fn default_features() -> Vec<String> {
    baseline()
        .loa_table
        .feature_names()
        .map(String::from)
        .collect()
}

#[test]
fn assign_loa_examples() {
    let table = baseline().loa_table;
    let set = |names: &[&str]| names.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
    assert_eq!(assign_loa(&BTreeSet::new(), &table), 1);
    assert_eq!(assign_loa(&set(&["trusted_hardware"]), &table), 2);
    assert_eq!(
        assign_loa(
            &set(&[
                "trusted_hardware",
                "non_migratable_key",
                "onboard_generated"
            ]),
            &table
        ),
        3
    );
    assert_eq!(
        assign_loa(&default_features().into_iter().collect(), &table),
        4
    );
    assert_eq!(assign_loa(&set(&["fresh", "approved_config"]), &table), 1);
}

#[test]
fn assign_loa_is_monotone_over_every_subset() {
    let table = baseline().loa_table;
    let features = default_features();
    let n = features.len();
    let subset = |mask: u32| -> BTreeSet<String> {
        (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| features[i].clone())
            .collect()
    };
    for mask in 0..(1u32 << n) {
        let base = assign_loa(&subset(mask), &table);
        assert!((1..=4).contains(&base));
        for extra in 0..n {
            let bigger = assign_loa(&subset(mask | (1 << extra)), &table);
            assert!(bigger >= base, "mask {mask:b} + {extra}");
        }
    }
}

#[test]
fn pretty_print_round_trips_shipped_policies() {
    for src in [
        BASELINE_SOURCE,
        include_str!("../../policies/overlay-strict.apl"),
        include_str!("../../policies/overlay-alpine.apl"),
    ] {
        let p = parse_policy(src).unwrap();
        let printed = p.to_string();
        assert_eq!(parse_policy(&printed).unwrap(), p, "{printed}");
    }
}

#[test]
fn precedence_survives_printing() {
    let p =
        parse_policy("rule a mandatory: true and (false or true) or not (true and false)").unwrap();
    assert_eq!(
        p.rules[0].predicate.to_string(),
        "true and (false or true) or not (true and false)"
    );
    let right_nested = Expr::And(
        Box::new(Expr::Const(true)),
        Box::new(Expr::And(
            Box::new(Expr::Const(false)),
            Box::new(Expr::Const(true)),
        )),
    );
    assert_eq!(right_nested.to_string(), "true and (false and true)");
}

fn literal_for(ty: FieldType) -> BoxedStrategy<Literal> {
    match ty {
        FieldType::Bool => any::<bool>().prop_map(Literal::Bool).boxed(),
        FieldType::Num => prop_oneof![
            (-1000i32..1000).prop_map(|n| Literal::Num(n as f64)),
            (-1.0e6f64..1.0e6).prop_map(Literal::Num),
        ]
        .boxed(),
        FieldType::Digest => any::<[u8; 32]>()
            .prop_map(|b| Literal::Digest(Digest(b)))
            .boxed(),
        FieldType::Str => "[ -~]{0,12}".prop_map(Literal::Str).boxed(),
        FieldType::Enum(e) => {
            let vs: Vec<Literal> = e
                .variants()
                .iter()
                .map(|v| Literal::Variant(v.to_string()))
                .collect();
            proptest::sample::select(vs).boxed()
        }
        FieldType::DigestSet => unreachable!(),
    }
}

fn path_of(source: Source, field: &str) -> FieldPath {
    FieldPath {
        source,
        field: field.to_string(),
    }
}

fn arb_atom() -> BoxedStrategy<Atom> {
    let scalar: Vec<(Source, &'static str)> = all_fields()
        .into_iter()
        .filter(|(s, f)| field_type(*s, f) != Some(FieldType::DigestSet))
        .collect();
    let ops = vec![
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
    let compare = proptest::sample::select(scalar.clone())
        .prop_flat_map(move |(s, f)| {
            let ty = field_type(s, f).unwrap();
            let ops = if ty == FieldType::Num {
                ops.clone()
            } else {
                vec![CmpOp::Eq, CmpOp::Ne]
            };
            (
                Just(path_of(s, f)),
                proptest::sample::select(ops),
                literal_for(ty),
            )
        })
        .prop_map(|(path, op, value)| Atom::Compare { path, op, value });
    let member_list = proptest::sample::select(scalar)
        .prop_flat_map(|(s, f)| {
            let ty = field_type(s, f).unwrap();
            (
                Just(path_of(s, f)),
                prop::collection::vec(literal_for(ty), 0..4),
            )
        })
        .prop_map(|(path, items)| Atom::Member {
            path,
            set: SetRef::Literals(items),
        });
    let member_set = Just(Atom::Member {
        path: path_of(Source::Claim(ClaimKind::SystemConfig), "config_digest"),
        set: SetRef::Path(path_of(Source::Manifest, "approved_configs")),
    });
    let inside = prop::collection::vec((-90.0f64..90.0, -180.0f64..180.0), 3..7)
        .prop_map(|polygon| Atom::Inside { polygon });
    let endorsed = proptest::sample::select(vec![
        path_of(Source::Claim(ClaimKind::KeyType), "migratable"),
        path_of(Source::Claim(ClaimKind::KeyType), "kind"),
        path_of(Source::Claim(ClaimKind::SystemConfig), "config_digest"),
    ])
    .prop_map(Atom::Endorsed);
    prop_oneof![
        4 => compare,
        1 => member_list,
        1 => member_set,
        1 => inside,
        1 => endorsed,
        1 => Just(Atom::ReachesEk),
    ]
    .boxed()
}

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        1 => any::<bool>().prop_map(Expr::Const),
        4 => arb_atom().prop_map(Expr::Atom),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Not(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
        ]
    })
}

fn arb_program() -> impl Strategy<Value = PolicyProgram> {
    let rules = prop::collection::vec((arb_expr(), any::<bool>()), 0..6).prop_map(|rs| {
        rs.into_iter()
            .enumerate()
            .map(|(i, (predicate, mandatory))| Rule {
                id: format!("r{i}"),
                severity: if mandatory {
                    Severity::Mandatory
                } else {
                    Severity::Advisory
                },
                predicate,
            })
            .collect::<Vec<_>>()
    });
    let table = prop::collection::vec(arb_expr(), 0..4).prop_flat_map(|exprs| {
        let names: Vec<String> = (0..exprs.len()).map(|i| format!("f{i}")).collect();
        let features: Vec<(String, Expr)> = names.iter().cloned().zip(exprs).collect();
        let level_sets = if names.is_empty() {
            Just(Vec::new()).boxed()
        } else {
            prop::collection::vec(
                (
                    2u8..=4,
                    prop::sample::subsequence(names.clone(), 1..=names.len()),
                ),
                0..3,
            )
            .boxed()
        };
        (Just(features), level_sets)
    });
    (proptest::option::of("[a-z][a-z0-9-]{0,8}"), rules, table).prop_map(
        |(id, rules, (features, levels))| PolicyProgram {
            id,
            rules,
            loa_table: LoaTable {
                features,
                levels: levels
                    .into_iter()
                    .map(|(l, names)| (l, names.into_iter().collect()))
                    .collect(),
            },
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(p in arb_program()) {
        let printed = p.to_string();
        let reparsed = parse_policy(&printed);
        prop_assert_eq!(reparsed, Ok(p), "{}", printed);
    }

    #[test]
    fn verdict_is_invariant_under_rule_permutation(
        p in arb_program(),
        seed in any::<u64>(),
        now in 0u64..200,
    ) {
        let s = scene_with(fixtures::MODEL_A, seed % 2 == 0, Some(GeoPoint::from_degrees(47.0, 8.0, 0.0)), seed % 3 == 0);
        let mut shuffled = p.clone();
        let n = shuffled.rules.len();
        let mut x = seed;
        for i in (1..n).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.rules.swap(i, (x >> 33) as usize % (i + 1));
        }
        let input = s.input(now, Some(0));
        prop_assert_eq!(evaluate(&p, &input), evaluate(&shuffled, &input));
    }

    #[test]
    fn evaluation_is_total_and_reasoned(p in arb_program(), model in 0usize..3, mig in any::<bool>(), usage in any::<bool>()) {
        let models = [fixtures::MODEL_A, fixtures::MODEL_B, fixtures::SOFT_WALLET];
        let s = scene_with(models[model], mig, None, usage);
        let v = evaluate(&p, &s.input(3, None));
        prop_assert_eq!(v.pass, v.failed_rules.is_empty());
        prop_assert_eq!(v.loa.is_some(), v.pass);
        for f in v.failed_rules.iter().chain(&v.advisory_failures) {
            prop_assert!(!f.code().is_empty());
        }
    }

    #[test]
    fn parser_never_panics(src in "[ -~\n]{0,200}") {
        let _ = parse_policy(&src);
    }
}

#[test]
fn enum_variants_match_literal_table() {
    for e in [
        EnumType::KeyKind,
        EnumType::CreationOrigin,
        EnumType::HardwareClass,
    ] {
        for v in e.variants() {
            let src = format!(
                "rule a mandatory: {} == {v}",
                match e {
                    EnumType::KeyKind => "key_type.kind",
                    EnumType::CreationOrigin => "key_type.creation_origin",
                    EnumType::HardwareClass => "manifest.hardware_class",
                }
            );
            parse_policy(&src).unwrap();
        }
    }
}
