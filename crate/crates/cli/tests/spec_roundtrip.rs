use std::collections::BTreeMap;

use distkit_cli::spec::{parse_model, parse_model_str};
use distkit_cli::{BijectorSpec, Components, ModelSpec, ParamValue};
use proptest::prelude::*;

fn number() -> impl Strategy<Value = f64> {
    prop_oneof![-1e6f64..1e6, Just(0.0), Just(1e-300), Just(-2.5e200), (-20i32..20).prop_map(f64::from)]
}

fn param() -> impl Strategy<Value = ParamValue> {
    prop_oneof![
        number().prop_map(ParamValue::Number),
        prop::collection::vec(number().prop_map(ParamValue::Number), 0..4).prop_map(ParamValue::Array),
        (1usize..3, 1usize..3).prop_flat_map(|(r, c)| {
            prop::collection::vec(prop::collection::vec(number().prop_map(ParamValue::Number), c), r)
                .prop_map(|rows| ParamValue::Array(rows.into_iter().map(ParamValue::Array).collect()))
        }),
        Just(ParamValue::Points),
    ]
}

fn params() -> impl Strategy<Value = BTreeMap<String, ParamValue>> {
    prop::collection::btree_map("[a-z_]{1,8}", param(), 0..3)
}

fn flag() -> impl Strategy<Value = Option<bool>> {
    prop_oneof![Just(None), Just(Some(true)), Just(Some(false))]
}

fn dims() -> impl Strategy<Value = Option<Vec<usize>>> {
    prop::option::of(prop::collection::vec(0usize..5, 0..3))
}

fn bijector() -> impl Strategy<Value = BijectorSpec> {
    let leaf = (
        prop::sample::select(distkit::bijector::BIJECTOR_NAMES),
        params(),
        flag(),
    )
        .prop_map(|(name, params, validate_args)| BijectorSpec::Named {
            name: name.to_string(),
            params,
            validate_args,
        });
    leaf.prop_recursive(2, 6, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|b| BijectorSpec::Invert(Box::new(b))),
            prop::collection::vec(inner, 0..3).prop_map(BijectorSpec::Chain),
        ]
    })
}

fn model() -> impl Strategy<Value = ModelSpec> {
    let leaf = prop_oneof![
        (prop::sample::select(distkit::families::FAMILY_NAMES), params(), flag(), flag()).prop_map(
            |(family, params, validate_args, allow_nan_stats)| ModelSpec::Leaf {
                family: family.to_string(),
                params,
                validate_args,
                allow_nan_stats,
            }
        ),
        (prop::sample::select(vec!["Normal", "Bernoulli"]), params(), prop::option::of(0usize..10)).prop_map(
            |(family, params, steps)| ModelSpec::Autoregressive {
                family: family.to_string(),
                params,
                steps,
            }
        ),
    ];
    // depth counts combinator levels above the leaves, so trees have at most 3 levels
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            (inner.clone(), prop::collection::vec(bijector(), 0..3), dims(), dims()).prop_map(
                |(base, bijectors, batch_shape, event_shape)| ModelSpec::Transformed {
                    base: Box::new(base),
                    bijectors,
                    batch_shape,
                    event_shape,
                }
            ),
            (inner.clone(), prop::option::of(0usize..3)).prop_map(|(base, rank)| ModelSpec::Independent {
                base: Box::new(base),
                rank,
            }),
            (prop::collection::vec(0.0f64..1.0, 1..4), inner.clone()).prop_map(|(probs, c)| ModelSpec::Mixture {
                probs,
                components: Components::Same(Box::new(c)),
            }),
            (prop::collection::vec(0.0f64..1.0, 1..4), prop::collection::vec(inner.clone(), 1..3)).prop_map(
                |(probs, cs)| ModelSpec::Mixture {
                    probs,
                    components: Components::List(cs),
                }
            ),
            ("[a-z]{1,6}\\.ndjson", inner).prop_map(|(points_file, kernel)| ModelSpec::Kde {
                points_file,
                kernel: Box::new(kernel),
            }),
        ]
    })
}

fn depth(m: &ModelSpec) -> usize {
    match m {
        ModelSpec::Leaf { .. } | ModelSpec::Autoregressive { .. } => 1,
        ModelSpec::Transformed { base, .. } | ModelSpec::Independent { base, .. } => 1 + depth(base),
        ModelSpec::Kde { kernel, .. } => 1 + depth(kernel),
        ModelSpec::Mixture { components, .. } => {
            1 + match components {
                Components::Same(c) => depth(c),
                Components::List(cs) => cs.iter().map(depth).max().unwrap_or(0),
            }
        }
    }
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(spec in model()) {
        prop_assert!(depth(&spec) <= 3);
        let text = spec.to_string();
        let back = parse_model_str(&text, "model").unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(parse_model(&back.to_json(), "model").unwrap(), spec);
    }
}

#[test]
fn unknown_keys_are_errors_at_every_level() {
    let cases = [
        (r#"{"family":"Normal","params":{},"extra":1}"#, "model.extra"),
        (r#"{"transformed":{"base":{"family":"Normal"},"bijectors":[{"bijector":"Exp","foo":1}]}}"#, "model.transformed.bijectors[0].foo"),
        (r#"{"mixture":{"probs":[1],"components":[{"family":"Normal","x":0}]}}"#, "model.mixture.components[0].x"),
        (r#"{"kde":{"points_file":"p","kernel":{"family":"Normal"},"bandwidth":1}}"#, "model.kde.bandwidth"),
        (r#"{"independent":{"base":{"family":"Gauss"}}}"#, "model.independent.base.family"),
    ];
    for (text, path) in cases {
        let err = parse_model_str(text, "model").unwrap_err();
        assert!(err.to_string().starts_with(path), "{err}");
        assert_eq!(err.exit_code(), 2);
    }
}
