//! Random well-formed documents for print/parse round trips.

use std::collections::BTreeMap;

use idvault::query::{
    Argument, Operation, OperationType, Pos, QueryDocument, Selection, Value, VariableDefinition,
};
use proptest::prelude::*;
use proptest::strategy::Union;

pub fn name() -> impl Strategy<Value = String> + Clone {
    "[_a-zA-Z][_a-zA-Z0-9]{0,7}"
}

fn enum_name() -> impl Strategy<Value = String> + Clone {
    name().prop_filter("reserved literal", |n| {
        !matches!(n.as_str(), "true" | "false" | "null")
    })
}

fn text() -> impl Strategy<Value = String> + Clone {
    prop_oneof![
        any::<String>(),
        "[ -~]{0,12}",
        Just("quote \" backslash \\ tab \t nl \n cr \r".to_string()),
        Just("\u{1}\u{1f}\u{7f}é😀".to_string()),
    ]
}

pub fn value(vars: Vec<String>) -> BoxedStrategy<Value> {
    let mut leaves: Vec<BoxedStrategy<Value>> = vec![
        any::<i64>().prop_map(Value::Int).boxed(),
        any::<f64>()
            .prop_filter("finite", |f| f.is_finite())
            .prop_map(Value::Float)
            .boxed(),
        text().prop_map(Value::String).boxed(),
        any::<bool>().prop_map(Value::Boolean).boxed(),
        Just(Value::Null).boxed(),
        enum_name().prop_map(Value::Enum).boxed(),
    ];
    if !vars.is_empty() {
        leaves.push(
            proptest::sample::select(vars)
                .prop_map(Value::Variable)
                .boxed(),
        );
    }
    Union::new(leaves)
        .prop_recursive(3, 24, 4, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 0..4).prop_map(Value::List),
                proptest::collection::btree_map(name(), inner, 0..4)
                    .prop_map(|m| Value::Object(m.into_iter().collect())),
            ]
        })
        .boxed()
}

fn arguments(vars: Vec<String>) -> impl Strategy<Value = Vec<Argument>> {
    proptest::collection::btree_map(name(), value(vars), 0..3).prop_map(|m| {
        m.into_iter()
            .map(|(name, value)| Argument { name, value })
            .collect()
    })
}

pub fn selection(vars: Vec<String>) -> BoxedStrategy<Selection> {
    let leaf = (
        proptest::option::of(name()),
        name(),
        arguments(vars.clone()),
    )
        .prop_map(|(alias, field_name, arguments)| Selection {
            alias,
            field_name,
            arguments,
            selection_set: None,
            pos: Pos::default(),
        });
    leaf.prop_recursive(4, 32, 4, move |inner| {
        (
            proptest::option::of(name()),
            name(),
            arguments(vars.clone()),
            proptest::collection::vec(inner, 1..4),
        )
            .prop_map(|(alias, field_name, arguments, set)| Selection {
                alias,
                field_name,
                arguments,
                selection_set: Some(set),
                pos: Pos::default(),
            })
    })
    .boxed()
}

pub fn operation() -> impl Strategy<Value = Operation> {
    proptest::collection::btree_map(name(), (name(), any::<bool>()), 0..4).prop_flat_map(
        |defs: BTreeMap<_, _>| {
            let vars: Vec<String> = defs.keys().cloned().collect();
            let variable_defs: Vec<VariableDefinition> = defs
                .into_iter()
                .map(|(name, (type_ref, non_null))| VariableDefinition {
                    name,
                    type_ref,
                    non_null,
                })
                .collect();
            (
                prop_oneof![Just(OperationType::Query), Just(OperationType::Mutation)],
                proptest::option::of(name()),
                Just(variable_defs),
                proptest::collection::vec(selection(vars), 1..4),
            )
                .prop_map(|(op_type, name, variable_defs, selection_set)| Operation {
                    op_type,
                    name,
                    variable_defs,
                    selection_set,
                    pos: Pos::default(),
                })
        },
    )
}

pub fn document() -> impl Strategy<Value = QueryDocument> {
    proptest::collection::vec(operation(), 1..3).prop_map(|operations| QueryDocument { operations })
}

/// Hand-placed syntax errors and the exact line:column each must be reported at.
pub const MALFORMED: &[(&str, usize, usize)] = &[
    ("{ me(id: ) { id } }", 1, 10),
    ("query {\n  me @include { id }\n}", 2, 6),
    ("mutation {\n  login(input: \"abc\n", 2, 16),
    ("{ a(x: $v) }", 1, 8),
    ("query Q($a: Int, $a: Int) { x }", 1, 18),
    ("{ x(a: 1, a: 2) }", 1, 11),
    ("{ }", 1, 3),
    ("subscription { x }", 1, 1),
    ("{ x(a: 1.5.2) }", 1, 11),
    ("{ x(a: \"\\q\") }", 1, 9),
];

/// The reference registration document as a tree.
pub fn create_user_shape() -> QueryDocument {
    QueryDocument {
        operations: vec![Operation {
            op_type: OperationType::Mutation,
            name: Some("createUser".into()),
            variable_defs: vec![VariableDefinition {
                name: "input".into(),
                type_ref: "createUserInput".into(),
                non_null: false,
            }],
            selection_set: vec![field(
                "createUser",
                vec![Argument {
                    name: "input".into(),
                    value: Value::Variable("input".into()),
                }],
                Some(vec![field(
                    "user",
                    vec![],
                    Some(vec![leaf("username"), leaf("email")]),
                )]),
            )],
            pos: Pos::default(),
        }],
    }
}

/// The reference login document as a tree.
pub fn login_shape() -> QueryDocument {
    QueryDocument {
        operations: vec![Operation {
            op_type: OperationType::Mutation,
            name: Some("Login".into()),
            variable_defs: vec![VariableDefinition {
                name: "input".into(),
                type_ref: "UsersPermissionsLoginInput".into(),
                non_null: true,
            }],
            selection_set: vec![field(
                "login",
                vec![Argument {
                    name: "input".into(),
                    value: Value::Variable("input".into()),
                }],
                Some(vec![
                    leaf("jwt"),
                    field("user", vec![], Some(vec![leaf("username"), leaf("email")])),
                ]),
            )],
            pos: Pos::default(),
        }],
    }
}

fn field(name: &str, arguments: Vec<Argument>, selection_set: Option<Vec<Selection>>) -> Selection {
    Selection {
        alias: None,
        field_name: name.into(),
        arguments,
        selection_set,
        pos: Pos::default(),
    }
}

fn leaf(name: &str) -> Selection {
    field(name, vec![], None)
}
