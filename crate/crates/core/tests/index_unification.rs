//! Property tests for index unification over first-order Nat and type terms.

use std::sync::OnceLock;

use codata_core::decl::Ctx;
use codata_core::eval::Fuel;
use codata_core::index_unify::{unify_idx, unify_idx_args, IdxResult};
use codata_core::meta::MetaMap;
use codata_core::syntax::*;
use proptest::prelude::*;

struct Fixture {
    ctx: Ctx,
    nats: Vec<Var>,
    types: Vec<Var>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let nats: Vec<Var> = ["i", "j", "k"].iter().map(|n| Var::fresh(n)).collect();
        let types: Vec<Var> = ["A", "B"].iter().map(|n| Var::fresh(n)).collect();
        let mut ctx = Ctx::new();
        for v in &nats {
            ctx.push(v.clone(), Term::tyctor("Nat", vec![]));
        }
        for v in &types {
            ctx.push(v.clone(), Term::Type);
        }
        Fixture { ctx, nats, types }
    })
}

fn nat_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::ctor("Z", vec![])),
        (0..3usize).prop_map(|i| Term::var(&fixture().nats[i])),
    ];
    leaf.prop_recursive(4, 8, 1, |inner| inner.prop_map(|t| Term::ctor("S", args_of([t]))))
}

fn type_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::tyctor("Nat", vec![])),
        Just(Term::tyctor("Bool", vec![])),
        (0..2usize).prop_map(|i| Term::var(&fixture().types[i])),
    ];
    leaf.prop_recursive(3, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner).prop_map(|(a, b)| Term::tyctor("Fun", args_of([a, b]))),
            (nat_term(), nat_term()).prop_map(|(a, b)| {
                Term::tyctor("Eq", vec![Arg { term: Term::tyctor("Nat", vec![]), implicit: true }, Arg::explicit(a), Arg::explicit(b)])
            }),
        ]
    })
}

fn apply_args(a: &Args, theta: &Subst) -> Term {
    Term::ctor("()", subst_args(a, theta))
}

fn unify_args(a: &Args, b: &Args) -> IdxResult {
    unify_idx_args(&fixture().ctx, a, b, &MetaMap::new(), &mut Fuel::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn unifiers_equate_and_are_idempotent(a in type_term(), b in type_term()) {
        let r = unify_idx(&fixture().ctx, &a, &b, &MetaMap::new(), &mut Fuel::default()).unwrap();
        prop_assert!(!matches!(r, IdxResult::Fail { .. }), "{} = {} undecided", a, b);
        if let IdxResult::Unifier(theta) = r {
            let (a1, b1) = (subst_apply(&a, &theta), subst_apply(&b, &theta));
            prop_assert!(alpha_eq(&a1, &b1), "{} vs {}", a1, b1);
            prop_assert!(alpha_eq(&subst_apply(&a1, &theta), &a1));
        }
    }

    #[test]
    fn argument_order_does_not_matter(a1 in nat_term(), a2 in nat_term(), b1 in type_term(), b2 in type_term()) {
        let forward = unify_args(&args_of([a1.clone(), b1.clone()]), &args_of([a2.clone(), b2.clone()]));
        let backward = unify_args(&args_of([b1, a1]), &args_of([b2, a2]));
        prop_assert_eq!(forward.is_unifier(), backward.is_unifier());
        prop_assert_eq!(forward.is_conflict(), backward.is_conflict());
        if let (IdxResult::Unifier(t1), IdxResult::Unifier(t2)) = (&forward, &backward) {
            // Idempotent most general unifiers agree up to renaming, so each
            // absorbs the other.
            let sides = args_of(fixture().nats.iter().chain(&fixture().types).map(Term::var));
            let via_both = subst_args(&subst_args(&sides, t1), t2);
            prop_assert!(alpha_eq(&Term::ctor("()", via_both), &apply_args(&sides, t2)));
            let via_both = subst_args(&subst_args(&sides, t2), t1);
            prop_assert!(alpha_eq(&Term::ctor("()", via_both), &apply_args(&sides, t1)));
        }
    }

    #[test]
    fn unification_is_symmetric_in_outcome(a in type_term(), b in type_term()) {
        let ab = unify_idx(&fixture().ctx, &a, &b, &MetaMap::new(), &mut Fuel::default()).unwrap();
        let ba = unify_idx(&fixture().ctx, &b, &a, &MetaMap::new(), &mut Fuel::default()).unwrap();
        prop_assert_eq!(ab.is_unifier(), ba.is_unifier());
        prop_assert_eq!(ab.is_conflict(), ba.is_conflict());
    }
}
