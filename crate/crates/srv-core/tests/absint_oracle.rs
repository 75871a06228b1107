//! Stack-machine abstraction checked against a concrete reference
//! interpreter on straight-line programs, plus lattice laws of the abstract
//! stack meet.

mod support;

use proptest::prelude::*;
use srv_core::evm::absint::{exec_block, AbsStack, AbsVal};
use srv_core::evm::disasm::disassemble;

#[test]
fn constant_folding_matches_concrete_execution() {
    let mut rng = support::rng(0x5eed_0060);
    for case in 0..200 {
        let code = support::random_stack_program(&mut rng);
        let d = disassemble(&code).expect("generated program is well-formed");
        let concrete = support::concrete_exec(&d.instructions);
        let out = exec_block(&d.instructions, &AbsStack::unknown());

        assert_eq!(
            out.exit_stack.depth(),
            concrete.len(),
            "case {case}: abstract and concrete stack depths diverge (0x{})",
            hex::encode(&code)
        );
        for (i, want) in concrete.iter().rev().enumerate() {
            assert_eq!(
                out.exit_stack.peek(i),
                AbsVal::Const(*want),
                "case {case}: stack[{i} from top] differs (0x{})",
                hex::encode(&code)
            );
        }
    }
}

fn abs_val_strategy() -> impl Strategy<Value = AbsVal> {
    prop_oneof![
        Just(AbsVal::Top),
        any::<u64>().prop_map(|n| AbsVal::Const(primitive_types::U256::from(n))),
        (0u64..8).prop_map(|n| AbsVal::MapSlot(primitive_types::U256::from(n))),
    ]
}

fn abs_stack_strategy() -> impl Strategy<Value = AbsStack> {
    prop::collection::vec(abs_val_strategy(), 0..6).prop_map(|vals| {
        let mut s = AbsStack::unknown();
        for v in vals {
            s.push(v);
        }
        s
    })
}

proptest! {
    #[test]
    fn meet_is_idempotent(a in abs_stack_strategy()) {
        prop_assert_eq!(a.meet(&a), a);
    }

    #[test]
    fn meet_is_commutative(a in abs_stack_strategy(), b in abs_stack_strategy()) {
        prop_assert_eq!(a.meet(&b), b.meet(&a));
    }

    #[test]
    fn meet_is_associative(
        a in abs_stack_strategy(),
        b in abs_stack_strategy(),
        c in abs_stack_strategy(),
    ) {
        prop_assert_eq!(a.meet(&b).meet(&c), a.meet(&b.meet(&c)));
    }

    /// Every surviving position agrees with both inputs or is Top, at any
    /// probe depth (positions beyond the shorter stack read as Top).
    #[test]
    fn meet_loses_information_monotonically(
        a in abs_stack_strategy(),
        b in abs_stack_strategy(),
    ) {
        let m = a.meet(&b);
        prop_assert!(m.depth() <= a.depth().min(b.depth()));
        for i in 0..8 {
            let v = m.peek(i);
            prop_assert!(
                v == AbsVal::Top || (v == a.peek(i) && v == b.peek(i)),
                "position {} kept a value the inputs disagree on", i
            );
        }
    }
}
