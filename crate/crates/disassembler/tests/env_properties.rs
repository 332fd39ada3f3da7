use proptest::prelude::*;
use tmn_disassembler::{make_env, Action, Env, EnvState, TaskKind};

fn check_invariants(env: &Env, state: &EnvState) {
    let cells = env.spec().width * env.spec().height;
    assert!(!env.is_chassis(state.gripper));
    let mut held = 0;
    for i in 0..state.part_count() {
        match state.part_cell(i) {
            None => held += 1,
            Some(c) => {
                assert!(c < cells);
                assert!(env.is_pad(c), "part {i} off pad");
                assert!(state.part_level(i).unwrap() < state.stack_height(c));
            }
        }
    }
    assert_eq!(held, usize::from(state.held.is_some()));
    for c in 0..cells {
        let mut levels: Vec<u8> = (0..state.part_count())
            .filter(|&i| state.part_cell(i) == Some(c))
            .map(|i| state.part_level(i).unwrap())
            .collect();
        levels.sort_unstable();
        assert_eq!(
            levels,
            (0..levels.len() as u8).collect::<Vec<_>>(),
            "stack gap at {c}"
        );
    }
}

proptest! {
    #[test]
    fn random_walks_keep_layout_consistent(
        task in 0usize..4,
        seed in any::<u64>(),
        actions in prop::collection::vec(0usize..Action::COUNT, 1..300),
    ) {
        let kind = TaskKind::ALL[task];
        let mut env = make_env(kind.spec(), seed).unwrap();
        let start = env.reset();
        check_invariants(&env, &start);
        let mut state = start;
        for a in actions {
            let action = Action::from_index(a).unwrap();
            let t = env.transition(&state, action, env.goal());
            prop_assert!([-1.0, 0.0, -10.0].contains(&t.reward));
            prop_assert_eq!(t.terminated, env.goal().is_achieved(&t.next));
            prop_assert_eq!(t.collided, t.reward == -10.0);
            if t.collided {
                prop_assert_eq!(t.next.gripper, state.gripper);
            }
            check_invariants(&env, &t.next);
            state = t.next;
        }
    }

    #[test]
    fn episodes_end_by_the_step_cap(task in 0usize..4, seed in any::<u64>()) {
        let mut env = make_env(TaskKind::ALL[task].spec(), seed).unwrap();
        env.reset();
        let mut n = 0;
        loop {
            let step = env.step(n % Action::COUNT).unwrap();
            n += 1;
            if step.terminated || step.truncated {
                break;
            }
            prop_assert!(n < env.max_steps() as usize);
        }
        prop_assert!(env.step(0).is_err());
    }
}
