//! Golden files for the Dekker example: the extension by the first
//! thread's store and load, and the happens-before graph of the witness
//! computation. Run with `UPDATE_GOLDEN=1` to rewrite the files.

use lazy_tso::hb::build_hb;
use lazy_tso::lazy::{extend, Image};
use lazy_tso::program::{parse, print, InstrRef, Program};
use lazy_tso::semantics::{apply, Label, MachineState, Mode};
use std::path::PathBuf;

const DEKKER: &str = "domain 2;
addresses x, y;
thread t1 {
  init q0;
  q0 -> q1 : store x <- 1;
  q1 -> q2 : load r1 <- y;
  q2 -> q3 : assume r1 == 0;
}
thread t2 {
  init p0;
  p0 -> p1 : store y <- 1;
  p1 -> p2 : load r2 <- x;
  p2 -> p3 : assume r2 == 0;
}
goal {
  t1 @ q3, t2 @ p3;
}";

fn check_golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from the golden file");
}

fn dekker() -> Program {
    let mut p = parse(DEKKER).unwrap();
    p.name = "dekker".into();
    p
}

fn first_thread_sigma() -> Vec<InstrRef> {
    vec![InstrRef { thread: 0, index: 0 }, InstrRef { thread: 0, index: 1 }]
}

#[test]
fn dekker_extension_matches_golden() {
    let p = dekker();
    let ext = extend(&p, &first_thread_sigma(), true, 1).unwrap();
    check_golden("dekker_extension.prog", &print(&ext.program));
}

/// The delete-mode extension has the shape of the figure: two original
/// instructions of `t1`, the buffered pair `ar_1 := x; vr_1 := 1`, both
/// branches of the load check, the closing flush and the flush-and-fence
/// exit back to the state after the store.
#[test]
fn dekker_extension_structure() {
    let p = dekker();
    let ext = extend(&p, &first_thread_sigma(), true, 1).unwrap();
    let r = &ext.program;
    let t1 = &r.threads[0];
    assert_eq!(t1.instructions.len(), 11);
    assert_eq!(ext.aux.added_instructions, 9);
    assert_eq!(r.threads[1], p.threads[1]);
    let cmds: Vec<String> = t1
        .instructions
        .iter()
        .map(|i| {
            format!(
                "{} -> {} : {}",
                t1.state_name(i.src),
                t1.state_name(i.dst),
                lazy_tso::program::print_command(r, &i.cmd)
            )
        })
        .collect();
    let has = |needle: &str| cmds.iter().any(|c| c.contains(needle));
    assert!(!has("q0 -> q1"), "the first store is deleted: {cmds:#?}");
    for needle in [
        "q1 -> q2 : load r1 <- y",
        "q2 -> q3 : assume r1 == 0",
        "q0 -> ",
        ": mfence",
    ] {
        assert!(has(needle), "missing `{needle}` in {cmds:#?}");
    }
    let stores = t1.instructions.iter().filter(|i| i.cmd.is_store()).count();
    let fences = t1.instructions.iter().filter(|i| i.cmd.is_fence()).count();
    let loads = t1.instructions.iter().filter(|i| i.cmd.is_load()).count();
    assert_eq!((stores, fences, loads), (2, 1, 2));
    // The fence exit ends in the state after the deleted store.
    let fence = t1.instructions.iter().find(|i| i.cmd.is_fence()).unwrap();
    assert_eq!(t1.state_name(fence.dst), "q1");
    // The closing flush ends where the load ends.
    let q2 = t1.state_index("q2").unwrap();
    assert!(t1.instructions.iter().any(|i| i.cmd.is_store() && i.dst == q2));
    // Both assumptions on ar_1 map to the original load.
    let load_id = &p.threads[0].instructions[1].id;
    let to_load = t1
        .instructions
        .iter()
        .filter(|i| ext.projection.image(&i.id) == &Image::Instr(load_id.clone()))
        .count();
    assert!(to_load >= 2);
}

#[test]
fn witness_hb_matches_golden() {
    let p = dekker();
    let labels = [
        Label::Exec { thread: 0, instr: 0 },
        Label::Exec { thread: 0, instr: 1 },
        Label::Exec { thread: 1, instr: 0 },
        Label::Flush { thread: 1 },
        Label::Exec { thread: 1, instr: 1 },
        Label::Flush { thread: 0 },
    ];
    let mut s = MachineState::initial(&p);
    let mut events = Vec::new();
    for l in labels {
        s = apply(&p, &s, Mode::Tso, l, None, Some(&mut events)).unwrap();
    }
    let g = build_hb(&events).unwrap();
    assert_eq!(g.edge_count(), 6);
    check_golden("dekker_witness_hb.txt", &g.export(&p));
}
