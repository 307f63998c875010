mod laws;

use laws::{check_law, LAWS};

fn law(i: usize) {
    if let Err(e) = check_law(i, 10_000, 0) {
        panic!("{} fails: {e}", LAWS[i]);
    }
}

#[test]
fn wp_is_sound() {
    law(0);
}

#[test]
fn concat_is_associative() {
    law(1);
}

#[test]
fn wp_distributes_over_concat() {
    law(2);
}

#[test]
fn restriction_composes_by_union() {
    law(3);
}

#[test]
fn renaming_composes() {
    law(4);
}
