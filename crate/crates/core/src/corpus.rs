//! The shipped example programs.

use crate::ir::{parse, Function};

pub const FILES: [(&str, &str); 11] = [
    ("mp", include_str!("../corpus/mp.rmcir")),
    ("mp_loop", include_str!("../corpus/mp_loop.rmcir")),
    ("sb_push", include_str!("../corpus/sb_push.rmcir")),
    ("overlap", include_str!("../corpus/overlap.rmcir")),
    ("cond", include_str!("../corpus/cond.rmcir")),
    ("loop", include_str!("../corpus/loop.rmcir")),
    ("selfdep", include_str!("../corpus/selfdep.rmcir")),
    ("widget", include_str!("../corpus/widget.rmcir")),
    ("widget_unscoped", include_str!("../corpus/widget_unscoped.rmcir")),
    ("ringbuf", include_str!("../corpus/ringbuf.rmcir")),
    ("spinlock", include_str!("../corpus/spinlock.rmcir")),
];

pub fn source(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Functions of a corpus file. Panics on unknown names or parse errors,
/// both of which are bugs in the shipped files.
pub fn functions(name: &str) -> Vec<Function> {
    let src = source(name).unwrap_or_else(|| panic!("no corpus file `{name}`"));
    parse(src).unwrap_or_else(|d| panic!("corpus file `{name}` does not parse: {d:?}")).functions
}

/// `(file, function)` for every function in the corpus.
pub fn all() -> Vec<(&'static str, Function)> {
    FILES.iter().flat_map(|(n, _)| functions(n).into_iter().map(move |f| (*n, f))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{print, validate};

    #[test]
    fn every_file_is_valid_and_round_trips() {
        for (file, f) in all() {
            assert_eq!(validate(&f), vec![], "{file}/{}", f.name);
            let again = crate::ir::parse_function(&print(&f)).unwrap();
            assert_eq!(again, f, "{file}/{}", f.name);
        }
    }
}
