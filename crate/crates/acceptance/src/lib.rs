//! Holds the `acceptance` test target; run it with `cargo test -p layoutforge-acceptance --test acceptance`.
