use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include "shapeopt.h"
int main(void) {
    ShapeoptMesh *m = NULL;
    size_t entry_size = sizeof(ShapeoptEntry);
    ShapeoptStatus s = shapeopt_mesh_load("x.msh", &m);
    (void)entry_size;
    return s == SHAPEOPT_STATUS_OK ? 0 : (int)s;
}
"#;

fn syntax_check(compiler: &str, lang: &str) {
    let include = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new(compiler)
        .args([
            "-x",
            lang,
            "-fsyntax-only",
            "-Wall",
            "-Wextra",
            "-Werror",
            "-I",
        ])
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("{compiler} not found, skipping");
            return;
        }
    };
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn header_compiles_as_c() {
    syntax_check("cc", "c");
}

#[test]
fn header_compiles_as_cpp() {
    syntax_check("c++", "c++");
}
