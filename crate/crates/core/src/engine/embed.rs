use std::fmt::Write;

use crate::error::{Error, Result};

const C_KEYWORDS: &[&str] = &[
    "auto",
    "break",
    "case",
    "char",
    "const",
    "continue",
    "default",
    "do",
    "double",
    "else",
    "enum",
    "extern",
    "float",
    "for",
    "goto",
    "if",
    "inline",
    "int",
    "long",
    "register",
    "restrict",
    "return",
    "short",
    "signed",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "unsigned",
    "void",
    "volatile",
    "while",
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Bool",
    "_Complex",
    "_Generic",
    "_Imaginary",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
];

const BYTES_PER_LINE: usize = 12;

/// `prefix` must be a C identifier that is not a keyword.
pub fn validate_symbol_prefix(prefix: &str) -> Result<()> {
    let mut chars = prefix.chars();
    let ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
    if !ok || C_KEYWORDS.contains(&prefix) {
        return Err(Error::InvalidArgument(format!(
            "{prefix:?} is not a valid C identifier prefix"
        )));
    }
    Ok(())
}

/// C source defining `<prefix>_data` (the image bytes, 4-byte aligned) and
/// `<prefix>_len`.
pub fn emit_embedded_source(image: &[u8], prefix: &str) -> Result<String> {
    validate_symbol_prefix(prefix)?;
    let mut s = String::with_capacity(image.len() * 6 + 256);
    s.push_str("/* Generated model image. Do not edit. */\n");
    s.push_str("#include <stddef.h>\n\n");
    let _ = writeln!(s, "_Alignas(4) const unsigned char {prefix}_data[] = {{");
    for chunk in image.chunks(BYTES_PER_LINE) {
        s.push_str("   ");
        for b in chunk {
            let _ = write!(s, " 0x{b:02x},");
        }
        s.push('\n');
    }
    s.push_str("};\n\n");
    let _ = writeln!(s, "const size_t {prefix}_len = {}u;", image.len());
    Ok(s)
}
